"""HTTP facade over the pipeline for the triage UI.

Reads are concurrent and never block behind jobs; label writes serialize
through the store's single-writer lock; long work (embed/reduce/train/eval)
runs as polled background jobs, one at a time per kind.
"""

from __future__ import annotations

import threading
import traceback
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import classify, evaluate
from .errors import IllegalTransition, UnknownSnippet
from .features import FeatureConfig, import_embeddings, write_embeddings
from .ingest import ManifestRow, load_wav
from .pipeline import embed_from_manifest
from .reduce import (
    UmapConfig,
    farthest_point_indices,
    pca_fit,
    pca_projection_set,
    read_projection,
    umap_fit,
    write_projection,
)
from .resample import resample
from .store import LabelRecord, LabelStore, export_training_set, read_manifest
from .features import embeddings_matrix

SERVE_RATE = 22050
JOB_KINDS = ("embed", "reduce", "train", "eval")


@dataclass
class JobStatus:
    job_id: str
    kind: str
    state: str = "queued"  # queued -> running -> done | failed
    progress: float = 0.0
    result_ref: Optional[str] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "state": self.state,
            "progress": self.progress,
            "result_ref": self.result_ref,
            "error": self.error,
        }


class Workspace:
    """File-backed state for one triage project directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest: list[ManifestRow] = []
        manifest_path = self.root / "manifest.jsonl"
        if manifest_path.exists():
            self.manifest = read_manifest(manifest_path)
        self.by_ref = {row.ref: row for row in self.manifest}
        self.store = LabelStore(self.manifest, self.root / "labels.jsonl")
        self._audio_cache: dict[str, np.ndarray] = {}
        self._audio_lock = threading.Lock()

    def projection_path(self, method: str) -> Path:
        return self.root / f"projection-{method}.jsonl"

    def embeddings_path(self) -> Path:
        return self.root / "embeddings.bin"

    def model_path(self) -> Path:
        return self.root / "model.json"

    def snippet_pcm(self, row: ManifestRow) -> np.ndarray:
        """The snippet's samples at the serving rate, sliced from its source."""
        with self._audio_lock:
            cached = self._audio_cache.get(row.source_path)
        if cached is None:
            clip = resample(load_wav(row.source_path, clip_id=row.clip_id), SERVE_RATE)
            cached = clip.samples
            with self._audio_lock:
                if len(self._audio_cache) > 4:
                    self._audio_cache.clear()
                self._audio_cache[row.source_path] = cached
        duration_s = row.sample_count / row.rate
        start = int(round(row.offset_s * SERVE_RATE))
        length = int(round(duration_s * SERVE_RATE))
        piece = cached[start : start + length]
        if len(piece) < length:
            piece = np.pad(piece, (0, length - len(piece)))
        return piece


class JobRunner:
    """One background job per kind; states move queued -> running -> done/failed."""

    def __init__(self, workspace: Workspace):
        self.ws = workspace
        self.jobs: dict[str, JobStatus] = {}
        self._lock = threading.Lock()

    def get(self, job_id: str) -> Optional[JobStatus]:
        return self.jobs.get(job_id)

    def submit(self, kind: str, params: dict) -> JobStatus:
        with self._lock:
            for job in self.jobs.values():
                if job.kind == kind and job.state in ("queued", "running"):
                    raise RuntimeError(f"a {kind} job is already {job.state}")
            status = JobStatus(job_id=uuid.uuid4().hex[:12], kind=kind)
            self.jobs[status.job_id] = status
        thread = threading.Thread(target=self._run, args=(status, params), daemon=True)
        thread.start()
        return status

    def _run(self, status: JobStatus, params: dict) -> None:
        status.state = "running"
        try:
            result = self._execute(status, params)
            status.progress = 1.0
            status.result_ref = result
            status.state = "done"
        except Exception as exc:  # surfaced to the client via the status
            status.error = f"{type(exc).__name__}: {exc}"
            status.state = "failed"
            traceback.print_exc()

    def _execute(self, status: JobStatus, params: dict) -> str:
        ws = self.ws
        kind = status.kind

        def progress(frac: float) -> None:
            status.progress = min(max(frac, 0.0), 1.0)

        if kind == "embed":
            embs = embed_from_manifest(ws.manifest, FeatureConfig(), progress)
            write_embeddings(ws.embeddings_path(), embs)
            return str(ws.embeddings_path())

        if kind == "reduce":
            method = params.get("method", "pca")
            embs = import_embeddings(ws.embeddings_path())
            if method == "pca":
                proj = pca_projection_set(pca_fit(embs, k=int(params.get("k", 2))), embs)
            elif method == "umap":
                cfg = UmapConfig(
                    n_neighbors=int(params.get("n_neighbors", 10)),
                    min_dist=float(params.get("min_dist", 0.1)),
                    n_epochs=int(params.get("epochs", 200)),
                    seed=int(params.get("seed", 0)),
                )
                proj = umap_fit(embs, cfg)
            else:
                raise ValueError(f"unknown reduce method {method!r}")
            write_projection(ws.projection_path(method), proj)
            return str(ws.projection_path(method))

        if kind == "train":
            embs = import_embeddings(ws.embeddings_path())
            classes = params.get("classes", [])
            pairs, _ = export_training_set(
                ws.store,
                classes=classes or sorted(ws.store.class_inventory()),
                min_count=int(params.get("min_count", 1)),
                background_class=params.get("background_class", "background"),
                background_ratio=float(params.get("background_ratio", 10.0)),
                seed=int(params.get("seed", 0)),
            )
            dataset = classify.make_labeled_set(embs, pairs)
            train_set, val_set, _ = classify.split(
                dataset, classify.SplitSpec(seed=int(params.get("seed", 0)))
            )
            progress(0.2)
            model = classify.train(
                train_set, val_set, classify.TrainConfig(seed=int(params.get("seed", 0)))
            )
            classify.save_model(model, ws.model_path())
            return str(ws.model_path())

        if kind == "eval":
            target = params["target"]
            embs = import_embeddings(ws.embeddings_path())
            model = classify.load_model(ws.model_path())
            probs = classify.predict_batch(model, embeddings_matrix(embs))
            col = model.classes.index(target)
            target_probs = {e.snippet_ref: float(p) for e, p in zip(embs, probs[:, col])}
            truth_path = params.get("truth_path")
            if truth_path is None:
                accepted = ws.store.accepted_labels()
                truth_map = {
                    ref: accepted.get(ref, "background") for ref in target_probs
                }
            else:
                truth_map = evaluate.read_truth_jsonl(truth_path)
            curve = evaluate.sweep(
                target_probs, truth_map, target, evaluate.default_tau_grid()
            )
            out = evaluate.report(curve, ws.root / "report")
            return str(out["summary"])

        raise ValueError(f"unknown job kind {kind!r}")


def create_app(
    data_dir: str | Path,
    ui_dir: str | Path | None = None,
    projection_cap: int = 200_000,
) -> FastAPI:
    ws = Workspace(data_dir)
    runner = JobRunner(ws)
    app = FastAPI(title="pamtriage")
    app.state.workspace = ws
    app.state.runner = runner

    @app.get("/api/projection")
    def get_projection(method: str = "pca"):
        path = ws.projection_path(method)
        if not path.exists():
            return JSONResponse(
                {"detail": f"no {method} projection computed"}, status_code=404
            )
        proj = read_projection(path)
        points = proj.points
        if len(points) > projection_cap:
            keep = farthest_point_indices(proj.coords(), projection_cap)
            points = [points[i] for i in keep]
        labels = ws.store.accepted_labels()
        rows = []
        for p in points:
            row = {
                "clip_id": p.snippet_ref[0],
                "index": p.snippet_ref[1],
                "x": p.x,
                "y": p.y,
            }
            label = labels.get(p.snippet_ref)
            if label is not None:
                row["label"] = label
            rows.append(row)
        return {"method": proj.method, "points": rows}

    @app.get("/api/snippets/{clip_id}/{index}/audio")
    def get_audio(clip_id: str, index: int):
        row = ws.by_ref.get((clip_id, index))
        if row is None:
            return JSONResponse({"detail": "unknown snippet"}, status_code=404)
        if not Path(row.source_path).exists():
            return JSONResponse({"detail": "source file missing"}, status_code=410)
        from .ingest import pcm16_wav_bytes

        wav = pcm16_wav_bytes(ws.snippet_pcm(row), SERVE_RATE)
        return Response(content=wav, media_type="audio/wav")

    @app.post("/api/labels")
    async def post_label(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"detail": "body is not valid JSON"}, status_code=400)
        required = {"clip_id", "index", "class", "state"}
        if not isinstance(body, dict) or not required.issubset(body):
            return JSONResponse(
                {"detail": f"body must carry {sorted(required)}"}, status_code=400
            )
        try:
            rec = LabelRecord(
                clip_id=str(body["clip_id"]),
                snippet_index=int(body["index"]),
                class_name=str(body["class"]),
                state=str(body["state"]),
                provenance=str(body.get("provenance", "human")),
                annotator=str(body.get("annotator", "")),
            )
        except (ValueError, TypeError) as exc:
            return JSONResponse({"detail": str(exc)}, status_code=400)

        prior = ws.store.current((rec.clip_id, rec.snippet_index), rec.class_name)
        idempotent = prior is not None and prior.state == rec.state
        try:
            stored = ws.store.upsert_label(rec)
        except UnknownSnippet as exc:
            return JSONResponse({"detail": str(exc)}, status_code=404)
        except IllegalTransition as exc:
            return JSONResponse({"detail": str(exc)}, status_code=409)
        payload = {
            "clip_id": stored.clip_id,
            "index": stored.snippet_index,
            "class": stored.class_name,
            "state": stored.state,
            "provenance": stored.provenance,
            "timestamp": stored.timestamp,
        }
        return JSONResponse(payload, status_code=200 if idempotent else 201)

    @app.get("/api/labels")
    def list_labels(state: Optional[str] = None):
        return [
            {
                "clip_id": r.clip_id,
                "index": r.snippet_index,
                "class": r.class_name,
                "state": r.state,
                "provenance": r.provenance,
            }
            for r in ws.store.records(state)
        ]

    @app.post("/api/jobs")
    async def post_job(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"detail": "body is not valid JSON"}, status_code=400)
        kind = body.get("kind")
        if kind not in JOB_KINDS:
            return JSONResponse(
                {"detail": f"kind must be one of {list(JOB_KINDS)}"}, status_code=400
            )
        try:
            status = runner.submit(kind, body.get("params", {}))
        except RuntimeError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=409)
        return JSONResponse(status.to_dict(), status_code=202)

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        status = runner.get(job_id)
        if status is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        return status.to_dict()

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
