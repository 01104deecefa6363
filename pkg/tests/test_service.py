"""HTTP facade: projections, audio bytes, label posting, background jobs."""

import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from pamtriage.features import Embedding, write_embeddings
from pamtriage.ingest import write_wav_pcm16
from pamtriage.reduce import ProjectionPoint, ProjectionSet, write_projection
from pamtriage.service import SERVE_RATE, JobStatus, create_app
from pamtriage.store import write_manifest
from pamtriage.ingest import ManifestRow


@pytest.fixture
def workspace(tmp_path, rng):
    """Two 2-second clips at the serving rate, manifest written to disk."""
    root = tmp_path / "ws"
    root.mkdir()
    rows = []
    for cid in ("alpha", "beta"):
        samples = (rng.random(2 * SERVE_RATE) - 0.5) * 0.2
        path = root / f"{cid}.wav"
        write_wav_pcm16(path, samples, SERVE_RATE)
        for i in range(2):
            rows.append(
                ManifestRow(clip_id=cid, index=i, offset_s=float(i),
                            sample_count=SERVE_RATE, source_path=str(path),
                            rate=SERVE_RATE)
            )
    write_manifest(root / "manifest.jsonl", rows)
    return root


@pytest.fixture
def client(workspace):
    app = create_app(workspace)
    with TestClient(app) as c:
        c.workspace_root = workspace
        yield c


def write_proj(root, n=4):
    points = [
        ProjectionPoint(snippet_ref=("alpha", 0), x=1.0, y=2.0),
        ProjectionPoint(snippet_ref=("alpha", 1), x=3.0, y=4.0),
        ProjectionPoint(snippet_ref=("beta", 0), x=-1.0, y=0.5),
        ProjectionPoint(snippet_ref=("beta", 1), x=41.0, y=-2.0),
    ][:n]
    write_projection(root / "projection-pca.jsonl",
                     ProjectionSet(method="pca", points=points, fit_meta={"k": 2}))


class TestProjectionEndpoint:
    def test_404_before_any_projection(self, client):
        assert client.get("/api/projection?method=pca").status_code == 404

    def test_payload_rows(self, client):
        write_proj(client.workspace_root)
        resp = client.get("/api/projection?method=pca")
        assert resp.status_code == 200
        body = resp.json()
        assert body["method"] == "pca"
        assert len(body["points"]) == 4
        assert body["points"][0] == {"clip_id": "alpha", "index": 0, "x": 1.0, "y": 2.0}

    def test_labeled_point_carries_class(self, client):
        write_proj(client.workspace_root)
        for state in ("proposed", "accepted"):
            r = client.post("/api/labels", json={"clip_id": "alpha", "index": 1,
                                                 "class": "airgun", "state": state})
            assert r.status_code == 201
        rows = client.get("/api/projection").json()["points"]
        labeled = {(r["clip_id"], r["index"]): r.get("label") for r in rows}
        assert labeled[("alpha", 1)] == "airgun"
        assert labeled[("alpha", 0)] is None


class TestAudioEndpoint:
    def test_wav_bytes_size(self, client):
        resp = client.get("/api/snippets/alpha/0/audio")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "audio/wav"
        assert len(resp.content) == 44 + 2 * SERVE_RATE == 44144

    def test_unknown_snippet_404(self, client):
        assert client.get("/api/snippets/alpha/99/audio").status_code == 404
        assert client.get("/api/snippets/nope/0/audio").status_code == 404

    def test_missing_source_410(self, client, workspace):
        (workspace / "alpha.wav").unlink()
        assert client.get("/api/snippets/alpha/0/audio").status_code == 410

    def test_roundtrip_matches_stored_snippet(self, client, workspace):
        """PCM16-sourced audio at the serving rate comes back bit-exact."""
        from pamtriage.ingest import load_wav

        resp = client.get("/api/snippets/beta/1/audio")
        wav_path = workspace / "served.wav"
        wav_path.write_bytes(resp.content)
        served = load_wav(wav_path)
        source = load_wav(workspace / "beta.wav")
        np.testing.assert_array_equal(
            served.samples, source.samples[SERVE_RATE : 2 * SERVE_RATE]
        )

    def test_idempotent_bytes(self, client):
        a = client.get("/api/snippets/alpha/0/audio").content
        b = client.get("/api/snippets/alpha/0/audio").content
        assert a == b


class TestLabelEndpoint:
    def test_accept_on_proposed_201(self, client):
        body = {"clip_id": "alpha", "index": 0, "class": "seal", "state": "proposed"}
        assert client.post("/api/labels", json=body).status_code == 201
        body["state"] = "accepted"
        resp = client.post("/api/labels", json=body)
        assert resp.status_code == 201
        assert resp.json()["state"] == "accepted"

    def test_duplicate_accept_200(self, client):
        body = {"clip_id": "alpha", "index": 0, "class": "seal", "state": "proposed"}
        client.post("/api/labels", json=body)
        body["state"] = "accepted"
        client.post("/api/labels", json=body)
        assert client.post("/api/labels", json=body).status_code == 200

    def test_unknown_snippet_404(self, client):
        body = {"clip_id": "alpha", "index": 42, "class": "seal", "state": "proposed"}
        assert client.post("/api/labels", json=body).status_code == 404

    def test_illegal_transition_409(self, client):
        body = {"clip_id": "alpha", "index": 0, "class": "seal", "state": "rejected"}
        assert client.post("/api/labels", json=body).status_code == 409

    def test_malformed_400(self, client):
        assert client.post("/api/labels", json={"clip_id": "alpha"}).status_code == 400
        assert client.post(
            "/api/labels",
            json={"clip_id": "alpha", "index": 0, "class": "two words",
                  "state": "proposed"},
        ).status_code == 400

    def test_list_reflects_current_state(self, client):
        body = {"clip_id": "beta", "index": 0, "class": "seal", "state": "proposed"}
        client.post("/api/labels", json=body)
        records = client.get("/api/labels").json()
        assert {"clip_id": "beta", "index": 0, "class": "seal", "state": "proposed",
                "provenance": "human"} in records


def poll_job(client, job_id, timeout_s=30.0):
    deadline = time.time() + timeout_s
    while time.time() < deadline:
        status = client.get(f"/api/jobs/{job_id}").json()
        if status["state"] in ("done", "failed"):
            return status
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


class TestJobs:
    def test_embed_then_reduce_pipeline(self, client, workspace):
        resp = client.post("/api/jobs", json={"kind": "embed", "params": {}})
        assert resp.status_code == 202
        status = poll_job(client, resp.json()["job_id"])
        assert status["state"] == "done"
        assert status["progress"] == 1.0
        assert (workspace / "embeddings.bin").exists()

        resp = client.post("/api/jobs", json={"kind": "reduce",
                                              "params": {"method": "pca"}})
        status = poll_job(client, resp.json()["job_id"])
        assert status["state"] == "done"
        assert client.get("/api/projection?method=pca").status_code == 200

    def test_conflicting_same_kind_409(self, client):
        runner = client.app.state.runner
        runner.jobs["busy"] = JobStatus(job_id="busy", kind="train", state="running")
        resp = client.post("/api/jobs", json={"kind": "train", "params": {}})
        assert resp.status_code == 409

    def test_failed_job_exposes_error(self, client):
        resp = client.post("/api/jobs", json={"kind": "reduce", "params": {}})
        status = poll_job(client, resp.json()["job_id"])
        assert status["state"] == "failed"
        assert status["error"]

    def test_unknown_kind_400_and_unknown_job_404(self, client):
        assert client.post("/api/jobs", json={"kind": "dance"}).status_code == 400
        assert client.get("/api/jobs/zzz").status_code == 404
