"""Command-line entry points for every pipeline stage.

Typical round trip on a fresh corpus:

    pamtriage synth   --out work/corpus --minutes 10 --seed 7
    pamtriage ingest  --in work/corpus --rate 22050 --manifest work/manifest.jsonl
    pamtriage embed   --manifest work/manifest.jsonl --out work/embeddings.bin
    pamtriage reduce  --emb work/embeddings.bin --method umap --seed 7 --out work/proj.jsonl
    pamtriage detect  --manifest work/manifest.jsonl --template airgun.wav \
                      --threshold 0.6 --class airgun --out work/labels.jsonl
    pamtriage labels  list --manifest work/manifest.jsonl --store work/labels.jsonl
    pamtriage export  --manifest work/manifest.jsonl --store work/labels.jsonl \
                      --classes airgun,bearded_seal --min-count 100 --out work/dataset.jsonl
    pamtriage train   --emb work/embeddings.bin --dataset work/dataset.jsonl --out work/model.json
    pamtriage predict --model work/model.json --emb work/embeddings.bin --out work/preds.jsonl
    pamtriage eval    --preds work/preds.jsonl --labels work/truth.jsonl --target airgun --out work/report
    pamtriage serve   --port 8080 --data-dir work
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import classify, evaluate, synth
from .detect import Template, detect_events, propose_labels
from .features import FeatureConfig, import_embeddings, write_embeddings
from .ingest import load_wav
from .pipeline import embed_from_manifest, ingest_sources
from .reduce import (
    UmapConfig,
    pca_fit,
    pca_projection_set,
    sample_subset,
    umap_fit,
    write_projection,
)
from .store import LabelRecord, LabelStore, export_training_set, read_manifest, write_manifest


def _wav_paths(spec: str) -> list[Path]:
    p = Path(spec)
    if p.is_dir():
        return sorted(p.glob("*.wav"))
    return [p]


def cmd_ingest(args) -> int:
    _, rows = ingest_sources(_wav_paths(args.inp), rate=args.rate, duration_s=args.duration)
    write_manifest(args.manifest, rows)
    print(f"wrote {len(rows)} snippet rows to {args.manifest}")
    return 0


def cmd_embed(args) -> int:
    if args.imported:
        embs = import_embeddings(args.imported, expected_dim=args.dim)
    else:
        manifest = read_manifest(args.manifest)
        embs = embed_from_manifest(manifest, FeatureConfig())
    write_embeddings(args.out, embs)
    print(f"wrote {len(embs)} embeddings to {args.out}")
    return 0


def cmd_reduce(args) -> int:
    embs = import_embeddings(args.emb)
    if args.sample_fraction < 1.0:
        embs = sample_subset(embs, args.sample_fraction, args.seed)
    if args.method == "pca":
        proj = pca_projection_set(pca_fit(embs, k=args.k), embs)
    else:
        cfg = UmapConfig(
            n_neighbors=args.n_neighbors,
            min_dist=args.min_dist,
            n_epochs=args.epochs,
            seed=args.seed,
        )
        proj = umap_fit(embs, cfg)
    write_projection(args.out, proj)
    print(f"wrote {len(proj.points)} {args.method} points to {args.out}")
    return 0


def cmd_detect(args) -> int:
    manifest = read_manifest(args.manifest)
    tpl_clip = load_wav(args.template)
    store = LabelStore(manifest, args.out)
    by_source: dict[str, list] = {}
    for row in manifest:
        by_source.setdefault(row.source_path, []).append(row)
    n_events = 0
    for source, rows in sorted(by_source.items()):
        from .resample import resample

        clip = resample(load_wav(source, clip_id=rows[0].clip_id), rows[0].rate)
        tpl = Template(
            samples=(
                resample(tpl_clip, rows[0].rate).samples
                if tpl_clip.sample_rate != rows[0].rate
                else tpl_clip.samples
            ),
            rate=rows[0].rate,
            name=Path(args.template).stem,
        )
        events = detect_events(clip, tpl, args.threshold, args.min_sep)
        duration_s = rows[0].sample_count / rows[0].rate
        for rec in propose_labels(events, args.cls, manifest, duration_s):
            store.upsert_label(rec)
            n_events += 1
    print(f"proposed {n_events} {args.cls} labels into {args.out}")
    return 0


def cmd_labels(args) -> int:
    manifest = read_manifest(args.manifest)
    store = LabelStore(manifest, args.store)
    if args.action == "list":
        for rec in store.records(args.state):
            print(f"{rec.clip_id}\t{rec.snippet_index}\t{rec.class_name}\t{rec.state}")
        return 0
    rec = LabelRecord(
        clip_id=args.clip,
        snippet_index=args.index,
        class_name=args.cls,
        state="accepted" if args.action == "accept" else "rejected",
        provenance="human",
        annotator=args.annotator,
    )
    store.upsert_label(rec)
    print(f"{args.action}ed {args.cls} on ({args.clip}, {args.index})")
    return 0


def cmd_export(args) -> int:
    manifest = read_manifest(args.manifest)
    store = LabelStore(manifest, args.store)
    pairs, counts = export_training_set(
        store,
        classes=args.classes.split(","),
        min_count=args.min_count,
        background_class=args.background_class,
        background_ratio=args.background_ratio,
        seed=args.seed,
    )
    with Path(args.out).open("w") as fh:
        for (clip_id, index), cname in pairs:
            fh.write(json.dumps({"clip_id": clip_id, "index": index, "class": cname}) + "\n")
    print(f"exported {len(pairs)} examples: {counts}")
    return 0


def cmd_train(args) -> int:
    embs = import_embeddings(args.emb)
    pairs = [
        ((d["clip_id"], d["index"]), d["class"])
        for d in map(json.loads, Path(args.dataset).read_text().splitlines())
    ]
    classes = args.classes.split(",") if args.classes else None
    dataset = classify.make_labeled_set(embs, pairs, classes)
    fracs = [float(x) for x in args.split.split(",")]
    spec = classify.SplitSpec(
        train_frac=fracs[0], val_frac=fracs[1], test_frac=fracs[2], seed=args.seed
    )
    train_set, val_set, test_set = classify.split(dataset, spec)
    model = classify.train(train_set, val_set, classify.TrainConfig(seed=args.seed))
    classify.save_model(model, args.out)
    probs = classify.predict_batch(model, test_set.X)
    acc = float(np.mean(np.argmax(probs, axis=1) == test_set.y)) if len(test_set) else float("nan")
    print(
        f"trained on {len(train_set)} examples (val {len(val_set)}, test {len(test_set)}); "
        f"test accuracy {acc:.3f}; model -> {args.out}"
    )
    return 0


def cmd_predict(args) -> int:
    model = classify.load_model(args.model)
    embs = import_embeddings(args.emb)
    from .features import embeddings_matrix

    probs = classify.predict_batch(model, embeddings_matrix(embs))
    with Path(args.out).open("w") as fh:
        for e, p in zip(embs, probs):
            fh.write(
                json.dumps(
                    {
                        "clip_id": e.snippet_ref[0],
                        "index": e.snippet_ref[1],
                        "probs": {c: float(v) for c, v in zip(model.classes, p)},
                    }
                )
                + "\n"
            )
    print(f"wrote {len(embs)} predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    truth = evaluate.read_truth_jsonl(args.labels)
    target_probs: dict[tuple[str, int], float] = {}
    for line in Path(args.preds).read_text().splitlines():
        d = json.loads(line)
        target_probs[(d["clip_id"], d["index"])] = d["probs"][args.target]
    lo, hi, step = (float(x) for x in args.sweep.split(":"))
    taus = [round(lo + i * step, 10) for i in range(int(round((hi - lo) / step)) + 1)]
    taus = [t for t in taus if 0 < t <= 1]
    curve = evaluate.sweep(target_probs, truth, args.target, taus)
    paths = evaluate.report(curve, args.out)
    print(
        f"best tau {curve.best_tau:.4f} with F1 {curve.best_f1:.4f}; "
        f"report in {paths['summary'].parent}"
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_synth(args) -> int:
    corpus = synth.build_corpus(
        total_seconds=args.minutes * 60,
        clip_seconds=args.clip_seconds,
        rate=args.rate,
        seed=args.seed,
        out_dir=args.out,
    )
    truth_path = Path(args.out) / "truth.jsonl"
    evaluate.write_truth_jsonl(truth_path, corpus.truth())
    from .ingest import write_wav_pcm16

    tpl = synth.make_airgun_template(args.rate, seed=args.seed)
    write_wav_pcm16(Path(args.out) / "airgun-template.wav", tpl.samples, args.rate)
    print(
        f"wrote {len(corpus.clips)} clips, {len(corpus.events)} events, "
        f"truth + template to {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pamtriage", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load WAVs, resample, segment, write manifest")
    p.add_argument("--in", dest="inp", required=True, help="WAV file or directory")
    p.add_argument("--rate", type=int, default=22050)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--manifest", required=True)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("embed", help="embed manifest snippets (or import a file)")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--import", dest="imported", help="embedding exchange file to import")
    p.add_argument("--dim", type=int, default=1280, help="expected imported dimension")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("reduce", help="project embeddings to 2-D")
    p.add_argument("--emb", required=True)
    p.add_argument("--method", choices=("pca", "umap"), default="pca")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n-neighbors", type=int, default=10)
    p.add_argument("--min-dist", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--sample-fraction", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_reduce)

    p = sub.add_parser("detect", help="matched-filter proposals from a template WAV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--threshold", type=float, default=0.6)
    p.add_argument("--min-sep", type=float, default=0.5)
    p.add_argument("--class", dest="cls", required=True)
    p.add_argument("--out", required=True, help="label store (JSONL) to append proposals to")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("labels", help="review proposals or list the store")
    p.add_argument("action", choices=("accept", "reject", "list"))
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--clip")
    p.add_argument("--index", type=int)
    p.add_argument("--class", dest="cls")
    p.add_argument("--state")
    p.add_argument("--annotator", default="cli")
    p.set_defaults(fn=cmd_labels)

    p = sub.add_parser("export", help="assemble a training set from accepted labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--min-count", type=int, default=100)
    p.add_argument("--background-class", default="background")
    p.add_argument("--background-ratio", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("train", help="train the softmax head")
    p.add_argument("--emb", required=True)
    p.add_argument("--dataset", required=True, help="JSONL of {clip_id, index, class}")
    p.add_argument("--classes", help="comma-separated class order")
    p.add_argument("--split", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="per-snippet class probabilities")
    p.add_argument("--model", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("eval", help="confusion + threshold sweep report")
    p.add_argument("--preds", required=True)
    p.add_argument("--labels", required=True, help="truth JSONL of {clip_id, index, class}")
    p.add_argument("--target", required=True)
    p.add_argument("--sweep", default="0.01:1.0:0.01")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="HTTP service for the triage UI")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--minutes", type=int, default=10)
    p.add_argument("--clip-seconds", type=int, default=60)
    p.add_argument("--rate", type=int, default=32768)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
