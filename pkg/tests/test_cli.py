"""The CLI drives a miniature corpus through every pipeline stage."""

import json

import pytest

from pamtriage.cli import main
from pamtriage.evaluate import read_truth_jsonl
from pamtriage.ingest import ManifestRow
from pamtriage.store import LabelStore, read_manifest


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    return tmp_path_factory.mktemp("cliwork")


class TestCliPipeline:
    def test_full_round_trip(self, work):
        corpus = work / "corpus"
        assert main(["synth", "--out", str(corpus), "--minutes", "1",
                     "--clip-seconds", "30", "--seed", "11"]) == 0
        assert (corpus / "truth.jsonl").exists()
        assert (corpus / "airgun-template.wav").exists()

        manifest_path = work / "manifest.jsonl"
        assert main(["ingest", "--in", str(corpus), "--rate", "22050",
                     "--manifest", str(manifest_path)]) == 0
        manifest = read_manifest(manifest_path)
        assert len(manifest) == 60
        assert all(row.sample_count == 22050 for row in manifest)

        emb_path = work / "embeddings.bin"
        assert main(["embed", "--manifest", str(manifest_path),
                     "--out", str(emb_path)]) == 0

        proj_path = work / "proj.jsonl"
        assert main(["reduce", "--emb", str(emb_path), "--method", "pca",
                     "--out", str(proj_path)]) == 0
        assert len(proj_path.read_text().splitlines()) == 61  # meta + 60 rows

        labels_path = work / "labels.jsonl"
        assert main(["detect", "--manifest", str(manifest_path),
                     "--template", str(corpus / "airgun-template.wav"),
                     "--threshold", "0.5", "--min-sep", "0.5",
                     "--class", "airgun", "--out", str(labels_path)]) == 0
        store = LabelStore(manifest, labels_path)
        proposals = store.records("proposed")
        assert len(proposals) >= 3

        truth = read_truth_jsonl(corpus / "truth.jsonl")
        hits = [p for p in proposals if truth[p.ref] == "airgun"]
        assert len(hits) >= 3
        for p in hits[:3]:
            assert main(["labels", "accept", "--manifest", str(manifest_path),
                         "--store", str(labels_path), "--clip", p.clip_id,
                         "--index", str(p.snippet_index), "--class", "airgun"]) == 0

        dataset_path = work / "dataset.jsonl"
        assert main(["export", "--manifest", str(manifest_path),
                     "--store", str(labels_path), "--classes", "airgun",
                     "--min-count", "1", "--out", str(dataset_path)]) == 0
        rows = [json.loads(x) for x in dataset_path.read_text().splitlines()]
        assert {r["class"] for r in rows} == {"airgun", "background"}

        model_path = work / "model.json"
        assert main(["train", "--emb", str(emb_path), "--dataset", str(dataset_path),
                     "--seed", "5", "--out", str(model_path)]) == 0
        assert model_path.exists()

        preds_path = work / "preds.jsonl"
        assert main(["predict", "--model", str(model_path), "--emb", str(emb_path),
                     "--out", str(preds_path)]) == 0
        preds = [json.loads(x) for x in preds_path.read_text().splitlines()]
        assert len(preds) == 60
        assert all(abs(sum(p["probs"].values()) - 1.0) < 1e-9 for p in preds)

        report_dir = work / "report"
        # truth classes other than airgun count as negatives for the sweep
        assert main(["eval", "--preds", str(preds_path),
                     "--labels", str(corpus / "truth.jsonl"),
                     "--target", "airgun", "--sweep", "0.01:1.0:0.01",
                     "--out", str(report_dir)]) == 0
        summary = json.loads((report_dir / "summary.json").read_text())
        assert 0.0 < summary["best_tau"] <= 1.0

    def test_labels_list_smoke(self, work, capsys):
        manifest_path = work / "manifest.jsonl"
        labels_path = work / "labels.jsonl"
        assert main(["labels", "list", "--manifest", str(manifest_path),
                     "--store", str(labels_path)]) == 0
        out = capsys.readouterr().out
        assert "airgun" in out
