"""Acoustic triage workbench.

Turns large unlabeled audio corpora into labeled training sets and trained
detectors: snippet ingest, embeddings, 2-D maps for human triage,
matched-filter proposals, softmax training, and threshold-sweep
evaluation.
"""

__version__ = "0.1.0"

from . import classify, detect, evaluate, features, ingest, pipeline, reduce, resample, store, synth

__all__ = [
    "classify",
    "detect",
    "evaluate",
    "features",
    "ingest",
    "pipeline",
    "reduce",
    "resample",
    "store",
    "synth",
]
