"""Set-level graded anomaly detection: train a permutation-invariant set scorer
on an unlabeled pool plus a few labeled anomalies, then score test points
against sampled contexts."""

from ._setad import (
    Model,
    SetadError,
    auc_pr,
    auc_roc,
    init_params,
    load_csv,
    prepare,
    score,
    synth_blobs,
    train,
)

__all__ = [
    "Model",
    "SetadError",
    "auc_pr",
    "auc_roc",
    "init_params",
    "load_csv",
    "prepare",
    "score",
    "synth_blobs",
    "train",
]
