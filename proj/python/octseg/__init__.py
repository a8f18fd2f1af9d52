"""Cyst segmentation for retinal OCT B-scans."""

from ._octseg import (
    Model,
    OctsegError,
    aggregate_stats,
    bilateral_filter,
    denoise,
    estimate_sigma_r,
    gen_phantom,
    grader_iov,
    load_model,
    model_from_bytes,
    prepare_sample,
    random_phantom,
    roi_mask,
    run_cli,
    score_pair,
    segment_layers,
    train,
)

__all__ = [
    "Model",
    "OctsegError",
    "aggregate_stats",
    "bilateral_filter",
    "denoise",
    "estimate_sigma_r",
    "gen_phantom",
    "grader_iov",
    "load_model",
    "model_from_bytes",
    "prepare_sample",
    "random_phantom",
    "roi_mask",
    "run_cli",
    "score_pair",
    "segment_layers",
    "train",
]
