"""Python bindings for the scpseg constrained segmentation engine."""

from __future__ import annotations

import json
from typing import Any, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _scpseg
from ._scpseg import Error, adjusted_rand, load_ground_truth, load_image, save_png, soft_thr

__all__ = [
    "Error",
    "adjusted_rand",
    "benchmark",
    "default_config",
    "load_ground_truth",
    "load_image",
    "run_files",
    "save_png",
    "segment",
    "soft_thr",
    "synth_sample",
    "write_synth_corpus",
]

METHODS = ("ncut", "ncut_sl", "ncut_scp")


def default_config() -> dict:
    return json.loads(_scpseg.default_config())


def _config_json(method: Optional[str], params: Mapping[str, Any]) -> str:
    cfg = dict(params)
    if method is not None:
        cfg["method"] = method
    return json.dumps(cfg)


def segment(
    image: np.ndarray,
    scribbles: Iterable[Tuple[int, int, int]] = (),
    method: str = "ncut_scp",
    ground_truth: Optional[np.ndarray] = None,
    **params: Any,
) -> dict:
    """Segment an (H, W, 3) uint8 image.

    scribbles are (x, y, label) triples. Extra keyword arguments are run
    configuration keys such as n_s, k, alpha, beta, lam or seed (``lam`` is
    accepted for ``lambda``). The result holds an (H, W) label array plus the
    cut value, method, ARI when a ground truth is given, and stage timings.
    """
    if "lam" in params:
        params["lambda"] = params.pop("lam")
    marks = [(int(x), int(y), int(label)) for x, y, label in scribbles]
    return _scpseg.segment(np.ascontiguousarray(image, dtype=np.uint8), marks,
                           _config_json(method, params), ground_truth)


def run_files(image: str, scribbles: Optional[str] = None, ground_truth: Optional[str] = None,
              out: Optional[str] = None, **params: Any) -> dict:
    """File based run, equivalent to ``scpseg run``."""
    cfg = dict(params)
    cfg["image"] = image
    if scribbles:
        cfg["scribbles"] = scribbles
    if ground_truth:
        cfg["ground_truth"] = ground_truth
    if out:
        cfg["out"] = out
    return _scpseg.run_files(json.dumps(cfg))


def benchmark(config_path: str) -> str:
    """Runs a benchmark configuration file and returns the CSV table."""
    return _scpseg.run_benchmark(str(config_path))


def synth_sample(index: int, width: int = 64, height: int = 64,
                 seed: int = 1) -> Tuple[np.ndarray, np.ndarray, Sequence[Tuple[int, int, int]]]:
    """One generated image with its ground truth and (x, y, label) scribbles."""
    return _scpseg.synth_sample(index, width, height, seed)


def write_synth_corpus(out_dir: str, count: int = 20, seed: int = 1) -> None:
    _scpseg.write_synth_corpus(str(out_dir), count, seed)
