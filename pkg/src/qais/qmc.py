"""Randomly shifted Sobol points."""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

MAX_SOBOL_DIM = 21201


@lru_cache(maxsize=32)
def _base(d: int, log2m: int) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = qmc.Sobol(d, scramble=False).random_base2(log2m)
    pts.setflags(write=False)
    return pts


def sobol_base(d: int, m: int) -> np.ndarray:
    """First ``m`` points of the unscrambled ``d``-dimensional Sobol sequence."""
    if not 1 <= d <= MAX_SOBOL_DIM:
        raise ValueError(f"Sobol direction numbers available for 1 <= d <= {MAX_SOBOL_DIM}")
    if m < 1:
        raise ValueError("m must be >= 1")
    return _base(d, max(int(m - 1).bit_length(), 0))[:m]


def sobol_points(bounds, m: int, shift=None) -> np.ndarray:
    """First ``m`` Sobol points, shifted modulo 1 by ``shift`` and mapped into
    the box ``bounds`` (sequence of ``(lo, hi)`` in axis order)."""
    bounds = np.asarray(bounds, dtype=float)
    u = sobol_base(bounds.shape[0], m)
    if shift is not None:
        u = np.mod(u + np.asarray(shift, dtype=float), 1.0)
    return bounds[:, 0] + u * (bounds[:, 1] - bounds[:, 0])
