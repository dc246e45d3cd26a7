"""Input checks shared by the estimator classes and the CLI."""

from __future__ import annotations

import numpy as np

from .grid import GridSpec
from .target import Integrand, TargetPMF


def check_qubits(qubits) -> tuple[int, ...]:
    if isinstance(qubits, str):
        qubits = [int(t) for t in qubits.replace(",", " ").split()]
    elif np.ndim(qubits) == 0:
        qubits = [int(qubits)]
    out = tuple(int(q) for q in qubits)
    if not out or any(q < 1 for q in out):
        raise ValueError(f"qubits must be positive integers, got {qubits!r}")
    return out


def check_integrand(f) -> Integrand:
    if not isinstance(f, Integrand):
        raise TypeError(f"expected an Integrand, got {type(f).__name__}")
    return f


def check_grid(qubits, f: Integrand) -> GridSpec:
    qubits = check_qubits(qubits)
    if len(qubits) != f.d:
        raise ValueError(f"{len(qubits)} qubit counts for a {f.d}-dimensional integrand")
    return GridSpec(qubits, f.bounds)


def check_pmf(p, n: int | None = None, atol: float = 1e-9) -> np.ndarray:
    arr = np.asarray(p.probabilities if isinstance(p, TargetPMF) else p, dtype=float)
    if arr.ndim != 1 or arr.size == 0 or arr.size & (arr.size - 1):
        raise ValueError("PMF length must be a power of two")
    if n is not None and arr.size != 1 << n:
        raise ValueError(f"PMF has {arr.size} entries, expected {1 << n}")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > atol:
        raise ValueError("PMF must be non-negative and sum to one")
    return arr


def check_shots(n_shots) -> int:
    n = int(float(n_shots))
    if n < 2 or n != float(n_shots):
        raise ValueError(f"shot count must be an integer >= 2, got {n_shots!r}")
    return n
