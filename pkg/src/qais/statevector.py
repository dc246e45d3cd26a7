"""Exact statevector simulation of the layered all-to-all ansatz.

Qubit ``l`` is tensor axis ``l`` of the state reshaped to ``[2] * n``, so qubit
0 is the most significant bit of the basis-state index.  Measured indices are
therefore directly the big-endian linear cell indices of :mod:`qais.grid`.

Gate conventions::

    entangler(k)  exp(-i theta sigma^k_i sigma^k_j)      k in {X, Y, Z}
    rotation      exp(-i beta Z) exp(-i alpha Y) exp(-i gamma Z)

Angles are full angles (no factor 1/2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import MAX_QUBITS

ENTANGLERS = ("EX", "EY", "EZ")
ROTATION = "R"
_ALIASES = {
    "X": "EX", "Y": "EY", "Z": "EZ", "XX": "EX", "YY": "EY", "ZZ": "EZ",
    "U3": "R", "ROT": "R",
}


@dataclass(frozen=True)
class AnsatzSpec:
    """Ordered layer list, e.g. ``("EZ", "R", "EX", "R")``."""

    layers: tuple[str, ...]

    def __post_init__(self):
        layers = []
        for tok in self.layers:
            tok = str(tok).strip().upper()
            tok = _ALIASES.get(tok, tok)
            if tok not in ENTANGLERS and tok != ROTATION:
                raise ValueError(f"unknown layer {tok!r}; use EX, EY, EZ or R")
            layers.append(tok)
        if not layers:
            raise ValueError("ansatz needs at least one layer")
        object.__setattr__(self, "layers", tuple(layers))

    @classmethod
    def parse(cls, text: str) -> "AnsatzSpec":
        return cls(tuple(t for t in text.replace(",", " ").split()))

    def n_params(self, n: int) -> int:
        return sum(n * (n - 1) // 2 if l != ROTATION else 3 * n for l in self.layers)

    def __str__(self) -> str:
        return ",".join(self.layers)


@dataclass
class ShotCounts:
    """Measurement record: sorted distinct indices with their counts."""

    indices: np.ndarray
    counts: np.ndarray
    n_qubits: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_states(self) -> int:
        return int(self.indices.size)

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.indices.tolist(), self.counts.tolist()))


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")


def _n_of(state: np.ndarray) -> int:
    n = int(state.size).bit_length() - 1
    if state.ndim != 1 or (1 << n) != state.size:
        raise ValueError("state length must be a power of two")
    return n


def init_uniform(n: int) -> np.ndarray:
    _check_n(n)
    return np.full(1 << n, 2.0 ** (-n / 2), dtype=complex)


def basis_state(n: int, k: int) -> np.ndarray:
    _check_n(n)
    psi = np.zeros(1 << n, dtype=complex)
    psi[k] = 1.0
    return psi


def probabilities(state: np.ndarray) -> np.ndarray:
    return state.real ** 2 + state.imag ** 2


@lru_cache(maxsize=8)
def _spins(n: int) -> np.ndarray:
    # (2^n, n) matrix of z eigenvalues (+1 for bit 0, -1 for bit 1)
    idx = np.arange(1 << n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1.0 - 2.0 * bits


def _zz_phase(n: int, theta_upper: np.ndarray) -> np.ndarray:
    """exp(-i sum_{i<j} theta_ij z_i z_j) as a diagonal."""
    if n <= 20:
        z = _spins(n)
        arg = np.einsum("ki,ij,kj->k", z, theta_upper, z, optimize=True)
    else:
        idx = np.arange(1 << n)
        arg = np.zeros(1 << n)
        for i in range(n):
            zi = 1.0 - 2.0 * ((idx >> (n - 1 - i)) & 1)
            for j in range(i + 1, n):
                if theta_upper[i, j]:
                    zj = 1.0 - 2.0 * ((idx >> (n - 1 - j)) & 1)
                    arg += theta_upper[i, j] * zi * zj
    return np.exp(-1j * arg)


def _hadamard_all(state: np.ndarray, n: int) -> np.ndarray:
    out = state.copy()
    for l in range(n):
        v = out.reshape(1 << l, 2, 1 << (n - l - 1))
        a = v[:, 0, :].copy()
        b = v[:, 1, :]
        v[:, 0, :] = a + b
        v[:, 1, :] = a - b
    out *= 2.0 ** (-n / 2)
    return out


@lru_cache(maxsize=8)
def _s_phase(n: int) -> np.ndarray:
    # S on every qubit: i^(popcount)
    idx = np.arange(1 << n)
    pop = np.zeros(1 << n, dtype=np.int64)
    for l in range(n):
        pop += (idx >> l) & 1
    return (1j) ** pop


def _check_pair(n: int, i: int, j: int) -> None:
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"invalid qubit pair ({i}, {j}) for n={n}")


def apply_two_qubit_rotation(state: np.ndarray, axis: str, i: int, j: int,
                             theta: float) -> np.ndarray:
    """Apply ``exp(-i theta sigma_i sigma_j)`` for one qubit pair, in place."""
    n = _n_of(state)
    _check_pair(n, i, j)
    axis = axis.upper()
    idx = np.arange(1 << n)
    bi = (idx >> (n - 1 - i)) & 1
    bj = (idx >> (n - 1 - j)) & 1
    if axis == "Z":
        state *= np.where(bi == bj, np.exp(-1j * theta), np.exp(1j * theta))
        return state
    if axis not in ("X", "Y"):
        raise ValueError(f"unknown Pauli axis {axis!r}")
    partner = state[idx ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))]
    if axis == "Y":
        # Y(x)Y = X(x)X with a -1 on the equal-bit subspace
        partner = np.where(bi == bj, -partner, partner)
    state *= math.cos(theta)
    state += -1j * math.sin(theta) * partner
    return state


def u3_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    rz = lambda t: np.array([[np.exp(-1j * t), 0], [0, np.exp(1j * t)]])
    ry = np.array([[math.cos(alpha), -math.sin(alpha)], [math.sin(alpha), math.cos(alpha)]])
    return rz(beta) @ ry @ rz(gamma)


def apply_single_qubit(state: np.ndarray, matrix: np.ndarray, l: int) -> np.ndarray:
    n = _n_of(state)
    if not 0 <= l < n:
        raise ValueError(f"invalid qubit {l} for n={n}")
    v = state.reshape(1 << l, 2, 1 << (n - l - 1))
    a = v[:, 0, :].copy()
    b = v[:, 1, :].copy()
    v[:, 0, :] = matrix[0, 0] * a + matrix[0, 1] * b
    v[:, 1, :] = matrix[1, 0] * a + matrix[1, 1] * b
    return state


def apply_u3(state: np.ndarray, l: int, alpha: float, beta: float,
             gamma: float) -> np.ndarray:
    """Apply the three-angle rotation to qubit ``l`` (gamma acts first)."""
    return apply_single_qubit(state, u3_matrix(alpha, beta, gamma), l)


def _upper(n: int, values: np.ndarray) -> np.ndarray:
    theta = np.zeros((n, n))
    theta[np.triu_indices(n, 1)] = values
    return theta


def apply_entangler_layer(state: np.ndarray, axis: str, values: np.ndarray) -> np.ndarray:
    """All-pair entangler; the pair terms commute, so the layer is diagonalised
    once in the Pauli-``axis`` eigenbasis instead of pair by pair."""
    n = _n_of(state)
    phase = _zz_phase(n, _upper(n, values))
    if axis == "EZ":
        return state * phase
    if axis == "EY":
        # Y = S X S^dagger on every qubit
        s = _s_phase(n)
        out = _hadamard_all(state * np.conj(s), n)
        return _hadamard_all(out * phase, n) * s
    out = _hadamard_all(state, n)
    return _hadamard_all(out * phase, n)


def run_ansatz(spec: AnsatzSpec, n: int, params: Sequence[float]) -> np.ndarray:
    """Prepare the ansatz state from the uniform superposition."""
    params = np.asarray(params, dtype=float)
    if params.size != spec.n_params(n):
        raise ValueError(f"expected {spec.n_params(n)} parameters, got {params.size}")
    state = init_uniform(n)
    pos = 0
    n_pairs = n * (n - 1) // 2
    for layer in spec.layers:
        if layer == ROTATION:
            block = params[pos:pos + 3 * n].reshape(n, 3)
            for l, (gamma, alpha, beta) in enumerate(block):
                apply_u3(state, l, alpha, beta, gamma)
            pos += 3 * n
        else:
            if n_pairs:
                state = apply_entangler_layer(state, layer, params[pos:pos + n_pairs])
            pos += n_pairs
    return state


def qubit_pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def sample(pmf: np.ndarray, n_shots: int, seed=None) -> ShotCounts:
    """Draw ``n_shots`` basis states by inverse CDF over the prefix sums."""
    pmf = np.asarray(pmf, dtype=float)
    n = _n_of(pmf)
    if n_shots < 1:
        raise ValueError("need at least one shot")
    if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > 1e-9:
        raise ValueError("pmf must be non-negative and sum to 1")
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    draws = np.searchsorted(cdf, rng.random(n_shots), side="right")
    np.minimum(draws, pmf.size - 1, out=draws)
    idx, counts = np.unique(draws, return_counts=True)
    return ShotCounts(idx.astype(np.int64), counts.astype(np.int64), n)


def save_params(path, *, n: int, qubits: Sequence[int], ansatz: AnsatzSpec,
                params: Sequence[float], seed, final_kl: float) -> None:
    doc = {
        "n": int(n),
        "qubits": [int(q) for q in qubits],
        "layers": list(ansatz.layers),
        "params": [float(p) for p in params],
        "seed": seed,
        "final_kl": float(final_kl),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_params(path) -> dict:
    doc = json.loads(Path(path).read_text())
    doc["ansatz"] = AnsatzSpec(tuple(doc["layers"]))
    doc["params"] = np.asarray(doc["params"], dtype=float)
    if doc["params"].size != doc["ansatz"].n_params(doc["n"]):
        raise ValueError(f"{path}: parameter count does not match the layer list")
    return doc
