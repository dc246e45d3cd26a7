"""Big-endian encoding of a discretized hyper-rectangular domain.

Conventions used throughout the package:

* ``GridSpec.qubits`` and ``GridSpec.bounds`` are listed by axis,
  ``(q_1, ..., q_d)``.
* Cell coordinates are tuples in *big-endian* order ``(x_d, ..., x_1)``:
  axis ``d`` occupies the most significant bit block of the linear index and
  axis 1 the least significant one.  Hyper-rectangles use the same order.
* Continuous points are arrays in axis order ``(x_1, ..., x_d)``, which is what
  integrands receive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_QUBITS = 26


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``2^{q_1} x ... x 2^{q_d}`` grid over a box.

    Parameters
    ----------
    qubits : sequence of int
        Qubits per axis, ``(q_1, ..., q_d)``.
    bounds : sequence of (float, float), optional
        ``(a_i, b_i)`` per axis; defaults to the unit cube.
    max_qubits : int
        Upper limit on the total qubit count.
    """

    qubits: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...] = ()
    max_qubits: int = field(default=MAX_QUBITS, compare=False, repr=False)

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        if not qubits:
            raise ValueError("at least one dimension is required")
        if any(q < 1 for q in qubits):
            raise ValueError(f"qubit counts must be >= 1, got {qubits}")
        bounds = self.bounds or tuple((0.0, 1.0) for _ in qubits)
        bounds = tuple((float(a), float(b)) for a, b in bounds)
        if len(bounds) != len(qubits):
            raise ValueError("bounds and qubits must have the same length")
        for a, b in bounds:
            if not b > a:
                raise ValueError(f"empty interval [{a}, {b}]")
        if sum(qubits) > self.max_qubits:
            raise ValueError(
                f"{sum(qubits)} qubits exceeds the configured maximum {self.max_qubits}"
            )
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "bounds", bounds)

    @property
    def d(self) -> int:
        return len(self.qubits)

    @property
    def n(self) -> int:
        return sum(self.qubits)

    @property
    def n_cells(self) -> int:
        return 1 << self.n

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.bounds])

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in self.bounds)

    @property
    def dims_be(self) -> tuple[int, ...]:
        """Cells per axis in big-endian order ``(2^{q_d}, ..., 2^{q_1})``."""
        return tuple(1 << q for q in reversed(self.qubits))

    @property
    def cell_volume(self) -> float:
        return math.prod(cell_widths(self))

    def to_config(self) -> dict[str, str]:
        return {
            "dims": str(self.d),
            "qubits": ", ".join(str(q) for q in self.qubits),
            "lower": ", ".join(repr(a) for a, _ in self.bounds),
            "upper": ", ".join(repr(b) for _, b in self.bounds),
        }

    @classmethod
    def from_config(cls, section) -> "GridSpec":
        qubits = _floats(section["qubits"], int)
        d = int(section.get("dims", len(qubits)))
        if d != len(qubits):
            raise ValueError(f"dims={d} but {len(qubits)} qubit counts given")
        lower = _floats(section.get("lower", ", ".join(["0"] * d)))
        upper = _floats(section.get("upper", ", ".join(["1"] * d)))
        return cls(qubits, tuple(zip(lower, upper)))


def _floats(text: str, kind=float) -> list:
    return [kind(tok) for tok in str(text).replace(",", " ").split()]


@dataclass(frozen=True)
class HyperRect:
    """Inclusive block of cells, ``lo``/``hi`` in big-endian coordinates."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate rect {self.lo}-{self.hi}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def n_cells(self) -> int:
        return math.prod(self.shape)


def cell_widths(spec: GridSpec) -> tuple[float, ...]:
    """Per-axis cell width ``(b_i - a_i) / 2^{q_i}``, axis order."""
    return tuple((b - a) / (1 << q) for (a, b), q in zip(spec.bounds, spec.qubits))


def linear_to_coords(spec: GridSpec, linear) -> tuple[int, ...] | np.ndarray:
    """Mixed-radix digits of ``linear``, big-endian.

    Accepts a scalar (returns a tuple) or an integer array (returns an array of
    shape ``(len(linear), d)``).
    """
    scalar = np.ndim(linear) == 0
    lin = np.atleast_1d(np.asarray(linear, dtype=np.int64))
    if np.any(lin < 0) or np.any(lin >= spec.n_cells):
        raise ValueError(f"linear index out of range [0, {spec.n_cells})")
    coords = np.empty((lin.size, spec.d), dtype=np.int64)
    shift = 0
    for axis, q in enumerate(spec.qubits):
        coords[:, spec.d - 1 - axis] = (lin >> shift) & ((1 << q) - 1)
        shift += q
    if scalar:
        return tuple(int(c) for c in coords[0])
    return coords


def coords_to_linear(spec: GridSpec, coords) -> int | np.ndarray:
    """Inverse of :func:`linear_to_coords`."""
    arr = np.asarray(coords, dtype=np.int64)
    scalar = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != spec.d:
        raise ValueError(f"expected {spec.d} coordinates, got {arr.shape[1]}")
    dims = np.array(spec.dims_be)
    if np.any(arr < 0) or np.any(arr >= dims):
        raise ValueError("coordinate out of range")
    lin = np.zeros(arr.shape[0], dtype=np.int64)
    for k, q in enumerate(reversed(spec.qubits)):
        lin = (lin << q) | arr[:, k]
    return int(lin[0]) if scalar else lin


def cell_bounds(spec: GridSpec, coords: Sequence[int]) -> list[tuple[float, float]]:
    """Continuous intervals of one cell, listed in axis order (axis 1 first)."""
    if len(coords) != spec.d:
        raise ValueError(f"expected {spec.d} coordinates")
    out = []
    for axis, (width, (a, _)) in enumerate(zip(cell_widths(spec), spec.bounds)):
        x = int(coords[spec.d - 1 - axis])
        if not 0 <= x < (1 << spec.qubits[axis]):
            raise ValueError("coordinate out of range")
        out.append((a + x * width, a + (x + 1) * width))
    return out


def rect_bounds(spec: GridSpec, rect: HyperRect) -> list[tuple[float, float]]:
    """Continuous intervals spanned by ``rect``, axis order."""
    lo = cell_bounds(spec, rect.lo)
    hi = cell_bounds(spec, rect.hi)
    return [(l[0], h[1]) for l, h in zip(lo, hi)]


def rect_volume(spec: GridSpec, rect: HyperRect) -> float:
    dims = spec.dims_be
    if any(not 0 <= l <= h < m for l, h, m in zip(rect.lo, rect.hi, dims)):
        raise ValueError("rect outside the grid")
    return rect.n_cells * spec.cell_volume
