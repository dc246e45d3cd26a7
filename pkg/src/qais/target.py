"""Benchmark integrands and target PMFs for proposal training."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import product
from typing import Callable

import numpy as np
from scipy.special import erf

from .grid import GridSpec, linear_to_coords, cell_widths
from .qmc import sobol_base

REFERENCE_P11 = -1.24027e-13
REFERENCE_P11_ERROR = 0.00016e-13
GAUSS2_CENTERS = ((0.23, 0.23), (0.74, 0.74))
MULTIPEAK_CENTERS = (0.23, 0.39, 0.74)
RING_CENTER = (0.5, 0.5)
RING_RADIUS = 0.35


@dataclass(eq=False)
class Integrand:
    """Vectorised real function on a box.

    ``func`` maps an ``(m, d)`` array of points (axis order) to ``m`` values.
    ``signed`` marks integrands that may change sign; their training target is
    built from ``|f|``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    bounds: tuple[tuple[float, float], ...]
    label: str
    signed: bool = False
    n_calls: int = field(default=0, init=False)
    _cell_cache: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def d(self) -> int:
        return len(self.bounds)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in self.bounds)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ValueError(f"{self.label}: expected points of dimension {self.d}")
        self.n_calls += x.shape[0]
        return np.asarray(self.func(x), dtype=float)


# ---------------------------------------------------------------- benchmarks

def _gauss_1d_mass(center: float, width_coef: float) -> float:
    # int_0^1 exp(-c (x - r)^2) dx
    s = math.sqrt(width_coef)
    return math.sqrt(math.pi) / (2 * s) * (erf(s * (1 - center)) + erf(s * center))


def gauss2_norm() -> float:
    """Constant making the two-Gaussian benchmark integrate to one on [0,1]^2."""
    total = sum(math.prod(_gauss_1d_mass(c, 200.0) for c in r) for r in GAUSS2_CENTERS)
    return 1.0 / total


@lru_cache(maxsize=None)
def gauss2_integrand() -> Integrand:
    norm = gauss2_norm()
    centers = np.array(GAUSS2_CENTERS)

    def f(x):
        acc = np.zeros(x.shape[0])
        for r in centers:
            acc += np.exp(-200.0 * np.sum((x - r) ** 2, axis=1))
        return norm * acc

    return Integrand(f, ((0.0, 1.0), (0.0, 1.0)), "gauss2")


@lru_cache(maxsize=None)
def ring_integrand() -> Integrand:
    center = np.array(RING_CENTER)

    def f(x):
        rho = np.sqrt(np.sum((x - center) ** 2, axis=1))
        return np.exp(-200.0 * (rho - RING_RADIUS) ** 2)

    return Integrand(f, ((0.0, 1.0), (0.0, 1.0)), "ring")


def ring_reference() -> float:
    """Integral of the ring over [0,1]^2 by radial quadrature.

    The ring at radius 0.35 +- a few 0.05 never reaches the square's edges
    except through tails below exp(-200 * 0.15^2) ~ 1e-2 at rho = 0.5; the
    radial integral is therefore clipped to the square exactly by integrating
    the angular measure of the circle inside the square.
    """
    from scipy.integrate import quad

    def inside_angle(rho):
        # angular measure of the circle of radius rho (centred) inside [0,1]^2
        if rho <= 0.5:
            return 2 * math.pi
        if rho >= math.sqrt(0.5):
            return 0.0
        return 2 * math.pi - 8 * math.acos(0.5 / rho)

    g = lambda rho: rho * inside_angle(rho) * math.exp(-200 * (rho - RING_RADIUS) ** 2)
    a, _ = quad(g, 0, 0.5, points=[RING_RADIUS], epsabs=1e-14, epsrel=1e-12)
    b, _ = quad(g, 0.5, math.sqrt(0.5), epsabs=1e-14, epsrel=1e-12)
    return a + b


@lru_cache(maxsize=None)
def multipeak_integrand(d: int) -> Integrand:
    """Three peaks ``exp(-50 |x - r_i|)`` on the diagonal of ``[0,1]^d``."""
    if not 2 <= d <= 6:
        raise ValueError("multipeak integrand defined for 2 <= d <= 6")
    centers = [np.full(d, c) for c in MULTIPEAK_CENTERS]

    def f(x):
        acc = np.zeros(x.shape[0])
        for r in centers:
            acc += np.exp(-50.0 * np.sqrt(np.sum((x - r) ** 2, axis=1)))
        return acc

    return Integrand(f, tuple((0.0, 1.0) for _ in range(d)), f"multipeak{d}")


def phantom_peak_count(p: int, d: int) -> int:
    return p ** d - p


def product_gauss_integrand(d: int = 2, center: float = 0.5, coef: float = 200.0) -> Integrand:
    """Separable single peak, used as a phantom-free control."""
    def f(x):
        return np.exp(-coef * np.sum((x - center) ** 2, axis=1))

    return Integrand(f, tuple((0.0, 1.0) for _ in range(d)), f"prodgauss{d}")


def constant_integrand(value: float, bounds) -> Integrand:
    bounds = tuple((float(a), float(b)) for a, b in bounds)
    return Integrand(lambda x: np.full(x.shape[0], float(value)), bounds,
                     f"const{value}", signed=value < 0)


# ------------------------------------------------------------------ pentagon

@dataclass(frozen=True)
class PentagonKinematics:
    """External momenta ``p_1..p_4`` as ``(E, px, py, pz)`` and five masses."""

    p: tuple[tuple[float, float, float, float], ...]
    m: tuple[float, ...]

    def __post_init__(self):
        if len(self.p) != 4 or any(len(v) != 4 for v in self.p):
            raise ValueError("need four four-momenta p1..p4")
        if len(self.m) != 5 or any(not mi > 0 for mi in self.m):
            raise ValueError("need five positive masses m1..m5")

    @property
    def k(self) -> np.ndarray:
        """Propagator offsets ``k_i = sum_{j<=i} p_j`` (``k_5 = 0``), shape (5, 4)."""
        k = np.zeros((5, 4))
        k[:4] = np.cumsum(np.array(self.p, dtype=float), axis=0)
        return k

    @classmethod
    def zero(cls, mass: float = 1.0) -> "PentagonKinematics":
        return cls(tuple((0.0,) * 4 for _ in range(4)), (mass,) * 5)


def load_kinematics(path) -> PentagonKinematics:
    cfg = configparser.ConfigParser()
    if not cfg.read(path):
        raise FileNotFoundError(path)
    sec = cfg["kinematics"]
    p = []
    for i in range(1, 5):
        vals = [float(t) for t in sec[f"p{i}"].replace(",", " ").split()]
        if len(vals) != 4:
            raise ValueError(f"{path}: p{i} needs four components")
        p.append(tuple(vals))
    m = tuple(float(sec[f"m{i}"]) for i in range(1, 6))
    return PentagonKinematics(tuple(p), m)


def p11_kinematics() -> PentagonKinematics:
    with resources.as_file(resources.files("qais") / "data" / "p11.cfg") as path:
        return load_kinematics(path)


def loop_momentum(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map unit-cube points ``(z, cos-theta, phi)`` to loop three-momenta.

    Returns the momenta ``(m, 3)`` and the measure
    ``|l|^2 / (1-z)^2 * 2 * 2 pi / (2 pi)^3``.
    """
    z = np.minimum(u[:, 0], 1.0 - 1e-12)
    r = z / (1.0 - z)
    cos_t = 2.0 * u[:, 1] - 1.0
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * u[:, 2]
    ell = np.stack([r * sin_t * np.cos(phi), r * sin_t * np.sin(phi), r * cos_t], axis=1)
    measure = r * r / (1.0 - z) ** 2 * 2.0 * 2.0 * math.pi / (2.0 * math.pi) ** 3
    return ell, measure


def _on_shell(kin: PentagonKinematics, ell: np.ndarray) -> np.ndarray:
    k = kin.k
    q = ell[None, :, :] + k[:, None, 1:]
    m2 = np.array(kin.m)[:, None] ** 2
    return np.sqrt(np.sum(q * q, axis=2) + m2)


def single_cut_sum(kin: PentagonKinematics, ell: np.ndarray) -> np.ndarray:
    """Energy-integrated pentagon: ``-sum_i 1/(2E_i) prod_{j!=i} 1/(q_j^2 - m_j^2)``
    on the positive-energy pole of propagator ``i``, compensated summation."""
    E = _on_shell(kin, ell)
    k0 = kin.k[:, 0]
    total = np.zeros(ell.shape[0])
    comp = np.zeros(ell.shape[0])
    for i in range(5):
        term = 1.0 / (2.0 * E[i])
        for j in range(5):
            if j == i:
                continue
            e = E[i] + (k0[j] - k0[i])
            term = term / ((e - E[j]) * (e + E[j]))
        # Neumaier summation
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
    return -(total + comp)


@lru_cache(maxsize=None)
def causal_terms(n_prop: int) -> tuple[tuple[float, tuple[tuple[int, int], ...]], ...]:
    """Expansion of the one-loop energy integral into causal thresholds.

    Every propagator is split into its two on-shell poles (one on each side of
    the real axis); the energy integral of each pole configuration is reduced
    by partial fractions ``1/((x-u)(x-v)) = (1/(u-v)) (1/(x-v) - 1/(x-u))``
    until one pole pair remains.  Each returned term is
    ``coef * prod 1/lambda_{ij}`` with
    ``lambda_{ij} = E_i + E_j + k_{j,0} - k_{i,0}`` (always a sum of on-shell
    energies plus an external energy), and the integrand over
    ``d^3 l / (2 pi)^3`` is ``-(prod_i 1/(2 E_i)) * sum_terms``.
    """

    @lru_cache(maxsize=None)
    def reduce(U: frozenset, V: frozenset) -> dict:
        # G(U, V) with  int dx/2pi prod 1/(x-u) prod 1/(x-v) = -i G
        if not U or not V:
            return {}
        if len(U) == 1 and len(V) == 1:
            (i,), (j,) = tuple(U), tuple(V)
            return {((i, j),): 1.0}
        i, j = min(U), min(V)
        out: dict = {}
        for sign, sub in ((1.0, reduce(U, V - {j})), (-1.0, reduce(U - {i}, V))):
            for key, c in sub.items():
                nk = tuple(sorted(key + ((i, j),)))
                out[nk] = out.get(nk, 0.0) + sign * c
        return out

    acc: dict = {}
    for lower in product((True, False), repeat=n_prop):
        U = frozenset(i for i in range(n_prop) if lower[i])
        V = frozenset(i for i in range(n_prop) if not lower[i])
        sign = (-1.0) ** len(V)
        for key, c in reduce(U, V).items():
            acc[key] = acc.get(key, 0.0) + sign * c
    return tuple((c, key) for key, c in sorted(acc.items()) if c != 0.0)


def causal_sum(kin: PentagonKinematics, ell: np.ndarray) -> np.ndarray:
    """Same quantity as :func:`single_cut_sum`, written with causal thresholds
    only; regular when on-shell poles coincide (e.g. vanishing momenta)."""
    E = _on_shell(kin, ell)
    k0 = kin.k[:, 0]
    lam = {}
    total = np.zeros(ell.shape[0])
    for coef, pairs in causal_terms(5):
        term = np.full(ell.shape[0], coef)
        for i, j in pairs:
            if (i, j) not in lam:
                lam[i, j] = E[i] + E[j] + (k0[j] - k0[i])
            term /= lam[i, j]
        total += term
    return -total / np.prod(2.0 * E, axis=0)


def pentagon_ltd_integrand(kin: PentagonKinematics | None = None,
                           form: str = "single-cut") -> Integrand:
    """One-loop scalar pentagon on the unit cube ``(z, cos-theta, phi)``.

    ``form`` selects the single-cut residue sum or the causal-threshold
    expansion; both evaluate the same function.
    """
    kin = p11_kinematics() if kin is None else kin
    summand = {"single-cut": single_cut_sum, "causal": causal_sum}[form]

    def f(u):
        ell, measure = loop_momentum(u)
        return measure * summand(kin, ell)

    return Integrand(f, ((0.0, 1.0),) * 3, f"pentagon-{form}", signed=True)


def causal_pentagon_integrand(kin: PentagonKinematics | None = None) -> Integrand:
    return pentagon_ltd_integrand(kin, form="causal")


def pentagon_zero_momentum_reference(mass: float = 1.0) -> float:
    """``Gamma(3)/Gamma(5) (4 pi)^-2 m^-6`` with the overall sign of the measure."""
    return -1.0 / (192.0 * math.pi ** 2 * mass ** 6)


# ---------------------------------------------------------------- target PMF

@dataclass
class TargetPMF:
    """Normalised per-cell weights used as the training target."""

    probabilities: np.ndarray
    normalization: float
    n_per_cell: int
    cell_means: np.ndarray

    @property
    def n(self) -> int:
        return int(self.probabilities.size).bit_length() - 1


def cell_points(spec: GridSpec, cells: np.ndarray, unit: np.ndarray) -> np.ndarray:
    """Points ``unit`` (``(k, d)`` in [0,1)^d, axis order) placed in every cell of
    ``cells``; returns ``(len(cells) * k, d)`` grouped by cell."""
    coords = linear_to_coords(spec, np.asarray(cells, dtype=np.int64))[:, ::-1]
    widths = np.array(cell_widths(spec))
    lower = spec.lower + coords * widths
    pts = lower[:, None, :] + unit[None, :, :] * widths
    return pts.reshape(-1, spec.d)


def cell_averages(spec: GridSpec, f: Integrand, n_per_cell: int = 8, seed=0,
                  placement: str = "sobol", chunk: int = 1 << 20) -> np.ndarray:
    """Mean of ``f`` over ``n_per_cell`` points in every cell, cached on ``f``."""
    if n_per_cell < 1:
        raise ValueError("n_per_cell must be >= 1")
    if f.d != spec.d:
        raise ValueError("integrand and grid dimensions differ")
    key = (spec, int(n_per_cell), seed, placement)
    if key in f._cell_cache:
        return f._cell_cache[key]
    if placement == "center":
        if n_per_cell != 1:
            raise ValueError("centre placement uses one point per cell")
        unit = np.full((1, spec.d), 0.5)
    elif placement == "sobol":
        shift = np.random.default_rng(seed).random(spec.d)
        unit = np.mod(sobol_base(spec.d, n_per_cell) + shift, 1.0)
    else:
        raise ValueError(f"unknown placement {placement!r}")
    means = np.empty(spec.n_cells)
    step = max(1, chunk // n_per_cell)
    for start in range(0, spec.n_cells, step):
        cells = np.arange(start, min(start + step, spec.n_cells))
        vals = f(cell_points(spec, cells, unit))
        means[cells] = vals.reshape(cells.size, n_per_cell).mean(axis=1)
    means.setflags(write=False)
    f._cell_cache[key] = means
    return means


def build_target_pmf(spec: GridSpec, f: Integrand, n_per_cell: int = 8, seed=0,
                     placement: str = "sobol") -> TargetPMF:
    means = cell_averages(spec, f, n_per_cell, seed, placement)
    if not np.all(np.isfinite(means)):
        raise FloatingPointError(f"{f.label}: non-finite cell average")
    if f.signed:
        weights = np.abs(means)
    else:
        if np.any(means < 0):
            raise ValueError(f"{f.label}: negative cell average; mark the integrand signed")
        weights = np.asarray(means)
    z = float(weights.sum())
    if not z > 0:
        raise ValueError(f"{f.label}: integrand vanishes on every cell")
    return TargetPMF(weights / z, z, int(n_per_cell), means)
