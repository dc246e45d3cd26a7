"""Classic importance-sampling VEGAS on a separable adaptive grid."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .target import MULTIPEAK_CENTERS, Integrand

ROUNDOFF = 64 * np.finfo(float).eps


@dataclass
class VegasGrid:
    """Per-axis bin edges ``x_0 = a < x_1 < ... < x_{N_g} = b``."""

    edges: list[np.ndarray]

    @classmethod
    def uniform(cls, bounds, n_bins: int = 50) -> "VegasGrid":
        if n_bins < 2:
            raise ValueError("need at least two bins per axis")
        return cls([np.linspace(a, b, n_bins + 1) for a, b in bounds])

    @property
    def d(self) -> int:
        return len(self.edges)

    @property
    def n_bins(self) -> int:
        return self.edges[0].size - 1

    def copy(self) -> "VegasGrid":
        return VegasGrid([e.copy() for e in self.edges])


@dataclass(frozen=True)
class VegasConfig:
    n_bins: int = 50
    n_eval: int = 10_000
    n_iter: int = 10
    alpha: float = 1.5
    seed: object = 0

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.n_eval < 2 or self.n_iter < 1:
            raise ValueError("need n_eval >= 2 and n_iter >= 1")


@dataclass
class VegasResult:
    estimates: np.ndarray
    sigmas: np.ndarray
    mean: float
    sigma: float
    best: int
    grid: VegasGrid
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def best_estimate(self) -> float:
        return float(self.estimates[self.best])

    @property
    def best_sigma(self) -> float:
        return float(self.sigmas[self.best])


def map_point(grid: VegasGrid, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``x(y)`` per axis, affine within bin ``floor(y N_g)``; ``J`` is the product
    of ``N_g * dx_i`` over axes."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    ng = grid.n_bins
    x = np.empty_like(y)
    jac = np.ones(y.shape[0])
    for k, e in enumerate(grid.edges):
        t = y[:, k] * ng
        i = np.minimum(t.astype(np.int64), ng - 1)
        dx = e[i + 1] - e[i]
        x[:, k] = e[i] + dx * (t - i)
        jac *= ng * dx
    return x, jac


def accumulate_D(grid: VegasGrid, y: np.ndarray, jf: np.ndarray) -> np.ndarray:
    """Mean of ``(J f)^2`` over the samples landing in each bin, per axis."""
    y = np.atleast_2d(y)
    ng = grid.n_bins
    w = np.asarray(jf, dtype=float) ** 2
    out = np.zeros((grid.d, ng))
    for k in range(grid.d):
        i = np.minimum((y[:, k] * ng).astype(np.int64), ng - 1)
        s = np.bincount(i, weights=w, minlength=ng)
        c = np.bincount(i, minlength=ng)
        out[k] = np.divide(s, c, out=np.zeros(ng), where=c > 0)
    return out


def smooth_compress(D: np.ndarray, alpha: float = 1.5) -> np.ndarray:
    """Neighbour smoothing followed by the damping ``((r - 1) / ln r)^alpha``."""
    D = np.asarray(D, dtype=float)
    if np.any(D < 0):
        raise ValueError("D must be non-negative")
    if not np.any(D > 0):
        raise ValueError("D is identically zero")
    s = np.empty_like(D)
    if D.size == 1:
        s[:] = D
    else:
        s[0] = (D[0] + D[1]) / 2
        s[-1] = (D[-2] + D[-1]) / 2
        s[1:-1] = (D[:-2] + D[1:-1] + D[2:]) / 3
    r = s / s.sum()
    m = np.zeros_like(r)
    pos = r > 0
    near1 = pos & (np.abs(r - 1) < 1e-12)
    reg = pos & ~near1
    m[reg] = ((r[reg] - 1) / np.log(r[reg])) ** alpha
    m[near1] = 1.0
    if alpha == 0:
        m[:] = 1.0
    return m


def rebalance(edges: np.ndarray, m: np.ndarray) -> np.ndarray:
    """New edges such that every bin holds an equal share of ``m``."""
    edges = np.asarray(edges, dtype=float)
    m = np.asarray(m, dtype=float)
    ng = m.size
    if edges.size != ng + 1:
        raise ValueError("need one more edge than bins")
    if np.any(m < 0) or not m.sum() > 0:
        raise ValueError("m must be non-negative with a positive sum")
    cum = np.concatenate([[0.0], np.cumsum(m)])
    targets = np.arange(1, ng) * (cum[-1] / ng)
    i = np.searchsorted(cum, targets, side="left") - 1
    i = np.clip(i, 0, ng - 1)
    frac = (targets - cum[i]) / np.where(m[i] > 0, m[i], 1.0)
    inner = edges[i] + np.clip(frac, 0.0, 1.0) * (edges[i + 1] - edges[i])
    new = np.concatenate([[edges[0]], inner, [edges[-1]]])
    eps = 1e-12 * (edges[-1] - edges[0])
    for k in range(1, ng):
        if new[k] <= new[k - 1]:
            new[k] = new[k - 1] + eps
    for k in range(ng - 1, 0, -1):
        if new[k] >= new[k + 1]:
            new[k] = new[k + 1] - eps
    return new


def combine(estimates, sigmas) -> tuple[float, float]:
    """Inverse-variance weighted mean; zero-variance entries are averaged."""
    est = np.asarray(estimates, dtype=float)
    sig = np.asarray(sigmas, dtype=float)
    zero = sig == 0
    if zero.any():
        return float(est[zero].mean()), 0.0
    w = 1.0 / sig ** 2
    return float(np.sum(w * est) / np.sum(w)), float(1.0 / math.sqrt(np.sum(w)))


def vegas_integrate(f: Integrand, cfg: VegasConfig = VegasConfig(), bounds=None,
                    grid: VegasGrid | None = None, keep_samples: bool = True) -> VegasResult:
    """Adapt the grid for ``cfg.n_iter`` iterations and combine the estimates.

    ``samples`` on the result holds the mapped points of the final iteration.
    """
    bounds = f.bounds if bounds is None else bounds
    grid = VegasGrid.uniform(bounds, cfg.n_bins) if grid is None else grid.copy()
    rng = np.random.default_rng(cfg.seed)
    est, sig = [], []
    x = None
    for _ in range(cfg.n_iter):
        y = rng.random((cfg.n_eval, grid.d))
        x, jac = map_point(grid, y)
        jf = jac * f(x)
        mean = float(np.mean(jf))
        var = float(np.mean((jf - mean) ** 2)) / (cfg.n_eval - 1)
        if var <= (ROUNDOFF * mean) ** 2:
            # spread of J f at the level of rounding: a constant integrand
            var = 0.0
        est.append(mean)
        sig.append(math.sqrt(max(var, 0.0)))
        D = accumulate_D(grid, y, jf)
        for k in range(grid.d):
            if np.any(D[k] > 0):
                grid.edges[k] = rebalance(grid.edges[k], smooth_compress(D[k], cfg.alpha))
    est, sig = np.array(est), np.array(sig)
    mean, sigma = combine(est, sig)
    best = int(np.argmin(sig))
    return VegasResult(est, sig, mean, sigma, best, grid, x if keep_samples else None)


def write_vegas_csv(path, result: VegasResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "estimate", "sigma", "combined_estimate", "combined_sigma", "best"])
        for j in range(result.estimates.size):
            m, s = combine(result.estimates[:j + 1], result.sigmas[:j + 1])
            w.writerow([j, repr(float(result.estimates[j])), repr(float(result.sigmas[j])),
                        repr(m), repr(s), int(j == result.best)])


def write_grid_csv(path, grid: VegasGrid) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "edge", "x"])
        for k, e in enumerate(grid.edges):
            for i, v in enumerate(e):
                w.writerow([k + 1, i, repr(float(v))])


def phantom_diagnostic(points: np.ndarray, peaks=MULTIPEAK_CENTERS,
                       radius: float = 0.05) -> dict:
    """Share of samples within L-infinity ``radius`` of the ``p^d`` products of
    the diagonal peak coordinates, split into true (diagonal) and phantom sites."""
    points = np.atleast_2d(points)
    d = points.shape[1]
    p = len(peaks)
    if d < 2 or p < 2:
        raise ValueError("need d >= 2 and at least two peaks")
    n = points.shape[0]
    true_hits = phantom_hits = 0
    per_site = {}
    for site in product(range(p), repeat=d):
        c = np.array([peaks[i] for i in site])
        hits = int(np.sum(np.all(np.abs(points - c) < radius, axis=1)))
        per_site[site] = hits / n
        if len(set(site)) == 1:
            true_hits += hits
        else:
            phantom_hits += hits
    near = true_hits + phantom_hits
    return {
        "true_fraction": true_hits / n,
        "phantom_fraction": phantom_hits / n,
        "true_share_of_near": true_hits / near if near else math.nan,
        "n_true_sites": p,
        "n_phantom_sites": p ** d - p,
        "per_site": per_site,
    }
