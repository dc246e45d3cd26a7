"""Importance-sampling integral estimate from a measured proposal.

Pipeline for one run::

    shots  ~ multinomial(N, (1 - beta) p + beta / 2^n)
    groups = full_coverage(shots)            # every cell belongs to one group
    points : per group, N_k shifted-Sobol points spread over its rects
    weight : |group volume| * N / N_k
    I      = sum(weight * f) / N
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, cell_widths
from .qmc import sobol_base, sobol_points  # noqa: F401  (re-exported)
from .statevector import ShotCounts, probabilities, sample
from .target import Integrand
from .tiling import TileCoverage, classify_regions, full_coverage, region_counts

HEAVY_WEIGHT_FRACTION = 0.05


@dataclass(frozen=True)
class MixtureConfig:
    """Defensive mixture: a fraction ``beta`` of shots comes from the uniform PMF."""

    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")

    def mix(self, pmf: np.ndarray) -> np.ndarray:
        if self.beta == 0.0:
            return pmf
        return (1.0 - self.beta) * pmf + self.beta / pmf.size


@dataclass
class SampleBatch:
    points: np.ndarray
    weights: np.ndarray
    group: np.ndarray
    n_shots: int
    coverage: TileCoverage


@dataclass
class EstimateResult:
    estimate: float
    std: float
    n_shots: int
    n_states: int
    hilbert_fraction: float
    regions: dict = field(default_factory=dict)
    beta: float = 0.0
    seed: object = None
    flags: tuple = ()

    @property
    def rel_unc(self) -> float:
        return abs(self.std / self.estimate) if self.estimate else math.inf


def as_pmf(proposal) -> np.ndarray:
    """Probabilities from a statevector (complex) or a PMF (real)."""
    arr = np.asarray(proposal)
    if np.iscomplexobj(arr):
        return probabilities(arr)
    return arr.astype(float)


def allocate_samples(coverage: TileCoverage, rng=None, offsets=None) -> np.ndarray:
    """Split each group's shot count over its rects in proportion to volume.

    Uses systematic rounding on exact integers: with a uniform offset
    ``U in [0, G)``, rect ``r`` receives
    ``floor((S_r + U) / G) - floor((S_{r-1} + U) / G)`` samples, where ``S_r`` is
    ``N_k`` times the cumulative cell count and ``G`` the group's cell count.
    Totals are conserved exactly and the expected count of every rect is
    exactly ``N_k * cells_r / G``.  When a share is integral the split is
    deterministic.  ``offsets`` (one integer in ``[0, G)`` per group) replaces
    the random draw.
    """
    rng = np.random.default_rng(rng) if offsets is None else None
    g = coverage.rect_group
    n_k = coverage.counts[g]
    G = coverage.group_cells[g]
    cum = np.cumsum(coverage.rect_cells)
    starts = np.searchsorted(g, np.arange(coverage.n_groups))
    base = np.concatenate([[0], cum])[starts][g]
    upper = n_k * (cum - base)
    lower = upper - n_k * coverage.rect_cells
    if offsets is None:
        offsets = np.floor(rng.random(coverage.n_groups) * coverage.group_cells)
    offsets = np.asarray(offsets, dtype=np.int64)
    if offsets.shape != (coverage.n_groups,) or np.any(offsets < 0) \
            or np.any(offsets >= coverage.group_cells):
        raise ValueError("need one offset in [0, group cells) per group")
    u = offsets[g]
    return (upper + u) // G - (lower + u) // G


def draw_samples(spec: GridSpec, shots: ShotCounts, rng=None) -> SampleBatch:
    """Place weighted quasi-random points for a given shot record."""
    rng = np.random.default_rng(rng)
    cov = full_coverage(spec, shots.indices, shots.counts)
    n_rect = allocate_samples(cov, rng)
    shifts = rng.random((cov.n_groups, spec.d))

    widths = np.array(cell_widths(spec))
    lo = cov.rect_lo[:, ::-1] * widths + spec.lower
    ext = (cov.rect_hi - cov.rect_lo + 1)[:, ::-1] * widths

    rect_of = np.repeat(np.arange(n_rect.size), n_rect)
    first = np.concatenate([[0], np.cumsum(n_rect)[:-1]])
    j = np.arange(rect_of.size) - first[rect_of]
    group = cov.rect_group[rect_of]
    base = sobol_base(spec.d, max(int(n_rect.max()), 1))
    u = np.mod(base[j] + shifts[group], 1.0)
    points = lo[rect_of] + u * ext[rect_of]
    np.clip(points, spec.lower, spec.upper, out=points)

    n = shots.total
    weights = (cov.group_volume * n / cov.counts)[group]
    return SampleBatch(points, weights, group, n, cov)


def _seed_of(seed):
    return seed if seed is None or isinstance(seed, (int, np.integer)) else str(seed)


def qais_estimate(spec: GridSpec, f: Integrand, proposal, n_shots: int,
                  mix: MixtureConfig | float = 0.0, seed=None,
                  return_samples: bool = False, kappa: float = 1.0):
    """Debiased importance-sampling estimate of ``int f`` over the grid domain.

    Parameters
    ----------
    proposal : ndarray
        Statevector (complex) or PMF (real) on ``spec.n`` qubits.
    mix : MixtureConfig or float
        Defensive fraction ``beta``.
    return_samples : bool
        Also return the :class:`SampleBatch`.
    """
    if n_shots < 2:
        raise ValueError("need at least two shots")
    if f.d != spec.d:
        raise ValueError("integrand and grid dimensions differ")
    mix = mix if isinstance(mix, MixtureConfig) else MixtureConfig(float(mix))
    pmf = as_pmf(proposal)
    if pmf.size != spec.n_cells:
        raise ValueError(f"proposal has {pmf.size} states, grid has {spec.n_cells} cells")
    rng = np.random.default_rng(seed)
    shots = sample(mix.mix(pmf), n_shots, rng)
    batch = draw_samples(spec, shots, rng)

    values = f(batch.points)
    flags = []
    wf = batch.weights * values
    if not np.all(np.isfinite(wf)):
        flags.append("non-finite")
    if np.max(batch.weights) / n_shots > HEAVY_WEIGHT_FRACTION * spec.volume:
        flags.append("heavy-weight")
    est = float(np.sum(wf) / n_shots)
    var = (float(np.sum(wf * wf)) / n_shots - est * est) / (n_shots - 1)
    std = math.sqrt(max(var, 0.0)) if np.isfinite(var) else math.nan

    labels = classify_regions(spec, shots.indices, shots.counts, kappa)
    result = EstimateResult(
        estimate=est, std=std, n_shots=n_shots, n_states=shots.n_states,
        hilbert_fraction=shots.n_states / spec.n_cells, regions=region_counts(labels),
        beta=mix.beta, seed=_seed_of(seed), flags=tuple(flags))
    if return_samples:
        return result, batch
    return result


def derive_seeds(seed, count: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in ss.spawn(count)]


def repeat_runs(spec: GridSpec, f: Integrand, proposal, n_shots: int,
                mix: MixtureConfig | float = 0.0, n_runs: int = 100, seed=0,
                n_jobs: int = 1):
    """Independent replicate estimates with a fixed proposal.

    Returns ``(results, summary)``; the summary holds the mean estimate, the
    standard deviation of the estimates (``spread``) and the mean reported std.
    """
    if n_runs < 2:
        raise ValueError("need at least two replicates")
    pmf = as_pmf(proposal)
    seeds = derive_seeds(seed, n_runs)
    run = lambda s: qais_estimate(spec, f, pmf, n_shots, mix, s)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    est = np.array([r.estimate for r in results])
    summary = {
        "n_runs": n_runs,
        "n_shots": n_shots,
        "mean": float(est.mean()),
        "spread": float(est.std(ddof=1)),
        "mean_std": float(np.mean([r.std for r in results])),
        "mean_states": float(np.mean([r.n_states for r in results])),
    }
    return results, summary


def plain_mc_estimate(f: Integrand, n: int, seed=None, chunk: int = 1 << 20):
    """Uniform Monte Carlo ``(estimate, std)`` over the integrand's box."""
    rng = np.random.default_rng(seed)
    lo = np.array([a for a, _ in f.bounds])
    hi = np.array([b for _, b in f.bounds])
    s1 = s2 = 0.0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        v = f(lo + rng.random((m, f.d)) * (hi - lo))
        s1 += float(np.sum(v))
        s2 += float(np.sum(v * v))
    vol = f.volume
    mean = s1 / n
    var = (s2 / n - mean * mean) / (n - 1)
    return vol * mean, vol * math.sqrt(max(var, 0.0))


ESTIMATE_COLUMNS = ["run_id", "N", "estimate", "std", "M", "hilbert_fraction", "beta", "seed"]


def append_estimate_csv(path, run_id, result: EstimateResult) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(ESTIMATE_COLUMNS)
        w.writerow([run_id, result.n_shots, repr(result.estimate), repr(result.std),
                    result.n_states, repr(result.hilbert_fraction), result.beta, result.seed])
