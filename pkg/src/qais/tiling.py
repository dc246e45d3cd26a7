"""Gap tiling: complete a sparse set of measured cells to a partition of the grid.

Gaps between consecutive measured linear indices are covered greedily by
hyper-rectangles, expanding from the least significant axis upwards; each
gap needs at most ``2(d-1)+1`` rectangles.  Every gap is attached to the
measured state that follows it (the trailing gap to the last state), so each
measured cell anchors a group and the groups partition the grid.

All gaps are processed together with array operations; the loop runs over
expansion rounds (at most ``2d-1``), not over gaps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .grid import GridSpec, HyperRect, coords_to_linear, linear_to_coords

IMPORTANT, BOUNDARY, NOISE = "important", "boundary", "noise"


def max_rects_per_gap(d: int) -> int:
    return 2 * (d - 1) + 1


def _greedy_expand_arrays(dims: np.ndarray, coords: np.ndarray, delta: np.ndarray):
    """Vectorised GreedyMultidimExpand over rows of ``coords``."""
    d = dims.size
    shape = np.ones_like(coords)
    shape[:, d - 1] = np.minimum(delta, dims[d - 1] - coords[:, d - 1])
    comb = dims[d - 1]
    for i in range(d - 2, -1, -1):
        full = (coords[:, i + 1] == 0) & (shape[:, i + 1] == dims[i + 1])
        extend = delta // comb
        shape[:, i] = np.where(full & (extend > 0),
                               np.minimum(dims[i] - coords[:, i], np.maximum(extend, 1)), 1)
        comb = comb * dims[i]
    return shape, np.prod(shape, axis=1)


def greedy_expand(spec: GridSpec, start, delta: int) -> tuple[tuple[int, ...], int]:
    """Largest greedy block starting at big-endian ``start`` with at most
    ``delta`` cells; returns ``(shape, cells_filled)``."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    start = np.asarray(start, dtype=np.int64)
    dims = np.array(spec.dims_be, dtype=np.int64)
    if start.shape != (spec.d,) or np.any(start < 0) or np.any(start >= dims):
        raise ValueError(f"invalid start coordinates {tuple(start)}")
    shape, filled = _greedy_expand_arrays(dims, start[None, :], np.array([delta]))
    return tuple(int(s) for s in shape[0]), int(filled[0])


def _tile_gaps(spec: GridSpec, starts: np.ndarray, lengths: np.ndarray):
    """Tile many gaps at once; returns (lo, hi, gap_id, round) arrays."""
    dims = np.array(spec.dims_be, dtype=np.int64)
    cur = np.asarray(starts, dtype=np.int64).copy()
    rem = np.asarray(lengths, dtype=np.int64).copy()
    ids = np.arange(cur.size)
    los, his, gid, rnd = [], [], [], []
    r = 0
    while True:
        act = rem > 0
        if not act.any():
            break
        cur, rem, ids = cur[act], rem[act], ids[act]
        coords = linear_to_coords(spec, cur)
        shape, filled = _greedy_expand_arrays(dims, coords, rem)
        los.append(coords)
        his.append(coords + shape - 1)
        gid.append(ids)
        rnd.append(np.full(ids.size, r))
        cur = cur + filled
        rem = rem - filled
        r += 1
    if not los:
        e = np.empty((0, spec.d), dtype=np.int64)
        return e, e.copy(), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return (np.concatenate(los), np.concatenate(his), np.concatenate(gid),
            np.concatenate(rnd))


def gap_tiles(spec: GridSpec, start: int, delta: int) -> list[HyperRect]:
    """Rectangles covering the ``delta`` cells from linear index ``start`` on."""
    if delta < 0 or start < 0 or start + delta > spec.n_cells:
        raise ValueError("gap outside the grid")
    if delta == 0:
        return []
    lo, hi, _, rnd = _tile_gaps(spec, np.array([start]), np.array([delta]))
    order = np.argsort(rnd, kind="stable")
    return [HyperRect(tuple(map(int, lo[k])), tuple(map(int, hi[k]))) for k in order]


@dataclass(frozen=True)
class Group:
    anchor: int
    count: int
    rects: list[HyperRect]
    volume: float
    n_cells: int


@dataclass
class TileCoverage:
    """Measured anchors plus the rectangles attached to each of them.

    Rect arrays are sorted by group; within a group the anchor's own cell comes
    first, then the tiles of the preceding gap, then (last group only) the
    trailing gap.
    """

    spec: GridSpec
    anchors: np.ndarray
    counts: np.ndarray
    rect_lo: np.ndarray
    rect_hi: np.ndarray
    rect_group: np.ndarray
    rect_cells: np.ndarray
    group_cells: np.ndarray
    gap_rect_counts: np.ndarray

    @property
    def n_groups(self) -> int:
        return int(self.anchors.size)

    @property
    def n_shots(self) -> int:
        return int(self.counts.sum())

    @property
    def rect_volume(self) -> np.ndarray:
        return self.rect_cells * self.spec.cell_volume

    @property
    def group_volume(self) -> np.ndarray:
        return self.group_cells * self.spec.cell_volume

    @property
    def groups(self) -> list[Group]:
        starts = np.searchsorted(self.rect_group, np.arange(self.n_groups + 1))
        vol = self.group_volume
        out = []
        for g in range(self.n_groups):
            sl = slice(starts[g], starts[g + 1])
            rects = [HyperRect(tuple(map(int, l)), tuple(map(int, h)))
                     for l, h in zip(self.rect_lo[sl], self.rect_hi[sl])]
            out.append(Group(int(self.anchors[g]), int(self.counts[g]), rects,
                             float(vol[g]), int(self.group_cells[g])))
        return out

    def to_csv(self, path) -> None:
        d = self.spec.d
        vol = self.rect_volume
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["group", "anchor"] + [f"lo{i + 1}" for i in range(d)]
                       + [f"hi{i + 1}" for i in range(d)] + ["cells", "volume"])
            for r in range(self.rect_group.size):
                g = int(self.rect_group[r])
                # columns in axis order: big-endian arrays are reversed
                w.writerow([g, int(self.anchors[g])]
                           + [int(v) for v in self.rect_lo[r, ::-1]]
                           + [int(v) for v in self.rect_hi[r, ::-1]]
                           + [int(self.rect_cells[r]), repr(float(vol[r]))])


def _as_measured(spec: GridSpec, indices, counts=None):
    idx = np.asarray(indices, dtype=np.int64).ravel()
    cnt = np.ones_like(idx) if counts is None else np.asarray(counts, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValueError("at least one measured state is required")
    if cnt.shape != idx.shape:
        raise ValueError("indices and counts differ in length")
    if np.any(idx < 0) or np.any(idx >= spec.n_cells):
        raise ValueError("measured index outside the grid")
    if np.any(cnt < 1):
        raise ValueError("counts must be >= 1")
    order = np.argsort(idx, kind="stable")
    idx, cnt = idx[order], cnt[order]
    if np.any(np.diff(idx) == 0):
        raise ValueError("duplicate measured index")
    return idx, cnt


def full_coverage(spec: GridSpec, indices, counts=None) -> TileCoverage:
    """Partition the grid into groups anchored on the measured states."""
    idx, cnt = _as_measured(spec, indices, counts)
    m = idx.size
    prev_end = np.concatenate([[0], idx[:-1] + 1])
    starts = np.concatenate([prev_end, [idx[-1] + 1]])
    lengths = np.concatenate([idx - prev_end, [spec.n_cells - idx[-1] - 1]])
    gap_group = np.concatenate([np.arange(m), [m - 1]])
    gap_kind = np.concatenate([np.ones(m, dtype=np.int64), [2]])

    lo, hi, gid, rnd = _tile_gaps(spec, starts, lengths)
    own = linear_to_coords(spec, idx)
    all_lo = np.concatenate([own, lo])
    all_hi = np.concatenate([own, hi])
    group = np.concatenate([np.arange(m), gap_group[gid]])
    kind = np.concatenate([np.zeros(m, dtype=np.int64), gap_kind[gid]])
    rounds = np.concatenate([np.zeros(m, dtype=np.int64), rnd])
    order = np.lexsort((rounds, kind, group))
    all_lo, all_hi, group = all_lo[order], all_hi[order], group[order]
    cells = np.prod(all_hi - all_lo + 1, axis=1)
    group_cells = np.bincount(group, weights=cells, minlength=m).astype(np.int64)
    gap_rects = np.bincount(gid, minlength=m + 1)
    return TileCoverage(spec, idx, cnt, all_lo, all_hi, group, cells, group_cells, gap_rects)


def _neighbour_mask(spec: GridSpec, idx: np.ndarray) -> np.ndarray:
    coords = linear_to_coords(spec, idx)
    dims = np.array(spec.dims_be)
    has = np.zeros(idx.size, dtype=bool)
    for axis in range(spec.d):
        for step in (-1, 1):
            nb = coords.copy()
            nb[:, axis] += step
            ok = (nb[:, axis] >= 0) & (nb[:, axis] < dims[axis])
            if not ok.any():
                continue
            lin = coords_to_linear(spec, nb[ok])
            pos = np.searchsorted(idx, lin)
            hit = (pos < idx.size) & (idx[np.minimum(pos, idx.size - 1)] == lin)
            sub = np.zeros(idx.size, dtype=bool)
            sub[np.flatnonzero(ok)[hit]] = True
            has |= sub
    return has


def classify_regions(spec: GridSpec, indices, counts, kappa: float = 1.0) -> np.ndarray:
    """Label measured cells important / boundary / noise (diagnostic only).

    Labels are returned in ascending order of the linear index.
    """
    idx, cnt = _as_measured(spec, indices, counts)
    has_nb = _neighbour_mask(spec, idx)
    threshold = kappa * cnt.sum() / idx.size
    labels = np.full(idx.size, BOUNDARY, dtype="<U9")
    labels[~has_nb] = NOISE
    labels[has_nb & (cnt >= threshold)] = IMPORTANT
    return labels


def region_counts(labels: Iterable[str]) -> dict[str, int]:
    labels = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels)
    return {k: int(np.sum(labels == k)) for k in (IMPORTANT, BOUNDARY, NOISE)}


def rect_linear_cells(spec: GridSpec, lo, hi) -> np.ndarray:
    """Linear indices of every cell in an inclusive big-endian rect."""
    axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.d)
    return coords_to_linear(spec, mesh)


def _cover_counts(spec: GridSpec, lo: np.ndarray, hi: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Per-cell sum of ``weight`` over the rects containing the cell.

    Uses a d-dimensional difference array: each rect adds its weight with
    alternating sign at the ``2^d`` corners, and cumulative sums along every
    axis recover the cell totals in linear (row-major, big-endian) order.
    """
    dims = np.array(spec.dims_be)
    diff = np.zeros(tuple(dims + 1), dtype=np.int64)
    for corner in range(1 << spec.d):
        upper = np.array([(corner >> k) & 1 for k in range(spec.d)], dtype=bool)
        idx = np.where(upper, hi + 1, lo)
        sign = -1 if upper.sum() % 2 else 1
        np.add.at(diff, tuple(idx.T), sign * weight)
    for k in range(spec.d):
        np.cumsum(diff, axis=k, out=diff)
    return diff[tuple(slice(0, n) for n in dims)].reshape(-1)


def check_coverage(cov: TileCoverage) -> list[str]:
    """Validate a coverage by counting, for every grid cell, the rects over it."""
    spec = cov.spec
    problems = []
    dims = np.array(spec.dims_be)
    lo, hi = np.asarray(cov.rect_lo), np.asarray(cov.rect_hi)
    bad = np.any(lo > hi, axis=1) | np.any(lo < 0, axis=1) | np.any(hi >= dims, axis=1)
    for r in np.flatnonzero(bad):
        problems.append(f"rect {r} invalid: {lo[r].tolist()}-{hi[r].tolist()}")
    lo, hi, group = lo[~bad], hi[~bad], np.asarray(cov.rect_group)[~bad]
    hits = _cover_counts(spec, lo, hi, np.ones(group.size, dtype=np.int64))
    owner = _cover_counts(spec, lo, hi, group.astype(np.int64))
    if np.any(hits > 1):
        problems.append(f"{int(np.sum(hits > 1))} cells covered more than once")
    if np.any(hits == 0):
        problems.append(f"{int(np.sum(hits == 0))} cells not covered")
    single = hits[cov.anchors] == 1
    if np.any(owner[cov.anchors][single] != np.arange(cov.n_groups)[single]):
        problems.append("anchor cell assigned to a foreign group")
    if cov.group_cells.sum() != spec.n_cells:
        problems.append("group cell counts do not sum to the grid size")
    per_group = np.bincount(group, weights=(hi - lo + 1).prod(axis=1), minlength=cov.n_groups)
    if np.any(per_group != cov.group_cells):
        problems.append("group cell counts disagree with their rects")
    bound = max_rects_per_gap(spec.d)
    if np.any(cov.gap_rect_counts > bound):
        problems.append(f"a gap used {int(cov.gap_rect_counts.max())} > {bound} rects")
    return problems
