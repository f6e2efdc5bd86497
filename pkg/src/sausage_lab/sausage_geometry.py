"""Lebesgue volume of unions of equal closed balls centred on skeleton points.

Three estimators share one membership test:

* ``exact1d``: the union of intervals [c - r, c + r] merged exactly.
* ``grid``: voxels of a lattice anchored at the origin, counted when their
  centre lies in the union.  Only voxels in cells next to an occupied cell
  can be inside, so the bounding box is never scanned in full.
* ``hitmiss``: uniform samples in the inflated bounding box.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionError, DomainError, EmptyWindowError, MemoryBudgetError
from .stable_process import PathSkeleton, RandomStream

METHODS = ("exact1d", "grid", "hitmiss")
DEFAULT_MAX_VOXELS = 10**8
HITMISS_SHARD = 1 << 16


@dataclass
class SausageSkeleton:
    centers: np.ndarray
    radius: float
    time_window: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        if self.centers.ndim == 1:
            self.centers = self.centers[:, None]
        if len(self.centers) == 0:
            raise EmptyWindowError("a sausage needs at least one center")
        if not self.radius > 0:
            raise DomainError(f"radius must be positive, got {self.radius}")

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.centers.min(axis=0) - self.radius, self.centers.max(axis=0) + self.radius


@dataclass
class VolumeEstimate:
    value: float
    stat_error: float
    method: str
    resolution: float | int

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown volume method {self.method!r}")
        if self.value < 0 or self.stat_error < 0:
            raise DomainError("volume estimates are non-negative")


@dataclass
class SpatialIndex:
    """Hash grid with cell edge = ball radius.

    ``cells`` maps integer cell coordinates to center indices.  The same
    partition is also kept as lexicographically sorted arrays for the
    compiled queries: ``ucells[j]`` owns ``sorted_centers[starts[j]:starts[j+1]]``.
    """

    cell_size: float
    cells: dict
    ucells: np.ndarray
    starts: np.ndarray
    sorted_centers: np.ndarray

    def __len__(self) -> int:
        return int(self.starts[-1])


def _cell_coords(points: np.ndarray, cell_size: float) -> np.ndarray:
    return np.floor(points / cell_size).astype(np.int64)


def build_spatial_index(skeleton: SausageSkeleton) -> SpatialIndex:
    centers = skeleton.centers
    coords = _cell_coords(centers, skeleton.radius)
    order = np.lexsort(coords.T[::-1])
    sc = coords[order]
    new = np.ones(len(sc), dtype=bool)
    new[1:] = np.any(sc[1:] != sc[:-1], axis=1)
    first = np.flatnonzero(new)
    starts = np.append(first, len(sc)).astype(np.int64)
    ucells = np.ascontiguousarray(sc[first])
    cells = {
        tuple(int(v) for v in ucells[j]): order[starts[j]:starts[j + 1]]
        for j in range(len(ucells))
    }
    return SpatialIndex(
        cell_size=float(skeleton.radius),
        cells=cells,
        ucells=ucells,
        starts=starts,
        sorted_centers=np.ascontiguousarray(centers[order]),
    )


def _neighbor_offsets(d: int) -> np.ndarray:
    return np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)


def contains(index: SpatialIndex, skeleton: SausageSkeleton, p) -> bool:
    """Closed-ball membership of ``p`` in the sausage, looking only at the 3^d neighbor cells."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.shape != (skeleton.d,):
        raise DimensionError(f"point has dimension {p.shape}, sausage has {skeleton.d}")
    r2 = skeleton.radius * skeleton.radius
    home = np.floor(p / index.cell_size).astype(np.int64)
    for offset in itertools.product((-1, 0, 1), repeat=skeleton.d):
        members = index.cells.get(tuple(int(h + o) for h, o in zip(home, offset)))
        if members is None:
            continue
        diff = skeleton.centers[members] - p
        if np.any(np.sum(diff * diff, axis=1) <= r2):
            return True
    return False


@njit(cache=True, nogil=True)
def _find_cell(ucells, target):
    lo = 0
    hi = ucells.shape[0]
    d = ucells.shape[1]
    while lo < hi:
        mid = (lo + hi) // 2
        cmp = 0
        for k in range(d):
            if ucells[mid, k] < target[k]:
                cmp = -1
                break
            if ucells[mid, k] > target[k]:
                cmp = 1
                break
        if cmp == 0:
            return mid
        if cmp < 0:
            lo = mid + 1
        else:
            hi = mid
    return -1


@njit(cache=True, nogil=True)
def _point_in(point, home, ucells, starts, centers, r2, offsets, nb):
    d = point.shape[0]
    for o in range(offsets.shape[0]):
        for k in range(d):
            nb[k] = home[k] + offsets[o, k]
        j = _find_cell(ucells, nb)
        if j < 0:
            continue
        for m in range(starts[j], starts[j + 1]):
            s = 0.0
            for k in range(d):
                diff = point[k] - centers[m, k]
                s += diff * diff
            if s <= r2:
                return True
    return False


@njit(cache=True, nogil=True)
def _contains_points(points, cell_size, ucells, starts, centers, r2, offsets):
    n, d = points.shape
    out = np.zeros(n, dtype=np.bool_)
    home = np.empty(d, dtype=np.int64)
    nb = np.empty(d, dtype=np.int64)
    for i in range(n):
        for k in range(d):
            home[k] = np.int64(np.floor(points[i, k] / cell_size))
        out[i] = _point_in(points[i], home, ucells, starts, centers, r2, offsets, nb)
    return out


@njit(cache=True, nogil=True)
def _count_voxels(cand, h, cell_size, ua, sa, ca, ub, sb, cb, both, r2, offsets):
    """Count lattice voxels (k + 1/2) h whose centre lies in A (and in B if ``both``).

    Each voxel centre is assigned to exactly one cell, the cell of its own
    floor(v / cell_size); only candidate cells are visited.
    """
    q, d = cand.shape
    lo = np.empty(d, dtype=np.int64)
    hi = np.empty(d, dtype=np.int64)
    k = np.empty(d, dtype=np.int64)
    v = np.empty(d)
    nb = np.empty(d, dtype=np.int64)
    total = 0
    for c in range(q):
        for a in range(d):
            lo[a] = np.int64(np.floor(cand[c, a] * cell_size / h - 0.5)) - 1
            hi[a] = np.int64(np.ceil((cand[c, a] + 1) * cell_size / h - 0.5)) + 1
            k[a] = lo[a]
        while True:
            inside = True
            for a in range(d):
                v[a] = (k[a] + 0.5) * h
                if np.int64(np.floor(v[a] / cell_size)) != cand[c, a]:
                    inside = False
                    break
            if inside:
                if _point_in(v, cand[c], ua, sa, ca, r2, offsets, nb):
                    if not both or _point_in(v, cand[c], ub, sb, cb, r2, offsets, nb):
                        total += 1
            # odometer increment
            a = 0
            while a < d:
                k[a] += 1
                if k[a] <= hi[a]:
                    break
                k[a] = lo[a]
                a += 1
            if a == d:
                break
    return total


def contains_many(index: SpatialIndex, skeleton: SausageSkeleton, points) -> np.ndarray:
    """Vectorised :func:`contains` for an ``(n, d)`` array of points."""
    points = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, skeleton.d))
    return _contains_points(
        points, index.cell_size, index.ucells, index.starts, index.sorted_centers,
        skeleton.radius ** 2, _neighbor_offsets(skeleton.d),
    )


def merged_intervals(skeleton: SausageSkeleton) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint sorted intervals whose union is the 1-d sausage."""
    if skeleton.d != 1:
        raise DimensionError(f"interval merge needs d = 1, got d = {skeleton.d}")
    r = skeleton.radius
    c = np.sort(skeleton.centers[:, 0])
    breaks = np.flatnonzero(np.diff(c) > 2 * r)
    starts = c[np.concatenate(([0], breaks + 1))] - r
    ends = c[np.concatenate((breaks, [len(c) - 1]))] + r
    return starts, ends


def volume_exact_1d(skeleton: SausageSkeleton) -> VolumeEstimate:
    starts, ends = merged_intervals(skeleton)
    return VolumeEstimate(float(np.sum(ends - starts)), 0.0, "exact1d", len(starts))


def _dilated_cells(index: SpatialIndex) -> np.ndarray:
    d = index.ucells.shape[1]
    allc = (index.ucells[:, None, :] + _neighbor_offsets(d)[None, :, :]).reshape(-1, d)
    return np.unique(allc, axis=0)


def _check_voxel_args(radius: float, voxel_edge: float):
    if not 0 < voxel_edge <= radius / 2:
        raise DomainError(f"voxel edge must lie in (0, radius/2], got {voxel_edge}")


def _check_budget(n_cells: int, d: int, radius: float, voxel_edge: float, max_voxels: int):
    per_cell = (math.ceil(radius / voxel_edge) + 1) ** d
    if n_cells * per_cell > max_voxels:
        raise MemoryBudgetError(
            f"~{n_cells * per_cell:.3g} voxels exceed the budget {max_voxels:.3g}; "
            "coarsen voxel_edge or use hitmiss"
        )


def volume_grid(skeleton: SausageSkeleton, voxel_edge: float,
                max_voxels: int = DEFAULT_MAX_VOXELS) -> VolumeEstimate:
    _check_voxel_args(skeleton.radius, voxel_edge)
    index = build_spatial_index(skeleton)
    cand = _dilated_cells(index)
    _check_budget(len(cand), skeleton.d, skeleton.radius, voxel_edge, max_voxels)
    count = _count_voxels(
        cand, float(voxel_edge), index.cell_size,
        index.ucells, index.starts, index.sorted_centers,
        index.ucells, index.starts, index.sorted_centers,
        False, skeleton.radius ** 2, _neighbor_offsets(skeleton.d),
    )
    return VolumeEstimate(count * voxel_edge ** skeleton.d, 0.0, "grid", float(voxel_edge))


def _shard_sizes(n_samples: int) -> list[int]:
    full, rest = divmod(n_samples, HITMISS_SHARD)
    return [HITMISS_SHARD] * full + ([rest] if rest else [])


def _hit_or_miss(lo, hi, n_samples, stream, tests, workers):
    """Fraction-of-box estimate; ``tests`` are membership predicates combined with AND."""
    if n_samples < 100:
        raise DomainError(f"hit-or-miss needs at least 100 samples, got {n_samples}")
    width = hi - lo
    box_volume = float(np.prod(width))

    def run_shard(i, size):
        u = stream.child(i).generator.random((size, len(lo)))
        pts = lo + u * width
        ok = np.ones(size, dtype=bool)
        for test in tests:
            ok &= test(pts)
        return int(np.count_nonzero(ok))

    sizes = _shard_sizes(n_samples)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(run_shard, range(len(sizes)), sizes))
    else:
        hits = sum(run_shard(i, s) for i, s in enumerate(sizes))
    p = hits / n_samples
    return box_volume * p, box_volume * math.sqrt(p * (1 - p) / n_samples)


def volume_hit_or_miss(skeleton: SausageSkeleton, n_samples: int, stream: RandomStream,
                       workers: int = 1) -> VolumeEstimate:
    """Box-uniform Monte Carlo; shards of fixed size make the result independent of ``workers``."""
    index = build_spatial_index(skeleton)
    lo, hi = skeleton.bounding_box()
    value, err = _hit_or_miss(
        lo, hi, int(n_samples), stream,
        [lambda pts: contains_many(index, skeleton, pts)], workers,
    )
    return VolumeEstimate(value, err, "hitmiss", int(n_samples))


def volume(skeleton: SausageSkeleton, method: str = "exact1d", resolution=None,
           stream: RandomStream | None = None, workers: int = 1) -> VolumeEstimate:
    """Dispatch to the estimator named by ``method``."""
    if method == "exact1d":
        return volume_exact_1d(skeleton)
    if method == "grid":
        return volume_grid(skeleton, resolution)
    if method == "hitmiss":
        if stream is None:
            raise DomainError("hitmiss volume needs a random stream")
        return volume_hit_or_miss(skeleton, int(resolution), stream, workers)
    raise DomainError(f"unknown volume method {method!r}")


@njit(cache=True, nogil=True)
def _interval_overlap(s1, e1, s2, e2):
    i = 0
    j = 0
    total = 0.0
    while i < s1.shape[0] and j < s2.shape[0]:
        lo = max(s1[i], s2[j])
        hi = min(e1[i], e2[j])
        if hi > lo:
            total += hi - lo
        if e1[i] < e2[j]:
            i += 1
        else:
            j += 1
    return total


def intersection_volume(a: SausageSkeleton, b: SausageSkeleton, method: str = "exact1d",
                        resolution=None, stream: RandomStream | None = None,
                        workers: int = 1) -> VolumeEstimate:
    """Volume of the intersection of two sausages with the same dimension and radius."""
    if a.d != b.d:
        raise DimensionError(f"sausages live in R^{a.d} and R^{b.d}")
    if a.radius != b.radius:
        raise DomainError("intersection requires equal radii")
    lo_a, hi_a = a.bounding_box()
    lo_b, hi_b = b.bounding_box()
    lo, hi = np.maximum(lo_a, lo_b), np.minimum(hi_a, hi_b)
    if method not in METHODS:
        raise DomainError(f"unknown volume method {method!r}")
    if np.any(lo > hi):
        res = 0 if method == "exact1d" else resolution
        return VolumeEstimate(0.0, 0.0, method, res)
    if method == "exact1d":
        s1, e1 = merged_intervals(a)
        s2, e2 = merged_intervals(b)
        return VolumeEstimate(float(_interval_overlap(s1, e1, s2, e2)), 0.0, "exact1d", len(s1) + len(s2))
    ia, ib = build_spatial_index(a), build_spatial_index(b)
    if method == "grid":
        _check_voxel_args(a.radius, resolution)
        ca, cb = _dilated_cells(ia), _dilated_cells(ib)
        cand = _common_rows(ca, cb)
        _check_budget(len(cand), a.d, a.radius, resolution, DEFAULT_MAX_VOXELS)
        count = 0
        if len(cand):
            count = _count_voxels(
                cand, float(resolution), ia.cell_size,
                ia.ucells, ia.starts, ia.sorted_centers,
                ib.ucells, ib.starts, ib.sorted_centers,
                True, a.radius ** 2, _neighbor_offsets(a.d),
            )
        return VolumeEstimate(count * resolution ** a.d, 0.0, "grid", float(resolution))
    if stream is None:
        raise DomainError("hitmiss intersection needs a random stream")
    value, err = _hit_or_miss(
        lo, hi, int(resolution), stream,
        [lambda pts: contains_many(ia, a, pts), lambda pts: contains_many(ib, b, pts)],
        workers,
    )
    return VolumeEstimate(value, err, "hitmiss", int(resolution))


def _common_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    both = np.concatenate([x, y])
    rows, counts = np.unique(both, axis=0, return_counts=True)
    return np.ascontiguousarray(rows[counts == 2])


def slice_sausage(skeleton: PathSkeleton, s: float, t: float, radius: float | None = None,
                  left_open: bool = False) -> SausageSkeleton:
    """Sausage of the skeleton points with times in [s, t] (or (s, t] if ``left_open``)."""
    if radius is None:
        radius = skeleton.params.radius
    t_end = skeleton.t_end
    tol = 1e-9 * max(1.0, abs(t_end))
    if not (-tol <= s <= t <= t_end + tol):
        raise DomainError(f"slice window [{s}, {t}] outside [0, {t_end}]")
    times = skeleton.times
    lower = times > s + tol if left_open else times >= s - tol
    mask = lower & (times <= t + tol)
    if not np.any(mask):
        raise EmptyWindowError(f"no grid point in window ({s}, {t}]" if left_open else
                               f"no grid point in window [{s}, {t}]")
    return SausageSkeleton(skeleton.positions[mask], radius, (float(s), float(t)))
