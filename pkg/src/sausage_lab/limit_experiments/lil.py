"""Integer checkpoint sequence, LIL statistics along single long paths, and the block decomposition."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..potential_theory import (
    CHUNG_LIMIT, E_E, h_function, lil_normalizer_chung, lil_normalizer_khintchine, sausage_capacity,
)
from ..sausage_geometry import (
    SausageSkeleton, _interval_overlap, intersection_volume, merged_intervals, slice_sausage, volume,
)
from ..stable_process import ProcessParams, RandomStream, simulate_skeleton
from .clt import SigmaEstimate
from .core import ExperimentReport, Timer

ENVELOPE = 1.5


def lil_block(k: int) -> list[int]:
    """2^k + floor(j 2^(k/2) / k) for j = 0..floor(k 2^(k/2)), in exact integer arithmetic."""
    if k < 1:
        raise DomainError(f"block index must be >= 1, got {k}")
    base = 1 << k
    j_max = math.isqrt((k * k) << k)
    return [base + math.isqrt((j * j) << k) // k for j in range(j_max + 1)]


def lil_checkpoint_sequence(k_max: int) -> list[int]:
    """0 followed by the sorted, deduplicated union of blocks 1..k_max."""
    if int(k_max) != k_max or k_max < 1:
        raise DomainError(f"k_max must be a positive integer, got {k_max}")
    values = set()
    for k in range(1, int(k_max) + 1):
        values.update(lil_block(k))
    return [0] + sorted(values)


def gap_violations(seq) -> list[tuple[int, int]]:
    """Consecutive pairs breaking n_(i+1) - n_i <= 2^(k/2)/k + 1 for 2^k <= n_i < 2^(k+1).

    The comparison is done as ((gap - 1) k)^2 <= 2^k, so no rounding is involved.
    """
    bad = []
    for a, b in zip(seq, seq[1:]):
        if a < 2:
            continue
        k = a.bit_length() - 1
        gap = b - a
        if gap < 0 or (gap > 1 and ((gap - 1) * k) ** 2 > (1 << k)):
            bad.append((a, b))
    return bad


def _sigma2(sigma) -> float:
    s2 = sigma.sigma2 if isinstance(sigma, SigmaEstimate) else float(sigma)
    if not s2 > 0:
        raise DomainError(f"LIL statistics need sigma2 > 0, got {s2}")
    return s2


def lil_statistics(times, volumes, capacity: float, sigma2: float) -> dict:
    """Khintchine and Chung statistics at every time t >= e^e.

    The Chung numerator is the running maximum of |V_s - s Cap| over the
    supplied times s <= t.
    """
    times = np.asarray(times, dtype=float)
    volumes = np.asarray(volumes, dtype=float)
    if times.shape != volumes.shape:
        raise DomainError("times and volumes must have equal length")
    keep = times >= E_E * (1 - 1e-15)
    times, volumes = times[keep], volumes[keep]
    if not len(times):
        raise DomainError("no time at or beyond e^e")
    sigma = math.sqrt(sigma2)
    dev = volumes - capacity * times
    running = np.maximum.accumulate(np.abs(dev))
    khin = np.array([lil_normalizer_khintchine(t, sigma) for t in times])
    chung = np.array([lil_normalizer_chung(t, sigma) for t in times])
    k_stat = dev / khin
    return {
        "t": times,
        "volume": volumes,
        "deviation": dev,
        "running_sup": running,
        "khintchine": k_stat,
        "chung": running / chung,
        "khintchine_normalizer": khin,
        "chung_normalizer": chung,
        "envelope_fraction": float(np.mean(np.abs(k_stat) <= ENVELOPE)),
    }


class _UnionGrowth1D:
    """Exact running union of 1-d sausage blocks kept as disjoint sorted intervals."""

    def __init__(self, first: SausageSkeleton):
        self.starts, self.ends = merged_intervals(first)

    @property
    def volume(self) -> float:
        return float(np.sum(self.ends - self.starts))

    def add(self, block: SausageSkeleton) -> tuple[float, float]:
        """Merge ``block``; returns (block volume, overlap with the previous union)."""
        s, e = merged_intervals(block)
        overlap = float(_interval_overlap(s, e, self.starts, self.ends))
        starts = np.concatenate([self.starts, s])
        ends = np.concatenate([self.ends, e])
        order = np.argsort(starts, kind="stable")
        starts, ends = starts[order], np.maximum.accumulate(ends[order])
        new = np.ones(len(starts), dtype=bool)
        new[1:] = starts[1:] > ends[:-1]
        first = np.flatnonzero(new)
        last = np.append(first[1:] - 1, len(starts) - 1)
        self.starts, self.ends = starts[first], ends[last]
        return float(np.sum(e - s)), overlap


def _checkpoint_volumes(path, checkpoints, method, resolution, stream):
    """(V at each checkpoint, block volumes, block intersections J) on one path.

    Blocks are S(n_i, n_(i+1)] and J_i is their overlap with S[0, n_i].
    """
    head = slice_sausage(path, 0.0, 0.0)
    vols = [volume(head, method, resolution, stream.child(0)).value]
    blocks, joins = [], []
    if method == "exact1d":
        union = _UnionGrowth1D(head)
        for a, b in zip(checkpoints, checkpoints[1:]):
            v, j = union.add(slice_sausage(path, a, b, left_open=True))
            blocks.append(v)
            joins.append(j)
            vols.append(union.volume)
        return np.array(vols), np.array(blocks), np.array(joins)
    for i, (a, b) in enumerate(zip(checkpoints, checkpoints[1:])):
        past = slice_sausage(path, 0.0, a)
        block = slice_sausage(path, a, b, left_open=True)
        s = stream.child(3 * i + 1)
        blocks.append(volume(block, method, resolution, s.child(0)).value)
        joins.append(intersection_volume(block, past, method, resolution, s.child(1)).value)
        vols.append(volume(slice_sausage(path, 0.0, b), method, resolution, s.child(2)).value)
    return np.array(vols), np.array(blocks), np.array(joins)


def lil_paths_experiment(params: ProcessParams, sigma, k_max: int, mesh: float, method: str,
                         stream: RandomStream, resolution=None, n_paths: int = 1,
                         capacity: float | None = None) -> ExperimentReport:
    """Khintchine and Chung series along ``n_paths`` long paths; path p uses ``stream.child(p)``.

    The output is descriptive; the only rule reported is the fraction of
    checkpoints with |Khintchine statistic| <= 1.5.
    """
    if not params.lil:
        raise DomainError(f"LIL experiments need d/alpha > 9/5, got d/alpha = {params.ratio:g}")
    s2 = _sigma2(sigma)
    cap = sausage_capacity(params) if capacity is None else float(capacity)
    seq = lil_checkpoint_sequence(k_max)
    with Timer() as timer:
        report = ExperimentReport(
            "lil", columns=["path_id", "t", "volume", "khintchine", "running_sup", "chung"]
        )
        fractions, chung_min = [], []
        for p in range(n_paths):
            ps = stream.child(p)
            path = simulate_skeleton(params, float(seq[-1]), mesh, ps.child(0))
            vols, _, _ = _checkpoint_volumes(path, seq, method, resolution, ps.child(1))
            st = lil_statistics(seq, vols, cap, s2)
            for row in zip(st["t"], st["volume"], st["khintchine"], st["running_sup"], st["chung"]):
                report.rows.append(dict(zip(report.columns, (p,) + tuple(map(float, row)))))
            fractions.append(st["envelope_fraction"])
            chung_min.append(float(np.min(st["chung"])))
        report.statistics.update(
            sigma2=s2, capacity=cap, checkpoints=len(seq), envelope_fraction=float(np.mean(fractions)),
            chung_min=float(np.min(chung_min)), chung_limit=CHUNG_LIMIT,
        )
        report.flags["qualitative"] = True
    report.elapsed = timer.elapsed
    return report


def intersection_process_stats(params: ProcessParams, checkpoints, mesh: float, method: str,
                               stream: RandomStream, resolution=None, n_paths: int = 1,
                               path=None) -> ExperimentReport:
    """Block decomposition V_(n_m) = V_0 + sum V(n_i, n_(i+1)] - sum J_(n_i) on each path.

    V_0 is the volume of the initial ball S[0, 0].  A ready-made ``path``
    may be passed instead of simulating one.
    """
    seq = [float(c) for c in checkpoints]
    if len(seq) < 2 or seq[0] != 0.0 or any(b <= a for a, b in zip(seq, seq[1:])):
        raise DomainError("checkpoints must start at 0 and increase strictly")
    with Timer() as timer:
        report = ExperimentReport("intersection_process",
                                  columns=["path_id", "n", "next", "block_volume", "J", "residual"])
        residuals, j_over_h = [], []
        paths = [path] if path is not None else [None] * n_paths
        for p, given in enumerate(paths):
            ps = stream.child(p)
            sk = given if given is not None else simulate_skeleton(params, seq[-1], mesh, ps.child(0))
            vols, blocks, joins = _checkpoint_volumes(sk, seq, method, resolution, ps.child(1))
            rebuilt = vols[0] + np.concatenate([[0.0], np.cumsum(blocks - joins)])
            res = vols - rebuilt
            residuals.append(float(np.max(np.abs(res))))
            for i, (a, b) in enumerate(zip(seq, seq[1:])):
                report.rows.append({"path_id": p, "n": a, "next": b, "block_volume": float(blocks[i]),
                                    "J": float(joins[i]), "residual": float(res[i + 1])})
                if params.ratio > 1:
                    j_over_h.append(joins[i] / h_function(b - a, params.d, params.alpha))
        report.statistics.update(max_residual=max(residuals), blocks=len(seq) - 1)
        if method in ("exact1d", "grid"):
            # Both estimators are additive on a fixed lattice / exact intervals.
            scale = max(1.0, float(np.max(vols)))
            report.check("decomposition", max(residuals), 1e-9 * scale, "max |V - rebuilt| <= 1e-9 max(1, V)")
        if j_over_h:
            report.statistics["mean_J_over_h"] = float(np.mean(j_over_h))
    report.elapsed = timer.elapsed
    return report
