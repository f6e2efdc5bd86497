"""First-entry times of discretised stable paths into centred balls."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import DomainError
from ..stable_process import ProcessParams, RandomStream, sample_increment
from .core import ExperimentReport, Timer
from .stats import ks_critical_two_sample, ks_two_sample

PATH_BATCH = 256
CHUNK_STEPS = 1000


def _batch_entry_times(params, start, r2, n_steps, mesh, stream, n_paths, chunk_steps):
    tau = np.full(n_paths, np.inf)
    pos = np.broadcast_to(start, (n_paths, params.d)).copy()
    alive = np.arange(n_paths)
    done = 0
    while done < n_steps and len(alive):
        m = min(chunk_steps, n_steps - done)
        inc = sample_increment(params, mesh, stream, size=(len(alive), m))
        path = np.cumsum(inc, axis=1)
        path += pos[:, None, :]
        inside = np.einsum("ijk,ijk->ij", path, path) <= r2
        hit = inside.any(axis=1)
        first = np.argmax(inside, axis=1)
        tau[alive[hit]] = (done + first[hit] + 1) * mesh
        alive = alive[~hit]
        pos = path[~hit, -1, :]
        done += m
    return tau


def first_entry_times(params: ProcessParams, start, ball_radius: float, t_max: float, mesh: float,
                      stream: RandomStream, n_paths: int, batch: int = PATH_BATCH,
                      chunk_steps: int = CHUNK_STEPS, workers: int = 1) -> np.ndarray:
    """First grid time k*mesh <= t_max at which |X| <= ball_radius; inf when censored.

    Paths are simulated in batches of ``batch``; batch j draws from
    ``stream.child(j)``, so the output does not depend on ``workers``.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if start.shape != (params.d,):
        raise DomainError(f"start point must have dimension {params.d}")
    if not ball_radius > 0 or not mesh > 0 or not t_max >= mesh:
        raise DomainError("need ball_radius > 0 and 0 < mesh <= t_max")
    if np.linalg.norm(start) <= ball_radius:
        return np.zeros(int(n_paths))
    n_steps = int(math.floor(t_max / mesh * (1 + 1e-12)))
    sizes = [min(batch, n_paths - i) for i in range(0, int(n_paths), batch)]

    def run(j):
        return _batch_entry_times(params, start, ball_radius ** 2, n_steps, mesh,
                                  stream.child(j), sizes[j], chunk_steps)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(j) for j in range(len(sizes))]
    return np.concatenate(parts) if parts else np.empty(0)


def hitting_frequency(params: ProcessParams, start, t_max: float, mesh: float, stream: RandomStream,
                      n_paths: int, workers: int = 1) -> tuple[float, float]:
    """(P_hat(tau_B <= t_max), binomial stderr) for the ball of radius ``params.radius``."""
    tau = first_entry_times(params, start, params.radius, t_max, mesh, stream, n_paths, workers=workers)
    p = float(np.mean(np.isfinite(tau)))
    return p, math.sqrt(p * (1 - p) / len(tau))


def _collect_uncensored(params, start, radius, t_max, mesh, stream, replicas, target, workers):
    """Run batches in index order until ``target`` uncensored times are in hand.

    Batches are evaluated ``workers`` at a time but the stopping index is
    decided on the prefix sums, so the returned sample is worker-independent.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    n_steps = int(math.floor(t_max / mesh * (1 + 1e-12)))
    if target is None:
        return first_entry_times(params, start, radius, t_max, mesh, stream, replicas, workers=workers)
    parts, have, j = [], 0, 0
    step = max(1, workers)
    while have < target and j * PATH_BATCH < replicas:
        ids = [i for i in range(j, j + step) if i * PATH_BATCH < replicas]

        def run(i):
            return _batch_entry_times(params, start, radius ** 2, n_steps, mesh, stream.child(i),
                                      min(PATH_BATCH, replicas - i * PATH_BATCH), CHUNK_STEPS)

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(run, ids))
        else:
            results = [run(i) for i in ids]
        for tau in results:
            if have >= target:
                break
            parts.append(tau)
            have += int(np.count_nonzero(np.isfinite(tau)))
        j += step
    return np.concatenate(parts)


def tau_scaling_experiment(params: ProcessParams, x, t_max: float, mesh: float, replicas: int,
                           stream: RandomStream, target_uncensored: int | None = None,
                           workers: int = 1, max_censoring: float = 0.5) -> ExperimentReport:
    """Compare tau^x of B(0, 2r) with 2^alpha tau^(x/2) of B(0, r).

    The second arm runs with mesh / 2^alpha up to t_max / 2^alpha, which is
    the exact image of the first arm's grid under Brownian-type scaling.
    ``replicas`` caps the number of paths per arm; with ``target_uncensored``
    each arm stops at the first batch that reaches that many entries.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = params.radius
    if x.shape != (params.d,):
        raise DomainError(f"start point must have dimension {params.d}")
    if not np.linalg.norm(x) > 2 * r:
        raise DomainError(f"start point must lie outside B(0, {2 * r:g}), got |x| = {np.linalg.norm(x):g}")
    scale = 2.0 ** params.alpha
    with Timer() as timer:
        tau_a = _collect_uncensored(params, x, 2 * r, t_max, mesh, stream.child(0),
                                    replicas, target_uncensored, workers)
        tau_b = scale * _collect_uncensored(params, x / 2, r, t_max / scale, mesh / scale,
                                            stream.child(1), replicas, target_uncensored, workers)
        ua, ub = tau_a[np.isfinite(tau_a)], tau_b[np.isfinite(tau_b)]
        cens_a = 1 - len(ua) / len(tau_a)
        cens_b = 1 - len(ub) / len(tau_b)

        report = ExperimentReport("tau_scaling", columns=["arm", "path_id", "tau"])
        for arm, tau in (("A", tau_a), ("B", tau_b)):
            report.rows.extend({"arm": arm, "path_id": i, "tau": t} for i, t in enumerate(tau))
        report.statistics.update(
            paths_a=len(tau_a), paths_b=len(tau_b), uncensored_a=len(ua), uncensored_b=len(ub),
            censoring_a=cens_a, censoring_b=cens_b, scale=scale,
        )
        inconclusive = max(cens_a, cens_b) > max_censoring
        report.flags["inconclusive"] = inconclusive
        if len(ua) and len(ub):
            ks = ks_two_sample(ua, ub)
            crit = ks_critical_two_sample(len(ua), len(ub))
            report.statistics.update(ks=ks, ks_critical=crit)
            report.check("ks_two_sample", ks, crit, "KS(tau_A, 2^alpha tau_B) < 1.63 sqrt((n1+n2)/(n1 n2))",
                         passed=ks < crit)
        else:
            report.flags["inconclusive"] = True
        # Heavy censoring is flagged, never failed.
        report.statistics["max_censoring"] = max(cens_a, cens_b)
    report.elapsed = timer.elapsed
    return report
