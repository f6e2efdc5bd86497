"""Law of large numbers, variance, CLT, FCLT and moment experiments on replica volumes."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, InsufficientDataError
from ..potential_theory import PotentialContext, capacity_unit_ball, h_function, sausage_capacity
from ..sausage_geometry import intersection_volume, slice_sausage
from ..stable_process import ProcessParams, RandomStream, simulate_skeleton
from .core import ExperimentConfig, ExperimentReport, Timer, volume_matrix
from .stats import ks_critical, ks_statistic, normal_cdf, shape_moments


def lln_capacity_check(records, ctx: PotentialContext, rel_tol: float = 0.10) -> ExperimentReport:
    """Compare mean(V_t)/t with the capacity at every checkpoint."""
    with Timer() as timer:
        times, vols = volume_matrix(records)
        n = len(vols)
        cap = sausage_capacity(ctx.params)
        ratio = vols.mean(axis=0) / times
        se = (vols.std(axis=0, ddof=1) / math.sqrt(n) / times) if n > 1 else np.zeros(len(times))
        gap = np.abs(ratio - cap)

        report = ExperimentReport("lln", columns=["t", "mean_ratio", "stderr", "capacity", "gap"])
        for t, r, s, g in zip(times, ratio, se, gap):
            report.rows.append({"t": t, "mean_ratio": r, "stderr": s, "capacity": cap, "gap": g})
        report.series.update(t=times.tolist(), mean_ratio=ratio.tolist(), stderr=se.tolist(), gap=gap.tolist())
        report.statistics.update(
            capacity=cap,
            riesz_capacity=capacity_unit_ball(ctx.params.d, ctx.params.alpha) * ctx.params.radius ** (ctx.params.d - ctx.params.alpha),
            final_mean_ratio=float(ratio[-1]),
            final_relative_gap=float(gap[-1] / cap),
            replicas=n,
        )
        report.stderrs["final_mean_ratio"] = float(se[-1])

        # Noise allowance: two standard errors of the difference of successive gaps.
        excess = [
            gap[j + 1] - gap[j] - 2 * math.hypot(se[j], se[j + 1]) for j in range(len(times) - 1)
        ]
        worst = max(excess) if excess else 0.0
        report.check("gap_decreasing", worst, 0.0, "gap[t+] - gap[t] - 2*se_diff <= 0")
        report.check("lln_relative_gap", gap[-1] / cap, rel_tol, "|mean V_t/t - Cap|/Cap at t_max")
        report.flags["below_capacity_bound"] = [bool(r <= cap + 2 * s) for r, s in zip(ratio, se)]
    report.elapsed = timer.elapsed
    return report


def gap_bound_check(records, ctx: PotentialContext, slope_tol: float = 0.25) -> ExperimentReport:
    """Boundedness of E[lambda(S_t cap S[t, t+T_tail])] / h(t) across checkpoints."""
    good = [r for r in records if not r.failed]
    if not good or good[0].tail_intersections is None:
        raise DomainError("records carry no tail intersections; run with tail_factor set")
    d, alpha = ctx.params.d, ctx.params.alpha
    with Timer() as timer:
        times = np.asarray(good[0].times)
        inter = np.vstack([r.tail_intersections for r in good])
        n = len(inter)
        mean = inter.mean(axis=0)
        se = inter.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(times))
        h = np.array([h_function(t, d, alpha) for t in times])
        c_hat, c_se = mean / h, se / h

        report = ExperimentReport("gap_bound", columns=["t", "mean_intersection", "stderr", "h", "c_hat"])
        for row in zip(times, mean, se, h, c_hat):
            report.rows.append(dict(zip(report.columns, map(float, row))))
        report.series.update(t=times.tolist(), mean_intersection=mean.tolist(), c_hat=c_hat.tolist())
        excess = [
            c_hat[j + 1] - c_hat[j] - 3 * math.hypot(c_se[j], c_se[j + 1]) for j in range(len(times) - 1)
        ]
        report.check("c_hat_bounded", max(excess) if excess else 0.0, 0.0,
                     "c_hat[t+] - c_hat[t] - 3*se_diff <= 0")
        if len(times) >= 2 and np.all(mean > 0):
            slope = float(np.polyfit(np.log(times), np.log(mean), 1)[0])
            report.statistics["loglog_slope"] = slope
            ratio = d / alpha
            if 1 < ratio < 2 and abs(ratio - 2) > 1e-12:
                target = 2 - ratio
                report.statistics["target_slope"] = target
                report.check("loglog_slope", abs(slope - target), slope_tol, "|slope - (2 - d/alpha)|")
        report.statistics["replicas"] = n
    report.elapsed = timer.elapsed
    return report


@dataclass
class SigmaEstimate:
    sigma2: float
    times: np.ndarray
    variances: np.ndarray
    ratios: np.ndarray
    half_width: float
    residuals: np.ndarray
    envelope_constant: float | None = None

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def estimate_sigma(records, params: ProcessParams | None = None,
                   min_checkpoints: int = 3, min_replicas: int = 100) -> SigmaEstimate:
    """Least-squares slope through the origin of Var(V_t) against t.

    ``half_width`` is a 95% delta-method half-width that accounts for the
    correlation of sample variances taken on the same paths.
    """
    times, vols = volume_matrix(records)
    n, m = vols.shape
    if m < min_checkpoints or n < min_replicas:
        raise InsufficientDataError(
            f"need >= {min_checkpoints} checkpoints and >= {min_replicas} replicas, got {m} and {n}"
        )
    c = vols - vols.mean(axis=0)
    var = np.sum(c * c, axis=0) / (n - 1)
    w = times / np.sum(times * times)
    sigma2 = max(float(np.dot(w, var)), 0.0)
    sq = c * c
    cov_of_var = (sq.T @ sq / n - np.outer(var, var)) / n
    half_width = 1.96 * math.sqrt(max(float(w @ cov_of_var @ w), 0.0))
    residuals = var - sigma2 * times
    envelope = None
    if params is not None:
        env = np.array([math.sqrt(t) * h_function(t, params.d, params.alpha) for t in times])
        envelope = float(np.max(np.abs(residuals) / env))
    return SigmaEstimate(sigma2, times, var, var / times, half_width, residuals, envelope)


def normality_summary(values, center: float, scale: float) -> dict:
    """Standardise ``values`` and measure their distance to N(0, 1).

    A zero spread marks the summary degenerate and skips the KS distance.
    """
    values = np.asarray(values, dtype=float)
    out = {"n": len(values), "degenerate": bool(np.ptp(values) == 0 or scale <= 0)}
    if out["degenerate"]:
        out.update(standardized=np.zeros_like(values), ks=math.nan, skewness=math.nan, kurtosis=math.nan)
        return out
    z = (values - center) / scale
    skew, kurt = shape_moments(z)
    out.update(standardized=z, ks=ks_statistic(z, normal_cdf), skewness=skew, kurtosis=kurt)
    return out


def _column(times, t):
    idx = np.flatnonzero(np.isclose(times, t, rtol=1e-9, atol=1e-12))
    if not len(idx):
        raise DomainError(f"no checkpoint at t={t}; available: {times.tolist()}")
    return int(idx[0])


def clt_experiment(records, sigma: SigmaEstimate, ctx: PotentialContext, t: float | None = None,
                   skew_tol: float = 0.3, kurt_tol: float = 0.6) -> ExperimentReport:
    """KS distance of (V_t - mean V_t)/(sigma_hat sqrt t) to the standard normal."""
    params = ctx.params
    if not params.clt:
        raise DomainError(f"CLT needs d/alpha > 3/2, got d/alpha = {params.ratio:g}")
    if not sigma.sigma2 > 0:
        raise DomainError("CLT standardisation needs sigma2 > 0")
    with Timer() as timer:
        times, vols = volume_matrix(records)
        good = [r for r in records if not r.failed]
        j = len(times) - 1 if t is None else _column(times, t)
        t = float(times[j])
        v = vols[:, j]
        scale = sigma.sigma * math.sqrt(t)
        mean = float(v.mean())
        emp = normality_summary(v, mean, scale)
        cap = sausage_capacity(params)
        capc = normality_summary(v, t * cap, scale)

        report = ExperimentReport("clt", columns=["replica_id", "t", "volume", "centered", "standardized"])
        for rec, vol, z in zip(good, v, emp["standardized"]):
            report.rows.append({"replica_id": rec.replica_id, "t": t, "volume": vol,
                                "centered": vol - mean, "standardized": z})
        report.statistics.update(
            t=t, replicas=len(v), sigma2=sigma.sigma2, sigma2_half_width=sigma.half_width,
            ks=emp["ks"], skewness=emp["skewness"], kurtosis=emp["kurtosis"],
            ks_capacity_centered=capc["ks"],
            mean_capacity_centered=float(np.mean(capc["standardized"])),
        )
        report.flags["degenerate"] = emp["degenerate"]
        if not emp["degenerate"]:
            crit = ks_critical(len(v))
            report.check("ks_normal", emp["ks"], crit, "KS(standardized, N(0,1)) < 1.63/sqrt(n)",
                         passed=emp["ks"] < crit)
            report.check("skewness", abs(emp["skewness"]), skew_tol, "|skewness|")
            report.check("kurtosis", abs(emp["kurtosis"] - 3), kurt_tol, "|kurtosis - 3|")
    report.elapsed = timer.elapsed
    return report


def fclt_covariance_experiment(records, sigma: SigmaEstimate, times=(0.5, 1.0), n: float | None = None,
                               tol: float = 0.12) -> ExperimentReport:
    """Covariance of Y_s = (V_{ns} - mean)/(sigma_hat sqrt n) against min(s, t)."""
    if not sigma.sigma2 > 0:
        raise DomainError("singular sigma: sigma2 must be positive")
    with Timer() as timer:
        all_times, vols = volume_matrix(records)
        n = float(all_times[-1]) if n is None else float(n)
        s = np.asarray(times, dtype=float)
        cols = [_column(all_times, n * si) for si in s]
        y = (vols[:, cols] - vols[:, cols].mean(axis=0)) / (sigma.sigma * math.sqrt(n))
        cov = np.atleast_2d(np.cov(y, rowvar=False, ddof=1))
        target = np.minimum.outer(s, s)
        dev = float(np.max(np.abs(cov - target)))

        report = ExperimentReport("fclt", columns=["s", "u", "covariance", "target"])
        for a in range(len(s)):
            for b in range(len(s)):
                report.rows.append({"s": s[a], "u": s[b], "covariance": cov[a, b], "target": target[a, b]})
        report.series.update(covariance=cov.tolist(), target=target.tolist())
        report.statistics.update(n=n, max_deviation=dev, replicas=len(vols))
        report.check("covariance", dev, tol, "max |Cov(Y_s, Y_u) - min(s, u)|")
    report.elapsed = timer.elapsed
    return report


def _pair_intersection(config: ExperimentConfig, i: int, t: float, tail: float) -> float:
    first = RandomStream(config.master_seed, 2 * i)
    second = RandomStream(config.master_seed, 2 * i + 1)
    x = simulate_skeleton(config.params, t, config.mesh, first)
    x2 = simulate_skeleton(config.params, tail, config.mesh, second)
    est = intersection_volume(
        slice_sausage(x, 0.0, t), slice_sausage(x2, 0.0, tail),
        config.method, config.resolution, first.child(0),
    )
    return est.value


def intersection_moment_experiment(config: ExperimentConfig, k: int, workers: int = 1) -> ExperimentReport:
    """E[I^k] <= 2^(k-1) (k!)^2 E[I]^k for I = lambda(S_t cap S'_T) with independent paths.

    t is the last checkpoint, T = tail_factor * t (default 4 t) stands in for
    infinity, and ``config.replicas`` is the number of independent pairs.
    """
    if k not in (1, 2, 3):
        raise DomainError(f"moment order must be 1, 2 or 3, got {k}")
    t = config.t_checkpoints[-1]
    tail = (config.tail_factor or 4.0) * t
    with Timer() as timer:
        ids = range(config.replicas)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                inter = np.array(list(pool.map(lambda i: _pair_intersection(config, i, t, tail), ids)))
        else:
            inter = np.array([_pair_intersection(config, i, t, tail) for i in ids])
        n = len(inter)
        factor = 2 ** (k - 1) * math.factorial(k) ** 2
        m1 = float(inter.mean())
        mk = float(np.mean(inter ** k))
        ratio = mk / (factor * m1 ** k) if m1 > 0 else math.nan
        # Delta method for ratio = m_k / (factor m_1^k).
        grad = np.array([1.0 / (factor * m1 ** k), -k * mk / (factor * m1 ** (k + 1))]) if m1 > 0 else np.zeros(2)
        cov = np.cov(np.vstack([inter ** k, inter]), ddof=1) / n if n > 1 else np.zeros((2, 2))
        se = math.sqrt(max(float(grad @ cov @ grad), 0.0))

        report = ExperimentReport("moments", columns=["pair_id", "intersection"])
        report.rows = [{"pair_id": i, "intersection": float(v)} for i, v in enumerate(inter)]
        report.statistics.update(k=k, t=t, tail=tail, pairs=n, factor=factor, moment_k=mk,
                                 moment_1=m1, ratio=ratio,
                                 moment_1_over_h=m1 / h_function(t, config.params.d, config.params.alpha))
        report.stderrs["ratio"] = se
        report.check("moment_bound", ratio, 1 + 3 * se, "m_k/(2^(k-1)(k!)^2 m_1^k) <= 1 + 3*se")
    report.elapsed = timer.elapsed
    return report


def fourth_moment_experiment(records, factor: float = 2.0, min_replicas: int = 200,
                             min_checkpoints: int = 3) -> ExperimentReport:
    """m4(t)/t^2 with m4 the fourth central moment of V_t; bounded-ratio proxy."""
    times, vols = volume_matrix(records)
    n, m = vols.shape
    if n < min_replicas or m < min_checkpoints:
        raise InsufficientDataError(
            f"need >= {min_replicas} replicas and >= {min_checkpoints} checkpoints, got {n} and {m}"
        )
    with Timer() as timer:
        c = vols - vols.mean(axis=0)
        m4 = np.mean(c ** 4, axis=0)
        ratio = m4 / times ** 2
        med = ratio[m // 2]

        report = ExperimentReport("fourth_moment", columns=["t", "m4", "ratio"])
        for row in zip(times, m4, ratio):
            report.rows.append(dict(zip(report.columns, map(float, row))))
        report.series.update(t=times.tolist(), ratio=ratio.tolist())
        spread = float(ratio.max() / ratio.min()) if ratio.min() > 0 else (1.0 if ratio.max() == 0 else math.inf)
        report.statistics.update(ratio_last=float(ratio[-1]), ratio_median=float(med), spread=spread)
        report.check("last_vs_median", float(ratio[-1]), factor * float(med), "ratio(t_max) <= 2 ratio(t_median)")
    report.elapsed = timer.elapsed
    return report
