"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``; the summary block at the
end of the session lists every criterion.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from sausage_lab import cli
from sausage_lab.limit_experiments import (
    ExperimentConfig, clt_experiment, estimate_sigma, fclt_covariance_experiment, fourth_moment_experiment,
    gap_violations, hitting_frequency, intersection_moment_experiment, lil_checkpoint_sequence,
    lln_capacity_check, run_volume_replicas, tau_scaling_experiment, volume_matrix,
)
from sausage_lab.potential_theory import (
    E_E, PotentialContext, capacity_unit_ball, hitting_constant, lil_normalizer_chung,
    lil_normalizer_khintchine, phi, riesz_constant,
)
from sausage_lab.sausage_geometry import (
    SausageSkeleton, intersection_volume, slice_sausage, volume_exact_1d, volume_grid, volume_hit_or_miss,
)
from sausage_lab.stable_process import ProcessParams, RandomStream, empirical_char_function, sample_increment, \
    simulate_skeleton

SEED = 20240611
# 40-digit value of Gamma(1.5) / (Gamma(0.75) Gamma(1.75)).
CAP_3_15 = 0.7868937326773974840302252937056590581558


@pytest.fixture(scope="module")
def workhorse_run():
    """d=1, alpha=0.6, mesh 0.01, 500 replicas, t in {50, 100, 200}, exact volumes."""
    params = ProcessParams(1, 0.6)
    cfg = ExperimentConfig(params, (50, 100, 200), 0.01, 500, master_seed=SEED)
    return params, run_volume_replicas(cfg)


def test_01_closed_forms(acceptance_record):
    a = capacity_unit_ball(3, 2.0)
    b = capacity_unit_ball(4, 2.0)
    c = capacity_unit_ball(3, 1.5)
    ok = abs(a - 1) <= 1e-12 and abs(b - 1) <= 1e-12 and float(f"{c:.5g}") == float(f"{CAP_3_15:.5g}")
    acceptance_record("1 closed forms", ok, f"Cap(3,2)={a!r}, Cap(4,2)={b!r}, Cap(3,1.5)={c:.10f}")
    assert ok


def test_02_sampler_law(acceptance_record):
    n = 10**6
    worst, lines = 0.0, 0
    ok = True
    rng = np.random.default_rng(SEED)
    for sid, (d, alpha) in enumerate([(1, 0.6), (2, 1.0), (3, 1.5), (3, 2.0)]):
        params = ProcessParams(d, alpha)
        for t in (0.5, 1.0):
            x = sample_increment(params, t, RandomStream(SEED, 100 * sid + int(2 * t)), size=n)
            for norm in (0.5, 1.0, 2.0):
                direction = rng.normal(size=d)
                xi = norm * direction / np.linalg.norm(direction)
                val, _ = empirical_char_function(x, xi)
                gap = abs(val - math.exp(-t * norm**alpha))
                worst = max(worst, gap * math.sqrt(n))
                ok &= gap <= 3 / math.sqrt(n)
                lines += 1
    acceptance_record("2 sampler law", ok, f"{lines} comparisons, max |gap| sqrt(N) = {worst:.3f} (limit 3)")
    assert ok


def test_03_estimator_consensus(acceptance_record):
    params = ProcessParams(1, 0.6)
    h, n_mc = 0.05, 200_000
    grid_ok = mc_ok = True
    worst_grid = worst_mc = 0.0
    for i in range(50):
        stream = RandomStream(SEED, 1000 + i)
        path = simulate_skeleton(params, 20.0, 0.05, stream)
        s = slice_sausage(path, 0.0, 20.0)
        exact = volume_exact_1d(s)
        grid = volume_grid(s, h)
        mc = volume_hit_or_miss(s, n_mc, stream.child(1))
        worst_grid = max(worst_grid, abs(grid.value - exact.value) / (2 * h * exact.resolution))
        worst_mc = max(worst_mc, abs(mc.value - exact.value) / mc.stat_error)
        grid_ok &= abs(grid.value - exact.value) <= 2 * h * exact.resolution
        mc_ok &= abs(mc.value - exact.value) <= 3 * mc.stat_error
    balls = []
    for d, target in ((2, math.pi), (3, 4 * math.pi / 3)):
        ball = SausageSkeleton(np.zeros((1, d)), 1.0)
        g = volume_grid(ball, 0.02).value
        m = volume_hit_or_miss(ball, 10**6, RandomStream(SEED, d)).value
        balls += [abs(g / target - 1), abs(m / target - 1)]
    ball_ok = max(balls) <= 0.01
    ok = grid_ok and mc_ok and ball_ok
    acceptance_record("3 estimator consensus", ok,
                      f"grid worst {worst_grid:.3f} of tolerance, MC worst {worst_mc:.2f} stderr, "
                      f"single-ball worst rel. error {max(balls):.4f}")
    assert ok


def test_04_per_path_identities(acceptance_record):
    params = ProcessParams(1, 0.6)
    worst_res, sub_ok = 0.0, True
    for i in range(1000):
        path = simulate_skeleton(params, 10.0, 0.01, RandomStream(SEED, 5000 + i))
        a = slice_sausage(path, 0.0, 4.0)
        b = slice_sausage(path, 4.0, 10.0)
        whole = volume_exact_1d(slice_sausage(path, 0.0, 10.0)).value
        va, vb = volume_exact_1d(a).value, volume_exact_1d(b).value
        inter = intersection_volume(a, b).value
        worst_res = max(worst_res, abs(whole - (va + vb - inter)) / whole)
        sub_ok &= whole <= va + vb + 1e-12 * whole
    ok = worst_res <= 1e-12 and sub_ok
    acceptance_record("4 per-path identities", ok,
                      f"max relative inclusion-exclusion residual {worst_res:.2e}, subadditivity on 1000 paths: {sub_ok}")
    assert ok


def test_05_lln(workhorse_run, acceptance_record):
    params, recs = workhorse_run
    rep = lln_capacity_check(recs, PotentialContext(params))
    gap = rep.get_check("lln_relative_gap")
    dec = rep.get_check("gap_decreasing")
    ok = gap.passed and dec.passed
    acceptance_record("5 LLN", ok,
                      f"mean V_t/t = {[round(x, 4) for x in rep.series['mean_ratio']]}, Cap = "
                      f"{rep.statistics['capacity']:.4f}, rel. gap at t=200 {gap.value:.4f} (<= 0.10), "
                      f"gap decreasing: {dec.passed}")
    assert ok


def test_06_variance_linearity(workhorse_run, acceptance_record):
    _, recs = workhorse_run
    times, vols = volume_matrix(recs)
    ratio = vols.var(axis=0, ddof=1) / times
    rel = abs(ratio[2] / ratio[1] - 1)
    ok = rel <= 0.20
    acceptance_record("6 variance linearity", ok,
                      f"Var/t at t=100: {ratio[1]:.4f}, at t=200: {ratio[2]:.4f}, relative change {rel:.4f} (<= 0.20)")
    assert ok


def test_07_clt(workhorse_run, acceptance_record):
    params, recs = workhorse_run
    sigma = estimate_sigma(recs, params)
    rep = clt_experiment(recs, sigma, PotentialContext(params))
    ok = rep.passed and len(rep.checks) == 3
    st = rep.statistics
    acceptance_record("7 CLT", ok,
                      f"sigma2 = {sigma.sigma2:.4f} +- {sigma.half_width:.4f}, KS = {st['ks']:.4f} (< 0.0729), "
                      f"skewness {st['skewness']:.3f}, kurtosis {st['kurtosis']:.3f}")
    assert ok


def test_08_fclt_covariances(acceptance_record):
    params = ProcessParams(1, 0.6)
    cfg = ExperimentConfig(params, (50, 100, 150, 200), 0.01, 1000, master_seed=SEED + 8)
    recs = run_volume_replicas(cfg)
    sigma = estimate_sigma(recs, params)
    rep = fclt_covariance_experiment(recs, sigma, (0.5, 1.0), n=200.0, tol=0.12)
    cov = np.round(rep.series["covariance"], 4).tolist()
    acceptance_record("8 FCLT covariances", rep.passed,
                      f"covariance {cov}, max deviation {rep.statistics['max_deviation']:.4f} (<= 0.12)")
    assert rep.passed


def test_09_moment_bounds(workhorse_run, acceptance_record):
    params, recs = workhorse_run
    cfg = ExperimentConfig(ProcessParams(3, 1.5), (50.0,), 0.02, 400, "grid", 0.1, SEED + 9, tail_factor=4.0)
    mom = intersection_moment_experiment(cfg, 2)
    ratio, se = mom.statistics["ratio"], mom.stderrs["ratio"]
    fourth = fourth_moment_experiment(recs)
    spread = fourth.statistics["spread"]
    ok = mom.passed and fourth.passed and spread <= 2.0
    acceptance_record("9 moment bounds", ok,
                      f"k=2 ratio m2/(8 m1^2) = {ratio:.4f} +- {se:.4f} (<= 1 + 3 se; against 16 it is "
                      f"{ratio / 2:.4f}); m4/t^2 = {np.round(fourth.series['ratio'], 2).tolist()}, "
                      f"max/min {spread:.3f} (<= 2)")
    assert ok


def test_10_hitting_time_scaling(acceptance_record):
    params = ProcessParams(3, 1.5)
    rep = tau_scaling_experiment(params, [4.0, 0.0, 0.0], 500.0, 0.01, 40_000, RandomStream(SEED, 10),
                                 target_uncensored=5000)
    st = rep.statistics
    ks_ok = rep.get_check("ks_two_sample").passed and min(st["uncensored_a"], st["uncensored_b"]) >= 5000
    cens_ok = st["max_censoring"] < 0.5
    ok = ks_ok and cens_ok
    acceptance_record("10 hitting-time scaling", ok,
                      f"KS = {st['ks']:.4f} vs critical {st['ks_critical']:.4f} on "
                      f"{st['uncensored_a']}/{st['uncensored_b']} uncensored; censoring "
                      f"{st['censoring_a']:.3f}/{st['censoring_b']:.3f} (required < 0.5)")
    assert ks_ok, "KS clause"
    assert cens_ok, "censoring clause: from |x| = 4 at most phi(2) ~ 0.287 of paths ever enter B(0, 2)"


def test_11_lil_combinatorics(acceptance_record):
    seq_ok = lil_checkpoint_sequence(1) == [0, 2, 3] and lil_checkpoint_sequence(2) == [0, 2, 3, 4, 5, 6, 7, 8]
    full = lil_checkpoint_sequence(20)
    gaps_ok = not gap_violations(full) and all(b > a for a, b in zip(full, full[1:]))
    probes = [E_E, 16.0, 30.0, 100.0, 1e3, 1e4, 1e6, 1e9, 1e12, 1e15]
    worst = 0.0
    for i, t in enumerate(probes):
        sigma = 0.5 + 0.3 * i
        ll = math.log(math.log(t))
        worst = max(worst,
                    abs(lil_normalizer_khintchine(t, sigma) / math.sqrt(2 * sigma * sigma * t * ll) - 1),
                    abs(lil_normalizer_chung(t, sigma) / math.sqrt(sigma * sigma * t / ll) - 1))
    ok = seq_ok and gaps_ok and worst <= 1e-12
    acceptance_record("11 LIL combinatorics", ok,
                      f"small sequences {seq_ok}, {len(full)} terms to k_max=20 gap-clean {gaps_ok}, "
                      f"normalizer max rel. error {worst:.1e}")
    assert ok


def _green_potential_of_equilibrium(r, alpha):
    """int G(y - w) mu(dw) in d = 3 with the angular integral in closed form."""
    dens = hitting_constant(3, alpha) / riesz_constant(3, alpha)

    def radial(rho):
        ang = 2 * math.pi * ((r + rho) ** (alpha - 1) - (r - rho) ** (alpha - 1)) / ((alpha - 1) * r * rho)
        return rho**2 * (1 + rho) ** (-alpha / 2) * ang * riesz_constant(3, alpha) * dens

    return integrate.quad(radial, 0, 1, weight="alg", wvar=(0, -alpha / 2), epsabs=1e-13, epsrel=1e-13)[0]


def test_12_phi_quadrature(acceptance_record):
    params = ProcessParams(3, 1.5)
    ctx = PotentialContext(params)
    diffs = [abs(_green_potential_of_equilibrium(r, 1.5) - phi([r, 0, 0], ctx)) for r in (1.5, 2.0, 3.0, 5.0)]
    value = phi([5.0, 0, 0], ctx)
    freq, se = hitting_frequency(params, [5.0, 0, 0], 200.0, 0.01, RandomStream(SEED, 12), 10_000)
    bracket = value >= freq - 3 * se and value - freq <= 0.05
    ok = max(diffs) <= 1e-4 and bracket
    acceptance_record("12 phi quadrature", ok,
                      f"Green/phi max diff {max(diffs):.1e} (<= 1e-4); phi(5) = {value:.5f}, "
                      f"MC {freq:.5f} +- {se:.5f}")
    assert ok


@pytest.mark.parametrize("argv", [
    ["clt", "--replicas", "200", "--t-end", "100"],
    ["volume", "--dim", "2", "--alpha", "1.5", "--method", "hitmiss", "--mc-samples", "300000", "--t-end", "10",
     "--mesh", "0.05"],
    ["tau-scaling", "--replicas", "600", "--t-end", "20", "--mesh", "0.05", "--target-uncensored", "50"],
])
def test_13_determinism(argv, tmp_path, capsys, acceptance_record):
    first = tmp_path / "first.csv"
    assert cli.main(argv + ["--seed", str(SEED), "--out", str(first)]) == 0
    manifest = str(first) + ".manifest.json"
    same = True
    for workers in ("1", "8"):
        out = tmp_path / f"w{workers}.csv"
        assert cli.main([argv[0], "--config", manifest, "--workers", workers, "--out", str(out)]) == 0
        same &= out.read_bytes() == first.read_bytes()
    capsys.readouterr()
    acceptance_record(f"13 determinism ({argv[0]})", same,
                      f"manifest re-runs with 1 and 8 workers byte-identical: {same}")
    assert same
