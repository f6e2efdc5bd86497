"""Installation smoke test: quick exact checks plus estimator consensus."""

from __future__ import annotations

import math
import sys

import numpy as np

from .errors import DomainError, SingularityError
from .limit_experiments import gap_violations, ks_statistic, ks_two_sample, lil_checkpoint_sequence
from .potential_theory import (
    E_E, PotentialContext, capacity_unit_ball, green_function, h_function, lil_normalizer_chung,
    lil_normalizer_khintchine, phi, phi_brownian,
)
from .sausage_geometry import SausageSkeleton, volume_exact_1d, volume_grid, volume_hit_or_miss
from .stable_process import ProcessParams, RandomStream, sample_increment, simulate_skeleton


def _raises(exc, fn, *args):
    try:
        fn(*args)
    except exc:
        return True
    return False


def _checks():
    ctx = PotentialContext(ProcessParams(3, 1.5))
    x = np.array([0.3, -0.4, 1.2])
    yield "capacity(3,2) = 1", capacity_unit_ball(3, 2.0) == 1.0
    yield "capacity(4,2) = 1", abs(capacity_unit_ball(4, 2.0) - 1) < 1e-12
    yield "capacity rejects d <= alpha", _raises(DomainError, capacity_unit_ball, 1, 1.0)
    yield "green homogeneity", math.isclose(green_function(2 * x, ctx) / green_function(x, ctx), 2 ** -1.5,
                                            rel_tol=1e-12)
    yield "green singular at 0", _raises(SingularityError, green_function, np.zeros(3), ctx)
    yield "phi = 1 on the sphere", phi([1.0, 0, 0], ctx) == 1.0
    yield "phi decreasing", phi([2.0, 0, 0], ctx) > phi([4.0, 0, 0], ctx)
    yield "phi_brownian(3, 2) = 0.5", phi_brownian([2.0, 0, 0], 3) == 0.5
    yield "h branch d/alpha > 2", h_function(100, 5, 2.0) == 1.0
    yield "h branch d/alpha = 2", math.isclose(h_function(100, 4, 2.0), math.log(100 + math.e))
    yield "khintchine at e^e", math.isclose(lil_normalizer_khintchine(E_E, 1.0), math.sqrt(2 * E_E))
    yield "chung at e^e", math.isclose(lil_normalizer_chung(E_E, 1.0), math.sqrt(E_E))
    yield "normalizer rejects sigma = 0", _raises(DomainError, lil_normalizer_chung, 100.0, 0.0)
    yield "lil sequence k=1", lil_checkpoint_sequence(1) == [0, 2, 3]
    yield "lil sequence k=2", lil_checkpoint_sequence(2) == [0, 2, 3, 4, 5, 6, 7, 8]
    yield "lil gap bound to k=12", not gap_violations(lil_checkpoint_sequence(12))
    yield "ks one point at median", ks_statistic([0.0], lambda v: 0.5 + 0 * v) == 0.5
    yield "ks two-sample self", ks_two_sample([1.0, 2.0, 5.0], [1.0, 2.0, 5.0]) == 0.0
    a = sample_increment(ProcessParams(2, 1.0), 0.5, RandomStream(5, 9), size=8)
    b = sample_increment(ProcessParams(2, 1.0), 0.5, RandomStream(5, 9), size=8)
    yield "stream determinism", np.array_equal(a, b)

    for d, expected in ((2, math.pi), (3, 4 * math.pi / 3)):
        ball = SausageSkeleton(np.zeros((1, d)), 1.0)
        yield f"grid unit ball d={d}", abs(volume_grid(ball, 0.05).value / expected - 1) < 0.01

    path = simulate_skeleton(ProcessParams(1, 0.6), 20.0, 0.05, RandomStream(11, 0))
    sk = SausageSkeleton(path.positions, 1.0)
    exact = volume_exact_1d(sk)
    grid = volume_grid(sk, 0.05)
    mc = volume_hit_or_miss(sk, 200_000, RandomStream(11, 1))
    yield "grid vs exact1d", abs(grid.value - exact.value) <= 2 * 0.05 * exact.resolution
    yield "hitmiss vs exact1d", abs(mc.value - exact.value) <= 3 * mc.stat_error + 1e-12


def run_selftest(stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    failures = 0
    for name, ok in _checks():
        failures += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {name}", file=stream)
    print(f"{failures} failure(s)", file=stream)
    return 1 if failures else 0
