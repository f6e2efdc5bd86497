import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sausage_lab.errors import DimensionError, DomainError, EmptyWindowError, MemoryBudgetError
from sausage_lab.sausage_geometry import (
    SausageSkeleton, VolumeEstimate, build_spatial_index, contains, contains_many, intersection_volume,
    merged_intervals, slice_sausage, volume, volume_exact_1d, volume_grid, volume_hit_or_miss,
)
from sausage_lab.stable_process import PathSkeleton, ProcessParams, RandomStream, simulate_skeleton


def sk(points, r=1.0):
    return SausageSkeleton(np.asarray(points, dtype=float), r)


def brute_contains(centers, r, p):
    return bool(np.any(np.sum((centers - p) ** 2, axis=1) <= r * r))


@settings(max_examples=60, deadline=None)
@given(
    centers=arrays(np.float64, st.tuples(st.integers(1, 25), st.integers(1, 3)),
                   elements=st.floats(-5, 5, allow_nan=False)),
    probes=st.lists(st.lists(st.floats(-7, 7, allow_nan=False), min_size=3, max_size=3), min_size=1, max_size=20),
    r=st.floats(0.1, 2.0),
)
def test_membership_agrees_with_brute_force(centers, probes, r):
    s = sk(centers, r)
    index = build_spatial_index(s)
    pts = np.array(probes)[:, : s.d]
    fast = contains_many(index, s, pts)
    for p, f in zip(pts, fast):
        expected = brute_contains(s.centers, r, p)
        assert contains(index, s, p) == expected
        assert bool(f) == expected


def test_membership_is_closed_ball():
    s = sk([[0.0, 0.0]], 1.0)
    index = build_spatial_index(s)
    assert contains(index, s, [1.0, 0.0])
    assert not contains(index, s, [1.0 + 1e-12, 0.0])
    with pytest.raises(DimensionError):
        contains(index, s, [0.0, 0.0, 0.0])


def test_exact_1d_examples():
    assert volume_exact_1d(sk([[0.0]])).value == 2.0
    est = volume_exact_1d(sk([[0.0], [1.0], [5.0]]))
    assert est.value == 5.0 and est.resolution == 2
    # touching intervals merge into one component
    assert volume_exact_1d(sk([[0.0], [2.0]])).resolution == 1
    s, e = merged_intervals(sk([[3.0], [0.0], [10.0], [1.5]]))
    assert np.array_equal(s, [-1.0, 9.0]) and np.array_equal(e, [4.0, 11.0])


def test_exact_1d_rejects_higher_dimension():
    with pytest.raises(DimensionError):
        volume_exact_1d(sk([[0.0, 0.0]]))


@pytest.mark.parametrize("d, h, expected", [(2, 0.01, math.pi), (3, 0.02, 4 * math.pi / 3)])
def test_grid_single_ball(d, h, expected):
    est = volume_grid(sk(np.zeros((1, d))), h)
    assert abs(est.value / expected - 1) < 0.005
    assert est.method == "grid" and est.stat_error == 0.0


def test_grid_rejects_coarse_voxels_and_budget():
    with pytest.raises(DomainError):
        volume_grid(sk([[0.0, 0.0]]), 0.6)
    with pytest.raises(MemoryBudgetError):
        volume_grid(sk(np.zeros((1, 3))), 0.01, max_voxels=1000)


def test_hit_or_miss_single_disk_within_three_stderr():
    est = volume_hit_or_miss(sk([[0.0, 0.0]]), 400_000, RandomStream(1))
    assert abs(est.value - math.pi) <= 3 * est.stat_error


def test_hit_or_miss_independent_of_worker_count():
    s = sk(np.random.default_rng(0).normal(size=(30, 2)), 0.5)
    a = volume_hit_or_miss(s, 300_000, RandomStream(4, 2), workers=1)
    b = volume_hit_or_miss(s, 300_000, RandomStream(4, 2), workers=4)
    assert a == b


def test_volume_dispatch_and_estimate_validation():
    s = sk([[0.0]])
    assert volume(s).value == 2.0
    with pytest.raises(DomainError):
        volume(s, "hitmiss", 1000)
    with pytest.raises(DomainError):
        volume(s, "voronoi")
    with pytest.raises(DomainError):
        VolumeEstimate(-1.0, 0.0, "grid", 0.1)


def test_random_1d_skeletons_grid_and_exact_agree():
    rng = np.random.default_rng(3)
    for _ in range(10):
        s = sk(np.cumsum(rng.standard_cauchy(size=(60, 1)) * 0.5, axis=0))
        exact = volume_exact_1d(s)
        grid = volume_grid(s, 0.05)
        assert abs(grid.value - exact.value) <= 2 * 0.05 * exact.resolution


@settings(max_examples=40, deadline=None)
@given(a=st.lists(st.floats(-20, 20), min_size=1, max_size=30),
       b=st.lists(st.floats(-20, 20), min_size=1, max_size=30))
def test_inclusion_exclusion_exact_in_1d(a, b):
    A, B = sk(np.array(a)[:, None]), sk(np.array(b)[:, None])
    union = sk(np.array(a + b)[:, None])
    lhs = volume_exact_1d(union).value
    rhs = volume_exact_1d(A).value + volume_exact_1d(B).value - intersection_volume(A, B).value
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, lhs)
    assert volume_exact_1d(A).value <= lhs + 1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_inclusion_exclusion_exact_on_a_fixed_lattice(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(8, 2)) * 2
    b = rng.normal(size=(8, 2)) * 2
    h = 0.1
    va, vb = volume_grid(sk(a), h).value, volume_grid(sk(b), h).value
    vu = volume_grid(sk(np.vstack([a, b])), h).value
    vi = intersection_volume(sk(a), sk(b), "grid", h).value
    assert round((vu - va - vb + vi) / h**2) == 0


def test_intersection_cases():
    a, b = sk([[0.0], [1.0]]), sk([[10.0]])
    assert intersection_volume(a, b).value == 0.0
    assert intersection_volume(a, b, "grid", 0.1).value == 0.0
    assert intersection_volume(sk([[0.0]]), sk([[1.0]])).value == 1.0
    with pytest.raises(DimensionError):
        intersection_volume(sk([[0.0]]), sk([[0.0, 0.0]]))
    with pytest.raises(DomainError):
        intersection_volume(sk([[0.0]], 1.0), sk([[0.0]], 2.0))


def test_intersection_methods_agree_in_2d():
    a = sk([[0.0, 0.0], [1.0, 0.0]])
    b = sk([[0.5, 0.5]])
    g = intersection_volume(a, b, "grid", 0.01).value
    m = intersection_volume(a, b, "hitmiss", 400_000, RandomStream(2))
    assert abs(g - m.value) <= 3 * m.stat_error + 0.01 * g


def test_slice_windows():
    path = simulate_skeleton(ProcessParams(1, 0.6), 2.0, 0.5, RandomStream(0))
    s = slice_sausage(path, 0.5, 1.5)
    assert len(s.centers) == 3 and s.time_window == (0.5, 1.5)
    assert len(slice_sausage(path, 0.5, 1.5, left_open=True).centers) == 2
    assert len(slice_sausage(path, 0.0, 0.0).centers) == 1
    with pytest.raises(EmptyWindowError):
        slice_sausage(path, 0.6, 0.9)
    with pytest.raises(DomainError):
        slice_sausage(path, 0.0, 3.0)
    assert slice_sausage(path, 0.0, 1.0, radius=0.5).radius == 0.5


def test_volume_monotone_along_a_path():
    path = simulate_skeleton(ProcessParams(2, 1.5), 5.0, 0.05, RandomStream(8))
    vols = [volume_grid(slice_sausage(path, 0, t), 0.1).value for t in (1.0, 2.0, 3.5, 5.0)]
    assert all(x <= y for x, y in zip(vols, vols[1:]))


def test_empty_and_invalid_skeletons():
    with pytest.raises(EmptyWindowError):
        SausageSkeleton(np.zeros((0, 2)), 1.0)
    with pytest.raises(DomainError):
        SausageSkeleton(np.zeros((1, 2)), 0.0)
    p = PathSkeleton(np.array([0.0, 1.0]), np.array([[0.0], [3.0]]), ProcessParams(1, 1.0))
    assert volume_exact_1d(slice_sausage(p, 0, 1)).value == 4.0
