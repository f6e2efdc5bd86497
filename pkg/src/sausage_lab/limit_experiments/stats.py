"""Kolmogorov-Smirnov distances and small moment helpers."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from ..errors import DomainError

# Asymptotic 1% critical coefficient of the Kolmogorov distribution.
KS_C_01 = 1.63


def ks_statistic(sample, cdf) -> float:
    """sup_x |F_n(x) - F(x)| evaluated at the sorted sample points.

    Both one-sided gaps are taken; the lower gap uses the left limit
    F(x-) so that step-function ``cdf`` arguments are handled exactly.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise DomainError("KS statistic of an empty sample")
    f = np.asarray(cdf(x), dtype=float)
    f_left = np.asarray(cdf(np.nextafter(x, -np.inf)), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f_left - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def ks_two_sample(x, y) -> float:
    """sup_t |F_x(t) - F_y(t)| for two empirical distributions."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if len(x) == 0 or len(y) == 0:
        raise DomainError("KS statistic of an empty sample")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / len(x)
    fy = np.searchsorted(y, grid, side="right") / len(y)
    return float(np.max(np.abs(fx - fy)))


def ks_critical(n: int, coefficient: float = KS_C_01) -> float:
    return coefficient / math.sqrt(n)


def ks_critical_two_sample(n1: int, n2: int, coefficient: float = KS_C_01) -> float:
    return coefficient * math.sqrt((n1 + n2) / (n1 * n2))


def normal_cdf(x):
    return ndtr(x)


def shape_moments(values) -> tuple[float, float]:
    """(skewness, kurtosis) from central sample moments; kurtosis is 3 for a Gaussian."""
    v = np.asarray(values, dtype=float)
    c = v - v.mean()
    m2 = np.mean(c ** 2)
    if m2 == 0:
        return math.nan, math.nan
    return float(np.mean(c ** 3) / m2 ** 1.5), float(np.mean(c ** 4) / m2 ** 2)
