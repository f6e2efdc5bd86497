"""Potential theory of the rotationally invariant alpha-stable process.

Two normalisations of the unit-ball capacity coexist here:

* :func:`capacity_unit_ball` is the classical closed form for the Riesz
  kernel ``|x|^(alpha-d)``; it equals 1 for every d when alpha = 2.
* :func:`process_capacity` is the capacity with respect to the Green
  function of the process itself, ``G(x) = A(d, alpha) |x|^(alpha-d)``.  It
  is ``capacity_unit_ball / A`` and is the almost-sure limit of V_t / t.

The hitting probability :func:`phi` is computed with the equilibrium
measure of the process normalisation, so that phi -> 1 at the sphere.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, SingularityError, ToleranceNotMetError
from .stable_process import ProcessParams

CHUNG_LIMIT = math.pi / math.sqrt(8.0)
E_E = math.exp(math.e)

# Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (non-negative half).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (xgk[1], xgk[3], ...).
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[[13, 11, 9]] = _WG[:3]
_GW[7] = _WG[3]


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    vals = f(mid + half * _NODES)
    k = half * np.dot(_KW, vals)
    g = half * np.dot(_GW, vals)
    return k, abs(k - g)


def adaptive_quad(f, a: float, b: float, tol: float, max_intervals: int = 4000) -> float:
    """Globally adaptive Gauss-Kronrod (7/15) integration of a vectorised ``f``.

    The interval with the largest error estimate is bisected until the summed
    estimate drops below the absolute tolerance ``tol``.
    """
    val, err = _gk15(f, a, b)
    heap = [(-err, a, b, val)]
    total_err = err
    while total_err > tol:
        if len(heap) >= max_intervals:
            raise ToleranceNotMetError(
                f"quadrature error {total_err:.3g} above {tol:.3g} after {max_intervals} intervals"
            )
        neg_err, lo, hi, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        total_err += neg_err + e1 + e2
    return float(sum(item[3] for item in heap))


@dataclass(frozen=True)
class PotentialContext:
    params: ProcessParams
    quadrature_tolerance: float = 1e-8

    def __post_init__(self):
        if not self.params.transient:
            raise DomainError(
                f"potential theory requires d > alpha, got d={self.params.d}, alpha={self.params.alpha}"
            )
        if not self.quadrature_tolerance > 0:
            raise DomainError("quadrature tolerance must be positive")


def _require_transient(d, alpha):
    if not d > alpha:
        raise DomainError(f"requires d > alpha (transience), got d={d}, alpha={alpha}")


def capacity_unit_ball(d: int, alpha: float) -> float:
    """Riesz capacity Gamma(d/2) / (Gamma(alpha/2) Gamma(1 + (d-alpha)/2)) of the unit ball."""
    _require_transient(d, alpha)
    return math.exp(gammaln(d / 2) - gammaln(alpha / 2) - gammaln(1 + (d - alpha) / 2))


def riesz_constant(d: int, alpha: float) -> float:
    """A(d, alpha) with G(x) = A |x|^(alpha-d) for E exp(i(xi, X_t)) = exp(-t |xi|^alpha)."""
    _require_transient(d, alpha)
    return math.exp(
        gammaln((d - alpha) / 2) - gammaln(alpha / 2) - alpha * math.log(2) - d / 2 * math.log(math.pi)
    )


def process_capacity(d: int, alpha: float, radius: float = 1.0) -> float:
    """Capacity of the closed ball of given radius w.r.t. the process Green function."""
    return radius ** (d - alpha) * capacity_unit_ball(d, alpha) / riesz_constant(d, alpha)


def sausage_capacity(params: ProcessParams) -> float:
    return process_capacity(params.d, params.alpha, params.radius)


def hitting_constant(d: int, alpha: float) -> float:
    """Density constant sin(pi alpha/2) Gamma(d/2) / pi^(d/2+1) of the Riesz equilibrium measure."""
    return math.sin(math.pi * alpha / 2) * math.exp(gammaln(d / 2) - (d / 2 + 1) * math.log(math.pi))


def equilibrium_density(w, ctx: PotentialContext):
    """Density of the unit-ball equilibrium measure; total mass = process capacity."""
    d, alpha = ctx.params.d, ctx.params.alpha
    if alpha >= 2:
        raise DomainError("equilibrium measure of the ball has no density for alpha = 2")
    w = np.asarray(w, dtype=float).reshape(-1, d)
    r2 = np.sum(w * w, axis=1)
    out = np.zeros(len(w))
    inside = r2 < 1.0
    c = hitting_constant(d, alpha) / riesz_constant(d, alpha)
    out[inside] = c * (1.0 - r2[inside]) ** (-alpha / 2)
    return out


def green_function(x, ctx: PotentialContext) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d, alpha = ctx.params.d, ctx.params.alpha
    if x.shape != (d,):
        raise DomainError(f"point must have dimension {d}")
    r = float(np.linalg.norm(x))
    if r == 0.0:
        raise SingularityError("Green function is singular at the origin")
    return riesz_constant(d, alpha) * r ** (alpha - d)


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere S^k in R^(k+1)."""
    return 2 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def _riesz_ball_integral(y: float, d: int, alpha: float, tol: float) -> float:
    """Integral over the unit ball of |y e_1 - w|^(alpha-d) (1-|w|^2)^(-alpha/2) dw, y > 1.

    Radial variable rho = 1 - s^(2/(2-alpha)) absorbs the (1-rho)^(-alpha/2)
    endpoint singularity exactly, leaving a bounded integrand in s.
    """
    p = 2.0 / (2.0 - alpha)
    expo = (alpha - d) / 2.0
    inner_tol = tol * 1e-2

    if d == 1:
        def angular(rho):
            return (y - rho) ** (alpha - 1) + (y + rho) ** (alpha - 1)
    else:
        area = sphere_area(d - 2)

        def angular(rho):
            def f(theta):
                dist2 = y * y + rho * rho - 2.0 * y * rho * np.cos(theta)
                return dist2 ** expo * np.sin(theta) ** (d - 2)
            return area * adaptive_quad(f, 0.0, math.pi, inner_tol)

    def radial(s):
        rho = 1.0 - s ** p
        ang = np.array([angular(r) for r in rho])
        return p * rho ** (d - 1) * (1.0 + rho) ** (-alpha / 2) * ang

    return adaptive_quad(radial, 0.0, 1.0, tol)


def phi(y, ctx: PotentialContext) -> float:
    """P_y(the process ever enters the closed ball of radius ``params.radius``)."""
    d, alpha = ctx.params.d, ctx.params.alpha
    if alpha >= 2:
        raise DomainError("phi uses the alpha < 2 equilibrium density; use phi_brownian")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (d,):
        raise DomainError(f"point must have dimension {d}")
    r = float(np.linalg.norm(y)) / ctx.params.radius
    if r <= 1.0:
        return 1.0
    c = hitting_constant(d, alpha)
    value = c * _riesz_ball_integral(r, d, alpha, ctx.quadrature_tolerance / c)
    return min(1.0, value)


def phi_brownian(y, d: int) -> float:
    """Hitting probability of the unit ball for Brownian motion in d >= 3."""
    if d < 3:
        raise DomainError(f"Brownian motion is recurrent for d={d} < 3")
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(y, dtype=float))))
    if r <= 1.0:
        return 1.0
    return r ** (2 - d)


def h_function(t: float, d: int, alpha: float) -> float:
    """Rate function: 1 if d/alpha > 2, log(t + e) if d/alpha = 2, t^(2 - d/alpha) if 1 < d/alpha < 2."""
    ratio = d / alpha
    if ratio <= 1:
        raise DomainError(f"h requires d/alpha > 1, got {ratio}")
    if not t > 0:
        raise DomainError(f"h requires t > 0, got {t}")
    if abs(ratio - 2.0) <= 1e-12:
        return math.log(t + math.e)
    if ratio > 2:
        return 1.0
    return t ** (2.0 - ratio)


def _check_lil_args(t, sigma):
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    # Accept t = e^e up to rounding: log log t = 1 there.
    if not t >= E_E * (1 - 1e-15):
        raise DomainError(f"LIL normalizers require t >= e^e ~ {E_E:.4f}, got {t}")


def lil_normalizer_khintchine(t: float, sigma: float) -> float:
    """sqrt(2 sigma^2 t log log t)."""
    _check_lil_args(t, sigma)
    return math.sqrt(2.0 * sigma * sigma * t * math.log(math.log(t)))


def lil_normalizer_chung(t: float, sigma: float) -> float:
    """sqrt(sigma^2 t / log log t)."""
    _check_lil_args(t, sigma)
    return math.sqrt(sigma * sigma * t / math.log(math.log(t)))
