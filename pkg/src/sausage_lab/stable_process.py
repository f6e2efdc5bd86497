"""Seeded sampling of rotationally invariant alpha-stable paths in R^d.

The process is normalised by E exp(i(xi, X_t)) = exp(-t |xi|^alpha).  For
alpha < 2 an increment is a Gaussian vector scaled by sqrt(2 S) where S is a
positive (alpha/2)-stable subordinator increment drawn with Kanter's
representation; for alpha = 2 it is Gaussian with coordinate variance 2 dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError

_MASK64 = (1 << 64) - 1

# Kanter's formula loses precision when alpha/2 gets close to zero.
MIN_SAMPLING_ALPHA = 0.1


def mix64(x: int) -> int:
    """SplitMix64 finaliser: a bijective avalanche on 64-bit integers."""
    z = (int(x) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _check_u64(name: str, value: int) -> int:
    value = int(value)
    if not 0 <= value <= _MASK64:
        raise DomainError(f"{name} must be a 64-bit unsigned integer, got {value}")
    return value


class RandomStream:
    """Counter-based random stream keyed by ``(master_seed, stream_id)``.

    Both identifiers are passed through :func:`mix64` and used as the two
    key words of a Philox-4x64 generator, so a stream depends only on the
    pair and never on how many other streams exist or which worker owns it.
    """

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = _check_u64("master_seed", master_seed)
        self.stream_id = _check_u64("stream_id", stream_id)
        key = np.array([mix64(self.master_seed), mix64(self.stream_id)], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def child(self, sub_id: int) -> "RandomStream":
        """Derived stream for a shard or purpose ``sub_id`` of this stream."""
        derived = mix64(self.stream_id ^ mix64(_check_u64("sub_id", sub_id) ^ 0xA5A5A5A5A5A5A5A5))
        return RandomStream(self.master_seed, derived)

    @property
    def state(self) -> dict:
        return self.generator.bit_generator.state

    def __repr__(self) -> str:
        return f"RandomStream(master_seed={self.master_seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class ProcessParams:
    d: int
    alpha: float
    radius: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d}")
        if not 0.0 < self.alpha <= 2.0:
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not self.radius > 0.0:
            raise DomainError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def ratio(self) -> float:
        return self.d / self.alpha

    # Regime flags use cross-multiplied comparisons so that e.g. d=3, alpha=2
    # sits exactly on the d/alpha = 3/2 boundary.
    @property
    def transient(self) -> bool:
        return self.d > self.alpha

    @property
    def clt(self) -> bool:
        return 2 * self.d > 3 * self.alpha

    @property
    def lil(self) -> bool:
        return 5 * self.d > 9 * self.alpha


@dataclass
class PathSkeleton:
    """Path sampled on a strictly increasing time grid starting at 0."""

    times: np.ndarray
    positions: np.ndarray
    params: ProcessParams = field(repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float).reshape(len(self.times), -1)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise DomainError("times must be a non-empty 1-d array")
        if self.times[0] != 0.0:
            raise DomainError("skeleton times must start at 0")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("skeleton times must be strictly increasing")
        if self.positions.shape[1] != self.params.d:
            raise DimensionError(
                f"positions have dimension {self.positions.shape[1]}, params say {self.params.d}"
            )
        if np.any(self.positions[0] != 0.0):
            raise DomainError("skeleton must start at the origin")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def sample_subordinator_increment(rho, dt, stream: RandomStream, size=None):
    """Positive rho-stable increment with E exp(-lam S) = exp(-dt lam^rho).

    Kanter: S = dt^(1/rho) (a(U)/E)^((1-rho)/rho) with U ~ Unif(0, pi),
    E ~ Exp(1) and a(u) = [sin(rho u)^rho sin((1-rho) u)^(1-rho) / sin u]^(1/(1-rho)).
    ``dt`` may be an array broadcastable to ``size``.
    """
    if not 0.0 < rho < 1.0:
        raise DomainError(f"subordinator index must lie in (0, 1), got {rho}")
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise DomainError("time step must be positive")
    if size is None and dt.ndim:
        size = dt.shape
    gen = stream.generator
    # 1 - U in (0, 1] keeps u away from 0 where sin(u) vanishes.
    u = np.pi * (1.0 - gen.random(size))
    e = gen.standard_exponential(size)
    log_a = (
        rho * np.log(np.sin(rho * u))
        + (1.0 - rho) * np.log(np.sin((1.0 - rho) * u))
        - np.log(np.sin(u))
    ) / (1.0 - rho)
    log_s = np.log(dt) / rho + (1.0 - rho) / rho * (log_a - np.log(e))
    s = np.exp(log_s)
    return float(s) if np.ndim(s) == 0 else s


def sample_increment(params: ProcessParams, dt, stream: RandomStream, size=None) -> np.ndarray:
    """Increment X_{t+dt} - X_t with characteristic function exp(-dt |xi|^alpha).

    Returns shape ``(d,)`` for a scalar ``dt`` and ``size=None``, otherwise
    ``(*size, d)``.
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise DomainError("time step must be positive")
    if size is None:
        size = dt.shape
    size = (size,) if np.isscalar(size) else tuple(size)
    dt = np.broadcast_to(dt, size)
    if params.alpha == 2.0:
        scale = np.sqrt(2.0 * dt)
    else:
        if params.alpha < MIN_SAMPLING_ALPHA:
            raise DomainError(
                f"alpha={params.alpha} is below the sampling limit {MIN_SAMPLING_ALPHA}"
            )
        s = sample_subordinator_increment(params.alpha / 2.0, dt, stream, size=size)
        scale = np.sqrt(2.0 * s)
    g = stream.generator.standard_normal(size + (params.d,))
    return g * np.asarray(scale)[..., None]


def time_grid(t_end: float, mesh: float) -> np.ndarray:
    """{0, mesh, 2 mesh, ..., t_end}; the last point is exactly t_end."""
    if not mesh > 0 or not t_end > 0:
        raise DomainError("t_end and mesh must be positive")
    if mesh > t_end * (1 + 1e-12):
        raise DomainError(f"mesh {mesh} exceeds t_end {t_end}")
    n = int(np.floor(t_end / mesh * (1 + 1e-12)))
    times = np.arange(n + 1, dtype=float) * mesh
    if t_end - times[-1] > 1e-9 * mesh:
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def simulate_skeleton(params: ProcessParams, t_end: float, mesh: float,
                      stream: RandomStream) -> PathSkeleton:
    times = time_grid(t_end, mesh)
    steps = np.diff(times)
    increments = sample_increment(params, steps, stream)
    positions = np.zeros((len(times), params.d))
    np.cumsum(increments, axis=0, out=positions[1:])
    return PathSkeleton(times, positions, params)


def subsample_skeleton(skeleton: PathSkeleton, factor: int) -> PathSkeleton:
    """Keep every ``factor``-th grid point, always retaining the first and last."""
    if int(factor) != factor or factor < 1:
        raise DomainError(f"factor must be a positive integer, got {factor}")
    n = len(skeleton)
    idx = np.arange(0, n, int(factor))
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return PathSkeleton(skeleton.times[idx], skeleton.positions[idx], skeleton.params)


def empirical_char_function(samples, xi) -> tuple[complex, float]:
    """Mean of exp(i(x_k, xi)) over the samples, with standard error 1/sqrt(N)."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DomainError("empirical characteristic function of an empty sample")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    samples = samples.reshape(len(samples), -1)
    if samples.shape[1] != xi.shape[0]:
        raise DimensionError("xi and samples differ in dimension")
    phase = samples @ xi
    value = complex(np.mean(np.cos(phase)), np.mean(np.sin(phase)))
    return value, 1.0 / np.sqrt(len(samples))
