"""Configuration, per-replica records, reports and the replica runner."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DomainError, SausageLabError
from ..sausage_geometry import METHODS, intersection_volume, slice_sausage, volume
from ..stable_process import ProcessParams, RandomStream, simulate_skeleton


@dataclass
class ExperimentConfig:
    params: ProcessParams
    t_checkpoints: tuple
    mesh: float
    replicas: int
    method: str = "exact1d"
    resolution: float | int | None = None
    master_seed: int = 0
    # Tail horizon for S[t, t + tail_factor * t]; None disables tail slices.
    tail_factor: float | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_checkpoints = tuple(float(t) for t in self.t_checkpoints)
        if not self.t_checkpoints:
            raise DomainError("at least one checkpoint is required")
        if any(t <= 0 for t in self.t_checkpoints) or any(
            b <= a for a, b in zip(self.t_checkpoints, self.t_checkpoints[1:])
        ):
            raise DomainError("checkpoints must be positive and strictly increasing")
        if not self.mesh > 0 or self.mesh > self.t_checkpoints[0]:
            raise DomainError(f"mesh must lie in (0, first checkpoint], got {self.mesh}")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise DomainError(f"replicas must be a positive integer, got {self.replicas}")
        self.replicas = int(self.replicas)
        if self.method not in METHODS:
            raise DomainError(f"unknown volume method {self.method!r}")
        if self.method == "exact1d" and self.params.d != 1:
            raise DomainError("exact1d volumes need d = 1")
        if self.method != "exact1d" and self.resolution is None:
            raise DomainError(f"method {self.method} needs a resolution")
        if self.tail_factor is not None and not self.tail_factor > 0:
            raise DomainError("tail_factor must be positive")

    @property
    def horizon(self) -> float:
        t_max = self.t_checkpoints[-1]
        return t_max * (1 + self.tail_factor) if self.tail_factor else t_max

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = asdict(self.params)
        out["t_checkpoints"] = list(self.t_checkpoints)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data["params"] = ProcessParams(**data["params"])
        return cls(**data)


@dataclass
class ReplicaRecord:
    replica_id: int
    times: np.ndarray
    volumes: np.ndarray
    # lambda(S_t cap S[t, t + tail]) per checkpoint, when tails were requested
    tail_intersections: np.ndarray | None = None
    master_seed: int = 0
    stream_id: int = 0
    failed: bool = False
    error: str | None = None


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    rule: str


@dataclass
class ExperimentReport:
    name: str
    config: dict = field(default_factory=dict)
    statistics: dict = field(default_factory=dict)
    stderrs: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, value: float, tolerance: float, rule: str, passed: bool | None = None):
        """Record a pass/fail rule; by default ``value <= tolerance``."""
        if passed is None:
            passed = bool(value <= tolerance)
        self.checks.append(Check(name, bool(passed), float(value), float(tolerance), rule))

    def get_check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _run_replica(config: ExperimentConfig, replica_id: int) -> ReplicaRecord:
    stream = RandomStream(config.master_seed, replica_id)
    times = np.array(config.t_checkpoints)
    try:
        path = simulate_skeleton(config.params, config.horizon, config.mesh, stream)
        vols = np.empty(len(times))
        tails = np.empty(len(times)) if config.tail_factor else None
        for j, t in enumerate(times):
            head = slice_sausage(path, 0.0, t)
            vols[j] = volume(head, config.method, config.resolution, stream.child(2 * j)).value
            if tails is not None:
                tail = slice_sausage(path, t, t * (1 + config.tail_factor))
                tails[j] = intersection_volume(
                    head, tail, config.method, config.resolution, stream.child(2 * j + 1)
                ).value
        return ReplicaRecord(replica_id, times, vols, tails, config.master_seed, replica_id)
    except (SausageLabError, FloatingPointError, MemoryError) as exc:
        nan = np.full(len(times), math.nan)
        return ReplicaRecord(replica_id, times, nan, None, config.master_seed, replica_id,
                             failed=True, error=f"{type(exc).__name__}: {exc}")


def run_volume_replicas(config: ExperimentConfig, workers: int = 1) -> list[ReplicaRecord]:
    """Simulate ``config.replicas`` independent paths; replica i uses stream id i.

    Volumes at every checkpoint come from nested slices of the same path.
    The returned list is ordered by replica id whatever the worker count.
    """
    ids = range(config.replicas)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda i: _run_replica(config, i), ids))
    return [_run_replica(config, i) for i in ids]


def volume_matrix(records: list[ReplicaRecord]) -> tuple[np.ndarray, np.ndarray]:
    """(times, volumes[replica, checkpoint]) over the non-failed records."""
    good = [r for r in records if not r.failed]
    if not good:
        raise DomainError("no successful replicas")
    times = np.asarray(good[0].times, dtype=float)
    return times, np.vstack([r.volumes for r in good])


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
