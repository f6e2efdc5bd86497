"""Command-line front end: ``sausage-lab <command> [flags]``.

Exit codes: 0 success, 1 selftest failure, 2 usage or configuration
error, 3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys

import numpy as np

from . import __version__
from .errors import DomainError, NumericalError, OutputError, SausageLabError
from .limit_experiments import (
    ExperimentConfig, ExperimentReport, clt_experiment, estimate_sigma, fclt_covariance_experiment,
    fourth_moment_experiment, gap_bound_check, intersection_moment_experiment, lil_checkpoint_sequence,
    lil_paths_experiment, lln_capacity_check, run_volume_replicas, tau_scaling_experiment,
)
from .potential_theory import (
    PotentialContext, capacity_unit_ball, green_function, h_function, phi, phi_brownian, process_capacity,
)
from .reporting import (
    CONFIG_SCHEMA, RunManifest, config_hash, emit_csv, emit_jsonl, format_value, load_config_file,
)
from .sausage_geometry import intersection_volume, slice_sausage, volume
from .stable_process import ProcessParams, RandomStream, simulate_skeleton

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4
SEED_ENV = "SAUSAGE_LAB_SEED"

COMMANDS = (
    "capacity", "phi", "green", "hfun", "simulate", "volume", "intersect", "lln", "sigma", "clt",
    "fclt", "moments", "tau-scaling", "lil-seq", "lil", "selftest",
)
REPLICA_COMMANDS = ("lln", "sigma", "clt", "fclt", "moments")

DEFAULTS = {
    "dim": 1, "alpha": 0.6, "radius": 1.0, "t_end": 200.0, "mesh": 0.01, "replicas": 100,
    "seed": 0, "method": None, "grid_res": 0.1, "mc_samples": 100_000, "tail_factor": None,
    "k_max": 10, "order": 2, "start_norm": 4.0, "target_uncensored": None, "point": None,
    "times": [0.5, 1.0], "sigma2": None, "paths": 1, "t_checkpoints": None, "process": False,
}
COMMAND_DEFAULTS = {
    "tau-scaling": {"dim": 3, "alpha": 1.5, "t_end": 500.0, "replicas": 5000},
    "moments": {"tail_factor": 4.0},
    "lil": {"alpha": 0.5},
}


class UsageError(DomainError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sausage-lab", description="Stable sausage simulation and checks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file or a run manifest")
        p.add_argument("--dim", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--radius", type=float)
        p.add_argument("--t-end", type=float)
        p.add_argument("--t-checkpoints", type=_floats)
        p.add_argument("--mesh", type=float)
        p.add_argument("--replicas", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--method", choices=("exact1d", "grid", "hitmiss"))
        p.add_argument("--grid-res", type=float)
        p.add_argument("--mc-samples", type=int)
        p.add_argument("--tail-factor", type=float)
        p.add_argument("--k-max", type=int)
        p.add_argument("--order", type=int)
        p.add_argument("--start-norm", type=float)
        p.add_argument("--target-uncensored", type=int)
        p.add_argument("--point", type=_floats)
        p.add_argument("--times", type=_floats)
        p.add_argument("--sigma2", type=float)
        p.add_argument("--paths", type=int)
        p.add_argument("--process", action="store_const", const=True,
                       help="capacity w.r.t. the process Green function")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    return parser


def resolve_config(args, environ=None) -> dict:
    """defaults < command defaults < config file < flags; seed falls back to the environment."""
    environ = os.environ if environ is None else environ
    flat = dict(DEFAULTS)
    flat.update(COMMAND_DEFAULTS.get(args.command, {}))
    from_file = load_config_file(args.config) if args.config else {}
    seed_given = "seed" in from_file or args.seed is not None
    flat.update({k: v for k, v in from_file.items() if k in CONFIG_SCHEMA and k != "command"})
    for key in CONFIG_SCHEMA:
        value = getattr(args, key, None)
        if value is not None:
            flat[key] = value
    if not seed_given and environ.get(SEED_ENV):
        try:
            flat["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {environ[SEED_ENV]!r}") from None
    if flat["method"] is None:
        flat["method"] = "exact1d" if flat["dim"] == 1 else "grid"
    if flat["t_checkpoints"] is None:
        t = flat["t_end"]
        base = [t / 4, t / 2, t] if args.command != "fclt" else [t / 4, t / 2, 3 * t / 4, t]
        if args.command == "fclt":
            base = sorted(set(base) | {s * t for s in flat["times"]})
        flat["t_checkpoints"] = base
    flat["command"] = args.command
    return flat


def _params(flat) -> ProcessParams:
    return ProcessParams(flat["dim"], flat["alpha"], flat["radius"])


def _resolution(flat):
    return {"exact1d": None, "grid": flat["grid_res"], "hitmiss": flat["mc_samples"]}[flat["method"]]


def experiment_config(flat: dict) -> ExperimentConfig:
    params = _params(flat)
    return ExperimentConfig(
        params=params, t_checkpoints=tuple(flat["t_checkpoints"]), mesh=flat["mesh"],
        replicas=flat["replicas"], method=flat["method"], resolution=_resolution(flat),
        master_seed=flat["seed"], tail_factor=flat["tail_factor"],
    )


def config_to_flat(config: ExperimentConfig) -> dict:
    """Inverse of :func:`experiment_config` on the keys it reads."""
    flat = {
        "dim": config.params.d, "alpha": config.params.alpha, "radius": config.params.radius,
        "t_checkpoints": list(config.t_checkpoints), "mesh": config.mesh, "replicas": config.replicas,
        "method": config.method, "seed": config.master_seed, "tail_factor": config.tail_factor,
        "grid_res": None, "mc_samples": None,
    }
    if config.method == "grid":
        flat["grid_res"] = float(config.resolution)
    elif config.method == "hitmiss":
        flat["mc_samples"] = int(config.resolution)
    return flat


def parse_config(argv, config_file=None) -> ExperimentConfig:
    """Resolve ``argv`` (plus an optional config file) into an ExperimentConfig."""
    args = build_parser().parse_args(list(argv) + (["--config", str(config_file)] if config_file else []))
    if args.command is None:
        raise UsageError("a command is required")
    flat = resolve_config(args)
    _check_regime(args.command, _params(flat))
    return experiment_config(flat)


def _check_regime(command, params: ProcessParams):
    ratio = f"{params.ratio:g}"
    if command in ("capacity", "phi", "green", "lln", "sigma", "moments") and not params.transient:
        raise UsageError(f"{command} requires d > alpha (transience), got d/alpha = {ratio} <= 1")
    if command == "hfun" and not params.ratio > 1:
        raise UsageError(f"hfun requires d/alpha > 1, got d/alpha = {ratio}")
    if command in ("clt", "fclt") and not params.clt:
        raise UsageError(f"{command} requires d/alpha > 3/2, got d/alpha = {ratio} <= 3/2")
    if command == "lil" and not params.lil:
        raise UsageError(f"lil requires d/alpha > 9/5, got d/alpha = {ratio} <= 9/5")


def _point(flat, params) -> np.ndarray:
    if flat["point"] is not None:
        p = np.asarray(flat["point"], dtype=float)
        if p.shape != (params.d,):
            raise UsageError(f"--point needs {params.d} coordinates, got {len(p)}")
        return p
    p = np.zeros(params.d)
    p[0] = flat["start_norm"]
    return p


def _scalar_report(name, value, **extra) -> ExperimentReport:
    report = ExperimentReport(name, columns=["name", "value"])
    report.statistics["value"] = value
    report.statistics.update(extra)
    report.rows = [{"name": k, "value": v} for k, v in report.statistics.items()]
    return report


def _merge(report, other, prefix):
    for k, v in other.statistics.items():
        report.statistics[prefix + k] = v
    for c in other.checks:
        c.name = prefix + c.name
        report.checks.append(c)


def run_command(command: str, flat: dict, workers: int = 1) -> tuple[ExperimentReport, str | None]:
    """Execute ``command``; returns the report and, for scalar commands, the text to print."""
    params = _params(flat)
    _check_regime(command, params)
    seed = flat["seed"]
    if command == "capacity":
        if flat["process"]:
            value = process_capacity(params.d, params.alpha, params.radius)
        else:
            value = capacity_unit_ball(params.d, params.alpha) * params.radius ** (params.d - params.alpha)
        return _scalar_report("capacity", value), repr(float(value))
    if command == "phi":
        y = _point(flat, params)
        value = phi_brownian(y / params.radius, params.d) if params.alpha == 2 else phi(y, PotentialContext(params))
        return _scalar_report("phi", value), repr(float(value))
    if command == "green":
        value = green_function(_point(flat, params), PotentialContext(params))
        return _scalar_report("green", value), repr(float(value))
    if command == "hfun":
        value = h_function(flat["t_end"], params.d, params.alpha)
        return _scalar_report("hfun", value), repr(float(value))
    if command == "lil-seq":
        seq = lil_checkpoint_sequence(flat["k_max"])
        report = ExperimentReport("lil_seq", columns=["n"], rows=[{"n": n} for n in seq])
        report.statistics["length"] = len(seq)
        return report, "\n".join(map(str, seq))
    if command == "simulate":
        path = simulate_skeleton(params, flat["t_end"], flat["mesh"], RandomStream(seed, 0))
        cols = ["t"] + [f"x{i + 1}" for i in range(params.d)]
        report = ExperimentReport("simulate", columns=cols)
        for t, x in zip(path.times, path.positions):
            report.rows.append(dict(zip(cols, [t, *x])))
        report.statistics.update(points=len(path), t_end=path.t_end)
        return report, None
    if command == "volume":
        stream = RandomStream(seed, 0)
        path = simulate_skeleton(params, flat["t_end"], flat["mesh"], stream)
        est = volume(slice_sausage(path, 0.0, flat["t_end"]), flat["method"], _resolution(flat),
                     stream.child(0), workers)
        report = _scalar_report("volume", est.value, stat_error=est.stat_error)
        report.stderrs["value"] = est.stat_error
        return report, None
    if command == "intersect":
        a, b = RandomStream(seed, 0), RandomStream(seed, 1)
        pa = simulate_skeleton(params, flat["t_end"], flat["mesh"], a)
        pb = simulate_skeleton(params, flat["t_end"], flat["mesh"], b)
        est = intersection_volume(slice_sausage(pa, 0, flat["t_end"]), slice_sausage(pb, 0, flat["t_end"]),
                                  flat["method"], _resolution(flat), a.child(0), workers)
        report = _scalar_report("intersect", est.value, stat_error=est.stat_error)
        report.stderrs["value"] = est.stat_error
        return report, None
    if command == "tau-scaling":
        x = _point(flat, params)
        report = tau_scaling_experiment(params, x, flat["t_end"], flat["mesh"], flat["replicas"],
                                        RandomStream(seed, 0), flat["target_uncensored"], workers)
        return report, None
    if command == "lil":
        if flat["sigma2"] is None:
            raise UsageError("lil requires --sigma2 (estimate it with the sigma command)")
        report = lil_paths_experiment(params, flat["sigma2"], flat["k_max"], flat["mesh"], flat["method"],
                                      RandomStream(seed, 0), _resolution(flat), flat["paths"])
        return report, None

    config = experiment_config(flat)
    ctx = PotentialContext(params) if params.transient else None
    if command == "moments" and flat["order"] in (1, 2, 3):
        return intersection_moment_experiment(config, flat["order"], workers), None
    if command == "moments" and flat["order"] != 4:
        raise UsageError(f"--order must be 1, 2, 3 (intersection) or 4 (fourth moment), got {flat['order']}")
    records = run_volume_replicas(config, workers)
    if command == "moments":
        return fourth_moment_experiment(records), None
    if command == "lln":
        report = lln_capacity_check(records, ctx)
        if config.tail_factor:
            _merge(report, gap_bound_check(records, ctx), "gap_")
        return report, None
    sigma = estimate_sigma(records, params)
    if command == "sigma":
        report = ExperimentReport("sigma", columns=["t", "variance", "ratio", "residual"])
        for row in zip(sigma.times, sigma.variances, sigma.ratios, sigma.residuals):
            report.rows.append(dict(zip(report.columns, map(float, row))))
        report.statistics.update(sigma2=sigma.sigma2, half_width=sigma.half_width,
                                 envelope_constant=sigma.envelope_constant)
        return report, None
    if command == "clt":
        return clt_experiment(records, sigma, ctx), None
    if command == "fclt":
        return fclt_covariance_experiment(records, sigma, tuple(flat["times"]), n=flat["t_end"]), None
    raise UsageError(f"unknown command {command!r}")


def _summary(report: ExperimentReport) -> str:
    lines = [f"{k} = {format_value(v)}" for k, v in report.statistics.items()
             if not isinstance(v, (list, dict))]
    for key, value in report.flags.items():
        if isinstance(value, bool):
            lines.append(f"flag {key} = {format_value(value)}")
    for c in report.checks:
        lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {format_value(c.value)} "
                     f"(tolerance {format_value(c.tolerance)}; {c.rule})")
    return "\n".join(lines)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_outputs(report, flat, out, fmt, started) -> RunManifest:
    if fmt == "jsonl":
        emit_jsonl(report, out, config_hash(flat), flat["seed"])
    else:
        emit_csv(report, out)
    manifest = RunManifest(config=flat, master_seed=flat["seed"], started=started, finished=_now(),
                           outputs={report.name: os.path.abspath(out)})
    manifest.write(out + ".manifest.json")
    return manifest


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required; choose from " + ", ".join(COMMANDS))
        if args.command == "selftest":
            from .selftest import run_selftest
            return run_selftest()
        if args.workers < 1:
            raise UsageError(f"--workers must be >= 1, got {args.workers}")
        flat = resolve_config(args)
        started = _now()
        report, text = run_command(args.command, flat, args.workers)
        if args.out:
            write_outputs(report, flat, args.out, args.format, started)
        print(text if text is not None else _summary(report))
        return EXIT_OK
    except OutputError as exc:
        print(f"sausage-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"sausage-lab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, SausageLabError) as exc:
        print(f"sausage-lab: error: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"sausage-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
