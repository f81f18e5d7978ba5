"""Config-driven command line front end.

Subcommands: solve (gain table for one cascade), sweep (one solve per
value of a swept noise parameter, long format), verify (brute-force
certification of a solution), simulate (Monte Carlo policy evaluation).
Configs are JSON; results are written atomically as CSV or JSON.

Exit codes: 0 success, 1 config/schema error, 2 numeric failure,
3 verification failed, 4 sampler/family incompatibility.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .dp import (
    CascadeConfig,
    GainStatus,
    PolicySolution,
    StageNoise,
    max_power,
    solve_cascade,
    subarray_efficiency,
    value_coefficient,
)
from .errors import SamplerError, ValidationError
from .moments import Family
from .oracle import verify_policy
from .simulator import (
    BetzGreedyPolicy,
    LinearGainsPolicy,
    compare_policies,
    estimate_expected_power,
)

EXIT_OK = 0
EXIT_SCHEMA = 1
EXIT_NUMERIC = 2
EXIT_VERIFY_FAILED = 3
EXIT_SAMPLER = 4

# Relative output paths are resolved against this directory when set.
OUTPUT_DIR_ENV = "WINDCASCADE_OUTPUT_DIR"

_BETZ_GAIN = 1.0 / 3.0
_SWEEPABLE = ("sigma_a", "sigma_b", "gamma_a", "gamma_b", "mu_a", "mu_b")
_DEFAULT_SWEEP_VALUES = (0.0, 0.1, 0.2, 0.3, 0.4)
_NOISE_DEFAULTS = {
    "sigma_a": 0.0,
    "gamma_a": 0.0,
    "sigma_b": 0.0,
    "gamma_b": 0.0,
    "sigma_c": 0.0,
    "gamma_c": 0.0,
}
_POLICY_NAMES = ("optimal", "betz", "deterministic")
_FAMILY_NAMES = {f.value: f for f in Family}


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class SimulationSpec:
    n_samples: int = 10_000
    seed: int = 0
    family: Family = Family.TWO_POINT
    policies: tuple = ("optimal",)


@dataclass(frozen=True)
class OutputSpec:
    format: str = "csv"
    path: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment file: cascade plus optional sweep/simulation blocks."""

    cascade: CascadeConfig
    noise_central: dict | None  # homogeneous central moments when given as one block
    sweep: SweepSpec | None
    simulation: SimulationSpec | None
    output: OutputSpec


def _as_float(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value}")
    return value


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    return value


def _as_mapping(value, name: str) -> dict:
    if not isinstance(value, dict):
        raise ValidationError(f"{name} must be an object, got {value!r}")
    return value


def _check_keys(mapping: dict, allowed, name: str) -> None:
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown keys in {name}: {sorted(unknown)}")


def _noise_kwargs(mapping: dict, name: str) -> dict:
    _check_keys(mapping, ("mu_a", "mu_b", *_NOISE_DEFAULTS), name)
    for required in ("mu_a", "mu_b"):
        if required not in mapping:
            raise ValidationError(f"{name} requires {required}")
    kwargs = dict(_NOISE_DEFAULTS)
    kwargs.update({key: _as_float(val, f"{name}.{key}") for key, val in mapping.items()})
    return kwargs


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment file; any defect raises ValidationError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc

    raw = _as_mapping(raw, "config")
    _check_keys(raw, ("cascade", "sweep", "simulation", "output"), "config")
    if "cascade" not in raw:
        raise ValidationError("config requires a cascade section")

    cascade_raw = _as_mapping(raw["cascade"], "cascade")
    _check_keys(cascade_raw, ("n_turbines", "x0", "rho", "area", "noise", "stages"), "cascade")
    if "n_turbines" not in cascade_raw:
        raise ValidationError("cascade requires n_turbines")
    n = _as_int(cascade_raw["n_turbines"], "cascade.n_turbines")
    geometry = {
        key: _as_float(cascade_raw[key], f"cascade.{key}")
        for key in ("x0", "rho", "area")
        if key in cascade_raw
    }

    has_noise = "noise" in cascade_raw
    has_stages = "stages" in cascade_raw
    if has_noise == has_stages:
        raise ValidationError("cascade requires exactly one of 'noise' or 'stages'")
    noise_central = None
    if has_noise:
        noise_central = _noise_kwargs(_as_mapping(cascade_raw["noise"], "cascade.noise"), "cascade.noise")
        cascade = CascadeConfig.homogeneous(n, StageNoise.from_central(**noise_central), **geometry)
    else:
        stages_raw = cascade_raw["stages"]
        if not isinstance(stages_raw, list):
            raise ValidationError("cascade.stages must be a list")
        stages = [
            StageNoise.from_central(**_noise_kwargs(_as_mapping(entry, f"cascade.stages[{i}]"),
                                                    f"cascade.stages[{i}]"))
            for i, entry in enumerate(stages_raw)
        ]
        cascade = CascadeConfig(n, tuple(stages), **geometry)

    sweep = None
    if "sweep" in raw:
        sweep_raw = _as_mapping(raw["sweep"], "sweep")
        _check_keys(sweep_raw, ("parameter", "values"), "sweep")
        parameter = sweep_raw.get("parameter", "sigma_b")
        if parameter not in _SWEEPABLE:
            raise ValidationError(f"sweep.parameter must be one of {_SWEEPABLE}, got {parameter!r}")
        values_raw = sweep_raw.get("values", list(_DEFAULT_SWEEP_VALUES))
        if not isinstance(values_raw, list) or not values_raw:
            raise ValidationError("sweep.values must be a non-empty list")
        values = tuple(_as_float(v, "sweep.values") for v in values_raw)
        if noise_central is None:
            raise ValidationError("sweep requires the homogeneous 'noise' form of the cascade")
        sweep = SweepSpec(parameter=parameter, values=values)

    simulation = None
    if "simulation" in raw:
        sim_raw = _as_mapping(raw["simulation"], "simulation")
        _check_keys(sim_raw, ("n_samples", "seed", "family", "policies"), "simulation")
        n_samples = _as_int(sim_raw.get("n_samples", 10_000), "simulation.n_samples")
        if n_samples < 1:
            raise ValidationError(f"simulation.n_samples must be >= 1, got {n_samples}")
        seed = _as_int(sim_raw.get("seed", 0), "simulation.seed")
        family_name = sim_raw.get("family", Family.TWO_POINT.value)
        if family_name not in _FAMILY_NAMES:
            raise ValidationError(
                f"simulation.family must be one of {sorted(_FAMILY_NAMES)}, got {family_name!r}"
            )
        policies_raw = sim_raw.get("policies", ["optimal"])
        if not isinstance(policies_raw, list) or not policies_raw:
            raise ValidationError("simulation.policies must be a non-empty list")
        for name in policies_raw:
            if name not in _POLICY_NAMES:
                raise ValidationError(f"unknown policy {name!r}; choose from {_POLICY_NAMES}")
        simulation = SimulationSpec(
            n_samples=n_samples,
            seed=seed,
            family=_FAMILY_NAMES[family_name],
            policies=tuple(policies_raw),
        )

    output = OutputSpec()
    if "output" in raw:
        out_raw = _as_mapping(raw["output"], "output")
        _check_keys(out_raw, ("format", "path"), "output")
        fmt = out_raw.get("format", "csv")
        if fmt not in ("csv", "json"):
            raise ValidationError(f"output.format must be 'csv' or 'json', got {fmt!r}")
        path = out_raw.get("path")
        if path is not None and not isinstance(path, str):
            raise ValidationError("output.path must be a string")
        output = OutputSpec(format=fmt, path=path)

    return ExperimentConfig(
        cascade=cascade,
        noise_central=noise_central,
        sweep=sweep,
        simulation=simulation,
        output=output,
    )


def _resolve_output_path(cli_path, spec: OutputSpec, default_name: str) -> Path:
    raw = cli_path or spec.path or default_name
    path = Path(raw)
    if not path.is_absolute():
        base = os.environ.get(OUTPUT_DIR_ENV)
        if base:
            path = Path(base) / path
    return path


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _cell(value) -> str:
    # repr of a float is the shortest round-trip form, stable across runs
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(header, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def _emit(path: Path, fmt: str, header, rows, payload: dict) -> None:
    if fmt == "csv":
        _write_atomic(path, _csv_text(header, rows))
    else:
        _write_atomic(path, json.dumps(payload, indent=2) + "\n")


def _solution_rows(solution: PolicySolution):
    rows = []
    for k in range(solution.n_turbines):
        psi = solution.gains[k]
        q = solution.coefficients[k]
        rows.append([k, psi, psi / _BETZ_GAIN, q, subarray_efficiency(q), solution.clamped[k].value])
    return rows


_SOLVE_HEADER = ("k", "psi", "psi_normalized", "Q", "eta", "status")


def cmd_solve(args) -> int:
    config = load_config(args.config)
    solution = solve_cascade(config.cascade)
    rows = _solution_rows(solution)
    q0 = solution.coefficients[0]
    cascade = config.cascade
    payload = {
        "command": "solve",
        "n_turbines": cascade.n_turbines,
        "q0": q0,
        "efficiency": subarray_efficiency(q0),
        "max_power_w": max_power(q0, cascade.rho, cascade.area, cascade.x0),
        "rows": [dict(zip(_SOLVE_HEADER, row)) for row in rows],
    }
    fmt = args.format or config.output.format
    path = _resolve_output_path(args.output, config.output, f"solve.{fmt}")
    _emit(path, fmt, _SOLVE_HEADER, rows, payload)
    print(f"solved {cascade.n_turbines} turbines: Q0={q0:.6g} eta0={4 * q0:.6g} -> {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if config.noise_central is None:
        raise ValidationError("sweep requires the homogeneous 'noise' form of the cascade")
    sweep = config.sweep or SweepSpec("sigma_b", _DEFAULT_SWEEP_VALUES)
    cascade = config.cascade

    header = ("sweep_value", "turbine_index", "psi", "psi_normalized", "Q", "eta")
    rows = []
    for value in sweep.values:
        kwargs = dict(config.noise_central)
        kwargs[sweep.parameter] = value
        swept = CascadeConfig.homogeneous(
            cascade.n_turbines,
            StageNoise.from_central(**kwargs),
            x0=cascade.x0,
            rho=cascade.rho,
            area=cascade.area,
        )
        solution = solve_cascade(swept)
        for k, psi, psi_norm, q, eta, _status in _solution_rows(solution):
            rows.append([value, k, psi, psi_norm, q, eta])

    payload = {
        "command": "sweep",
        "parameter": sweep.parameter,
        "rows": [dict(zip(header, row)) for row in rows],
    }
    fmt = args.format or config.output.format
    path = _resolve_output_path(args.output, config.output, f"sweep.{fmt}")
    _emit(path, fmt, header, rows, payload)
    print(f"swept {sweep.parameter} over {len(sweep.values)} values -> {path}")
    return EXIT_OK


def _load_solution_file(path, config: CascadeConfig) -> PolicySolution:
    """Rebuild a PolicySolution from a cmd_solve output file (CSV or JSON)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read solution {path}: {exc}") from exc
    if text.lstrip().startswith("{"):
        try:
            rows = json.loads(text)["rows"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"solution {path} is not valid solve JSON: {exc}") from exc
    else:
        rows = list(csv.DictReader(io.StringIO(text)))
    try:
        entries = sorted(rows, key=lambda r: int(r["k"]))
        gains = tuple(float(r["psi"]) for r in entries)
        statuses = tuple(GainStatus(r["status"]) for r in entries)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"solution {path} is missing solve columns: {exc}") from exc
    if len(gains) != config.n_turbines:
        raise ValidationError(
            f"solution has {len(gains)} rows for {config.n_turbines} turbines"
        )
    # Rebuild the value chain implied by the stored gains.
    coefficients = [0.0] * (config.n_turbines + 1)
    for k in range(config.n_turbines - 1, -1, -1):
        stage = config.stages[k]
        coefficients[k] = value_coefficient(gains[k], coefficients[k + 1], stage.a, stage.b)
    return PolicySolution(gains, tuple(coefficients), statuses)


def cmd_verify(args) -> int:
    config = load_config(args.config)
    if args.solution:
        solution = _load_solution_file(args.solution, config.cascade)
    else:
        solution = solve_cascade(config.cascade)
    report = verify_policy(config.cascade, solution, n_u=args.grid_points)

    header = ("stage", "analytic_psi", "oracle_psi", "gap", "status")
    rows = [
        [s.stage, s.analytic_gain, s.oracle_gain, s.gap, s.status.value]
        for s in report.stages
    ]
    payload = {"command": "verify", **report.to_dict()}
    fmt = args.format or config.output.format
    path = _resolve_output_path(args.output, config.output, f"verify.{fmt}")
    _emit(path, fmt, header, rows, payload)
    verdict = "PASSED" if report.passed else "FAILED"
    print(f"verification {verdict}: max_gap={report.max_gap:.3g} "
          f"(grid spacing {report.grid_spacing:.3g}) -> {path}")
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def _deterministic_twin(config: CascadeConfig) -> CascadeConfig:
    stages = tuple(
        StageNoise.from_central(mu_a=stage.a.mean, mu_b=stage.b.mean)
        for stage in config.stages
    )
    return CascadeConfig(config.n_turbines, stages, x0=config.x0, rho=config.rho, area=config.area)


def _build_policy(name: str, config: CascadeConfig):
    if name == "optimal":
        return LinearGainsPolicy.from_solution(solve_cascade(config), name="optimal")
    if name == "betz":
        return BetzGreedyPolicy()
    if name == "deterministic":
        solution = solve_cascade(_deterministic_twin(config))
        return LinearGainsPolicy(solution.gains, name="deterministic")
    raise ValidationError(f"unknown policy {name!r}; choose from {_POLICY_NAMES}")


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    if config.simulation is None:
        raise ValidationError("simulate requires a simulation section in the config")
    spec = config.simulation
    n_samples = args.samples if args.samples is not None else spec.n_samples
    if n_samples < 1:
        raise ValidationError(f"n_samples must be >= 1, got {n_samples}")
    seed = args.seed if args.seed is not None else spec.seed
    names = list(args.policy) if args.policy else list(spec.policies)
    policies = [_build_policy(name, config.cascade) for name in names]

    if len(policies) == 1:
        reports = [
            estimate_expected_power(config.cascade, policies[0], n_samples, seed, family=spec.family)
        ]
    else:
        reports = compare_policies(config.cascade, policies, n_samples, seed, family=spec.family)

    eta_names = tuple(f"eta_{l}" for l in range(config.cascade.n_turbines))
    header = ("policy", "mean_total_power_w", "std_error_w",
              "negative_state_fraction", "n_samples", "seed", *eta_names)
    rows = [
        [r.policy_name, r.mean_total_power, r.std_error,
         r.negative_state_fraction, r.n_samples, r.seed, *r.per_subarray_efficiency]
        for r in reports
    ]
    payload = {"command": "simulate", "policies": [r.to_dict() for r in reports]}
    fmt = args.format or config.output.format
    path = _resolve_output_path(args.output, config.output, f"simulate.{fmt}")
    _emit(path, fmt, header, rows, payload)
    best = reports[0]
    print(f"simulated {len(reports)} policy run(s), {n_samples} samples: "
          f"best {best.policy_name} mean={best.mean_total_power:.6g} W -> {path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windcascade",
        description="Cascade gain optimization, verification and simulation.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to a JSON experiment config")
    common.add_argument("--output", help="output file (overrides config output.path)")
    common.add_argument("--format", choices=("csv", "json"),
                        help="output format (overrides config output.format)")

    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", parents=[common], help="compute per-turbine gains")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="solve across a range of one noise parameter")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", parents=[common],
                              help="certify gains against brute-force grid search")
    p_verify.add_argument("--grid-points", type=int, default=1_000_000,
                          help="oracle grid resolution (default 1000000)")
    p_verify.add_argument("--solution",
                          help="verify a previously written solve output instead of re-solving")
    p_verify.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo policy evaluation")
    p_sim.add_argument("--samples", type=int, help="number of rollouts (overrides config)")
    p_sim.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    p_sim.add_argument("--policy", action="append", choices=_POLICY_NAMES,
                       help="policy to run; repeat to compare several")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SamplerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLER
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except Exception as exc:  # numeric/runtime failure after a valid config
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
