"""Command-line front end: solve configs, verify against the oracles,
simulate policies, and dump curve data.

The config file is TOML with four tables: [problem], [solver], [oracle],
[output].  Everything except [problem] is optional.  Unknown keys are
rejected so a typo cannot silently fall back to a default.  ``solve``
writes a summary record plus curve files (state space and transformed
coordinates); ``verify`` replays the solution against the grid and
Monte Carlo oracles and exits 4 when a check fails; ``simulate`` prices
the solved policy path-wise; ``curves`` writes the curve files only.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 verification
failure.  Runs with the same config and seed produce byte-identical
output files.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python < 3.11
    import tomli as tomllib

from .fundamentals import build_fundamentals
from .majorant import MajorantError, _reward_scale_point, build_obstacle, transform
from .model import (
    Endpoint,
    ModelError,
    ThresholdPolicy,
    gbm_problem,
    ou_problem,
)
from .noswitch import no_switch_value
from .oracle import build_grid, simulate_policy, value_iteration
from .oracle.grid import _default_window
from .solver import (
    InfiniteValue,
    NoSwitchEverywhere,
    SolverError,
    solve,
    solve_simultaneous,
)


class ConfigError(ValueError):
    """Anything wrong with the config file: syntax, keys, or values."""


# ---------------------------------------------------------------------------
# config schema

_REQUIRED = object()


@dataclass(frozen=True)
class ProblemSection:
    kind: str
    vol: float
    discount: float
    reward_slope: float
    reward_intercept: float
    cost_open: float
    cost_close: float
    drift_closed: Optional[float] = None
    drift_open: Optional[float] = None
    reversion_speed: Optional[float] = None
    level_closed: Optional[float] = None
    level_open: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    lower_kind: Optional[str] = None
    upper_kind: Optional[str] = None


@dataclass(frozen=True)
class SolverSection:
    method: str = "alternating"
    tol: float = 1e-10
    max_iterations: int = 200
    beta1_init: Optional[float] = None


@dataclass(frozen=True)
class OracleSection:
    grid: int = 2000
    paths: int = 100_000
    dt: float = 1e-3
    seed: int = 20240
    probes: Optional[tuple[float, ...]] = None
    grid_tol: float = 0.01
    z_max: float = 3.0


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    points: int = 400
    lo: Optional[float] = None
    hi: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSection
    solver: SolverSection = SolverSection()
    oracle: OracleSection = OracleSection()
    output: OutputSection = OutputSection()


def _take(table: dict, section: str, key: str, kind: str, default=_REQUIRED):
    if key not in table:
        if default is _REQUIRED:
            raise ConfigError(f"missing key {section}.{key}")
        return default
    value = table.pop(key)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{section}.{key} must be a number, got {value!r}")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{section}.{key} must be a string, got {value!r}")
        return value
    if kind == "float_list":
        if not isinstance(value, list) or not value or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
        ):
            raise ConfigError(f"{section}.{key} must be a non-empty list of numbers")
        return tuple(float(v) for v in value)
    raise AssertionError(kind)


def _reject_leftovers(table: dict, section: str):
    if table:
        key = sorted(table)[0]
        raise ConfigError(f"unknown key {section}.{key}")


def _parse_problem(table: dict) -> ProblemSection:
    kind = _take(table, "problem", "kind", "str")
    if kind not in ("gbm", "ou"):
        raise ConfigError(f"problem.kind must be 'gbm' or 'ou', got {kind!r}")
    common = dict(
        kind=kind,
        vol=_take(table, "problem", "vol", "float"),
        discount=_take(table, "problem", "discount", "float"),
        reward_slope=_take(table, "problem", "reward_slope", "float"),
        reward_intercept=_take(table, "problem", "reward_intercept", "float"),
        cost_open=_take(table, "problem", "cost_open", "float"),
        cost_close=_take(table, "problem", "cost_close", "float"),
    )
    if kind == "gbm":
        for key in ("lower", "upper", "lower_kind", "upper_kind"):
            if key in table:
                raise ConfigError(
                    f"problem.{key}: gbm problems are fixed on (0, inf) "
                    "with natural ends"
                )
        section = ProblemSection(
            drift_closed=_take(table, "problem", "drift_closed", "float"),
            drift_open=_take(table, "problem", "drift_open", "float"),
            **common,
        )
    else:
        section = ProblemSection(
            reversion_speed=_take(table, "problem", "reversion_speed", "float"),
            level_closed=_take(table, "problem", "level_closed", "float"),
            level_open=_take(table, "problem", "level_open", "float"),
            lower=_take(table, "problem", "lower", "float", None),
            upper=_take(table, "problem", "upper", "float", None),
            lower_kind=_take(table, "problem", "lower_kind", "str", None),
            upper_kind=_take(table, "problem", "upper_kind", "str", None),
            **common,
        )
    _reject_leftovers(table, "problem")
    return section


def _parse_solver(table: dict) -> SolverSection:
    section = SolverSection(
        method=_take(table, "solver", "method", "str", "alternating"),
        tol=_take(table, "solver", "tol", "float", 1e-10),
        max_iterations=_take(table, "solver", "max_iterations", "int", 200),
        beta1_init=_take(table, "solver", "beta1_init", "float", None),
    )
    _reject_leftovers(table, "solver")
    if section.method not in ("alternating", "simultaneous"):
        raise ConfigError(
            "solver.method must be 'alternating' or 'simultaneous', "
            f"got {section.method!r}"
        )
    if not section.tol > 0.0:
        raise ConfigError("solver.tol must be positive")
    if section.max_iterations < 1:
        raise ConfigError("solver.max_iterations must be at least 1")
    return section


def _check_oracle(section: OracleSection) -> OracleSection:
    if section.grid < 8:
        raise ConfigError("oracle.grid must be at least 8 nodes")
    if section.paths < 2:
        raise ConfigError("oracle.paths must be at least 2")
    if not section.dt > 0.0:
        raise ConfigError("oracle.dt must be positive")
    if section.seed < 0:
        raise ConfigError("oracle.seed must be non-negative")
    if not (section.grid_tol > 0.0 and section.z_max > 0.0):
        raise ConfigError("oracle.grid_tol and oracle.z_max must be positive")
    return section


def _parse_oracle(table: dict) -> OracleSection:
    section = OracleSection(
        grid=_take(table, "oracle", "grid", "int", 2000),
        paths=_take(table, "oracle", "paths", "int", 100_000),
        dt=_take(table, "oracle", "dt", "float", 1e-3),
        seed=_take(table, "oracle", "seed", "int", 20240),
        probes=_take(table, "oracle", "probes", "float_list", None),
        grid_tol=_take(table, "oracle", "grid_tol", "float", 0.01),
        z_max=_take(table, "oracle", "z_max", "float", 3.0),
    )
    _reject_leftovers(table, "oracle")
    return _check_oracle(section)


def _parse_output(table: dict) -> OutputSection:
    section = OutputSection(
        directory=_take(table, "output", "directory", "str", "out"),
        points=_take(table, "output", "points", "int", 400),
        lo=_take(table, "output", "lo", "float", None),
        hi=_take(table, "output", "hi", "float", None),
    )
    _reject_leftovers(table, "output")
    if section.points < 2:
        raise ConfigError("output.points must be at least 2")
    if section.lo is not None and section.hi is not None and not section.lo < section.hi:
        raise ConfigError("output.lo must be below output.hi")
    return section


def parse_config(text: str) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    if "problem" not in data:
        raise ConfigError("missing [problem] section")
    config = RunConfig(
        problem=_parse_problem(dict(data.pop("problem"))),
        solver=_parse_solver(dict(data.pop("solver", {}))),
        oracle=_parse_oracle(dict(data.pop("oracle", {}))),
        output=_parse_output(dict(data.pop("output", {}))),
    )
    if data:
        raise ConfigError(f"unknown section [{sorted(data)[0]}]")
    return config


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, tuple):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise AssertionError(type(value))


def render_config(config: RunConfig) -> str:
    """The inverse of parse_config: emitted text parses back to an equal
    RunConfig (None-valued keys are omitted)."""
    lines = []
    for name in ("problem", "solver", "oracle", "output"):
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for field in dataclasses.fields(section):
            value = getattr(section, field.name)
            if value is None:
                continue
            lines.append(f"{field.name} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def build_problem(section: ProblemSection):
    try:
        if section.kind == "gbm":
            return gbm_problem(
                drift_closed=section.drift_closed,
                drift_open=section.drift_open,
                vol=section.vol,
                discount=section.discount,
                reward_slope=section.reward_slope,
                reward_intercept=section.reward_intercept,
                cost_open=section.cost_open,
                cost_close=section.cost_close,
            )
        lower = upper = None
        if section.lower is not None or section.lower_kind is not None:
            lower = Endpoint(
                -math.inf if section.lower is None else section.lower,
                section.lower_kind or "natural",
            )
        if section.upper is not None or section.upper_kind is not None:
            upper = Endpoint(
                math.inf if section.upper is None else section.upper,
                section.upper_kind or "natural",
            )
        return ou_problem(
            reversion_speed=section.reversion_speed,
            level_closed=section.level_closed,
            level_open=section.level_open,
            vol=section.vol,
            discount=section.discount,
            reward_slope=section.reward_slope,
            reward_intercept=section.reward_intercept,
            cost_open=section.cost_open,
            cost_close=section.cost_close,
            lower=lower,
            upper=upper,
        )
    except ModelError as exc:
        raise ConfigError(f"invalid problem: {exc}") from exc


# ---------------------------------------------------------------------------
# shared pieces

def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _solve_config(problem, section: SolverSection):
    if section.method == "simultaneous":
        return solve_simultaneous(problem, max_iterations=section.max_iterations)
    return solve(
        problem,
        beta1_init=section.beta1_init,
        max_iterations=section.max_iterations,
        tol=section.tol,
    )


def _curve_states(problem, output: OutputSection) -> np.ndarray:
    win_lo, win_hi, spacing = _default_window(problem)
    lo = win_lo if output.lo is None else output.lo
    hi = win_hi if output.hi is None else output.hi
    c, d = problem.interval
    lo, hi = max(lo, c), min(hi, d)
    if not lo < hi:
        raise ConfigError("output.lo/output.hi leave an empty curve window")
    if spacing == "log":
        if lo <= 0.0:
            raise ConfigError("output.lo must be positive for log-spaced curves")
        return np.geomspace(lo, hi, output.points)
    return np.linspace(lo, hi, output.points)


def _write_rows(path: Path, header: str, columns) -> None:
    rows = [header]
    for values in zip(*columns):
        rows.append(",".join(_fmt(v) for v in values))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def _write_state_curves(path: Path, xs, v0, v1, g0, g1) -> None:
    _write_rows(path, "x,v0,v1,g0,g1", (xs, v0, v1, g0, g1))


def _write_transformed_curves(out_dir: Path, xs, problem, solution, funds, gs) -> None:
    """One file per regime: the transformed obstacle R and its tangent
    line W against the regime's own coordinate (F0 for idle, G1 for open)."""
    specs = (
        (0, solution.beta1_star, solution.w0_line, "transformed0.csv"),
        (1, solution.beta0_star, solution.w1_line, "transformed1.csv"),
    )
    for regime, beta_other, (slope, anchor), name in specs:
        tr = transform(build_obstacle(problem, funds, gs, regime, beta_other))
        ys = np.asarray(tr.coord(xs), dtype=float)
        R = np.asarray(tr.Q(xs), dtype=float)
        W = slope * (ys - anchor)
        regimes = np.full(xs.shape, regime)
        _write_rows(out_dir / name, "y,R,W,regime", (ys, R, W, regimes))


def _write_summary(path: Path, fields: dict) -> None:
    lines = []
    for key, value in fields.items():
        if isinstance(value, float):
            lines.append(f"{key} = {_fmt(value)}")
        elif isinstance(value, int):
            lines.append(f"{key} = {value}")
        else:
            lines.append(f'{key} = "{value}"')
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _limit_fields(limits) -> dict:
    fields = {"l_c": limits.l_c.kind, "l_d": limits.l_d.kind}
    if limits.l_c.value is not None:
        fields["l_c_value"] = float(limits.l_c.value)
    if limits.l_d.value is not None:
        fields["l_d_value"] = float(limits.l_d.value)
    return fields


def _default_probes(problem, solution=None) -> tuple[float, ...]:
    c, d = problem.interval
    if solution is not None:
        a, b = solution.a_star, solution.b_star
        raw = (0.5 * a, 0.5 * (a + b), 1.25 * b, 2.0 * b, 4.0 * b)
    else:
        x_ref = _reward_scale_point(problem)
        raw = (0.5 * x_ref, x_ref, 2.0 * x_ref)
    probes = tuple(p for p in raw if c < p < d)
    if not probes:
        raise ConfigError("no default probe states fall inside the interval; "
                          "set oracle.probes explicitly")
    return probes


def _check_probes(problem, probes):
    c, d = problem.interval
    for p in probes:
        if not c < p < d:
            raise ConfigError(f"probe state {p!r} lies outside the interval")
    return tuple(probes)


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(config: RunConfig, *, summary: bool = True) -> int:
    problem = build_problem(config.problem)
    out_dir = Path(config.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        solution = _solve_config(problem, config.solver)
    except NoSwitchEverywhere as exc:
        print(f"classification: no switching is ever optimal ({exc})")
        if summary:
            _write_summary(out_dir / "summary.toml",
                           {"classification": "no_switch_everywhere"})
        xs = _curve_states(problem, config.output)
        g1 = np.asarray(no_switch_value(problem, 1).g(xs), dtype=float)
        zeros = np.zeros_like(xs)
        _write_state_curves(out_dir / "values.csv", xs, zeros, g1, zeros, g1)
        print(f"wrote {out_dir / 'values.csv'}")
        return 0
    except InfiniteValue as exc:
        print(f"classification: infinite value ({exc})")
        if summary:
            _write_summary(out_dir / "summary.toml",
                           {"classification": "infinite_value"})
        return 0

    funds = (build_fundamentals(problem, 0), build_fundamentals(problem, 1))
    gs = (no_switch_value(problem, 0, funds[0]),
          no_switch_value(problem, 1, funds[1]))

    if summary:
        fields = {
            "classification": "two_threshold",
            "a_star": solution.a_star,
            "b_star": solution.b_star,
            "beta0_star": solution.beta0_star,
            "beta1_star": solution.beta1_star,
            "iterations": solution.iterations,
            "residual": solution.residual,
            "method": config.solver.method,
        }
        fields.update(_limit_fields(solution.limits))
        _write_summary(out_dir / "summary.toml", fields)

    xs = _curve_states(problem, config.output)
    v0 = np.asarray(solution.v0(xs), dtype=float)
    v1 = np.asarray(solution.v1(xs), dtype=float)
    g1 = np.asarray(gs[1].g(xs), dtype=float)
    _write_state_curves(out_dir / "values.csv", xs, v0, v1,
                        np.zeros_like(xs), g1)

    _write_transformed_curves(out_dir, xs, problem, solution, funds, gs)

    print(f"a* = {solution.a_star:.10g}  b* = {solution.b_star:.10g}  "
          f"beta0* = {solution.beta0_star:.10g}  "
          f"beta1* = {solution.beta1_star:.10g}")
    print(f"iterations = {solution.iterations}  residual = {solution.residual:.3g}")
    written = ["values.csv", "transformed0.csv", "transformed1.csv"]
    if summary:
        written.insert(0, "summary.toml")
    print(f"wrote {', '.join(written)} to {out_dir}")
    return 0


def cmd_curves(config: RunConfig) -> int:
    return cmd_solve(config, summary=False)


def cmd_verify(config: RunConfig) -> int:
    problem = build_problem(config.problem)
    ocfg = config.oracle

    try:
        solution = _solve_config(problem, config.solver)
    except NoSwitchEverywhere:
        return _verify_never_switch(problem, ocfg)
    except InfiniteValue as exc:
        print(f"classification: infinite value ({exc}); nothing finite to verify")
        return 0

    probes = (_check_probes(problem, ocfg.probes) if ocfg.probes is not None
              else _default_probes(problem, solution))
    failed = False

    grid = build_grid(problem, ocfg.grid)
    report = value_iteration(problem, grid, solution=solution)
    if not report.converged:
        print(f"grid iteration did not converge in {report.n} sweeps: FAIL")
        failed = True
    for p in probes:
        gaps = []
        for regime, ref in ((0, solution.v0), (1, solution.v1)):
            exact = float(ref(p))
            approx = float(report.value(regime, p))
            # floor the denominator so a probe at a zero crossing of the
            # value does not turn a tiny absolute error into a huge ratio
            gaps.append(abs(approx - exact) / max(abs(exact), 1e-6))
        ok = max(gaps) <= ocfg.grid_tol
        failed = failed or not ok
        print(f"grid gap at x = {p:g}: v0 {gaps[0]:.2e}, v1 {gaps[1]:.2e} "
              f"(tol {ocfg.grid_tol:g}) {'ok' if ok else 'FAIL'}")

    policy = ThresholdPolicy(solution.a_star, solution.b_star)
    for p in probes[:3]:
        est = simulate_policy(problem, policy, p, 0, paths=ocfg.paths,
                              dt=ocfg.dt, seed=ocfg.seed)
        target = float(solution.v0(p))
        z = (est.mean - target) / est.standard_error
        ok = abs(z) <= ocfg.z_max
        failed = failed or not ok
        print(f"mc z at x = {p:g}: {z:+.2f} (mean {est.mean:.6g}, "
              f"se {est.standard_error:.2e}, |z| <= {ocfg.z_max:g}) "
              f"{'ok' if ok else 'FAIL'}")

    print("verification FAILED" if failed else "verification passed")
    return 4 if failed else 0


def _verify_never_switch(problem, ocfg: OracleSection) -> int:
    """The solver says no switch is ever worthwhile; the chain should
    agree: empty stopping sets, y identically zero, w equal to the
    no-switch value."""
    print("classification: no switching is ever optimal; "
          "checking the grid oracle agrees")
    probes = (_check_probes(problem, ocfg.probes) if ocfg.probes is not None
              else _default_probes(problem))
    grid = build_grid(problem, ocfg.grid)
    report = value_iteration(problem, grid)
    g1 = no_switch_value(problem, 1).g

    failed = not report.converged
    if report.stop_w.any() or report.stop_y.any():
        print("grid policy switches somewhere: FAIL")
        failed = True
    y_sup = float(np.max(np.abs(report.y)))
    if y_sup > 1e-8:
        print(f"idle value should be zero, got sup {y_sup:.2e}: FAIL")
        failed = True
    for p in probes:
        exact = float(g1(p))
        approx = float(report.value(1, p))
        gap = abs(approx - exact) / max(abs(exact), 1e-6)
        ok = gap <= ocfg.grid_tol
        failed = failed or not ok
        print(f"no-switch gap at x = {p:g}: {gap:.2e} "
              f"(tol {ocfg.grid_tol:g}) {'ok' if ok else 'FAIL'}")
    print("verification FAILED" if failed else "verification passed")
    return 4 if failed else 0


def cmd_simulate(config: RunConfig) -> int:
    problem = build_problem(config.problem)
    ocfg = config.oracle
    c, d = problem.interval

    try:
        solution = _solve_config(problem, config.solver)
        policy = ThresholdPolicy(solution.a_star, solution.b_star)
        probes = (_check_probes(problem, ocfg.probes) if ocfg.probes is not None
                  else _default_probes(problem, solution))
        print(f"simulating the solved policy a = {policy.a:.10g}, "
              f"b = {policy.b:.10g}")
    except NoSwitchEverywhere:
        a = c + 1.0 if math.isfinite(c) else -1e12
        b = d - 1.0 if math.isfinite(d) else 1e12
        policy = ThresholdPolicy(a, b)
        probes = (_check_probes(problem, ocfg.probes) if ocfg.probes is not None
                  else _default_probes(problem))
        print("no switching is ever optimal; simulating a policy whose "
              "thresholds are never reached")
    except InfiniteValue as exc:
        print(f"classification: infinite value ({exc}); nothing to simulate")
        return 0

    for p in probes:
        est = simulate_policy(problem, policy, p, 0, paths=ocfg.paths,
                              dt=ocfg.dt, seed=ocfg.seed)
        lo, hi = est.interval(3.0)
        print(f"x0 = {p:g}: value {est.mean:.8g} +- {est.standard_error:.3g} "
              f"(3 se: [{lo:.8g}, {hi:.8g}]), switches/path {est.switches_mean:.3g}, "
              f"absorbed {est.absorbed_fraction:.3g}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="startstop",
        description="Two-regime switching thresholds for one-dimensional "
                    "diffusions: solve, verify, simulate, and export curves.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "solve": (cmd_solve, "solve the config and write summary plus curves"),
        "verify": (cmd_verify, "replay the solution against both oracles"),
        "simulate": (cmd_simulate, "price the solved policy by simulation"),
        "curves": (cmd_curves, "write the curve files only"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a TOML config")
        p.add_argument("--out", help="output directory (overrides [output])")
        p.add_argument("--seed", type=int, help="simulation seed")
        p.add_argument("--grid", type=int, help="grid oracle node count")
        p.add_argument("--paths", type=int, help="Monte Carlo path count")
        p.add_argument("--dt", type=float, help="Monte Carlo time step")
        p.add_argument("--probes", help="comma-separated probe states")
        p.set_defaults(func=func)
    return parser


def _apply_flags(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    oracle = config.oracle
    if args.seed is not None:
        oracle = dataclasses.replace(oracle, seed=args.seed)
    if args.grid is not None:
        oracle = dataclasses.replace(oracle, grid=args.grid)
    if args.paths is not None:
        oracle = dataclasses.replace(oracle, paths=args.paths)
    if args.dt is not None:
        oracle = dataclasses.replace(oracle, dt=args.dt)
    if args.probes is not None:
        try:
            probes = tuple(float(tok) for tok in args.probes.split(",") if tok)
        except ValueError as exc:
            raise ConfigError(f"--probes must be comma-separated numbers: {exc}")
        if not probes:
            raise ConfigError("--probes must name at least one state")
        oracle = dataclasses.replace(oracle, probes=probes)
    output = config.output
    if args.out is not None:
        output = dataclasses.replace(output, directory=args.out)
    return dataclasses.replace(config, oracle=_check_oracle(oracle), output=output)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        config = _apply_flags(config, args)
        return args.func(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, MajorantError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
