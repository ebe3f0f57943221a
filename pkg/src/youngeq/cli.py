"""Command-line experiment driver.

    youngeq <verb> --config PATH [--out DIR] [--seed N]

Verbs: generate-path, integrate, solve, convergence,
verify chain-rule | invariance | smooth-approx.  Every run writes
``report.csv``, ``manifest.txt`` and, for solver-based runs, ``trajectory.csv``.
Exit status: 0 success, 2 solver failure, 3 configuration error.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config, parse_state
from .paths import holder_seminorm, write_path_csv
from .solver import GateError, SolverError, integral_residual, solve_mild
from .spectral import norms_alpha
from .verifiers import (ChainRuleSpec, InvarianceSpec, chain_rule_residual, invariance_statistic,
                        smooth_approx_convergence)
from .young import SampledField, TwoParamSample, fit_order, young_convolution, young_integral

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: str, rows) -> str:
    def fmt(v):
        if isinstance(v, str):
            return v
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return repr(float(v))
    return "\n".join([header] + [",".join(fmt(v) for v in r) for r in rows]) + "\n"


def _via_file(writer, *args) -> str:
    """Render an object's own CSV writer to a string."""
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "out.csv"
        writer(p, *args)
        return p.read_text(encoding="utf-8")


# ------------------------------------------------------------------ runners

def run_generate_path(cfg: ExperimentConfig, files: dict) -> str:
    level = cfg.get_int("solver", "level", required=True)
    x = cfg.driver(1, level)
    eta = cfg.get_float("path", "eta", x.eta_nominal)
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / "path.csv"
        write_path_csv(x, p)
        files["path.csv"] = p.read_text(encoding="utf-8")
        files["path.csv.meta.json"] = (Path(d) / "path.csv.meta.json").read_text(encoding="utf-8")
    rows = []
    lag = 1
    while lag < x.times.size:
        rows.append((lag, x.step * lag, holder_seminorm(x, eta, lag)))
        lag *= 2
    return _csv("max_lag,scale,holder_seminorm", rows)


def _integrand(cfg: ExperimentConfig, x, op=None) -> SampledField:
    kind = cfg.get("integrand", "kind", required=True)
    t = x.times
    if kind == "constant":
        if op is not None:
            return SampledField.constant(t, parse_state(cfg.get("integrand", "state", required=True), op))
        return SampledField.constant(t, cfg.get_float("integrand", "c", required=True))
    if kind == "linear":
        vals = cfg.get_float("integrand", "slope", 1.0) * t
        alpha = 1.0
    elif kind == "sine_of_driver":
        vals = np.sin(x.values)
        alpha = x.eta_nominal
    elif kind == "driver":
        vals = x.values.copy()
        alpha = x.eta_nominal
    else:
        raise ConfigError(f"unknown integrand kind {kind!r}", "config:integrand")
    if op is not None:
        v = parse_state(cfg.get("integrand", "state", required=True), op)
        return SampledField(t, vals[:, None] * v.coeffs, op, alpha)
    return SampledField(t, vals, None, alpha)


def run_integrate(cfg: ExperimentConfig, files: dict) -> str:
    level = cfg.get_int("solver", "level", required=True)
    x = cfg.driver(1, level)
    f = _integrand(cfg, x)
    n = x.times.size - 1
    stride = max(1, n // cfg.get_int("integrate", "points", 64))
    pairs = [(0, j) for j in range(stride, n + 1, stride)]
    sample = TwoParamSample.build(lambda i, j: young_integral(f, x, i, j), x.times, pairs)
    return _via_file(sample.to_csv)


def _convergence_target(cfg: ExperimentConfig, top: int):
    target = cfg.get("convergence", "target", "young_integral")
    if target == "young_integral":
        x = cfg.driver(1, top)
        f = _integrand(cfg, x)
        n = x.times.size - 1
        return lambda lv: young_integral(f, x, 0, n, refine_to=lv)
    if target == "young_convolution":
        op = cfg.operator()
        x = cfg.driver(1, top)
        f = _integrand(cfg, x, op)
        n = x.times.size - 1
        return lambda lv: young_convolution(op, f, x, 0, n, refine_to=lv).coeffs
    if target == "solve":
        problem = cfg.problem(top)
        alpha = problem.alpha

        def solve_at(lv):
            traj = solve_mild(problem, cfg.solver_config(lv))
            return traj.states, alpha, problem.operator
        return solve_at
    raise ConfigError(f"unknown convergence target {target!r}", "config:target")


def convergence_table(levels, values, oracle) -> list:
    """Rows (level, error, order) with the order fitted on all levels up to the row."""
    errors = []
    for v in values:
        if isinstance(v, tuple):
            states, alpha, op = v
            ref = oracle[0]
            stride = (ref.shape[0] - 1) // (states.shape[0] - 1)
            errors.append(float(norms_alpha(op, states - ref[::stride], alpha).max()))
        else:
            errors.append(float(np.max(np.abs(np.asarray(v) - np.asarray(oracle)))))
    rows = []
    for r, (lv, err) in enumerate(zip(levels, errors)):
        if max(errors[: r + 1]) <= 1e-14:
            order = "exact"
        elif r == 0:
            order = "nan"
        else:
            order = fit_order(levels[: r + 1], errors[: r + 1], drop=2 if r >= 4 else 0)
        rows.append((lv, err, order))
    return rows


def run_convergence(cfg: ExperimentConfig, files: dict) -> str:
    levels = sorted(int(v) for v in cfg.get("convergence", "levels", required=True).split(","))
    if len(levels) < 4:
        raise ConfigError("convergence needs at least 4 levels", "config:levels")
    top = levels[-1]
    compute = _convergence_target(cfg, top)
    oracle = compute(top)
    values = [compute(lv) for lv in levels[:-1]]
    return _csv("level,error,fitted_order_cumulative",
                convergence_table(levels[:-1], values, oracle))


def _solve(cfg: ExperimentConfig, files: dict):
    problem = cfg.problem()
    config = cfg.solver_config()
    traj = solve_mild(problem, config)
    files["trajectory.csv"] = _via_file(traj.to_csv, config.mu)
    if cfg.get("output", "states", "no") == "yes":
        files["states.csv"] = _via_file(traj.states_to_csv)
    return problem, traj


def run_solve(cfg: ExperimentConfig, files: dict) -> str:
    problem, traj = _solve(cfg, files)
    n = traj.times.size - 1
    windows = [w for w in traj.diagnostics["windows"] if w["accepted"]]
    rows = [
        ("windows", float(len(windows))),
        ("picard_iterations", float(sum(w["iterations"] for w in windows))),
        ("max_first_ratio", max((w["ratios"][0] for w in windows if w["ratios"]), default=0.0)),
        ("sup_norm_alpha", float(traj.norms(problem.alpha).max())),
        ("final_norm_0", float(traj.norms(0.0)[-1])),
        ("integral_residual_T", integral_residual(problem, traj, n)),
    ]
    return _csv("quantity,value", rows)


def run_chain_rule(cfg: ExperimentConfig, files: dict) -> str:
    problem, traj = _solve(cfg, files)
    op = problem.operator
    spec = ChainRuleSpec(cfg.get("chain", "kind", required=True),
                         parse_state(cfg.get("chain", "phi", required=True), op),
                         lam=cfg.get_float("chain", "lam", 0.0),
                         weight=cfg.get_float("chain", "weight", 1.0),
                         alpha_F=cfg.get_float("chain", "alpha_F", problem.alpha),
                         gamma_F=cfg.get_float("chain", "gamma_F", 1.0))
    n = traj.times.size - 1
    pairs = [(0, n), (0, n // 2), (n // 2, n)]
    rows = []
    for s, t in pairs:
        r = chain_rule_residual(traj, spec, s, t, detail=True)
        rows.append((traj.times[s], traj.times[t], r.residual, r.lhs, r.drift, r.young,
                     r.quadrature_floor))
    return _csv("s,t,residual,lhs,drift,young,quadrature_floor", rows)


def run_invariance(cfg: ExperimentConfig, files: dict) -> str:
    problem, traj = _solve(cfg, files)
    spec = InvarianceSpec(
        parse_state(cfg.get("invariance", "phi", required=True), problem.operator),
        tuple(float(v) for v in cfg.get("invariance", "betas", required=True).split(",")),
        tuple(float(v) for v in cfg.get("invariance", "lambdas", required=True).split(",")),
        eps_phi=cfg.get_float("invariance", "eps_phi", 0.0),
        t0_index=cfg.get_int("invariance", "t0_index", 0),
        t_probe=cfg.get_float("invariance", "t_probe", 2.0**-4))
    return _via_file(invariance_statistic(traj, spec).to_csv)


def run_smooth_approx(cfg: ExperimentConfig, files: dict) -> str:
    problem = cfg.problem()
    config = cfg.solver_config()
    scales = [float(v) for v in cfg.get("smooth", "scales", required=True).split(",")]
    rep = smooth_approx_convergence(problem, config, scales)
    traj = solve_mild(problem, config)
    files["trajectory.csv"] = _via_file(traj.to_csv, config.mu)
    body = _via_file(rep.to_csv)
    floor = ",".join(f"{k}={v!r}" for k, v in sorted(rep.floor.items()))
    cfg.resolved["smooth.floor"] = floor
    return body


RUNNERS = {
    "generate-path": run_generate_path,
    "integrate": run_integrate,
    "solve": run_solve,
    "convergence": run_convergence,
    "chain-rule": run_chain_rule,
    "invariance": run_invariance,
    "smooth-approx": run_smooth_approx,
}


def run_experiment(config_path, out_dir=None, seed: int | None = None,
                   verb: str | None = None) -> int:
    """Run one experiment and write its files; returns the exit status."""
    start = time.perf_counter()
    files: dict = {}
    try:
        cfg = load_config(config_path, seed)
        kind = cfg.kind
        if verb is not None and verb != kind:
            raise ConfigError(f"verb {verb!r} does not match experiment.kind {kind!r}",
                              "config:kind")
        out = Path(out_dir) if out_dir is not None else cfg.out_dir
        if out is None:
            raise ConfigError("no output directory: pass --out or set output.dir",
                              "config:missing")
        files["report.csv"] = RUNNERS[kind](cfg, files)
    except GateError as exc:
        return _fail(EXIT_CONFIG, exc.reason, exc)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc.reason, exc)
    except SolverError as exc:
        return _fail(EXIT_SOLVER, exc.reason, exc)
    except (ValueError, KeyError, IndexError) as exc:
        return _fail(EXIT_CONFIG, "config:invalid", exc)
    wall = time.perf_counter() - start
    manifest = ["# resolved configuration"] + cfg.resolved_lines() + [
        f"library.version = {__version__}",
        f"run.wall_time_s = {wall:.3f}",
        f"run.finished_utc = {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
    ]
    files["manifest.txt"] = "\n".join(manifest) + "\n"
    for name, text in files.items():
        atomic_write(out / name, text)
    return EXIT_OK


def _fail(code: int, reason: str, exc: Exception) -> int:
    detail = " ".join(str(exc).split())
    print(f"ERROR reason={reason} detail={detail}", file=sys.stderr)
    return code


VERIFY_KINDS = ("chain-rule", "invariance", "smooth-approx")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="youngeq", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config file")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="seed (overrides experiment.seed)")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("generate-path", "integrate", "solve", "convergence"):
        sub.add_parser(verb, parents=[common])
    verify = sub.add_parser("verify")
    vsub = verify.add_subparsers(dest="check", required=True)
    for kind in VERIFY_KINDS:
        vsub.add_parser(kind, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    verb = args.check if args.verb == "verify" else args.verb
    return run_experiment(args.config, args.out, args.seed, verb)


if __name__ == "__main__":
    sys.exit(main())
