"""Flat ``section.key = value`` experiment configuration.

Blank lines and lines starting with ``#`` are ignored; keys may appear once.
Drivers and nonlinearities live in numbered sections ``driver1``, ``sigma1``,
``driver2``, ...  Mandatory keys are never filled in silently.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .paths import HolderPath, generate_analytic, generate_fbm, read_path_csv
from .solver import Problem, SolverConfig
from .spectral import SpectralOperator, State, parse_sigma_hat

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config", "parse_state",
           "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = ("generate-path", "integrate", "solve", "convergence", "chain-rule",
                    "invariance", "smooth-approx")

_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


class ConfigError(ValueError):
    def __init__(self, message: str, reason: str = "config:invalid"):
        super().__init__(message)
        self.reason = reason


def parse_config(text: str) -> dict:
    """Parse into ``{section: {key: raw string}}``."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'", "config:syntax")
        sec, key, val = m.groups()
        if key in out.setdefault(sec, {}):
            raise ConfigError(f"line {lineno}: duplicate key {sec}.{key}", "config:duplicate")
        out[sec][key] = val
    return out


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


_CALL = re.compile(r"^\s*([a-z_]+)\s*\(([^)]*)\)\s*$")


def parse_state(text: str, op: SpectralOperator) -> State:
    """``mode(k[, amp])``, ``power(p)`` (alternating k**-p), ``coeffs(c1, ...)`` or ``zero()``."""
    m = _CALL.match(text)
    if not m:
        raise ConfigError(f"cannot parse state {text!r}", "config:state")
    kind, args = m.group(1), _float_list(m.group(2))
    if kind == "mode":
        k = int(args[0])
        amp = args[1] if len(args) > 1 else 1.0
        return op.basis_vector(k) * amp
    if kind == "power":
        k = np.arange(1, op.dim + 1, dtype=float)
        return op.state((-1.0) ** k * k ** -args[0])
    if kind == "coeffs":
        c = np.zeros(op.dim)
        if len(args) > op.dim:
            raise ConfigError("more coefficients than modes", "config:state")
        c[: len(args)] = args
        return op.state(c)
    if kind == "zero":
        return op.zero()
    raise ConfigError(f"unknown state kind {kind!r}", "config:state")


@dataclass
class ExperimentConfig:
    raw: dict
    seed: int = 0
    out_dir: Path | None = None
    resolved: dict = field(default_factory=dict)

    # -------------------------------------------------------------- access
    def get(self, section: str, key: str, default=None, required: bool = False) -> str | None:
        val = self.raw.get(section, {}).get(key)
        if val is None:
            if required:
                raise ConfigError(f"missing mandatory key {section}.{key}", "config:missing")
            val = default
        if val is not None:
            self.resolved[f"{section}.{key}"] = str(val)
        return val

    def get_float(self, section, key, default=None, required=False):
        v = self.get(section, key, default, required)
        try:
            return None if v is None else float(v)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key} must be a number, got {v!r}") from exc

    def get_int(self, section, key, default=None, required=False):
        v = self.get(section, key, default, required)
        try:
            return None if v is None else int(v)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key} must be an integer, got {v!r}") from exc

    @property
    def kind(self) -> str:
        k = self.get("experiment", "kind", required=True)
        if k not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {k!r}", "config:kind")
        return k

    # ------------------------------------------------------------- objects
    def operator(self) -> SpectralOperator:
        kind = self.get("operator", "kind", required=True)
        if kind == "dirichlet_sine":
            n = self.get_int("operator", "modes", required=True)
            length = self.get_float("operator", "domain_length", math.pi)
            return SpectralOperator.dirichlet_sine(n, length)
        if kind == "diagonal":
            return SpectralOperator.diagonal(
                _float_list(self.get("operator", "eigenvalues", required=True)))
        raise ConfigError(f"unknown operator kind {kind!r}", "config:operator")

    def solver_level(self) -> int:
        return self.get_int("solver", "level", required=True)

    def _indices(self, prefix: str) -> list:
        idx = sorted(int(s[len(prefix):]) for s in self.raw
                     if s.startswith(prefix) and s[len(prefix):].isdigit())
        if idx != list(range(1, len(idx) + 1)):
            raise ConfigError(f"{prefix} sections must be numbered 1..m", "config:indices")
        return idx

    def driver(self, i: int, level: int) -> HolderPath:
        sec = f"driver{i}"
        kind = self.get(sec, "kind", required=True)
        horizon = self.get_float("problem", "horizon", 1.0)
        lv = self.get_int(sec, "level", level)
        if kind == "fbm":
            return generate_fbm(self.get_float(sec, "hurst", required=True), lv, horizon,
                                seed=self.seed + i - 1, method=self.get(sec, "method", "auto"))
        if kind == "file":
            return read_path_csv(self.get(sec, "path", required=True))
        names = {"constant": ("c",), "linear": ("slope", "intercept"),
                 "sine": ("amplitude", "frequency", "phase"),
                 "weierstrass": ("b", "q", "amplitude", "terms"),
                 "power": ("exponent", "amplitude")}
        if kind not in names:
            raise ConfigError(f"unknown driver kind {kind!r}", "config:driver")
        params = {}
        for key in names[kind]:
            v = self.get_float(sec, key)
            if v is not None:
                params[key] = v
        return generate_analytic(kind, params, lv, horizon)

    def drivers(self, level: int) -> list:
        idx = self._indices("driver")
        if not idx:
            raise ConfigError("missing mandatory section driver1", "config:missing")
        return [self.driver(i, level) for i in idx]

    def sigmas(self, op: SpectralOperator) -> list:
        out = []
        for i in self._indices("sigma"):
            sec = f"sigma{i}"
            hat = self.get(sec, "hat")
            state = self.get(sec, "state")
            if (hat is None) == (state is None):
                raise ConfigError(f"{sec} needs exactly one of 'hat' or 'state'", "config:sigma")
            out.append(parse_sigma_hat(hat) if hat is not None else parse_state(state, op))
        return out

    def problem(self, level: int | None = None) -> Problem:
        level = self.solver_level() if level is None else level
        op = self.operator()
        drivers = self.drivers(level)
        sigmas = self.sigmas(op)
        if len(sigmas) != len(drivers):
            raise ConfigError("need one sigma section per driver section", "config:sigma")
        psi = parse_state(self.get("problem", "psi", required=True), op)
        alpha = self.get_float("problem", "alpha", required=True)
        return Problem(op, sigmas, drivers, psi, alpha)

    def solver_config(self, level: int | None = None) -> SolverConfig:
        return SolverConfig(
            level=self.solver_level() if level is None else level,
            picard_tol=self.get_float("solver", "picard_tol", 1e-10),
            max_picard_iters=self.get_int("solver", "max_picard_iters", 60),
            window_shrink=self.get_float("solver", "window_shrink", 0.5),
            initial_window=self.get_float("solver", "initial_window"),
            initial_guess=self.get("solver", "initial_guess", "orbit"),
            mu=self.get_float("solver", "mu", 0.0),
        )

    def resolved_lines(self) -> list:
        return [f"{k} = {v}" for k, v in sorted(self.resolved.items())]


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", "config:io") from exc
    raw = parse_config(text)
    cfg = ExperimentConfig(raw)
    cfg.seed = seed if seed is not None else int(raw.get("experiment", {}).get("seed", 0))
    cfg.resolved["experiment.seed"] = str(cfg.seed)
    out = raw.get("output", {}).get("dir")
    if out is not None:
        cfg.out_dir = Path(out)
    return cfg
