"""Windowed Picard iteration for dy = Ay dt + sum_i sigma_i(y) dx_i.

On the level-L grid the mild formulation becomes

    y_n = S(t_n - a) y_a + sum_{a <= t_k < t_n} S(t_n - t_k) c_k,
    c_k = sum_i sigma_i(y_k) (x_i(t_{k+1}) - x_i(t_k)),

and Picard iteration is run on windows [a, b] whose length adapts to the
observed contraction.  Windows are glued by restarting from the terminal
state of the previous one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .paths import HolderPath, holder_seminorm
from .young import exp_recursion
from .spectral import (ConstantField, Nemytskii, SigmaHat, SpectralOperator, State,
                       fit_growth_constant, norms_alpha)

__all__ = [
    "GateError",
    "SolverError",
    "Problem",
    "SolverConfig",
    "Trajectory",
    "picard_map",
    "solve_mild",
    "phi_iterate",
    "semigroup_constant",
    "fit_convolution_constant",
    "apriori_bound",
    "integral_residual",
    "integral_residuals",
    "regularity_slope",
    "cell_interpolant",
]


class GateError(ValueError):
    """Problem data violate the exponent conditions."""

    def __init__(self, message: str, reason: str = "gate:alpha_plus_eta"):
        super().__init__(message)
        self.reason = reason


class SolverError(RuntimeError):
    def __init__(self, message: str, reason: str = "solver:window_underflow",
                 diagnostics: dict | None = None):
        super().__init__(message)
        self.reason = reason
        self.diagnostics = diagnostics or {}


def _as_field(op: SpectralOperator, sigma):
    if isinstance(sigma, SigmaHat):
        return Nemytskii(op, sigma)
    if isinstance(sigma, State):
        return ConstantField(sigma)
    return sigma


@dataclass(eq=False)
class Problem:
    """Operator, nonlinearities, drivers on a common grid, initial datum and alpha."""

    operator: SpectralOperator
    sigma_list: list
    drivers: list
    psi: State
    alpha: float

    def __post_init__(self):
        if isinstance(self.drivers, HolderPath):
            self.drivers = [self.drivers]
        if not isinstance(self.sigma_list, (list, tuple)):
            self.sigma_list = [self.sigma_list]
        self.sigma_list = [_as_field(self.operator, s) for s in self.sigma_list]
        self.drivers = list(self.drivers)
        if len(self.sigma_list) != len(self.drivers) or not self.drivers:
            raise ValueError("need one nonlinearity per driver and at least one driver")
        if self.psi.op is not self.operator:
            raise ValueError("initial datum belongs to another operator")
        for s in self.sigma_list:
            if getattr(s, "op", self.operator) is not self.operator:
                raise ValueError("nonlinearity belongs to another operator")
        lv = {d.level for d in self.drivers}
        hz = {d.horizon for d in self.drivers}
        if len(lv) != 1 or len(hz) != 1:
            raise ValueError("drivers must share one grid")
        if not 0.0 < self.alpha < 0.5:
            raise GateError(f"alpha must lie in (0, 1/2), got {self.alpha}", "gate:alpha_range")
        if self.alpha + self.eta <= 1.0:
            raise GateError(
                f"alpha + eta = {self.alpha + self.eta:.4f} does not exceed 1")

    @property
    def eta(self) -> float:
        return min(d.eta_nominal for d in self.drivers)

    @property
    def horizon(self) -> float:
        return self.drivers[0].horizon

    @property
    def max_level(self) -> int:
        return self.drivers[0].level

    def increments(self, level: int) -> np.ndarray:
        """Driver increments at ``level``, shape (m, 2**level)."""
        return np.array([np.diff(d.at_level(level).values) for d in self.drivers])

    def forcing(self, states: np.ndarray, dx: np.ndarray) -> np.ndarray:
        """c_k = sum_i sigma_i(y_k) dx_{i,k} for rows of ``states`` aligned with ``dx``."""
        out = np.zeros_like(states)
        for sigma, inc in zip(self.sigma_list, dx):
            out += sigma(states) * inc[:, None]
        return out

    def with_drivers(self, drivers) -> "Problem":
        return Problem(self.operator, self.sigma_list, drivers, self.psi, self.alpha)


@dataclass(frozen=True)
class SolverConfig:
    level: int
    picard_tol: float = 1e-10
    max_picard_iters: int = 60
    window_shrink: float = 0.5
    initial_window: float | None = None  # None means the whole horizon
    initial_guess: str = "orbit"
    mu: float = 0.0

    def __post_init__(self):
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if not 0 < self.window_shrink < 1:
            raise ValueError("window_shrink must lie in (0, 1)")
        if self.max_picard_iters < 1:
            raise ValueError("max_picard_iters must be >= 1")
        if self.initial_guess not in ("orbit", "zero"):
            raise ValueError("initial_guess must be 'orbit' or 'zero'")
        if self.initial_window is not None and not self.initial_window > 0:
            raise ValueError("initial_window must be positive")


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n+1, N)
    problem: Problem
    level: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def op(self) -> SpectralOperator:
        return self.problem.operator

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])

    def state(self, n: int) -> State:
        return State(self.states[n], self.op)

    def norms(self, alpha: float) -> np.ndarray:
        return norms_alpha(self.op, self.states, alpha)

    def increments(self) -> np.ndarray:
        return self.problem.increments(self.level)

    def to_csv(self, filename, mu: float = 0.0) -> None:
        cols = [self.norms(0.0), self.norms(self.problem.alpha), self.norms(1.0),
                self.norms(1.0 + mu)]
        lines = ["t,norm_0,norm_alpha,norm_1,norm_1mu"]
        for n, t in enumerate(self.times.tolist()):
            lines.append(",".join(repr(v) for v in [t] + [float(c[n]) for c in cols]))
        with open(filename, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    def states_to_csv(self, filename) -> None:
        lines = ["i,t,k,coeff"]
        for i, t in enumerate(self.times.tolist()):
            for k, c in enumerate(self.states[i].tolist(), start=1):
                lines.append(f"{i},{t!r},{k},{c!r}")
        with open(filename, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _window_map(problem: Problem, guess: np.ndarray, dx: np.ndarray, step: float) -> np.ndarray:
    """Gamma on one window; ``guess`` rows are the window nodes, ``dx`` its increments."""
    op = problem.operator
    w = dx.shape[1]
    y_a = guess[0]
    c = problem.forcing(guess[:w], dx)
    out = np.empty_like(guess)
    out[0] = y_a
    out[1:] = (op.semigroup_factors(step * np.arange(1, w + 1)) * y_a
               + exp_recursion(np.exp(op.eigenvalues * step), c))
    return out


def picard_map(problem: Problem, y_guess: Trajectory, window: tuple[int, int]) -> Trajectory:
    """One application of Gamma on the node window ``(ia, ib)``; other nodes are copied."""
    ia, ib = window
    if not 0 <= ia < ib < y_guess.times.size:
        raise ValueError(f"empty or invalid window {window}")
    dx = problem.increments(y_guess.level)[:, ia:ib]
    states = y_guess.states.copy()
    states[ia: ib + 1] = _window_map(problem, y_guess.states[ia: ib + 1], dx, y_guess.step)
    return Trajectory(y_guess.times, states, problem, y_guess.level, dict(y_guess.diagnostics))


def _sup_alpha(op, diff, alpha):
    return float(norms_alpha(op, diff, alpha).max())


def _iterate_window(problem: Problem, y_a: np.ndarray, dx: np.ndarray, step: float,
                    config: SolverConfig):
    op = problem.operator
    w = dx.shape[1]
    if config.initial_guess == "orbit":
        guess = np.vstack((y_a, op.semigroup_factors(step * np.arange(1, w + 1)) * y_a))
    else:
        guess = np.zeros((w + 1, op.dim))
        guess[0] = y_a
    changes = []
    ratios = []
    for it in range(1, config.max_picard_iters + 1):
        new = _window_map(problem, guess, dx, step)
        change = _sup_alpha(op, new - guess, problem.alpha)
        guess = new
        changes.append(change)
        if len(changes) >= 2:
            ratios.append(change / changes[-2] if changes[-2] > 0 else 0.0)
        if change <= config.picard_tol:
            return guess, {"iterations": it, "changes": changes, "ratios": ratios}
        if it >= 3 and ratios and ratios[-1] >= 1.0:
            return None, {"iterations": it, "changes": changes, "ratios": ratios,
                          "failure": "no_contraction"}
    return None, {"iterations": config.max_picard_iters, "changes": changes, "ratios": ratios,
                  "failure": "max_iterations"}


def solve_mild(problem: Problem, config: SolverConfig) -> Trajectory:
    """Mild solution on the level-``config.level`` grid by windowed Picard iteration."""
    level = config.level
    if level > problem.max_level:
        raise ValueError(f"drivers sampled at level {problem.max_level} < solver level {level}")
    n = 2**level
    T = problem.horizon
    h = T / n
    times = T * np.arange(n + 1) / n
    dx_all = problem.increments(level)
    states = np.empty((n + 1, problem.operator.dim))
    states[0] = problem.psi.coeffs

    x_norm = max(float(np.abs(np.diff(d.values)).max()) for d in problem.drivers)
    if config.initial_window is None or x_norm == 0.0:
        width = n
    else:
        width = max(1, min(n, int(round(config.initial_window / h))))
    windows = []
    ia = 0
    while ia < n:
        while True:
            ib = min(n, ia + width)
            seg, info = _iterate_window(problem, states[ia], dx_all[:, ia:ib], h, config)
            if seg is not None:
                break
            new_width = int(width * config.window_shrink)
            windows.append({"start": float(times[ia]), "end": float(times[ib]),
                            "accepted": False, **info})
            if new_width < 4:
                raise SolverError(
                    f"window shrank below 4 steps at t={times[ia]:.6g}",
                    diagnostics={"windows": windows, "t": float(times[ia])})
            width = new_width
        states[ia: ib + 1] = seg
        windows.append({"start": float(times[ia]), "end": float(times[ib]),
                        "accepted": True, **info})
        ia = ib
    diag = {"windows": windows, "picard_tol": config.picard_tol, "mu": config.mu}
    return Trajectory(times, states, problem, level, diag)


def phi_iterate(r: float, n: int, M: float = 1.0) -> float:
    """n-fold composition of phi(r) = 2 M r + 1."""
    for _ in range(n):
        r = 2.0 * M * r + 1.0
        if not math.isfinite(r):
            return math.inf
    return r


def semigroup_constant(op: SpectralOperator, alpha: float, horizon: float,
                       n_times: int = 257) -> float:
    """sup over t in (0, T] of the largest ratio |(S(t) - I) e_k|_0 / (t**alpha |e_k|_alpha)."""
    t = horizon * np.logspace(-12, 0, n_times, base=2.0)
    lam = np.abs(op.eigenvalues)
    ratio = -np.expm1(-np.multiply.outer(t, lam)) / (t[:, None] ** alpha * (1 + lam) ** alpha)
    return float(ratio.max())


def fit_convolution_constant(op: SpectralOperator, drivers, alpha: float,
                             level: int | None = None, seeds=(0, 1, 2), n_lags: int = 6) -> float:
    """Empirical constant in ||I_Sf||_{eta|alpha} <= C [x]_eta (||hat f||_{alpha|0} + ||f||_alpha).

    Test fields are f(t) = g(t) v with v random and g a rescaled copy of the
    driver; the ratio is maximised over seeds and dyadic lags.
    """
    from .young import convolution_path, dyadic_lags, hat_lag_profile
    from .spectral import random_states

    best = 0.0
    for x in drivers:
        lv = x.level if level is None else level
        xs = x.at_level(lv)
        h = xs.step
        dx = np.diff(xs.values)
        xn = holder_seminorm(xs, x.eta_nominal)
        if xn == 0.0:
            continue
        lags = dyadic_lags(dx.size)[:n_lags]
        for seed in seeds:
            v = random_states(op, 1, decay=1.0, seed=seed)[0]
            g = np.cos(3.0 * xs.values + seed)
            fv = g[:, None] * v
            P = convolution_path(op, fv, dx, h)
            num = np.max(hat_lag_profile(op, P, h, lags, alpha) / (lags * h) ** x.eta_nominal)
            fhat = np.max(hat_lag_profile(op, fv, h, lags, 0.0) / (lags * h) ** alpha)
            fsup = norms_alpha(op, fv, alpha).max()
            best = max(best, num / (xn * (fhat + fsup)))
    return best


def apriori_bound(problem: Problem, holder_norm_x: float | None = None,
                  conv_constant: float | None = None, growth_constant: float | None = None,
                  lipschitz: float | None = None) -> dict:
    """Bound on sup_t |y(t)|_alpha following the windowed Gronwall recipe.

    The constant c = C_conv (L + L_alpha)(2 + C_{alpha,0,T}) uses fitted values
    for C_conv and L_alpha when not given.  Returns a dict with the bound and
    its ingredients; the bound is ``inf`` when the iterated phi overflows.  The
    driver enters through its eta-Hölder seminorm, so a constant driver gives one window.
    """
    op = problem.operator
    a = problem.alpha
    eta = problem.eta
    T = problem.horizon
    if holder_norm_x is None:
        holder_norm_x = max(holder_seminorm(d, eta) for d in problem.drivers)
    if holder_norm_x < 0:
        raise ValueError("holder_norm_x must be nonnegative")
    if conv_constant is None:
        conv_constant = fit_convolution_constant(op, problem.drivers, a,
                                                 level=min(problem.max_level, 10))
    if growth_constant is None:
        growth_constant = max(fit_growth_constant(op, s, a) for s in problem.sigma_list)
    if lipschitz is None:
        lipschitz = max(_lipschitz(op, s) for s in problem.sigma_list)
    c_alpha0 = semigroup_constant(op, a, T)
    m = len(problem.drivers)
    frak_c = m * conv_constant * (lipschitz + growth_constant) * (2.0 + c_alpha0)
    M = 1.0
    psi_norm = float(norms_alpha(op, problem.psi.coeffs, a))
    if holder_norm_x == 0.0 or frak_c == 0.0:
        t_bar = math.inf
        n_win = 1
    else:
        t_bar = (2.0 * frak_c * (1.0 + T**a) * holder_norm_x) ** (-1.0 / (eta - a))
        n_win = max(1, math.ceil(T / t_bar))
    phi_n = phi_iterate(psi_norm, n_win, M)
    phi_n1 = phi_iterate(phi_n, 1, M)
    tail = 0.0 if math.isinf(t_bar) else t_bar ** (-a) * (1.0 + M) * phi_n
    bound = phi_n + max(phi_n1, tail)
    return {"bound": bound, "t_bar": t_bar, "n_windows": n_win, "frak_c": frak_c,
            "conv_constant": conv_constant, "growth_constant": growth_constant,
            "lipschitz": lipschitz, "c_alpha0": c_alpha0, "holder_norm_x": holder_norm_x,
            "psi_norm": psi_norm}


def _lipschitz(op, sigma) -> float:
    if isinstance(sigma, Nemytskii):
        u = np.linspace(-50, 50, 20001)
        return float(np.abs(sigma.sigma_hat.derivative(u)).max())
    if isinstance(sigma, ConstantField):
        return 0.0
    return 1.0


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z with the removable singularity filled."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def cell_interpolant(traj: Trajectory, u: np.ndarray, modes=None) -> np.ndarray:
    """Continuous-time state at times ``u`` (restricted to ``modes``).

    On cell k the state follows the exact flow of y' = Ay + c_k / h started
    at y_k, i.e. the driver is linearly interpolated across the cell.
    """
    op = traj.op
    modes = slice(None) if modes is None else modes
    lam = op.eigenvalues[modes]
    h = traj.step
    n = traj.times.size - 1
    u = np.asarray(u, dtype=float)
    k = np.clip(np.floor(u / h).astype(int), 0, n - 1)
    tau = u - traj.times[k]
    c = _forcing_cache(traj)[:, modes]
    z = np.multiply.outer(tau, lam)
    e = np.exp(z)
    return e * traj.states[k][:, modes] + c[k] * (tau / h)[:, None] * _phi1(z)


def _forcing_cache(traj: Trajectory) -> np.ndarray:
    cache = traj.diagnostics.get("_forcing")
    if cache is None:
        n = traj.times.size - 1
        cache = traj.problem.forcing(traj.states[:n], traj.increments())
        traj.diagnostics["_forcing"] = cache
    return cache


def integral_residuals(problem: Problem, traj: Trajectory) -> np.ndarray:
    """|y(t_n) - psi - int_0^t Ay - sum_i int_0^t sigma_i(y) dx_i|_0 for every node.

    The Bochner integral integrates the cell interpolant exactly per mode; the
    Young integrals are left-point sums on the solver grid.
    """
    op = problem.operator
    h = traj.step
    c = _forcing_cache(traj)
    z = op.eigenvalues * h
    a = np.exp(z)
    # int over the cell of A y(t_k + tau) = (a - 1) y_k + c_k (phi1(z) - 1)
    drift = (a - 1.0) * traj.states[:-1] + c * (_phi1(z) - 1.0)
    n = traj.times.size - 1
    zero = np.zeros((1, op.dim))
    bochner = np.concatenate((zero, np.cumsum(drift, axis=0)))
    young = np.concatenate((zero, np.cumsum(c, axis=0)))
    res = traj.states - problem.psi.coeffs - bochner - young
    return np.linalg.norm(res, axis=1)[: n + 1]


def integral_residual(problem: Problem, traj: Trajectory, t_index: int) -> float:
    if t_index <= 0 or t_index >= traj.times.size:
        raise ValueError(f"t_index must lie in [1, {traj.times.size - 1}]")
    return float(integral_residuals(problem, traj)[t_index])


def regularity_slope(traj: Trajectory, mu: float, window: tuple[float, float]) -> float:
    """Least-squares slope of log|y(t)|_{1+mu} against log t over nodes in ``window``.

    Nodes below 2**(3 - L) T are excluded.
    """
    eta_alpha = traj.problem.eta + traj.problem.alpha
    if not 0.0 <= mu < eta_alpha - 1.0:
        raise ValueError(f"mu must lie in [0, {eta_alpha - 1.0:.4f})")
    t_min, t_max = window
    if not 0 < t_min < t_max <= traj.times[-1]:
        raise ValueError(f"window {window} must lie in (0, T]")
    cut = traj.times[-1] * 2.0 ** (3 - traj.level)
    t = traj.times
    sel = (t >= max(t_min, cut) * (1 - 1e-12)) & (t <= t_max * (1 + 1e-12))
    if sel.sum() < 8:
        raise ValueError(f"only {int(sel.sum())} nodes in the probe window, need 8")
    norms = norms_alpha(traj.op, traj.states[sel], 1.0 + mu)
    return float(np.polyfit(np.log(t[sel]), np.log(norms), 1)[0])
