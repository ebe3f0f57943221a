"""Checks built on solver output: smooth-driver approximation, chain rule, half-space invariance.

Scalar time integrals of the continuous-time state use composite Gauss-Legendre
quadrature of the cell interpolant from :func:`youngeq.solver.cell_interpolant`.
Panels follow the grid cells, are refined so that ``|lam| * width <= 1`` on the
modes that matter, and are graded towards ``t = 0`` when integrating from the
initial time.  The difference between 8- and 4-point rules is reported as the
quadrature floor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .paths import mollify
from .solver import Problem, SolverConfig, Trajectory, cell_interpolant, solve_mild
from .spectral import State, norms_alpha
from .young import dyadic_lags, hat_lag_profile, integral_path

__all__ = [
    "SmoothApproxReport",
    "smooth_approx_convergence",
    "ChainRuleSpec",
    "ChainRuleResult",
    "chain_rule_residual",
    "InvarianceSpec",
    "InvarianceReport",
    "invariance_statistic",
    "gauss_integrate",
]

GRADED_POINTS = 64
_EVAL_CHUNK = 1 << 16


def _write_rows(filename, header: str, rows) -> None:
    lines = [header] + [",".join(v if isinstance(v, str) else repr(v) for v in r) for r in rows]
    with open(filename, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------- quadrature

def _panels(traj: Trajectory, a_idx: int, b_idx: int, lam_max: float, graded: bool):
    """Panel edges on [t_a, t_b] and the grid cell each panel belongs to."""
    h = traj.step
    edges = traj.times[a_idx: b_idx + 1]
    if graded and a_idx == 0:
        p = traj.problem
        theta = p.eta + p.alpha - 1.0
        t_end = traj.times[b_idx]
        g = t_end * (np.arange(1, GRADED_POINTS) / GRADED_POINTS) ** (1.0 / theta)
        edges = np.union1d(edges, g)
    widths = np.diff(edges)
    pieces = np.maximum(1, np.ceil(lam_max * widths)).astype(int)
    left = np.repeat(edges[:-1], pieces)
    sub = np.concatenate([np.arange(m) for m in pieces]) if pieces.size else np.array([])
    w = np.repeat(widths / pieces, pieces)
    left = left + sub * w
    mid = left + 0.5 * w
    cell = np.clip(np.floor(mid / h).astype(int), a_idx, b_idx - 1)
    return left, w, cell


def gauss_integrate(traj: Trajectory, integrand, a_idx: int, b_idx: int, modes,
                    graded: bool = False, order: int = 8) -> np.ndarray:
    """Per-cell integrals of ``integrand(u, p_coeffs)`` over cells a..b-1.

    ``p_coeffs`` holds the interpolated state restricted to ``modes`` at the
    nodes ``u``; the integrand returns one value per node.
    """
    lam = traj.op.eigenvalues[modes]
    lam_max = float(np.abs(lam).max()) if lam.size else 0.0
    left, w, cell = _panels(traj, a_idx, b_idx, lam_max, graded)
    x, wt = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    wt = 0.5 * wt
    out = np.zeros(b_idx - a_idx)
    for start in range(0, left.size, max(1, _EVAL_CHUNK // order)):
        sl = slice(start, start + max(1, _EVAL_CHUNK // order))
        u = (left[sl, None] + w[sl, None] * x[None, :]).ravel()
        y = cell_interpolant(traj, u, modes)
        vals = integrand(u, y).reshape(-1, order) @ wt * w[sl]
        out += np.bincount(cell[sl] - a_idx, weights=vals, minlength=out.size)
    return out


def _support(phi: State) -> np.ndarray:
    return np.flatnonzero(phi.coeffs)


# ------------------------------------------------------------ smooth approx

@dataclass
class SmoothApproxReport:
    scales: np.ndarray
    dist_sup: np.ndarray
    dist_hat: np.ndarray
    dist_J: np.ndarray
    floor: dict = field(default_factory=dict)

    def rows(self):
        return [(float(s), float(a), float(b), float(c))
                for s, a, b, c in zip(self.scales, self.dist_sup, self.dist_hat, self.dist_J)]

    def to_csv(self, filename) -> None:
        _write_rows(filename, "scale,dist_sup,dist_hat,dist_J", self.rows())

    def metrics(self) -> dict:
        return {"dist_sup": self.dist_sup, "dist_hat": self.dist_hat, "dist_J": self.dist_J}


def _metrics(problem: Problem, y_a: np.ndarray, y_b: np.ndarray, J_a: np.ndarray,
             J_b: np.ndarray, step: float):
    op = problem.operator
    a = problem.alpha
    d = y_a - y_b
    lags = dyadic_lags(d.shape[0] - 1)
    hat = float(np.max(hat_lag_profile(op, d, step, lags, a) / (lags * step) ** a))
    return (float(norms_alpha(op, d, a).max()), hat,
            float(np.linalg.norm(J_a - J_b, axis=1).max()))


def _young_path(problem: Problem, traj: Trajectory) -> np.ndarray:
    dx = traj.increments()
    n = dx.shape[1]
    out = np.zeros_like(traj.states)
    for sigma, inc in zip(problem.sigma_list, dx):
        out += integral_path(sigma(traj.states[:n]), inc)
    return out


def smooth_approx_convergence(problem: Problem, config: SolverConfig, mollify_scales,
                              with_floor: bool = True) -> SmoothApproxReport:
    """Distances between the solution and solutions driven by mollified drivers.

    For each scale the drivers are replaced by moving averages and the problem
    is re-solved at the same level.  The floor is the same set of distances
    between the level-L and level-(L-1) solutions, on the coarse nodes.
    """
    scales = np.asarray(mollify_scales, dtype=float)
    base = solve_mild(problem, config)
    J = _young_path(problem, base)
    h = base.step
    sup, hat, dJ = [], [], []
    for delta in scales:
        drivers = [mollify(d, float(delta)) for d in problem.drivers]
        approx = problem.with_drivers(drivers)
        try:
            traj = solve_mild(approx, config)
        except Exception as exc:
            exc.args = (f"scale {delta:g}: {exc}",) + exc.args[1:]
            raise
        m = _metrics(problem, traj.states, base.states, _young_path(approx, traj), J, h)
        sup.append(m[0])
        hat.append(m[1])
        dJ.append(m[2])
    floor = {}
    if with_floor and config.level >= 3:
        coarse_cfg = SolverConfig(config.level - 1, config.picard_tol, config.max_picard_iters,
                                  config.window_shrink, config.initial_window,
                                  config.initial_guess, config.mu)
        coarse = solve_mild(problem, coarse_cfg)
        m = _metrics(problem, coarse.states, base.states[::2], _young_path(problem, coarse),
                     J[::2], 2 * h)
        floor = {"dist_sup": m[0], "dist_hat": m[1], "dist_J": m[2]}
    return SmoothApproxReport(scales, np.array(sup), np.array(hat), np.array(dJ), floor)


# --------------------------------------------------------------- chain rule

CHAIN_KINDS = ("quadratic_form", "inner_linear", "time_weighted")


@dataclass(frozen=True, eq=False)
class ChainRuleSpec:
    """F(t, y) depending on y only through p = <phi, y>.

    quadratic_form: (lam + p)_+^2; inner_linear: p; time_weighted: (1 + t)**weight p.
    ``alpha_F`` and ``gamma_F`` are the declared Hölder exponents of F_x.
    """

    kind: str
    phi: State
    lam: float = 0.0
    weight: float = 1.0
    alpha_F: float = 1.0
    gamma_F: float = 1.0

    def __post_init__(self):
        if self.kind not in CHAIN_KINDS:
            raise ValueError(f"unknown chain-rule kind {self.kind!r}")

    def F(self, t, p):
        if self.kind == "quadratic_form":
            return np.maximum(self.lam + p, 0.0) ** 2
        if self.kind == "inner_linear":
            return p
        return (1.0 + t) ** self.weight * p

    def F_t(self, t, p):
        if self.kind == "time_weighted":
            return self.weight * (1.0 + t) ** (self.weight - 1.0) * p
        return np.zeros_like(np.asarray(p, dtype=float))

    def gradient_scale(self, t, p):
        """g with F_x(t, y) = g * phi."""
        if self.kind == "quadratic_form":
            return 2.0 * np.maximum(self.lam + p, 0.0)
        if self.kind == "inner_linear":
            return np.ones_like(np.asarray(p, dtype=float))
        return (1.0 + t) ** self.weight * np.ones_like(np.asarray(p, dtype=float))


@dataclass
class ChainRuleResult:
    residual: float
    lhs: float
    drift: float
    young: float
    quadrature_floor: float


def chain_rule_residual(traj: Trajectory, spec: ChainRuleSpec, s_index: int, t_index: int,
                        detail: bool = False):
    """|F(t, y(t)) - F(s, y(s)) - int F_t - int <F_x, Ay> - sum_i int <F_x, sigma_i(y)> dx_i|."""
    n = traj.times.size - 1
    if not 0 <= s_index < t_index <= n:
        raise ValueError(f"need 0 <= s_index < t_index <= {n}")
    problem = traj.problem
    if problem.eta + spec.alpha_F * spec.gamma_F <= 1.0:
        raise ValueError("eta + alpha_F * gamma_F must exceed 1")
    op = traj.op
    modes = _support(spec.phi)
    phi = spec.phi.coeffs[modes]
    lam = op.eigenvalues[modes]

    def integrand(u, y):
        p = y @ phi
        q = y @ (lam * phi)
        return spec.F_t(u, p) + spec.gradient_scale(u, p) * q

    graded = s_index == 0
    hi = gauss_integrate(traj, integrand, s_index, t_index, modes, graded, order=8)
    lo = gauss_integrate(traj, integrand, s_index, t_index, modes, graded, order=4)
    drift = float(hi.sum())

    ts = traj.times
    p_nodes = traj.states[:, modes] @ phi
    g = spec.gradient_scale(ts[s_index:t_index], p_nodes[s_index:t_index])
    dx = traj.increments()[:, s_index:t_index]
    young = 0.0
    for sigma, inc in zip(problem.sigma_list, dx):
        sig_phi = sigma(traj.states[s_index:t_index]) @ spec.phi.coeffs
        young += float(np.sum(g * sig_phi * inc))
    lhs = float(spec.F(ts[t_index], p_nodes[t_index]) - spec.F(ts[s_index], p_nodes[s_index]))
    res = abs(lhs - drift - young)
    if detail:
        return ChainRuleResult(res, lhs, drift, young, float(abs(hi.sum() - lo.sum())))
    return res


# ---------------------------------------------------------------- invariance

@dataclass(frozen=True, eq=False)
class InvarianceSpec:
    """Half-space K = {<x, phi> <= 0} probed right after ``t0_index``."""

    phi: State
    betas: tuple
    lambdas: tuple
    eps_phi: float = 0.0
    t0_index: int = 0
    t_probe: float = 2.0**-4

    def __post_init__(self):
        if not 0.0 <= self.eps_phi < 1.0:
            raise ValueError("eps_phi must lie in [0, 1)")
        if not self.betas or not self.lambdas:
            raise ValueError("need at least one beta and one lambda")
        if any(l <= 0 for l in self.lambdas):
            raise ValueError("lambdas must be positive")
        if not self.t_probe > 0:
            raise ValueError("t_probe must be positive")


@dataclass
class InvarianceReport:
    betas: np.ndarray
    lambdas: np.ndarray
    statistic: np.ndarray  # shape (len(betas), len(lambdas))
    cell_tol: np.ndarray
    statistic_tol: float
    probe_window: tuple
    quadrature_floor: float

    def verdict(self, b: int, l: int) -> str:
        return "consistent" if self.statistic[b, l] <= self.statistic_tol else "violation"

    def rows(self):
        out = []
        for b, beta in enumerate(self.betas):
            for l, lam in enumerate(self.lambdas):
                out.append((float(beta), float(lam), float(self.statistic[b, l]),
                            self.verdict(b, l)))
        return out

    def to_csv(self, filename) -> None:
        _write_rows(filename, "beta,lambda,statistic,verdict", self.rows())


def invariance_statistic(traj: Trajectory, spec: InvarianceSpec) -> InvarianceReport:
    """Finite-grid proxy of the limsup conditions for invariance of K.

    For every probe node t in (t0, t0 + t_probe] the bracket

        int_{t0}^t (lam + <phi, y>)_+ / lam * <phi, Ay> ds
            + sum_i <phi, sigma_i(y(t0))> (x_i(t) - x_i(t0))

    is scaled by (t - t0)**-beta and maximised over t.
    """
    problem = traj.problem
    eta = problem.eta
    for beta in spec.betas:
        if not eta - 1e-12 <= beta <= 1.0:
            raise ValueError(f"beta={beta} outside [eta, 1]")
    op = traj.op
    ts = traj.times
    i0 = spec.t0_index
    t0 = ts[i0]
    y0 = traj.states[i0]
    phi_all = spec.phi.coeffs
    p0 = float(phi_all @ y0)
    boundary_tol = 1e-8 * np.linalg.norm(phi_all) * np.linalg.norm(y0)
    if abs(p0) > boundary_tol:
        raise ValueError(f"state at t0 is off the boundary: <phi, y> = {p0:.3e}")
    last = int(np.searchsorted(ts, t0 + spec.t_probe * (1 + 1e-12), side="right")) - 1
    if last <= i0:
        raise ValueError("probe window holds no grid node")
    probe = np.arange(i0 + 1, last + 1)
    dt = ts[probe] - t0

    drive = np.zeros(probe.size)
    for sigma, d in zip(problem.sigma_list, problem.drivers):
        xs = d.at_level(traj.level).values
        drive += float(sigma(y0[None, :])[0] @ phi_all) * (xs[probe] - xs[i0])

    modes = _support(spec.phi)
    phi = phi_all[modes]
    lam_modes = op.eigenvalues[modes]
    betas = np.asarray(spec.betas, dtype=float)
    lambdas = np.asarray(spec.lambdas, dtype=float)
    stat = np.empty((betas.size, lambdas.size))
    tol = np.empty_like(stat)
    eps = np.finfo(float).eps
    floor = 0.0
    for l, lam in enumerate(lambdas):
        def integrand(u, y, lam=lam):
            p = y @ phi
            return np.maximum(lam + p, 0.0) / lam * (y @ (lam_modes * phi))

        if modes.size:
            hi = gauss_integrate(traj, integrand, i0, last, modes, graded=i0 == 0, order=8)
            lo = gauss_integrate(traj, integrand, i0, last, modes, graded=i0 == 0, order=4)
        else:
            hi = lo = np.zeros(last - i0)
        bochner = np.cumsum(hi)
        err = np.abs(np.cumsum(hi - lo))
        bracket = bochner + drive
        scale = np.abs(bochner) + np.abs(drive)
        floor = max(floor, float(err.max()))
        for b, beta in enumerate(betas):
            w = dt ** -beta
            stat[b, l] = float(np.max(w * bracket))
            tol[b, l] = float(np.max(w * (10.0 * err + 64.0 * eps * scale)))
    return InvarianceReport(betas, lambdas, stat, tol, float(tol.max()),
                            (float(t0), float(ts[last])), floor)
