"""Reference problem instances shared by the tests, the CLI and the examples in the README."""
from __future__ import annotations

import numpy as np

from .paths import generate_analytic, generate_fbm
from .solver import Problem
from .spectral import SigmaHat, SpectralOperator, State

ALPHA = 0.3
HURST = 0.8
N_MODES = 256
SMOOTH_DRIVER = {"amplitude": 0.5, "frequency": 1.0}


def rough_psi(op: SpectralOperator, alpha: float = ALPHA, gap: float = 0.1) -> State:
    """Coefficients (-1)**k k**(-2 alpha - 0.5 - gap): in X_alpha but not in X_{alpha + gap}."""
    k = np.arange(1, op.dim + 1, dtype=float)
    return op.state((-1.0) ** k * k ** (-2 * alpha - 0.5 - gap))


def default_problem(level: int = 12, seed: int = 0, n_modes: int = N_MODES,
                    psi: str = "smooth") -> Problem:
    """tanh_scaled(1) noise, fBm driver with H = 0.8, alpha = 0.3, Dirichlet sine modes."""
    op = SpectralOperator.dirichlet_sine(n_modes)
    x = generate_fbm(HURST, level, seed=seed)
    datum = op.basis_vector(1) if psi == "smooth" else rough_psi(op)
    return Problem(op, [SigmaHat("tanh_scaled", (1.0,))], [x], datum, ALPHA)


def scalar_problem(driver: str = "smooth", level: int = 12, lam: float = -1.0,
                   psi: float = 1.0, seed: int = 0) -> Problem:
    """dy = lam y dt + y dx on a one-mode space; exact solution psi exp(lam t + x(t) - x(0))."""
    op = SpectralOperator.diagonal([lam])
    if driver == "smooth":
        x = generate_analytic("sine", SMOOTH_DRIVER, level=level)
    else:
        x = generate_fbm(HURST, level, seed=seed)
    return Problem(op, [SigmaHat("affine", (1.0, 0.0))], [x], op.state([psi]), ALPHA)


def scalar_exact(problem: Problem, level: int) -> np.ndarray:
    x = problem.drivers[0].at_level(level)
    lam = problem.operator.eigenvalues[0]
    return problem.psi.coeffs[0] * np.exp(lam * x.times + x.values - x.values[0])


def default_battery(level: int = 12, seed: int = 0, n_modes: int = N_MODES) -> dict:
    """Six instances covering nonlinear, additive, linear, pure-semigroup, scalar and two-driver cases."""
    op = SpectralOperator.dirichlet_sine(n_modes)
    x = generate_fbm(HURST, level, seed=seed)
    e1 = op.basis_vector(1)
    rough = rough_psi(op)
    tanh = SigmaHat("tanh_scaled", (1.0,))
    return {
        "tanh_fbm": Problem(op, [tanh], [x], e1, ALPHA),
        "additive_fbm": Problem(op, [SigmaHat("constant", (0.5,))], [x], e1, ALPHA),
        "linear_rough": Problem(op, [SigmaHat("affine", (0.5, 0.0))], [x], rough, ALPHA),
        "pure_semigroup": Problem(op, [SigmaHat("constant", (0.0,))], [x], rough, ALPHA),
        "scalar_smooth": scalar_problem("smooth", level),
        "two_drivers": Problem(op, [tanh, SigmaHat("affine", (0.3, 0.0))],
                               [generate_fbm(HURST, level, seed=seed + 1),
                                generate_fbm(0.75, level, seed=seed + 2)], e1, ALPHA),
    }
