"""Numbered acceptance criteria; each test records one PASS/FAIL line in the terminal summary."""
from pathlib import Path

import numpy as np
import pytest

from youngeq.cli import main
from youngeq.instances import (ALPHA, default_battery, default_problem, rough_psi, scalar_exact,
                               scalar_problem)
from youngeq.paths import generate_analytic, generate_fbm, weierstrass_values
from youngeq.solver import (Problem, SolverConfig, apriori_bound, integral_residuals,
                            regularity_slope, solve_mild)
from youngeq.spectral import ConstantField, SigmaHat, SpectralOperator, apply_semigroup, norm_alpha
from youngeq.verifiers import (ChainRuleSpec, InvarianceSpec, chain_rule_residual,
                               invariance_statistic, smooth_approx_convergence)
from youngeq.young import (SampledField, convolution_path, hat_delta1, self_convergence,
                           young_convolution, young_integral)

pytestmark = pytest.mark.acceptance

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture(scope="module")
def op():
    return SpectralOperator.dirichlet_sine(256)


@pytest.fixture(scope="module")
def x12():
    return generate_fbm(0.8, 12, seed=0)


def random_field(op, x, seed):
    rng = np.random.default_rng(seed)
    k = np.arange(1, op.dim + 1)
    v, w = rng.standard_normal((2, op.dim)) * k**-1.0
    vals = np.outer(np.cos(3 * x.values), v) + np.outer(np.sin(x.times), w)
    return SampledField(x.times, vals, op, x.eta_nominal)


def test_c01_young_integral_exactness(criterion, x12):
    f = SampledField.constant(x12.times, 1.7)
    rng = np.random.default_rng(0)
    worst_const = worst_chasles = 0.0
    g = SampledField(x12.times, np.sin(x12.values), None, x12.eta_nominal)
    for _ in range(100):
        i, k, j = np.sort(rng.choice(x12.times.size, 3, replace=False))
        exact = 1.7 * (x12.values[j] - x12.values[i])
        worst_const = max(worst_const, rel(young_integral(f, x12, i, j), exact))
        whole = young_integral(g, x12, i, j)
        worst_chasles = max(worst_chasles, rel(young_integral(g, x12, i, k)
                                               + young_integral(g, x12, k, j), whole))
    ok = worst_const <= 1e-12 and worst_chasles <= 1e-12
    criterion(1, ok, f"constant rel err {worst_const:.2e}, additivity rel err {worst_chasles:.2e}"
                     " (tol 1e-12)")
    assert ok


def test_c02_convergence_order(criterion):
    x = generate_fbm(0.8, 16, seed=0, method="circulant")
    b, q = 4.0**-ALPHA, 4.0
    f = SampledField(x.times, weierstrass_values(x.times, b, q, 1.0, 1.0, None), None, ALPHA)
    n = x.times.size - 1
    _, order = self_convergence(lambda lv: young_integral(f, x, 0, n, refine_to=lv),
                                range(6, 14), 16)
    need = x.eta_nominal + ALPHA - 1 - 0.1
    ok = order >= need
    criterion(2, ok, f"fitted order {order:.3f} >= {need:.3f}")
    assert ok


def test_c03_splitting_identity(criterion, op, x12):
    f = random_field(op, x12, 1)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        s, tau, t = np.sort(rng.choice(x12.times.size, 3, replace=False))
        whole = young_convolution(op, f, x12, s, t)
        split = (apply_semigroup(op, x12.times[t] - x12.times[tau],
                                 young_convolution(op, f, x12, s, tau))
                 + young_convolution(op, f, x12, tau, t))
        worst = max(worst, norm_alpha(op, whole - split, 0) / norm_alpha(op, whole, 0))
    ok = worst <= 1e-11
    criterion(3, ok, f"max rel defect {worst:.2e} over 100 triples (tol 1e-11)")
    assert ok


def test_c04_anchored_increment_identity(criterion, op, x12):
    g = random_field(op, x12, 2)
    P = convolution_path(op, g.values, np.diff(x12.values), x12.step)
    anchored = SampledField(x12.times, P, op)
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        s, t = np.sort(rng.choice(x12.times.size, 2, replace=False))
        lhs = hat_delta1(op, anchored, s, t)
        rhs = young_convolution(op, g, x12, s, t)
        worst = max(worst, norm_alpha(op, lhs - rhs, 0) / norm_alpha(op, rhs, 0))
    ok = worst <= 1e-10
    criterion(4, ok, f"max rel defect {worst:.2e} (tol 1e-10)")
    assert ok


def test_c05_closed_form_solve(criterion):
    errs = {}
    for driver in ("smooth", "fbm"):
        p = scalar_problem(driver, level=12)
        traj = solve_mild(p, SolverConfig(level=12))
        exact = scalar_exact(p, 12)
        errs[driver] = float(np.max(np.abs(traj.states[:, 0] - exact) / np.abs(exact)))
    ok = errs["smooth"] <= 1e-3 and errs["fbm"] <= 1e-2
    criterion(5, ok, f"rel err smooth {errs['smooth']:.2e} (tol 1e-3), "
                     f"fBm {errs['fbm']:.2e} (tol 1e-2)")
    assert ok


def test_c06_sigma_independent_solve(criterion, op, x12):
    psi = rough_psi(op)
    p0 = Problem(op, [SigmaHat("constant", (0.0,))], [x12], psi, ALPHA)
    traj = solve_mild(p0, SolverConfig(level=12))
    orbit = op.semigroup_factors(traj.times) * psi.coeffs
    err0 = float(np.abs(traj.states - orbit).max())
    pc = Problem(op, [SigmaHat("constant", (0.5,))], [x12], psi, ALPHA)
    traj = solve_mild(pc, SolverConfig(level=12))
    changes = traj.diagnostics["windows"][-1]["changes"]
    ok = err0 <= 1e-12 and len(changes) >= 2 and changes[1] <= 1e-12
    criterion(6, ok, f"constant(0) err {err0:.2e}; constant(c) second-iteration change "
                     f"{changes[1]:.2e} (tol 1e-12)")
    assert ok


def test_c07_apriori_bound(criterion):
    lines = []
    ok = True
    for name, p in default_battery(12).items():
        traj = solve_mild(p, SolverConfig(level=12))
        sup = float(traj.norms(p.alpha).max())
        bound = apriori_bound(p)["bound"]
        ok &= sup <= bound
        lines.append(f"{name} {sup:.3g}<={bound:.3g}")
    criterion(7, ok, "; ".join(lines))
    assert ok


def test_c08_blow_up_rate(criterion):
    p = default_problem(level=14, psi="rough")
    traj = solve_mild(p, SolverConfig(level=14))
    slope = regularity_slope(traj, 0.0, (2.0**-11, 2.0**-5))
    need = p.eta + p.alpha - 2 - 0.1
    ok = slope >= need
    criterion(8, ok, f"slope {slope:.3f} >= {need:.3f} (level 14)")
    assert ok


def test_c09_integral_residual(criterion):
    p = default_problem(level=14)
    res = {}
    for lv in (10, 12, 14):
        res[lv] = float(integral_residuals(p, solve_mild(p, SolverConfig(level=lv))).max())
    monotone = res[12] <= 1.1 * res[10] and res[14] <= 1.1 * res[12]
    ok = res[12] <= 1e-4 and monotone
    criterion(9, ok, "max residual " + ", ".join(f"L{k} {v:.2e}" for k, v in res.items())
              + " (tol 1e-4 at L12)")
    assert ok


def test_c10_smooth_approximation(criterion):
    p = default_problem(level=12)
    rep = smooth_approx_convergence(p, SolverConfig(level=12), [2.0**-k for k in range(4, 10)])
    notes = []
    ok = True
    for name, values in rep.metrics().items():
        mono = all(b <= 1.15 * a for a, b in zip(values, values[1:]))
        final = values[-1] <= 10 * rep.floor[name]
        ok &= mono and final
        notes.append(f"{name} monotone={mono} final {values[-1]:.2e} vs 10x floor "
                     f"{10 * rep.floor[name]:.2e}")
    criterion(10, ok, "; ".join(notes))
    assert ok


def test_c11_chain_rule(criterion, op):
    scalar = {}
    for lv in (10, 12, 14):
        p = scalar_problem("fbm", level=14)
        traj = solve_mild(p, SolverConfig(level=lv))
        spec = ChainRuleSpec("quadratic_form", p.operator.basis_vector(1), lam=0.0)
        scalar[lv] = chain_rule_residual(traj, spec, 0, 2**lv)
    p = scalar_problem("smooth", level=12)
    smooth = chain_rule_residual(solve_mild(p, SolverConfig(level=12)),
                                 ChainRuleSpec("quadratic_form", p.operator.basis_vector(1)),
                                 0, 4096)
    ps = Problem(op, [SigmaHat("constant", (0.0,))], [generate_fbm(0.8, 12)], rough_psi(op), ALPHA)
    spectral = chain_rule_residual(solve_mild(ps, SolverConfig(level=12)),
                                   ChainRuleSpec("inner_linear", op.basis_vector(1)), 0, 4096)
    eta = 0.79
    need = 0.7 * 2 ** (2 * 0.5 * (eta + 1.0 - 1))  # two levels per step, 30% slack
    refine = min(scalar[10] / scalar[12], scalar[12] / scalar[14])
    ok = smooth <= 1e-3 and spectral <= 1e-3 and refine >= need
    criterion(11, ok, f"scalar x^2 {smooth:.2e}, spectral linear {spectral:.2e} (tol 1e-3); "
                      f"fBm refinement factor {refine:.2f} >= {need:.2f} per two levels")
    assert ok


def test_c12_invariance_falsifier(criterion, op):
    x = generate_analytic("power", {"exponent": 0.8}, level=12)
    phi = op.basis_vector(1)
    betas, lambdas = (0.8, 0.9, 1.0), (0.1, 1.0, 10.0, 100.0)
    spec = InvarianceSpec(phi, betas, lambdas)

    def report(sigma_state):
        p = Problem(op, [ConstantField(sigma_state)], [x], op.basis_vector(2), ALPHA)
        return invariance_statistic(solve_mild(p, SolverConfig(level=12)), spec)

    tangent = report(op.basis_vector(2))
    violating = report(phi)
    consistent = bool(np.all(tangent.statistic <= tangent.statistic_tol))
    at_eta = float(violating.statistic[0].min())
    ok = consistent and at_eta >= 0.4
    criterion(12, ok, f"tangent max {tangent.statistic.max():.2e} <= tol "
                      f"{tangent.statistic_tol:.2e}; violating at beta=eta {at_eta:.3f} >= 0.4")
    assert ok


RUNS = [
    (["generate-path"], "generate_path.cfg"),
    (["integrate"], "integrate.cfg"),
    (["solve"], "solve_default.cfg"),
    (["solve"], "solve_zero_sigma.cfg"),
    (["convergence"], "convergence_scalar.cfg"),
    (["convergence"], "convergence_integral.cfg"),
    (["verify", "chain-rule"], "chain_rule.cfg"),
    (["verify", "invariance"], "invariance_violating.cfg"),
    (["verify", "smooth-approx"], "smooth_approx.cfg"),
]


def test_c13_determinism(criterion, tmp_path):
    mismatched = []
    for verb, cfg in RUNS:
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cfg}-{rep}"
            assert main(verb + ["--config", str(CONFIGS / cfg), "--out", str(out)]) == 0
            outs.append(out)
        names = sorted(f.name for f in outs[0].glob("*.csv"))
        for name in names:
            if (outs[0] / name).read_bytes() != (outs[1] / name).read_bytes():
                mismatched.append(f"{cfg}:{name}")
    ok = not mismatched
    criterion(13, ok, f"{len(RUNS)} experiments rerun, mismatches: {mismatched or 'none'}")
    assert ok
