import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import cholesky, toeplitz

from youngeq.paths import (HolderPath, fbm_values_circulant, fgn_autocovariance, fgn_cholesky,
                           generate_analytic, generate_fbm, holder_seminorm, mollify,
                           read_path_csv, write_path_csv)


def test_hurst_gate():
    with pytest.raises(ValueError):
        generate_fbm(0.5, 8)
    # 0.51 leaves eta = 0.5 after the margin
    with pytest.raises(ValueError):
        generate_fbm(0.51, 8)
    with pytest.raises(ValueError):
        generate_fbm(1.0, 8)
    with pytest.raises(ValueError):
        generate_fbm(0.8, 8, horizon=0.0)


def test_fbm_metadata_and_determinism():
    a = generate_fbm(0.75, 10, seed=3)
    b = generate_fbm(0.75, 10, seed=3)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.values[0] == 0.0
    assert a.eta_nominal == pytest.approx(0.74)
    assert a.level == 10 and a.horizon == 1.0
    assert not np.array_equal(a.values, generate_fbm(0.75, 10, seed=4).values)


def test_durbin_levinson_matches_dense_cholesky():
    gamma = fgn_autocovariance(0.8, 64)
    z = np.random.default_rng(1).standard_normal(64)
    dense = cholesky(toeplitz(gamma), lower=True) @ z
    np.testing.assert_allclose(fgn_cholesky(gamma, z), dense, atol=1e-13)


def _batch(hurst, level, n_seeds, method="cholesky"):
    if method == "cholesky":
        return np.array([generate_fbm(hurst, level, seed=s).values for s in range(n_seeds)])
    return np.array([fbm_values_circulant(hurst, level, seed=s) for s in range(n_seeds)])


def test_fbm_variance_monte_carlo():
    paths = _batch(0.75, 4, 10_000)
    assert paths[:, -1].var() == pytest.approx(1.0, rel=0.05)


def test_fbm_increment_moments():
    paths = _batch(0.75, 4, 10_000)
    t = np.linspace(0, 1, 17)
    for i, j in [(0, 4), (3, 11), (8, 16)]:
        m2 = np.mean((paths[:, j] - paths[:, i]) ** 2)
        assert m2 == pytest.approx((t[j] - t[i]) ** 1.5, rel=0.05)


def test_circulant_oracle_has_fbm_covariance():
    paths = _batch(0.8, 4, 10_000, method="circulant")
    t = np.linspace(0, 1, 17)
    cov = np.cov(paths[:, 1:].T)
    s, u = np.meshgrid(t[1:], t[1:])
    exact = 0.5 * (s**1.6 + u**1.6 - np.abs(s - u) ** 1.6)
    assert np.abs(cov - exact).max() < 0.05


def test_analytic_paths():
    c = generate_analytic("constant", {"c": 3.0}, level=6)
    assert np.all(c.values == 3.0) and np.all(np.diff(c.values) == 0.0)
    lin = generate_analytic("linear", {"slope": 2.0}, level=6)
    np.testing.assert_array_equal(lin.values, 2.0 * lin.times)
    assert lin.eta_nominal == 1.0
    with pytest.raises(ValueError):
        generate_analytic("weierstrass", {"b": 0.6, "q": 4.0}, level=6)
    with pytest.raises(ValueError):
        generate_analytic("weierstrass", {"b": 0.25, "q": 4.0}, level=8)
    w = generate_analytic("weierstrass", {"b": 0.3, "q": 4.0}, level=8)
    assert w.eta_nominal == pytest.approx(-math.log(0.3) / math.log(4.0))
    w = generate_analytic("weierstrass", {"b": 0.5, "q": 3.0}, level=8)
    assert w.eta_nominal == pytest.approx(math.log(2) / math.log(3))
    p = generate_analytic("power", {"exponent": 0.8}, level=8)
    assert p.eta_nominal == 0.8 and p.values[-1] == pytest.approx(1.0)


def test_holder_path_validation():
    t = np.linspace(0, 1, 9)
    with pytest.raises(ValueError):
        HolderPath(t, t, 0.5)
    with pytest.raises(ValueError):
        HolderPath(np.linspace(0, 1, 10), np.zeros(10), 0.8)
    bad = t.copy()
    bad[3] += 0.01
    with pytest.raises(ValueError):
        HolderPath(bad, t, 0.8)
    with pytest.raises(ValueError):
        HolderPath(t, np.full(9, np.nan), 0.8)


def test_holder_seminorm_examples():
    c = generate_analytic("constant", {"c": 1.5}, level=8)
    assert holder_seminorm(c, 0.7) == 0.0
    lin = generate_analytic("linear", {"slope": 1.0}, level=8)
    assert holder_seminorm(lin, 1.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        holder_seminorm(lin, 1.2)
    with pytest.raises(ValueError):
        holder_seminorm(lin, 0.5, max_lag=0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 1000), lag=st.integers(1, 63))
def test_holder_seminorm_monotone_in_lag(seed, lag):
    x = generate_fbm(0.7, 6, seed=seed)
    assert holder_seminorm(x, 0.6, lag) <= holder_seminorm(x, 0.6, lag + 1)


def test_fbm_seminorm_stable_across_levels():
    x = generate_fbm(0.8, 14, seed=0)
    values = [holder_seminorm(x.at_level(L), 0.79) for L in range(10, 15)]
    assert max(values) / min(values) <= 2.0


def test_mollify_examples():
    lin = generate_analytic("linear", {"slope": 1.0}, level=8)
    sm = mollify(lin, lin.step)
    np.testing.assert_allclose(sm.values, lin.values, atol=1e-15)
    assert sm.eta_nominal == 1.0
    c = generate_analytic("constant", {"c": -2.0}, level=8)
    np.testing.assert_array_equal(mollify(c, 0.1).values, c.values)
    x = generate_fbm(0.8, 8)
    sm = mollify(x, 0.1)
    assert sm.values[0] == pytest.approx(x.values[0], abs=1e-14)
    assert sm.values[-1] == pytest.approx(x.values[-1], abs=1e-14)
    with pytest.raises(ValueError):
        mollify(lin, 0.3)


def test_mollify_sup_distance_non_increasing():
    x = generate_fbm(0.75, 12, seed=0)
    d = [np.abs(mollify(x, 2.0**-k).values - x.values).max() for k in range(4, 10)]
    for a, b in zip(d, d[1:]):
        assert b <= 1.05 * a


def test_mollify_contracts_seminorm():
    x = generate_fbm(0.8, 10, seed=2)
    for delta in (2.0**-4, 2.0**-6, 2.0**-8):
        for eta in (0.6, 0.79):
            assert holder_seminorm(mollify(x, delta), eta) <= 1.1 * holder_seminorm(x, eta)


def test_csv_roundtrip(tmp_path):
    x = generate_fbm(0.8, 6, seed=5)
    f = write_path_csv(x, tmp_path / "p.csv")
    assert f.read_text().startswith("t,x\n")
    y = read_path_csv(f)
    np.testing.assert_array_equal(x.values, y.values)
    np.testing.assert_array_equal(x.times, y.times)
    assert y.eta_nominal == x.eta_nominal and y.meta["seed"] == 5
