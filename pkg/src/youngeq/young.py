"""Left-point Young sums, semigroup convolutions and two-parameter increments.

A :class:`SampledField` is a function of time sampled on a dyadic grid,
either scalar (values of shape ``(n+1,)``) or X-valued (``(n+1, N)`` eigen
coefficients of a :class:`SpectralOperator`).  All integrals are left-point
Riemann sums over a dyadic partition, so identities such as additivity and
splitting hold exactly whenever both sides use the same partition.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .paths import HolderPath, _level_of
from .spectral import SpectralOperator, State, norms_alpha

__all__ = [
    "SampledField",
    "TwoParamSample",
    "young_integral",
    "remainder_scalar",
    "young_convolution",
    "convolution_path",
    "exp_recursion",
    "integral_path",
    "hat_delta1",
    "hat_lag_profile",
    "hat_holder_seminorm",
    "dyadic_lags",
    "fit_exponent",
    "fit_order",
    "self_convergence",
]

# rows of the (m, N) semigroup factor matrix built at once
_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class SampledField:
    """f(t) on a dyadic grid; scalar when ``op`` is None."""

    times: np.ndarray
    values: np.ndarray
    op: SpectralOperator | None = None
    alpha: float | None = None  # nominal time-Hölder exponent, used by the gate

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        _level_of(times.size)
        if values.shape[0] != times.size:
            raise ValueError("field values and times differ in length")
        if self.op is None and values.ndim != 1:
            raise ValueError("scalar field needs 1-d values")
        if self.op is not None and values.shape != (times.size, self.op.dim):
            raise ValueError(f"field values must have shape ({times.size}, {self.op.dim})")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_path(cls, path: HolderPath, alpha: float | None = None):
        return cls(path.times, path.values, None, path.eta_nominal if alpha is None else alpha)

    @classmethod
    def constant(cls, times, value, op: SpectralOperator | None = None):
        """Constant field; ``value`` is a float or a State."""
        times = np.asarray(times, dtype=float)
        if isinstance(value, State):
            op = value.op
            vals = np.tile(value.coeffs, (times.size, 1))
        else:
            vals = np.full(times.size, float(value))
        return cls(times, vals, op, 1.0)

    @property
    def level(self) -> int:
        return _level_of(self.times.size)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def step(self) -> float:
        return self.horizon / (self.times.size - 1)

    def state(self, i: int) -> State:
        if self.op is None:
            raise ValueError("scalar field has no states")
        return State(self.values[i], self.op)

    def at_level(self, level: int) -> np.ndarray:
        """Values on the level-``level`` grid: subsampled or linearly interpolated."""
        own = self.level
        if level == own:
            return self.values
        if level < own:
            return self.values[:: 2 ** (own - level)]
        ratio = 2 ** (level - own)
        w = np.arange(ratio) / ratio
        left = self.values[:-1]
        right = self.values[1:]
        if self.values.ndim == 1:
            fine = (left[:, None] * (1 - w) + right[:, None] * w).ravel()
        else:
            fine = (left[:, None, :] * (1 - w)[None, :, None]
                    + right[:, None, :] * w[None, :, None]).reshape(-1, self.values.shape[1])
        return np.concatenate((fine, self.values[-1:]), axis=0)


def _partition(f: SampledField, x: HolderPath, i: int, j: int, refine_to: int | None,
               alpha: float | None):
    """Index range and level-``refine_to`` samples of f and x covering [t_i, t_j]."""
    if not 0 <= i < j < f.times.size:
        raise ValueError(f"need 0 <= i < j <= {f.times.size - 1}, got i={i}, j={j}")
    if not np.isclose(f.horizon, x.horizon, rtol=1e-12, atol=0.0):
        raise ValueError("field and path live on different horizons")
    level = max(f.level, x.level) if refine_to is None else refine_to
    if level > x.level:
        raise ValueError(f"driver sampled at level {x.level}, cannot refine to {level}")
    a = alpha if alpha is not None else f.alpha
    if a is not None and a + x.eta_nominal <= 1.0:
        raise ValueError(f"exponents alpha={a} and eta={x.eta_nominal} do not sum above 1")
    if level >= f.level:
        ratio = 2 ** (level - f.level)
        lo, hi = i * ratio, j * ratio
    else:
        ratio = 2 ** (f.level - level)
        if i % ratio or j % ratio:
            raise ValueError(f"nodes {i}, {j} do not lie on the level-{level} grid")
        lo, hi = i // ratio, j // ratio
    xs = x.at_level(level)
    fv = f.at_level(level)
    dx = np.diff(xs.values[lo: hi + 1])
    times = xs.times[lo: hi + 1]
    return fv[lo:hi], dx, times


def young_integral(f: SampledField, x: HolderPath, i: int, j: int,
                   refine_to: int | None = None, alpha: float | None = None):
    """Left-point sum of f dx over [t_i, t_j] (indices on f's grid).

    Returns a float for scalar fields and a State otherwise.
    """
    fv, dx, _ = _partition(f, x, i, j, refine_to, alpha)
    if f.op is None:
        return float(fv @ dx)
    return State(dx @ fv, f.op)


def remainder_scalar(f: SampledField, x: HolderPath, i: int, j: int,
                     refine_to: int | None = None, alpha: float | None = None):
    """I_f(s, t) - f(s)(x(t) - x(s))."""
    fv, dx, _ = _partition(f, x, i, j, refine_to, alpha)
    if f.op is None:
        return float(fv @ dx - fv[0] * dx.sum())
    return State(dx @ fv - fv[0] * dx.sum(), f.op)


def _convolution_sum(op: SpectralOperator, fv: np.ndarray, dx: np.ndarray,
                     lags: np.ndarray) -> np.ndarray:
    """sum_k exp(lam * lags_k) * fv_k * dx_k in chunks."""
    out = np.zeros(op.dim)
    for start in range(0, dx.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        fac = np.exp(np.multiply.outer(lags[sl], op.eigenvalues))
        out += np.einsum("k,kn,kn->n", dx[sl], fac, fv[sl])
    return out


def young_convolution(op: SpectralOperator, f: SampledField, x: HolderPath, i: int, j: int,
                      refine_to: int | None = None, alpha: float | None = None) -> State:
    """Left-point sum of S(t_j - r_k) f(r_k) dx_k over the partition of [t_i, t_j]."""
    if f.op is not op:
        raise ValueError("field does not belong to this operator")
    if i == j:
        return op.zero()
    fv, dx, times = _partition(f, x, i, j, refine_to, alpha)
    lags = times[-1] - times[:-1]
    return State(_convolution_sum(op, fv, dx, lags), op)


def convolution_path(op: SpectralOperator, fv: np.ndarray, dx: np.ndarray,
                     step: float) -> np.ndarray:
    """P_n = sum_{k<n} S(t_n - t_k) fv_k dx_k for all n, by one-step recursion.

    ``fv`` has shape (n, N) or (n+1, N); ``dx`` has shape (n,).  Returns (n+1, N).
    """
    n = dx.size
    c = fv[:n] * dx[:, None]
    return np.vstack((np.zeros((1, op.dim)), exp_recursion(np.exp(op.eigenvalues * step), c)))


def exp_recursion(decay: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Rows ``acc_{k+1} = decay * (acc_k + c_k)`` with ``acc_0 = 0``, for k = 0..n-1."""
    out = np.empty_like(c, dtype=float)
    for m, d in enumerate(decay):
        out[:, m] = lfilter([d], [1.0, -d], c[:, m])
    return out


def integral_path(fv: np.ndarray, dx: np.ndarray) -> np.ndarray:
    """Cumulative left-point sums J_n = sum_{k<n} fv_k dx_k, with J_0 = 0."""
    n = dx.size
    inc = fv[:n] * (dx if fv.ndim == 1 else dx[:, None])
    return np.concatenate((np.zeros((1,) + fv.shape[1:]), np.cumsum(inc, axis=0)), axis=0)


def hat_delta1(op: SpectralOperator, f: SampledField, i: int, j: int) -> State:
    """f(t_j) - S(t_j - t_i) f(t_i)."""
    if f.op is not op:
        raise ValueError("field does not belong to this operator")
    if not 0 <= i < j < f.times.size:
        raise ValueError(f"need 0 <= i < j, got i={i}, j={j}")
    fac = np.exp(op.eigenvalues * (f.times[j] - f.times[i]))
    return State(f.values[j] - fac * f.values[i], op)


def hat_lag_profile(op: SpectralOperator, values: np.ndarray, step: float, lags,
                    alpha_space: float) -> np.ndarray:
    """For each lag m: max over n of |values[n+m] - S(m h) values[n]|_alpha_space."""
    out = np.empty(len(lags))
    for idx, m in enumerate(lags):
        fac = np.exp(op.eigenvalues * (m * step))
        d = values[m:] - fac * values[:-m]
        out[idx] = norms_alpha(op, d, alpha_space).max()
    return out


def hat_holder_seminorm(op: SpectralOperator, f: SampledField, beta: float,
                        alpha_space: float, max_lag: int | None = None, lags=None) -> float:
    """Discrete ||hat-delta f||_{beta|alpha_space} over pairs with lag <= max_lag.

    ``lags`` restricts the pairs to the given lags (e.g. dyadic ones) on large grids.
    """
    if f.op is not op:
        raise ValueError("field does not belong to this operator")
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    if not 0.0 <= alpha_space < 2.0:
        raise ValueError(f"alpha_space must lie in [0, 2), got {alpha_space}")
    n = f.times.size - 1
    max_lag = n if max_lag is None else max_lag
    if not 1 <= max_lag <= n:
        raise ValueError(f"max_lag must lie in [1, {n}]")
    lags = np.arange(1, max_lag + 1) if lags is None else np.asarray(
        [m for m in lags if 1 <= m <= max_lag], dtype=int)
    prof = hat_lag_profile(op, f.values, f.step, lags, alpha_space)
    return float(np.max(prof / (lags * f.step) ** beta))


def dyadic_lags(n: int, smallest: int = 1) -> np.ndarray:
    lags = []
    m = smallest
    while m <= n:
        lags.append(m)
        m *= 2
    return np.array(lags, dtype=int)


@dataclass
class TwoParamSample:
    """Values v(s, t) on grid pairs i < j."""

    times: np.ndarray
    pairs: np.ndarray  # shape (P, 2)
    values: list
    op: SpectralOperator | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=int).reshape(-1, 2)
        if np.any(self.pairs[:, 0] >= self.pairs[:, 1]):
            raise ValueError("pairs must satisfy i < j")
        if len(self.values) != len(self.pairs):
            raise ValueError("one value per pair")

    @classmethod
    def build(cls, fn, times, pairs, op=None):
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        return cls(np.asarray(times, dtype=float), pairs, [fn(i, j) for i, j in pairs], op)

    def norms(self, alpha: float = 0.0) -> np.ndarray:
        out = []
        for v in self.values:
            if isinstance(v, State):
                out.append(float(norms_alpha(v.op, v.coeffs, alpha)))
            else:
                out.append(abs(float(v)))
        return np.array(out)

    def to_csv(self, filename, alpha: float = 0.0) -> None:
        norms = self.norms(alpha)
        lines = ["i,j,s,t,value_norm"]
        for (i, j), v in zip(self.pairs.tolist(), norms.tolist()):
            lines.append(f"{i},{j},{float(self.times[i])!r},{float(self.times[j])!r},{v!r}")
        with open(filename, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def fit_exponent(scales, values) -> float:
    """Least-squares slope of log(values) against log(scales)."""
    s = np.log(np.asarray(scales, dtype=float))
    v = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(s, v, 1)[0])


def fit_order(levels, errors, drop: int = 2) -> float:
    """Decay order p in ``error ~ 2**(-p*level)``.

    Fits log2(error) against level, discards the ``drop`` levels with the
    largest residuals and refits.  Zero errors are excluded.
    """
    levels = np.asarray(levels, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    levels, logs = levels[keep], np.log2(errors[keep])
    if levels.size < 2:
        return float("inf")
    coef = np.polyfit(levels, logs, 1)
    if drop and levels.size - drop >= 3:
        resid = np.abs(logs - np.polyval(coef, levels))
        sel = np.sort(np.argsort(resid)[: levels.size - drop])
        coef = np.polyfit(levels[sel], logs[sel], 1)
    return float(-coef[0])


def self_convergence(compute, levels, oracle_level: int):
    """Errors |compute(l) - compute(oracle_level)| and the fitted order.

    ``compute`` returns a float or a State; State errors use the X norm.
    """
    ref = compute(oracle_level)
    errors = []
    for level in levels:
        val = compute(level)
        if isinstance(val, State):
            errors.append(float(np.linalg.norm(val.coeffs - ref.coeffs)))
        else:
            errors.append(abs(val - ref))
    errors = np.array(errors)
    return errors, fit_order(levels, errors)
