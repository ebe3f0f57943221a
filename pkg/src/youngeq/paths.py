"""Scalar Hölder driver paths sampled on uniform dyadic grids.

Generators return :class:`HolderPath` objects holding the grid, the sampled
values and a nominal Hölder exponent in (1/2, 1].  Fractional Brownian motion
is sampled exactly through the Cholesky factor of the fractional Gaussian
noise covariance; the circulant embedding sampler is kept as an independent
cross-check.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "HolderPath",
    "dyadic_grid",
    "fgn_autocovariance",
    "fgn_cholesky",
    "fbm_values",
    "fbm_values_circulant",
    "generate_fbm",
    "generate_analytic",
    "weierstrass_values",
    "holder_seminorm",
    "holder_norm",
    "mollify",
    "write_path_csv",
    "read_path_csv",
]

# Cholesky sampling is used up to this level, circulant embedding beyond.
MAX_CHOLESKY_LEVEL = 14
FBM_ETA_MARGIN = 0.01


def dyadic_grid(level: int, horizon: float = 1.0) -> np.ndarray:
    """Uniform grid on [0, horizon] with ``2**level + 1`` nodes."""
    if level < 0:
        raise ValueError(f"level must be non-negative, got {level}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    n = 2**level
    return horizon * (np.arange(n + 1, dtype=float) / n)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _level_of(n_nodes: int) -> int:
    n = n_nodes - 1
    if n < 1 or n & (n - 1):
        raise ValueError(f"grid must have 2**L + 1 nodes, got {n_nodes}")
    return n.bit_length() - 1


@dataclass(frozen=True, eq=False)
class HolderPath:
    """A scalar driver sampled on a dyadic grid over [0, T]."""

    times: np.ndarray
    values: np.ndarray
    eta_nominal: float
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = _frozen(self.times)
        values = _frozen(self.values)
        if times.ndim != 1 or values.shape != times.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        _level_of(times.size)
        if times[0] != 0.0:
            raise ValueError("grid must start at 0")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise ValueError("times must be strictly increasing")
        h = times[-1] / (times.size - 1)
        if not np.allclose(steps, h, rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        if not 0.5 < self.eta_nominal <= 1.0:
            raise ValueError(f"eta_nominal must lie in (1/2, 1], got {self.eta_nominal}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def level(self) -> int:
        return _level_of(self.times.size)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def step(self) -> float:
        return self.horizon / (self.times.size - 1)

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def at_level(self, level: int) -> "HolderPath":
        """Restriction to the coarser dyadic grid of the given level."""
        if level > self.level:
            raise ValueError(f"cannot refine a sampled path from level {self.level} to {level}")
        if level == self.level:
            return self
        stride = 2 ** (self.level - level)
        return HolderPath(self.times[::stride], self.values[::stride], self.eta_nominal,
                          self.label, self.meta)


def fgn_autocovariance(hurst: float, n: int) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags 0..n-1."""
    k = np.arange(n, dtype=float)
    two_h = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** two_h - 2.0 * k**two_h + np.abs(k - 1) ** two_h)


def fgn_cholesky(gamma: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Apply the Cholesky factor of the Toeplitz matrix ``gamma`` to ``z``.

    The factor is never formed: the Durbin-Levinson recursion produces the
    innovations representation ``x_k = sum_j phi_kj x_{k-j} + sqrt(v_k) z_k``,
    which is the unique lower-triangular factor with positive diagonal.
    """
    n = z.size
    x = np.empty(n)
    phi = np.zeros(n)
    v = gamma[0]
    x[0] = math.sqrt(v) * z[0]
    for k in range(1, n):
        # order-k partial autocorrelation
        a = (gamma[k] - phi[: k - 1] @ gamma[k - 1:0:-1]) / v
        phi[: k - 1] = phi[: k - 1] - a * phi[k - 2::-1] if k > 1 else phi[:0]
        phi[k - 1] = a
        v *= 1.0 - a * a
        x[k] = phi[:k] @ x[k - 1::-1] + math.sqrt(v) * z[k]
    return x


def _check_hurst(hurst: float):
    if not 0.5 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (1/2, 1), got {hurst}")
    if hurst - FBM_ETA_MARGIN <= 0.5:
        raise ValueError(
            f"hurst={hurst} leaves no Hölder exponent above 1/2 after the {FBM_ETA_MARGIN} margin")


def fbm_values(hurst: float, level: int, horizon: float = 1.0, seed: int = 0) -> np.ndarray:
    """fBm samples on the dyadic grid via exact Cholesky sampling (any hurst in (0, 1))."""
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    n = 2**level
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    noise = fgn_cholesky(fgn_autocovariance(hurst, n), z)
    scale = (horizon / n) ** hurst
    return np.concatenate(([0.0], np.cumsum(noise) * scale))


def fbm_values_circulant(hurst: float, level: int, horizon: float = 1.0,
                         seed: int = 0) -> np.ndarray:
    """fBm samples via circulant embedding of the noise covariance (Davies-Harte)."""
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    n = 2**level
    gamma = fgn_autocovariance(hurst, n + 1)
    row = np.concatenate((gamma, gamma[-2:0:-1]))
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        raise ValueError("circulant embedding is not non-negative definite")
    eig = np.clip(eig, 0.0, None)
    m = row.size
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    noise = np.fft.fft(np.sqrt(eig / m) * w)[:n].real
    scale = (horizon / n) ** hurst
    return np.concatenate(([0.0], np.cumsum(noise) * scale))


def generate_fbm(hurst: float, level: int, horizon: float = 1.0, seed: int = 0,
                 method: str = "auto") -> HolderPath:
    """One fractional Brownian motion path with ``x(0) = 0``.

    ``method`` is ``"cholesky"``, ``"circulant"`` or ``"auto"`` (Cholesky up to
    level 14, circulant embedding above).  The nominal exponent is
    ``hurst - 0.01``.
    """
    _check_hurst(hurst)
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if method == "auto":
        method = "cholesky" if level <= MAX_CHOLESKY_LEVEL else "circulant"
    if method == "cholesky":
        values = fbm_values(hurst, level, horizon, seed)
    elif method == "circulant":
        values = fbm_values_circulant(hurst, level, horizon, seed)
    else:
        raise ValueError(f"unknown fBm method {method!r}")
    meta = {"kind": "fbm", "params": {"hurst": hurst, "method": method}, "seed": seed}
    return HolderPath(dyadic_grid(level, horizon), values, hurst - FBM_ETA_MARGIN,
                      label=f"fbm(H={hurst}, seed={seed})", meta=meta)


def weierstrass_values(t: np.ndarray, b: float, q: float, amplitude: float = 1.0,
                       horizon: float = 1.0, terms: int | None = None) -> np.ndarray:
    """Weierstrass-type sum ``amplitude * sum_n b**n sin(2 pi q**n t / horizon)``."""
    if terms is None:
        # resolve frequencies up to the grid spacing
        n_nodes = max(t.size - 1, 1)
        terms = max(1, int(math.ceil(math.log(n_nodes) / math.log(q))) + 1)
    out = np.zeros_like(t, dtype=float)
    for n in range(terms):
        out += b**n * np.sin(2.0 * math.pi * q**n * t / horizon)
    return amplitude * out


def generate_analytic(kind: str, params: dict | None = None, level: int = 10,
                      horizon: float = 1.0) -> HolderPath:
    """Closed-form driver sampled on the dyadic grid.

    Kinds and parameters:

    * ``constant``: ``c``
    * ``linear``: ``slope``, optional ``intercept``
    * ``sine``: ``amplitude``, ``frequency`` (cycles per unit time), ``phase``
    * ``weierstrass``: ``b`` in (0, 1), ``q`` > 1, optional ``amplitude``, ``terms``
    * ``power``: ``x(t) = amplitude * t**exponent`` with exponent in (1/2, 1]
    """
    params = dict(params or {})
    t = dyadic_grid(level, horizon)
    eta = 1.0
    if kind == "constant":
        values = np.full_like(t, float(params.get("c", 0.0)))
    elif kind == "linear":
        values = float(params.get("intercept", 0.0)) + float(params.get("slope", 1.0)) * t
    elif kind == "sine":
        amp = float(params.get("amplitude", 1.0))
        freq = float(params.get("frequency", 1.0))
        phase = float(params.get("phase", 0.0))
        values = amp * np.sin(2.0 * math.pi * freq * t + phase)
    elif kind == "weierstrass":
        b = float(params["b"])
        q = float(params["q"])
        if not 0.0 < b < 1.0 or not q > 1.0 or not b * q > 1.0:
            raise ValueError("weierstrass needs 0 < b < 1, q > 1 and b*q > 1")
        eta = -math.log(b) / math.log(q)
        if eta <= 0.5:
            raise ValueError(f"weierstrass exponent {eta:.4f} does not exceed 1/2")
        terms = params.get("terms")
        values = weierstrass_values(t, b, q, float(params.get("amplitude", 1.0)), horizon,
                                    None if terms is None else int(terms))
    elif kind == "power":
        p = float(params.get("exponent", 1.0))
        if not 0.5 < p <= 1.0:
            raise ValueError(f"power exponent must lie in (1/2, 1], got {p}")
        eta = p
        values = float(params.get("amplitude", 1.0)) * t**p
    else:
        raise ValueError(f"unknown analytic path kind {kind!r}")
    meta = {"kind": kind, "params": params, "seed": None}
    return HolderPath(t, values, eta, label=kind, meta=meta)


def _lag_range(n_nodes: int, max_lag: int) -> range:
    if not 1 <= max_lag <= n_nodes - 1:
        raise ValueError(f"max_lag must lie in [1, {n_nodes - 1}], got {max_lag}")
    return range(1, max_lag + 1)


def holder_seminorm(path: HolderPath, eta: float, max_lag: int | None = None) -> float:
    """Discrete eta-Hölder seminorm: max over node pairs with lag <= max_lag."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    x = path.values
    if max_lag is None:
        max_lag = x.size - 1
    h = path.step
    best = 0.0
    for lag in _lag_range(x.size, max_lag):
        d = np.abs(x[lag:] - x[:-lag]).max()
        best = max(best, d / (lag * h) ** eta)
    return float(best)


def holder_norm(path: HolderPath, eta: float | None = None, max_lag: int | None = None) -> float:
    """``sup |x| + [x]_eta``, the C^eta norm used by the a-priori estimates."""
    eta = path.eta_nominal if eta is None else eta
    return float(np.abs(path.values).max()) + holder_seminorm(path, eta, max_lag)


def mollify(path: HolderPath, scale: float) -> HolderPath:
    """Moving average of half-width ``scale``.

    Past each end the path is continued by odd reflection about its end value,
    so both end values are kept, linear paths are reproduced exactly and the
    averaging bias on smooth paths is second order up to the boundary.
    """
    if not scale > 0:
        raise ValueError(f"mollification scale must be positive, got {scale}")
    if scale > path.horizon / 4:
        raise ValueError(f"scale {scale} exceeds horizon/4")
    m = int(round(scale / path.step))
    meta = dict(path.meta)
    meta["mollify_scale"] = scale
    label = f"{path.label} * avg({scale:g})"
    if m == 0:
        return HolderPath(path.times, path.values, 1.0, label, meta)
    padded = np.pad(path.values, m, mode="reflect", reflect_type="odd")
    csum = np.concatenate(([0.0], np.cumsum(padded)))
    width = 2 * m + 1
    smooth = (csum[width:] - csum[:-width]) / width
    return HolderPath(path.times, smooth, 1.0, label, meta)


def write_path_csv(path: HolderPath, filename) -> Path:
    """Write ``t,x`` rows and a JSON sidecar ``<filename>.meta.json``."""
    filename = Path(filename)
    lines = ["t,x"]
    lines += [f"{t!r},{x!r}" for t, x in zip(path.times.tolist(), path.values.tolist())]
    filename.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    meta = {
        "kind": path.meta.get("kind"),
        "params": path.meta.get("params"),
        "seed": path.meta.get("seed"),
        "eta_nominal": path.eta_nominal,
        "label": path.label,
    }
    sidecar = filename.with_name(filename.name + ".meta.json")
    sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return filename


def read_path_csv(filename) -> HolderPath:
    filename = Path(filename)
    data = np.loadtxt(filename, delimiter=",", skiprows=1, ndmin=2)
    sidecar = filename.with_name(filename.name + ".meta.json")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    return HolderPath(data[:, 0], data[:, 1], float(meta["eta_nominal"]),
                      meta.get("label", ""),
                      {k: meta.get(k) for k in ("kind", "params", "seed")})
