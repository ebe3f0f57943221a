"""Diagonal generators, their semigroups, fractional-power norms and Nemytskii maps.

The generator A acts diagonally on an orthonormal eigenbasis with eigenvalues
``lam_k <= 0``.  States are coefficient vectors in that basis.  For the
Dirichlet sine basis a pointwise nonlinearity is evaluated on the interior
collocation grid through the orthonormal type-I discrete sine transform.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.fft import dst

__all__ = [
    "SpectralOperator",
    "State",
    "apply_semigroup",
    "apply_generator",
    "norm_alpha",
    "norms_alpha",
    "SigmaHat",
    "parse_sigma_hat",
    "Nemytskii",
    "ConstantField",
    "nemytskii_apply",
    "fit_growth_constant",
    "write_state_csv",
    "read_state_csv",
]

BASIS_KINDS = ("dirichlet_sine", "diagonal_custom")
_DENSE_DST_MAX = 1024


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """Self-adjoint nonpositive generator given by its spectrum."""

    eigenvalues: np.ndarray
    basis_kind: str = "diagonal_custom"
    domain_length: float = math.pi

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float).ravel()
        if lam.size < 1:
            raise ValueError("operator needs at least one mode")
        if not np.all(np.isfinite(lam)) or np.any(lam > 0):
            raise ValueError("eigenvalues must be finite and nonpositive")
        if self.basis_kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.basis_kind!r}")
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def dirichlet_sine(cls, n_modes: int = 256, domain_length: float = math.pi):
        """Dirichlet Laplacian on (0, domain_length); ``lam_k = -k**2`` when the length is pi."""
        if n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        k = np.arange(1, n_modes + 1, dtype=float)
        return cls(-(k * math.pi / domain_length) ** 2, "dirichlet_sine", domain_length)

    @classmethod
    def diagonal(cls, eigenvalues):
        return cls(np.atleast_1d(np.asarray(eigenvalues, dtype=float)), "diagonal_custom")

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def lam_max(self) -> float:
        return float(np.abs(self.eigenvalues).max())

    def weights(self, alpha: float) -> np.ndarray:
        """Per-mode weights ``(1 + |lam_k|)**alpha`` of the X_alpha norm."""
        return (1.0 + np.abs(self.eigenvalues)) ** alpha

    def semigroup_factors(self, t) -> np.ndarray:
        """``exp(lam_k t)``; for array ``t`` the result has shape ``t.shape + (N,)``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("semigroup time must be nonnegative")
        return np.exp(np.multiply.outer(t, self.eigenvalues))

    def collocation_points(self) -> np.ndarray:
        n = self.dim
        return self.domain_length * np.arange(1, n + 1) / (n + 1)

    @cached_property
    def _dst_matrix(self) -> np.ndarray:
        # symmetric and orthogonal; a dense product beats the FFT when N + 1 is prime
        return dst(np.eye(self.dim), type=1, norm="ortho", axis=0)

    def _dst(self, a: np.ndarray) -> np.ndarray:
        if self.dim <= _DENSE_DST_MAX:
            return np.asarray(a, dtype=float) @ self._dst_matrix
        return dst(a, type=1, norm="ortho", axis=-1)

    def to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients to collocation values along the last axis."""
        if self.basis_kind == "diagonal_custom":
            return np.array(coeffs, dtype=float)
        return math.sqrt((self.dim + 1) / self.domain_length) * self._dst(coeffs)

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        if self.basis_kind == "diagonal_custom":
            return np.array(values, dtype=float)
        return math.sqrt(self.domain_length / (self.dim + 1)) * self._dst(values)

    def header(self) -> str:
        return f"# kind={self.basis_kind} N={self.dim} domain_length={self.domain_length!r}"

    def state(self, coeffs) -> "State":
        return State(coeffs, self)

    def basis_vector(self, k: int) -> "State":
        """The k-th eigenvector, 1-based as in ``e_1, e_2, ...``."""
        if not 1 <= k <= self.dim:
            raise ValueError(f"mode {k} outside 1..{self.dim}")
        c = np.zeros(self.dim)
        c[k - 1] = 1.0
        return State(c, self)

    def zero(self) -> "State":
        return State(np.zeros(self.dim), self)


@dataclass(frozen=True, eq=False)
class State:
    """Element of X stored as eigenbasis coefficients."""

    coeffs: np.ndarray
    op: SpectralOperator

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size != self.op.dim:
            raise ValueError(f"state has {c.size} coefficients, operator has {self.op.dim} modes")
        if not np.all(np.isfinite(c)):
            raise ValueError("state coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def _check(self, other: "State"):
        if other.op is not self.op:
            raise ValueError("states belong to different operators")

    def __add__(self, other: "State") -> "State":
        self._check(other)
        return State(self.coeffs + other.coeffs, self.op)

    def __sub__(self, other: "State") -> "State":
        self._check(other)
        return State(self.coeffs - other.coeffs, self.op)

    def __mul__(self, scalar: float) -> "State":
        return State(self.coeffs * float(scalar), self.op)

    __rmul__ = __mul__

    def __neg__(self) -> "State":
        return State(-self.coeffs, self.op)

    def inner(self, other: "State") -> float:
        self._check(other)
        return float(self.coeffs @ other.coeffs)

    def grid_values(self) -> np.ndarray:
        return self.op.to_grid(self.coeffs)


def _check_member(op: SpectralOperator, v: State):
    if v.op is not op:
        raise ValueError("state does not belong to this operator")


def apply_semigroup(op: SpectralOperator, t: float, v: State) -> State:
    """S(t)v, i.e. ``exp(lam_k t) * v_k`` per mode."""
    _check_member(op, v)
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    if t == 0:
        return v
    return State(np.exp(op.eigenvalues * t) * v.coeffs, op)


def apply_generator(op: SpectralOperator, v: State) -> State:
    _check_member(op, v)
    return State(op.eigenvalues * v.coeffs, op)


def _check_alpha(alpha: float):
    if not 0.0 <= alpha < 2.0:
        raise ValueError(f"alpha must lie in [0, 2), got {alpha}")


def norms_alpha(op: SpectralOperator, coeffs: np.ndarray, alpha: float) -> np.ndarray:
    """X_alpha norms of coefficient arrays along the last axis."""
    _check_alpha(alpha)
    return np.sqrt(np.sum((op.weights(alpha) * coeffs) ** 2, axis=-1))


def norm_alpha(op: SpectralOperator, v: State, alpha: float) -> float:
    _check_member(op, v)
    return float(norms_alpha(op, v.coeffs, alpha))


# pointwise maps u -> sigma_hat(u)
SIGMA_KINDS = {"tanh_scaled": 1, "affine": 2, "constant": 1}


@dataclass(frozen=True)
class SigmaHat:
    """Scalar function applied pointwise: tanh_scaled(a), affine(p, q) or constant(c)."""

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in SIGMA_KINDS:
            raise ValueError(f"unknown sigma_hat kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != SIGMA_KINDS[self.kind]:
            raise ValueError(f"{self.kind} takes {SIGMA_KINDS[self.kind]} parameter(s)")
        if self.kind == "tanh_scaled" and not params[0] > 0:
            raise ValueError("tanh_scaled needs a positive scale")
        object.__setattr__(self, "params", params)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "tanh_scaled":
            a = self.params[0]
            return a * np.tanh(u / a)
        if self.kind == "affine":
            p, q = self.params
            return p * u + q
        return np.full_like(u, self.params[0], dtype=float)

    def derivative(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "tanh_scaled":
            return 1.0 / np.cosh(u / self.params[0]) ** 2
        if self.kind == "affine":
            return np.full_like(u, self.params[0], dtype=float)
        return np.zeros_like(u, dtype=float)

    def __str__(self):
        return f"{self.kind}({','.join(f'{p:g}' for p in self.params)})"


_SIGMA_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^)]*)\)\s*$")


def parse_sigma_hat(text: str) -> SigmaHat:
    """Parse strings such as ``tanh_scaled(1)`` or ``affine(1, 0)``."""
    m = _SIGMA_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse sigma_hat {text!r}")
    args = [a for a in m.group(2).split(",") if a.strip()]
    return SigmaHat(m.group(1), tuple(float(a) for a in args))


class Nemytskii:
    """sigma(v) = sigma_hat o v evaluated by collocation, vectorised over leading axes."""

    def __init__(self, op: SpectralOperator, sigma_hat: SigmaHat):
        self.op = op
        self.sigma_hat = sigma_hat

    def __call__(self, coeffs: np.ndarray) -> np.ndarray:
        op = self.op
        if self.sigma_hat.kind == "constant":
            # evaluated once, independent of the state
            const = op.from_grid(np.full(op.dim, self.sigma_hat.params[0]))
            return np.broadcast_to(const, np.shape(coeffs)).copy()
        return op.from_grid(self.sigma_hat(op.to_grid(coeffs)))

    def __str__(self):
        return str(self.sigma_hat)


class ConstantField:
    """sigma(v) = c for a fixed state c."""

    def __init__(self, value: State):
        self.op = value.op
        self.value = value

    def __call__(self, coeffs: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.value.coeffs, np.shape(coeffs)).copy()

    def __str__(self):
        return "constant_state"


def nemytskii_apply(op: SpectralOperator, sigma_hat: SigmaHat, v: State) -> State:
    _check_member(op, v)
    if op.basis_kind != "dirichlet_sine":
        raise ValueError(f"no collocation transform for basis kind {op.basis_kind!r}")
    return State(Nemytskii(op, sigma_hat)(v.coeffs), op)


def random_states(op: SpectralOperator, n: int, decay: float = 1.0,
                  scale: float = 1.0, seed: int = 0) -> np.ndarray:
    """Random coefficient rows with ``|c_k| ~ scale * k**-decay``."""
    rng = np.random.default_rng(seed)
    k = np.arange(1, op.dim + 1, dtype=float)
    return scale * rng.standard_normal((n, op.dim)) * k**-decay


def fit_growth_constant(op: SpectralOperator, sigma, alpha: float, n_samples: int = 200,
                        seed: int = 0, decay: float = 1.0, scale: float = 3.0) -> float:
    """Smallest L with ``|sigma(v)|_alpha <= L (1 + |v|_alpha)`` over random states."""
    if isinstance(sigma, SigmaHat):
        sigma = Nemytskii(op, sigma)
    v = random_states(op, n_samples, decay, scale, seed)
    num = norms_alpha(op, sigma(v), alpha)
    den = 1.0 + norms_alpha(op, v, alpha)
    return float(np.max(num / den))


def write_state_csv(v: State, filename) -> None:
    lines = [v.op.header(), "k,coeff"]
    lines += [f"{k},{c!r}" for k, c in enumerate(v.coeffs.tolist(), start=1)]
    with open(filename, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_state_csv(filename, op: SpectralOperator) -> State:
    data = np.loadtxt(filename, delimiter=",", comments="#", skiprows=2, ndmin=2)
    return State(data[:, 1], op)
