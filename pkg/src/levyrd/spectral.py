"""Diagonal realization of a positive self-adjoint operator and the norms built on it.

Everything is expressed in the eigenbasis: a field is a coefficient vector
``c`` with ``u(xi) = sum_i c_i e_i(xi)``, the semigroup acts as
``c_i -> exp(-rho_i t) c_i`` and fractional powers as ``c_i -> rho_i^g c_i``.
Coefficient arrays may carry leading batch axes; the mode axis is last.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

INTERP_NODES = 64
INTERP_TMIN = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """Eigenpairs of a positive operator on ``(0, 1)`` sampled on an interior grid.

    Attributes
    ----------
    eigenvalues : (N,) array
        ``rho_i`` of the unshifted operator, nondecreasing.
    shift : float
        Added to every eigenvalue; ``rates = eigenvalues + shift``.
    grid : (M,) array
        Interior quadrature nodes.
    basis : (N, M) array
        ``e_i`` evaluated on ``grid``.
    weight : float
        Quadrature weight, so that ``weight * basis @ basis.T`` is the identity.
    """

    eigenvalues: np.ndarray
    grid: np.ndarray
    basis: np.ndarray
    weight: float
    evaluator: Callable = field(repr=False)
    shift: float = 0.0
    name: str = "dirichlet_laplacian"
    dimension: int = 1

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1 or ev.size == 0:
            raise ValueError("need at least one eigenvalue")
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        if np.any(ev + self.shift <= 0):
            raise ValueError("shifted eigenvalues must be positive")
        for name in ("eigenvalues", "grid", "basis"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_rates", self.eigenvalues + self.shift)
        self._rates.setflags(write=False)

    @property
    def modes(self) -> int:
        return self.eigenvalues.size

    @property
    def rates(self) -> np.ndarray:
        return self._rates

    def project(self, values: np.ndarray) -> np.ndarray:
        """Grid values ``(..., M)`` to coefficients ``(..., N)``."""
        return self.weight * (np.asarray(values, dtype=float) @ self.basis.T)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Coefficients ``(..., N)`` to grid values ``(..., M)``."""
        return np.asarray(coeffs, dtype=float) @ self.basis

    def evaluate(self, coeffs: np.ndarray, xi) -> np.ndarray:
        """Point values of ``sum_i c_i e_i`` at arbitrary ``xi``."""
        return np.asarray(coeffs, dtype=float) @ self.evaluator(np.asarray(xi, dtype=float))

    def descriptor(self) -> dict:
        return {"name": self.name, "modes": self.modes, "grid_points": int(self.grid.size),
                "shift": self.shift, "dimension": self.dimension}

    def zeros(self) -> "SpectralField":
        return SpectralField(np.zeros(self.modes), self)

    def field(self, coeffs) -> "SpectralField":
        return SpectralField(np.asarray(coeffs, dtype=float), self)


def dirichlet_laplacian(modes: int, grid_points: int | None = None, shift: float = 0.0) -> SpectralOperator:
    """``-d^2/dxi^2`` on ``(0, 1)`` with zero boundary values.

    ``rho_i = (i pi)^2`` and ``e_i = sqrt(2) sin(i pi xi)``. The grid is
    ``xi_j = j / M``, ``j = 1..M-1``, on which the sampled sines are exactly
    orthonormal with weight ``1 / M`` as long as ``M > N``.
    """
    if modes < 1:
        raise ValueError("modes must be >= 1")
    m = grid_points if grid_points is not None else max(4 * modes, 64)
    if m <= modes:
        raise ValueError("grid_points must exceed modes")
    idx = np.arange(1, modes + 1, dtype=float)
    grid = np.arange(1, m) / m

    def evaluator(xi):
        return math.sqrt(2.0) * np.sin(np.pi * np.multiply.outer(idx, xi))

    return SpectralOperator((idx * np.pi) ** 2, grid, evaluator(grid), 1.0 / m, evaluator, shift=shift)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Coefficient vector of a field at one time."""

    coefficients: np.ndarray
    operator: SpectralOperator

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.shape[-1:] != (self.operator.modes,):
            raise ValueError("coefficient length must equal the number of modes")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_grid(cls, values, operator: SpectralOperator) -> "SpectralField":
        return cls(operator.project(values), operator)

    @classmethod
    def from_function(cls, fn: Callable, operator: SpectralOperator) -> "SpectralField":
        return cls.from_grid(fn(operator.grid), operator)

    def grid_values(self) -> np.ndarray:
        return self.operator.synthesize(self.coefficients)

    def norm(self, kind: "Norm | str" = "B") -> float:
        return float(as_norm(kind)(self.coefficients, self.operator))

    def __add__(self, other):
        return SpectralField(self.coefficients + _coeffs(other), self.operator)

    def __sub__(self, other):
        return SpectralField(self.coefficients - _coeffs(other), self.operator)

    def __mul__(self, scalar):
        return SpectralField(self.coefficients * float(scalar), self.operator)

    __rmul__ = __mul__


def _coeffs(u) -> np.ndarray:
    return u.coefficients if isinstance(u, SpectralField) else np.asarray(u, dtype=float)


def _wrap(u, coeffs):
    return SpectralField(coeffs, u.operator) if isinstance(u, SpectralField) else coeffs


# ---------------------------------------------------------------------------
# semigroup and fractional powers
# ---------------------------------------------------------------------------


def semigroup_apply(op: SpectralOperator, t: float, u):
    """``exp(-t A) u``; accepts a SpectralField or a coefficient array."""
    if t < 0:
        raise ValueError("semigroup time must be non-negative")
    return _wrap(u, _coeffs(u) * np.exp(-op.rates * t))


def frac_power_apply(op: SpectralOperator, gamma: float, u):
    """``A^gamma u`` for any real ``gamma``."""
    return _wrap(u, _coeffs(u) * op.rates ** gamma)


def smoothing_profile(op: SpectralOperator, alpha: float, t) -> np.ndarray:
    """``max_i rho_i^alpha exp(-rho_i t)`` for each ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.max(op.rates ** alpha * np.exp(-np.multiply.outer(t, op.rates)), axis=-1)


def smoothing_bound(alpha: float, t) -> np.ndarray:
    """``sup_x x^alpha exp(-x t) = (alpha / e)^alpha t^-alpha``."""
    t = np.asarray(t, dtype=float)
    if alpha == 0:
        return np.ones_like(t)
    return (alpha / math.e) ** alpha * t ** (-alpha)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def _lp(c: np.ndarray, p: float) -> np.ndarray:
    a = np.abs(c)
    if p == 2:
        return np.sqrt(np.sum(a * a, axis=-1))
    if math.isinf(p):
        return np.max(a, axis=-1)
    return np.sum(a ** p, axis=-1) ** (1.0 / p)


def interp_norm(u, delta: float, p: float, op: SpectralOperator | None = None) -> np.ndarray:
    """Real-interpolation norm ``|u|_B + (int_0^1 (t^{1-delta} |A e^{-tA} u|_B)^p dt/t)^{1/p}``.

    Trapezoid rule in ``log t`` on ``INTERP_NODES`` points of ``[1e-8, 1]``;
    the piece on ``(0, 1e-8)`` uses ``|A e^{-tA} u| ~ |A u|`` and is added
    in closed form.
    """
    if isinstance(u, SpectralField):
        op = u.operator
    if op is None:
        raise ValueError("operator required for coefficient input")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    c = _coeffs(u)
    rho = op.rates
    logt = np.linspace(math.log(INTERP_TMIN), 0.0, INTERP_NODES)
    t = np.exp(logt)
    decay = rho * np.exp(-np.multiply.outer(t, rho))  # (nodes, N)
    if p == 2:
        au = np.sqrt(np.maximum((c * c) @ (decay * decay).T, 0.0))  # (..., nodes)
    else:
        ac = np.abs(c)
        au = np.stack([_lp(ac * row, p) for row in decay], axis=-1)
    s = p * (1.0 - delta)
    integrand = t ** s * au ** p
    body = _trapz(integrand, logt)
    tail = _lp(c * rho, p) ** p * INTERP_TMIN ** s / s
    return _lp(c, p) + (body + tail) ** (1.0 / p)


def interp_norm_single_mode(rho: float, delta: float, p: float) -> float:
    """Closed form of the integral part of ``interp_norm`` for a unit single-mode field."""
    s = p * (1.0 - delta)
    val = rho ** (p * delta) * (p ** -s) * special.gamma(s) * special.gammainc(s, p * rho)
    return val ** (1.0 / p)


@dataclass(frozen=True)
class Norm:
    """Norm selector.

    kind ``"B"``: ``l^p`` norm of coefficients.
    kind ``"E"``: ``interp_norm`` with parameters ``delta``, ``p``.
    kind ``"X"``: ``l^p`` norm of ``rho^{delta (1 - theta)} c``; exact
    interpolation norm for ``p = 2``, a proxy otherwise (see ``is_proxy``).
    kind ``"sup"``: maximum of ``|u|`` over the spatial grid.
    """

    kind: str = "B"
    p: float = 2.0
    delta: float = 0.5
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("B", "E", "X", "sup"):
            raise ValueError(f"unknown norm kind {self.kind!r}")

    @property
    def is_proxy(self) -> bool:
        return self.kind == "X" and self.p != 2

    def label(self) -> str:
        if self.kind == "B":
            return f"B(p={self.p})"
        if self.kind == "E":
            return f"E(delta={self.delta},p={self.p})"
        if self.kind == "X":
            return f"X(delta={self.delta},theta={self.theta},p={self.p}{',proxy' if self.is_proxy else ''})"
        return "sup"

    def __call__(self, coeffs, op: SpectralOperator) -> np.ndarray:
        c = _coeffs(coeffs)
        if self.kind == "B":
            return _lp(c, self.p)
        if self.kind == "E":
            return interp_norm(c, self.delta, self.p, op)
        if self.kind == "X":
            return _lp(c * op.rates ** (self.delta * (1.0 - self.theta)), self.p)
        return np.max(np.abs(op.synthesize(c)), axis=-1)


def as_norm(kind) -> Norm:
    if isinstance(kind, Norm):
        return kind
    if isinstance(kind, str):
        return Norm(kind)
    if isinstance(kind, dict):
        return Norm(**kind)
    raise TypeError("norm must be a Norm, a kind string or a dict")


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathRecord:
    """Cadlag coefficient trajectory.

    ``states[j]`` is the right limit at ``times[j]`` and ``left_states[j]``
    the left limit; they differ exactly at jump times.
    """

    times: np.ndarray
    states: np.ndarray
    operator: SpectralOperator
    left_states: np.ndarray | None = None

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        s = np.array(self.states, dtype=float).reshape(t.size, -1)
        if t.size == 0:
            raise ValueError("path must contain at least one time")
        if np.any(np.diff(t) <= 0):
            raise ValueError("path times must be strictly increasing")
        if s.shape[1] != self.operator.modes:
            raise ValueError("state width must equal the number of modes")
        left = s.copy() if self.left_states is None else np.array(self.left_states, dtype=float).reshape(s.shape)
        for arr in (t, s, left):
            arr.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "left_states", left)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def cadlag(self) -> bool:
        return True

    def jump_indices(self, atol: float = 0.0) -> np.ndarray:
        return np.flatnonzero(np.any(np.abs(self.states - self.left_states) > atol, axis=1))

    def field(self, j: int) -> SpectralField:
        return SpectralField(self.states[j], self.operator)

    def norms(self, kind="B") -> np.ndarray:
        return as_norm(kind)(self.states, self.operator)

    def left_norms(self, kind="B") -> np.ndarray:
        return as_norm(kind)(self.left_states, self.operator)

    def scaled(self, factor: float) -> "PathRecord":
        return PathRecord(self.times, factor * self.states, self.operator, factor * self.left_states)

    def __sub__(self, other: "PathRecord") -> "PathRecord":
        if not np.array_equal(self.times, other.times):
            raise ValueError("paths must share their time grid")
        return PathRecord(self.times, self.states - other.states, self.operator,
                          self.left_states - other.left_states)

    def to_csv(self, path, sidecar: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"c_{i + 1}" for i in range(self.operator.modes)])
            for t, row in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
        if sidecar:
            jumps = self.jump_indices()
            meta = {"operator": self.operator.descriptor(), "cadlag": True,
                    "jump_indices": jumps.tolist(),
                    "left_limits": [[float(x) for x in self.left_states[j]] for j in jumps]}
            with open(str(path) + ".json", "w") as fh:
                json.dump(meta, fh, sort_keys=True, indent=1)

    @classmethod
    def from_csv(cls, path, operator: SpectralOperator) -> "PathRecord":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        data = np.array([[float(x) for x in r] for r in rows], dtype=float)
        left = data[:, 1:].copy()
        try:
            with open(str(path) + ".json") as fh:
                meta = json.load(fh)
            for j, row in zip(meta["jump_indices"], meta["left_limits"]):
                left[j] = row
        except FileNotFoundError:
            pass
        return cls(data[:, 0], data[:, 1:], operator, left)


def _trapz(y, x, axis=-1):
    fn = getattr(np, "trapezoid", None) or np.trapz
    return fn(y, x, axis=axis)


def lp_lambda_norm(path: PathRecord, p: float, lam: float, norm="B") -> float:
    """``int e^{-lam t} |u(t)|^p dt`` over the recorded horizon (no p-th root).

    Between consecutive records the integrand is interpolated linearly from
    the right limit at the left end to the left limit at the right end, so
    jumps are never smeared across a cell.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    nrm = as_norm(norm)
    t = path.times
    if t.size < 2:
        return 0.0
    right = nrm(path.states[:-1], path.operator) ** p * np.exp(-lam * t[:-1])
    left = nrm(path.left_states[1:], path.operator) ** p * np.exp(-lam * t[1:])
    return float(np.sum(0.5 * np.diff(t) * (right + left)))


def cell_values(path: PathRecord, nrm: Norm | None = None):
    """Cell midpoints, widths and the mid value ``(u(t_j) + u(t_{j+1}-)) / 2`` of each cell."""
    t = path.times
    vals = 0.5 * (path.states[:-1] + path.left_states[1:])
    return 0.5 * (t[:-1] + t[1:]), np.diff(t), vals


def w_alpha_p_norm(path: PathRecord, alpha: float, p: float, lam: float, norm="B", band: float = 0.0):
    """Weighted Gagliardo seminorm ``(int int e^{-lam(t+s)} |u(t)-u(s)|^p / |t-s|^{1+alpha p})^{1/p}``.

    The path is replaced by its cell-wise mean value; the kernel
    ``|t-s|^{-1-alpha p}`` is integrated exactly over each pair of cells and
    the weight is taken at cell centres. Cell pairs closer than ``band`` are
    skipped. With ``alpha p >= 1`` a jump between adjacent cells makes the
    value infinite, which is returned as is.

    Returns
    -------
    value : float
    band : float
        The excluded diagonal band actually used.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    nrm = as_norm(norm)
    mid, width, vals = cell_values(path)
    n = mid.size
    if n < 2:
        return 0.0, band
    a = path.times[:-1]
    b = path.times[1:]
    beta = alpha * p
    total = 0.0
    for j in range(n - 1):
        k = np.arange(j + 1, n)
        diff = nrm(vals[k] - vals[j], path.operator) ** p
        nz = diff > 0
        if band > 0:
            nz &= (a[k] - b[j]) >= band
        if not nz.any():
            continue
        k = k[nz]
        d = diff[nz]
        # exact int_{a_j}^{b_j} int_{a_k}^{b_k} (t - s)^{-1-beta} dt ds, with b_j <= a_k
        g0 = a[k] - b[j]
        g1 = b[k] - b[j]
        g2 = a[k] - a[j]
        g3 = b[k] - a[j]
        if beta == 1.0:
            kern = np.log(g1) + np.log(g2) - np.log(g3) - np.where(g0 > 0, np.log(np.maximum(g0, 1e-300)), -np.inf)
        else:
            e = 1.0 - beta
            with np.errstate(divide="ignore"):
                g0e = np.where(g0 > 0, np.maximum(g0, 0.0) ** e, 0.0 if e > 0 else np.inf)
            kern = (g1 ** e + g2 ** e - g3 ** e - g0e) / (beta * e)
        weight = np.exp(-lam * (mid[j] + mid[k]))
        total += 2.0 * float(np.sum(weight * d * kern))
    return total ** (1.0 / p), band
