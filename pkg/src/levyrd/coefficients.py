"""Polynomial reaction terms, their truncations, bounded noise coefficients.

The drift acts pointwise on grid values:
``f(u) = -|u|^q sgn(u) + beta u`` and, with truncation level ``n``,
``f_n(u) = f(clip(u, -n, n))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import SpectralField, SpectralOperator


@dataclass(frozen=True)
class DriftSpec:
    """Drift ``-|u|^q sgn u + beta u`` with optional clamp and dissipativity constants.

    ``k`` and ``k0`` parametrize the one-sided growth ``a(r) = k0 (1 + r^q)``
    and the decay rate used by the a-priori bound.
    """

    q: float = 3.0
    beta: float = 0.0
    truncation: float | None = None
    k: float = 1.0
    k0: float = 1.0
    kind: str = "poly"

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.k0 < 0:
            raise ValueError("k0 must be non-negative")
        if self.truncation is not None and not self.truncation > 0:
            raise ValueError("truncation level must be positive")
        if self.kind != "poly":
            raise ValueError(f"unknown drift kind {self.kind!r}")

    def scalar(self, u, truncation: float | None = "default") -> np.ndarray:
        n = self.truncation if truncation == "default" else truncation
        u = np.asarray(u, dtype=float)
        if n is not None:
            u = np.clip(u, -n, n)
        return -np.abs(u) ** self.q * np.sign(u) + self.beta * u

    def a(self, r) -> np.ndarray:
        """One-sided growth function ``k0 (1 + r^q)``."""
        return self.k0 * (1.0 + np.asarray(r, dtype=float) ** self.q)

    def bound(self) -> float:
        """``R_F = max_{|u| <= n} |f(u)|`` for the truncated drift; ``inf`` without truncation."""
        n = self.truncation
        if n is None:
            return math.inf
        cands = [0.0, n]
        if self.q > 1 and self.beta > 0:
            crit = (self.beta / self.q) ** (1.0 / (self.q - 1.0))
            if crit < n:
                cands.append(crit)
        return float(max(abs(float(self.scalar(c, None))) for c in cands))

    def default_K(self) -> float:
        """A constant ``K`` with ``f(v + z) sgn v <= K (1 + |z|^q)`` for all ``v, z``."""
        c = 0.0
        if self.beta > 0 and self.q > 1:
            c = (self.q - 1.0) * (self.beta / self.q) ** (self.q / (self.q - 1.0))
        elif self.beta > 0:
            return math.inf
        return max(1.0, c)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "q": self.q, "beta": self.beta, "truncation": self.truncation,
                "k": self.k, "k0": self.k0}


def drift_values(spec: DriftSpec, values) -> np.ndarray:
    """Pointwise drift of grid values."""
    return spec.scalar(values)


def drift_apply(spec: DriftSpec, u):
    """Drift of a field: pointwise on the grid, projected back on the basis.

    Accepts a SpectralField or a pair ``(coeffs, operator)``; coefficient
    arrays may be batched along leading axes.
    """
    if isinstance(u, SpectralField):
        op = u.operator
        return SpectralField(op.project(spec.scalar(op.synthesize(u.coefficients))), op)
    coeffs, op = u
    return op.project(spec.scalar(op.synthesize(coeffs)))


def truncation_consistency(spec: DriftSpec, u, operator: SpectralOperator | None = None) -> float:
    """``max |f_n(u) - f(u)|`` over grid values of ``u`` (zero whenever ``max|u| <= n``)."""
    if spec.truncation is None:
        raise ValueError("truncation level must be set")
    vals = u.grid_values() if isinstance(u, SpectralField) else np.asarray(u, dtype=float)
    return float(np.max(np.abs(spec.scalar(vals) - spec.scalar(vals, None))))


@dataclass
class DissipativityReport:
    trials: int
    K: float
    max_violation: float
    violations: int
    witness: tuple | None
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.violations == 0


def dissipativity_sample_check(spec: DriftSpec, trials: int, seed, K: float | None = None,
                               bound: float = 1e3, grid: int = 201, chunk: int = 200_000) -> DissipativityReport:
    """Search for violations of ``f(v + z) sgn v <= K (1 + |z|^q)``.

    Pairs come from a uniform ``grid x grid`` lattice on ``[-bound, bound]^2``
    (which contains the origin), then ``trials`` random pairs, half uniform on
    the square and half with log-uniform magnitudes in ``[1e-6, bound]`` so
    that small arguments are explored too.

    Returns
    -------
    DissipativityReport
        ``max_violation`` is the largest ``LHS - RHS`` seen (``<= 0`` means no
        violation) and ``witness`` the pair attaining it.
    """
    if K is None:
        K = spec.default_K()
    rng = np.random.default_rng(seed)
    worst = -math.inf
    witness = None
    count = 0

    def scan(v, z):
        nonlocal worst, witness, count
        lhs = spec.scalar(v + z) * np.sign(v)
        gap = lhs - K * (1.0 + np.abs(z) ** spec.q)
        j = int(np.argmax(gap))
        if gap[j] > worst:
            worst = float(gap[j])
            witness = (float(v[j]), float(z[j]))
        count += int(np.sum(gap > 0))

    axis = np.linspace(-bound, bound, grid)
    vv, zz = np.meshgrid(axis, axis, indexing="ij")
    scan(vv.ravel(), zz.ravel())
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        half = m // 2
        v = rng.uniform(-bound, bound, m)
        z = rng.uniform(-bound, bound, m)
        mag = np.exp(rng.uniform(math.log(1e-6), math.log(bound), (2, m - half)))
        sgn = rng.choice([-1.0, 1.0], size=(2, m - half))
        v[half:], z[half:] = mag * sgn
        scan(v, z)
        done += m
    return DissipativityReport(trials, float(K), worst, count, witness)


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    """Bounded scalar noise coefficient ``g``.

    kinds: ``"sin"``, ``"sinsininv"`` (``sin(u) sin(1/u)`` for ``u != 0``,
    exactly ``0`` at ``u = 0``), ``"const"`` (``value``) and ``"custom"``
    (linear interpolation of ``table = (x, y)``, constant beyond the ends).
    """

    kind: str = "sin"
    value: float = 1.0
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("sin", "sinsininv", "const", "custom"):
            raise ValueError(f"unknown diffusion kind {self.kind!r}")
        if self.kind == "custom":
            if self.table is None:
                raise ValueError("custom diffusion needs a table")
            x, y = (np.asarray(a, dtype=float) for a in self.table)
            if x.shape != y.shape or np.any(np.diff(x) <= 0):
                raise ValueError("table must be increasing x with matching y")
            object.__setattr__(self, "table", (x, y))

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "sin":
            return np.sin(u)
        if self.kind == "sinsininv":
            out = np.zeros_like(u)
            nz = u != 0.0
            out[nz] = np.sin(u[nz]) * np.sin(1.0 / u[nz])
            return out
        if self.kind == "const":
            return np.full_like(u, self.value)
        x, y = self.table
        return np.interp(u, x, y)

    __call__ = apply

    @property
    def bound(self) -> float:
        if self.kind in ("sin", "sinsininv"):
            return 1.0
        if self.kind == "const":
            return abs(self.value)
        return float(np.max(np.abs(self.table[1])))

    @property
    def is_zero(self) -> bool:
        return self.kind == "const" and self.value == 0.0

    def descriptor(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "const":
            d["value"] = self.value
        if self.kind == "custom":
            d["table"] = [self.table[0].tolist(), self.table[1].tolist()]
        return d


def diffusion_apply(spec: DiffusionSpec, u) -> np.ndarray:
    """Pointwise ``g(u)`` on grid values (or on the synthesized grid of a field)."""
    vals = u.grid_values() if isinstance(u, SpectralField) else u
    return spec.apply(vals)
