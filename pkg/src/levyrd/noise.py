"""Concrete jump noises built on Poisson random measures.

Three constructions share one interface:

* ``ScalarNoiseSpec``: one scalar Levy process, ``G(u; z) = z g(u)``.
* ``SpectralNoiseSpec``: independent scalar Levy processes along the
  eigenbasis with weights ``i^-alpha``, marks ``(i, z)``.
* ``SpaceTimeNoiseSpec``: Poissonian white noise on domain x jumps x time,
  marks ``(xi, zeta)``, each atom acting as ``zeta g(u(xi)) delta_xi``.

Each spec provides ``sample``, per-atom ``jump_vectors`` in coefficient
space and the per-unit-time ``compensator`` of the jump integrand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .prm import LevyMeasure, PointMeasure, _rng, draw_atoms, levy_path_from_prm, total_p_moment
from .spectral import SpectralField, SpectralOperator

STRICT_TOL = 1e-12


def _eval_g(g, values):
    if hasattr(g, "apply"):
        return g.apply(values)
    return np.asarray(g(values), dtype=float)


@dataclass(frozen=True, eq=False)
class ScalarNoiseSpec:
    """Single scalar jump process multiplying ``g(u)``."""

    base: LevyMeasure
    kind: str = "scalar"

    @property
    def mark_names(self):
        return ("z",)

    def rate(self) -> float:
        return self.base.mass()

    def sample(self, horizon: float, seed) -> PointMeasure:
        rng = _rng(seed)
        times, z = draw_atoms(rng, self.base.mass(), horizon, self.base.sample)
        return PointMeasure(horizon, times, z, ("z",))

    def jump_vectors(self, op: SpectralOperator, g, uhat: np.ndarray, marks: np.ndarray) -> np.ndarray:
        """Coefficients of ``z g(uhat)`` for each atom; ``uhat`` has one row per atom."""
        gv = _eval_g(g, op.synthesize(uhat))
        return np.asarray(marks, dtype=float).reshape(-1, 1) * op.project(gv)

    def compensator(self, op: SpectralOperator, g, uhat: np.ndarray) -> np.ndarray:
        """``int G(uhat; z) nu(dz)`` per unit time."""
        m1 = self.base.mean()
        if m1 == 0.0:
            return np.zeros_like(np.asarray(uhat, dtype=float))
        return m1 * op.project(_eval_g(g, op.synthesize(uhat)))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "measure": self.base.descriptor()}


@dataclass(frozen=True, eq=False)
class SpectralNoiseSpec:
    """``sum_{i <= N} i^-alpha e_i dL_i`` with i.i.d. scalar processes ``L_i`` of intensity ``base``."""

    alpha: float
    modes: int
    base: LevyMeasure
    kind: str = "spectral"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.modes < 1:
            raise ValueError("modes must be >= 1")

    @property
    def weights(self) -> np.ndarray:
        return np.arange(1, self.modes + 1, dtype=float) ** (-self.alpha)

    @property
    def mark_names(self):
        return ("i", "z")

    def rate(self) -> float:
        return self.modes * self.base.mass()

    def sample(self, horizon: float, seed) -> PointMeasure:
        return sample_spectral_noise(self, horizon, seed)

    def jump_vectors(self, op: SpectralOperator, g, uhat: np.ndarray, marks: np.ndarray) -> np.ndarray:
        """Coefficients of ``z lambda_i g(uhat) e_i`` projected on the basis, one row per atom."""
        marks = np.asarray(marks, dtype=float).reshape(-1, 2)
        idx = marks[:, 0].astype(int) - 1
        if np.any(idx >= op.modes):
            raise ValueError("noise mode exceeds the operator's mode count")
        gv = _eval_g(g, op.synthesize(uhat))
        scale = marks[:, 1] * self.weights[idx]
        return scale[:, None] * op.project(gv * op.basis[idx])

    def compensator(self, op: SpectralOperator, g, uhat: np.ndarray) -> np.ndarray:
        m1 = self.base.mean()
        if m1 == 0.0:
            return np.zeros_like(np.asarray(uhat, dtype=float))
        ell = self.weights @ op.basis[: self.modes]
        return m1 * op.project(_eval_g(g, op.synthesize(uhat)) * ell)

    def tail_p_moment(self, p: float, c_nu: float | None = None) -> float:
        """``sum_{i > N} lambda_i^p C_nu``: discarded noise p-moment beyond the mode cutoff."""
        if c_nu is None:
            c_nu = total_p_moment(self.base, p)
        if self.alpha * p <= 1.0:
            return math.inf
        return float(c_nu * special.zeta(self.alpha * p, self.modes + 1))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha, "modes": self.modes, "measure": self.base.descriptor()}


@dataclass(frozen=True, eq=False)
class SpaceTimeNoiseSpec:
    """Poissonian white noise on ``(0, length) x R x (0, T]`` with intensity ``dxi nu(dzeta) dt``."""

    base: LevyMeasure
    length: float = 1.0
    kind: str = "spacetime"

    @property
    def mark_names(self):
        return ("xi", "zeta")

    def rate(self) -> float:
        return self.length * self.base.mass()

    def sample(self, horizon: float, seed) -> PointMeasure:
        return sample_spacetime_noise(self, horizon, seed)

    def jump_vectors(self, op: SpectralOperator, g, uhat: np.ndarray, marks: np.ndarray) -> np.ndarray:
        """Coefficient ``k`` of each atom is ``zeta g(uhat(xi)) e_k(xi)``."""
        marks = np.asarray(marks, dtype=float).reshape(-1, 2)
        xi, zeta = marks[:, 0], marks[:, 1]
        ek = op.evaluator(xi).T  # (K, N)
        u_at = np.sum(np.asarray(uhat, dtype=float) * ek, axis=-1)
        return (zeta * _eval_g(g, u_at))[:, None] * ek

    def compensator(self, op: SpectralOperator, g, uhat: np.ndarray) -> np.ndarray:
        m1 = self.base.mean()
        if m1 == 0.0:
            return np.zeros_like(np.asarray(uhat, dtype=float))
        return m1 * op.project(_eval_g(g, op.synthesize(uhat)))

    def descriptor(self) -> dict:
        return {"kind": self.kind, "length": self.length, "measure": self.base.descriptor()}


def sample_spectral_noise(spec: SpectralNoiseSpec, horizon: float, seed) -> PointMeasure:
    """Atoms ``(t, (i, z))`` at total rate ``N m``; mode index uniform on ``1..N``.

    Draw order is count, times, jump sizes, mode indices, so ``N = 1``
    reproduces ``sample_prm`` on the base measure exactly.
    """
    rng = _rng(seed)
    times, z = draw_atoms(rng, spec.rate(), horizon, spec.base.sample)
    i = rng.integers(1, spec.modes + 1, size=z.size) if z.size else np.empty(0, dtype=int)
    return PointMeasure(horizon, times, np.column_stack([i.astype(float), z]).reshape(-1, 2), ("i", "z"))


def sample_spacetime_noise(spec: SpaceTimeNoiseSpec, horizon: float, seed) -> PointMeasure:
    """Atoms ``(t, (xi, zeta))`` at rate ``length * m``; ``xi`` uniform on the open domain."""
    rng = _rng(seed)
    times, zeta = draw_atoms(rng, spec.rate(), horizon, spec.base.sample)
    xi = spec.length * (1.0 - rng.random(zeta.size))
    while np.any(xi >= spec.length):
        bad = xi >= spec.length
        xi[bad] = spec.length * (1.0 - rng.random(int(bad.sum())))
    return PointMeasure(horizon, times, np.column_stack([xi, zeta]).reshape(-1, 2), ("xi", "zeta"))


def spectral_G_increment(u: SpectralField, atom, spec: SpectralNoiseSpec, g) -> SpectralField:
    """Field increment ``g(u) lambda_i e_i z`` for one atom ``(i, z)``, projected on the basis."""
    i, z = atom
    op = u.operator
    vec = spec.jump_vectors(op, g, u.coefficients[None, :], np.array([[float(i), float(z)]]))[0]
    return SpectralField(vec, op)


def lift_to_besov(atom, g, u: SpectralField) -> SpectralField:
    """Galerkin image of ``g(u(xi)) zeta delta_xi``: coefficient ``i`` is ``g(u(xi)) zeta e_i(xi)``."""
    xi, zeta = (float(a) for a in atom)
    if not 0.0 < xi < 1.0:
        raise ValueError("atom location must lie in the open domain")
    op = u.operator
    ek = op.evaluator(np.array([xi]))[:, 0]
    w = float(_eval_g(g, np.array([float(u.coefficients @ ek)]))[0]) * zeta
    return SpectralField(w * ek, op)


def lifted_besov_norm(atom, g, u: SpectralField, p: float, n: int = 4096) -> float:
    """Besov ``B^{1/p - 1}_{p, inf}`` norm of the lifted atom on the unit periodic cell."""
    from .besov import besov_dirac_norm

    xi, zeta = (float(a) for a in atom)
    op = u.operator
    ek = op.evaluator(np.array([xi]))[:, 0]
    w = float(_eval_g(g, np.array([float(u.coefficients @ ek)]))[0]) * zeta
    return besov_dirac_norm(lambda x: w, xi - 0.5, p, d=1, n=n, length=1.0)


def spectral_noise_path(spec: SpectralNoiseSpec, pm: PointMeasure, grid) -> np.ndarray:
    """Coefficients ``lambda_i L_i(t)`` of the compensated noise on ``grid``, shape ``(len(grid), N)``."""
    grid = np.asarray(grid, dtype=float)
    out = np.empty((grid.size, spec.modes))
    modes = pm.column("i").astype(int)
    z = pm.column("z")
    for i in range(1, spec.modes + 1):
        keep = modes == i
        sub = PointMeasure(pm.horizon, pm.times[keep], z[keep], ("z",))
        out[:, i - 1] = spec.weights[i - 1] * levy_path_from_prm(sub, spec.base, grid)
    return out


@dataclass(frozen=True)
class MomentSum:
    """Partial sum ``sum_{i <= N} i^{-alpha} i^{exponent}``, its remainder ``tail`` and the verdict."""

    partial: float
    exponent: float
    decay: float
    slack: float
    convergent: bool
    tail: float = math.inf


def spectral_moment_sum(alpha: float, gamma: float, p: float, r: float, modes: int | None = None,
                        d: int = 1) -> MomentSum:
    """Sum controlling the noise regularity: ``sum_i lambda_i i^{p (gamma/d + 1/2 - 1/r)}``.

    The series converges iff ``alpha > 1 + p (gamma/d + 1/2 - 1/r)``; the
    comparison is strict with tolerance ``1e-12``. ``modes=None`` returns the
    full series (``inf`` if divergent).
    """
    e = p * (gamma / d + 0.5 - 1.0 / r)
    decay = alpha - e
    slack = decay - 1.0
    convergent = slack > STRICT_TOL
    if modes is None:
        partial = float(special.zeta(decay, 1)) if convergent else math.inf
        tail = 0.0 if convergent else math.inf
    else:
        i = np.arange(1, int(modes) + 1, dtype=float)
        partial = float(np.sum(i ** (-decay)))
        tail = float(special.zeta(decay, int(modes) + 1)) if convergent else math.inf
    return MomentSum(partial, e, decay, slack, convergent, tail)
