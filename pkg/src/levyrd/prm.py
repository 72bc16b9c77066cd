"""Intensity measures, Poisson random measures on marks x time, compensated integrals.

A Poisson random measure (PRM) with intensity ``nu (x) Lebesgue`` on a finite
horizon is realized as a finite, time-ordered list of atoms ``(t_k, z_k)``.
Infinite-activity intensities are handled by truncating jumps smaller than
``epsilon``; the compensator is always taken with respect to the same
truncated measure, so compensated integrals stay centred.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

QUAD_RTOL = 1e-9


class InfiniteMomentError(ValueError):
    """Raised when a requested moment of an intensity measure diverges."""


class CompensatorError(ValueError):
    """Raised when the compensator of an integrand is not finite."""


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# intensity measures
# ---------------------------------------------------------------------------


class LevyMeasure:
    """Base class for jump intensity measures on the real line.

    Subclasses describe the *truncated* measure actually used for sampling;
    ``mass()`` is finite by construction.
    """

    kind: str = "abstract"
    epsilon: float = 0.0

    def mass(self) -> float:
        raise NotImplementedError

    def moment(self, p: float) -> float:
        """``int |z|^p nu(dz)`` over the truncated support."""
        raise NotImplementedError

    def mean(self) -> float:
        """First signed moment ``int z nu(dz)`` (drives the compensator drift)."""
        return float(self.integrate(lambda z: z))

    def second_moment(self) -> float:
        return self.moment(2.0)

    def integrate(self, f: Callable):
        """``int f(z) nu(dz)`` over the truncated support; ``f`` may be vector valued."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` i.i.d. marks from ``nu / mass``."""
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    def is_symmetric(self) -> bool:
        return False

    @staticmethod
    def from_descriptor(desc: dict) -> "LevyMeasure":
        kind = desc.get("kind")
        if kind == "atomic":
            return AtomicMeasure(desc["locations"], desc["masses"])
        if kind in ("uniform", "density"):
            return IntervalDensity(
                float(desc["low"]),
                float(desc["high"]),
                value=float(desc.get("value", 1.0)),
                epsilon=float(desc.get("epsilon", 0.0)),
            )
        if kind == "tempered":
            return TemperedStable(
                c_pos=float(desc.get("c_pos", 1.0)),
                c_neg=float(desc.get("c_neg", 1.0)),
                index=float(desc["index"]),
                tempering=float(desc.get("tempering", 1.0)),
                epsilon=desc.get("epsilon"),
                p=float(desc.get("p", 2.0)),
            )
        if kind == "null":
            return AtomicMeasure([], [])
        raise ValueError(f"unknown measure kind {kind!r}")


class AtomicMeasure(LevyMeasure):
    """Finite sum of point masses ``sum_j m_j delta_{z_j}``, with ``z_j != 0``."""

    kind = "atomic"

    def __init__(self, locations: Sequence[float], masses: Sequence[float]):
        loc = np.asarray(locations, dtype=float).reshape(-1)
        mas = np.asarray(masses, dtype=float).reshape(-1)
        if loc.shape != mas.shape:
            raise ValueError("locations and masses must have equal length")
        if np.any(mas < 0) or not np.all(np.isfinite(mas)):
            raise ValueError("masses must be finite and non-negative")
        if np.any(loc == 0.0):
            raise ValueError("a Levy measure puts no mass at the origin")
        keep = mas > 0
        self.locations = loc[keep]
        self.masses = mas[keep]
        self.locations.setflags(write=False)
        self.masses.setflags(write=False)

    def mass(self) -> float:
        return float(self.masses.sum())

    def moment(self, p: float) -> float:
        return float(np.sum(self.masses * np.abs(self.locations) ** p))

    def integrate(self, f):
        if self.locations.size == 0:
            return 0.0 * np.asarray(f(np.float64(1.0)))
        vals = [np.asarray(f(z), dtype=float) for z in self.locations]
        return sum(m * v for m, v in zip(self.masses, vals))

    def sample(self, rng, size):
        if size == 0:
            return np.empty(0)
        probs = self.masses / self.masses.sum()
        idx = rng.choice(self.locations.size, size=size, p=probs)
        return self.locations[idx]

    def is_symmetric(self) -> bool:
        a = sorted(zip(self.locations.tolist(), self.masses.tolist()))
        b = sorted(zip((-self.locations).tolist(), self.masses.tolist()))
        return np.allclose(np.array(a).reshape(-1, 2), np.array(b).reshape(-1, 2), rtol=0, atol=0) if a else True

    def descriptor(self):
        return {"kind": "atomic", "locations": self.locations.tolist(), "masses": self.masses.tolist()}

    def __repr__(self):
        return f"AtomicMeasure(locations={self.locations.tolist()}, masses={self.masses.tolist()})"


class IntervalDensity(LevyMeasure):
    """Measure with a density on ``[low, high]``, small jumps ``|z| < epsilon`` removed.

    ``density`` defaults to the constant ``value``. Custom densities are sampled
    by rejection against a grid-estimated envelope and cannot be serialized.
    """

    kind = "density"

    def __init__(self, low: float, high: float, value: float = 1.0, density: Callable | None = None,
                 epsilon: float = 0.0):
        if not high > low:
            raise ValueError("need low < high")
        if value < 0 or epsilon < 0:
            raise ValueError("value and epsilon must be non-negative")
        self.low, self.high, self.value = float(low), float(high), float(value)
        self.epsilon = float(epsilon)
        self._density = density
        self._pieces = self._support_pieces()

    def _support_pieces(self):
        lo, hi, eps = self.low, self.high, self.epsilon
        pieces = []
        if eps > 0 and lo < eps and hi > -eps:
            if lo < -eps:
                pieces.append((lo, -eps))
            if hi > eps:
                pieces.append((eps, hi))
        else:
            pieces.append((lo, hi))
        return pieces

    def density(self, z):
        z = np.asarray(z, dtype=float)
        if self._density is None:
            return np.full_like(z, self.value)
        return np.asarray(self._density(z), dtype=float)

    def _quad(self, g):
        total = 0.0
        for a, b in self._pieces:
            pts = [0.0] if a < 0.0 < b else None
            val, _ = integrate.quad(lambda z: g(z) * float(self.density(z)), a, b, epsrel=QUAD_RTOL,
                                    epsabs=0.0, points=pts, limit=200)
            total += val
        return total

    def mass(self) -> float:
        if self._density is None:
            return self.value * sum(b - a for a, b in self._pieces)
        return self._quad(lambda z: 1.0)

    def moment(self, p: float) -> float:
        if self._density is None:
            def prim(x):
                return math.copysign(abs(x) ** (p + 1) / (p + 1), x)
            return self.value * sum(prim(b) - prim(a) if a >= 0 or b <= 0 else prim(b) + abs(prim(a))
                                    for a, b in self._pieces)
        return self._quad(lambda z: abs(z) ** p)

    def integrate(self, f):
        out = None
        for a, b in self._pieces:
            val, _ = integrate.quad_vec(lambda z: np.asarray(f(z), dtype=float) * float(self.density(z)), a, b,
                                        epsrel=QUAD_RTOL, epsabs=1e-14)
            out = val if out is None else out + val
        return out

    def sample(self, rng, size):
        if size == 0:
            return np.empty(0)
        lengths = np.array([b - a for a, b in self._pieces])
        if self._density is None:
            piece = rng.choice(len(self._pieces), size=size, p=lengths / lengths.sum())
            lo = np.array([a for a, _ in self._pieces])[piece]
            return lo + rng.random(size) * lengths[piece]
        grid = np.concatenate([np.linspace(a, b, 2049) for a, b in self._pieces])
        envelope = 1.1 * float(np.max(self.density(grid)))
        out = np.empty(0)
        while out.size < size:
            need = size - out.size
            piece = rng.choice(len(self._pieces), size=2 * need, p=lengths / lengths.sum())
            lo = np.array([a for a, _ in self._pieces])[piece]
            z = lo + rng.random(2 * need) * lengths[piece]
            keep = rng.random(2 * need) * envelope < self.density(z)
            out = np.concatenate([out, z[keep]])
        return out[:size]

    def is_symmetric(self) -> bool:
        return self._density is None and self.low == -self.high

    def descriptor(self):
        if self._density is not None:
            return {"kind": "density", "shape": "custom", "low": self.low, "high": self.high,
                    "epsilon": self.epsilon}
        return {"kind": "uniform", "low": self.low, "high": self.high, "value": self.value,
                "epsilon": self.epsilon}

    def __repr__(self):
        return f"IntervalDensity(low={self.low}, high={self.high}, value={self.value}, epsilon={self.epsilon})"


class TemperedStable(LevyMeasure):
    """Tempered power law ``c_+- |z|^{-1-index} exp(-tempering |z|)``, jumps below ``epsilon`` cut.

    When ``epsilon`` is None it is chosen so that the discarded small-jump
    ``p``-moment is below ``1e-6`` of the full ``p``-moment.
    """

    kind = "tempered"
    discard_fraction = 5e-7

    def __init__(self, c_pos: float = 1.0, c_neg: float = 1.0, index: float = 0.5, tempering: float = 1.0,
                 epsilon: float | None = None, p: float = 2.0):
        if not 0 < index < 2:
            raise ValueError("index must lie in (0, 2)")
        if c_pos < 0 or c_neg < 0 or tempering < 0:
            raise ValueError("c_pos, c_neg and tempering must be non-negative")
        self.c_pos, self.c_neg = float(c_pos), float(c_neg)
        self.index, self.tempering, self.p = float(index), float(tempering), float(p)
        if epsilon is None:
            epsilon = self.default_epsilon(self.p)
        if not epsilon > 0:
            raise ValueError("infinite-activity measures need epsilon > 0")
        self.epsilon = float(epsilon)

    def default_epsilon(self, p: float) -> float:
        a, mu = self.index, self.tempering
        if p <= a or mu <= 0:
            raise InfiniteMomentError(f"p-moment with p={p} is infinite for index={a}, tempering={mu}")
        return float(special.gammaincinv(p - a, self.discard_fraction) / mu)

    def _side_integral(self, power: float) -> float:
        """``int_eps^inf z^{power-1-index} exp(-tempering z) dz``."""
        a, mu, eps = self.index, self.tempering, self.epsilon
        s = power - a
        if mu == 0.0:
            if s >= 0:
                raise InfiniteMomentError(f"infinite p-moment: tail |z|^{power - 1 - a} is not integrable")
            return eps ** s / (-s)
        if s > 0:
            return float(mu ** (-s) * special.gamma(s) * special.gammaincc(s, mu * eps))
        # z = e^y removes the singular growth near eps
        val, _ = integrate.quad(lambda y: math.exp(s * y - mu * math.exp(y)), math.log(eps),
                                max(math.log(eps), math.log(700.0 / mu)),
                                epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
        return val

    def mass(self) -> float:
        return (self.c_pos + self.c_neg) * self._side_integral(0.0)

    def moment(self, p: float) -> float:
        return (self.c_pos + self.c_neg) * self._side_integral(p)

    def mean(self) -> float:
        return (self.c_pos - self.c_neg) * self._side_integral(1.0)

    def discarded_moment(self, p: float) -> float:
        """``int_{|z|<epsilon} |z|^p nu(dz)`` of the untruncated measure."""
        a, mu = self.index, self.tempering
        if p <= a:
            return math.inf
        if mu == 0.0:
            return (self.c_pos + self.c_neg) * self.epsilon ** (p - a) / (p - a)
        s = p - a
        return float((self.c_pos + self.c_neg) * mu ** (-s) * special.gamma(s) * special.gammainc(s, mu * self.epsilon))

    def _density(self, z):
        az = abs(z)
        c = self.c_pos if z > 0 else self.c_neg
        return c * az ** (-1.0 - self.index) * math.exp(-self.tempering * az)

    def integrate(self, f):
        out = 0.0
        for c, sign in ((self.c_pos, 1.0), (self.c_neg, -1.0)):
            if c == 0:
                continue
            val, _ = integrate.quad_vec(
                lambda y: np.asarray(f(sign * y), dtype=float) * c * y ** (-1.0 - self.index) * math.exp(-self.tempering * y),
                self.epsilon, np.inf, epsrel=QUAD_RTOL, epsabs=1e-14)
            out = out + val
        return out

    def sample(self, rng, size):
        if size == 0:
            return np.empty(0)
        total = self.c_pos + self.c_neg
        signs = np.where(rng.random(size) < self.c_pos / total, 1.0, -1.0)
        mags = np.empty(size)
        todo = np.arange(size)
        while todo.size:
            y = self.epsilon * rng.random(todo.size) ** (-1.0 / self.index)
            ok = rng.random(todo.size) < np.exp(-self.tempering * (y - self.epsilon))
            mags[todo[ok]] = y[ok]
            todo = todo[~ok]
        return signs * mags

    def is_symmetric(self) -> bool:
        return self.c_pos == self.c_neg

    def descriptor(self):
        return {"kind": "tempered", "c_pos": self.c_pos, "c_neg": self.c_neg, "index": self.index,
                "tempering": self.tempering, "epsilon": self.epsilon, "p": self.p}

    def __repr__(self):
        return (f"TemperedStable(c_pos={self.c_pos}, c_neg={self.c_neg}, index={self.index}, "
                f"tempering={self.tempering}, epsilon={self.epsilon})")


def total_p_moment(measure: LevyMeasure, p: float) -> float:
    """Return ``C_nu = int |z|^p nu(dz)`` over the truncated support.

    Raises
    ------
    InfiniteMomentError
        If the tail of the measure makes the moment diverge.
    """
    if not 1.0 < p <= 2.0:
        raise ValueError("p must lie in (1, 2]")
    val = measure.moment(p)
    if not math.isfinite(val):
        raise InfiniteMomentError(f"infinite p-moment for p={p}")
    return val


@dataclass(frozen=True)
class CompensatorSpec:
    """Compensator ``nu (x) Lebesgue`` of a time-homogeneous PRM."""

    measure: LevyMeasure
    note: str = "product with Lebesgue measure on time"

    def __call__(self, mark_mass: float, interval: tuple[float, float]) -> float:
        """Compensator of ``A x I`` given ``nu(A)``."""
        a, b = interval
        return mark_mass * max(b - a, 0.0)


# ---------------------------------------------------------------------------
# point measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointMeasure:
    """Finite realization of a PRM on ``(0, horizon]``.

    ``marks`` has shape ``(n,)`` for scalar marks or ``(n, k)`` for composite
    marks, with column names in ``mark_names``.
    """

    horizon: float
    times: np.ndarray
    marks: np.ndarray
    mark_names: tuple = ("z",)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        marks = np.asarray(self.marks, dtype=float)
        if marks.shape[0] != times.size:
            raise ValueError("one mark per atom required")
        if times.size:
            if times[0] <= 0 or times[-1] > self.horizon:
                raise ValueError("atom times must lie in (0, horizon]")
            if np.any(np.diff(times) <= 0):
                raise ValueError("atom times must be strictly increasing")
        times.setflags(write=False)
        marks.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "mark_names", tuple(self.mark_names))

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, PointMeasure):
            return NotImplemented
        return (self.horizon == other.horizon and self.mark_names == other.mark_names
                and np.array_equal(self.times, other.times) and np.array_equal(self.marks, other.marks))

    def column(self, name: str) -> np.ndarray:
        if self.marks.ndim == 1:
            if name != self.mark_names[0]:
                raise KeyError(name)
            return self.marks
        return self.marks[:, self.mark_names.index(name)]

    def count(self, window: tuple[float, float] | None = None, marks: Callable | None = None) -> int:
        """Number of atoms with time in ``(a, b]`` and mark in the set given by ``marks``."""
        keep = np.ones(self.times.size, dtype=bool)
        if window is not None:
            a, b = window
            keep &= (self.times > a) & (self.times <= b)
        if marks is not None:
            keep &= np.asarray(marks(self.marks), dtype=bool)
        return int(keep.sum())

    def restrict(self, window: tuple[float, float]) -> "PointMeasure":
        a, b = window
        keep = (self.times > a) & (self.times <= b)
        return PointMeasure(self.horizon, self.times[keep], self.marks[keep], self.mark_names)

    def to_csv(self, path, measure: LevyMeasure | None = None, seed=None, extra: dict | None = None) -> None:
        header = {"horizon": self.horizon, "seed": seed, "marks": list(self.mark_names),
                  "measure": measure.descriptor() if measure is not None else None}
        if extra:
            header.update(extra)
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(("t",) + self.mark_names)
            cols = self.marks.reshape(self.times.size, len(self.mark_names))
            for t, row in zip(self.times, cols):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> tuple["PointMeasure", dict]:
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise ValueError("missing PointMeasure header line")
            header = json.loads(first[2:])
            rows = list(csv.reader(fh))
        names = tuple(rows[0][1:])
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, 1 + len(names))
        marks = data[:, 1] if len(names) == 1 else data[:, 1:]
        return cls(float(header["horizon"]), data[:, 0], marks, names), header


def draw_atoms(rng: np.random.Generator, rate: float, horizon: float, draw_marks: Callable):
    """Draw times and marks of a homogeneous PRM with total rate ``rate``.

    Order of random draws: count, times, marks. Tied times are redrawn.
    """
    if rate < 0 or not math.isfinite(rate):
        raise ValueError("rate must be finite and non-negative")
    n = int(rng.poisson(rate * horizon)) if rate > 0 else 0
    times = np.sort(horizon * (1.0 - rng.random(n)))  # (0, T]
    while n > 1 and np.any(np.diff(times) == 0):
        times = np.sort(horizon * (1.0 - rng.random(n)))
    return times, draw_marks(rng, n)


def sample_prm(measure: LevyMeasure, horizon: float, seed) -> PointMeasure:
    """Sample a time-homogeneous PRM with intensity ``measure (x) dt`` on ``(0, horizon]``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = _rng(seed)
    times, marks = draw_atoms(rng, measure.mass(), horizon, measure.sample)
    return PointMeasure(horizon, times, marks, ("z",))


@dataclass(frozen=True, eq=False)
class PointMeasureEnsemble:
    """Many independent PRM realizations stored as flat arrays.

    Atoms of replica ``r`` occupy ``times[offsets[r]:offsets[r+1]]``.
    """

    horizon: float
    times: np.ndarray
    marks: np.ndarray
    offsets: np.ndarray

    @property
    def replicas(self) -> int:
        return self.offsets.size - 1

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def replica_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.replicas), self.counts)

    def __getitem__(self, r: int) -> PointMeasure:
        s = slice(self.offsets[r], self.offsets[r + 1])
        return PointMeasure(self.horizon, self.times[s], self.marks[s], ("z",))

    def counts_in(self, window=None, marks: Callable | None = None) -> np.ndarray:
        keep = np.ones(self.times.size, dtype=bool)
        if window is not None:
            a, b = window
            keep &= (self.times > a) & (self.times <= b)
        if marks is not None:
            keep &= np.asarray(marks(self.marks), dtype=bool)
        return np.bincount(self.replica_index[keep], minlength=self.replicas)


def sample_prm_ensemble(measure: LevyMeasure, horizon: float, replicas: int, seed) -> PointMeasureEnsemble:
    """Vectorized sampler for ``replicas`` independent PRMs from one seed."""
    rng = _rng(seed)
    mass = measure.mass()
    counts = rng.poisson(mass * horizon, size=replicas) if mass > 0 else np.zeros(replicas, dtype=int)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    rep = np.repeat(np.arange(replicas), counts)
    times = horizon * (1.0 - rng.random(offsets[-1]))
    order = np.lexsort((times, rep))
    times = times[order]
    while True:
        tie = (np.diff(times) == 0) & (np.diff(rep) == 0)
        if not tie.any():
            break
        bad = np.unique(rep[1:][tie])
        for r in bad:
            s = slice(offsets[r], offsets[r + 1])
            times[s] = np.sort(horizon * (1.0 - rng.random(counts[r])))
    marks = measure.sample(rng, int(offsets[-1]))
    return PointMeasureEnsemble(horizon, times, marks, offsets)


# ---------------------------------------------------------------------------
# compensated integrals
# ---------------------------------------------------------------------------


def compensator(measure: LevyMeasure, f: Callable, window: tuple[float, float], *,
                time_dependent: bool = True) -> float:
    """``int_a^b int f(s, z) nu(dz) ds`` by adaptive quadrature.

    With ``time_dependent=False`` the integrand is evaluated at ``s = a`` and
    the time integral is done analytically.
    """
    a, b = window
    if b < a:
        raise ValueError("window must satisfy a <= b")
    if b == a or measure.mass() == 0:
        return 0.0
    if not time_dependent:
        val = float(measure.integrate(lambda z: f(a, z))) * (b - a)
    else:
        val, _ = integrate.quad(lambda s: float(measure.integrate(lambda z: f(s, z))), a, b,
                                epsrel=QUAD_RTOL, epsabs=1e-14, limit=200)
    if not math.isfinite(val):
        raise CompensatorError("compensator term is not finite")
    return val


def compensated_integral(pm: PointMeasure, measure: LevyMeasure, f: Callable,
                         window: tuple[float, float] | None = None, *, time_dependent: bool = True) -> float:
    """``sum_{t_k in (a,b]} f(t_k, z_k) - int_a^b int f dnu ds``."""
    if window is None:
        window = (0.0, pm.horizon)
    a, b = window
    keep = (pm.times > a) & (pm.times <= b)
    jumps = float(np.sum(f(pm.times[keep], pm.marks[keep]))) if keep.any() else 0.0
    return jumps - compensator(measure, f, window, time_dependent=time_dependent)


def compensated_integrals(ens: PointMeasureEnsemble, measure: LevyMeasure, f: Callable,
                          window: tuple[float, float] | None = None, *, time_dependent: bool = True) -> np.ndarray:
    """Vectorized ``compensated_integral`` over every replica of an ensemble."""
    if window is None:
        window = (0.0, ens.horizon)
    a, b = window
    keep = (ens.times > a) & (ens.times <= b)
    vals = np.zeros(ens.times.size)
    vals[keep] = f(ens.times[keep], ens.marks[keep])
    sums = np.bincount(ens.replica_index, weights=vals, minlength=ens.replicas)
    return sums - compensator(measure, f, window, time_dependent=time_dependent)


def levy_path_from_prm(pm: PointMeasure, measure: LevyMeasure, grid: Sequence[float]) -> np.ndarray:
    """Values on ``grid`` of ``L(t) = int_0^t int z (eta - nu ds)(dz, ds)``.

    Right-continuous: a jump at ``t_k`` is included in ``L(t_k)``.
    """
    grid = np.asarray(grid, dtype=float)
    if pm.marks.ndim != 1:
        raise ValueError("scalar marks required")
    csum = np.concatenate([[0.0], np.cumsum(pm.marks)])
    idx = np.searchsorted(pm.times, grid, side="right")
    return csum[idx] - grid * measure.mean()
