"""Grid approximation of mild solutions with frozen cell coefficients.

On the dyadic grid ``s_k = k h``, ``h = 2^-n``, the coefficients are frozen
at ``uhat``: ``x_n`` on the first cell and, on cell ``k >= 1``, the time
average of ``u`` over cell ``k - 1``. With ``b = P[F(uhat)] - int G(uhat; z) nu(dz)``
frozen, each mode solves ``u' = -rho u + b`` between atoms exactly, so

    u(s_k + s) = e^{-rho s} u_k + s phi1(rho s) b + sum_{a_m <= s} e^{-rho (s - a_m)} J_m,

with ``phi1(x) = (1 - e^{-x}) / x``. The cell integral needed for the next
``uhat`` is available in the same closed form.
"""
from __future__ import annotations

import math
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .coefficients import DiffusionSpec, DriftSpec
from .prm import LevyMeasure, PointMeasure
from .spectral import Norm, PathRecord, SpectralField, SpectralOperator, as_norm, semigroup_apply


class PartialResultsError(RuntimeError):
    """Monte Carlo run stopped early; ``completed`` replicas finished."""

    def __init__(self, message, completed: int, result=None):
        super().__init__(message)
        self.completed = completed
        self.result = result


def phi1(x) -> np.ndarray:
    """``(1 - e^{-x}) / x`` with the removable singularity filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x / 2.0 + x * x / 6.0, -np.expm1(-safe) / safe)


def phi2(x) -> np.ndarray:
    """``(x - 1 + e^{-x}) / x^2``, the double integral of ``e^{-x s}``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    series = 0.5 - x / 6.0 + x * x / 24.0 - x ** 3 / 120.0
    return np.where(small, series, (safe + np.expm1(-safe)) / (safe * safe))


def replica_seeds(base_seed: int, replicas: int) -> np.ndarray:
    """Per-replica seeds; replica ``r`` gets the same seed whatever the total count."""
    return np.random.SeedSequence(int(base_seed)).generate_state(replicas, dtype=np.uint64)


def default_lambda(drift: DriftSpec | None) -> float:
    """Exponential weight ``1 + beta + max(0, -k)``."""
    if drift is None:
        return 1.0
    return 1.0 + drift.beta + max(0.0, -drift.k)


@dataclass(frozen=True, eq=False)
class GridScheme:
    """Frozen-coefficient scheme at level ``n`` (step ``2^-n``) on ``[0, horizon]``.

    ``drift=None`` means ``F = 0``; ``noise=None`` or a zero diffusion means
    ``G = 0``. ``cutoff`` zeroes initial modes above the given index.
    """

    operator: SpectralOperator
    level: int
    x0: np.ndarray
    drift: DriftSpec | None = None
    diffusion: DiffusionSpec | None = None
    noise: object = None
    horizon: float = 1.0
    cutoff: int | None = None

    def __post_init__(self):
        x = self.x0.coefficients if isinstance(self.x0, SpectralField) else np.asarray(self.x0, dtype=float)
        x = np.array(x, dtype=float).reshape(-1)
        if x.size != self.operator.modes:
            raise ValueError("initial state must have one coefficient per mode")
        if self.cutoff is not None:
            x[self.cutoff:] = 0.0
        x.setflags(write=False)
        object.__setattr__(self, "x0", x)
        if self.level < 0:
            raise ValueError("level must be non-negative")
        cells = self.horizon / self.step
        if not self.horizon > 0 or abs(cells - round(cells)) > 1e-9:
            raise ValueError("horizon must be a positive multiple of the step 2^-n")

    @property
    def step(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def cells(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.cells + 1) * self.step

    @property
    def noise_active(self) -> bool:
        return self.noise is not None and not (self.diffusion is None or self.diffusion.is_zero)

    def at_level(self, level: int) -> "GridScheme":
        return GridScheme(self.operator, level, self.x0, self.drift, self.diffusion, self.noise, self.horizon,
                          self.cutoff)

    def with_noise(self, noise) -> "GridScheme":
        return GridScheme(self.operator, self.level, self.x0, self.drift, self.diffusion, noise, self.horizon,
                          self.cutoff)

    def descriptor(self) -> dict:
        return {"level": self.level, "horizon": self.horizon, "cutoff": self.cutoff,
                "x0": [float(v) for v in self.x0], "operator": self.operator.descriptor(),
                "drift": self.drift.descriptor() if self.drift else None,
                "diffusion": self.diffusion.descriptor() if self.diffusion else None,
                "noise": self.noise.descriptor() if self.noise is not None else None}


@dataclass(eq=False)
class GridSolution:
    """Output of the scheme for a batch of replicas.

    Grid arrays have shape ``(R, K + 1, N)``. ``uhat[:, k]`` is the frozen
    value on cell ``k`` and ``uhat[:, K]`` the average over the last cell.
    Event arrays (atoms and optional sub-cell samples) are sorted by
    replica then time.
    """

    scheme: GridScheme
    seeds: np.ndarray
    grid: np.ndarray
    u: np.ndarray
    u_left: np.ndarray
    uhat: np.ndarray
    z: np.ndarray
    events: dict | None = None
    atoms: list = field(default_factory=list)

    @property
    def replicas(self) -> int:
        return self.u.shape[0]

    @property
    def operator(self) -> SpectralOperator:
        return self.scheme.operator

    def free(self, times=None) -> np.ndarray:
        """``e^{-tA} x_n`` at ``times`` (the grid by default)."""
        t = self.grid if times is None else np.asarray(times, dtype=float)
        return np.exp(-np.multiply.outer(t, self.operator.rates)) * self.scheme.x0

    def _merge(self, r: int, grid_right, grid_left, ev_right=None, ev_left=None) -> PathRecord:
        times = self.grid
        right = grid_right
        left = grid_left
        if self.events is not None:
            sel = self.events["replica"] == r
            et = self.events["time"][sel]
            if et.size:
                off_grid = ~self.events["at_grid"][sel]
                et = et[off_grid]
                er = ev_right[sel][off_grid]
                el = ev_left[sel][off_grid]
                times = np.concatenate([times, et])
                right = np.concatenate([right, er])
                left = np.concatenate([left, el])
                order = np.argsort(times, kind="stable")
                times, right, left = times[order], right[order], left[order]
        return PathRecord(times, right, self.operator, left)

    def path(self, r: int = 0) -> PathRecord:
        """Cadlag record of ``u_n`` for replica ``r`` (grid plus event times)."""
        ev = self.events
        return self._merge(r, self.u[r], self.u_left[r], ev and ev["right"], ev and ev["left"])

    def drift_path(self, r: int = 0) -> PathRecord:
        """The drift convolution ``int_0^t e^{-(t-s)A} P[F(uhat(s))] ds`` (continuous)."""
        ev = self.events
        return self._merge(r, self.z[r], self.z[r], ev and ev["z"], ev and ev["z"])

    def complement_path(self, r: int = 0) -> PathRecord:
        """``u - z``: free evolution plus stochastic convolution."""
        return self.path(r) - self.drift_path(r)

    def noise_path(self, r: int = 0) -> PathRecord:
        """Stochastic convolution ``u - e^{-tA} x_n - z``."""
        comp = self.complement_path(r)
        free = self.free(comp.times)
        return PathRecord(comp.times, comp.states - free, self.operator, comp.left_states - free)

    def hat_path(self, r: int = 0) -> PathRecord:
        """Piecewise-constant ``uhat``; the record at ``s_k`` holds the cell-``k`` value."""
        left = np.concatenate([self.uhat[r, :1], self.uhat[r, :-1]])
        return PathRecord(self.grid, self.uhat[r], self.operator, left)

    def hat_minus_u(self, r: int = 0) -> PathRecord:
        """``u_n - uhat_n`` on the full record of ``u_n``."""
        up = self.path(r)
        h = self.scheme.step
        k_right = np.minimum(np.floor(up.times / h + 1e-12).astype(int), self.scheme.cells)
        k_left = np.clip(np.ceil(up.times / h - 1e-12).astype(int) - 1, 0, self.scheme.cells)
        return PathRecord(up.times, up.states - self.uhat[r, k_right], self.operator,
                          up.left_states - self.uhat[r, k_left])


def _sample_events(scheme: GridScheme, seeds, substeps: int):
    """Atoms of every replica (flattened) plus optional sub-cell sample points."""
    T = scheme.horizon
    times, marks, reps, atoms = [], [], [], []
    width = 2
    if scheme.noise_active:
        for r, s in enumerate(seeds):
            pm = scheme.noise.sample(T, np.random.default_rng(int(s)))
            atoms.append(pm)
            if len(pm):
                times.append(pm.times)
                m = pm.marks.reshape(len(pm), -1)
                width = m.shape[1]
                marks.append(m)
                reps.append(np.full(len(pm), r))
    t = np.concatenate(times) if times else np.empty(0)
    mk = np.concatenate(marks) if marks else np.empty((0, width))
    rp = np.concatenate(reps) if reps else np.empty(0, dtype=int)
    real = np.ones(t.size, dtype=bool)
    if substeps > 1:
        h = scheme.step
        frac = np.arange(1, substeps) / substeps
        vt = (np.arange(scheme.cells)[:, None] * h + frac * h).ravel()
        R = len(seeds)
        t = np.concatenate([t, np.tile(vt, R)])
        rp = np.concatenate([rp, np.repeat(np.arange(R), vt.size)])
        mk = np.concatenate([mk, np.full((R * vt.size, mk.shape[1]), np.nan)])
        real = np.concatenate([real, np.zeros(R * vt.size, dtype=bool)])
    return t, mk, rp.astype(int), real, atoms


def run_scheme(scheme: GridScheme, seeds, record_events: bool = False, substeps: int = 1) -> GridSolution:
    """Advance every replica through all cells, vectorized over replicas.

    Parameters
    ----------
    seeds : sequence of int
        One noise seed per replica.
    record_events : bool
        Keep left/right states at every atom time (and sub-cell samples).
    substeps : int
        With ``record_events``, also record ``substeps - 1`` equispaced
        interior points of every cell.
    """
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    op = scheme.operator
    rho = op.rates
    R, N, K, h = seeds.size, op.modes, scheme.cells, scheme.step
    g = scheme.diffusion
    noise = scheme.noise if scheme.noise_active else None
    drift = scheme.drift

    t, mk, rp, real, atoms = _sample_events(scheme, seeds, substeps if record_events else 1)
    cell = np.clip(np.ceil(t / h).astype(int) - 1, 0, K - 1)
    off = t - cell * h
    at_grid = t == (cell + 1) * h
    order = np.lexsort((t, rp, cell))
    bounds = np.searchsorted(cell[order], np.arange(K + 1))
    # rank of each event inside its (cell, replica) group
    rank = np.zeros(t.size, dtype=int)
    if t.size:
        key = cell[order] * R + rp[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(key)) + 1])
        first = np.repeat(starts, np.diff(np.concatenate([starts, [t.size]])))
        rank[order] = np.arange(t.size) - first

    ev_left = np.zeros((t.size, N)) if record_events else None
    ev_right = np.zeros((t.size, N)) if record_events else None
    ev_z = np.zeros((t.size, N)) if record_events else None

    e_h = np.exp(-rho * h)
    p1 = h * phi1(rho * h)
    p2 = h * h * phi2(rho * h)
    u = np.tile(scheme.x0, (R, 1))
    z = np.zeros((R, N))
    uhat = u.copy()
    U = np.empty((R, K + 1, N))
    UL = np.empty((R, K + 1, N))
    UH = np.empty((R, K + 1, N))
    Z = np.empty((R, K + 1, N))
    U[:, 0] = UL[:, 0] = u
    Z[:, 0] = 0.0
    zeros = np.zeros((R, N))
    for k in range(K):
        UH[:, k] = uhat
        fk = op.project(drift.scalar(op.synthesize(uhat))) if drift is not None else zeros
        b = fk - noise.compensator(op, g, uhat) if noise is not None else fk
        new = e_h * u + p1 * b
        integ = p1 * u + p2 * b
        znew = e_h * z + p1 * fk
        left_grid = new
        idx = order[bounds[k]:bounds[k + 1]]
        if idx.size:
            r = rp[idx]
            a = off[idx]
            J = np.zeros((idx.size, N))
            rl = real[idx]
            if rl.any():
                J[rl] = noise.jump_vectors(op, g, uhat[r[rl]], mk[idx[rl]])
            rem = (h - a)[:, None]
            np.add.at(new, r, np.exp(-rho * rem) * J)
            np.add.at(integ, r, rem * phi1(rho * rem) * J)
            ag = at_grid[idx]
            if ag.any():
                left_grid = new.copy()
                np.add.at(left_grid, r[ag], -J[ag])
            if record_events:
                aa = a[:, None]
                ea = np.exp(-rho * aa)
                lf = ea * u[r] + aa * phi1(rho * aa) * b[r]
                ev_z[idx] = ea * z[r] + aa * phi1(rho * aa) * fk[r]
                acc = np.zeros((R, N))
                last = np.zeros(R)
                rk = rank[idx]
                for q in range(int(rk.max()) + 1):
                    m = rk == q
                    rr = r[m]
                    carried = acc[rr] * np.exp(-rho * (a[m] - last[rr])[:, None])
                    lf[m] += carried
                    acc[rr] = carried + J[m]
                    last[rr] = a[m]
                ev_left[idx] = lf
                ev_right[idx] = lf + J
        u, z, uhat = new, znew, integ / h
        U[:, k + 1] = u
        UL[:, k + 1] = left_grid
        Z[:, k + 1] = z
    UH[:, K] = uhat

    events = None
    if record_events:
        so = np.lexsort((t, rp))
        events = {"time": t[so], "replica": rp[so], "at_grid": at_grid[so], "real": real[so],
                  "left": ev_left[so], "right": ev_right[so], "z": ev_z[so]}
    return GridSolution(scheme, seeds, scheme.grid, U, UL, UH, Z, events, atoms)


def grid_approx_path(scheme: GridScheme, seed: int, substeps: int = 1):
    """One replica of the scheme: the cadlag record of ``u_n`` and the step record of ``uhat_n``.

    The noise seed is derived from ``seed`` exactly as replica 0 of
    ``simulate_mc(scheme, replicas, seed)``.
    """
    sol = run_scheme(scheme, replica_seeds(seed, 1), record_events=True, substeps=substeps)
    return sol.path(0), sol.hat_path(0), sol


def cell_average(path: PathRecord, n: int, k: int) -> SpectralField:
    """Time average of ``u`` over cell ``k - 1`` of the level-``n`` grid (``x_n`` for ``k = 0``).

    Between consecutive records each mode is assumed to follow
    ``u' = -rho u + b`` with constant ``b``, which is exact for scheme output
    and for any constant or freely decaying path. ``b`` is recovered from the
    right value at the segment start and the left limit at its end.
    """
    op = path.operator
    if k == 0:
        return SpectralField(path.states[0], op)
    h = 2.0 ** (-n)
    lo, hi = (k - 1) * h, k * h
    t = path.times
    i0 = int(np.searchsorted(t, lo - 1e-12 * h))
    i1 = int(np.searchsorted(t, hi + 1e-12 * h))
    if i0 >= t.size or abs(t[i0] - lo) > 1e-9 * h or i1 == 0 or abs(t[i1 - 1] - hi) > 1e-9 * h:
        raise ValueError("cell endpoints must be recorded times")
    rho = op.rates
    total = np.zeros(op.modes)
    for j in range(i0, i1 - 1):
        d = t[j + 1] - t[j]
        x = rho * d
        f1 = phi1(x)
        total += d * (f1 * path.states[j] + (phi2(x) / f1) * (path.left_states[j + 1] - np.exp(-x) * path.states[j]))
    return SpectralField(total / h, op)


def stochastic_convolution(op: SpectralOperator, integrand: Callable, pm: PointMeasure, measure: LevyMeasure,
                           t: float, cell_width: float | None = None) -> SpectralField:
    """Compensated convolution ``int_0^t int e^{-(t-s)A} xi(s; z) (eta - nu ds)(dz, ds)``.

    ``integrand(k, z)`` returns the coefficient vector (shape ``(len(z), N)``
    for an array of marks) frozen on cell ``k = ceil(s / cell_width) - 1``.
    Without ``cell_width`` the integrand is frozen on all of ``(0, t]``.
    The compensator ``int_cell e^{-rho (t - s)} ds int xi dnu`` is integrated
    in closed form per cell. Atoms after ``t`` are ignored.

    Raises
    ------
    ValueError
        If ``t`` is negative or exceeds the horizon of ``pm``.
    """
    if t < 0 or t > pm.horizon * (1 + 1e-12):
        raise ValueError("evaluation time outside the window of the point measure")
    rho = op.rates
    w = t if cell_width is None else float(cell_width)
    if t == 0:
        return SpectralField(np.zeros(op.modes), op)
    ncell = max(int(math.ceil(t / w - 1e-12)), 1)
    out = np.zeros(op.modes)
    keep = pm.times <= t
    tau = pm.times[keep]
    marks = pm.marks[keep]
    cells = np.clip(np.ceil(tau / w).astype(int) - 1, 0, ncell - 1)
    for k in np.unique(cells):
        sel = cells == k
        vec = np.asarray(integrand(int(k), marks[sel]), dtype=float).reshape(int(sel.sum()), op.modes)
        out += np.sum(np.exp(-np.multiply.outer(t - tau[sel], rho)) * vec, axis=0)
    if measure.mass() > 0:
        for k in range(ncell):
            c0, c1 = k * w, min((k + 1) * w, t)
            comp = np.asarray(measure.integrate(lambda z: np.asarray(integrand(k, np.atleast_1d(z)),
                                                                     dtype=float).reshape(-1)), dtype=float)
            if not np.any(comp):
                continue
            weight = (np.exp(-rho * (t - c1)) - np.exp(-rho * (t - c0))) / rho
            out -= weight * comp
    return SpectralField(out, op)


def lambda_frac_inverse(op: SpectralOperator, alpha: float, f: PathRecord) -> PathRecord:
    """``(1/Gamma(alpha)) int_0^t (t - s)^{alpha - 1} e^{-(t - s)A} f(s) ds`` at every record time.

    ``f`` is interpolated linearly on each record interval, from the right
    value at its start to the left limit at its end, and the singular kernel
    is integrated exactly against both pieces with regularized incomplete
    gamma functions.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    t = f.times
    rho = op.rates
    mid = 0.5 * (f.states[:-1] + f.left_states[1:])  # (J, N)
    n_int = mid.shape[0]
    out = np.zeros((t.size, op.modes))
    if n_int == 0:
        return PathRecord(t, out, op)
    dt = np.diff(t)
    slope = (f.left_states[1:] - f.states[:-1]) / dt[:, None]

    def weights(lo, hi):
        # kernel integrals over lags [lo, hi]: of 1 and of (hi - width/2 - lag)
        p0 = special.gammainc(alpha, np.multiply.outer(hi, rho)) - special.gammainc(alpha, np.multiply.outer(lo, rho))
        p1 = (special.gammainc(alpha + 1, np.multiply.outer(hi, rho))
              - special.gammainc(alpha + 1, np.multiply.outer(lo, rho)))
        i0 = p0 * rho ** (-alpha)
        i1 = p1 * alpha * rho ** (-alpha - 1)
        c = (hi - 0.5 * (hi - lo))[:, None]
        return i0, c * i0 - i1

    if np.allclose(dt, dt[0], rtol=1e-12, atol=0):
        h = dt[0]
        lags = np.arange(n_int + 1) * h
        w0, w1 = weights(lags[:-1], lags[1:])  # index i: interval ending i steps before t
        for i in range(op.modes):
            out[1:, i] = (np.convolve(mid[:, i], w0[:, i])[:n_int]
                          + np.convolve(slope[:, i], w1[:, i])[:n_int])
    else:
        for m in range(1, t.size):
            w0, w1 = weights(t[m] - t[1:m + 1], t[m] - t[:m])
            out[m] = np.sum(w0 * mid[:m] + w1 * slope[:m], axis=0)
    return PathRecord(t, out, op)


@dataclass(eq=False)
class MCResult:
    """Ensemble summary of a Monte Carlo run.

    ``summary`` holds one row per grid time with keys ``time``,
    ``mean_norm_B``, ``p_moment_E``, ``ci_low``, ``ci_high`` (95 % normal
    interval of ``p_moment_E``). ``checkpoint_states`` has shape ``(R, C, N)``.
    ``weighted_moments`` holds, per replica, ``int e^{-lam t} |u(t)|_E^p dt``.
    """

    scheme: GridScheme
    base_seed: int
    seeds: np.ndarray
    summary: list
    checkpoint_times: np.ndarray
    checkpoint_states: np.ndarray
    weighted_moments: np.ndarray
    norm_E: Norm
    p: float
    lam: float
    solutions: list = field(default_factory=list)

    @property
    def replicas(self) -> int:
        return int(self.seeds.size)


def _thread_count(threads: int | None) -> int:
    cap = os.environ.get("LEVYRD_THREADS")
    n = threads if threads is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def simulate_mc(scheme: GridScheme, replicas: int, base_seed: int, *, threads: int | None = None,
                keep_paths: bool = False, checkpoints=None, p: float = 2.0, norm_E: Norm | None = None,
                lam: float | None = None, chunk: int = 256, time_budget: float | None = None) -> MCResult:
    """Run ``replicas`` independent copies of the scheme and reduce them.

    Replica ``r`` uses seed ``replica_seeds(base_seed, replicas)[r]``, which
    does not depend on ``replicas``. For a fixed ``chunk`` the output is
    bitwise identical for any thread count; changing ``chunk`` changes the
    BLAS batch shapes and hence results at the level of rounding only.

    Raises
    ------
    ValueError
        If ``replicas < 1``.
    PartialResultsError
        If ``time_budget`` seconds elapse or memory runs out; carries the
        number of completed replicas.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    norm_E = norm_E or Norm("E", p=p, delta=0.5)
    lam = default_lambda(scheme.drift) if lam is None else float(lam)
    seeds = replica_seeds(base_seed, replicas)
    grid = scheme.grid
    if checkpoints is None:
        cp_idx = np.arange(grid.size)
    else:
        cp_idx = np.rint(np.asarray(checkpoints, dtype=float) / scheme.step).astype(int)
        if np.any(np.abs(cp_idx * scheme.step - np.asarray(checkpoints)) > 1e-9) or np.any(cp_idx > scheme.cells):
            raise ValueError("checkpoints must be grid times inside the horizon")
    chunks = [seeds[i:i + chunk] for i in range(0, replicas, chunk)]
    start = _time.monotonic()
    op = scheme.operator

    def work(cs):
        if time_budget is not None and _time.monotonic() - start > time_budget:
            return None
        sol = run_scheme(scheme, cs)
        nB = as_norm(Norm("B", p=p))(sol.u, op)
        nE = norm_E(sol.u, op) ** p
        nEl = norm_E(sol.u_left, op) ** p
        w = np.exp(-lam * grid)
        wm = np.sum(0.5 * np.diff(grid) * (nE[:, :-1] * w[:-1] + nEl[:, 1:] * w[1:]), axis=1)
        return nB, nE, sol.u[:, cp_idx], wm, (sol if keep_paths else None)

    results = []
    try:
        with ThreadPoolExecutor(max_workers=_thread_count(threads)) as ex:
            for res in ex.map(work, chunks):
                results.append(res)
    except MemoryError as exc:
        done = sum(len(c) for c, r in zip(chunks, results) if r is not None)
        raise PartialResultsError("out of memory", done) from exc
    done = sum(len(c) for c, r in zip(chunks, results) if r is not None)
    if done < replicas:
        raise PartialResultsError(f"time budget exhausted after {done} of {replicas} replicas", done)

    nB = np.concatenate([r[0] for r in results])
    nE = np.concatenate([r[1] for r in results])
    cps = np.concatenate([r[2] for r in results])
    wm = np.concatenate([r[3] for r in results])
    sols = [r[4] for r in results] if keep_paths else []
    mean_E = nE.mean(axis=0)
    se = nE.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.zeros_like(mean_E)
    summary = [{"time": float(grid[j]), "mean_norm_B": float(nB[:, j].mean()), "p_moment_E": float(mean_E[j]),
                "ci_low": float(mean_E[j] - 1.96 * se[j]), "ci_high": float(mean_E[j] + 1.96 * se[j])}
               for j in range(grid.size)]
    return MCResult(scheme, int(base_seed), seeds, summary, grid[cp_idx], cps, wm, norm_E, p, lam, sols)
