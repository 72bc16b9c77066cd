"""Numerical checks of moment bounds, a-priori bounds, convergence rates and path distances."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .prm import InfiniteMomentError, LevyMeasure
from .solver import GridScheme, GridSolution, default_lambda, phi1, phi2, replica_seeds, run_scheme
from .spectral import Norm, PathRecord, SpectralOperator, as_norm, lp_lambda_norm

BOOTSTRAP_RESAMPLES = 200


@dataclass
class EstimateReport:
    """Computed value against an oracle value or bound, with its verdict."""

    name: str
    value: float
    bound: float | None = None
    tolerance: float | None = None
    verdict: bool = True
    replicas: int = 0
    seeds: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = [int(s) for s in self.seeds]
        return _jsonable(d)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary_csv(reports, path) -> None:
    """One row per report: name, value, bound, verdict."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "value", "bound", "verdict"])
        for r in reports:
            w.writerow([r.name, repr(float(r.value)), "" if r.bound is None else repr(float(r.bound)),
                        "pass" if r.verdict else "fail"])


def bootstrap_ci(values, seed=0, resamples: int = BOOTSTRAP_RESAMPLES, level: float = 0.95, stat=np.mean):
    """Percentile bootstrap interval and bootstrap standard error of ``stat``."""
    values = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    n = values.shape[0]
    idx = rng.integers(0, n, size=(resamples, n))
    boot = np.array([stat(values[i], axis=0) for i in idx])
    lo, hi = np.percentile(boot, [50 * (1 - level), 50 * (1 + level)], axis=0)
    return lo, hi, boot.std(axis=0, ddof=1)


def grid_weighted_moments(grid, u, u_left, p: float, lam: float, norm, op: SpectralOperator) -> np.ndarray:
    """Per replica ``int e^{-lam t} |u(t)|^p dt`` from grid arrays of shape ``(R, K+1, N)``."""
    nrm = as_norm(norm)
    w = np.exp(-lam * grid)
    right = nrm(u, op) ** p
    left = nrm(u_left, op) ** p
    return np.sum(0.5 * np.diff(grid) * (right[:, :-1] * w[:-1] + left[:, 1:] * w[1:]), axis=1)


def moment_estimate(ensemble, p: float, lam: float, norm="B", seed=0, oracle: float | None = None,
                    tolerance: float | None = None, name: str = "weighted_moment") -> EstimateReport:
    """Monte Carlo estimate of ``int e^{-lam t} E|u(t)|^p dt`` over the recorded horizon.

    ``ensemble`` is a GridSolution (grid records), a list of PathRecords or
    a 1-D array of per-replica integrals. The interval is a percentile
    bootstrap. With ``oracle`` and ``tolerance`` the verdict compares the two;
    otherwise it only asserts finiteness.
    """
    seeds = []
    if isinstance(ensemble, GridSolution):
        vals = grid_weighted_moments(ensemble.grid, ensemble.u, ensemble.u_left, p, lam, norm, ensemble.operator)
        seeds = list(ensemble.seeds)
    elif isinstance(ensemble, np.ndarray):
        vals = ensemble
    else:
        vals = np.array([lp_lambda_norm(x, p, lam, norm) for x in ensemble])
    if vals.size == 0:
        raise ValueError("empty ensemble")
    est = float(vals.mean())
    if vals.size > 1:
        lo, hi, se = bootstrap_ci(vals, seed)
    else:
        lo = hi = est
        se = 0.0
    if oracle is not None and tolerance is not None:
        verdict = abs(est - oracle) <= tolerance
    else:
        verdict = math.isfinite(est)
    nrm = as_norm(norm)
    return EstimateReport(name, est, oracle, tolerance, bool(verdict), int(vals.size), seeds,
                          {"ci_low": float(lo), "ci_high": float(hi), "bootstrap_se": float(se), "p": p,
                           "lam": lam, "norm": nrm.label(), "proxy_norm": nrm.is_proxy})


def apriori_bound_check(z: PathRecord, v: PathRecord, k: float, a, norm="sup", tol: float = 0.05,
                        name: str = "apriori_bound") -> EstimateReport:
    """Compare ``|z(t)|_X`` with ``int_0^t e^{-k (t-s)} a(|v(s)|_X) ds`` at every recorded time.

    The right side is propagated interval by interval with ``a(|v|)``
    interpolated linearly from the right value at the start to the left limit
    at the end, and the exponential weight integrated exactly.
    Pass iff ``lhs <= rhs (1 + tol)`` everywhere.
    """
    if not np.array_equal(z.times, v.times):
        raise ValueError("z and v must be recorded on the same times")
    nrm = as_norm(norm)
    lhs = np.maximum(nrm(z.states, z.operator), nrm(z.left_states, z.operator))
    a_right = np.asarray(a(nrm(v.states, v.operator)), dtype=float)
    a_left = np.asarray(a(nrm(v.left_states, v.operator)), dtype=float)
    t = z.times
    rhs = np.zeros(t.size)
    for j in range(t.size - 1):
        d = t[j + 1] - t[j]
        x = k * d
        f1, f2 = phi1(x), phi2(x)
        rhs[j + 1] = math.exp(-x) * rhs[j] + d * ((f1 - f2) * a_right[j] + f2 * a_left[j + 1])
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    ok = bool(np.all(lhs <= rhs * (1.0 + tol)))
    worst = int(np.argmax(ratio))
    return EstimateReport(name, float(ratio[worst]), 1.0 + tol, tol, ok, 1, [],
                          {"worst_time": float(t[worst]), "lhs": lhs, "rhs": rhs, "norm": nrm.label(), "k": k})


def lp_distance(diffs, p: float, lam: float, norm="B") -> float:
    """``(mean_r int e^{-lam t} |d_r(t)|^p dt)^{1/p}`` for difference records ``d_r``."""
    vals = [lp_lambda_norm(d, p, lam, norm) for d in diffs]
    return float(np.mean(vals)) ** (1.0 / p)


@dataclass
class CauchyFit:
    theta: float
    intercept: float
    r2: float
    levels: list
    distances: list


def fit_log2_rate(levels, values) -> CauchyFit:
    """Least squares of ``log2(values)`` against ``levels``; ``theta`` is minus the slope."""
    n = np.asarray(levels, dtype=float)
    y = np.log2(np.asarray(values, dtype=float))
    A = np.column_stack([n, np.ones_like(n)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    return CauchyFit(float(-coef[0]), float(coef[1]), r2, [int(v) for v in levels], [float(v) for v in values])


def cauchy_decay_fit(scheme: GridScheme, levels, seed, replicas: int = 8, p: float = 2.0, lam: float | None = None,
                     norm="B", substeps: int = 4) -> CauchyFit:
    """Fit ``|uhat_n - u_n|_{M^p_lam} ~ C 2^{-theta n}`` across ``levels``.

    Every level reuses the same replica seeds, hence the same noise atoms.
    Each cell is sampled at ``substeps`` interior points besides the atoms.
    """
    levels = [int(n) for n in levels]
    if len(levels) < 3:
        raise ValueError("need at least three levels")
    lam = default_lambda(scheme.drift) if lam is None else lam
    seeds = replica_seeds(seed, replicas)
    dists = []
    for n in levels:
        sol = run_scheme(scheme.at_level(n), seeds, record_events=True, substeps=substeps)
        dists.append(lp_distance([sol.hat_minus_u(r) for r in range(replicas)], p, lam, norm))
    if min(dists) <= 0:
        return CauchyFit(math.nan, math.nan, math.nan, levels, dists)
    return fit_log2_rate(levels, dists)


def sup_increment_check(paths, delta: float, delta_G: float, windows, t1: float = 0.0, lam: float = 1.0,
                        norm="B", p: float = 2.0, name: str = "sup_increment") -> EstimateReport:
    """``E sup_{t1 <= t <= t1 + w} e^{-lam t} |A^{-delta} (S(t) - e^{-(t-t1)A} S(t1))|`` per window ``w``.

    ``paths`` are convolution-only records ``S`` (no free or drift part); the
    sup runs over right values and left limits at all recorded times. The
    window exponent is fitted on a log-log scale and the verdict is a positive
    exponent. ``delta > delta_G + 1/p`` is reported as ``precondition``.
    """
    windows = np.asarray(sorted(windows), dtype=float)
    nrm = as_norm(norm)
    est = np.zeros(windows.size)
    for path in paths:
        op = path.operator
        rho = op.rates
        j1 = int(np.searchsorted(path.times, t1 - 1e-12))
        s1 = path.states[j1]
        for w_i, w in enumerate(windows):
            sel = slice(j1, int(np.searchsorted(path.times, t1 + w + 1e-12)))
            tt = path.times[sel]
            decay = np.exp(-np.multiply.outer(tt - t1, rho)) * s1
            inc_r = (path.states[sel] - decay) * rho ** (-delta)
            inc_l = (path.left_states[sel] - decay) * rho ** (-delta)
            wt = np.exp(-lam * tt)
            val = np.max(wt * np.maximum(nrm(inc_r, op), nrm(inc_l, op))) if tt.size else 0.0
            est[w_i] += val
    est /= max(len(paths), 1)
    positive = est > 0
    if positive.sum() >= 2:
        slope = float(np.polyfit(np.log(windows[positive]), np.log(est[positive]), 1)[0])
    else:
        slope = math.nan
    verdict = bool(slope > 0) if math.isfinite(slope) else bool(np.all(est == 0))
    return EstimateReport(name, slope, 0.0, None, verdict, len(paths), [],
                          {"windows": windows, "estimates": est, "t1": t1, "lam": lam, "delta": delta,
                           "delta_G": delta_G, "precondition": bool(delta > delta_G + 1.0 / p)})


# ---------------------------------------------------------------------------
# Skorohod J1 distance between step interpolants of records
# ---------------------------------------------------------------------------


def _steps(path: PathRecord):
    """Breakpoints and segment values of the right-continuous step interpolant on ``[0, T)``."""
    t = path.times
    vals = path.states[:-1] if t.size > 1 else path.states
    starts = t[:-1] if t.size > 1 else t
    keep = np.ones(len(starts), dtype=bool)
    keep[1:] = np.any(vals[1:] != vals[:-1], axis=1)
    return starts[keep], vals[keep], path.states[-1]


def uniform_distance(x: PathRecord, y: PathRecord, norm="B") -> float:
    """Sup over time of ``|x(t) - y(t)|`` for the step interpolants."""
    ax, vx, ex = _steps(x)
    by, vy, ey = _steps(y)
    nrm = as_norm(norm)
    pts = np.union1d(ax, by)
    ix = np.searchsorted(ax, pts, side="right") - 1
    iy = np.searchsorted(by, pts, side="right") - 1
    d = nrm(vx[ix] - vy[iy], x.operator)
    return float(max(np.max(d), nrm(ex - ey, x.operator)))


def _coarsen(path: PathRecord, K: int) -> PathRecord:
    starts, vals, end = _steps(path)
    if starts.size <= K:
        return path
    jumps = np.linalg.norm(np.diff(vals, axis=0), axis=1)
    keep = np.sort(np.argsort(-jumps, kind="stable")[: K - 1] + 1)
    idx = np.concatenate([[0], keep])
    times = np.concatenate([starts[idx], [path.times[-1]]])
    states = np.concatenate([vals[idx], end[None, :]])
    return PathRecord(times, states, path.operator)


def _j1_feasible(a, b, T, free, delta) -> bool:
    """Monotone path from ``(0, 0)`` to ``(T, T)`` through free cells within the band ``|s - t| <= delta``."""
    m, n = a.size, b.size
    delta = delta + 1e-12 * max(T, 1.0)
    ae = np.append(a, T)
    be = np.append(b, T)
    left = {(0, 0): (0.0, 0.0)}  # reachable t-interval on the left edge of cell (i, j)
    bottom = {(0, 0): (0.0, 0.0)}  # reachable s-interval on the bottom edge of cell (i, j)
    for j in range(n):
        b0, b1 = be[j], be[j + 1]
        i_lo = max(int(np.searchsorted(ae, b0 - delta, side="left")) - 1, 0)
        i_hi = min(int(np.searchsorted(ae, b1 + delta, side="right")), m)
        for i in range(i_lo, i_hi):
            L = left.pop((i, j), None)
            B = bottom.pop((i, j), None)
            if (L is None and B is None) or not free[i, j]:
                continue
            a0, a1 = ae[i], ae[i + 1]
            if i == m - 1 and j == n - 1:
                return True
            # top edge t = b1
            lo, hi = max(a0, b1 - delta), min(a1, b1 + delta)
            if L is None:
                lo = max(lo, B[0])
            if lo <= hi and j + 1 < n:
                prev = bottom.get((i, j + 1))
                bottom[(i, j + 1)] = (lo, hi) if prev is None else (min(prev[0], lo), max(prev[1], hi))
            # corner (a1, b1): a matched pair of breakpoints, enter (i+1, j+1) diagonally
            if lo <= hi and hi >= a1 and i + 1 < m and j + 1 < n:
                prev = left.get((i + 1, j + 1))
                left[(i + 1, j + 1)] = (b1, b1) if prev is None else (min(prev[0], b1), max(prev[1], b1))
            # right edge s = a1
            lo, hi = max(b0, a1 - delta), min(b1, a1 + delta)
            if B is None:
                lo = max(lo, L[0])
            if lo <= hi and i + 1 < m:
                prev = left.get((i + 1, j))
                left[(i + 1, j)] = (lo, hi) if prev is None else (min(prev[0], lo), max(prev[1], hi))
    return False


def skorohod_distance(x: PathRecord, y: PathRecord, K: int | None = None, norm="B") -> float:
    """J1 distance between the step interpolants of two records on a common horizon.

    ``inf_lam max(sup_t |x(lam(t)) - y(t)|, sup_t |lam(t) - t|)`` over increasing
    homeomorphisms of ``[0, T]``. For step functions the optimum is one of the
    values ``|x_i - y_j|`` or ``|a_i - b_j|`` (segment values, breakpoints), and
    feasibility of a level is a monotone reachability question on the grid of
    segment pairs, so the value is exact. ``K`` caps the number of segments
    per path: longer paths keep only their ``K - 1`` largest jumps first.
    Never exceeds ``uniform_distance``.
    """
    T = x.times[-1]
    if not math.isclose(T, y.times[-1], rel_tol=0, abs_tol=1e-12) or x.times[0] != y.times[0]:
        raise ValueError("paths must share their time window")
    if K is not None:
        x, y = _coarsen(x, K), _coarsen(y, K)
    nrm = as_norm(norm)
    a, vx, ex = _steps(x)
    b, vy, ey = _steps(y)
    t0 = x.times[0]
    a, b, T = a - t0, b - t0, T - t0
    cost = nrm(vx[:, None, :] - vy[None, :, :], x.operator)
    end_gap = float(nrm(ex - ey, x.operator))
    upper = uniform_distance(x, y, norm)
    a_in, b_in = a[1:], b[1:]
    timegaps = np.abs(np.subtract.outer(a_in, b_in)).ravel() if a_in.size and b_in.size else np.empty(0)
    cands = np.unique(np.concatenate([[0.0, end_gap, upper], cost.ravel(), timegaps, a_in, b_in, T - a_in, T - b_in]))
    cands = cands[(cands >= end_gap) & (cands <= upper)]
    lo, hi = 0, cands.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _j1_feasible(a, b, T, cost <= cands[mid], cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


# ---------------------------------------------------------------------------
# closed-form Ornstein-Uhlenbeck moments
# ---------------------------------------------------------------------------


def ou_oracle(op: SpectralOperator, mode: int, sigma: float, measure: LevyMeasure, t: float, x: float = 0.0):
    """Mean and variance of mode ``mode`` (1-based) of ``du = -A u dt + sigma dL`` along ``e_mode``.

    ``L`` is the compensated pure-jump process with intensity ``measure``:
    mean ``e^{-rho t} x``, variance ``sigma^2 m2 (1 - e^{-2 rho t}) / (2 rho)``.

    Raises
    ------
    InfiniteMomentError
        If the second moment of ``measure`` is infinite.
    """
    m2 = measure.second_moment()
    if not math.isfinite(m2):
        raise InfiniteMomentError("second moment of the jump measure is infinite")
    rho = float(op.rates[mode - 1])
    if math.isinf(t):
        return 0.0, sigma ** 2 * m2 / (2.0 * rho)
    mean = math.exp(-rho * t) * x
    var = sigma ** 2 * m2 * (-math.expm1(-2.0 * rho * t)) / (2.0 * rho)
    return mean, var
