"""Mechanical evaluation of parameter inequalities with slack reporting.

Strict inequalities pass only with slack above ``STRICT_TOL``; the
conditions describe open parameter sets, so a tuple on the boundary fails.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .noise import spectral_moment_sum

STRICT_TOL = 1e-12

SHIFT_NOTE = ("the positivity condition on the operator is taken to mean that a shift A + nu I makes every "
              "eigenvalue positive; the Dirichlet Laplacian satisfies it with nu = 0")


@dataclass
class Clause:
    """``lhs > rhs`` (strict) or ``lhs >= rhs``; ``slack = lhs - rhs``."""

    name: str
    lhs: float
    rhs: float
    strict: bool = True
    kind: str = "inequality"
    slack: float = field(init=False)
    verdict: bool = field(init=False)

    def __post_init__(self):
        self.lhs, self.rhs = float(self.lhs), float(self.rhs)
        self.slack = self.lhs - self.rhs
        self.verdict = self.slack > STRICT_TOL if self.strict else self.slack >= 0.0


@dataclass
class HypothesisReport:
    theorem: str
    params: dict
    clauses: list
    notes: list = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return all(c.verdict for c in self.clauses)

    def clause(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def failing(self) -> list:
        return [c.name for c in self.clauses if not c.verdict]

    def to_dict(self) -> dict:
        return {"theorem": self.theorem, "params": self.params, "verdict": self.verdict,
                "clauses": [asdict(c) for c in self.clauses], "notes": list(self.notes)}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _p_domain(p) -> list:
    return [Clause("domain: p > 1", p, 1.0, True, "domain"), Clause("domain: p <= 2", 2.0, p, False, "domain")]


def check_main(delta: float, delta_F: float, delta_G: float, delta_I: float, p: float) -> HypothesisReport:
    """``delta > max(delta_G + 1/p, delta_F - 1 + 1/p, delta_I)`` plus the domains of the exponents."""
    bound = max(delta_G + 1.0 / p, delta_F - 1.0 + 1.0 / p, delta_I)
    clauses = [Clause("delta > max(delta_G + 1/p, delta_F - 1 + 1/p, delta_I)", delta, bound)]
    clauses += _p_domain(p)
    clauses += [
        Clause("domain: delta_G >= 0", delta_G, 0.0, False, "domain"),
        Clause("domain: delta_G < 1/p", 1.0 / p, delta_G, True, "domain"),
        Clause("domain: delta_F >= 0", delta_F, 0.0, False, "domain"),
        Clause("domain: delta_F < 1", 1.0, delta_F, True, "domain"),
        Clause("domain: delta_I < 1/p", 1.0 / p, delta_I, True, "domain"),
    ]
    params = {"delta": delta, "delta_F": delta_F, "delta_G": delta_G, "delta_I": delta_I, "p": p}
    return HypothesisReport("existence_main", params, clauses, [SHIFT_NOTE])


def check_ex01(d: int, p: float, q: float, r: float, alpha: float, delta: float) -> HypothesisReport:
    """Conditions for the polynomial drift with spectral noise.

    ``d/r < d/(2p) (alpha - 1/2 + 1/r) - 3/p + 3/q`` and
    ``delta + 2/p < d/(2p) (alpha - 1/2 + 1/p)``, with ``r >= p`` and ``q >= p``.
    """
    rhs1 = d / (2.0 * p) * (alpha - 0.5 + 1.0 / r) - 3.0 / p + 3.0 / q
    rhs2 = d / (2.0 * p) * (alpha - 0.5 + 1.0 / p)
    clauses = [
        Clause("d/r < d/(2p)(alpha - 1/2 + 1/r) - 3/p + 3/q", rhs1, d / r),
        Clause("delta + 2/p < d/(2p)(alpha - 1/2 + 1/p)", rhs2, delta + 2.0 / p),
    ]
    clauses += _p_domain(p)
    clauses += [Clause("domain: r >= p", r, p, False, "domain"), Clause("domain: q >= p", q, p, False, "domain")]
    params = {"d": d, "p": p, "q": q, "r": r, "alpha": alpha, "delta": delta, "theta": 1.0 - p / q}
    return HypothesisReport("polynomial_drift_spectral_noise", params, clauses, [SHIFT_NOTE])


def check_stpn(d: int, k_order: int, p: float, q: float, gamma: float) -> HypothesisReport:
    """Conditions for space-time Poissonian noise: ``d < 2k/p + 4(1/q - 1/p)`` and ``gamma > d - d/p``."""
    clauses = [
        Clause("d < 2k/p + 4(1/q - 1/p)", 2.0 * k_order / p + 4.0 * (1.0 / q - 1.0 / p), d),
        Clause("gamma > d - d/p", gamma, d - d / p),
        Clause("domain: k >= 1", k_order, 1, False, "domain"),
        Clause("domain: k integer", 1.0 if float(k_order).is_integer() else 0.0, 1.0, False, "domain"),
    ]
    clauses += _p_domain(p)
    params = {"d": d, "k_order": k_order, "p": p, "q": q, "gamma": gamma}
    return HypothesisReport("spacetime_poisson_noise", params, clauses, [SHIFT_NOTE])


def check_claim_spectral(alpha: float, gamma: float, d: int, p: float, r: float) -> HypothesisReport:
    """``alpha > 1 + p (gamma/d + 1/2 - 1/r)`` with ``r >= 2``, cross-checked with the series verdict."""
    thr = 1.0 + p * (gamma / d + 0.5 - 1.0 / r)
    clauses = [Clause("alpha > 1 + p(gamma/d + 1/2 - 1/r)", alpha, thr),
               Clause("domain: r >= 2", r, 2.0, False, "domain")]
    ms = spectral_moment_sum(alpha, gamma, p, r, None, d)
    rep = HypothesisReport("spectral_noise_regularity", {"alpha": alpha, "gamma": gamma, "d": d, "p": p, "r": r},
                           clauses, [SHIFT_NOTE])
    rep.notes.append(f"series verdict: {'convergent' if ms.convergent else 'divergent'}; "
                     f"agrees with inequality: {ms.convergent == clauses[0].verdict}")
    return rep
