"""Command line entry point: ``levyrd {simulate,ladder,gate,diagnose,noise-sample}``.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 hypothesis
gate failure, 3 Monte Carlo run stopped with partial results.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from scipy import special

from . import gate as gate_mod
from .config import SCHEMA_VERSION, ConfigError, RunConfig
from .diagnostics import _jsonable, cauchy_decay_fit, moment_estimate
from .noise import SpectralNoiseSpec
from .prm import total_p_moment
from .solver import PartialResultsError, replica_seeds, simulate_mc

log = logging.getLogger("levyrd")

EXIT_OK, EXIT_INVALID, EXIT_GATE, EXIT_PARTIAL = 0, 1, 2, 3

GATE_CHECKS = {
    "main": gate_mod.check_main,
    "ex01": gate_mod.check_ex01,
    "stpn": gate_mod.check_stpn,
    "claim_spectral": gate_mod.check_claim_spectral,
}


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


def run_id(resolved: dict) -> str:
    """Hash of the resolved configuration (seed included) and the schema version."""
    ident = {k: v for k, v in resolved.items() if k != "outputs"}
    ident["outputs"] = {"formats": resolved["outputs"]["formats"]}
    ident["schema_version"] = SCHEMA_VERSION
    return hashlib.sha256(_dump(ident).encode()).hexdigest()


class ArtifactWriter:
    """Writes artifacts into one directory and records their content hashes."""

    def __init__(self, directory, formats):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.formats = set(formats)
        self.hashes = {}

    def _record(self, name: str, data: bytes):
        (self.dir / name).write_bytes(data)
        self.hashes[name] = hashlib.sha256(data).hexdigest()

    def json(self, name: str, obj, force: bool = False):
        if force or "json" in self.formats:
            self._record(name, _dump(obj).encode())

    def csv(self, name: str, header, rows):
        if "csv" not in self.formats:
            return
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
        self._record(name, ("\n".join(lines) + "\n").encode())

    def file(self, name: str, write):
        path = self.dir / name
        write(path)
        self.hashes[name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def manifest(self, command: str, cfg_resolved: dict, seeds, status: str, extra=None) -> dict:
        man = {"schema_version": SCHEMA_VERSION, "command": command, "status": status,
               "run_id": run_id(cfg_resolved), "base_seed": int(cfg_resolved["mc"]["seed"]),
               "replica_seeds": [int(s) for s in seeds], "artifacts": dict(sorted(self.hashes.items()))}
        if extra:
            man.update(extra)
        (self.dir / "manifest.json").write_text(_dump(man))
        return man


def gate_report(cfg: RunConfig):
    g = cfg["gate"]
    try:
        return GATE_CHECKS[g["theorem"]](**g["params"])
    except TypeError as exc:
        raise ConfigError(f"parameters do not match theorem {g['theorem']!r}: {exc}", "gate.params") from None


def _resolved_for_disk(resolved: dict) -> dict:
    out = dict(resolved)
    out["outputs"] = {"formats": resolved["outputs"]["formats"]}
    return out


def cmd_gate(cfg, out: ArtifactWriter, resolved) -> int:
    rep = gate_report(cfg)
    out.json("gate_report.json", rep.to_dict(), force=True)
    out.manifest("gate", resolved, [], "pass" if rep.verdict else "fail")
    print(rep.to_json())
    return EXIT_OK if rep.verdict else EXIT_GATE


def cmd_simulate(cfg, out: ArtifactWriter, resolved) -> int:
    scheme = cfg.scheme()
    mc = cfg["mc"]
    try:
        res = simulate_mc(scheme, mc["replicas"], mc["seed"], threads=mc["threads"], checkpoints=mc["checkpoints"],
                          p=float(mc["p"]), norm_E=cfg.norm_E(), lam=resolved["scheme"]["lam"],
                          time_budget=mc["time_budget"])
    except PartialResultsError as exc:
        log.error("%s", exc)
        out.json("error.json", {"error": str(exc), "completed": exc.completed}, force=True)
        out.manifest("simulate", resolved, [], "partial", {"completed": exc.completed})
        return EXIT_PARTIAL
    keys = ["time", "mean_norm_B", "p_moment_E", "ci_low", "ci_high"]
    out.csv("summary.csv", keys, ([row[k] for k in keys] for row in res.summary))
    out.csv("weighted_moments.csv", ["replica", "seed", "weighted_moment"],
            ([r, int(s), float(v)] for r, (s, v) in enumerate(zip(res.seeds, res.weighted_moments))))
    if mc["checkpoints"] is not None:
        n = scheme.operator.modes
        rows = ([r, float(t)] + [float(c) for c in res.checkpoint_states[r, j]]
                for r in range(res.replicas) for j, t in enumerate(res.checkpoint_times))
        out.csv("checkpoints.csv", ["replica", "time"] + [f"c{i}" for i in range(1, n + 1)], rows)
    rep = moment_estimate(res.weighted_moments, res.p, res.lam, res.norm_E, seed=mc["seed"])
    rep.seeds = list(res.seeds)
    out.json("moment_report.json", rep.to_dict())
    out.manifest("simulate", resolved, res.seeds, "ok")
    return EXIT_OK


def cmd_ladder(cfg, out: ArtifactWriter, resolved) -> int:
    levels = cfg["scheme"]["levels"]
    if len(levels) < 3:
        raise ConfigError("convergence ladder needs at least three levels", "scheme.levels")
    mc = cfg["mc"]
    fit = cauchy_decay_fit(cfg.scheme(), levels, mc["seed"], replicas=mc["ladder_replicas"], p=float(mc["p"]),
                           lam=resolved["scheme"]["lam"], norm=cfg.norm_E(), substeps=cfg["scheme"]["substeps"])
    out.csv("ladder.csv", ["level", "distance"], zip(fit.levels, fit.distances))
    out.json("ladder_report.json", {"theta": fit.theta, "intercept": fit.intercept, "r2": fit.r2,
                                    "levels": fit.levels, "distances": fit.distances,
                                    "decaying": bool(math.isfinite(fit.theta) and fit.theta > 0)})
    out.manifest("ladder", resolved, replica_seeds(mc["seed"], mc["ladder_replicas"]), "ok")
    return EXIT_OK


def tail_report(noise: SpectralNoiseSpec, p: float, mode_counts=(8, 16, 32, 64, 128)) -> dict:
    """Discarded noise p-moment ``C_nu sum_{i > N} lambda_i^p`` and the unweighted ``sum lambda_i`` tail."""
    c_nu = total_p_moment(noise.base, p)
    rows = []
    for n in mode_counts:
        spec = SpectralNoiseSpec(noise.alpha, n, noise.base)
        lin = math.inf if noise.alpha <= 1 else float(special.zeta(noise.alpha, n + 1))
        rows.append({"modes": n, "tail_p_moment": spec.tail_p_moment(p, c_nu), "tail_weight_sum": lin})
    return {"p": p, "c_nu": c_nu, "alpha": noise.alpha, "rows": rows}


def cmd_diagnose(cfg, out: ArtifactWriter, resolved) -> int:
    scheme = cfg.scheme()
    mc = cfg["mc"]
    try:
        res = simulate_mc(scheme, mc["replicas"], mc["seed"], threads=mc["threads"], p=float(mc["p"]),
                          norm_E=cfg.norm_E(), lam=resolved["scheme"]["lam"], time_budget=mc["time_budget"])
    except PartialResultsError as exc:
        out.json("error.json", {"error": str(exc), "completed": exc.completed}, force=True)
        out.manifest("diagnose", resolved, [], "partial", {"completed": exc.completed})
        return EXIT_PARTIAL
    rep = moment_estimate(res.weighted_moments, res.p, res.lam, res.norm_E, seed=mc["seed"])
    report = {"moment": rep.to_dict(), "gate": gate_report(cfg).to_dict()}
    noise = scheme.noise
    if isinstance(noise, SpectralNoiseSpec):
        report["noise_tail"] = tail_report(noise, float(mc["p"]))
    out.json("diagnostics.json", report)
    out.manifest("diagnose", resolved, res.seeds, "ok")
    return EXIT_OK


def cmd_noise_sample(cfg, out: ArtifactWriter, resolved) -> int:
    noise = cfg.noise()
    if noise is None:
        raise ConfigError("noise kind 'none' has nothing to sample", "noise.kind")
    seed = cfg["mc"]["seed"]
    pm = noise.sample(float(cfg["scheme"]["horizon"]), seed)
    out.file("noise.csv", lambda path: pm.to_csv(path, noise.base, seed, {"noise": noise.descriptor()}))
    out.manifest("noise-sample", resolved, [seed], "ok", {"atoms": len(pm)})
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "ladder": cmd_ladder, "gate": cmd_gate, "diagnose": cmd_diagnose,
            "noise-sample": cmd_noise_sample}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levyrd", description="Jump-noise reaction-diffusion experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML file or bundled example name")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--gate", action="store_true", help="abort unless the configured hypotheses hold")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config).override(seed=args.seed, replicas=args.replicas, out=args.out)
        resolved = cfg.resolved()
        out = ArtifactWriter(cfg["outputs"]["directory"], cfg["outputs"]["formats"])
        out.json("resolved_config.json", _resolved_for_disk(resolved), force=True)
        if args.gate and args.command != "gate":
            rep = gate_report(cfg)
            out.json("gate_report.json", rep.to_dict(), force=True)
            if not rep.verdict:
                log.error("hypothesis gate failed: %s", ", ".join(rep.failing()))
                out.manifest(args.command, resolved, [], "gate-failed")
                return EXIT_GATE
        return COMMANDS[args.command](cfg, out, resolved)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"levyrd: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
