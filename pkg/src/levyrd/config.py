"""Run configuration: TOML ingestion, validation, defaults and object construction."""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .coefficients import DiffusionSpec, DriftSpec
from .noise import ScalarNoiseSpec, SpaceTimeNoiseSpec, SpectralNoiseSpec
from .prm import LevyMeasure
from .solver import GridScheme, default_lambda
from .spectral import Norm, dirichlet_laplacian

SCHEMA_VERSION = 1

DEFAULTS = {
    "operator": {"law": "dirichlet", "modes": 8, "shift": 0.0, "grid_points": None},
    "initial": {"kind": "zero", "values": [], "amplitude": 1.0},
    "noise": {"kind": "none", "alpha": 1.0, "modes": None, "length": 1.0,
              "measure": {"kind": "uniform", "low": -1.0, "high": 1.0, "value": 1.0, "epsilon": 0.0}},
    "drift": {"kind": "none", "q": 3.0, "beta": 0.0, "truncation": None, "k": 1.0, "k0": 1.0},
    "diffusion": {"kind": "const", "value": 1.0, "table": None},
    "scheme": {"level": 6, "levels": [4, 6, 8], "horizon": 1.0, "lam": None, "substeps": 4},
    "mc": {"replicas": 64, "seed": 0, "threads": None, "p": 2.0, "norm": "E", "delta": 0.5,
           "checkpoints": None, "time_budget": None, "ladder_replicas": 8},
    "gate": {"theorem": "main", "params": {}},
    "outputs": {"directory": "levyrd-out", "formats": ["csv", "json"]},
}

BUNDLED = ("eq1", "spectral", "stpn", "ex01")

_ALLOWED = {
    "operator.law": ("dirichlet",),
    "initial.kind": ("zero", "coefficients", "sine", "parabola"),
    "noise.kind": ("none", "scalar", "spectral", "spacetime"),
    "drift.kind": ("none", "poly"),
    "diffusion.kind": ("sin", "sinsininv", "const", "custom"),
    "mc.norm": ("B", "E", "X", "sup"),
    "gate.theorem": ("main", "ex01", "stpn", "claim_spectral"),
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted key and ``line`` the TOML line, when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field, self.line = field, line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def _merge(base: dict, over: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError("unknown key", name)
        if isinstance(base[key], dict) and key not in ("measure", "params"):
            if not isinstance(val, dict):
                raise ConfigError("expected a table", name)
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _line_of(text: str, field: str) -> int | None:
    """Best-effort line number of a dotted key in the TOML source."""
    section, _, key = field.rpartition(".")
    in_section = section == ""
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("["):
            in_section = line.strip("[]").strip() == section
            continue
        if in_section and line.split("=")[0].strip() == key:
            return i
    return None


@dataclass
class RunConfig:
    """Fully resolved run configuration; ``data`` holds every block with defaults filled in."""

    data: dict
    source: str = "<dict>"

    @classmethod
    def from_dict(cls, raw: dict, source: str = "<dict>", text: str | None = None) -> "RunConfig":
        try:
            data = _merge(DEFAULTS, raw)
            cfg = cls(data, source)
            cfg.validate()
        except ConfigError as exc:
            if exc.line is None and exc.field and text is not None:
                raise ConfigError(str(exc).split(": ", 1)[-1], exc.field, _line_of(text, exc.field)) from None
            raise
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        """Read a TOML file, or a bundled example when ``path`` is one of ``BUNDLED``."""
        path = str(path)
        if path in BUNDLED:
            text = resources.files("levyrd").joinpath("configs", f"{path}.toml").read_text()
        else:
            text = Path(path).read_text()
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(exc), None, getattr(exc, "lineno", None)) from None
        return cls.from_dict(raw, path, text)

    def __getitem__(self, key):
        return self.data[key]

    def override(self, **kw) -> "RunConfig":
        """Copy with ``mc.seed``, ``mc.replicas`` or ``outputs.directory`` replaced (``None`` keeps)."""
        data = copy.deepcopy(self.data)
        for key, (block, name) in {"seed": ("mc", "seed"), "replicas": ("mc", "replicas"),
                                   "out": ("outputs", "directory")}.items():
            if kw.get(key) is not None:
                data[block][name] = kw[key]
        cfg = RunConfig(data, self.source)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        d = self.data
        for field, allowed in _ALLOWED.items():
            block, key = field.split(".")
            if d[block][key] not in allowed:
                raise ConfigError(f"must be one of {allowed}, got {d[block][key]!r}", field)
        for field, low in (("operator.modes", 1), ("mc.replicas", 1), ("scheme.level", 0), ("scheme.substeps", 1),
                           ("mc.ladder_replicas", 1)):
            block, key = field.split(".")
            val = d[block][key]
            if isinstance(val, bool) or not isinstance(val, int) or val < low:
                raise ConfigError(f"must be an integer >= {low}", field)
        if not d["scheme"]["horizon"] > 0:
            raise ConfigError("must be positive", "scheme.horizon")
        levels = d["scheme"]["levels"]
        if not isinstance(levels, list) or any(not isinstance(v, int) or v < 0 for v in levels):
            raise ConfigError("must be a list of non-negative integers", "scheme.levels")
        p = d["mc"]["p"]
        if not 1 < p <= 2:
            raise ConfigError("must lie in (1, 2]", "mc.p")
        n = d["noise"]
        if n["kind"] == "spectral":
            if not n["alpha"] > 0:
                raise ConfigError("must be positive", "noise.alpha")
            nm = n["modes"] if n["modes"] is not None else d["operator"]["modes"]
            if nm > d["operator"]["modes"]:
                raise ConfigError("cannot exceed operator.modes", "noise.modes")
        try:
            LevyMeasure.from_descriptor(n["measure"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"invalid measure: {exc}", "noise.measure") from None
        if d["initial"]["kind"] == "coefficients" and len(d["initial"]["values"]) > d["operator"]["modes"]:
            raise ConfigError("more coefficients than modes", "initial.values")
        if d["drift"]["kind"] == "poly" and d["drift"]["q"] < 1:
            raise ConfigError("must be >= 1", "drift.q")
        if not isinstance(d["gate"]["params"], dict):
            raise ConfigError("expected a table", "gate.params")

    def resolved(self) -> dict:
        """All blocks with explicit defaults, plus the schema version."""
        out = copy.deepcopy(self.data)
        out["schema_version"] = SCHEMA_VERSION
        if out["noise"]["modes"] is None and out["noise"]["kind"] == "spectral":
            out["noise"]["modes"] = out["operator"]["modes"]
        if out["scheme"]["lam"] is None:
            out["scheme"]["lam"] = default_lambda(self.drift())
        return out

    # -- builders -----------------------------------------------------------

    def operator(self):
        o = self.data["operator"]
        return dirichlet_laplacian(o["modes"], o["grid_points"], o["shift"])

    def initial(self, op) -> np.ndarray:
        ini = self.data["initial"]
        x = np.zeros(op.modes)
        if ini["kind"] == "coefficients":
            vals = np.asarray(ini["values"], dtype=float)
            x[:vals.size] = vals
        elif ini["kind"] == "sine":
            x = op.project(ini["amplitude"] * np.sin(np.pi * op.grid))
        elif ini["kind"] == "parabola":
            x = op.project(4.0 * ini["amplitude"] * op.grid * (1.0 - op.grid))
        return x

    def measure(self) -> LevyMeasure:
        return LevyMeasure.from_descriptor(self.data["noise"]["measure"])

    def noise(self):
        n = self.data["noise"]
        if n["kind"] == "none":
            return None
        base = self.measure()
        if n["kind"] == "scalar":
            return ScalarNoiseSpec(base)
        if n["kind"] == "spectral":
            return SpectralNoiseSpec(float(n["alpha"]), int(n["modes"] or self.data["operator"]["modes"]), base)
        return SpaceTimeNoiseSpec(base, float(n["length"]))

    def drift(self) -> DriftSpec | None:
        f = self.data["drift"]
        if f["kind"] == "none":
            return None
        return DriftSpec(float(f["q"]), float(f["beta"]), f["truncation"], float(f["k"]), float(f["k0"]))

    def diffusion(self) -> DiffusionSpec:
        g = self.data["diffusion"]
        table = tuple(g["table"]) if g["table"] is not None else None
        return DiffusionSpec(g["kind"], float(g.get("value", 1.0)), table)

    def scheme(self, level: int | None = None) -> GridScheme:
        op = self.operator()
        s = self.data["scheme"]
        return GridScheme(op, s["level"] if level is None else level, self.initial(op), self.drift(),
                          self.diffusion(), self.noise(), float(s["horizon"]))

    def norm_E(self) -> Norm:
        m = self.data["mc"]
        return Norm(m["norm"], p=float(m["p"]), delta=float(m["delta"]))
