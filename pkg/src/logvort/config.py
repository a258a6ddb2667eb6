"""Experiment configuration: `key = value` lines grouped under `[section]` headers.

Every key has a declared type and default.  Unknown keys, type mismatches and
constraint violations raise :class:`ConfigError` carrying the offending line
number.  ``serialize(parse_config(text))`` is canonical, so parsing it again
returns an equal :class:`Config`.

Lists are comma separated; booleans are ``true``/``false``.  A key left out
keeps its default (``None`` for optional data such as the perturbation centre).
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .euler import SolverConfig
from .inflation import KINDS, ExperimentPlan
from .initdata import LatticeSpec, PerturbationSpec


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Key:
    kind: str  # int | float | str | bool | floats
    default: Any = None
    check: Callable[[Any], str | None] | None = None


def _positive(v):
    return None if v > 0 else "must be positive"


def _power_of_two(v):
    return None if v >= 16 and v & (v - 1) == 0 else "must be a power of two >= 16"


def _unit_open(v):
    return None if 0 < v < 1 else "must lie in (0, 1)"


def _cfl(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


def _kind(v):
    return None if v in KINDS else f"must be one of {', '.join(KINDS)}"


def _at_least(m):
    return lambda v: None if v >= m else f"must be >= {m}"


def _all_positive(v):
    return None if all(x > 0 for x in v) else "entries must be positive"


SCHEMA: dict[str, dict[str, Key]] = {
    "experiment": {
        "kind": Key("str", None, _kind),
        "label": Key("str", ""),
    },
    "grid": {
        "n": Key("int", 256, _power_of_two),
        "box": Key("float", 8.0, _positive),
    },
    "time": {
        "t_end": Key("float", 0.5, _positive),
        "cfl": Key("float", 0.5, _cfl),
        "dt_max": Key("float", 0.02, _positive),
        "samples": Key("int", 11, _at_least(2)),
        "tail_threshold": Key("float", 1e-4, _positive),
    },
    "lattice": {
        "M": Key("int", 2, _at_least(2)),
        "alpha": Key("float", 0.25, _unit_open),
        "k_min": Key("int", 3, _at_least(1)),
        "k_max": Key("int", 3, _at_least(1)),
        "sharpness": Key("float", 1.0, _positive),
        "scale": Key("float", 32.0, _positive),
        "amplitude": Key("float", 8.0, _positive),
    },
    "perturbation": {
        "k": Key("floats", (), _all_positive),
        "x1": Key("float"),
        "x2": Key("float"),
        "delta": Key("float", None, _positive),
        "site_margin": Key("float", 0.0, _at_least(0)),
        "always_perturb": Key("bool", False),
    },
    "patches": {
        "scale": Key("float", 0.8, _positive),
        "sharpness": Key("float", 1.0, _positive),
        "separations": Key("floats", (8.0, 16.0, 32.0), _all_positive),
    },
    "norms": {
        "s": Key("float", 1.0, _at_least(0)),
        "alpha": Key("float", 0.25, _at_least(0)),
        "natural_log": Key("bool", False),
        "count": Key("int", 1000, _at_least(1)),
    },
    "output": {
        "dir": Key("str", "out"),
        "snapshots": Key("bool", True),
    },
    "run": {
        "seed": Key("int", 0, _at_least(0)),
        "threads": Key("int", 1, _at_least(1)),
        "seed_spacing": Key("float", None, _positive),
    },
}

REQUIRED = (("experiment", "kind"),)


def _convert(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError(raw)
        return v
    if kind == "bool":
        low = raw.lower()
        if low not in ("true", "false"):
            raise ValueError(raw)
        return low == "true"
    if kind == "floats":
        return tuple(_convert("float", p.strip()) for p in raw.split(",") if p.strip())
    return raw


def _format(kind: str, v) -> str:
    if kind == "bool":
        return "true" if v else "false"
    if kind == "float":
        return repr(float(v))
    if kind == "floats":
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


@dataclass(frozen=True)
class Config:
    values: dict[str, dict[str, Any]]
    lines: dict[tuple[str, str], int] = field(default_factory=dict, compare=False, repr=False)

    def __getitem__(self, key: tuple[str, str]):
        section, name = key
        return self.values[section][name]

    @property
    def kind(self) -> str:
        return self.values["experiment"]["kind"]

    def echo(self) -> list[str]:
        return serialize(self).splitlines()

    def with_overrides(self, **kv) -> "Config":
        """Override values addressed as ``section__key``; the result is revalidated."""
        vals = {s: dict(d) for s, d in self.values.items()}
        for name, v in kv.items():
            section, key = name.split("__", 1)
            if key not in SCHEMA.get(section, {}):
                raise ConfigError(f"unknown key {section}.{key}")
            vals[section][key] = v
        cfg = Config(vals, dict(self.lines))
        _validate(cfg)
        return cfg

    def solver(self) -> SolverConfig:
        t = self.values["time"]
        return SolverConfig(cfl=t["cfl"], dt_max=t["dt_max"], tail_threshold=t["tail_threshold"],
                            alpha=self.values["lattice"]["alpha"])

    def lattice(self) -> LatticeSpec:
        lt = self.values["lattice"]
        return LatticeSpec(M=lt["M"], alpha=lt["alpha"], k_range=(lt["k_min"], lt["k_max"]),
                           sharpness=lt["sharpness"], scale=lt["scale"], amplitude=lt["amplitude"])

    def perturbation(self) -> PerturbationSpec | None:
        p = self.values["perturbation"]
        if p["x1"] is None or p["x2"] is None or not p["k"]:
            return None
        return PerturbationSpec(k=p["k"][0], x0=(p["x1"], p["x2"]), L=1.0, delta=p["delta"])

    def plan(self) -> ExperimentPlan:
        g, t, p = self.values["grid"], self.values["time"], self.values["perturbation"]
        needs_lattice = self.kind in ("deformation", "inflation")
        return ExperimentPlan(
            kind=self.kind, n=g["n"], box=g["box"], t_end=t["t_end"], samples=t["samples"],
            lattice=self.lattice() if needs_lattice else None,
            perturbation=self.perturbation(), k_values=tuple(p["k"]),
            alpha=self.values["lattice"]["alpha"], solver=self.solver(),
            seed_spacing=self.values["run"]["seed_spacing"], site_margin=p["site_margin"],
            always_perturb=p["always_perturb"], seed=self.values["run"]["seed"])


def _validate(cfg: Config) -> None:
    for section, keys in SCHEMA.items():
        for name, spec in keys.items():
            v = cfg.values[section][name]
            line = cfg.lines.get((section, name))
            if v is None:
                if (section, name) in REQUIRED:
                    raise ConfigError(f"missing required key {section}.{name}", line)
                continue
            if spec.check is not None:
                msg = spec.check(v)
                if msg:
                    raise ConfigError(f"{section}.{name} = {_format(spec.kind, v)}: {msg}", line)
    lt = cfg.values["lattice"]
    if lt["k_max"] < lt["k_min"]:
        raise ConfigError("lattice.k_max must be >= lattice.k_min", cfg.lines.get(("lattice", "k_max")))


def _suggest(word: str, options) -> str:
    close = difflib.get_close_matches(word, list(options), n=1, cutoff=0.5)
    return f"; did you mean {close[0]!r}?" if close else ""


def parse_config(text: str) -> Config:
    values = {s: {k: spec.default for k, spec in keys.items()} for s, keys in SCHEMA.items()}
    lines: dict[tuple[str, str], int] = {}
    section: str | None = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", no)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]{_suggest(section, SCHEMA)}", no)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", no)
        if section is None:
            raise ConfigError("key outside any [section]", no)
        key, val = (p.strip() for p in line.split("=", 1))
        keys = SCHEMA[section]
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} in [{section}]{_suggest(key, keys)}", no)
        if (section, key) in lines:
            raise ConfigError(f"duplicate key {section}.{key} (first set on line "
                              f"{lines[(section, key)]})", no)
        try:
            values[section][key] = _convert(keys[key].kind, val)
        except ValueError:
            raise ConfigError(f"{section}.{key}: expected {keys[key].kind}, got {val!r}", no) from None
        lines[(section, key)] = no
    cfg = Config(values, lines)
    _validate(cfg)
    return cfg


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize(cfg: Config) -> str:
    out = []
    for section, keys in SCHEMA.items():
        body = [f"{k} = {_format(spec.kind, cfg.values[section][k])}"
                for k, spec in keys.items() if cfg.values[section][k] is not None]
        if body:
            out.append(f"[{section}]")
            out.extend(body)
            out.append("")
    return "\n".join(out)
