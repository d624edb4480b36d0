"""Run configuration, INI files and the experiment presets.

INI layout (every key optional, defaults below)::

    [run]      scheme = CS | DSAV, steps, dt, seed
    [mesh]     nx, ny, refine = none | circles, refine_width
    [model]    nu, gamma, lam, beta, alpha, zeta, a, k, b0, b1, c0, F_max
    [initial]  kind = random | circles | constant, mean, amplitude, centered,
               layout = two | four, radius, value, deformation = identity | sheared
    [solver]   tol, max_fp, newton_tol, newton_max
    [output]   dir, vtk_every

``eps = beta * alpha`` is derived and cannot be set. ``c0`` left empty means
``6 zeta F_max**2``; ``refine_width`` left empty means ``4 / nx``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields

SCHEMES = ("CS", "DSAV")


@dataclass(frozen=True)
class RunConfig:
    scheme: str = "CS"
    steps: int = 100
    dt: float = 2e-7
    seed: int = 0
    nx: int = 64
    ny: int = 64
    refine: str = "none"
    refine_width: float | None = None
    nu: float = 1.0
    gamma: float = 1.0
    lam: float = 0.001
    beta: float = 0.1
    alpha: float = 0.002
    zeta: float = 10.0
    a: float = 0.5
    k: float = 1.0
    b0: float = 1.0
    b1: float = 1.0
    c0: float | None = None
    F_max: float = 5.0
    initial: str = "random"
    mean: float = 0.3
    amplitude: float = 0.5
    centered: bool = True
    layout: str = "two"
    radius: float = 0.15
    value: float = 0.0
    deformation: str = "identity"
    tol: float = 1e-8
    max_fp: int = 100
    newton_tol: float = 1e-11
    newton_max: int = 25
    out_dir: str = "out"
    vtk_every: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scheme", self.scheme.upper())
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("mesh counts must be positive")
        for name in ("nu", "lam", "beta", "alpha", "k", "b0", "F_max", "tol", "newton_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("gamma", "zeta", "a", "amplitude", "radius", "vtk_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.b1 < self.b0:
            raise ValueError("mobility bounds need b0 <= b1")
        if self.refine not in ("none", "circles"):
            raise ValueError(f"unknown refinement {self.refine!r}")
        if self.initial not in ("random", "circles", "constant"):
            raise ValueError(f"unknown initial condition {self.initial!r}")
        if self.layout not in ("two", "four"):
            raise ValueError(f"unknown circle layout {self.layout!r}")
        if self.deformation not in ("identity", "sheared"):
            raise ValueError(f"unknown initial deformation {self.deformation!r}")

    @property
    def eps(self) -> float:
        return self.beta * self.alpha

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


# INI section of every field; out_dir is spelled "dir" in the file
_SECTIONS = {
    "run": ("scheme", "steps", "dt", "seed"),
    "mesh": ("nx", "ny", "refine", "refine_width"),
    "model": ("nu", "gamma", "lam", "beta", "alpha", "zeta", "a", "k", "b0", "b1", "c0", "F_max"),
    "initial": ("kind", "mean", "amplitude", "centered", "layout", "radius", "value", "deformation"),
    "solver": ("tol", "max_fp", "newton_tol", "newton_max"),
    "output": ("dir", "vtk_every"),
}
_ALIASES = {"kind": "initial", "dir": "out_dir"}
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(name: str, raw: str):
    kind = _TYPES[name]
    raw = raw.strip()
    if "None" in kind:
        if raw.lower() in ("", "none", "auto"):
            return None
        return float(raw)
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_ini(text: str, base: RunConfig | None = None) -> RunConfig:
    # "key = value  ; note" style comments need whitespace before the prefix
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keys are case sensitive (F_max)
    parser.read_string(text)
    changes = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            name = _ALIASES.get(key, key)
            changes[name] = _convert(name, raw)
    return (base or RunConfig()).replace(**changes)


def load_ini(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_ini(fh.read(), base)


def to_ini(cfg: RunConfig) -> str:
    lines = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            value = getattr(cfg, _ALIASES.get(key, key))
            lines.append(f"{key} = {'' if value is None else repr(value) if isinstance(value, float) else value}")
        lines.append("")
    lines.append(f"# eps = beta * alpha = {cfg.eps!r}")
    return "\n".join(lines) + "\n"


# ---- presets ---------------------------------------------------------------

_TC1 = dict(nu=1.0, lam=0.001, beta=0.1, alpha=0.002, zeta=10.0, a=0.5, b0=1.0, b1=1.0,
            nx=64, ny=64, deformation="identity", initial="random", steps=1000)
_TC2 = dict(nu=1.0, lam=0.001, beta=0.1, alpha=0.02, zeta=10.0, a=0.5, gamma=0.001, b0=1.0, b1=1.0,
            nx=64, ny=64, refine="circles", initial="circles", deformation="sheared", steps=1000)

PRESETS = {
    "TC1a": dict(_TC1, mean=0.3, amplitude=0.5, gamma=1.0),
    "TC1b": dict(_TC1, mean=0.7, amplitude=0.2, gamma=1.0),
    "TC2a": dict(_TC2, layout="two"),
    "TC2b": dict(_TC2, layout="four"),
    # pure phases on their energy minimizers: every step must return the same state
    "STAT0": dict(_TC1, initial="constant", value=0.0, deformation="identity", nx=8, ny=8, steps=1),
    "STAT1": dict(_TC1, initial="constant", value=1.0, deformation="sheared", nx=8, ny=8, steps=1),
}
# time step as a multiple of eps
_DT_FACTOR = {"TC1a": 1e-3, "TC1b": 1e-3, "TC2a": 1e-5, "TC2b": 1e-5, "STAT0": 1e-3, "STAT1": 1e-3}


def preset(name: str, **overrides) -> RunConfig:
    """A named experiment, optionally with variants, e.g. ``preset("TC1a", gamma=0.001)``.

    The string form ``"TC1a:gamma=0.001,zeta=1"`` is accepted too. ``dt`` follows
    ``eps`` unless overridden.
    """
    if ":" in name:
        name, variants = name.split(":", 1)
        for item in filter(None, variants.split(",")):
            key, _, raw = item.partition("=")
            key = key.strip()
            if key not in _TYPES:
                raise ValueError(f"unknown preset variant {key!r}")
            overrides.setdefault(key, _convert(key, raw))
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    values = dict(PRESETS[name])
    values.update({k: v for k, v in overrides.items() if k != "dt"})
    eps = values["beta"] * values["alpha"]
    values["dt"] = overrides.get("dt", _DT_FACTOR[name] * eps)
    return RunConfig(**values)
