"""Experiment configuration: flat ``key = value`` text with dotted section paths.

Grammar (one entry per line)::

    line    := blank | comment | entry
    comment := '#' anything
    entry   := key WS* '=' WS* value
    key     := section '.' field | field        (e.g. manifold.kind, seed)
    value   := number | word | list             (list: comma-separated numbers or words)

Unknown keys, malformed numbers and out-of-range values raise
ConfigurationError before any computation. ``serialize`` writes every key in
a fixed order with floats in shortest round-trip form, so
parse(serialize(c)) == c and the SHA-256 of the canonical text is a stable
config hash.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .grid import ConfigurationError, RadialField, RadialGrid, bump_profile
from .manifold import Euclidean, Hyperbolic, ModelManifold, PinchedNegative, Tabulated
from .reaction import (ExponentialMinusOne, Linear, Nonlinearity, PiecewiseLinearPower, Power,
                       TabulatedReaction)
from .solver import SchemeConfig
from .spectral import cell_weights

__all__ = [
    "ManifoldSpec",
    "NonlinearitySpec",
    "InitialSpec",
    "GridSpec",
    "SpectrumSpec",
    "MonitorSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "config_hash",
    "set_path",
    "get_path",
    "KNOWN_MONITORS",
]

KNOWN_MONITORS = ("phi_ode", "g_functional", "supersolution", "kaplan_ball")


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str = "hyperbolic"  # euclidean | hyperbolic | pinched | tabulated
    dimension: int = 3
    curvature: float = 1.0
    lower: float = -4.0
    upper: float = -1.0
    scale: float = 2.0
    r_max: float = 80.0
    file: str = ""

    def validate(self):
        if self.kind not in ("euclidean", "hyperbolic", "pinched", "tabulated"):
            raise ConfigurationError(f"unknown manifold.kind {self.kind!r}")
        if self.dimension < 2:
            raise ConfigurationError("manifold.dimension must be >= 2")
        if self.kind == "hyperbolic" and not self.curvature > 0:
            raise ConfigurationError("manifold.curvature must be positive")
        if self.kind == "tabulated" and not Path(self.file).is_file():
            raise ConfigurationError(f"manifold.file {self.file!r} does not exist")

    def build(self) -> ModelManifold:
        if self.kind == "euclidean":
            return ModelManifold.euclidean(self.dimension)
        if self.kind == "hyperbolic":
            return ModelManifold.hyperbolic(self.dimension, self.curvature)
        if self.kind == "pinched":
            return ModelManifold(self.dimension, PinchedNegative(self.lower, self.upper, self.scale, self.r_max))
        return ModelManifold(self.dimension, Tabulated.from_file(self.file))


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str = "power"  # power | piecewise | exponential | linear | tabulated
    p: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0
    a: float = 0.0
    file: str = ""

    def validate(self):
        if self.kind not in ("power", "piecewise", "exponential", "linear", "tabulated"):
            raise ConfigurationError(f"unknown nonlinearity.kind {self.kind!r}")
        if self.kind == "tabulated" and not Path(self.file).is_file():
            raise ConfigurationError(f"nonlinearity.file {self.file!r} does not exist")
        try:
            self.build()
        except ValueError as exc:
            raise ConfigurationError(f"nonlinearity: {exc}") from exc

    def build(self) -> Nonlinearity:
        if self.kind == "power":
            return Power(p=self.p)
        if self.kind == "piecewise":
            return PiecewiseLinearPower(alpha=self.alpha, p=self.p)
        if self.kind == "exponential":
            return ExponentialMinusOne(beta=self.beta)
        if self.kind == "linear":
            return Linear(a=self.a)
        return TabulatedReaction.from_file(self.file)


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "bump"  # bump | constant
    center: float = 0.0
    width: float = 1.0
    height: float = 1.0
    center_jitter: float = 0.0  # uniform random shift of the center, drawn from the seed

    def validate(self):
        if self.kind not in ("bump", "constant"):
            raise ConfigurationError(f"unknown initial.kind {self.kind!r}")
        if self.height < 0:
            raise ConfigurationError("initial.height must be nonnegative")
        if self.kind == "bump" and not self.width > 0:
            raise ConfigurationError("initial.width must be positive")
        if self.center_jitter < 0 or self.center < 0:
            raise ConfigurationError("initial.center and initial.center_jitter must be nonnegative")


@dataclass(frozen=True)
class GridSpec:
    R: float = 40.0
    h: float = 0.05
    bc: str = "dirichlet"

    def validate(self):
        if not self.R > 0 or not self.h > 0:
            raise ConfigurationError("grid.R and grid.h must be positive")
        if round(self.R / self.h) < 16:
            raise ConfigurationError("grid needs at least 16 cells")
        if self.bc not in ("dirichlet", "neumann"):
            raise ConfigurationError("grid.bc must be dirichlet or neumann")

    def build(self) -> RadialGrid:
        return RadialGrid.with_spacing(self.R, self.h)


@dataclass(frozen=True)
class SpectrumSpec:
    radii: tuple = (10.0, 20.0, 30.0, 40.0)
    h: float = 0.05

    def validate(self):
        r = list(self.radii)
        if len(r) < 3 or any(b <= a for a, b in zip(r, r[1:])) or r[0] <= 0:
            raise ConfigurationError("spectrum.radii needs >= 3 increasing positive radii")
        if not self.h > 0:
            raise ConfigurationError("spectrum.h must be positive")

    def schedule(self):
        return [(R, int(round(R / self.h))) for R in self.radii]


@dataclass(frozen=True)
class MonitorSpec:
    names: tuple = ("phi_ode", "supersolution")
    fractions: tuple = (0.5, 0.8)
    slack: float = 0.1
    tol_abs: float = 1e-6
    delta: float = 0.0  # G-functional level; 0 means 2 * Phi(0)
    ball_radius: float = 5.0

    def validate(self):
        bad = [n for n in self.names if n not in KNOWN_MONITORS]
        if bad:
            raise ConfigurationError(f"unknown monitors {bad}; known: {KNOWN_MONITORS}")
        if any(not 0 < x < 1 for x in self.fractions):
            raise ConfigurationError("monitors.fractions must lie in (0, 1)")
        if not 0 <= self.slack < 1 or self.tol_abs < 0 or self.delta < 0 or not self.ball_radius > 0:
            raise ConfigurationError("monitor tolerances out of range")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    manifold: ManifoldSpec = field(default_factory=ManifoldSpec)
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    monitors: MonitorSpec = field(default_factory=MonitorSpec)
    output_dir: str = "runs"

    def validate(self) -> "ExperimentConfig":
        for sec in (self.manifold, self.nonlinearity, self.initial, self.grid, self.spectrum, self.monitors):
            sec.validate()
        if self.grid.R > self.manifold.r_max and self.manifold.kind == "pinched":
            raise ConfigurationError("grid.R exceeds the pinched warping support")
        return self

    def initial_field(self, m: ModelManifold | None = None, g: RadialGrid | None = None) -> RadialField:
        m = self.manifold.build() if m is None else m
        g = self.grid.build() if g is None else g
        w = cell_weights(m, g)
        ini = self.initial
        if ini.kind == "constant":
            vals = np.full(g.n + 1, ini.height)
        else:
            c = ini.center
            if ini.center_jitter > 0:
                c += float(np.random.default_rng(self.seed).uniform(0.0, ini.center_jitter))
            vals = ini.height * bump_profile(g.nodes, c, ini.width)
        return RadialField(g, vals, w)


SECTIONS = {
    "manifold": ManifoldSpec,
    "nonlinearity": NonlinearitySpec,
    "initial": InitialSpec,
    "grid": GridSpec,
    "scheme": SchemeConfig,
    "spectrum": SpectrumSpec,
    "monitors": MonitorSpec,
}
TOP = {"name": str, "seed": int, "output.dir": str}


def _field_types(cls):
    defaults = cls()
    return {f.name: type(getattr(defaults, f.name)) for f in fields(cls)}


def _convert(raw: str, typ, key: str):
    try:
        if typ is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ is int:
            v = float(raw)
            if v != int(v):
                raise ValueError(raw)
            return int(v)
        if typ is float:
            return float(raw)
        if typ is tuple:
            items = [x.strip() for x in raw.split(",") if x.strip()]
            try:
                return tuple(float(x) for x in items)
            except ValueError:
                return tuple(items)
        return raw
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, base_dir: str | Path | None = None) -> ExperimentConfig:
    """Parse config text; relative file paths resolve against ``base_dir``."""
    sections = {s: {} for s in SECTIONS}
    top = {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, raw = (x.strip() for x in s.split("=", 1))
        if key in seen:
            raise ConfigurationError(f"line {lineno}: duplicate key {key}")
        seen.add(key)
        if key in TOP:
            top[key] = _convert(raw, TOP[key], key)
            continue
        if key == "monitors":
            key = "monitors.names"
        sec, _, fld = key.partition(".")
        if sec not in SECTIONS or not fld:
            raise ConfigurationError(f"line {lineno}: unknown key {key}")
        types = _field_types(SECTIONS[sec])
        if fld not in types:
            raise ConfigurationError(f"line {lineno}: unknown key {key}")
        val = _convert(raw, types[fld], key)
        if fld == "file" and val and base_dir is not None and not Path(val).is_absolute():
            val = str(Path(base_dir) / val)
        sections[sec][fld] = val
    try:
        built = {s: SECTIONS[s](**kv) for s, kv in sections.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc
    cfg = ExperimentConfig(name=top.get("name", "experiment"), seed=top.get("seed", 0),
                           output_dir=top.get("output.dir", "runs"), **built)
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file {path} not found")
    return parse_config(p.read_text(), base_dir=p.parent)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = [f"name = {cfg.name}", f"seed = {cfg.seed}", f"output.dir = {cfg.output_dir}"]
    for sec in SECTIONS:
        obj = getattr(cfg, sec)
        for f in fields(obj):
            lines.append(f"{sec}.{f.name} = {_fmt(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical text, excluding the output directory (it does not change results)."""
    text = "\n".join(ln for ln in serialize_config(cfg).splitlines() if not ln.startswith("output.dir"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def get_path(cfg: ExperimentConfig, path: str):
    """Value at the dotted ``path``; ConfigurationError for unknown paths."""
    if path in ("name", "seed"):
        return getattr(cfg, path)
    sec, _, fld = path.partition(".")
    if sec not in SECTIONS or fld not in _field_types(SECTIONS[sec]):
        raise ConfigurationError(f"unknown config path {path}")
    return getattr(getattr(cfg, sec), fld)


def set_path(cfg: ExperimentConfig, path: str, value) -> ExperimentConfig:
    """Copy of cfg with the dotted ``path`` replaced (e.g. 'nonlinearity.alpha')."""
    if path in ("name", "seed"):
        return dataclasses.replace(cfg, **{path: type(getattr(cfg, path))(value)})
    sec, _, fld = path.partition(".")
    if sec not in SECTIONS or fld not in _field_types(SECTIONS[sec]):
        raise ConfigurationError(f"unknown config path {path}")
    obj = getattr(cfg, sec)
    typ = _field_types(SECTIONS[sec])[fld]
    if typ not in (int, float):
        raise ConfigurationError(f"sweep axis {path} is not numeric")
    try:
        new = dataclasses.replace(obj, **{fld: typ(value)})
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    return dataclasses.replace(cfg, **{sec: new}).validate()
