"""Experiment configuration: flat ``key = value`` files or JSON."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .evolve import EvolveConfig
from .grid import MIN_NODES

INITIAL_KINDS = ("gaussian", "ground_state_multiple", "from_file")
R_POLICIES = ("fixed", "scaling")
TRAJECTORY_FORMATS = ("none", "csv", "binary")

# flat key -> attribute
KEYS = {
    "name": "name",
    "p": "p",
    "grid.r_max": "r_max",
    "grid.n": "n",
    "evolve.dt": "dt",
    "evolve.t_end": "t_end",
    "evolve.snapshot_stride": "snapshot_stride",
    "evolve.boundary_guard": "boundary_guard",
    "evolve.blowup_factor": "blowup_factor",
    "initial_data": "initial_data",
    "initial_data.a": "a",
    "initial_data.w": "w",
    "initial_data.c": "c",
    "initial_data.path": "path",
    "rescale": "rescale",
    "morawetz.R_policy": "R_policy",
    "morawetz.R": "R",
    "morawetz.fit_window": "fit_window",
    "scattering.tolerance": "scattering_tolerance",
    "scattering.window": "scattering_window",
    "scattering.profiles": "scattering_profiles",
    "gate.mass_drift": "mass_tolerance",
    "gate.energy_drift": "energy_tolerance",
    "gate.boundary_mass": "boundary_threshold",
    "outputs": "outputs",
    "outputs.trajectory": "trajectory_format",
}


@dataclass(frozen=True)
class ExperimentConfig:
    p: float
    r_max: float
    n: int
    dt: float
    t_end: float
    name: str = "experiment"
    snapshot_stride: int = 10
    boundary_guard: float = 0.9
    blowup_factor: float = 10.0
    initial_data: str = "gaussian"
    a: float = 1.0
    w: float = 1.0
    c: float = 1.0
    path: str = ""
    rescale: bool = True
    R_policy: str = "scaling"
    R: float | None = None
    fit_window: float = 0.25
    scattering_tolerance: float = 1e-2
    scattering_window: float = 0.5
    scattering_profiles: int = 9
    mass_tolerance: float = 1e-10
    energy_tolerance: float = 1e-3
    boundary_threshold: float = 1e-3
    outputs: str = "out"
    trajectory_format: str = "binary"

    def __post_init__(self):
        try:
            self._validate()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        def positive(name):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")

        for name in ("r_max", "dt", "t_end", "a", "w", "c"):
            positive(name)
        if not (math.isfinite(self.p) and self.p >= 2):
            raise ConfigError(f"p must satisfy 2 <= p < inf, got {self.p!r}")
        if self.n < MIN_NODES:
            raise ConfigError(f"grid.n must be >= {MIN_NODES}")
        if self.snapshot_stride < 1:
            raise ConfigError("evolve.snapshot_stride must be >= 1")
        if not 0 < self.boundary_guard < 1:
            raise ConfigError("evolve.boundary_guard must lie in (0, 1)")
        if not self.blowup_factor > 1:
            raise ConfigError("evolve.blowup_factor must exceed 1")
        if self.initial_data not in INITIAL_KINDS:
            raise ConfigError(f"initial_data must be one of {INITIAL_KINDS}")
        if self.initial_data == "from_file" and not self.path:
            raise ConfigError("initial_data = from_file needs initial_data.path")
        if self.R_policy not in R_POLICIES:
            raise ConfigError(f"morawetz.R_policy must be one of {R_POLICIES}")
        if self.R_policy == "fixed" and (self.R is None or not self.R >= 1):
            raise ConfigError("morawetz.R_policy = fixed needs morawetz.R >= 1")
        if not 0 < self.fit_window < 1:
            raise ConfigError("morawetz.fit_window must lie in (0, 1)")
        if not 0 < self.scattering_window < 1:
            raise ConfigError("scattering.window must lie in (0, 1)")
        if self.scattering_profiles < 3:
            raise ConfigError("scattering.profiles must be >= 3")
        for name in ("scattering_tolerance", "mass_tolerance", "energy_tolerance",
                     "boundary_threshold"):
            positive(name)
        if self.trajectory_format not in TRAJECTORY_FORMATS:
            raise ConfigError(f"outputs.trajectory must be one of {TRAJECTORY_FORMATS}")

    @property
    def evolve_config(self) -> EvolveConfig:
        return EvolveConfig(
            dt=self.dt,
            t_end=self.t_end,
            p=self.p,
            snapshot_stride=self.snapshot_stride,
            boundary_guard=self.boundary_guard,
            blowup_factor=self.blowup_factor,
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {key: getattr(self, attr) for key, attr in KEYS.items()}

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if value is None:
                continue
            lines.append(f"{key} = {_format(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        kwargs = {}
        fields = {f.name: f for f in dataclasses.fields(cls)}
        for key, value in data.items():
            attr = KEYS.get(key, key if key in fields else None)
            if attr is None:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[attr] = _coerce(attr, value)
        missing = [KEY_OF[a] for a in ("p", "r_max", "n", "dt", "t_end") if a not in kwargs]
        if missing:
            raise ConfigError(f"missing required keys: {', '.join(missing)}")
        return cls(**kwargs)


KEY_OF = {attr: key for key, attr in KEYS.items()}
_INT = {"n", "snapshot_stride", "scattering_profiles"}
_STR = {"name", "initial_data", "path", "R_policy", "outputs", "trajectory_format"}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(attr, value):
    if attr in _STR:
        return str(value)
    if attr == "rescale":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("true", "yes", "1"):
            return True
        if text in ("false", "no", "0"):
            return False
        raise ConfigError(f"rescale must be a boolean, got {value!r}")
    if attr == "R" and (value is None or str(value).strip().lower() in ("", "none")):
        return None
    try:
        if attr in _INT:
            number = float(value)
            if number != int(number):
                raise ValueError
            return int(number)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{KEY_OF.get(attr, attr)}: cannot parse {value!r}") from None


def parse_text(text: str) -> dict:
    data = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in data:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        data[key] = value
    return data


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        data = parse_text(text)
    cfg = ExperimentConfig.from_dict(data)
    if cfg.initial_data == "from_file" and not Path(cfg.path).is_absolute():
        cfg = cfg.replace(path=str(path.parent / cfg.path))
    return cfg


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    else:
        path.write_text(cfg.to_text())
    return path


PRESETS = {
    "subthreshold-p3": dict(
        name="subthreshold-p3", p=3.0, r_max=250.0, n=10000, dt=0.005, t_end=20.0,
        snapshot_stride=20, initial_data="gaussian", a=1.0, w=1.0,
        R_policy="scaling",
    ),
    "soliton-p2": dict(
        name="soliton-p2", p=2.0, r_max=30.0, n=3000, dt=0.005, t_end=10.0,
        snapshot_stride=20, initial_data="ground_state_multiple", c=1.0,
        R_policy="fixed", R=8.0,
    ),
    "negative-energy-p3": dict(
        name="negative-energy-p3", p=3.0, r_max=8.0, n=4000, dt=2e-5, t_end=1.0,
        snapshot_stride=50, initial_data="gaussian", a=3.0, w=1.0,
        R_policy="fixed", R=2.0,
    ),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base.update(overrides)
    return ExperimentConfig(**base)
