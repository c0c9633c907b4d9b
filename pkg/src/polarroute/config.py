"""Run configuration: one JSON record with full defaults, lossless round trip."""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .geodesy import GeoPoint
from .model import ALIGNMENT_STRATEGIES, PathBounds, Weights
from .solvers import SOLVERS, AnnealSchedule
from .synthbench import SynthParams

PATH_FIELDS = ("corridor_path", "landmask_path", "env_csv_path")


@dataclass(frozen=True)
class SolverConfig:
    name: str = "linegraph"
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    workers: int = 1
    adapter_timeout: float | None = None

    def __post_init__(self):
        if self.name not in SOLVERS:
            raise ConfigError(f"unknown solver {self.name!r}; choose from {', '.join(SOLVERS)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple = (8, 12, 16)
    densities: tuple = (0.3, 0.6)
    solvers: tuple = ("exhaustive", "anneal")
    seeds: tuple = (0, 1, 2)
    params: SynthParams = field(default_factory=SynthParams)
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    corridor_path: str | None = None
    landmask_path: str | None = None
    env_csv_path: str | None = None
    resolution: int = 5
    start: GeoPoint | None = None
    goal: GeoPoint | None = None
    date: str | None = None
    weights: Weights = field(default_factory=Weights)
    bounds: PathBounds | None = None
    alignment: str = "axis"
    calibration: dict = field(default_factory=lambda: {"name": "percentile"})
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str = "out"
    seed: int = 0
    bench: BenchConfig = field(default_factory=BenchConfig)
    budgets: tuple = (5.0, 15.0, 30.0, 60.0)

    def __post_init__(self):
        if self.alignment not in ALIGNMENT_STRATEGIES:
            raise ConfigError(f"unknown alignment {self.alignment!r}")
        if self.date is not None:
            try:
                dt.date.fromisoformat(self.date)
            except ValueError:
                raise ConfigError(f"date must be ISO-8601, got {self.date!r}") from None

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = None if self.start is None else [self.start.lat, self.start.lon]
        d["goal"] = None if self.goal is None else [self.goal.lat, self.goal.lon]
        d["bench"]["params"] = self.bench.params.to_dict()
        for k in ("sizes", "densities", "solvers", "seeds"):
            d["bench"][k] = list(d["bench"][k])
        d["budgets"] = list(self.budgets)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        _reject_unknown(cls, d, "config")
        try:
            for key in ("start", "goal"):
                if d.get(key) is not None:
                    v = d[key]
                    d[key] = GeoPoint(*v) if isinstance(v, (list, tuple)) else GeoPoint(v["lat"], v["lon"])
            if "weights" in d:
                _reject_unknown(Weights, d["weights"], "weights")
                d["weights"] = Weights(**d["weights"])
            if d.get("bounds") is not None:
                _reject_unknown(PathBounds, d["bounds"], "bounds")
                d["bounds"] = PathBounds(**d["bounds"])
            if "solver" in d:
                sv = dict(d["solver"])
                _reject_unknown(SolverConfig, sv, "solver")
                if "schedule" in sv:
                    _reject_unknown(AnnealSchedule, sv["schedule"], "solver.schedule")
                    sv["schedule"] = AnnealSchedule(**sv["schedule"])
                d["solver"] = SolverConfig(**sv)
            if "bench" in d:
                b = dict(d["bench"])
                _reject_unknown(BenchConfig, b, "bench")
                for k in ("sizes", "densities", "solvers", "seeds"):
                    if k in b:
                        b[k] = tuple(b[k])
                if "params" in b:
                    b["params"] = SynthParams.from_dict(b["params"])
                d["bench"] = BenchConfig(**b)
            if "budgets" in d:
                d["budgets"] = tuple(float(x) for x in d["budgets"])
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        # relative input paths are taken relative to the config file
        for key in PATH_FIELDS:
            if raw.get(key):
                p = Path(raw[key])
                raw[key] = str(p if p.is_absolute() else (path.parent / p).resolve())
        return cls.from_dict(raw)

    def replace(self, **changes) -> "RunConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return RunConfig(**d)

    # -- validation --------------------------------------------------------
    def require(self, *names: str) -> None:
        """Fail early when a needed input is unset or missing on disk."""
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"config field {name!r} is required for this command")
            if name in PATH_FIELDS and not Path(value).is_file():
                raise ConfigError(f"{name}: no such file {value}")


def _reject_unknown(cls, d: dict, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = {f.name for f in fields(cls)}
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown {where} key(s): {', '.join(extra)}")
