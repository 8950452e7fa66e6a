"""Run configuration for the command line: nested dataclasses, strict parsing, presets.

Angles are given in units of pi here and converted to radians when the
computational objects are built.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .fisher import ProbeSpec
from .noise import JITTER_MODES, PLACEMENTS, NoiseSpec
from .walk import PARAMETER_NAMES, Boundary, Coin, WalkConfig

SCENARIOS = ("spectrum", "gbz", "fisher-sweep", "time-trace", "scaling", "bayes", "noise")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass
class WalkSection:
    n: int = 50
    boundary: str = "obc"
    theta1_L: float = 0.9
    theta2_L: float = 0.1
    theta1_R: float = 0.1
    theta2_R: float = 0.9
    gamma: float = 0.3

    def build(self, n: int | None = None) -> WalkConfig:
        pi = math.pi
        return WalkConfig(self.n if n is None else n, self.theta1_L * pi, self.theta2_L * pi,
                          self.theta1_R * pi, self.theta2_R * pi, self.gamma, Boundary(self.boundary))


@dataclass
class GridSection:
    start: float = 0.02
    stop: float = 0.2
    step: float = 0.005

    def values(self) -> list[float]:
        count = int(round((self.stop - self.start) / self.step)) + 1
        return [round(self.start + i * self.step, 12) for i in range(count)]


@dataclass
class ProbeSection:
    kind: str = "transient"
    steps: int | None = None
    coin: str = "V"
    parameter: str = "locked"
    scheme: str = "converged"
    h: float = 1e-5
    parity: int = 0
    allow_failures: bool = False

    def build(self) -> ProbeSpec:
        return ProbeSpec(self.kind, self.steps, Coin(self.coin), self.parameter, self.parity)


@dataclass
class ScalingSection:
    sizes: list = field(default_factory=lambda: list(range(21, 102, 10)))
    which: str = "qfi"
    refine: bool = True
    fixed_theta: float | None = None


@dataclass
class TimeTraceSection:
    t_max: int = 500
    theta: float | None = None


@dataclass
class SpectrumSection:
    k_points: int = 512
    reference_re: float = 0.0
    reference_im: float = 0.0
    line_point_re: float = 0.0
    line_point_im: float = 0.0
    line_direction_re: float = 0.0
    line_direction_im: float = 1.0


@dataclass
class GbzSection:
    tol: float = 1e-6
    window: float = 0.05


@dataclass
class NoiseSection:
    eta: float = 1.0
    W: float = 0.0
    runs: int = 1
    jitter_mode: str = "static_per_run"
    placement: str = "shift"

    def build(self, seed: int) -> NoiseSpec:
        return NoiseSpec(self.eta, self.W, self.runs, seed, self.jitter_mode, self.placement)


@dataclass
class EstimationSection:
    M: int = 25000
    trials: int = 1
    theta_true: list | None = None
    prior_min: float = 0.0
    prior_max: float = 1.0
    coarse_points: int = 2001
    fine_points: int = 401


@dataclass
class RunConfig:
    scenario: str = "fisher-sweep"
    seed: int = 0
    walk: WalkSection = field(default_factory=WalkSection)
    grid: GridSection = field(default_factory=GridSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    scaling: ScalingSection = field(default_factory=ScalingSection)
    time_trace: TimeTraceSection = field(default_factory=TimeTraceSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    gbz: GbzSection = field(default_factory=GbzSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    estimation: EstimationSection = field(default_factory=EstimationSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ------------------------------------------------------------------ parsing

def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(path: str, value: Any, default: Any, annotation: str):
    """Check one leaf value against the type of its declared default."""
    if value is None and ("None" in annotation or default is None):
        return None
    if "bool" in annotation:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if annotation.startswith("int"):
        if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if annotation.startswith("float"):
        if not _is_number(value) or not math.isfinite(value):
            raise ConfigError(f"{path}: expected a finite number, got {value!r}")
        return float(value)
    if annotation.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if annotation.startswith("list"):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        for i, item in enumerate(value):
            if not _is_number(item) or not math.isfinite(item):
                raise ConfigError(f"{path}[{i}]: expected a finite number, got {item!r}")
        return list(value)
    return value


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    obj = cls()
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"{sub}: unknown field")
        f = names[key]
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            setattr(obj, key, _build(type(current), value, sub))
        else:
            setattr(obj, key, _coerce(sub, value, current, str(f.type)))
    return obj


def _validate(cfg: RunConfig) -> None:
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"scenario: must be one of {', '.join(SCENARIOS)}, got {cfg.scenario!r}")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {cfg.seed}")
    w = cfg.walk
    if w.n < 1:
        raise ConfigError(f"walk.n: must be >= 1, got {w.n}")
    if w.boundary not in [b.value for b in Boundary]:
        raise ConfigError(f"walk.boundary: must be 'obc' or 'cbc', got {w.boundary!r}")
    if w.gamma < 0:
        raise ConfigError(f"walk.gamma: must be >= 0, got {w.gamma}")
    g = cfg.grid
    if g.step <= 0 or g.stop < g.start:
        raise ConfigError("grid.step: need step > 0 and stop >= start")
    p = cfg.probe
    if p.kind not in ("transient", "steady"):
        raise ConfigError(f"probe.kind: must be 'transient' or 'steady', got {p.kind!r}")
    if p.coin not in [c.value for c in Coin]:
        raise ConfigError(f"probe.coin: must be one of {[c.value for c in Coin]}, got {p.coin!r}")
    if p.parameter not in PARAMETER_NAMES:
        raise ConfigError(f"probe.parameter: must be one of {PARAMETER_NAMES}, got {p.parameter!r}")
    if p.scheme not in ("converged", "forward_paper"):
        raise ConfigError(f"probe.scheme: must be 'converged' or 'forward_paper', got {p.scheme!r}")
    if p.h <= 0:
        raise ConfigError("probe.h: must be positive")
    if p.steps is not None and p.steps < 0:
        raise ConfigError("probe.steps: must be >= 0")
    s = cfg.scaling
    if len(s.sizes) < 4 or any(int(n) != n or n < 3 or int(n) % 2 == 0 for n in s.sizes):
        raise ConfigError("scaling.sizes: need at least 4 odd sizes >= 3")
    s.sizes = [int(n) for n in s.sizes]
    if s.which not in ("qfi", "cfi"):
        raise ConfigError(f"scaling.which: must be 'qfi' or 'cfi', got {s.which!r}")
    if cfg.time_trace.t_max < 1:
        raise ConfigError("time_trace.t_max: must be >= 1")
    n = cfg.noise
    if not 0 <= n.eta <= 1:
        raise ConfigError(f"noise.eta: must lie in [0, 1], got {n.eta}")
    if n.W < 0:
        raise ConfigError(f"noise.W: must be >= 0, got {n.W}")
    if n.runs < 1:
        raise ConfigError("noise.runs: must be >= 1")
    if n.jitter_mode not in JITTER_MODES:
        raise ConfigError(f"noise.jitter_mode: must be one of {JITTER_MODES}")
    if n.placement not in PLACEMENTS:
        raise ConfigError(f"noise.placement: must be one of {PLACEMENTS}")
    e = cfg.estimation
    if e.M < 1 or e.trials < 1:
        raise ConfigError("estimation.M: M and trials must be >= 1")
    if e.prior_max <= e.prior_min:
        raise ConfigError("estimation.prior_max: must exceed prior_min")
    if e.coarse_points < 200 or e.fine_points < 200:
        raise ConfigError("estimation.coarse_points: posterior grids need at least 200 points")


def parse_config(data: dict) -> RunConfig:
    """Strictly parse a (possibly partial) config dict; missing fields take defaults."""
    cfg = _build(RunConfig, data, "")
    _validate(cfg)
    return cfg


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, assignments: list[str]) -> dict:
    """Apply `key.sub=value` assignments; values are read as JSON when possible."""
    data = copy.deepcopy(data)
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"{item}: override must look like key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: {part} is not a section")
        node[parts[-1]] = _parse_scalar(text.strip())
    return data


PRESETS = {
    "fig2-point": {
        "scenario": "fisher-sweep",
        "walk": {"n": 50, "boundary": "obc", "theta1_L": 0.9, "theta2_L": 0.1,
                 "theta1_R": 0.1, "theta2_R": 0.9, "gamma": 0.3},
        "grid": {"start": 0.02, "stop": 0.2, "step": 0.005},
        "probe": {"coin": "V"},
    },
    "fig2-line": {
        "scenario": "fisher-sweep",
        "walk": {"n": 50, "boundary": "obc", "theta1_L": 0.05, "theta2_L": 0.779,
                 "theta1_R": 0.779, "theta2_R": 0.05, "gamma": 0.3},
        "grid": {"start": 0.7, "stop": 0.86, "step": 0.005},
        "probe": {"coin": "H_minus_V"},
    },
    "fig4-point": {
        "scenario": "fisher-sweep",
        "walk": {"n": 15, "boundary": "obc", "theta1_L": 0.9, "theta2_L": 0.1,
                 "theta1_R": 0.1, "theta2_R": 0.9, "gamma": 0.3},
        "grid": {"start": 0.05, "stop": 0.2, "step": 0.01},
        "probe": {"coin": "V", "scheme": "forward_paper"},
    },
    "fig4-line": {
        "scenario": "fisher-sweep",
        "walk": {"n": 15, "boundary": "obc", "theta1_L": 0.05, "theta2_L": 0.74,
                 "theta1_R": 0.74, "theta2_R": 0.05, "gamma": 0.3},
        "grid": {"start": 0.65, "stop": 0.85, "step": 0.01},
        "probe": {"coin": "H_minus_V", "scheme": "forward_paper"},
    },
    "fig5-bayes": {
        "scenario": "bayes",
        "walk": {"n": 15, "boundary": "obc", "theta1_L": 0.9, "theta2_L": 0.1,
                 "theta1_R": 0.1, "theta2_R": 0.9, "gamma": 0.3},
        "grid": {"start": 0.05, "stop": 0.2, "step": 0.01},
        "probe": {"coin": "V"},
        "estimation": {"M": 25000, "trials": 1},
    },
    "sm-obc-extra": {
        "scenario": "fisher-sweep",
        "walk": {"n": 15, "boundary": "obc", "theta1_L": 0.45, "theta2_L": 0.65,
                 "theta1_R": 0.1, "theta2_R": 1.45, "gamma": 0.3},
        "grid": {"start": 0.55, "stop": 0.8, "step": 0.01},
        "probe": {"coin": "V", "parameter": "theta2_L"},
    },
    "sm-noise": {
        "scenario": "noise",
        "walk": {"n": 25, "boundary": "obc", "theta1_L": 0.9, "theta2_L": 0.1,
                 "theta1_R": 0.1, "theta2_R": 0.9, "gamma": 0.3},
        "grid": {"start": 0.05, "stop": 0.2, "step": 0.01},
        "probe": {"coin": "V"},
        "noise": {"eta": 0.98, "W": 0.0, "runs": 20},
    },
}


def presets() -> list[str]:
    return sorted(PRESETS)


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown preset {name!r}; available: {', '.join(presets())}")
    return copy.deepcopy(PRESETS[name])
