"""Scenario configuration: YAML file <-> validated nested dataclasses.

Every field has a default, so an empty file yields the reference
four-carrier scenario. Unknown keys are rejected. See ``configs/`` for a
fully spelled-out example.
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError


@dataclass
class GeometryConfig:
    n: int = 4
    attachments: list | None = None  # load-frame points; default regular polygon
    attachment_radius: float = 0.4
    cable_length: float | list = 0.8  # rest length L0
    load_mass: float = 1.0
    load_inertia: float | list = 0.01  # scalar, diagonal, or 3x3
    load_damping: float = 0.7
    load_angular_damping: float = 0.7
    carrier_mass: float | list = 0.01
    gravity: float = 9.81


@dataclass
class CableConfig:
    stiffness: float = 500.0
    damping: float = 0.1
    unilateral: bool = True


@dataclass
class CarrierConfig:
    mode: str = "point_mass_pd"  # or "kinematic"
    kp: float = 1000.0
    kd: float = 1.5


@dataclass
class ControllerConfig:
    kp: float | list = 5.0
    kv: float | list = 2.0
    ki: float | list = 0.9
    kR: float | list = 0.5
    kw: float | list = 0.06
    kiR: float | list = 0.1
    int_clamp_p: float = 2.0
    int_clamp_R: float = 1.0


@dataclass
class OptimizerConfig:
    enabled: bool = True
    initial_xi: float = 1.0
    initial_A: float = 0.1
    xi_bounds: list = field(default_factory=lambda: [0.1, 8.0])
    A_bounds: list = field(default_factory=lambda: [0.0, 3.0])
    w_pos: float = 1.0
    w_vel: float = 0.1
    grid: int = 41
    period: float = 0.05
    phases: list | None = None  # default uniform spacing over the driven columns
    columns: list | None = None  # nullspace columns driven; default all
    basis: str = "balanced"  # initial nullspace basis: "balanced" or "svd"
    lookahead: str = "hold"  # "none", "hold" or "period"
    lookahead_samples: int | None = None  # default: ticks per hold / 16 per period
    polish: bool = True
    max_fallbacks: int | None = None


@dataclass
class SegmentConfig:
    kind: str = "hold"  # "hold" or "move"
    duration: float = 1.0
    target: list | None = None
    rotvec: list | None = None


def _default_segments():
    return [SegmentConfig("hold", 5.0),
            SegmentConfig("move", 10.0, target=[1.5, 0.0, 0.0]),
            SegmentConfig("hold", 10.0)]


@dataclass
class TrajectoryConfig:
    initial_position: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    initial_rotvec: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    segments: list = field(default_factory=_default_segments)


@dataclass
class TimingConfig:
    dt: float = 1e-3
    control_period: float = 5e-3
    duration: float | None = None  # default: trajectory length


@dataclass
class OutputConfig:
    plotdata: bool = True
    precision: int = 9


@dataclass
class ScenarioConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    cable: CableConfig = field(default_factory=CableConfig)
    carrier: CarrierConfig = field(default_factory=CarrierConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    epsilon: float = 0.2
    tension_floor: float = 0.05
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @property
    def duration(self):
        if self.timing.duration is not None:
            return self.timing.duration
        return sum(s.duration for s in self.trajectory.segments)

    def with_overrides(self, overrides):
        return apply_overrides(self, overrides)


_NESTED = {
    "geometry": GeometryConfig, "cable": CableConfig, "carrier": CarrierConfig,
    "controller": ControllerConfig, "optimizer": OptimizerConfig,
    "trajectory": TrajectoryConfig, "timing": TimingConfig, "output": OutputConfig,
}


def _build(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {', '.join(map(str, unknown))}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        val = data[f.name]
        sub = f"{path}.{f.name}" if path else f.name
        if cls is ScenarioConfig and f.name in _NESTED:
            val = _build(_NESTED[f.name], val, sub)
        elif cls is TrajectoryConfig and f.name == "segments":
            if not isinstance(val, list):
                raise ConfigError(f"{sub}: expected a list of segments")
            val = [_build(SegmentConfig, s, f"{sub}[{j}]") for j, s in enumerate(val)]
        kwargs[f.name] = val
    return cls(**kwargs)


def from_dict(data):
    cfg = _build(ScenarioConfig, copy.deepcopy(data), "")
    validate(cfg)
    return cfg


def _num(path, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}: expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{path}: must be > 0, got {v}")
    if nonneg and v < 0:
        raise ConfigError(f"{path}: must be >= 0, got {v}")
    return float(v)


def _vec(path, v, length=3):
    if not isinstance(v, (list, tuple)) or len(v) != length:
        raise ConfigError(f"{path}: expected a list of {length} numbers, got {v!r}")
    return [_num(f"{path}[{j}]", x) for j, x in enumerate(v)]


def _gain(path, v):
    if isinstance(v, (list, tuple)):
        if len(v) == 3 and all(not isinstance(x, (list, tuple)) for x in v):
            for j, x in enumerate(v):
                _num(f"{path}[{j}]", x, nonneg=True)
            return
        if len(v) == 3:
            M = np.array([_vec(f"{path}[{j}]", r) for j, r in enumerate(v)])
            if not np.allclose(M, np.diag(np.diag(M))) or np.any(np.diag(M) < 0):
                raise ConfigError(f"{path}: gain matrices must be diagonal with nonnegative entries")
            return
        raise ConfigError(f"{path}: expected scalar, 3-vector or 3x3 matrix")
    _num(path, v, nonneg=True)


def validate(cfg):
    g = cfg.geometry
    if isinstance(g.n, bool) or not isinstance(g.n, int):
        raise ConfigError(f"geometry.n: expected an integer, got {g.n!r}")
    if g.attachments is not None:
        if not isinstance(g.attachments, list) or len(g.attachments) != g.n:
            raise ConfigError(f"geometry.attachments: expected {g.n} points")
        for j, b in enumerate(g.attachments):
            _vec(f"geometry.attachments[{j}]", b)
    if g.n < 3:
        raise ConfigError(f"geometry.n: at least 3 carriers are required, got {g.n}")
    _num("geometry.attachment_radius", g.attachment_radius, positive=True)
    for name in ("cable_length", "carrier_mass"):
        v = getattr(g, name)
        vals = v if isinstance(v, list) else [v]
        if isinstance(v, list) and len(v) != g.n:
            raise ConfigError(f"geometry.{name}: expected {g.n} values")
        for j, x in enumerate(vals):
            _num(f"geometry.{name}", x, positive=True)
    _num("geometry.load_mass", g.load_mass, positive=True)
    J = g.load_inertia
    if isinstance(J, list):
        Jm = np.diag(_vec("geometry.load_inertia", J)) if not isinstance(J[0], list) else \
            np.array([_vec(f"geometry.load_inertia[{j}]", r) for j, r in enumerate(J)])
    else:
        Jm = _num("geometry.load_inertia", J, positive=True) * np.eye(3)
    if Jm.shape != (3, 3) or not np.allclose(Jm, Jm.T) or np.linalg.eigvalsh(Jm).min() <= 0:
        raise ConfigError("geometry.load_inertia: must be symmetric positive definite")
    _num("geometry.load_damping", g.load_damping, nonneg=True)
    _num("geometry.load_angular_damping", g.load_angular_damping, nonneg=True)
    _num("geometry.gravity", g.gravity, nonneg=True)

    _num("cable.stiffness", cfg.cable.stiffness, positive=True)
    _num("cable.damping", cfg.cable.damping, nonneg=True)
    if not isinstance(cfg.cable.unilateral, bool):
        raise ConfigError("cable.unilateral: expected a boolean")

    if cfg.carrier.mode not in ("point_mass_pd", "kinematic"):
        raise ConfigError(f"carrier.mode: expected 'point_mass_pd' or 'kinematic', got {cfg.carrier.mode!r}")
    _num("carrier.kp", cfg.carrier.kp, positive=True)
    _num("carrier.kd", cfg.carrier.kd, nonneg=True)

    c = cfg.controller
    for name in ("kp", "kv", "ki", "kR", "kw", "kiR"):
        _gain(f"controller.{name}", getattr(c, name))
    _num("controller.int_clamp_p", c.int_clamp_p, nonneg=True)
    _num("controller.int_clamp_R", c.int_clamp_R, nonneg=True)

    _num("epsilon", cfg.epsilon, positive=True)
    _num("tension_floor", cfg.tension_floor, positive=True)

    o = cfg.optimizer
    for name in ("enabled", "polish"):
        if not isinstance(getattr(o, name), bool):
            raise ConfigError(f"optimizer.{name}: expected a boolean")
    xb = _vec("optimizer.xi_bounds", o.xi_bounds, 2)
    ab = _vec("optimizer.A_bounds", o.A_bounds, 2)
    if not 0 <= xb[0] <= xb[1]:
        raise ConfigError("optimizer.xi_bounds: need 0 <= min <= max")
    if not 0 <= ab[0] <= ab[1]:
        raise ConfigError("optimizer.A_bounds: need 0 <= min <= max")
    _num("optimizer.initial_xi", o.initial_xi, nonneg=True)
    _num("optimizer.initial_A", o.initial_A, nonneg=True)
    _num("optimizer.w_pos", o.w_pos, nonneg=True)
    _num("optimizer.w_vel", o.w_vel, nonneg=True)
    if isinstance(o.grid, bool) or not isinstance(o.grid, int) or o.grid < 2:
        raise ConfigError("optimizer.grid: expected an integer >= 2")
    if o.basis not in ("balanced", "svd"):
        raise ConfigError(f"optimizer.basis: expected 'balanced' or 'svd', got {o.basis!r}")
    if o.lookahead not in ("none", "hold", "period"):
        raise ConfigError(f"optimizer.lookahead: expected 'none', 'hold' or 'period', got {o.lookahead!r}")
    if o.lookahead_samples is not None and (isinstance(o.lookahead_samples, bool) or
                                            not isinstance(o.lookahead_samples, int) or
                                            o.lookahead_samples < 1):
        raise ConfigError("optimizer.lookahead_samples: expected a positive integer or null")
    _num("optimizer.period", o.period, positive=True)
    k = 3 * g.n - 6
    if o.columns is not None:
        if not isinstance(o.columns, list) or not o.columns or \
                not all(isinstance(j, int) and 0 <= j < k for j in o.columns) or \
                len(set(o.columns)) != len(o.columns):
            raise ConfigError(f"optimizer.columns: expected distinct indices in [0, {k})")
    m = k if o.columns is None else len(o.columns)
    if o.phases is not None:
        _vec("optimizer.phases", o.phases, m)
    if o.max_fallbacks is not None and (not isinstance(o.max_fallbacks, int) or o.max_fallbacks < 0):
        raise ConfigError("optimizer.max_fallbacks: expected a nonnegative integer or null")

    t = cfg.trajectory
    _vec("trajectory.initial_position", t.initial_position)
    _vec("trajectory.initial_rotvec", t.initial_rotvec)
    if not t.segments:
        raise ConfigError("trajectory.segments: at least one segment is required")
    for j, s in enumerate(t.segments):
        p = f"trajectory.segments[{j}]"
        if s.kind not in ("hold", "move"):
            raise ConfigError(f"{p}.kind: expected 'hold' or 'move', got {s.kind!r}")
        _num(f"{p}.duration", s.duration, positive=True)
        if s.kind == "move":
            if s.target is None:
                raise ConfigError(f"{p}.target: required for move segments")
            _vec(f"{p}.target", s.target)
        elif s.target is not None:
            raise ConfigError(f"{p}.target: only valid for move segments")
        if s.rotvec is not None:
            if s.kind != "move":
                raise ConfigError(f"{p}.rotvec: only valid for move segments")
            _vec(f"{p}.rotvec", s.rotvec)

    tm = cfg.timing
    dt = _num("timing.dt", tm.dt, positive=True)
    if dt > 0.01:
        raise ConfigError(f"timing.dt: must be <= 0.01 s, got {dt}")
    cp = _num("timing.control_period", tm.control_period, positive=True)
    ratio = cp / dt
    if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
        raise ConfigError("timing.control_period: must be an integer multiple of timing.dt")
    if o.period < cp * (1 - 1e-12):
        raise ConfigError("optimizer.period: must be >= timing.control_period")
    if tm.duration is not None:
        _num("timing.duration", tm.duration, positive=True)

    if not isinstance(cfg.output.plotdata, bool):
        raise ConfigError("output.plotdata: expected a boolean")
    if isinstance(cfg.output.precision, bool) or not isinstance(cfg.output.precision, int) \
            or not 1 <= cfg.output.precision <= 17:
        raise ConfigError("output.precision: expected an integer in [1, 17]")
    return cfg


def loads(text, source="<string>"):
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{source}: parse error at {where}: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from exc
    return from_dict(data or {})


def load_config(path, overrides=()):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    cfg = loads(text, str(path))
    return apply_overrides(cfg, overrides) if overrides else cfg


def apply_overrides(cfg, overrides):
    """Apply ``dotted.key=value`` strings; values are parsed as YAML scalars/lists."""
    data = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override {item!r}: cannot parse value") from exc
        node: Any = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError) as exc:
                    raise ConfigError(f"override {item!r}: bad index {part!r}") from exc
            elif isinstance(node, dict) and part in node and isinstance(node[part], (dict, list)):
                node = node[part]
            else:
                raise ConfigError(f"override {item!r}: unknown key {part!r}")
        last = parts[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = value
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"override {item!r}: bad index {last!r}") from exc
        elif isinstance(node, dict) and last in node:
            node[last] = value
        else:
            raise ConfigError(f"override {item!r}: unknown key {last!r}")
    return from_dict(data)
