"""Declarative scenario files: system description, initial state, planner,
controller gains, and simulation options.

The on-disk format is YAML.  ``load_scenario(save_scenario(spec)) == spec``
holds exactly for valid specs, and the three Table-style robot presets
(dragonfly, hummingbird, race) ship inside the package.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .control import ControlConfig, MultiCableController, RigidLinkController, SingleCableController
from .dynamics import CableSystem
from .errors import ConfigError
from .params import (
    ControllerGains,
    GAIN_FIELDS,
    MechanismSpec,
    PayloadParams,
    QuadrotorParams,
    StructureParams,
)
from .planner import AttitudeProfile, CirclePlan, HoverPlan, PolySpline, SplinePlan, solve_min_deriv
from .so3 import quat_to_rot
from .state import CableStatus, state_dim

FORMAT_VERSION = 1
GEOMETRY_TOL = 1e-6     # |d - l| bound for initially taut cables
TAUT_BAND = 1e-9

_PRESET_ROOT = importlib.resources.files("slungsim") / "presets"


@dataclass
class NoiseSpec:
    """Standard deviations of the feedback noise, one per state block."""

    position: float = 0.0
    velocity: float = 0.0
    quat_tangent: float = 0.0
    angular_velocity: float = 0.0

    def __post_init__(self):
        for name in ("position", "velocity", "quat_tangent", "angular_velocity"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"noise {name} must be nonnegative")

    @property
    def enabled(self) -> bool:
        return (self.position > 0 or self.velocity > 0
                or self.quat_tangent > 0 or self.angular_velocity > 0)

    def to_dict(self) -> dict:
        return {"position": float(self.position), "velocity": float(self.velocity),
                "quat_tangent": float(self.quat_tangent),
                "angular_velocity": float(self.angular_velocity)}


@dataclass
class SimOptions:
    t_final: float
    dt: float = 1e-3
    seed: int = 0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    control_decimation: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ConfigError("dt must be > 0")
        if self.t_final < 0.0:
            raise ConfigError("t_final must be >= 0")
        if self.control_decimation < 1:
            raise ConfigError("control decimation must be a positive integer")

    def to_dict(self) -> dict:
        return {"t_final": float(self.t_final), "dt": float(self.dt),
                "seed": int(self.seed), "noise": self.noise.to_dict(),
                "control_decimation": int(self.control_decimation)}


@dataclass
class PlannerSpec:
    kind: str                                   # hover | circle | waypoints
    hover_position: list | None = None
    radius: float | None = None
    period: float | None = None
    height: float | None = None
    waypoint_times: list | None = None
    waypoints: list | None = None
    min_deriv_order: int = 4
    attitude: AttitudeProfile | None = None

    def __post_init__(self):
        if self.kind not in ("hover", "circle", "waypoints"):
            raise ConfigError(f"unknown planner kind '{self.kind}'")
        if self.kind == "hover" and self.hover_position is None:
            raise ConfigError("hover planner requires a position")
        if self.kind == "circle" and None in (self.radius, self.period, self.height):
            raise ConfigError("circle planner requires radius, period and height")
        if self.kind == "waypoints" and (self.waypoints is None or self.waypoint_times is None):
            raise ConfigError("waypoint planner requires waypoints and times")

    def build(self):
        if self.kind == "hover":
            return HoverPlan(np.asarray(self.hover_position, dtype=float), self.attitude)
        if self.kind == "circle":
            return CirclePlan(self.radius, self.period, self.height, self.attitude)
        spline = solve_min_deriv(np.asarray(self.waypoints, dtype=float),
                                 np.asarray(self.waypoint_times, dtype=float),
                                 k=self.min_deriv_order)
        return SplinePlan(spline, self.attitude)

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "hover":
            d["hover_position"] = [float(v) for v in self.hover_position]
        elif self.kind == "circle":
            d.update(radius=float(self.radius), period=float(self.period),
                     height=float(self.height))
        else:
            d["waypoint_times"] = [float(t) for t in self.waypoint_times]
            d["waypoints"] = [[float(v) for v in w] for w in self.waypoints]
            d["min_deriv_order"] = int(self.min_deriv_order)
        if self.attitude is not None:
            d["attitude"] = {"axis": self.attitude.axis,
                             "amplitude": float(self.attitude.amplitude),
                             "period": float(self.attitude.period)}
        return d


@dataclass
class InitialSpec:
    """Payload pose/twist; robots are derived ("auto") or given explicitly."""

    payload_position: list
    payload_velocity: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    payload_quaternion: list = field(default_factory=lambda: [1.0, 0.0, 0.0, 0.0])
    payload_omega: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    robots: list | str = "auto"

    def to_dict(self) -> dict:
        d = {"payload_position": [float(v) for v in self.payload_position],
             "payload_velocity": [float(v) for v in self.payload_velocity],
             "payload_quaternion": [float(v) for v in self.payload_quaternion],
             "payload_omega": [float(v) for v in self.payload_omega]}
        if self.robots == "auto":
            d["robots"] = "auto"
        else:
            d["robots"] = [{k: [float(x) for x in v] for k, v in r.items()}
                           for r in self.robots]
        return d


@dataclass
class ScenarioSpec:
    name: str
    payload: PayloadParams
    robots: list[QuadrotorParams]
    mechanism: MechanismSpec
    gains: ControllerGains
    planner: PlannerSpec
    initial: InitialSpec
    sim: SimOptions
    control: ControlConfig = field(default_factory=ControlConfig)

    def __post_init__(self):
        n = len(self.robots)
        if n == 0:
            raise ConfigError("scenario needs at least one robot")
        if self.mechanism.kind == "cable":
            if len(self.mechanism.cable_lengths) != n:
                raise ConfigError(
                    f"{n} robots but {len(self.mechanism.cable_lengths)} cable lengths")
            if len(self.payload.attach_points) != n:
                raise ConfigError(
                    f"{n} robots but {len(self.payload.attach_points)} attach points")
        else:
            if len(self.mechanism.link_offsets) != n:
                raise ConfigError(
                    f"{n} robots but {len(self.mechanism.link_offsets)} link offsets")

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "system": {
                "payload": self.payload.to_dict(),
                "robots": [r.to_dict() for r in self.robots],
                "mechanism": self.mechanism.to_dict(),
            },
            "initial": self.initial.to_dict(),
            "planner": self.planner.to_dict(),
            "controller": {
                "gains": self.gains.to_dict(),
                "feedforward": self.control.feedforward,
                "ff_alpha": float(self.control.ff_alpha),
                "integral_limit": float(self.control.integral_limit),
            },
            "sim": self.sim.to_dict(),
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, ScenarioSpec) and self.to_dict() == other.to_dict()


def robot_preset(name: str) -> QuadrotorParams:
    path = _PRESET_ROOT / "robots" / f"{name}.yaml"
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"unknown robot preset '{name}'") from exc
    return QuadrotorParams(**data)


def scenario_preset_path(name: str) -> Path:
    return Path(str(_PRESET_ROOT / "scenarios" / f"{name}.yaml"))


def list_scenario_presets() -> list[str]:
    root = _PRESET_ROOT / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _parse_robot(entry: dict) -> QuadrotorParams:
    if "preset" in entry:
        base = robot_preset(entry["preset"]).to_dict()
        base.update({k: v for k, v in entry.items() if k != "preset"})
        return QuadrotorParams(**base)
    return QuadrotorParams(**entry)


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"missing '{key}' in {where}")
    return mapping[key]


def spec_from_dict(data: dict) -> ScenarioSpec:
    if not isinstance(data, dict):
        raise ConfigError("scenario file must contain a mapping at the top level")
    system = _require(data, "system", "scenario")
    pl = _require(system, "payload", "system")
    payload = PayloadParams(
        kind=_require(pl, "kind", "payload"),
        mass=_require(pl, "mass", "payload"),
        inertia=pl.get("inertia"),
        attach_points=pl.get("attach_points", [[0.0, 0.0, 0.0]]),
    )
    robots = [_parse_robot(r) for r in _require(system, "robots", "system")]
    mech_data = _require(system, "mechanism", "system")
    mechanism = MechanismSpec(
        kind=_require(mech_data, "kind", "mechanism"),
        cable_lengths=mech_data.get("cable_lengths", []),
        link_offsets=mech_data.get("link_offsets", []),
        wrench_maps=mech_data.get("wrench_maps"),
    )
    ctl_data = data.get("controller", {})
    gains = ControllerGains(**{k: _require(ctl_data.get("gains", {}), k, "gains")
                               for k in GAIN_FIELDS})
    control = ControlConfig(
        feedforward=ctl_data.get("feedforward", "zero"),
        ff_alpha=float(ctl_data.get("ff_alpha", 0.5)),
        integral_limit=float(ctl_data.get("integral_limit", 2.0)),
    )
    plan_data = _require(data, "planner", "scenario")
    att = None
    if "attitude" in plan_data and plan_data["attitude"] is not None:
        att = AttitudeProfile(**plan_data["attitude"])
    planner = PlannerSpec(
        kind=_require(plan_data, "kind", "planner"),
        hover_position=plan_data.get("hover_position"),
        radius=plan_data.get("radius"),
        period=plan_data.get("period"),
        height=plan_data.get("height"),
        waypoint_times=plan_data.get("waypoint_times"),
        waypoints=plan_data.get("waypoints"),
        min_deriv_order=int(plan_data.get("min_deriv_order", 4)),
        attitude=att,
    )
    init_data = _require(data, "initial", "scenario")
    initial = InitialSpec(
        payload_position=_require(init_data, "payload_position", "initial"),
        payload_velocity=init_data.get("payload_velocity", [0.0, 0.0, 0.0]),
        payload_quaternion=init_data.get("payload_quaternion", [1.0, 0.0, 0.0, 0.0]),
        payload_omega=init_data.get("payload_omega", [0.0, 0.0, 0.0]),
        robots=init_data.get("robots", "auto"),
    )
    sim_data = _require(data, "sim", "scenario")
    sim = SimOptions(
        t_final=_require(sim_data, "t_final", "sim"),
        dt=float(sim_data.get("dt", 1e-3)),
        seed=int(sim_data.get("seed", 0)),
        noise=NoiseSpec(**sim_data.get("noise", {})),
        control_decimation=int(sim_data.get("control_decimation", 1)),
    )
    spec = ScenarioSpec(
        name=data.get("name", "scenario"),
        payload=payload, robots=robots, mechanism=mechanism, gains=gains,
        planner=planner, initial=initial, sim=sim, control=control,
    )
    validate_initial_state(spec)
    return spec


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"cannot parse {path}{where}: {exc}") from exc
    return spec_from_dict(data)


def save_scenario(spec: ScenarioSpec, path) -> None:
    Path(path).write_text(yaml.safe_dump(spec.to_dict(), sort_keys=False))


# ---------------------------------------------------------------------------
# building runnable objects from a spec
# ---------------------------------------------------------------------------

def build_cable_system(spec: ScenarioSpec) -> CableSystem:
    if spec.mechanism.kind != "cable":
        raise ConfigError("not a cable scenario")
    return CableSystem(payload=spec.payload, robots=spec.robots,
                       lengths=list(spec.mechanism.cable_lengths))


def build_structure(spec: ScenarioSpec) -> StructureParams:
    return StructureParams.build(spec.payload, spec.robots, spec.mechanism)


def build_controller(spec: ScenarioSpec, system):
    if spec.mechanism.kind == "rigid_link":
        return RigidLinkController(system, spec.robots, spec.gains)
    if system.is_single:
        return SingleCableController(system, spec.gains,
                                     dt=spec.sim.dt * spec.sim.control_decimation,
                                     config=spec.control)
    return MultiCableController(system, spec.gains,
                                dt=spec.sim.dt * spec.sim.control_decimation,
                                config=spec.control)


def initial_cable_state(spec: ScenarioSpec) -> np.ndarray:
    """Flat initial state; "auto" robots hang taut above their attach points
    with cable-consistent velocities."""
    n = len(spec.robots)
    x = np.zeros(state_dim(n))
    init = spec.initial
    x[0:3] = np.asarray(init.payload_position, dtype=float)
    x[3:6] = np.asarray(init.payload_velocity, dtype=float)
    q = np.asarray(init.payload_quaternion, dtype=float)
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > 1e-9:
        raise ConfigError(f"initial payload quaternion norm {norm} is not 1")
    x[6:10] = q / norm
    x[10:13] = np.asarray(init.payload_omega, dtype=float)
    r_l = quat_to_rot(x[6:10])
    rho = spec.payload.rho
    lengths = spec.mechanism.cable_lengths
    if init.robots == "auto":
        for k in range(n):
            base = 13 + 13 * k
            p = x[0:3] + r_l @ rho[k]
            x[base:base + 3] = p + lengths[k] * np.array([0.0, 0.0, 1.0])
            x[base + 3:base + 6] = x[3:6] + r_l @ np.cross(x[10:13], rho[k])
            x[base + 6] = 1.0
    else:
        if len(init.robots) != n:
            raise ConfigError(f"{n} robots but {len(init.robots)} initial robot states")
        for k, entry in enumerate(init.robots):
            base = 13 + 13 * k
            x[base:base + 3] = np.asarray(_require(entry, "position", "initial robot"),
                                          dtype=float)
            x[base + 3:base + 6] = np.asarray(entry.get("velocity", [0, 0, 0]), dtype=float)
            qk = np.asarray(entry.get("quaternion", [1, 0, 0, 0]), dtype=float)
            nq = np.linalg.norm(qk)
            if abs(nq - 1.0) > 1e-9:
                raise ConfigError(f"initial robot {k} quaternion norm {nq} is not 1")
            x[base + 6:base + 10] = qk / nq
            x[base + 10:base + 13] = np.asarray(entry.get("omega", [0, 0, 0]), dtype=float)
    return x


def initial_cable_status(spec: ScenarioSpec, x: np.ndarray) -> CableStatus:
    n = len(spec.robots)
    r_l = quat_to_rot(x[6:10])
    taut = np.zeros(n, dtype=bool)
    for k in range(n):
        p = x[0:3] + r_l @ spec.payload.rho[k]
        d = np.linalg.norm(x[13 + 13 * k:16 + 13 * k] - p)
        l = spec.mechanism.cable_lengths[k]
        if d > l + GEOMETRY_TOL:
            raise ConfigError(
                f"initial state violates cable {k} geometry: d = {d:.9f} > l = {l}")
        taut[k] = d >= l - TAUT_BAND
    return CableStatus(taut)


def initial_structure_state(spec: ScenarioSpec, structure: StructureParams) -> np.ndarray:
    """Structure COM state derived from the payload's initial pose."""
    init = spec.initial
    x = np.zeros(13)
    q = np.asarray(init.payload_quaternion, dtype=float)
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > 1e-9:
        raise ConfigError(f"initial payload quaternion norm {norm} is not 1")
    q = q / norm
    r = quat_to_rot(q)
    omega = np.asarray(init.payload_omega, dtype=float)
    off = structure.payload_offset
    x[0:3] = np.asarray(init.payload_position, dtype=float) - r @ off
    x[3:6] = np.asarray(init.payload_velocity, dtype=float) - r @ np.cross(omega, off)
    x[6:10] = q
    x[10:13] = omega
    return x


def validate_initial_state(spec: ScenarioSpec) -> None:
    if spec.mechanism.kind == "cable":
        x = initial_cable_state(spec)
        status = initial_cable_status(spec, x)
        # declared-taut cables must satisfy the geometry within tolerance
        r_l = quat_to_rot(x[6:10])
        for k in status.taut_set:
            p = x[0:3] + r_l @ spec.payload.rho[k]
            d = np.linalg.norm(x[13 + 13 * k:16 + 13 * k] - p)
            if abs(d - spec.mechanism.cable_lengths[k]) > GEOMETRY_TOL:
                raise ConfigError(
                    f"taut cable {k}: |d - l| = "
                    f"{abs(d - spec.mechanism.cable_lengths[k]):.2e} exceeds {GEOMETRY_TOL}")
    else:
        build_structure(spec)
