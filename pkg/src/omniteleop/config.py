"""Run configuration: YAML schema, validation, defaults.

Schema (all keys optional unless marked required-when-present; defaults
in parentheses; every unknown key is an error naming its dotted path):

  dt          physics step [s], in (0, 0.01]           (0.001)
  duration    run length [s], > 0                      (10.0)
  seed        integer >= 0, sole randomness source     (0)
  decimation  log every n-th tick, >= 1                (10)
  log         output record path                       (none)
  trace       operator input trace path                (none)

  station:    # omitted block = stock device constants
    m_a_t, m_a_r, d_a_t, d_a_r          required: device inertia/damping
    m_h_t, m_h_r, d_h_t, d_h_r          human terms (0)
    workspace_radius (0.3)  rotation_limit (1.4)
    force_limit (200)  torque_limit (20)
  policy:
    v_max, omega_max, k_rec_t, k_rec_r, tool_offset   required
    deadband_position (1e-3)  deadband_rotation (1e-3)
    deadband_enabled (true)
  vehicle:
    m_t, m_r, k_t, k_r                  required: impedance diagonals
    d_t, d_r                            (critically damped from k, m)
  wall:       # omitted block = no contact environment
    point, normal                       required
    normal_stiffness (1000)  normal_damping (50)
    friction (0.8)  v_eps (1e-3)
  link:       # all optional; omitted block = transparent link
    forward_delay (0)  return_delay (0)  jitter_std (0)
  initial:
    vehicle_position ([0,0,0])  vehicle_rotvec ([0,0,0])
  experiment: # declares a scripted scenario
    type: "decoupling" | "push_slide"   required
    decoupling: repetitions (5), tremor_amplitude (0),
      tremor_correlation_time (0.15), pulse_force (5), pulse_torque (1),
      schedule (list of [axis, start_frac, end_frac])
    push_slide: approach_handle (0.2), press_handle (0.1),
      slide_handle (0.15), approach_duration (1.0), press_duration (1.2),
      hold_duration (1.5), slide_duration (2.0), pause_duration (0.5)

Vectors are 3-element number lists. Scalar gains expand to isotropic
translational/rotational diagonal blocks.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError
from .geometry import Vec3
from .link import LinkModel
from .policy import PolicyParams
from .station import StationParams, iso_diag6
from .vehicle import VehicleParams, WallModel, critically_damped

AXES = ("tx", "ty", "tz", "rx", "ry", "rz")

_DEFAULT_SCHEDULE = (
    ("tx", 0.00, 0.15),
    ("ty", 0.15, 0.30),
    ("tz", 0.30, 0.45),
    ("rx", 0.50, 0.65),
    ("ry", 0.65, 0.80),
    ("rz", 0.80, 0.95),
)


@dataclass(frozen=True, slots=True)
class DecouplingSpec:
    """Scripted single-axis actuation trial with optional tremor noise."""

    repetitions: int = 5
    tremor_amplitude: float = 0.0
    tremor_correlation_time: float = 0.15
    pulse_force: float = 5.0
    pulse_torque: float = 1.0
    schedule: tuple[tuple[str, float, float], ...] = _DEFAULT_SCHEDULE

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.tremor_amplitude < 0.0 or self.tremor_correlation_time <= 0.0:
            raise ValueError("tremor amplitude must be >= 0 and correlation time > 0")
        if self.pulse_force <= 0.0 or self.pulse_torque <= 0.0:
            raise ValueError("pulse magnitudes must be > 0")
        prev_end = 0.0
        for axis, start, end in sorted(self.schedule, key=lambda seg: seg[1]):
            if axis not in AXES:
                raise ValueError(f"unknown axis {axis!r}")
            if not (0.0 <= start < end <= 1.0):
                raise ValueError("schedule segments must satisfy 0 <= start < end <= 1")
            if start < prev_end:
                raise ValueError("schedule segments must not overlap")
            prev_end = end
        if len({seg[0] for seg in self.schedule}) != len(self.schedule):
            raise ValueError("schedule axes must be unique")


@dataclass(frozen=True, slots=True)
class PushSlideSpec:
    """Pose-scripted approach / press / hold / slide-up / slide-down run.

    Handle magnitudes are pinned handle displacements [m]; with rate
    gain v_max they set the reference speed of each phase directly.
    """

    approach_handle: float = 0.2
    press_handle: float = 0.1
    slide_handle: float = 0.15
    approach_duration: float = 1.0
    press_duration: float = 1.2
    hold_duration: float = 1.5
    slide_duration: float = 2.0
    pause_duration: float = 0.5

    def __post_init__(self) -> None:
        if min(self.approach_handle, self.press_handle, self.slide_handle) <= 0.0:
            raise ValueError("phase handle magnitudes must be > 0")
        if min(
            self.approach_duration,
            self.press_duration,
            self.hold_duration,
            self.slide_duration,
            self.pause_duration,
        ) <= 0.0:
            raise ValueError("phase durations must be > 0")

    def total_duration(self) -> float:
        return (
            self.approach_duration
            + self.press_duration
            + self.hold_duration
            + 2.0 * self.slide_duration
            + self.pause_duration
        )


@dataclass(frozen=True, slots=True)
class SimConfig:
    """Fully validated run description; the orchestrator consumes this."""

    dt: float = 1e-3
    duration: float = 10.0
    seed: int = 0
    decimation: int = 10
    log: str | None = None
    trace: str | None = None
    station: StationParams = field(default_factory=StationParams)
    policy: PolicyParams = field(default_factory=PolicyParams)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    wall: WallModel | None = None
    link: LinkModel = field(default_factory=LinkModel)
    vehicle_position: Vec3 = Vec3(0.0, 0.0, 0.0)
    vehicle_rotvec: Vec3 = Vec3(0.0, 0.0, 0.0)
    experiment: DecouplingSpec | PushSlideSpec | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.dt <= 0.01:
            raise ValueError("dt must lie in (0, 0.01]")
        if self.duration <= 0.0:
            raise ValueError("duration must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.decimation < 1:
            raise ValueError("decimation must be >= 1")

    def ticks(self) -> int:
        """Tick count for the configured duration, end-exclusive."""
        return max(1, round(self.duration / self.dt))

    def with_overrides(self, **kw) -> "SimConfig":
        """Copy with CLI-level overrides (None values are ignored)."""
        live = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **live)


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _check_known(block: dict, known: tuple[str, ...], path: str) -> None:
    for key in block:
        if key not in known:
            raise ConfigError(_join(path, str(key)), "unknown field")


def _number(block: dict, key: str, path: str, default=None) -> float:
    if key not in block:
        if default is None:
            raise ConfigError(_join(path, key), "required field missing")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(_join(path, key), "must be a number")
    return float(v)


def _integer(block: dict, key: str, path: str, default: int) -> int:
    if key not in block:
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(_join(path, key), "must be an integer")
    return v


def _boolean(block: dict, key: str, path: str, default: bool) -> bool:
    if key not in block:
        return default
    v = block[key]
    if not isinstance(v, bool):
        raise ConfigError(_join(path, key), "must be true or false")
    return v


def _vec3(block: dict, key: str, path: str, default: Vec3 | None = None) -> Vec3:
    if key not in block:
        if default is None:
            raise ConfigError(_join(path, key), "required field missing")
        return default
    v = block[key]
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 3
        or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v)
    ):
        raise ConfigError(_join(path, key), "must be a list of 3 numbers")
    return Vec3(float(v[0]), float(v[1]), float(v[2]))


def _string(block: dict, key: str, path: str) -> str | None:
    if key not in block:
        return None
    v = block[key]
    if not isinstance(v, str):
        raise ConfigError(_join(path, key), "must be a string")
    return v


def _block(data: dict, key: str) -> dict | None:
    if key not in data:
        return None
    v = data[key]
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ConfigError(key, "must be a mapping")
    return v


def _wrap(path: str, fn):
    """Run a params constructor, converting its ValueError to ConfigError.

    Field-level ConfigErrors raised while evaluating the constructor
    arguments already carry the more precise path; pass them through.
    """
    try:
        return fn()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _parse_station(block: dict) -> StationParams:
    path = "station"
    _check_known(
        block,
        ("m_a_t", "m_a_r", "d_a_t", "d_a_r", "m_h_t", "m_h_r", "d_h_t", "d_h_r",
         "workspace_radius", "rotation_limit", "force_limit", "torque_limit"),
        path,
    )
    stock = StationParams()
    return _wrap(path, lambda: StationParams(
        human_inertia=iso_diag6(_number(block, "m_h_t", path, 0.0), _number(block, "m_h_r", path, 0.0)),
        human_damping=iso_diag6(_number(block, "d_h_t", path, 0.0), _number(block, "d_h_r", path, 0.0)),
        admittance_inertia=iso_diag6(_number(block, "m_a_t", path), _number(block, "m_a_r", path)),
        admittance_damping=iso_diag6(_number(block, "d_a_t", path), _number(block, "d_a_r", path)),
        workspace_radius=_number(block, "workspace_radius", path, stock.workspace_radius),
        rotation_limit=_number(block, "rotation_limit", path, stock.rotation_limit),
        force_limit=_number(block, "force_limit", path, stock.force_limit),
        torque_limit=_number(block, "torque_limit", path, stock.torque_limit),
    ))


def _parse_policy(block: dict) -> PolicyParams:
    path = "policy"
    _check_known(
        block,
        ("v_max", "omega_max", "k_rec_t", "k_rec_r", "tool_offset",
         "deadband_position", "deadband_rotation", "deadband_enabled"),
        path,
    )
    stock = PolicyParams()
    return _wrap(path, lambda: PolicyParams(
        v_max=_number(block, "v_max", path),
        omega_max=_number(block, "omega_max", path),
        recenter_stiffness=iso_diag6(_number(block, "k_rec_t", path), _number(block, "k_rec_r", path)),
        tool_offset=_vec3(block, "tool_offset", path),
        deadband_position=_number(block, "deadband_position", path, stock.deadband_position),
        deadband_rotation=_number(block, "deadband_rotation", path, stock.deadband_rotation),
        deadband_enabled=_boolean(block, "deadband_enabled", path, stock.deadband_enabled),
    ))


def _parse_vehicle(block: dict, tool_offset: Vec3) -> VehicleParams:
    path = "vehicle"
    _check_known(block, ("m_t", "m_r", "k_t", "k_r", "d_t", "d_r"), path)
    inertia = iso_diag6(_number(block, "m_t", path), _number(block, "m_r", path))
    stiffness = iso_diag6(_number(block, "k_t", path), _number(block, "k_r", path))
    matched = critically_damped(inertia, stiffness)
    damping = iso_diag6(
        _number(block, "d_t", path, matched[0]), _number(block, "d_r", path, matched[3])
    )
    return _wrap(path, lambda: VehicleParams(
        virtual_inertia=inertia,
        virtual_damping=damping,
        virtual_stiffness=stiffness,
        tool_offset=tool_offset,
    ))


def _parse_wall(block: dict) -> WallModel:
    path = "wall"
    _check_known(
        block, ("point", "normal", "normal_stiffness", "normal_damping", "friction", "v_eps"), path
    )
    stock_k, stock_d = 1000.0, 50.0
    return _wrap(path, lambda: WallModel(
        point=_vec3(block, "point", path),
        normal=_vec3(block, "normal", path),
        normal_stiffness=_number(block, "normal_stiffness", path, stock_k),
        normal_damping=_number(block, "normal_damping", path, stock_d),
        friction=_number(block, "friction", path, 0.8),
        v_eps=_number(block, "v_eps", path, 1e-3),
    ))


def _parse_link(block: dict, seed: int) -> LinkModel:
    path = "link"
    _check_known(block, ("forward_delay", "return_delay", "jitter_std"), path)
    return _wrap(path, lambda: LinkModel(
        forward_delay=_number(block, "forward_delay", path, 0.0),
        return_delay=_number(block, "return_delay", path, 0.0),
        jitter_std=_number(block, "jitter_std", path, 0.0),
        seed=seed,
    ))


def _parse_schedule(block: dict, path: str) -> tuple[tuple[str, float, float], ...]:
    if "schedule" not in block:
        return _DEFAULT_SCHEDULE
    raw = block["schedule"]
    if not isinstance(raw, (list, tuple)) or len(raw) == 0:
        raise ConfigError(f"{path}.schedule", "must be a non-empty list of [axis, start, end]")
    segs = []
    for i, seg in enumerate(raw):
        where = f"{path}.schedule[{i}]"
        if not isinstance(seg, (list, tuple)) or len(seg) != 3:
            raise ConfigError(where, "must be [axis, start, end]")
        axis, start, end = seg
        if axis not in AXES:
            raise ConfigError(where, f"axis must be one of {', '.join(AXES)}")
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in (start, end)):
            raise ConfigError(where, "start/end must be numbers")
        segs.append((axis, float(start), float(end)))
    return tuple(segs)


def _parse_experiment(block: dict) -> DecouplingSpec | PushSlideSpec:
    kind = _string(block, "type", "experiment")
    if kind is None:
        raise ConfigError("experiment.type", "required field missing")
    path = "experiment"
    if kind == "decoupling":
        _check_known(
            block,
            ("type", "repetitions", "tremor_amplitude", "tremor_correlation_time",
             "pulse_force", "pulse_torque", "schedule"),
            path,
        )
        return _wrap(path, lambda: DecouplingSpec(
            repetitions=_integer(block, "repetitions", path, 5),
            tremor_amplitude=_number(block, "tremor_amplitude", path, 0.0),
            tremor_correlation_time=_number(block, "tremor_correlation_time", path, 0.15),
            pulse_force=_number(block, "pulse_force", path, 5.0),
            pulse_torque=_number(block, "pulse_torque", path, 1.0),
            schedule=_parse_schedule(block, path),
        ))
    if kind == "push_slide":
        _check_known(
            block,
            ("type", "approach_handle", "press_handle", "slide_handle", "approach_duration",
             "press_duration", "hold_duration", "slide_duration", "pause_duration"),
            path,
        )
        stock = PushSlideSpec()
        return _wrap(path, lambda: PushSlideSpec(
            approach_handle=_number(block, "approach_handle", path, stock.approach_handle),
            press_handle=_number(block, "press_handle", path, stock.press_handle),
            slide_handle=_number(block, "slide_handle", path, stock.slide_handle),
            approach_duration=_number(block, "approach_duration", path, stock.approach_duration),
            press_duration=_number(block, "press_duration", path, stock.press_duration),
            hold_duration=_number(block, "hold_duration", path, stock.hold_duration),
            slide_duration=_number(block, "slide_duration", path, stock.slide_duration),
            pause_duration=_number(block, "pause_duration", path, stock.pause_duration),
        ))
    raise ConfigError("experiment.type", "must be 'decoupling' or 'push_slide'")


_ROOT_KEYS = (
    "dt", "duration", "seed", "decimation", "log", "trace",
    "station", "policy", "vehicle", "wall", "link", "initial", "experiment",
)


def parse_config(data: dict | None) -> SimConfig:
    """Validate a parsed mapping into a SimConfig; empty input = defaults."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    _check_known(data, _ROOT_KEYS, "")

    seed = _integer(data, "seed", "", 0)
    policy_block = _block(data, "policy")
    policy = PolicyParams() if policy_block is None else _parse_policy(policy_block)

    station_block = _block(data, "station")
    vehicle_block = _block(data, "vehicle")
    wall_block = _block(data, "wall")
    link_block = _block(data, "link")
    experiment_block = _block(data, "experiment")

    initial_block = _block(data, "initial")
    if initial_block is None:
        initial_block = {}
    _check_known(initial_block, ("vehicle_position", "vehicle_rotvec"), "initial")

    try:
        return SimConfig(
            dt=_number(data, "dt", "", 1e-3),
            duration=_number(data, "duration", "", 10.0),
            seed=seed,
            decimation=_integer(data, "decimation", "", 10),
            log=_string(data, "log", ""),
            trace=_string(data, "trace", ""),
            station=StationParams() if station_block is None else _parse_station(station_block),
            policy=policy,
            vehicle=(
                VehicleParams(tool_offset=policy.tool_offset)
                if vehicle_block is None
                else _parse_vehicle(vehicle_block, policy.tool_offset)
            ),
            wall=None if wall_block is None else _parse_wall(wall_block),
            link=LinkModel(seed=seed) if link_block is None else _parse_link(link_block, seed),
            vehicle_position=_vec3(initial_block, "vehicle_position", "initial", Vec3(0.0, 0.0, 0.0)),
            vehicle_rotvec=_vec3(initial_block, "vehicle_rotvec", "initial", Vec3(0.0, 0.0, 0.0)),
            experiment=None if experiment_block is None else _parse_experiment(experiment_block),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<root>", str(exc)) from None


def load_config(path: str) -> SimConfig:
    """Read and validate a YAML config file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<root>", f"not parseable: {exc}") from None
    return parse_config(data)
