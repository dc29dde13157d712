"""Scenario files: JSON documents describing one lab trial setup."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .behavior import ControlParams
from .perception import CameraModel, NoiseParams
from .world import AgentState, WaypointScript, WorldState, initial_world

ACTIVATION_DISTANCES = (1.5, 2.5, 3.5)
ROLES = ("user", "passerby")
ACTIVATION_WINDOW_S = 30.0


class ScenarioError(ValueError):
    """Raised for malformed or invalid scenario files."""


@dataclass(frozen=True)
class AgentSpec:
    agent_id: int
    role: str
    waypoints: Tuple[Tuple[float, float, float], ...]
    width_m: float = 0.5
    height_m: float = 1.7
    hand_raised: Optional[Tuple[float, float]] = None

    def to_agent(self) -> AgentState:
        return AgentState(
            agent_id=self.agent_id,
            x=self.waypoints[0][1],
            y=self.waypoints[0][2],
            script=WaypointScript(self.waypoints),
            role=self.role,
            hand_raised_interval=self.hand_raised,
            width_m=self.width_m,
            height_m=self.height_m,
        )


@dataclass(frozen=True)
class Scenario:
    activation_distance: float
    scenario_id: str = "scenario"
    dt: float = 0.1
    max_sim_time: float = 60.0
    seed: int = 0
    passerby_offset: float = 0.5
    agents: Tuple[AgentSpec, ...] = ()
    noise: NoiseParams = field(default_factory=NoiseParams)
    control: ControlParams = field(default_factory=ControlParams)
    hfov_deg: float = 60.0

    @property
    def camera(self) -> CameraModel:
        return CameraModel(hfov=math.radians(self.hfov_deg))

    @property
    def max_ticks(self) -> int:
        return int(round(self.max_sim_time / self.dt))

    @property
    def user_id(self) -> Optional[int]:
        for a in self.agents:
            if a.role == "user":
                return a.agent_id
        return None

    def initial_world(self) -> WorldState:
        return initial_world([a.to_agent() for a in self.agents], self.dt)

    def to_dict(self) -> Dict[str, Any]:
        agents = []
        for a in self.agents:
            entry = {
                "id": a.agent_id,
                "role": a.role,
                "width_m": a.width_m,
                "height_m": a.height_m,
                "waypoints": [list(w) for w in a.waypoints],
            }
            if a.hand_raised is not None:
                entry["hand_raised"] = list(a.hand_raised)
            agents.append(entry)
        return {
            "scenario": {
                "id": self.scenario_id,
                "dt": self.dt,
                "max_sim_time": self.max_sim_time,
                "activation_distance": self.activation_distance,
                "seed": self.seed,
                "passerby_offset": self.passerby_offset,
            },
            "agents": agents,
            "noise": asdict(self.noise),
            "control": asdict(self.control),
            "camera": {"hfov_deg": self.hfov_deg},
        }


_SCENARIO_KEYS = {"id", "dt", "max_sim_time", "activation_distance", "seed", "passerby_offset"}
_AGENT_KEYS = {"id", "role", "width_m", "height_m", "hand_raised", "waypoints"}
_TOP_KEYS = {"scenario", "agents", "noise", "control", "camera"}


def _check_keys(obj: Any, allowed: set, where: str) -> Dict[str, Any]:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {', '.join(unknown)}")
    return obj


def _number(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _params(cls, raw: Any, where: str):
    names = {f.name: f for f in fields(cls)}
    raw = _check_keys(raw, set(names), where)
    kwargs = {}
    for k, v in raw.items():
        if names[k].type in ("int", int):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ScenarioError(f"{where}.{k}: expected an integer, got {v!r}")
            kwargs[k] = v
        else:
            kwargs[k] = _number(v, f"{where}.{k}")
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise ScenarioError(f"{where}: {e}") from None


def _agent(raw: Any, i: int) -> AgentSpec:
    where = f"agents[{i}]"
    raw = _check_keys(raw, _AGENT_KEYS, where)
    for k in ("id", "role", "waypoints"):
        if k not in raw:
            raise ScenarioError(f"{where}: missing required key {k}")
    aid = raw["id"]
    if isinstance(aid, bool) or not isinstance(aid, int):
        raise ScenarioError(f"{where}.id: expected an integer")
    if raw["role"] not in ROLES:
        raise ScenarioError(f"{where}.role: must be one of {', '.join(ROLES)}")
    wps_raw = raw["waypoints"]
    if not isinstance(wps_raw, list) or not wps_raw:
        raise ScenarioError(f"{where}.waypoints: expected a non-empty list of [t, x, y]")
    wps = []
    for j, w in enumerate(wps_raw):
        if not isinstance(w, list) or len(w) != 3:
            raise ScenarioError(f"{where}.waypoints[{j}]: expected [t, x, y]")
        wps.append(tuple(_number(v, f"{where}.waypoints[{j}]") for v in w))
    for j in range(1, len(wps)):
        if not wps[j][0] > wps[j - 1][0]:
            raise ScenarioError(
                f"{where}.waypoints[{j}]: waypoint times must be strictly increasing (monotonicity violated)"
            )
    hand = raw.get("hand_raised")
    if hand is not None:
        if not isinstance(hand, list) or len(hand) != 2:
            raise ScenarioError(f"{where}.hand_raised: expected [start, end]")
        hand = (_number(hand[0], f"{where}.hand_raised"), _number(hand[1], f"{where}.hand_raised"))
        if not hand[0] < hand[1]:
            raise ScenarioError(f"{where}.hand_raised: start must be < end")
    width = _number(raw.get("width_m", 0.5), f"{where}.width_m")
    height = _number(raw.get("height_m", 1.7), f"{where}.height_m")
    if width <= 0 or height <= 0:
        raise ScenarioError(f"{where}: width_m and height_m must be positive")
    return AgentSpec(aid, raw["role"], tuple(wps), width, height, hand)


def scenario_from_dict(doc: Any) -> Scenario:
    doc = _check_keys(doc, _TOP_KEYS, "document")
    if "scenario" not in doc:
        raise ScenarioError("document: missing required key scenario")
    sc = _check_keys(doc["scenario"], _SCENARIO_KEYS, "scenario")
    if "activation_distance" not in sc:
        raise ScenarioError("scenario: missing required key activation_distance")
    dist = _number(sc["activation_distance"], "scenario.activation_distance")
    if dist not in ACTIVATION_DISTANCES:
        raise ScenarioError("scenario.activation_distance: activation_distance not in {1.5,2.5,3.5}")
    dt = _number(sc.get("dt", 0.1), "scenario.dt")
    if dt <= 0:
        raise ScenarioError("scenario.dt: must be > 0")
    max_t = _number(sc.get("max_sim_time", 60.0), "scenario.max_sim_time")
    if max_t < ACTIVATION_WINDOW_S:
        raise ScenarioError(f"scenario.max_sim_time: must be >= {ACTIVATION_WINDOW_S} s activation window")
    seed = sc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("scenario.seed: expected an integer")
    offset = _number(sc.get("passerby_offset", 0.5), "scenario.passerby_offset")
    sid = sc.get("id", f"d{dist}")
    if not isinstance(sid, str):
        raise ScenarioError("scenario.id: expected a string")

    agents_raw = doc.get("agents", [])
    if not isinstance(agents_raw, list):
        raise ScenarioError("agents: expected a list")
    agents = tuple(_agent(a, i) for i, a in enumerate(agents_raw))
    ids = [a.agent_id for a in agents]
    if len(set(ids)) != len(ids):
        raise ScenarioError("agents: duplicate agent id")
    if sum(a.role == "user" for a in agents) > 1:
        raise ScenarioError("agents: at most one agent may have role user")

    camera = _check_keys(doc.get("camera", {}), {"hfov_deg"}, "camera")
    hfov = _number(camera.get("hfov_deg", 60.0), "camera.hfov_deg")
    if not 0 < hfov < 180:
        raise ScenarioError("camera.hfov_deg: must lie in (0, 180)")

    return Scenario(
        activation_distance=dist,
        scenario_id=sid,
        dt=dt,
        max_sim_time=max_t,
        seed=seed,
        passerby_offset=offset,
        agents=agents,
        noise=_params(NoiseParams, doc.get("noise", {}), "noise"),
        control=_params(ControlParams, doc.get("control", {}), "control"),
        hfov_deg=hfov,
    )


def load_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"line {e.lineno} column {e.colno}: {e.msg}") from None
    return scenario_from_dict(doc)


def load_scenario_file(path: Union[str, Path]) -> Scenario:
    return load_scenario(Path(path).read_text(encoding="utf-8"))


PASSERBY_SPEED = 1.0
USER_ID = 1
PASSERBY_ID = 2


def crossing_waypoints(
    x: float, cross_time: float, speed: float = PASSERBY_SPEED, half_span: float = 3.0
) -> Tuple[Tuple[float, float, float], ...]:
    """Walk along the line ``x = const`` from +y to -y, passing y = 0 at ``cross_time``."""
    t0 = cross_time - half_span / speed
    t1 = cross_time + half_span / speed
    pts = [(t0, x, half_span), (t1, x, -half_span)]
    if t0 > 0.0:
        pts.insert(0, (0.0, x, half_span))
    return tuple(pts)


def default_scenario(
    distance: float,
    *,
    with_passerby: bool = True,
    hand_raised: Optional[Tuple[float, float]] = (1.0, 4.0),
    cross_time: Optional[float] = None,
    noise: Optional[NoiseParams] = None,
    seed: int = 0,
    scenario_id: Optional[str] = None,
) -> Scenario:
    """Lab trial layout: robot at the origin facing +x, user straight ahead at
    ``distance``, one passer-by crossing the line of sight 0.5 m in front of
    the user."""
    if distance not in ACTIVATION_DISTANCES:
        raise ScenarioError("activation_distance not in {1.5,2.5,3.5}")
    agents = [AgentSpec(USER_ID, "user", ((0.0, distance, 0.0),), hand_raised=hand_raised)]
    offset = 0.5
    if with_passerby:
        t = DEFAULT_CROSS_TIME[distance] if cross_time is None else cross_time
        agents.append(AgentSpec(PASSERBY_ID, "passerby", crossing_waypoints(distance - offset, t)))
    return Scenario(
        activation_distance=distance,
        scenario_id=scenario_id or f"lab_d{distance}",
        seed=seed,
        passerby_offset=offset,
        agents=tuple(agents),
        noise=noise or NoiseParams(),
    )


DEFAULT_CROSS_TIME = {1.5: 2.0, 2.5: 4.0, 3.5: 6.0}


def crossing_fixture() -> Scenario:
    """Noise-free 1.5 m trial where the passer-by fully hides the user for
    three frames while the robot approaches."""
    from .perception import ZERO_NOISE

    return default_scenario(1.5, noise=ZERO_NOISE, scenario_id="crossing_fixture")


def no_activation_scenario(distance: float = 2.5) -> Scenario:
    """Nobody ever raises a hand; the trial must time out."""
    return default_scenario(distance, with_passerby=False, hand_raised=None, scenario_id=f"no_activation_d{distance}")


def packaged_scenario_path(name: str) -> Path:
    return Path(__file__).with_name("scenarios") / f"{name}.json"


def write_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8")
