"""Deterministic discrete-event execution of plans against ground-truth power models.

The clock advances from event to event: activity completions, scheduled
perturbations, battery exhaustion and 1 s probe ticks. Between events the
battery changes linearly, so every quantity in the trace is exact up to
floating-point rounding.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Protocol, Sequence, Union

import numpy as np

from learnplan.config_model import Configuration, GroundTruthModelPair
from learnplan.planner.environment import EnvironmentMap, arc_key, rotation_time
from learnplan.planner.problem import DEFAULT_CHARGE_RATE, Charge, Instruction, MoveTo, SetConfig

log = logging.getLogger(__name__)

IDLE_FRACTION = 0.01
TICK = 1.0
DEFAULT_MAX_TIME = 36_000.0
_EPS = 1e-9


# -- ground truth access ----------------------------------------------------------


class BudgetExhausted(RuntimeError):
    pass


@dataclass
class QueryBudget:
    limit: int
    used: int = 0

    def __post_init__(self):
        if self.limit < 0:
            raise ValueError("budget limit must be non-negative")

    @property
    def remaining(self) -> int:
        return self.limit - self.used

    def charge(self) -> None:
        if self.used >= self.limit:
            raise BudgetExhausted(f"query budget of {self.limit} exhausted")
        self.used += 1


def query_true_power(
    config: Configuration,
    budget: QueryBudget,
    truth: GroundTruthModelPair,
    noise_sd: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, float]:
    """One metered ground-truth measurement: (discharge mWh/s, speed m/s)."""
    budget.charge()
    discharge = truth.discharge.evaluate(config)
    speed = truth.speed.evaluate(config)
    if noise_sd > 0:
        if rng is None:
            raise ValueError("noisy queries need an explicit generator")
        discharge *= 1.0 + noise_sd * rng.standard_normal()
        speed *= 1.0 + noise_sd * rng.standard_normal()
    return discharge, speed


class TruePower:
    """Maps catalog config ids to ground-truth (discharge, speed); unmetered."""

    def __init__(self, truth: GroundTruthModelPair, configs: dict[str, Configuration]):
        self.truth = truth
        self.configs = dict(configs)
        self._cache: dict[str, tuple[float, float]] = {}

    def __contains__(self, config_id: str) -> bool:
        return config_id in self.configs

    def __call__(self, config_id: str) -> tuple[float, float]:
        if config_id not in self._cache:
            cfg = self.configs[config_id]
            self._cache[config_id] = (self.truth.discharge.evaluate(cfg), self.truth.speed.evaluate(cfg))
        return self._cache[config_id]


class TablePower:
    """Fixed (discharge, speed) per config id, for hand-built worlds."""

    def __init__(self, table: dict[str, tuple[float, float]]):
        self.table = dict(table)

    def __contains__(self, config_id: str) -> bool:
        return config_id in self.table

    def __call__(self, config_id: str) -> tuple[float, float]:
        return self.table[config_id]


# -- perturbations ------------------------------------------------------------------


@dataclass(frozen=True)
class PlaceObstacle:
    arc: tuple[str, str]


@dataclass(frozen=True)
class SetBattery:
    level: float


@dataclass(frozen=True)
class Perturbation:
    t: float
    event: Union[PlaceObstacle, SetBattery]

    def to_json(self) -> dict:
        if isinstance(self.event, PlaceObstacle):
            return {"t": self.t, "kind": "obstacle", "arc": list(self.event.arc)}
        return {"t": self.t, "kind": "set_battery", "level": self.event.level}

    @classmethod
    def from_json(cls, doc: dict) -> "Perturbation":
        if doc["kind"] == "obstacle":
            a, b = doc["arc"]
            return cls(float(doc["t"]), PlaceObstacle((str(a), str(b))))
        if doc["kind"] == "set_battery":
            return cls(float(doc["t"]), SetBattery(float(doc["level"])))
        raise ValueError(f"unknown perturbation kind {doc['kind']!r}")


@dataclass(frozen=True)
class PerturbationSchedule:
    events: tuple[Perturbation, ...] = ()

    def __post_init__(self):
        times = [p.t for p in self.events]
        if any(t < 0 for t in times):
            raise ValueError("perturbation times must be non-negative")
        if times != sorted(times):
            raise ValueError("perturbations must be sorted by time")

    def validate_against(self, env: EnvironmentMap) -> None:
        for p in self.events:
            if isinstance(p.event, PlaceObstacle):
                a, b = p.event.arc
                if env.arc(a, b) is None:
                    raise ValueError(f"obstacle on unknown arc {a}-{b}")

    def to_json(self) -> list:
        return [p.to_json() for p in self.events]

    @classmethod
    def from_json(cls, doc: list) -> "PerturbationSchedule":
        return cls(tuple(Perturbation.from_json(d) for d in doc))


# -- world state ----------------------------------------------------------------------


@dataclass
class WorldState:
    env: EnvironmentMap
    location: str
    heading: int
    battery: float
    max_battery: float
    config_id: str
    tasks: list[str]
    charge_rate: float = DEFAULT_CHARGE_RATE
    sim_time: float = 0.0
    blocked: set = field(default_factory=set)
    arc: Optional[tuple[str, str]] = None
    progress: float = 0.0
    next_task: int = 0
    status: str = "ok"

    def __post_init__(self):
        if not 0 <= self.battery <= self.max_battery:
            raise ValueError("battery must lie in [0, max_battery]")
        if not self.env.has_location(self.location):
            raise ValueError(f"unknown start location {self.location!r}")
        self.blocked = set(self.blocked) | set(self.env.blocked)

    @property
    def tasks_remaining(self) -> list[str]:
        return self.tasks[self.next_task:]

    def current_map(self) -> EnvironmentMap:
        """The static map with every obstacle placed so far."""
        return self.env.without_blocked().with_blocked(self.blocked)


def apply_perturbation(state: WorldState, event: Union[PlaceObstacle, SetBattery]) -> WorldState:
    if isinstance(event, PlaceObstacle):
        state.blocked.add(arc_key(*event.arc))
    elif isinstance(event, SetBattery):
        state.battery = min(max(float(event.level), 0.0), state.max_battery)
    else:
        raise TypeError(f"unknown perturbation {event!r}")
    return state


@dataclass(frozen=True)
class MonitorRecord:
    sim_time: float
    location: str
    arc: Optional[tuple[str, str]]
    progress: float
    battery: float
    config_id: str
    last_status: str
    tasks_remaining: tuple[str, ...]


def monitor_record(world: WorldState) -> MonitorRecord:
    return MonitorRecord(
        world.sim_time, world.location, world.arc, world.progress, world.battery,
        world.config_id, world.status, tuple(world.tasks_remaining),
    )


class InstructionSource(Protocol):
    def next_instruction(self, world: WorldState) -> Optional[Instruction]: ...


class PlanSource:
    """Feeds a fixed instruction list; stops when exhausted or after a failed instruction."""

    def __init__(self, instructions: Iterable[Instruction]):
        self.queue = list(instructions)

    def next_instruction(self, world):
        if world.status != "ok" or not self.queue:
            return None
        return self.queue.pop(0)


# -- trace --------------------------------------------------------------------------------


@dataclass
class Trace:
    events: list[dict] = field(default_factory=list)
    status: str = "running"
    tasks: tuple[str, ...] = ()
    drained: float = 0.0
    charged: float = 0.0
    set_delta: float = 0.0
    initial_battery: float = 0.0
    final_battery: float = 0.0

    def log(self, t: float, kind: str, **detail) -> None:
        if self.events and t < self.events[-1]["t"]:
            raise RuntimeError("trace time went backwards")
        self.events.append({"t": t, "kind": kind, **detail})

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["kind"] == kind]

    @property
    def score(self) -> float:
        return mission_score(self, self.tasks)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


def read_trace(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def mission_score(trace: Union[Trace, Sequence[dict]], mission: Sequence[str]) -> float:
    """Fraction of tasks hit, where a hit is entering a task's location while it is next pending."""
    if not mission:
        return 1.0
    events = trace.events if isinstance(trace, Trace) else trace
    pending = 0
    for e in events:
        if e["kind"] == "arrive" and pending < len(mission) and e["location"] == mission[pending]:
            pending += 1
    return pending / len(mission)


# -- event loop ------------------------------------------------------------------------------


class _Activity:
    """A linear-battery interval: rotation, traversal or charging."""

    def __init__(self, kind, end, rate, arc=None, target_heading=None, then=None, level=None):
        self.kind = kind
        self.end = end
        self.rate = rate  # battery change per second (negative when draining)
        self.arc = arc
        self.target_heading = target_heading
        self.then = then  # follow-up activity factory after rotation
        self.level = level
        self.start = None
        self.distance = 0.0


Hook = Callable[[WorldState, MonitorRecord, Trace], None]


def run(
    world: WorldState,
    source: InstructionSource,
    schedule: PerturbationSchedule = PerturbationSchedule(),
    hooks: Sequence[Hook] = (),
    power: Optional[Callable[[str], tuple[float, float]]] = None,
    max_time: float = DEFAULT_MAX_TIME,
    idle_fraction: float = IDLE_FRACTION,
) -> Trace:
    """Execute instructions from ``source`` until the mission ends.

    ``power`` maps a config id to its ground-truth (discharge, speed).
    """
    if power is None:
        raise ValueError("a ground-truth power function is required")
    schedule.validate_against(world.env)
    trace = Trace(tasks=tuple(world.tasks), initial_battery=world.battery)
    if hasattr(source, "bind"):
        source.bind(trace)
    pending = list(schedule.events)
    state = {"activity": None, "done": False, "last_record": -1.0}
    trace.log(world.sim_time, "start", location=world.location, battery=world.battery, config=world.config_id)

    def finish(status):
        state["done"] = True
        trace.status = status

    def check_tasks():
        if world.next_task < len(world.tasks) and world.location == world.tasks[world.next_task]:
            trace.log(world.sim_time, "task_reached", location=world.location, index=world.next_task)
            world.next_task += 1

    def mission_complete():
        return world.next_task >= len(world.tasks)

    def begin_next():
        """Pull instructions until one starts a timed activity or the run ends."""
        while not state["done"]:
            if mission_complete():
                finish("mission_complete")
                return
            if world.battery <= _EPS:
                set_level(0.0)
                trace.log(world.sim_time, "shutdown", reason="battery_depleted")
                finish("battery_depleted")
                return
            # probes also report at every decision point so controllers see fresh status
            fire_hooks()
            if state["done"]:
                return
            ins = source.next_instruction(world)
            if ins is None:
                trace.log(world.sim_time, "source_done")
                finish("source_done")
                return
            act = start_instruction(ins)
            if act is not None:
                act.start = world.sim_time
                state["activity"] = act
                return

    def start_instruction(ins):
        if isinstance(ins, SetConfig):
            if power is not None and hasattr(power, "__contains__") and ins.config_id not in power:
                reject(ins, "unknown configuration")
                return None
            world.config_id = ins.config_id
            world.status = "ok"
            trace.log(world.sim_time, "config", config=ins.config_id)
            return None
        if isinstance(ins, Charge):
            if not world.env.location(world.location).charger:
                reject(ins, "no charger here")
                return None
            level = min(float(ins.to_level), world.max_battery)
            if level <= world.battery:
                world.status = "ok"
                return None
            duration = (level - world.battery) / world.charge_rate
            trace.log(world.sim_time, "charge_start", battery=world.battery, to=level)
            return _Activity("charge", world.sim_time + duration, world.charge_rate, level=level)
        if isinstance(ins, MoveTo):
            arc = world.env.arc(world.location, ins.location)
            if arc is None:
                reject(ins, f"{world.location} is not adjacent to {ins.location}")
                return None
            if arc.key in world.blocked:
                detected(arc, aborted=False)
                return None
            discharge, speed = power(world.config_id)
            rot = rotation_time(world.heading, arc.heading)
            trace.log(world.sim_time, "depart", origin=arc.source, to=arc.target, config=world.config_id)
            world.arc = (arc.source, arc.target)
            world.progress = 0.0
            travel = _Activity("traverse", None, -discharge, arc=arc)
            travel.distance = arc.distance
            travel.speed = speed
            if rot > 0:
                return _Activity(
                    "rotate", world.sim_time + rot, -idle_fraction * discharge, arc=arc,
                    target_heading=arc.heading, then=travel,
                )
            world.heading = arc.heading
            travel.end = world.sim_time + arc.distance / speed
            return travel
        raise TypeError(f"unknown instruction {ins!r}")

    def reject(ins, reason):
        world.status = "rejected"
        trace.log(world.sim_time, "instruction_rejected", instruction=ins.to_json(), reason=reason)

    def detected(arc, aborted: bool):
        world.status = "obstacle"
        trace.log(world.sim_time, "obstacle_detected", arc=[arc.source, arc.target], aborted=aborted)
        world.arc = None
        world.progress = 0.0
        world.location = arc.source

    def set_level(level):
        """Move the battery to ``level`` (clamped), booking the change as drain or charge."""
        level = min(max(level, 0.0), world.max_battery)
        delta = level - world.battery
        if delta < 0:
            trace.drained -= delta
        else:
            trace.charged += delta
        world.battery = level

    def advance(t_next):
        act = state["activity"]
        dt = t_next - world.sim_time
        if act is not None and dt > 0:
            set_level(world.battery + act.rate * dt)
            if act.kind == "traverse":
                world.progress = min(act.distance, world.progress + act.speed * dt)
        world.sim_time = t_next

    def complete_activity():
        act = state["activity"]
        state["activity"] = None
        if act.kind == "rotate":
            world.heading = act.target_heading
            nxt = act.then
            nxt.end = world.sim_time + nxt.distance / nxt.speed
            nxt.start = world.sim_time
            state["activity"] = nxt
            return
        if act.kind == "traverse":
            world.location = act.arc.target
            world.arc = None
            world.progress = 0.0
            world.status = "ok"
            trace.log(world.sim_time, "arrive", location=world.location, battery=world.battery)
            check_tasks()
        elif act.kind == "charge":
            set_level(act.level)
            world.status = "ok"
            trace.log(world.sim_time, "charge_end", battery=world.battery)
        begin_next()

    def fire_hooks():
        if world.sim_time <= state["last_record"]:
            return
        state["last_record"] = world.sim_time
        rec = monitor_record(world)
        for hook in hooks:
            hook(world, rec, trace)

    check_tasks()
    begin_next()
    next_tick = math.floor(world.sim_time / TICK) * TICK + TICK
    while not state["done"]:
        act = state["activity"]
        candidates = [next_tick, max_time]
        if act is not None:
            candidates.append(act.end)
            if act.rate < 0 and world.battery > 0:
                candidates.append(world.sim_time + world.battery / -act.rate)
        if pending:
            candidates.append(max(pending[0].t, world.sim_time))
        t_next = min(candidates)
        advance(t_next)
        # order at equal times: completion, perturbation, exhaustion, tick
        if act is not None and act.end <= world.sim_time + _EPS:
            complete_activity()
        fired = False
        while pending and pending[0].t <= world.sim_time + _EPS and not state["done"]:
            fired = True
            apply_scheduled(pending.pop(0).event, world, trace, state)
        if state["done"]:
            break
        act = state["activity"]
        if act is not None and act.rate < 0 and world.battery <= _EPS:
            set_level(0.0)
            trace.log(world.sim_time, "shutdown", reason="battery_depleted")
            finish("battery_depleted")
            break
        if fired:
            handle_perturbation_effects(world, trace, state, detected)
            if state["activity"] is None and not state["done"]:
                begin_next()
            fire_hooks()
        if world.sim_time >= next_tick - _EPS:
            fire_hooks()
            next_tick += TICK
        if world.sim_time >= max_time and not state["done"]:
            trace.log(world.sim_time, "timeout")
            finish("timeout")
        if state["activity"] is None and not state["done"]:
            begin_next()
    trace.final_battery = world.battery
    trace.log(world.sim_time, "end", status=trace.status, score=mission_score(trace, world.tasks), battery=world.battery)
    return trace


def apply_scheduled(event, world: WorldState, trace: Trace, state: dict) -> None:
    if isinstance(event, PlaceObstacle):
        key = arc_key(*event.arc)
        new = key not in world.blocked
        apply_perturbation(world, event)
        trace.log(world.sim_time, "obstacle_placed", arc=list(key), new=new)
    else:
        before = world.battery
        apply_perturbation(world, event)
        trace.set_delta += world.battery - before
        trace.log(world.sim_time, "battery_set", level=event.level, battery=world.battery)
        act = state["activity"]
        if world.battery <= _EPS and (act is None or act.rate < 0):
            trace.set_delta -= world.battery
            world.battery = 0.0
            trace.log(world.sim_time, "shutdown", reason="battery_depleted")
            state["done"] = True
            trace.status = "battery_depleted"


def handle_perturbation_effects(world: WorldState, trace: Trace, state: dict, detected) -> None:
    act = state["activity"]
    if act is None or act.kind not in ("rotate", "traverse"):
        return
    if act.arc.key in world.blocked:
        state["activity"] = None
        detected(act.arc, aborted=True)
