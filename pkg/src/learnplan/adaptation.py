"""Monitor-analyze-plan-execute loop driving the simulated robot.

Three modes share one controller: ``NONE`` runs a fixed plan, ``REACTIVE``
diverts to the nearest charger when the battery falls below a threshold, and
``QUANTITATIVE`` re-synthesizes plans with learned power models whenever an
analyzer reports a problem.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from learnplan.planner.environment import EnvironmentMap, hop_route
from learnplan.planner.problem import (
    DEFAULT_CHARGE_RATE,
    Charge,
    ConfigCatalog,
    Instruction,
    MoveTo,
    PlanningProblem,
    SetConfig,
    move_cost,
    plan_totals,
)
from learnplan.planner.synthesis import NoFeasiblePlan, SynthesisTimeout, synthesize
from learnplan.simulator import MonitorRecord, Trace, WorldState, monitor_record

log = logging.getLogger(__name__)

REACTIVE_FRACTION = 0.2
DEFAULT_LEG_RECONFIGS = 2


class Mode(str, enum.Enum):
    NONE = "none"
    REACTIVE = "reactive"
    QUANTITATIVE = "quantitative"


NOMINAL = "Nominal"
OFF_TRACK = "MissionOffTrack"
ENERGY_LOW = "EnergyInsufficient"


@dataclass(frozen=True)
class Finding:
    kind: str
    detail: str = ""

    @property
    def nominal(self) -> bool:
        return self.kind == NOMINAL


@dataclass
class PlanCursor:
    """Installed instructions plus where the robot should be given what was handed out."""

    instructions: list
    position: int = 0
    expected_location: Optional[str] = None
    expected_arc: Optional[tuple[str, str]] = None

    def remaining(self) -> list:
        return self.instructions[self.position:]

    def advance(self, location: str) -> Optional[Instruction]:
        if self.position >= len(self.instructions):
            return None
        ins = self.instructions[self.position]
        self.position += 1
        if isinstance(ins, MoveTo):
            self.expected_arc = (location, ins.location)
            self.expected_location = ins.location
        else:
            self.expected_arc = None
            self.expected_location = location
        return ins


def mission_analyzer(record: MonitorRecord, cursor: PlanCursor) -> Finding:
    if record.last_status == "obstacle":
        return Finding(OFF_TRACK, "obstacle")
    if record.last_status == "rejected":
        return Finding(OFF_TRACK, "instruction rejected")
    if cursor.expected_location is not None:
        if record.arc is not None:
            if cursor.expected_arc is not None and tuple(record.arc) != cursor.expected_arc:
                return Finding(OFF_TRACK, "unplanned arc")
        elif record.location != cursor.expected_location:
            return Finding(OFF_TRACK, "unplanned location")
    return Finding(NOMINAL)


def energy_predictor(
    record: MonitorRecord,
    cursor: PlanCursor,
    learned: ConfigCatalog,
    env: EnvironmentMap,
    min_battery: float = 0.0,
) -> Finding:
    """Replay the rest of the plan with learned models up to the next Charge."""
    battery = record.battery
    loc = record.location
    cfg = record.config_id
    if cfg not in learned:
        return Finding(ENERGY_LOW, "no model for current configuration")
    if record.arc is not None:
        arc = env.arc(*record.arc)
        entry = learned.get(cfg)
        _, energy = move_cost(max(arc.distance - record.progress, 0.0), entry)
        battery -= energy
        loc = arc.target
    if battery < min_battery:
        return Finding(ENERGY_LOW, "current move")
    for ins in cursor.remaining():
        if isinstance(ins, Charge):
            return Finding(NOMINAL) if env.location(loc).charger else Finding(ENERGY_LOW, "charger unreachable")
        if isinstance(ins, SetConfig):
            cfg = ins.config_id
            if cfg not in learned:
                return Finding(ENERGY_LOW, "no model for planned configuration")
            continue
        arc = env.arc(loc, ins.location)
        if arc is None:
            break  # off-track plans are the mission analyzer's concern
        battery -= move_cost(arc, learned.get(cfg))[1]
        loc = ins.location
        if battery < min_battery:
            return Finding(ENERGY_LOW, "remaining plan")
    return Finding(NOMINAL)


# -- plan construction --------------------------------------------------------------------


def hop_plan(env: EnvironmentMap, start: str, tasks: Sequence[str]) -> list[Instruction]:
    """Fewest-hop routes through the tasks, ignoring obstacles and energy."""
    out, here = [], start
    for task in tasks:
        route = hop_route(env, here, task)
        if route is None:
            break
        out.extend(MoveTo(n) for n in route[1:])
        here = task
    return out


@dataclass
class Snapshot:
    location: str
    heading: int
    battery: float
    config_id: str
    max_battery: float


@dataclass
class MissionPlan:
    instructions: list
    legs: int
    predicted_time: float
    final_battery: float


def plan_mission(
    env: EnvironmentMap,
    snap: Snapshot,
    tasks: Sequence[str],
    catalog: ConfigCatalog,
    min_battery: float = 0.0,
    max_reconfigs: int = DEFAULT_LEG_RECONFIGS,
    charge_rate: float = DEFAULT_CHARGE_RATE,
    time_limit: Optional[float] = None,
) -> MissionPlan:
    """Plan legs one task at a time, each seeded by the predicted end of the previous one.

    Stops at the first leg with no feasible plan; the returned plan covers the
    legs before it.
    """
    loc, heading, battery, cfg = snap.location, snap.heading, snap.battery, snap.config_id
    out: list = []
    total = 0.0
    legs = 0
    for task in tasks:
        if task == loc:
            legs += 1
            continue
        if battery <= min_battery:
            break
        problem = PlanningProblem(
            env, catalog, loc, task, cfg, min(battery, snap.max_battery), snap.max_battery,
            min_battery, heading, max_reconfigs, charge_rate,
        )
        try:
            plan = synthesize(problem, time_limit=time_limit)
        except NoFeasiblePlan:
            break
        totals = plan_totals(plan, problem)
        out.extend(plan.instructions)
        total += plan.predicted_time
        legs += 1
        for ins in plan.instructions:
            if isinstance(ins, SetConfig):
                cfg = ins.config_id
            elif isinstance(ins, MoveTo):
                heading = env.arc(loc, ins.location).heading
                loc = ins.location
        battery = float(totals.battery_trace[-1])
    return MissionPlan(out, legs, total, battery)


def nearest_charger(env: EnvironmentMap, start: str) -> Optional[list[str]]:
    best = None
    for name in env.chargers:
        route = hop_route(env, start, name)
        if route is None:
            continue
        dist = sum(env.arc(a, b).distance for a, b in zip(route, route[1:]))
        key = (len(route), dist, name)
        if best is None or key < best[0]:
            best = (key, route)
    return None if best is None else best[1]


def reactive_divert(env: EnvironmentMap, start: str, tasks: Sequence[str], max_battery: float) -> Optional[list]:
    """Go to the nearest charger by hops, charge to full, then resume the tasks."""
    route = nearest_charger(env, start)
    if route is None:
        return None
    plan: list = [MoveTo(n) for n in route[1:]]
    plan.append(Charge(max_battery))
    plan.extend(hop_plan(env, route[-1], tasks))
    return plan


# -- controller -----------------------------------------------------------------------------


@dataclass
class AdaptationStats:
    findings: int = 0
    installs: int = 0
    rejected: int = 0


class Controller:
    """Instruction source and probe hook for one run."""

    def __init__(
        self,
        mode: Mode,
        env: EnvironmentMap,
        plan: Sequence[Instruction],
        max_battery: float,
        learned: Optional[ConfigCatalog] = None,
        reactive_threshold: Optional[float] = None,
        min_battery: float = 0.0,
        max_reconfigs: int = DEFAULT_LEG_RECONFIGS,
        charge_rate: float = DEFAULT_CHARGE_RATE,
        time_limit: Optional[float] = None,
    ):
        self.mode = Mode(mode)
        if self.mode is Mode.QUANTITATIVE and learned is None:
            raise ValueError("quantitative adaptation needs learned models")
        self.env = env
        self.cursor = PlanCursor(list(plan))
        self.max_battery = max_battery
        self.learned = learned
        self.threshold = REACTIVE_FRACTION * max_battery if reactive_threshold is None else reactive_threshold
        if not self.threshold < max_battery:
            raise ValueError("reactive threshold must be below max battery")
        self.min_battery = min_battery
        self.max_reconfigs = max_reconfigs
        self.charge_rate = charge_rate
        self.time_limit = time_limit
        self.stats = AdaptationStats()
        self.trace: Optional[Trace] = None
        self._last_finding: Optional[Finding] = None
        self._diverting = False

    def bind(self, trace: Trace) -> None:
        self.trace = trace

    def _log(self, t, kind, **detail):
        if self.trace is not None:
            self.trace.log(t, kind, **detail)

    # instruction source
    def next_instruction(self, world: WorldState) -> Optional[Instruction]:
        if self.mode is Mode.QUANTITATIVE and world.status != "ok":
            # a failed instruction is an event; analyze before handing out the next one
            self._quantitative(world, monitor_record(world))
        if self.mode is Mode.NONE and world.status != "ok":
            # a fixed plan cannot recover from a failed move
            self._log(world.sim_time, "plan_failed", status=world.status)
            return None
        ins = self.cursor.advance(world.location)
        if isinstance(ins, Charge):
            self._diverting = False
        return ins

    # probe hook
    def __call__(self, world: WorldState, record: MonitorRecord, trace: Trace) -> None:
        if self.trace is None:
            self.trace = trace
        if self.mode is Mode.NONE:
            return
        if self.mode is Mode.REACTIVE:
            self._reactive(world, record)
        else:
            self._quantitative(world, record)

    def _install(self, world: WorldState, plan: list, reason: str, **detail) -> None:
        self.cursor = PlanCursor(list(plan))
        if world.arc is not None:
            # the current move finishes first; the new plan starts at its end
            self.cursor.expected_arc = tuple(world.arc)
            self.cursor.expected_location = world.arc[1]
        self.stats.installs += 1
        self._log(world.sim_time, "plan_installed", reason=reason, length=len(plan), **detail)

    def _reactive(self, world: WorldState, record: MonitorRecord) -> None:
        if self._diverting or record.battery >= self.threshold:
            return
        start = world.arc[1] if world.arc is not None else world.location
        self.stats.findings += 1
        self._log(world.sim_time, "finding", finding="BatteryBelowThreshold", battery=record.battery)
        plan = reactive_divert(self.env, start, world.tasks_remaining, self.max_battery)
        if plan is None:
            self._log(world.sim_time, "plan_rejected", reason="no reachable charger")
            self._diverting = True
            return
        self._diverting = True
        self._install(world, plan, "battery threshold")

    def analyze(self, record: MonitorRecord) -> list[Finding]:
        out = [mission_analyzer(record, self.cursor)]
        out.append(energy_predictor(record, self.cursor, self.learned, self.env, self.min_battery))
        return out

    def _quantitative(self, world: WorldState, record: MonitorRecord) -> None:
        if not record.tasks_remaining:
            return
        findings = [f for f in self.analyze(record) if not f.nominal]
        if not findings:
            self._last_finding = None
            return
        finding = findings[0]
        if finding == self._last_finding:
            return  # debounce consecutive identical findings
        self._last_finding = finding
        self.stats.findings += 1
        self._log(world.sim_time, "finding", finding=finding.kind, detail=finding.detail)
        self.adapt(world, record)

    def adapt(self, world: WorldState, record: MonitorRecord) -> None:
        if world.arc is not None:
            origin, target = world.arc
            arc = self.env.arc(origin, target)
            entry = self.learned.get(world.config_id) if world.config_id in self.learned else None
            rest = 0.0 if entry is None else move_cost(max(arc.distance - world.progress, 0.0), entry)[1]
            snap = Snapshot(target, arc.heading, world.battery - rest, world.config_id, self.max_battery)
            tasks = list(world.tasks_remaining)
            if tasks and tasks[0] == target:
                tasks = tasks[1:]
        else:
            snap = Snapshot(world.location, world.heading, world.battery, world.config_id, self.max_battery)
            tasks = list(world.tasks_remaining)
        env = world.current_map()
        try:
            mission = plan_mission(
                env, snap, tasks, self.learned, self.min_battery, self.max_reconfigs,
                self.charge_rate, self.time_limit,
            )
        except (SynthesisTimeout, ValueError) as exc:
            self.stats.rejected += 1
            self._log(world.sim_time, "plan_rejected", reason=f"{type(exc).__name__}: {exc}")
            return
        if mission.legs == 0:
            # nothing reachable under the learned models; keep executing the current plan
            self.stats.rejected += 1
            self._log(world.sim_time, "plan_rejected", reason="no feasible plan")
            return
        self._install(
            world, mission.instructions, "replan", legs=mission.legs, predicted_time=mission.predicted_time,
        )
