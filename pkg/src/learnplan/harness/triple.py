"""Test triples: Baseline A, Baseline B and Challenge runs of one seeded scenario."""

from __future__ import annotations

import functools
import json
import logging
import math
import time
import traceback
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from learnplan.adaptation import Controller, Mode, Snapshot, hop_plan, plan_mission
from learnplan.config_model import GroundTruthModelPair, generate_model_suite
from learnplan.harness.learning import build_catalog, config_id, learn_power_models
from learnplan.planner.environment import EnvironmentMap, arc_key, connected, load_map
from learnplan.planner.problem import MoveTo
from learnplan.simulator import (
    Perturbation,
    PerturbationSchedule,
    PlaceObstacle,
    QueryBudget,
    SetBattery,
    Trace,
    TruePower,
    WorldState,
    run,
)

log = logging.getLogger(__name__)

SUITE_SIZE = 30
SUITE_SEED = 2024
# battery capacity relative to the energy Baseline A needs for its route
BATTERY_FACTOR = 1.25
# seconds for a full charge from empty
FULL_CHARGE_S = 120.0
# planning reserve as a fraction of capacity, absorbing learned-model error
RESERVE_FRACTION = 0.03
SYNTHESIS_LIMIT_S = 30.0
DRAIN_RANGE = (0.3, 0.7)
STAGES = ("A", "B", "C")
KINDS = ("obstacle", "battery")

VALID, INVALID, ERROR = "Valid", "Invalid", "Error"
PASS, DEGRADED, FAIL, INCONCLUSIVE, NOT_APPLICABLE = "Pass", "Degraded", "Fail", "Inconclusive", "NotApplicable"


def bundled_map_path(name: str = "grid_map.json") -> str:
    return str(resources.files("learnplan") / "data" / name)


@functools.lru_cache(maxsize=8)
def model_suite(dimension: int, count: int = SUITE_SIZE, seed: int = SUITE_SEED) -> tuple[GroundTruthModelPair, ...]:
    return tuple(generate_model_suite(count, dimension, seed))


@functools.lru_cache(maxsize=8)
def _load_map(path: str) -> EnvironmentMap:
    return load_map(path)


@dataclass(frozen=True)
class TestSpec:
    seed: int
    n_tasks: int
    power_model_id: int
    learning_budget: int
    perturbation_kind: str
    n_perturbations: int = 1
    map_file: Optional[str] = None
    dimension: int = 12

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be >= 1")
        if self.learning_budget < 0:
            raise ValueError("learning budget must be >= 0")
        if self.perturbation_kind not in KINDS:
            raise ValueError(f"perturbation kind must be one of {KINDS}")
        if self.n_perturbations < 0:
            raise ValueError("n_perturbations must be >= 0")
        if not 0 <= self.power_model_id < SUITE_SIZE:
            raise ValueError(f"power model id must be in [0, {SUITE_SIZE})")

    @property
    def key(self) -> str:
        return f"{self.perturbation_kind}-s{self.seed}-m{self.power_model_id}"

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "TestSpec":
        return cls(**doc)


@dataclass
class Scenario:
    env: EnvironmentMap
    truth: GroundTruthModelPair
    start: str
    heading: int
    initial_config: tuple[int, ...]
    tasks: list[str]
    max_battery: float
    charge_rate: float
    baseline_plan: list
    schedule: PerturbationSchedule = field(default_factory=PerturbationSchedule)

    @property
    def initial_id(self) -> str:
        return config_id(self.initial_config)


def _world(sc: Scenario) -> WorldState:
    return WorldState(
        sc.env, sc.start, sc.heading, sc.max_battery, sc.max_battery, sc.initial_id,
        list(sc.tasks), charge_rate=sc.charge_rate,
    )


def _run_baseline(sc: Scenario, records: Optional[list] = None) -> Trace:
    ctl = Controller(Mode.NONE, sc.env, sc.baseline_plan, sc.max_battery)
    hooks = [ctl]
    if records is not None:
        hooks.append(lambda world, rec, trace: records.append(rec))
    power = TruePower(sc.truth, {sc.initial_id: sc.initial_config})
    return run(_world(sc), ctl, PerturbationSchedule(), hooks=hooks, power=power)


@functools.lru_cache(maxsize=64)
def build_scenario(spec: TestSpec) -> Scenario:
    """Everything a triple needs, derived deterministically from the spec seed."""
    rng = np.random.default_rng([spec.seed, spec.power_model_id, spec.dimension])
    env = _load_map(spec.map_file or bundled_map_path())
    truth = model_suite(spec.dimension)[spec.power_model_id]
    names = env.names
    start = names[int(rng.integers(len(names)))]
    heading = int(rng.integers(8))
    initial = tuple(int(b) for b in rng.integers(0, 2, size=spec.dimension))
    tasks, here = [], start
    for _ in range(spec.n_tasks):
        choices = [n for n in names if n != here]
        here = choices[int(rng.integers(len(choices)))]
        tasks.append(here)
    plan = hop_plan(env, start, tasks)

    # size the battery from an unconstrained run of the baseline route
    probe = Scenario(env, truth, start, heading, initial, tasks, 1e12, 1e12, plan)
    need = _run_baseline(probe).drained
    max_battery = float(math.ceil(BATTERY_FACTOR * need))
    sc = Scenario(env, truth, start, heading, initial, tasks, max_battery, max_battery / FULL_CHARGE_S, plan)

    records: list = []
    trace_a = _run_baseline(sc, records)
    if spec.perturbation_kind == "battery":
        sc.schedule = _battery_schedule(spec, rng, records, trace_a)
    else:
        sc.schedule = _obstacle_schedule(spec, rng, env, trace_a)
    return sc


def _battery_schedule(spec, rng, records, trace_a) -> PerturbationSchedule:
    """Drains of 30-70 % of the energy Baseline A still needed at the drain time."""
    ticks = [r for r in records if r.sim_time == int(r.sim_time) and r.sim_time > 0]
    if not ticks or spec.n_perturbations == 0:
        return PerturbationSchedule()
    end_battery = trace_a.final_battery
    lo, hi = int(0.1 * len(ticks)), max(int(0.7 * len(ticks)), 1)
    picks = sorted({int(i) for i in rng.integers(lo, hi, size=spec.n_perturbations)})
    events, drained = [], 0.0
    for i in picks:
        rec = ticks[i]
        remaining = rec.battery - end_battery
        drained += float(rng.uniform(*DRAIN_RANGE)) * remaining
        level = max(rec.battery - drained, 0.0)
        events.append(Perturbation(rec.sim_time, SetBattery(round(level, 3))))
    return PerturbationSchedule(tuple(events))


def _obstacle_schedule(spec, rng, env: EnvironmentMap, trace_a) -> PerturbationSchedule:
    """Obstacles on arcs Baseline A traverses, each leaving the map connected."""
    departs = trace_a.of_kind("depart")
    if not departs or spec.n_perturbations == 0:
        return PerturbationSchedule()
    blocked: list = []
    events = []
    order = [int(i) for i in rng.permutation(len(departs))]
    for i in order:
        if len(events) >= spec.n_perturbations:
            break
        dep = departs[i]
        key = arc_key(dep["origin"], dep["to"])
        if key in blocked:
            continue
        if not connected(env.with_blocked(blocked + [key])):
            continue
        blocked.append(key)
        t = max(0.0, round(dep["t"] - float(rng.uniform(0.0, 5.0)), 3))
        events.append(Perturbation(t, PlaceObstacle(key)))
    events.sort(key=lambda p: (p.t, p.event.arc))
    return PerturbationSchedule(tuple(events))


# -- stages --------------------------------------------------------------------------------


@dataclass
class StageResult:
    stage: str
    score: float
    status: str
    error: Optional[str] = None
    trace_path: Optional[str] = None
    wall_time: float = 0.0
    installs: int = 0
    findings: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def _challenge_controller(spec: TestSpec, sc: Scenario):
    budget = QueryBudget(spec.learning_budget)
    learned = learn_power_models(sc.truth, budget, seed=spec.seed)
    catalog, configs = build_catalog(learned.discharge.model, learned.speed.model, extra=[sc.initial_config])
    reserve = RESERVE_FRACTION * sc.max_battery
    snap = Snapshot(sc.start, sc.heading, sc.max_battery, sc.initial_id, sc.max_battery)
    mission = plan_mission(
        sc.env, snap, sc.tasks, catalog, reserve, charge_rate=sc.charge_rate, time_limit=SYNTHESIS_LIMIT_S
    )
    ctl = Controller(
        Mode.QUANTITATIVE, sc.env, mission.instructions, sc.max_battery, learned=catalog,
        min_battery=reserve, charge_rate=sc.charge_rate, time_limit=SYNTHESIS_LIMIT_S,
    )
    return ctl, TruePower(sc.truth, configs)


def execute_stage(
    spec: TestSpec, stage: str, schedule: Optional[PerturbationSchedule] = None
) -> tuple[Trace, Controller]:
    """Run one stage; ``schedule`` replaces the generated perturbations of stages B and C."""
    if stage not in STAGES:
        raise ValueError(f"stage must be one of {STAGES}")
    sc = build_scenario(spec)
    if schedule is not None:
        schedule.validate_against(sc.env)
    if stage == "A":
        ctl = Controller(Mode.NONE, sc.env, sc.baseline_plan, sc.max_battery)
        power = TruePower(sc.truth, {sc.initial_id: sc.initial_config})
        schedule = PerturbationSchedule()
    elif stage == "B":
        ctl = Controller(Mode.REACTIVE, sc.env, sc.baseline_plan, sc.max_battery)
        power = TruePower(sc.truth, {sc.initial_id: sc.initial_config})
        schedule = sc.schedule if schedule is None else schedule
    else:
        ctl, power = _challenge_controller(spec, sc)
        schedule = sc.schedule if schedule is None else schedule
    trace = run(_world(sc), ctl, schedule, hooks=[ctl], power=power)
    return trace, ctl


def run_stage(spec: TestSpec, stage: str, out_dir: Optional[str] = None) -> StageResult:
    """Run one stage; infrastructure failures come back as an Error-flagged result."""
    t0 = time.perf_counter()
    try:
        trace, ctl = execute_stage(spec, stage)
    except Exception as exc:  # noqa: BLE001 - a crashed stage must not abort a campaign
        log.warning("stage %s of %s failed: %s", stage, spec.key, exc)
        return StageResult(
            stage, 0.0, "error", error="".join(traceback.format_exception_only(type(exc), exc)).strip(),
            wall_time=time.perf_counter() - t0,
        )
    path = None
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        path = str(Path(out_dir) / f"{spec.key}-{stage}.jsonl")
        trace.write(path)
    return StageResult(
        stage, trace.score, trace.status, trace_path=path, wall_time=time.perf_counter() - t0,
        installs=ctl.stats.installs, findings=ctl.stats.findings,
    )


def verdict(score_a: float, score_b: float, score_c: float, errors=(False, False, False)) -> tuple[str, str]:
    """(validity, verdict) for one triple of stage scores and error flags."""
    err_a, err_b, err_c = errors
    if err_a or err_b or score_a < 1.0 or score_b >= 1.0:
        return INVALID, NOT_APPLICABLE
    if err_c:
        return VALID, INCONCLUSIVE
    if score_c >= 1.0:
        return VALID, PASS
    if score_c > score_b:
        return VALID, DEGRADED
    if score_c < score_b:
        return VALID, FAIL
    return VALID, INCONCLUSIVE


@dataclass
class TripleResult:
    spec: TestSpec
    stages: dict[str, StageResult]
    validity: str
    verdict: str
    index: Optional[int] = None

    def to_json(self) -> dict:
        doc = {
            "spec": self.spec.to_json(),
            "stages": {k: v.to_json() for k, v in self.stages.items()},
            "validity": self.validity,
            "verdict": self.verdict,
        }
        if self.index is not None:
            doc = {"index": self.index, **doc}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "TripleResult":
        stages = {k: StageResult(**v) for k, v in doc["stages"].items()}
        return cls(TestSpec.from_json(doc["spec"]), stages, doc["validity"], doc["verdict"], doc.get("index"))


def run_triple(spec: TestSpec, out_dir: Optional[str] = None, index: Optional[int] = None) -> TripleResult:
    try:
        stages = {s: run_stage(spec, s, out_dir) for s in STAGES}
    except Exception as exc:  # noqa: BLE001
        log.error("triple %s crashed: %s", spec.key, exc)
        empty = {s: StageResult(s, 0.0, "error", error=str(exc)) for s in STAGES}
        return TripleResult(spec, empty, ERROR, NOT_APPLICABLE, index)
    flags = tuple(stages[s].error is not None for s in STAGES)
    validity, v = verdict(stages["A"].score, stages["B"].score, stages["C"].score, flags)
    return TripleResult(spec, stages, validity, v, index)


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True)
