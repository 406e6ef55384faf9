import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from learnplan.adaptation import (
    ENERGY_LOW,
    NOMINAL,
    OFF_TRACK,
    Controller,
    Mode,
    PlanCursor,
    Snapshot,
    energy_predictor,
    hop_plan,
    mission_analyzer,
    plan_mission,
    reactive_divert,
)
from learnplan.harness.triple import bundled_map_path
from learnplan.planner.environment import heading_index, load_map
from learnplan.planner.problem import CatalogEntry, Charge, ConfigCatalog, MoveTo, PlanningProblem, plan_totals
from learnplan.simulator import (
    MonitorRecord,
    Perturbation,
    PerturbationSchedule,
    PlaceObstacle,
    SetBattery,
    TablePower,
    WorldState,
    run,
)

POWER = TablePower({"HALF": (41.65, 0.35), "FULL": (142.35, 0.68)})
LEARNED = ConfigCatalog((CatalogEntry("HALF", 0.35, 41.65), CatalogEntry("FULL", 0.68, 142.35)))
SOUTH = heading_index("SOUTH")


@pytest.fixture(scope="module")
def ref_map():
    return load_map(bundled_map_path("reference_map.json"))


def record(location="l1", battery=4000.0, status="ok", arc=None, progress=0.0, tasks=("l2",)):
    return MonitorRecord(0.0, location, arc, progress, battery, "HALF", status, tuple(tasks))


def world(env, tasks, battery=4000.0):
    return WorldState(env, "l1", SOUTH, battery, 4000.0, "HALF", list(tasks))


def schedule(*events):
    return PerturbationSchedule(tuple(Perturbation(t, e) for t, e in events))


def quantitative(env, plan):
    return Controller(Mode.QUANTITATIVE, env, plan, 4000.0, learned=LEARNED)


# -- analyzers ----------------------------------------------------------------------------


def test_mission_analyzer():
    cursor = PlanCursor([MoveTo("l2")])
    assert mission_analyzer(record(), cursor).kind == NOMINAL
    cursor.advance("l1")
    assert mission_analyzer(record(arc=("l1", "l2"), progress=1.0), cursor).kind == NOMINAL
    assert mission_analyzer(record(status="obstacle"), cursor).kind == OFF_TRACK
    assert mission_analyzer(record(status="rejected"), cursor).kind == OFF_TRACK
    assert mission_analyzer(record(location="l4"), cursor).kind == OFF_TRACK
    assert mission_analyzer(record(arc=("l1", "l4")), cursor).kind == OFF_TRACK


def test_energy_predictor(ref_map):
    plan = [MoveTo("l2"), MoveTo("l3")]
    assert energy_predictor(record(battery=10000.0), PlanCursor(plan), LEARNED, ref_map).kind == NOMINAL
    # two 3 m legs at half speed need 714 mWh
    assert energy_predictor(record(battery=700.0), PlanCursor(plan), LEARNED, ref_map).kind == ENERGY_LOW
    assert energy_predictor(record(battery=720.0), PlanCursor(plan), LEARNED, ref_map).kind == NOMINAL
    assert energy_predictor(record(battery=720.0), PlanCursor(plan), LEARNED, ref_map, min_battery=10).kind == ENERGY_LOW
    # only the stretch up to the next charge matters
    via_charger = [MoveTo("l4"), Charge(4000), MoveTo("l5")]
    assert energy_predictor(record(battery=600.0), PlanCursor(via_charger), LEARNED, ref_map).kind == NOMINAL
    assert energy_predictor(record(battery=590.0), PlanCursor(via_charger), LEARNED, ref_map).kind == ENERGY_LOW
    # the unfinished part of the current move counts too
    mid = record(battery=250.0, arc=("l1", "l2"), progress=1.0)
    assert energy_predictor(mid, PlanCursor([]), LEARNED, ref_map).kind == NOMINAL
    mid = record(battery=250.0, arc=("l1", "l2"), progress=0.1)
    assert energy_predictor(mid, PlanCursor([]), LEARNED, ref_map).kind == ENERGY_LOW


# -- plan construction ----------------------------------------------------------------------


def test_hop_plan_and_divert(ref_map):
    assert hop_plan(ref_map, "l1", ["l3", "l1"]) == [MoveTo(x) for x in ("l2", "l3", "l2", "l1")]
    assert reactive_divert(ref_map, "l1", [], 4000.0) == [MoveTo("l4"), Charge(4000.0)]
    assert reactive_divert(ref_map, "l1", ["l5"], 4000.0) == [MoveTo("l4"), Charge(4000.0), MoveTo("l5")]


def test_plan_mission_chains_legs(ref_map):
    snap = Snapshot("l1", SOUTH, 4000.0, "HALF", 4000.0)
    mission = plan_mission(ref_map, snap, ["l2", "l3", "l5"], LEARNED)
    assert mission.legs == 3
    problem = PlanningProblem(ref_map, LEARNED, "l1", "l5", "HALF", 4000.0, 4000.0, initial_heading=SOUTH,
                              max_reconfigs=6)
    totals = plan_totals(mission.instructions, problem)
    assert totals.time == pytest.approx(mission.predicted_time, abs=1e-6)
    assert [i.location for i in mission.instructions if isinstance(i, MoveTo)] == ["l2", "l3", "l5"]
    # a leg with no feasible plan ends the mission plan
    blocked = ref_map.with_blocked([("l3", "l5"), ("l4", "l5")])
    assert plan_mission(blocked, snap, ["l2", "l5", "l1"], LEARNED).legs == 1


# -- controller -----------------------------------------------------------------------------


def test_reactive_threshold(ref_map):
    ctl = Controller(Mode.REACTIVE, ref_map, [MoveTo("l2")], 4000.0)
    w = world(ref_map, ["l2"])
    ctl(w, record(battery=3000.0), None)
    assert ctl.stats.installs == 0
    ctl(w, record(battery=700.0), None)
    assert ctl.stats.installs == 1
    assert ctl.cursor.instructions == [MoveTo("l4"), Charge(4000.0), MoveTo("l1"), MoveTo("l2")]
    # one diversion per low-battery episode
    ctl(w, record(battery=600.0), None)
    assert ctl.stats.installs == 1
    with pytest.raises(ValueError):
        Controller(Mode.REACTIVE, ref_map, [], 4000.0, reactive_threshold=4000.0)
    with pytest.raises(ValueError):
        Controller(Mode.QUANTITATIVE, ref_map, [], 4000.0)


def test_reactive_run_charges(ref_map):
    tasks = ["l4", "l5"]
    ctl = Controller(Mode.REACTIVE, ref_map, hop_plan(ref_map, "l1", tasks), 4000.0)
    trace = run(world(ref_map, tasks), ctl, schedule((1.0, SetBattery(700.0))), hooks=[ctl], power=POWER)
    # the move under way finishes at the charger, so the diversion is just a charge
    assert ctl.cursor.instructions == [Charge(4000.0), MoveTo("l5")]
    assert trace.of_kind("plan_installed") and trace.of_kind("charge_start")
    assert not [e for e in trace.events if e["kind"] == "config"]
    assert trace.score == 1.0


def test_reactive_stalls_on_obstacle(ref_map):
    tasks = ["l2", "l3"]
    ctl = Controller(Mode.REACTIVE, ref_map, hop_plan(ref_map, "l1", tasks), 4000.0)
    trace = run(world(ref_map, tasks), ctl, schedule((1.0, PlaceObstacle(("l2", "l3")))), hooks=[ctl], power=POWER)
    assert trace.score == 0.5
    assert not trace.of_kind("plan_installed")


def test_quantitative_avoids_obstacle(ref_map):
    tasks = ["l2", "l3"]
    ctl = quantitative(ref_map, hop_plan(ref_map, "l1", tasks))
    trace = run(world(ref_map, tasks), ctl, schedule((1.0, PlaceObstacle(("l2", "l3")))), hooks=[ctl], power=POWER)
    assert trace.score == 1.0
    assert trace.of_kind("finding")[0]["finding"] == OFF_TRACK
    assert trace.of_kind("plan_installed")
    assert all({e["origin"], e["to"]} != {"l2", "l3"} for e in trace.of_kind("depart"))


def test_quantitative_inserts_charge(ref_map):
    ctl = quantitative(ref_map, [MoveTo("l4"), MoveTo("l5")])
    trace = run(world(ref_map, ["l5"]), ctl, schedule((1.0, SetBattery(700.0))), hooks=[ctl], power=POWER)
    assert trace.of_kind("finding")[0]["finding"] == ENERGY_LOW
    assert trace.of_kind("charge_start")
    assert trace.score == 1.0


def test_quantitative_without_option_keeps_plan(ref_map):
    # every route to l3 is cut: the failure is logged and the robot stays put
    tasks = ["l2", "l3"]
    ctl = quantitative(ref_map, hop_plan(ref_map, "l1", tasks))
    sched = schedule((1.0, PlaceObstacle(("l2", "l3"))), (1.0, PlaceObstacle(("l3", "l5"))))
    trace = run(world(ref_map, tasks), ctl, sched, hooks=[ctl], power=POWER)
    assert trace.of_kind("plan_rejected")
    assert trace.score == 0.5


def test_unperturbed_challenge_matches_baseline(ref_map):
    tasks = ["l2", "l3", "l5", "l4"]
    plan = plan_mission(ref_map, Snapshot("l1", SOUTH, 4000.0, "HALF", 4000.0), tasks, LEARNED).instructions
    a = Controller(Mode.NONE, ref_map, plan, 4000.0)
    c = quantitative(ref_map, plan)
    ta = run(world(ref_map, tasks), a, hooks=[a], power=POWER)
    tc = run(world(ref_map, tasks), c, hooks=[c], power=POWER)
    assert ta.score == tc.score == 1.0
    assert c.stats.installs == 0


ARCS = [("l1", "l2"), ("l2", "l3"), ("l1", "l4"), ("l3", "l5"), ("l4", "l5")]
perturbations = st.lists(
    st.tuples(
        st.floats(0, 80),
        st.one_of(st.sampled_from(ARCS).map(PlaceObstacle), st.floats(0, 4000).map(SetBattery)),
    ),
    max_size=4,
).map(lambda evs: schedule(*sorted(evs, key=lambda p: p[0])))


@settings(max_examples=40, deadline=None)
@given(perturbations)
def test_mode_none_never_modifies_plan(sched):
    env = load_map(bundled_map_path("reference_map.json"))
    tasks = ["l2", "l3", "l5", "l4"]
    plan = hop_plan(env, "l1", tasks)
    ctl = Controller(Mode.NONE, env, plan, 4000.0)
    trace = run(world(env, tasks), ctl, sched, hooks=[ctl], power=POWER)
    assert ctl.cursor.instructions == plan
    assert not trace.of_kind("plan_installed") and not trace.of_kind("finding")
    departed = [MoveTo(e["to"]) for e in trace.of_kind("depart")]
    assert departed == plan[: len(departed)]


@settings(max_examples=25, deadline=None)
@given(perturbations)
def test_every_handled_finding_installs_or_rejects(sched):
    env = load_map(bundled_map_path("reference_map.json"))
    tasks = ["l2", "l3", "l5", "l4"]
    ctl = quantitative(env, hop_plan(env, "l1", tasks))
    trace = run(world(env, tasks), ctl, sched, hooks=[ctl], power=POWER)
    assert len(trace.of_kind("finding")) == ctl.stats.findings
    assert ctl.stats.findings == ctl.stats.installs + ctl.stats.rejected
    assert len(trace.of_kind("plan_installed")) == ctl.stats.installs
