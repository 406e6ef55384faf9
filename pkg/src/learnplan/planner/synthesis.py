"""Minimum-time plan synthesis over the discretized product state space.

Transitions are deterministic and all costs are non-negative, so minimizing
expected time to the goal reduces to a shortest path. States are
(location, heading, config, reconfigs used, battery). A popped label prunes
any later label at the same (location, heading, config) that has used at
least as many reconfigurations and holds no more battery.
"""

from __future__ import annotations

import heapq
import logging
import time as _time
from dataclasses import dataclass

from learnplan.planner.environment import rotation_time
from learnplan.planner.problem import (
    Charge,
    InstructionGraph,
    MoveTo,
    PlanningProblem,
    SetConfig,
    energy_units,
    move_cost,
)

log = logging.getLogger(__name__)

TIME_DIGITS = 9


class NoFeasiblePlan(Exception):
    """The target cannot be reached under the battery, obstacle and reconfiguration limits."""


class SynthesisTimeout(Exception):
    """Synthesis exceeded its wall-clock limit."""


@dataclass(frozen=True)
class _Action:
    name: str
    instruction: object


def charge_action() -> _Action:
    return _Action("charge", None)


def reconfig_name(config_id: str) -> str:
    return f"t_set_{config_id}"


def _move_table(problem: PlanningProblem):
    """Per (location, config): list of (action, target, heading, travel time, energy units)."""
    env = problem.map
    table = {}
    for loc in env.names:
        for entry in problem.catalog:
            moves = []
            for arc in env.outgoing(loc):
                t, e = move_cost(arc, entry)
                moves.append((_Action(arc.action, MoveTo(arc.target)), arc.target, arc.heading, t, energy_units(e)))
            table[loc, entry.config_id] = moves
    return table


def synthesize(problem: PlanningProblem, time_limit: float | None = None) -> InstructionGraph:
    """Return a minimum-time plan from ``problem.start`` to ``problem.target``.

    Equal-time plans are ranked by instruction count, then by the sequence of
    action names. Charging always fills the battery.
    """
    deadline = None if time_limit is None else _time.perf_counter() + time_limit
    if problem.start == problem.target:
        return InstructionGraph((), 0.0, 0.0)

    env = problem.map
    cap, floor = problem.battery_cap, problem.battery_floor
    chargers = set(env.chargers)
    configs = problem.catalog.ids
    moves = _move_table(problem)
    rate = problem.charge_rate
    reconfigs = [(_Action(reconfig_name(c), SetConfig(c)), c) for c in configs]

    start = (problem.start, problem.initial_heading, problem.initial_config, 0, problem.battery_start)
    # label: (rounded time, instruction count, action names, exact time, state, actions)
    heap = [(0.0, 0, (), 0.0, start, ())]
    settled: dict[tuple, list[tuple[int, int]]] = {}
    pops = 0

    def dominated(state) -> bool:
        loc, head, cfg, k, b = state
        for k2, b2 in settled.get((loc, head, cfg), ()):
            if k2 <= k and b2 >= b:
                return True
        return False

    while heap:
        pops += 1
        if deadline is not None and pops % 512 == 0 and _time.perf_counter() > deadline:
            raise SynthesisTimeout(f"no plan within {time_limit} s")
        _, n, names, t, state, actions = heapq.heappop(heap)
        if dominated(state):
            continue
        loc, head, cfg, k, b = state
        settled.setdefault((loc, head, cfg), []).append((k, b))
        if loc == problem.target:
            instrs = tuple(a.instruction if a.name != "charge" else Charge(float(cap)) for a in actions)
            used = sum(u for u in _energy_of(actions, problem))
            log.debug("plan found after %d pops: %.4f s", pops, t)
            return InstructionGraph(instrs, t, float(used))
        if b <= floor:
            continue  # stop predicate: battery exhausted

        def push(nt, nstate, action):
            if dominated(nstate):
                return
            heapq.heappush(
                heap,
                (round(nt, TIME_DIGITS), n + 1, names + (action.name,), nt, nstate, actions + (action,)),
            )

        for action, target, arc_head, travel, units in moves[loc, cfg]:
            nb = b - units
            if nb < floor:
                continue
            push(t + travel + rotation_time(head, arc_head), (target, arc_head, cfg, k, nb), action)
        # two reconfigurations in a row never beat one direct switch
        if k < problem.max_reconfigs and not (actions and isinstance(actions[-1].instruction, SetConfig)):
            for action, c in reconfigs:
                if c != cfg:
                    push(t, (loc, head, c, k + 1, b), action)
        if loc in chargers and b < cap:
            push(t + (cap - b) / rate, (loc, head, cfg, k, cap), charge_action())

    raise NoFeasiblePlan(f"{problem.target} unreachable from {problem.start}")


def _energy_of(actions, problem: PlanningProblem):
    cfg, loc = problem.initial_config, problem.start
    for a in actions:
        ins = a.instruction
        if isinstance(ins, SetConfig):
            cfg = ins.config_id
        elif isinstance(ins, MoveTo):
            arc = problem.map.arc(loc, ins.location)
            yield energy_units(move_cost(arc, problem.catalog.get(cfg))[1])
            loc = ins.location
