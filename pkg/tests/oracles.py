"""Independent reference implementations used by the test suite.

These deliberately avoid the package's algorithms: Pareto sets come from a
plain pairwise dominance check and optimal plans from an exhaustive
depth-first enumeration of move/reconfigure/charge sequences.
"""

from __future__ import annotations

import math
import random

import numpy as np

from learnplan.planner.environment import EnvironmentMap
from learnplan.planner.problem import CatalogEntry, ConfigCatalog, PlanningProblem

ROT_STEP = 2.6180


# -- Pareto -----------------------------------------------------------------------------


def pairwise_pareto(values: np.ndarray, senses) -> list[int]:
    """O(n^2) dominance check, one candidate row at a time."""
    V = np.asarray(values, dtype=float).copy()
    for j, s in enumerate(senses):
        if s == "max":
            V[:, j] = -V[:, j]
    keep = []
    for i in range(len(V)):
        weakly_better = np.all(V <= V[i], axis=1)
        strictly_somewhere = np.any(V < V[i], axis=1)
        if not np.any(weakly_better & strictly_somewhere):
            keep.append(i)
    return keep


# -- planning ---------------------------------------------------------------------------


def _rot(a: int, b: int) -> float:
    d = abs(a - b) % 8
    return ROT_STEP * min(d, 8 - d)


def _units(distance, speed, rate) -> int:
    return max(0, math.ceil(distance / speed * rate - 1e-9))


def brute_force_plan_time(problem: PlanningProblem) -> float | None:
    """Minimum plan time by exhaustive enumeration, or None if the target is unreachable.

    Every move may be preceded by a switch to any catalog entry (counted
    against the budget) and every visit to a charger may charge to full.
    A state is re-expanded only when reached strictly faster than before,
    which keeps the enumeration finite without discarding any better plan.
    """
    env = problem.map
    entries = {e.config_id: e for e in problem.catalog}
    cap = math.floor(problem.max_battery)
    floor = math.ceil(problem.min_battery)
    start_b = math.floor(problem.initial_battery)
    if problem.start == problem.target:
        return 0.0
    arcs = {}
    for a in env.arcs:
        if a.key in env.blocked:
            continue
        arcs.setdefault(a.source, []).append(a)
    chargers = {l.name for l in env.locations if l.charger}
    best = [math.inf]
    seen: dict = {}

    def dfs(loc, head, cfg, k, b, t, just_charged):
        if t >= best[0] - 1e-12:
            return
        key = (loc, head, cfg, k, b)
        if seen.get(key, math.inf) <= t:
            return
        seen[key] = t
        if loc == problem.target:
            best[0] = t
            return
        if b <= floor:
            return
        for arc in arcs.get(loc, ()):
            for c, entry in entries.items():
                nk = k + (c != cfg)
                if nk > problem.max_reconfigs:
                    continue
                units = _units(arc.distance, entry.speed, entry.discharge_rate)
                if b - units < floor:
                    continue
                dt = arc.distance / entry.speed + _rot(head, arc.heading)
                dfs(arc.target, arc.heading, c, nk, b - units, t + dt, False)
        if loc in chargers and b < cap and not just_charged:
            dfs(loc, head, cfg, k, cap, t + (cap - b) / problem.charge_rate, True)

    dfs(problem.start, problem.initial_heading, problem.initial_config, 0, start_b, 0.0, False)
    return None if best[0] == math.inf else best[0]


def random_map(rng: random.Random, n: int, chargers: int = 1) -> EnvironmentMap:
    """Connected map on distinct grid points: a random spanning tree plus extra arcs."""
    cells = rng.sample([(x, y) for x in range(6) for y in range(6)], n)
    names = [f"n{i}" for i in range(n)]
    charger_set = set(rng.sample(names, min(chargers, n)))
    locs = [
        {"name": nm, "x": float(x), "y": float(y), "charger": nm in charger_set}
        for nm, (x, y) in zip(names, cells)
    ]
    edges = set()
    for i in range(1, n):
        j = rng.randrange(i)
        edges.add((j, i))
    for _ in range(rng.randint(0, n)):
        i, j = rng.sample(range(n), 2)
        edges.add((min(i, j), max(i, j)))
    arcs = [{"from": names[i], "to": names[j]} for i, j in sorted(edges)]
    return EnvironmentMap.from_json({"locations": locs, "arcs": arcs})


def random_catalog(rng: random.Random, n: int) -> ConfigCatalog:
    return ConfigCatalog(
        tuple(
            CatalogEntry(f"c{i}", round(rng.uniform(0.2, 1.2), 3), round(rng.uniform(10.0, 120.0), 2))
            for i in range(n)
        )
    )


def random_problem(seed: int) -> PlanningProblem:
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    env = random_map(rng, n, chargers=rng.randint(0, 2))
    catalog = random_catalog(rng, rng.randint(1, 4))
    start, target = rng.sample(env.names, 2)
    # battery between roughly one and six typical moves, so charging and config choice both matter
    typical = np.median([a.distance / e.speed * e.discharge_rate for a in env.arcs for e in catalog])
    cap = float(max(5, round(typical * rng.uniform(1.0, 6.0))))
    initial = float(max(2, round(cap * rng.uniform(0.3, 1.0))))
    return PlanningProblem(
        map=env,
        catalog=catalog,
        start=start,
        target=target,
        initial_config=rng.choice(catalog.ids),
        initial_battery=initial,
        max_battery=cap,
        min_battery=float(rng.choice([0, 0, 1])),
        initial_heading=rng.randrange(8),
        max_reconfigs=rng.randint(0, 2),
        charge_rate=rng.choice([25.0, 50.0, 200.0]),
    )
