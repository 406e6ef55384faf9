"""Planning-time benchmark over catalog size and reconfiguration budget."""

from __future__ import annotations

import logging
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from learnplan.planner.environment import EnvironmentMap, load_map
from learnplan.planner.problem import CatalogEntry, ConfigCatalog, PlanningProblem
from learnplan.planner.synthesis import NoFeasiblePlan, SynthesisTimeout, synthesize
from learnplan.harness.triple import bundled_map_path

log = logging.getLogger(__name__)

DEFAULT_CONFIG_COUNTS = (10, 60, 120, 180)
DEFAULT_BUDGETS = (1, 2, 3)
BENCH_HEADER = "wall_ms is the median monotonic-clock time spent inside synthesize only (translation and I/O excluded)"


@dataclass(frozen=True)
class BenchRecord:
    n_configs: int
    reconfig_budget: int
    wall_ms: float
    outcome: str
    predicted_time: Optional[float] = None

    def __post_init__(self):
        if self.n_configs <= 0:
            raise ValueError("n_configs must be positive")

    def to_json(self) -> dict:
        return asdict(self)


def synthetic_catalog(n: int, seed: int = 0) -> ConfigCatalog:
    """A speed/discharge trade-off pool: every entry is Pareto-optimal and ids are distinct."""
    rng = np.random.default_rng(seed)
    speeds = np.sort(rng.uniform(0.2, 1.0, n))
    # convex, strictly increasing discharge keeps the pool on one front
    rates = 25.0 + 90.0 * speeds**2 + np.linspace(0.0, 1e-3 * n, n)
    return ConfigCatalog(
        tuple(CatalogEntry(f"k{i:03d}", float(s), float(r)) for i, (s, r) in enumerate(zip(speeds, rates)))
    )


def bench_problem(
    env: EnvironmentMap,
    catalog: ConfigCatalog,
    budget: int,
    start: str = "l1",
    target: str = "l5",
    battery: float = 1500.0,
) -> PlanningProblem:
    # start in the slowest configuration with a tight battery, so reconfiguring and charging both matter
    return PlanningProblem(
        map=env,
        catalog=catalog,
        start=start,
        target=target,
        initial_config=catalog.ids[0],
        initial_battery=battery,
        max_battery=battery,
        min_battery=0,
        initial_heading=0,
        max_reconfigs=budget,
    )


def time_synthesis(problem: PlanningProblem, time_limit: float, repeats: int) -> tuple[float, str, Optional[float]]:
    samples = []
    outcome, predicted = "solved", None
    for _ in range(repeats):
        t0 = time.perf_counter()
        try:
            plan = synthesize(problem, time_limit=time_limit)
            predicted = plan.predicted_time
        except SynthesisTimeout:
            outcome = "timeout"
        except NoFeasiblePlan:
            outcome = "infeasible"
        except MemoryError:
            outcome = "out_of_memory"
        samples.append((time.perf_counter() - t0) * 1000.0)
        if outcome in ("timeout", "out_of_memory"):
            break
    return statistics.median(samples), outcome, predicted


def planning_benchmark(
    config_counts: Sequence[int] = DEFAULT_CONFIG_COUNTS,
    reconfig_budgets: Sequence[int] = DEFAULT_BUDGETS,
    map_path: Optional[str] = None,
    seed: int = 0,
    time_limit: float = 60.0,
    repeats: int = 3,
) -> list[BenchRecord]:
    """One record per (n_configs, budget) pair, in the order given."""
    if not config_counts or min(config_counts) < 1:
        raise ValueError("config counts must be >= 1")
    env = load_map(map_path or bundled_map_path("reference_map.json"))
    pool = synthetic_catalog(max(config_counts), seed)
    records = []
    for n in config_counts:
        # evenly thinned subsets of one pool, so each catalog spans the whole front
        idx = np.unique(np.round(np.linspace(0, len(pool) - 1, n)).astype(int))
        catalog = ConfigCatalog(tuple(pool.entries[i] for i in idx))
        for k in reconfig_budgets:
            wall, outcome, predicted = time_synthesis(bench_problem(env, catalog, k), time_limit, repeats)
            log.info("n=%d k=%d %.1f ms %s", n, k, wall, outcome)
            records.append(BenchRecord(len(catalog), k, wall, outcome, predicted))
    return records


def records_csv(records: Sequence[BenchRecord], include_wall: bool = True, memory_note: str = "") -> str:
    cols = ["n_configs", "reconfig_budget"] + (["wall_ms"] if include_wall else []) + ["outcome", "predicted_time"]
    lines = [f"# {BENCH_HEADER}"] + ([f"# {memory_note}"] if memory_note else []) + [",".join(cols)]
    for r in records:
        doc = r.to_json()
        cells = []
        for c in cols:
            v = doc[c]
            cells.append(f"{v:.3f}" if isinstance(v, float) else ("" if v is None else str(v)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
