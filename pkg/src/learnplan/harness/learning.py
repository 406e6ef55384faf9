"""Budgeted learning of power models and projection of their Pareto set into a catalog."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from learnplan.config_model import (
    Configuration,
    GroundTruthModelPair,
    InfluenceModel,
    config_to_str,
    pareto_optimal_configs,
    sample_configs,
)
from learnplan.learner.stepwise import FitResult, Observation, fit_stepwise
from learnplan.planner.problem import CatalogEntry, ConfigCatalog
from learnplan.simulator import QueryBudget, query_true_power

CATALOG_CAP = 30
# learned values below these are clamped so catalog entries stay valid
MIN_RATE = 1e-3
MIN_SPEED = 1e-3


@dataclass
class LearnedPower:
    discharge: FitResult
    speed: FitResult
    queries: int


def learn_power_models(
    truth: GroundTruthModelPair,
    budget: QueryBudget,
    seed: int,
    entry_p: float = 0.05,
    exit_p: float = 0.05,
) -> LearnedPower:
    """Spend the whole remaining budget on distinct random configurations and fit both models."""
    d = truth.dimension
    n = min(budget.remaining, 2**d)
    if n < 2:
        raise ValueError("learning needs a budget of at least two queries")
    configs = sample_configs(d, n, seed)
    dis, spd = [], []
    for cfg in configs:
        rate, speed = query_true_power(cfg, budget, truth)
        dis.append(Observation(cfg, rate))
        spd.append(Observation(cfg, speed))
    return LearnedPower(
        fit_stepwise(dis, entry_p=entry_p, exit_p=exit_p),
        fit_stepwise(spd, entry_p=entry_p, exit_p=exit_p),
        n,
    )


def config_id(config: Sequence[int]) -> str:
    return "c" + config_to_str(config)


def _entry(config, discharge: InfluenceModel, speed: InfluenceModel) -> CatalogEntry:
    return CatalogEntry(
        config_id(config),
        max(float(speed.evaluate(config)), MIN_SPEED),
        max(float(discharge.evaluate(config)), MIN_RATE),
    )


def build_catalog(
    discharge: InfluenceModel,
    speed: InfluenceModel,
    extra: Sequence[Configuration] = (),
    cap: int = CATALOG_CAP,
) -> tuple[ConfigCatalog, dict[str, Configuration]]:
    """Pareto set of (min discharge, max speed), deduplicated and thinned to ``cap`` entries.

    Thinning keeps evenly spaced points along the front plus the entry with
    the least energy per metre. ``extra`` configurations (such as the
    robot's starting configuration) are always appended.
    """
    d = discharge.dimension
    front = pareto_optimal_configs(d, [(discharge, "min"), (speed, "max")])
    seen = {}
    for cfg, point in front:
        rate, spd = point.values
        if rate <= 0 or spd <= 0:
            continue
        seen.setdefault((round(rate, 9), round(spd, 9)), cfg)
    points = sorted(seen.items())  # ascending discharge
    if len(points) > cap:
        keep = set(np.unique(np.round(np.linspace(0, len(points) - 1, cap)).astype(int)).tolist())
        thrifty = min(range(len(points)), key=lambda i: (points[i][0][0] / points[i][0][1], i))
        keep.add(thrifty)
        points = [points[i] for i in sorted(keep)]
    configs = [cfg for _, cfg in points]
    for cfg in extra:
        if tuple(cfg) not in configs:
            configs.append(tuple(cfg))
    entries = tuple(_entry(cfg, discharge, speed) for cfg in configs)
    return ConfigCatalog(entries), {config_id(c): tuple(c) for c in configs}
