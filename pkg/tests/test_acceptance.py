"""Acceptance suite: nine end-to-end criteria, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

from __future__ import annotations

import itertools
import random
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cli_cases import run_all  # noqa: E402
from oracles import brute_force_plan_time, pairwise_pareto, random_problem  # noqa: E402

from learnplan.config_model import (  # noqa: E402
    EASY,
    HARD,
    InfluenceModel,
    all_configs,
    generate_model_pair,
    generate_model_suite,
    pareto_optimal_configs,
    sample_config_matrix,
)
from learnplan.harness.bench import planning_benchmark  # noqa: E402
from learnplan.harness.campaign import run_campaign  # noqa: E402
from learnplan.harness.triple import bundled_map_path, verdict  # noqa: E402
from learnplan.learner.cart import fit_cart  # noqa: E402
from learnplan.learner.metrics import mean_abs_pct_error, predict_many, spearman  # noqa: E402
from learnplan.learner.stepwise import Observation, fit_stepwise, observations_from_arrays  # noqa: E402
from learnplan.planner.environment import load_map  # noqa: E402
from learnplan.planner.modeltext import ModelParseError, parse_model, serialize_model  # noqa: E402
from learnplan.planner.problem import CatalogEntry, ConfigCatalog, PlanningProblem  # noqa: E402
from learnplan.planner.synthesis import NoFeasiblePlan, synthesize  # noqa: E402
from learnplan.planner.translate import translate  # noqa: E402

RESULTS: dict[int, tuple[bool, str]] = {}


def report(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}", flush=True)


# -- 1: exact recovery of the two-option example ---------------------------------------------


def criterion_1() -> tuple[bool, str]:
    truth = {(0,): 3.0, (1,): 20.0, (0, 1): 17.0}
    obs = [Observation((a, b), 2.0 + 3 * a + 20 * b + 17 * a * b) for a in (0, 1) for b in (0, 1)]
    t0 = time.perf_counter()
    fit = fit_stepwise(obs, entry_p=0.15, exit_p=0.15)
    elapsed = time.perf_counter() - t0
    got = dict(fit.model.terms)
    ok = (
        set(got) == set(truth)
        and all(abs(got[t] - c) <= 1e-9 for t, c in truth.items())
        and abs(fit.model.intercept - 2.0) <= 1e-9
        and elapsed < 1.0
    )
    return ok, f"terms {sorted(got)} intercept {fit.model.intercept:.12g} in {elapsed * 1000:.1f} ms"


# -- 2: learning accuracy against CART ------------------------------------------------------


def criterion_2(seed: int = 0) -> tuple[bool, str]:
    t0 = time.perf_counter()
    suite = generate_model_suite(60, 20, seed=seed)
    X = sample_config_matrix(20, 10_100, seed=seed)
    train, held_out = X[:100], X[100:]
    good = total = 0
    stepwise_hard, cart_hard = [], []
    for pair in suite:
        if pair.complexity not in (EASY, HARD):
            continue
        for truth in (pair.discharge, pair.speed):
            obs = observations_from_arrays(train, truth.evaluate_many(train))
            learned = fit_stepwise(obs).model
            mape = mean_abs_pct_error(learned, truth, held_out)
            rho = spearman(predict_many(learned, held_out), truth.evaluate_many(held_out))
            total += 1
            good += mape < 10.0 and rho >= 0.97
            if pair.complexity == HARD:
                stepwise_hard.append(mape)
                cart_hard.append(mean_abs_pct_error(fit_cart(obs), truth, held_out))
    elapsed = time.perf_counter() - t0
    frac = good / total
    sw_med, cart_med = float(np.median(stepwise_hard)), float(np.median(cart_hard))
    ok = total == 80 and frac >= 0.9 and cart_med > sw_med and elapsed < 300
    return ok, (
        f"{good}/{total} models with MAPE < 10% and Spearman >= 0.97 ({frac:.1%}); "
        f"Hard median MAPE stepwise {sw_med:.2e}% vs CART {cart_med:.2f}%; {elapsed:.0f} s"
    )


# -- 3: Pareto front against the pairwise oracle -------------------------------------------------


def criterion_3() -> tuple[bool, str]:
    rng = random.Random(3)
    mismatches = 0
    for i in range(50):
        d = rng.randint(2, 12)
        pair = generate_model_pair(i, d, rng.choice([EASY, HARD] if d >= 6 else [EASY]), seed=rng.randrange(10**9))
        discharge, speed = pair.discharge, pair.speed
        if i % 2:
            # coarse coefficients create ties and duplicate objective vectors
            discharge = InfluenceModel(d, round(discharge.intercept), tuple((o, round(c)) for o, c in discharge.terms))
            speed = InfluenceModel(d, round(speed.intercept, 1), tuple((o, round(c, 1)) for o, c in speed.terms))
        got = [c for c, _ in pareto_optimal_configs(d, [(discharge, "min"), (speed, "max")])]
        X = all_configs(d)
        values = np.column_stack([discharge.evaluate_many(X), speed.evaluate_many(X)])
        expected = [tuple(int(b) for b in X[j]) for j in pairwise_pareto(values, ("min", "max"))]
        mismatches += got != expected
    return mismatches == 0, f"{50 - mismatches}/50 random objective pairs match the pairwise oracle"


# -- 4: planner optimality ------------------------------------------------------------------


def criterion_4() -> tuple[bool, str]:
    bad = 0
    for seed in range(100):
        p = random_problem(seed)
        oracle = brute_force_plan_time(p)
        try:
            got = synthesize(p).predicted_time
        except NoFeasiblePlan:
            got = None
        if (got is None) != (oracle is None) or (got is not None and abs(got - oracle) > 1e-6):
            bad += 1
    env = load_map(bundled_map_path("reference_map.json"))
    half = ConfigCatalog((CatalogEntry("HALF_SPEED", 0.35, 41.65),))
    leg = synthesize(PlanningProblem(env, half, "l1", "l2", "HALF_SPEED", 4000, 4000, initial_heading="SOUTH"))
    leg_ok = abs(leg.predicted_time - 8.5714) <= 5e-5 and abs(leg.predicted_energy - 357) <= 1
    return bad == 0 and leg_ok, (
        f"{100 - bad}/100 random maps match enumeration; single leg {leg.predicted_time:.4f} s, "
        f"{leg.predicted_energy} mWh"
    )


# -- 5: model text round trip ----------------------------------------------------------------

MALFORMED = [
    "module m\n  x : [0..1] init 0;\n",
    "module m\n  x : [0..1] init 0;\n  [a] x = 0 (x'=1);\nendmodule\n",
    "formula f = (1 + 2;\nmodule m\n  x : [0..1] init 0;\nendmodule\n",
]


def criterion_5() -> tuple[bool, str]:
    trips = sum(parse_model(serialize_model(m)) == m for m in (translate(random_problem(s)) for s in range(100)))
    positioned = 0
    for text in MALFORMED:
        try:
            parse_model(text)
        except ModelParseError as err:
            positioned += err.line >= 1 and err.column >= 1
    return trips == 100 and positioned == 3, f"{trips}/100 round trips; {positioned}/3 malformed inputs positioned"


# -- 6: adaptation campaigns -------------------------------------------------------------------


def criterion_6() -> tuple[bool, str]:
    t0 = time.perf_counter()
    details, ok = [], True
    with tempfile.TemporaryDirectory() as tmp:
        for kind, seed in (("battery", 1), ("obstacle", 2)):
            summary = run_campaign(
                {"generate": {"count": 20, "seed": seed, "kind": kind}}, Path(tmp) / f"{kind}.jsonl", resume=False,
            )
            k = summary["per_kind"][kind]
            mean_b, mean_c = k["mean_score_B"], k["mean_score_C"]
            this = (
                k["Valid"] > 0
                and k["Pass"] + k["Degraded"] > k["Fail"]
                and mean_b is not None
                and mean_c > mean_b
            )
            ok &= this
            details.append(
                f"{kind}: {k['Valid']} valid, {k['Pass']} pass, {k['Degraded']} degraded, {k['Fail']} fail, "
                f"{k['Inconclusive']} inconclusive, mean C {mean_c:.3f} vs B {mean_b:.3f}"
            )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    return ok, "; ".join(details) + f"; {elapsed:.0f} s"


# -- 7: planning-time scaling ------------------------------------------------------------------


def criterion_7() -> tuple[bool, str]:
    by_n = planning_benchmark([10, 60, 120, 180], [2], time_limit=60.0, repeats=3)
    by_k = planning_benchmark([120], [1, 2, 3], time_limit=60.0, repeats=3)
    solved = all(r.outcome == "solved" for r in by_n + by_k)
    n_times = [r.wall_ms for r in by_n]
    k_times = [r.wall_ms for r in by_k]
    rising = all(a < b for a, b in zip(n_times, n_times[1:])) and all(a < b for a, b in zip(k_times, k_times[1:]))
    fmt = lambda xs: ", ".join(f"{x:.0f}" for x in xs)  # noqa: E731
    return solved and rising, f"ms by n=10/60/120/180 at k=2: {fmt(n_times)}; by k=1/2/3 at n=120: {fmt(k_times)}"


# -- 8: verdict truth table -------------------------------------------------------------------


def _expected_verdict(a, b, c, errors):
    if a < 1.0 or b == 1.0 or errors[0] or errors[1]:
        return ("Invalid", "NotApplicable")
    if errors[2]:
        return ("Valid", "Inconclusive")
    if c == 1.0:
        return ("Valid", "Pass")
    if c > b:
        return ("Valid", "Degraded")
    if c < b:
        return ("Valid", "Fail")
    return ("Valid", "Inconclusive")


def criterion_8() -> tuple[bool, str]:
    scores = (0.0, 0.2, 0.5, 0.75, 0.999, 1.0)
    cases = wrong = 0
    for a, b, c in itertools.product(scores, repeat=3):
        for errors in itertools.product((False, True), repeat=3):
            cases += 1
            wrong += verdict(a, b, c, errors) != _expected_verdict(a, b, c, errors)
    invalid_ok = (
        verdict(0.5, 0.2, 1.0) == verdict(1.0, 1.0, 1.0) == verdict(1.0, 0.2, 1.0, (True, False, False))
        == ("Invalid", "NotApplicable")
    )
    return wrong == 0 and invalid_ok, f"{cases - wrong}/{cases} score/error combinations agree"


# -- 9: CLI determinism ------------------------------------------------------------------------


def criterion_9() -> tuple[bool, str]:
    with tempfile.TemporaryDirectory() as tmp:
        first = run_all(Path(tmp))
        second = run_all(Path(tmp))
    same = [name for name in first if first[name] == second[name]]
    return len(same) == len(first), f"{len(same)}/{len(first)} subcommands byte-identical across two runs"


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    ok, detail = CRITERIA[number]()
    with capsys.disabled():
        print()
        report(number, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]()
        report(n, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
