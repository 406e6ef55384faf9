"""Command-line entry point: ``learnplan <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from learnplan.config_model import (
    GroundTruthModelPair,
    InfluenceModel,
    config_to_str,
    generate_model_suite,
    load_suite,
    pareto_optimal_configs,
    save_suite,
)
from learnplan.harness.bench import DEFAULT_BUDGETS, DEFAULT_CONFIG_COUNTS, planning_benchmark, records_csv
from learnplan.harness.campaign import format_summary, run_campaign
from learnplan.harness.learning import build_catalog, learn_power_models
from learnplan.harness.triple import STAGES, TestSpec, dumps, execute_stage, run_triple
from learnplan.learner.stepwise import fit_stepwise, read_observations_csv
from learnplan.planner.environment import load_map
from learnplan.planner.modeltext import serialize_model
from learnplan.planner.problem import ConfigCatalog, PlanningProblem
from learnplan.planner.synthesis import NoFeasiblePlan, SynthesisTimeout, synthesize
from learnplan.planner.translate import translate
from learnplan.simulator import PerturbationSchedule, QueryBudget

log = logging.getLogger("learnplan")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_PLAN = 3


class UsageError(Exception):
    pass


def _write(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _json_text(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


# -- subcommands ----------------------------------------------------------------------


def cmd_gen_models(args) -> int:
    suite = generate_model_suite(args.count, args.dimension, args.seed)
    if args.out in (None, "-"):
        _write(None, _json_text([p.to_json() for p in suite]))
    else:
        save_suite(suite, args.out)
    return EXIT_OK


def _suite_pair(args) -> GroundTruthModelPair:
    if not args.models:
        raise UsageError("--models is required")
    suite = load_suite(args.models)
    by_id = {p.id: p for p in suite}
    if args.model_id not in by_id:
        raise UsageError(f"model id {args.model_id} not in {args.models}")
    return by_id[args.model_id]


def cmd_learn(args) -> int:
    if args.data:
        fit = fit_stepwise(read_observations_csv(args.data), entry_p=args.entry_p, exit_p=args.exit_p)
        _write(args.out, _json_text(fit.to_json()))
        return EXIT_OK
    pair = _suite_pair(args)
    learned = learn_power_models(pair, QueryBudget(args.budget), args.seed, args.entry_p, args.exit_p)
    doc = {
        "model_id": pair.id,
        "queries": learned.queries,
        "discharge": learned.discharge.to_json(),
        "speed": learned.speed.to_json(),
    }
    _write(args.out, _json_text(doc))
    return EXIT_OK


def _objective_models(args) -> tuple[InfluenceModel, InfluenceModel]:
    """(discharge, speed) from a learned-model file or a ground-truth suite."""
    if not args.models:
        raise UsageError("--models is required")
    doc = _load_json(args.models)
    if isinstance(doc, dict) and "discharge" in doc:
        return InfluenceModel.from_json(doc["discharge"]), InfluenceModel.from_json(doc["speed"])
    pair = _suite_pair(args)
    return pair.discharge, pair.speed


def cmd_pareto(args) -> int:
    discharge, speed = _objective_models(args)
    if args.catalog:
        catalog, configs = build_catalog(discharge, speed, cap=args.cap)
        doc = [dict(e, config=config_to_str(configs[e["id"]])) for e in catalog.to_json()]
    else:
        front = pareto_optimal_configs(discharge.dimension, [(discharge, "min"), (speed, "max")])
        doc = [
            {"config": config_to_str(cfg), "discharge_rate": p.values[0], "speed": p.values[1]}
            for cfg, p in front
        ]
    _write(args.out, _json_text(doc))
    return EXIT_OK


def cmd_plan(args) -> int:
    if not args.map or not args.catalog:
        raise UsageError("--map and --catalog are required")
    catalog = ConfigCatalog.from_json(_load_json(args.catalog))
    problem = PlanningProblem(
        map=load_map(args.map),
        catalog=catalog,
        start=args.start,
        target=args.target,
        initial_config=args.config or catalog.ids[0],
        initial_battery=args.battery,
        max_battery=args.max_battery if args.max_battery is not None else args.battery,
        min_battery=args.min_battery,
        initial_heading=args.heading,
        max_reconfigs=args.reconfigs,
        charge_rate=args.charge_rate,
    )
    if args.model_out:
        _write(args.model_out, serialize_model(translate(problem)))
    try:
        plan = synthesize(problem, time_limit=args.time_limit)
    except (NoFeasiblePlan, SynthesisTimeout) as exc:
        print(f"no feasible plan: {exc}", file=sys.stderr)
        return EXIT_NO_PLAN
    _write(args.out, _json_text(plan.to_json()))
    return EXIT_OK


def _spec(args) -> TestSpec:
    return TestSpec(
        seed=args.seed,
        n_tasks=args.tasks,
        power_model_id=args.model_id,
        learning_budget=args.budget,
        perturbation_kind=args.kind,
        n_perturbations=args.perturbations,
        map_file=args.map,
        dimension=args.dimension,
    )


def cmd_simulate(args) -> int:
    schedule = PerturbationSchedule.from_json(_load_json(args.schedule)) if args.schedule else None
    trace, _ = execute_stage(_spec(args), args.stage, schedule)
    _write(args.out, trace.to_jsonl())
    return EXIT_OK


def cmd_triple(args) -> int:
    result = run_triple(_spec(args), args.traces)
    _write(args.out, dumps(result.to_json()) + "\n")
    return EXIT_OK


def cmd_campaign(args) -> int:
    if args.campaign:
        campaign = args.campaign
    elif args.count is not None:
        campaign = {
            "generate": {
                "count": args.count,
                "seed": args.seed,
                "kind": args.kind,
                "learning_budget": args.budget,
                "dimension": args.dimension,
                "map_file": args.map,
            }
        }
    else:
        raise UsageError("give --campaign FILE or --count N")
    if not args.out or args.out == "-":
        raise UsageError("campaign needs a results file (--out)")
    summary = run_campaign(campaign, args.out, args.traces, resume=not args.fresh)
    if args.summary:
        _write(args.summary, _json_text(summary))
    print(format_summary(summary))
    return EXIT_OK


def cmd_bench(args) -> int:
    records = planning_benchmark(
        args.counts, args.budgets, map_path=args.map, seed=args.seed,
        time_limit=args.time_limit, repeats=args.repeats,
    )
    _write(args.out, records_csv(records, memory_note=args.memory_note))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, seed_default: int = 0) -> None:
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def _spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tasks", type=int, default=4)
    p.add_argument("--model-id", type=int, default=0)
    p.add_argument("--budget", type=int, default=120, help="learning budget (queries)")
    p.add_argument("--kind", choices=("obstacle", "battery"), default="obstacle")
    p.add_argument("--perturbations", type=int, default=1)
    p.add_argument("--dimension", type=int, default=12)
    p.add_argument("--map", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="learnplan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-models", help="generate a seeded suite of ground-truth power model pairs")
    _common(p)
    p.add_argument("--count", type=int, default=30)
    p.add_argument("--dimension", type=int, default=20)
    p.set_defaults(func=cmd_gen_models)

    p = sub.add_parser("learn", help="fit power models under a query budget, or fit one model from CSV")
    _common(p)
    p.add_argument("--models", help="ground-truth suite JSON")
    p.add_argument("--model-id", type=int, default=0)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--data", help="training CSV (bitstring,value); overrides --models")
    p.add_argument("--entry-p", type=float, default=0.05)
    p.add_argument("--exit-p", type=float, default=0.05)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("pareto", help="Pareto-optimal configurations (min discharge, max speed)")
    _common(p)
    p.add_argument("--models", help="learned-model JSON or ground-truth suite JSON")
    p.add_argument("--model-id", type=int, default=0)
    p.add_argument("--catalog", action="store_true", help="emit a thinned planner catalog instead")
    p.add_argument("--cap", type=int, default=30)
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("plan", help="synthesize a minimum-time plan")
    _common(p)
    p.add_argument("--map", help="environment map JSON")
    p.add_argument("--catalog", help='catalog JSON [{"id", "speed", "discharge_rate"}]')
    p.add_argument("--start", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--config", help="initial config id (default: first catalog entry)")
    p.add_argument("--battery", type=float, required=True)
    p.add_argument("--max-battery", type=float)
    p.add_argument("--min-battery", type=float, default=0.0)
    p.add_argument("--heading", default="N")
    p.add_argument("--reconfigs", type=int, default=0)
    p.add_argument("--charge-rate", type=float, default=50.0)
    p.add_argument("--time-limit", type=float)
    p.add_argument("--model-out", help="also write the translated planning model text here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run one stage of a test spec and write its JSONL trace")
    _common(p)
    _spec_args(p)
    p.add_argument("--stage", choices=STAGES, default="A")
    p.add_argument("--schedule", help="perturbation schedule JSON replacing the generated one")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("triple", help="run Baseline A, Baseline B and Challenge for one spec")
    _common(p)
    _spec_args(p)
    p.add_argument("--traces", help="directory for per-stage traces")
    p.set_defaults(func=cmd_triple)

    p = sub.add_parser("campaign", help="run a campaign of triples with resumable JSONL results")
    _common(p)
    p.add_argument("--campaign", help="campaign JSON (specs list or generator stanza)")
    p.add_argument("--count", type=int, help="generate COUNT specs instead of reading --campaign")
    p.add_argument("--kind", choices=("obstacle", "battery"), default="obstacle")
    p.add_argument("--budget", type=int, default=120)
    p.add_argument("--dimension", type=int, default=12)
    p.add_argument("--map", default=None)
    p.add_argument("--traces", help="directory for per-stage traces")
    p.add_argument("--summary", help="also write the summary as JSON")
    p.add_argument("--fresh", action="store_true", help="discard existing results instead of resuming")
    p.add_argument("--models", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("bench", help="planning-time benchmark (CSV)")
    _common(p)
    p.add_argument("--counts", type=int, nargs="+", default=list(DEFAULT_CONFIG_COUNTS))
    p.add_argument("--budgets", type=int, nargs="+", default=list(DEFAULT_BUDGETS))
    p.add_argument("--map", default=None)
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--memory-note", default="")
    p.add_argument("--models", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors by exiting
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"learnplan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
