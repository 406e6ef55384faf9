"""Runs every CLI subcommand into a directory and returns its primary outputs.

Wall-time fields are removed before comparison: the ``wall_time`` entries of
triple results and the ``wall_ms`` column of the benchmark CSV.
"""

from __future__ import annotations

import csv
import io
import json
from contextlib import redirect_stdout
from pathlib import Path

from learnplan.cli import main
from learnplan.harness.campaign import strip_wall_times
from learnplan.harness.triple import bundled_map_path

SUBCOMMANDS = ("gen-models", "learn", "pareto", "plan", "simulate", "triple", "campaign", "bench")

CATALOG = [
    {"id": "HALF_SPEED", "speed": 0.35, "discharge_rate": 41.65},
    {"id": "FULL_SPEED", "speed": 0.68, "discharge_rate": 142.35},
]
TWO_OPTION_ROWS = "config,value\n00,2\n01,22\n10,5\n11,42\n"


def _cli(*argv) -> int:
    with redirect_stdout(io.StringIO()):
        return main([str(a) for a in argv])


def _no_wall_json_lines(path: Path) -> bytes:
    lines = [json.dumps(strip_wall_times(json.loads(l)), sort_keys=True) for l in path.read_text().splitlines()]
    return ("\n".join(lines) + "\n").encode()


def _no_wall_csv(path: Path) -> bytes:
    body = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    rows = list(csv.DictReader(body))
    for r in rows:
        r.pop("wall_ms", None)
    return json.dumps(rows, sort_keys=True).encode()


def run_all(work: Path) -> dict[str, bytes]:
    """Invoke each subcommand once under ``work`` and return normalized primary outputs."""
    work.mkdir(parents=True, exist_ok=True)
    out: dict[str, bytes] = {}
    suite = work / "suite.json"
    assert _cli("gen-models", "--count", 6, "--dimension", 10, "--seed", 4, "--out", suite) == 0
    out["gen-models"] = suite.read_bytes()

    learned = work / "learned.json"
    assert _cli("learn", "--models", suite, "--model-id", 2, "--budget", 80, "--seed", 1, "--out", learned) == 0
    data = work / "two_option.csv"
    data.write_text(TWO_OPTION_ROWS)
    fit = work / "fit.json"
    assert _cli("learn", "--data", data, "--entry-p", 0.15, "--exit-p", 0.15, "--out", fit) == 0
    out["learn"] = learned.read_bytes() + fit.read_bytes()

    front = work / "front.json"
    assert _cli("pareto", "--models", learned, "--out", front) == 0
    thinned = work / "catalog_from_models.json"
    assert _cli("pareto", "--models", suite, "--model-id", 1, "--catalog", "--out", thinned) == 0
    out["pareto"] = front.read_bytes() + thinned.read_bytes()

    catalog = work / "catalog.json"
    catalog.write_text(json.dumps(CATALOG))
    plan, model = work / "plan.json", work / "model.txt"
    assert _cli(
        "plan", "--map", bundled_map_path("reference_map.json"), "--catalog", catalog, "--start", "l1", "--target", "l5",
        "--battery", 1000, "--heading", "S", "--reconfigs", 1, "--out", plan, "--model-out", model,
    ) == 0
    out["plan"] = plan.read_bytes() + model.read_bytes()

    spec = ["--seed", 9, "--tasks", 4, "--model-id", 5, "--kind", "battery"]
    trace = work / "trace.jsonl"
    assert _cli("simulate", *spec, "--stage", "C", "--out", trace) == 0
    out["simulate"] = trace.read_bytes()

    triple = work / "triple.jsonl"
    assert _cli("triple", *spec, "--traces", work / "traces", "--out", triple) == 0
    out["triple"] = _no_wall_json_lines(triple)

    results = work / "campaign.jsonl"
    summary = work / "summary.json"
    assert _cli(
        "campaign", "--count", 4, "--seed", 6, "--kind", "obstacle", "--out", results, "--summary", summary, "--fresh",
    ) == 0
    out["campaign"] = _no_wall_json_lines(results) + summary.read_bytes()

    bench = work / "bench.csv"
    assert _cli("bench", "--counts", 5, 10, "--budgets", 1, "--repeats", 1, "--out", bench) == 0
    out["bench"] = _no_wall_csv(bench)
    assert set(out) == set(SUBCOMMANDS)
    return out
