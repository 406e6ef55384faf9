"""Campaigns of test triples with append-only JSONL results and a verdict summary."""

from __future__ import annotations

import json
import logging
import os
from collections import Counter
from pathlib import Path
from typing import Optional

import numpy as np

from learnplan.harness.triple import (
    DEGRADED,
    ERROR,
    FAIL,
    INCONCLUSIVE,
    INVALID,
    KINDS,
    PASS,
    SUITE_SIZE,
    VALID,
    TestSpec,
    TripleResult,
    dumps,
    run_triple,
)

log = logging.getLogger(__name__)

VERDICTS = (PASS, DEGRADED, FAIL, INCONCLUSIVE)
VALIDITIES = (VALID, INVALID, ERROR)


def generate_specs(
    count: int,
    seed: int,
    kind: str,
    learning_budget: int = 120,
    dimension: int = 12,
    tasks: tuple[int, int] = (3, 6),
    perturbations: tuple[int, int] = (1, 2),
    map_file: Optional[str] = None,
) -> list[TestSpec]:
    """Seeded random test specs (task count, power model, perturbation count)."""
    if kind not in KINDS:
        raise ValueError(f"perturbation kind must be one of {KINDS}")
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(count):
        specs.append(
            TestSpec(
                seed=seed * 1000 + i,
                n_tasks=int(rng.integers(tasks[0], tasks[1] + 1)),
                power_model_id=int(rng.integers(SUITE_SIZE)),
                learning_budget=learning_budget,
                perturbation_kind=kind,
                n_perturbations=int(rng.integers(perturbations[0], perturbations[1] + 1)),
                map_file=map_file,
                dimension=dimension,
            )
        )
    return specs


def load_campaign(doc_or_path) -> list[TestSpec]:
    """A campaign is ``{"specs": [...]}``, ``{"generate": {...}}`` or a list of either."""
    if isinstance(doc_or_path, (str, os.PathLike)):
        with open(doc_or_path) as fh:
            doc = json.load(fh)
    else:
        doc = doc_or_path
    if isinstance(doc, TestSpec):
        return [doc]
    if isinstance(doc, list):
        return [s for part in doc for s in load_campaign(part)]
    specs = [TestSpec.from_json(s) for s in doc.get("specs", [])]
    gen = doc.get("generate")
    if gen:
        gen = dict(gen)
        for key in ("tasks", "perturbations"):
            if key in gen:
                gen[key] = tuple(gen[key])
        specs += generate_specs(**gen)
    return specs


def read_results(path) -> list[dict]:
    if not Path(path).exists():
        return []
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError:
                log.warning("ignoring truncated results line in %s", path)
    return out


def _drop_partial_line(path) -> None:
    """Cut a line left unterminated by an interrupted write so appends start clean."""
    with open(path, "rb+") as fh:
        data = fh.read()
        if data and not data.endswith(b"\n"):
            fh.truncate(data.rfind(b"\n") + 1)


def run_campaign(
    campaign,
    results_path,
    trace_dir: Optional[str] = None,
    resume: bool = True,
) -> dict:
    """Run every triple not already recorded, appending one JSON line per triple."""
    specs = load_campaign(campaign)
    done = {r["index"] for r in read_results(results_path)} if resume else set()
    if not resume and Path(results_path).exists():
        Path(results_path).unlink()
    Path(results_path).parent.mkdir(parents=True, exist_ok=True)
    Path(results_path).touch()
    _drop_partial_line(results_path)
    for index, spec in enumerate(specs):
        if index in done:
            continue
        result = run_triple(spec, trace_dir, index=index)
        with open(results_path, "a") as fh:
            fh.write(dumps(result.to_json()) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        log.info("triple %d %s: %s %s", index, spec.key, result.validity, result.verdict)
    return summarize(read_results(results_path))


def summarize(results: list[dict]) -> dict:
    """Counts per perturbation kind plus a per-test score listing."""
    per_kind = {}
    for kind in KINDS:
        rows = [r for r in results if r["spec"]["perturbation_kind"] == kind]
        validity = Counter(r["validity"] for r in rows)
        verdicts = Counter(r["verdict"] for r in rows if r["validity"] == VALID)
        valid = [r for r in rows if r["validity"] == VALID]
        per_kind[kind] = {
            "triples": len(rows),
            **{v: validity.get(v, 0) for v in VALIDITIES},
            **{v: verdicts.get(v, 0) for v in VERDICTS},
            "mean_score_B": _mean([r["stages"]["B"]["score"] for r in valid]),
            "mean_score_C": _mean([r["stages"]["C"]["score"] for r in valid]),
        }
    scores = [
        {
            "index": r.get("index"),
            "key": TestSpec.from_json(r["spec"]).key,
            "A": r["stages"]["A"]["score"],
            "B": r["stages"]["B"]["score"],
            "C": r["stages"]["C"]["score"],
            "validity": r["validity"],
            "verdict": r["verdict"],
        }
        for r in sorted(results, key=lambda r: r.get("index", 0))
    ]
    return {"per_kind": per_kind, "scores": scores}


def _mean(xs) -> Optional[float]:
    return float(np.mean(xs)) if xs else None


def format_summary(summary: dict) -> str:
    cols = ("triples",) + VALIDITIES + VERDICTS
    lines = ["kind      " + " ".join(f"{c:>12}" for c in cols) + "   meanB   meanC"]
    for kind, row in summary["per_kind"].items():
        mb = "-" if row["mean_score_B"] is None else f"{row['mean_score_B']:.3f}"
        mc = "-" if row["mean_score_C"] is None else f"{row['mean_score_C']:.3f}"
        lines.append(f"{kind:<10}" + " ".join(f"{row[c]:>12}" for c in cols) + f"   {mb:>5}   {mc:>5}")
    lines.append("")
    lines.append("index key                         A     B     C  validity  verdict")
    for s in summary["scores"]:
        lines.append(
            f"{s['index']!s:>5} {s['key']:<26} {s['A']:.2f}  {s['B']:.2f}  {s['C']:.2f}  {s['validity']:<8}  {s['verdict']}"
        )
    return "\n".join(lines)


def strip_wall_times(doc):
    """Copy of a result document without wall-clock fields (for determinism checks)."""
    if isinstance(doc, dict):
        return {k: strip_wall_times(v) for k, v in doc.items() if k != "wall_time"}
    if isinstance(doc, list):
        return [strip_wall_times(v) for v in doc]
    return doc


def triple_results(results: list[dict]) -> list[TripleResult]:
    return [TripleResult.from_json(r) for r in results]
