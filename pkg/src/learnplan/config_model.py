"""Binary configuration spaces, performance-influence models and Pareto pruning.

A configuration is a tuple of 0/1 ints. Enumeration order is lexicographic on
the bit string, i.e. option 0 is the most significant bit of the index.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Configuration = tuple[int, ...]

EASY, MEDIUM, HARD = "Easy", "Medium", "Hard"
COMPLEXITY_CLASSES = (EASY, MEDIUM, HARD)

# interaction-term count ranges per class (inclusive)
CLASS_RANGES = {EASY: (0, 4), MEDIUM: (5, 14), HARD: (15, 20)}

DISCHARGE_INTERCEPT = (50.0, 500.0)
DISCHARGE_EFFECT = (-100.0, 100.0)
SPEED_INTERCEPT = (0.3, 1.5)
SPEED_EFFECT = (-0.2, 0.2)
# guaranteed lower bound on every generated model, as a fraction of its intercept
POSITIVITY_FLOOR = 0.1

DEFAULT_DIMENSION = 20
# number of influential options (main effects) per model, inclusive
MAIN_EFFECTS = (5, 8)


@dataclass(frozen=True)
class ConfigurationSpace:
    dimension: int
    option_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not self.option_names:
            object.__setattr__(self, "option_names", tuple(f"o{i + 1}" for i in range(self.dimension)))
        if len(self.option_names) != self.dimension:
            raise ValueError("need one option name per dimension")
        if len(set(self.option_names)) != self.dimension:
            raise ValueError("option names must be unique")

    @property
    def size(self) -> int:
        return 2**self.dimension


def config_to_str(config: Sequence[int]) -> str:
    return "".join("1" if b else "0" for b in config)


def config_from_str(text: str) -> Configuration:
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a 0/1 configuration string: {text!r}")
    return tuple(int(ch) for ch in text)


def index_to_config(index: int, dimension: int) -> Configuration:
    return tuple((index >> (dimension - 1 - i)) & 1 for i in range(dimension))


def config_to_index(config: Sequence[int]) -> int:
    out = 0
    for b in config:
        out = (out << 1) | int(bool(b))
    return out


def indices_to_matrix(indices: np.ndarray, dimension: int) -> np.ndarray:
    """Bit matrix (n, d) of uint8 for integer configuration indices."""
    shifts = np.arange(dimension - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(indices, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)


def all_configs(dimension: int) -> np.ndarray:
    return indices_to_matrix(np.arange(2**dimension, dtype=np.int64), dimension)


@dataclass(frozen=True)
class InfluenceModel:
    """Polynomial over binary options: intercept plus one coefficient per option set.

    Terms are kept in canonical order (by order, then option indices) so two
    models with the same terms compare equal and serialize identically.
    """

    dimension: int
    intercept: float
    terms: tuple[tuple[tuple[int, ...], float], ...] = ()

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        canon = []
        seen = set()
        for options, coef in self.terms:
            key = tuple(sorted(int(i) for i in options))
            if not key:
                raise ValueError("term with empty option set; use the intercept")
            if len(set(key)) != len(key):
                raise ValueError(f"repeated option in term {key}")
            if key[0] < 0 or key[-1] >= self.dimension:
                raise ValueError(f"term {key} out of range for dimension {self.dimension}")
            if key in seen:
                raise ValueError(f"duplicate term {key}")
            seen.add(key)
            canon.append((key, float(coef)))
        canon.sort(key=lambda t: (len(t[0]), t[0]))
        object.__setattr__(self, "terms", tuple(canon))
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def interaction_count(self) -> int:
        return sum(1 for options, _ in self.terms if len(options) >= 2)

    def coefficient(self, options: Iterable[int]) -> float:
        key = tuple(sorted(options))
        for opts, coef in self.terms:
            if opts == key:
                return coef
        return 0.0

    def evaluate(self, config: Sequence[int]) -> float:
        if len(config) != self.dimension:
            raise ValueError(f"configuration has {len(config)} options, model expects {self.dimension}")
        total = self.intercept
        for options, coef in self.terms:
            if all(config[i] for i in options):
                total += coef
        return total

    def evaluate_many(self, configs: np.ndarray) -> np.ndarray:
        X = np.asarray(configs)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise ValueError(f"expected an (n, {self.dimension}) configuration matrix, got {X.shape}")
        X = X.astype(bool, copy=False)
        out = np.full(X.shape[0], self.intercept, dtype=float)
        for options, coef in self.terms:
            if len(options) == 1:
                active = X[:, options[0]]
            else:
                active = np.logical_and.reduce(X[:, list(options)], axis=1)
            out += coef * active
        return out

    def scaled(self, factor: float) -> "InfluenceModel":
        return InfluenceModel(self.dimension, self.intercept * factor, tuple((o, c * factor) for o, c in self.terms))

    def lower_bound(self) -> float:
        """Intercept plus all negative coefficients; no configuration evaluates below it."""
        return self.intercept + sum(min(c, 0.0) for _, c in self.terms)

    def to_json(self) -> dict:
        return {
            "dimension": self.dimension,
            "intercept": self.intercept,
            "terms": [{"options": list(o), "coef": c} for o, c in self.terms],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "InfluenceModel":
        return cls(
            int(doc["dimension"]),
            float(doc["intercept"]),
            tuple((tuple(t["options"]), float(t["coef"])) for t in doc.get("terms", [])),
        )


def evaluate_influence(model: InfluenceModel, config: Sequence[int]) -> float:
    return model.evaluate(config)


def complexity_class(model: InfluenceModel) -> str:
    n = model.interaction_count
    if n <= CLASS_RANGES[EASY][1]:
        return EASY
    if n <= CLASS_RANGES[MEDIUM][1]:
        return MEDIUM
    return HARD


@dataclass(frozen=True)
class GroundTruthModelPair:
    id: int
    discharge: InfluenceModel  # mWh per second
    speed: InfluenceModel  # m/s
    complexity: str
    seed: int

    @property
    def dimension(self) -> int:
        return self.discharge.dimension

    def power(self, config: Sequence[int]) -> tuple[float, float]:
        return self.discharge.evaluate(config), self.speed.evaluate(config)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "complexity": self.complexity,
            "discharge": self.discharge.to_json(),
            "speed": self.speed.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GroundTruthModelPair":
        return cls(
            int(doc["id"]),
            InfluenceModel.from_json(doc["discharge"]),
            InfluenceModel.from_json(doc["speed"]),
            doc["complexity"],
            int(doc["seed"]),
        )


def _max_interactions(dimension: int) -> int:
    return sum(len(list(itertools.combinations(range(dimension), k))) for k in (2, 3) if k <= dimension)


def class_quotas(count: int, dimension: int = DEFAULT_DIMENSION) -> dict[str, int]:
    """How many pairs of each class a suite of ``count`` pairs contains.

    Classes are filled round-robin; a class whose lower interaction bound
    cannot be met at this dimension is skipped.
    """
    capacity = _max_interactions(dimension)
    feasible = [c for c in COMPLEXITY_CLASSES if CLASS_RANGES[c][0] <= capacity]
    quotas = {c: 0 for c in COMPLEXITY_CLASSES}
    for i in range(count):
        quotas[feasible[i % len(feasible)]] += 1
    return quotas


def _random_model(
    rng: np.random.Generator,
    dimension: int,
    n_interactions: int,
    intercept_range: tuple[float, float],
    effect_range: tuple[float, float],
) -> InfluenceModel:
    n_main = int(rng.integers(min(MAIN_EFFECTS[0], dimension), min(MAIN_EFFECTS[1], dimension) + 1))
    mains = sorted(int(i) for i in rng.choice(dimension, size=n_main, replace=False))
    main_set = set(mains)

    # interactions form among influential options first, then anchor on one of them
    combos = [c for k in (2, 3) if k <= dimension for c in itertools.combinations(range(dimension), k)]
    inner = [c for c in combos if main_set.issuperset(c)]
    anchored = [c for c in combos if main_set.intersection(c) and not main_set.issuperset(c)]
    loose = [c for c in combos if not main_set.intersection(c)]
    picked: list[tuple[int, ...]] = []
    for pool in (inner, anchored, loose):
        need = n_interactions - len(picked)
        if need <= 0:
            break
        weights = np.array([0.7 if len(c) == 2 else 0.3 for c in pool])
        weights /= weights.sum()
        take = min(need, len(pool))
        idx = rng.choice(len(pool), size=take, replace=False, p=weights)
        picked.extend(pool[int(i)] for i in sorted(idx))

    lo, hi = effect_range
    terms = [((i,), float(rng.uniform(lo, hi))) for i in mains]
    terms += [(c, float(rng.uniform(lo, hi))) for c in picked]
    intercept = float(rng.uniform(*intercept_range))
    model = InfluenceModel(dimension, intercept, tuple(terms))

    floor = POSITIVITY_FLOOR * intercept
    negative = intercept - model.lower_bound()
    if model.lower_bound() < floor and negative > 0:
        shrink = (intercept - floor) / negative
        model = InfluenceModel(dimension, intercept, tuple((o, c * shrink) for o, c in model.terms))
    return model


def generate_model_pair(model_id: int, dimension: int, complexity: str, seed: int) -> GroundTruthModelPair:
    rng = np.random.default_rng(seed)
    lo, hi = CLASS_RANGES[complexity]
    hi = min(hi, _max_interactions(dimension))
    n_dis = int(rng.integers(lo, hi + 1))
    n_spd = int(rng.integers(lo, hi + 1))
    discharge = _random_model(rng, dimension, n_dis, DISCHARGE_INTERCEPT, DISCHARGE_EFFECT)
    speed = _random_model(rng, dimension, n_spd, SPEED_INTERCEPT, SPEED_EFFECT)
    return GroundTruthModelPair(model_id, discharge, speed, complexity, seed)


def generate_model_suite(count: int, dimension: int = DEFAULT_DIMENSION, seed: int = 0) -> list[GroundTruthModelPair]:
    """Deterministic suite of synthetic (discharge, speed) ground-truth pairs."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if dimension < 2:
        raise ValueError("dimension must be >= 2")
    quotas = class_quotas(count, dimension)
    classes = [c for c in COMPLEXITY_CLASSES for _ in range(quotas[c])]
    root = np.random.SeedSequence(seed)
    order = np.random.default_rng(root).permutation(count)
    children = root.spawn(count)
    suite = []
    for model_id in range(count):
        pair_seed = int(children[model_id].generate_state(1)[0])
        suite.append(generate_model_pair(model_id, dimension, classes[int(order[model_id])], pair_seed))
    return suite


def save_suite(suite: Sequence[GroundTruthModelPair], path) -> None:
    with open(path, "w") as fh:
        json.dump([p.to_json() for p in suite], fh, indent=1)
        fh.write("\n")


def load_suite(path) -> list[GroundTruthModelPair]:
    with open(path) as fh:
        return [GroundTruthModelPair.from_json(d) for d in json.load(fh)]


def sample_configs(space: ConfigurationSpace | int, n: int, seed: int) -> list[Configuration]:
    """``n`` distinct configurations drawn uniformly without replacement."""
    d = space if isinstance(space, int) else space.dimension
    total = 2**d
    if n > total:
        raise ValueError(f"cannot draw {n} distinct configurations from a space of {total}")
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    if total <= 1 << 16:
        picks = rng.choice(total, size=n, replace=False)
    else:
        seen: dict[int, None] = {}
        while len(seen) < n:
            for v in rng.integers(0, total, size=n - len(seen)):
                seen.setdefault(int(v), None)
        picks = list(seen)[:n]
    return [index_to_config(int(i), d) for i in picks]


def sample_config_matrix(dimension: int, n: int, seed: int) -> np.ndarray:
    """Same draw as :func:`sample_configs`, as a uint8 matrix."""
    return np.array(sample_configs(dimension, n, seed), dtype=np.uint8).reshape(n, dimension)


@dataclass(frozen=True)
class ObjectivePoint:
    values: tuple[float, ...]
    senses: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        return {"values": list(self.values), "senses": list(self.senses)}


def _normalize(values, senses) -> np.ndarray:
    V = np.asarray(values, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if senses is None:
        return V
    if len(senses) != V.shape[1]:
        raise ValueError("one sense per objective required")
    flip = np.array([-1.0 if s == "max" else 1.0 for s in senses])
    for s in senses:
        if s not in ("min", "max"):
            raise ValueError(f"unknown sense {s!r}")
    return V * flip


def pareto_front(points, senses: Sequence[str] | None = None) -> list[int]:
    """Indices of points not dominated by any other point (sorted).

    ``points`` is an (n, k) array-like or a sequence of :class:`ObjectivePoint`.
    Exact duplicates of a non-dominated point are all kept.
    """
    if len(points) == 0:
        return []
    if isinstance(points[0], ObjectivePoint):
        if senses is None and points[0].senses:
            senses = points[0].senses
        points = [p.values for p in points]
    V = _normalize(points, senses)
    n, k = V.shape
    if k == 1:
        return [int(i) for i in np.flatnonzero(V[:, 0] == V[:, 0].min())]
    if k == 2:
        return _pareto_2d(V)
    keep = []
    for i in range(n):
        le = np.all(V <= V[i], axis=1)
        lt = np.any(V < V[i], axis=1)
        if not np.any(le & lt):
            keep.append(i)
    return keep


def _pareto_2d(V: np.ndarray) -> list[int]:
    order = np.lexsort((V[:, 1], V[:, 0]))
    a = V[order, 0]
    b = V[order, 1]
    starts = np.flatnonzero(np.r_[True, a[1:] != a[:-1]])
    group_start = starts[np.searchsorted(starts, np.arange(len(a)), side="right") - 1]
    running = np.minimum.accumulate(b)
    best_before = np.where(group_start > 0, running[np.maximum(group_start - 1, 0)], np.inf)
    group_min = b[group_start]
    dominated = (best_before <= b) | (group_min < b)
    return sorted(int(i) for i in order[~dominated])


def pareto_optimal_configs(
    space: ConfigurationSpace | int,
    objectives: Sequence[tuple[InfluenceModel, str]],
    enum_limit: int = 2**DEFAULT_DIMENSION,
) -> list[tuple[Configuration, ObjectivePoint]]:
    """Exact Pareto set over full enumeration, in lexicographic bit order."""
    d = space if isinstance(space, int) else space.dimension
    if 2**d > enum_limit:
        raise ValueError(f"space of 2^{d} configurations exceeds enumeration limit {enum_limit}; subsample first")
    if not objectives:
        raise ValueError("need at least one objective")
    X = all_configs(d)
    values = np.column_stack([m.evaluate_many(X) for m, _ in objectives])
    senses = tuple(s for _, s in objectives)
    front = pareto_front(values, senses)
    return [
        (tuple(int(b) for b in X[i]), ObjectivePoint(tuple(float(v) for v in values[i]), senses))
        for i in front
    ]
