"""Stepwise linear regression with partial F-test entry and exit."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from learnplan.config_model import Configuration, InfluenceModel, config_from_str, config_to_str
from learnplan.learner.fdist import partial_f_pvalue

log = logging.getLogger(__name__)

Term = tuple[int, ...]

# residual sums below this fraction of the total sum of squares count as an exact fit
PERFECT_FIT = 1e-12
# a candidate column whose component orthogonal to the design is this small is collinear
COLLINEAR = 1e-10


@dataclass(frozen=True)
class Observation:
    config: Configuration
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("observation value must be finite")


@dataclass
class FitResult:
    model: InfluenceModel
    term_pvalues: dict[Term, float]
    rss: float
    n_obs: int
    iterations: int
    rss_history: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        doc = self.model.to_json()
        doc["pvalues"] = {",".join(map(str, t)): p for t, p in self.term_pvalues.items()}
        doc["rss"] = self.rss
        doc["n"] = self.n_obs
        doc["iterations"] = self.iterations
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "FitResult":
        pvalues = {tuple(int(i) for i in k.split(",")): float(v) for k, v in doc.get("pvalues", {}).items()}
        return cls(InfluenceModel.from_json(doc), pvalues, float(doc["rss"]), int(doc["n"]), int(doc.get("iterations", 0)))


def observations_from_arrays(X, y) -> list[Observation]:
    return [Observation(tuple(int(b) for b in row), float(v)) for row, v in zip(np.asarray(X), np.asarray(y))]


def read_observations_csv(path) -> list[Observation]:
    """Training data as ``bitstring,value`` lines; a non-numeric first line is a header."""
    obs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            bits, _, value = line.partition(",")
            try:
                obs.append(Observation(config_from_str(bits), float(value)))
            except ValueError:
                if lineno == 0:
                    continue
                raise ValueError(f"{path}:{lineno + 1}: bad observation line {line!r}") from None
    return obs


def write_observations_csv(obs: Sequence[Observation], path) -> None:
    with open(path, "w") as fh:
        fh.write("config,value\n")
        for o in obs:
            fh.write(f"{config_to_str(o.config)},{o.value!r}\n")


def _term_key(term: Term):
    return (len(term), term)


def _columns(X: np.ndarray, terms: Sequence[Term]) -> np.ndarray:
    if not terms:
        return np.empty((X.shape[0], 0))
    return np.column_stack([np.prod(X[:, list(t)], axis=1) for t in terms]).astype(float)


class _Design:
    """Least-squares state for one term set."""

    def __init__(self, X: np.ndarray, y: np.ndarray, terms: list[Term]):
        self.terms = terms
        A = np.column_stack([np.ones(len(y)), _columns(X, terms)])
        self.Q, self.R = np.linalg.qr(A)
        self.beta = np.linalg.solve(self.R, self.Q.T @ y)
        self.resid = y - A @ self.beta
        self.rss = float(self.resid @ self.resid)

    @property
    def n_params(self) -> int:
        return self.Q.shape[1]


class _Stepwise:
    def __init__(self, X: np.ndarray, y: np.ndarray, entry_p: float, exit_p: float, max_order: int):
        self.X = X
        self.y = y
        self.n, self.d = X.shape
        self.entry_p = entry_p
        self.exit_p = exit_p
        self.max_order = max(1, min(max_order, self.d))
        tss = float(((y - y.mean()) ** 2).sum())
        self.tss = tss
        self.tol = PERFECT_FIT * tss

    def _clean(self, rss: float) -> float:
        return 0.0 if rss <= self.tol else rss

    def candidates(self, terms: list[Term]) -> list[Term]:
        in_model = set(terms)
        out = [(i,) for i in range(self.d) if (i,) not in in_model]
        for k in range(2, self.max_order + 1):
            # an order-k term qualifies once one of its order-(k-1) subsets is in the model
            grown = set()
            for base in (t for t in in_model if len(t) == k - 1):
                for extra in range(self.d):
                    if extra not in base:
                        grown.add(tuple(sorted(base + (extra,))))
            out.extend(sorted(grown - in_model))
        return out

    def entry_pvalues(self, design: _Design, cands: list[Term]) -> list[tuple[Term, float, float]]:
        if not cands:
            return []
        C = _columns(self.X, cands)
        norms = (C**2).sum(axis=0)
        Cp = C - design.Q @ (design.Q.T @ C)
        den = (Cp**2).sum(axis=0)
        num = (Cp.T @ design.resid) ** 2
        rss = self._clean(design.rss)
        out = []
        for j, term in enumerate(cands):
            if norms[j] == 0 or den[j] <= COLLINEAR * norms[j]:
                continue
            new_rss = self._clean(max(design.rss - num[j] / den[j], 0.0))
            new_rss = min(new_rss, rss)
            if rss == 0.0:
                p = 1.0
            else:
                p = partial_f_pvalue(rss, new_rss, 1, self.n, design.n_params + 1)
            out.append((term, p, new_rss))
        return out

    def exit_pvalues(self, design: _Design) -> dict[Term, float]:
        if not design.terms:
            return {}
        Rinv = np.linalg.inv(design.R)
        diag = (Rinv**2).sum(axis=1)
        rss = self._clean(design.rss)
        out = {}
        for j, term in enumerate(design.terms, start=1):
            delta = design.beta[j] ** 2 / diag[j]
            reduced = self._clean(design.rss + delta)
            reduced = max(reduced, rss)
            if rss > 0.0 and self.n - design.n_params < 1:
                out[term] = 1.0
            else:
                out[term] = partial_f_pvalue(reduced, rss, 1, self.n, design.n_params)
        return out

    def run(self) -> FitResult:
        terms: list[Term] = []
        design = _Design(self.X, self.y, terms)
        history = [design.rss]
        seen: set[frozenset] = {frozenset()}
        iterations = 0
        while True:
            iterations += 1
            if iterations > 10_000:
                log.warning("stepwise regression hit the iteration cap")
                break
            # forward selection
            while self._clean(design.rss) > 0.0 and len(terms) + 2 <= self.n:
                scored = self.entry_pvalues(design, self.candidates(terms))
                if not scored:
                    break
                term, p, _ = min(scored, key=lambda s: (s[1], _term_key(s[0])))
                if p >= self.entry_p:
                    break
                trial = _Design(self.X, self.y, terms + [term])
                if np.linalg.matrix_rank(trial.R) < trial.n_params:
                    break
                terms = terms + [term]
                design = trial
                history.append(design.rss)
                seen.add(frozenset(terms))
            # backward elimination
            pvals = self.exit_pvalues(design)
            if not pvals:
                break
            worst = max(pvals.items(), key=lambda kv: (kv[1], _term_key(kv[0])))
            if worst[1] <= self.exit_p:
                break
            reduced = [t for t in terms if t != worst[0]]
            if frozenset(reduced) in seen and frozenset(reduced) != frozenset():
                # removing would revisit a term set already explored; stop instead of cycling
                break
            terms = reduced
            design = _Design(self.X, self.y, terms)
            seen.add(frozenset(terms))

        terms = sorted(terms, key=_term_key)
        design = _Design(self.X, self.y, terms)
        pvals = self.exit_pvalues(design)
        coef = design.beta
        model = InfluenceModel(self.d, float(coef[0]), tuple((t, float(c)) for t, c in zip(terms, coef[1:])))
        return FitResult(model, {t: pvals[t] for t in terms}, self._clean(design.rss), self.n, iterations, history)


def fit_stepwise(
    obs: Sequence[Observation],
    entry_p: float = 0.05,
    exit_p: float = 0.05,
    max_order: int = 3,
) -> FitResult:
    """Forward selection / backward elimination over options and their interactions.

    An interaction of order k becomes a candidate once one of its order k-1
    sub-terms is in the model. Ties on p-value go to the lower-order term, then to the
    lexicographically smaller option tuple.
    """
    if len(obs) < 2:
        raise ValueError("need at least two observations")
    dims = {len(o.config) for o in obs}
    if len(dims) != 1:
        raise ValueError("observations have differing dimensions")
    ordered = sorted(obs, key=lambda o: (o.config, o.value))
    X = np.array([o.config for o in ordered], dtype=float)
    y = np.array([o.value for o in ordered], dtype=float)
    if not np.any(X.min(axis=0) != X.max(axis=0)):
        raise ValueError("every option column is constant; nothing to learn")
    return _Stepwise(X, y, entry_p, exit_p, max_order).run()
