"""Prediction dispatch and accuracy metrics."""

from __future__ import annotations

import warnings
from typing import Callable, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from learnplan.config_model import InfluenceModel
from learnplan.learner.cart import CartTree

Predictor = Union[InfluenceModel, CartTree]


class UndefinedCorrelation(ValueError):
    """Rank correlation is undefined because one argument has no rank variance."""


def predict(predictor: Predictor, config: Sequence[int]) -> float:
    if isinstance(predictor, InfluenceModel):
        return predictor.evaluate(config)
    if isinstance(predictor, CartTree):
        return predictor.predict(config)
    raise TypeError(f"cannot predict with {type(predictor).__name__}")


def predict_many(predictor, configs) -> np.ndarray:
    X = np.asarray(configs)
    if isinstance(predictor, InfluenceModel):
        return predictor.evaluate_many(X)
    if isinstance(predictor, CartTree):
        return predictor.predict_many(X)
    if callable(predictor):
        return np.array([predictor(tuple(int(b) for b in row)) for row in X], dtype=float)
    raise TypeError(f"cannot predict with {type(predictor).__name__}")


def mean_abs_pct_error(predictor, truth, eval_configs) -> float:
    """Mean |predicted - true| / |true| over the evaluation set, in percent.

    ``truth`` may be an InfluenceModel, a tree or a plain callable. Configurations
    whose true value is zero are skipped and reported through a warning.
    """
    X = np.asarray(eval_configs)
    if X.size == 0:
        raise ValueError("empty evaluation set")
    pred = predict_many(predictor, X)
    true = predict_many(truth, X)
    zero = true == 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} configurations with zero true value excluded from MAPE", RuntimeWarning)
    if zero.all():
        raise ValueError("every true value is zero")
    keep = ~zero
    return float(np.mean(np.abs(pred[keep] - true[keep]) / np.abs(true[keep])) * 100.0)


def spearman(xs, ys) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("need two equal-length 1-D sequences")
    if len(x) < 2:
        raise ValueError("need at least two values")
    rx = rankdata(x) - (len(x) + 1) / 2.0
    ry = rankdata(y) - (len(y) + 1) / 2.0
    sx = float(np.sqrt(rx @ rx))
    sy = float(np.sqrt(ry @ ry))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelation("zero rank variance")
    return float(np.clip((rx @ ry) / (sx * sy), -1.0, 1.0))


def as_callable(predictor) -> Callable[[Sequence[int]], float]:
    return lambda config: predict(predictor, config)
