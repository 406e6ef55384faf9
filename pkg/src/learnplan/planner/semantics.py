"""Explicit-state interpreter for parsed planning models.

This works from the model text alone (no knowledge of maps or catalogs), so
it serves as an independent check on the specialised synthesizer: it
enumerates reachable states and runs a plain Dijkstra on the transition
reward without any dominance pruning.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

from learnplan.planner.modeltext import (
    BoolLit,
    Binary,
    Call,
    Expr,
    Ident,
    Ite,
    ModelSemanticError,
    Num,
    PlanningModel,
    Unary,
)

_BINOPS: dict[str, Callable] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}
_CALLS: dict[str, Callable] = {
    "max": max,
    "min": min,
    "floor": lambda x: int(math.floor(x)),
    "ceil": lambda x: int(math.ceil(x)),
}


def evaluate(expr: Expr, env: dict):
    """Direct recursive evaluation against a name -> value mapping."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, Ident):
        try:
            return env[expr.name]
        except KeyError:
            raise ModelSemanticError(f"undefined name {expr.name}", [expr.name]) from None
    if isinstance(expr, Unary):
        v = evaluate(expr.operand, env)
        return (not v) if expr.op == "!" else -v
    if isinstance(expr, Binary):
        if expr.op == "&":
            return bool(evaluate(expr.left, env)) and bool(evaluate(expr.right, env))
        if expr.op == "|":
            return bool(evaluate(expr.left, env)) or bool(evaluate(expr.right, env))
        return _BINOPS[expr.op](evaluate(expr.left, env), evaluate(expr.right, env))
    if isinstance(expr, Ite):
        return evaluate(expr.then if evaluate(expr.cond, env) else expr.other, env)
    if isinstance(expr, Call):
        return _CALLS[expr.fn](*(evaluate(a, env) for a in expr.args))
    raise TypeError(f"not an expression: {expr!r}")


def constant_values(model: PlanningModel) -> dict:
    env: dict = {}
    for c in model.constants:
        v = evaluate(c.value, env)
        if c.type == "int":
            if v != int(v):
                raise ModelSemanticError(f"int constant {c.name} has non-integral value {v}", [c.name])
            v = int(v)
        elif c.type == "double":
            v = float(v)
        else:
            v = bool(v)
        env[c.name] = v
    return env


class _Compiler:
    """Turns expressions into closures over a state tuple."""

    def __init__(self, model: PlanningModel):
        self.consts = constant_values(model)
        self.var_index = {v.name: i for i, v in enumerate(model.module.variables)}
        self.formula_bodies = {f.name: f.body for f in model.formulas}
        self.formula_fns: dict[str, Callable] = {}

    def __call__(self, e: Expr) -> Callable:
        if isinstance(e, (Num, BoolLit)):
            v = e.value
            return lambda s: v
        if isinstance(e, Ident):
            name = e.name
            if name in self.var_index:
                i = self.var_index[name]
                return lambda s: s[i]
            if name in self.consts:
                v = self.consts[name]
                return lambda s: v
            if name in self.formula_bodies:
                if name not in self.formula_fns:
                    self.formula_fns[name] = self(self.formula_bodies[name])
                return self.formula_fns[name]
            raise ModelSemanticError(f"undefined name {name}", [name])
        if isinstance(e, Unary):
            f = self(e.operand)
            if e.op == "!":
                return lambda s: not f(s)
            return lambda s: -f(s)
        if isinstance(e, Binary):
            a, b = self(e.left), self(e.right)
            if e.op == "&":
                return lambda s: bool(a(s)) and bool(b(s))
            if e.op == "|":
                return lambda s: bool(a(s)) or bool(b(s))
            op = _BINOPS[e.op]
            return lambda s: op(a(s), b(s))
        if isinstance(e, Ite):
            c, t, o = self(e.cond), self(e.then), self(e.other)
            return lambda s: t(s) if c(s) else o(s)
        if isinstance(e, Call):
            fn = _CALLS[e.fn]
            args = [self(x) for x in e.args]
            return lambda s: fn(*(g(s) for g in args))
        raise TypeError(f"not an expression: {e!r}")


@dataclass(frozen=True)
class SearchResult:
    cost: float
    actions: tuple[str, ...]
    final_state: dict
    states_explored: int


class StateSpaceTooLarge(RuntimeError):
    pass


def min_reward_to_goal(
    model: PlanningModel,
    reward: str = "time",
    goal: str = "goal",
    max_states: int = 2_000_000,
) -> SearchResult | None:
    """Minimum accumulated transition reward until ``goal`` holds, or None.

    Ties are broken by action count, then by the sequence of action labels.
    """
    comp = _Compiler(model)
    variables = model.module.variables
    names = [v.name for v in variables]
    bounds = []
    for v in variables:
        if v.is_bool:
            bounds.append((False, True))
        else:
            bounds.append((evaluate(v.low, comp.consts), evaluate(v.high, comp.consts)))
    init = tuple(evaluate(v.init, comp.consts) for v in variables)
    goal_fn = comp(model.formula(goal).body)

    commands = []
    for cmd in model.module.commands:
        ups = [(comp.var_index[u.var], comp(u.value)) for u in cmd.updates]
        commands.append((cmd.action, comp(cmd.guard), ups))
    rewards: dict[str, list] = {}
    for rs in model.rewards:
        if rs.name == reward:
            for item in rs.items:
                rewards.setdefault(item.action, []).append((comp(item.guard), comp(item.value)))

    heap = [(0.0, 0, (), 0.0, init)]
    done = set()
    while heap:
        _, n, path, cost, state = heapq.heappop(heap)
        if state in done:
            continue
        done.add(state)
        if len(done) > max_states:
            raise StateSpaceTooLarge(f"more than {max_states} states explored")
        if goal_fn(state):
            return SearchResult(cost, path, dict(zip(names, state)), len(done))
        for action, guard, ups in commands:
            if not guard(state):
                continue
            nxt = list(state)
            for i, fn in ups:
                v = fn(state)
                lo, hi = bounds[i]
                if not lo <= v <= hi:
                    raise ModelSemanticError(
                        f"[{action}] sets {names[i]} to {v}, outside [{lo}..{hi}]", [names[i]]
                    )
                nxt[i] = v
            nxt = tuple(nxt)
            if nxt in done:
                continue
            r = 0.0
            for g, val in rewards.get(action, ()):
                if g(state):
                    r += val(state)
            if r < 0:
                raise ModelSemanticError(f"negative reward on [{action}]", [action])
            nc = cost + r
            heapq.heappush(heap, (round(nc, 9), n + 1, path + (action,), nc, nxt))
    return None
