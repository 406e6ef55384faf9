"""Aggregate map, catalog and mission into a guarded-command planning model."""

from __future__ import annotations

import re

from learnplan.planner.environment import HEADINGS, rotation_time
from learnplan.planner.modeltext import (
    Binary,
    BoolLit,
    Call,
    Command,
    Constant,
    Formula,
    Ident,
    Ite,
    Module,
    Num,
    PlanningModel,
    RewardItem,
    RewardStructure,
    Unary,
    Update,
    Variable,
    conj,
    disj,
    eq,
)
from learnplan.planner.problem import PlanningProblem, energy_units, move_cost
from learnplan.planner.synthesis import reconfig_name

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def loc_const(name: str) -> str:
    return f"L_{name}"


def cfg_const(config_id: str) -> str:
    return f"C_{config_id}"


def heading_const(h: int) -> str:
    return f"H_{HEADINGS[h]}"


def _chain(cases: list[tuple], default) -> object:
    """Right-nested if-then-else over (condition, value) pairs."""
    out = default
    for cond, value in reversed(cases):
        out = Ite(cond, value, out)
    return out


def translate(problem: PlanningProblem) -> PlanningModel:
    env = problem.map
    names = env.names
    for n in names:
        if not _IDENT.match(n):
            raise ValueError(f"location name {n!r} is not a valid identifier")
    actions = [a.action for a in env.arcs]
    if len(set(actions)) != len(actions):
        raise ValueError("location names produce clashing move labels")
    configs = problem.catalog.ids
    cap, floor = problem.battery_cap, problem.battery_floor

    constants = [
        Constant("MAX_BATTERY", "int", Num(cap)),
        Constant("MIN_BATTERY", "int", Num(floor)),
        Constant("INITIAL_BATTERY", "int", Num(problem.battery_start)),
        Constant("MAX_RECONFIGS", "int", Num(problem.max_reconfigs)),
        Constant("CHARGE_RATE", "double", Num(float(problem.charge_rate))),
    ]
    constants += [Constant(heading_const(h), "int", Num(h)) for h in range(8)]
    constants += [Constant(loc_const(n), "int", Num(i)) for i, n in enumerate(names)]
    constants += [Constant(cfg_const(c), "int", Num(i)) for i, c in enumerate(configs)]
    constants += [
        Constant("INITIAL_LOCATION", "int", Ident(loc_const(problem.start))),
        Constant("TARGET_LOCATION", "int", Ident(loc_const(problem.target))),
        Constant("INITIAL_HEADING", "int", Ident(heading_const(problem.initial_heading))),
        Constant("INITIAL_CONFIG", "int", Ident(cfg_const(problem.initial_config))),
    ]

    formulas = [
        Formula("goal", eq("l", "TARGET_LOCATION")),
        Formula("stop", Binary("|", Ident("goal"), Binary("<=", Ident("b"), Ident("MIN_BATTERY")))),
    ]
    open_arcs = [a for a in env.arcs if not env.is_blocked(a.source, a.target)]
    time_cases = {}
    for arc in open_arcs:
        rot = _chain(
            [(eq("r", heading_const(h)), Num(rotation_time(h, arc.heading))) for h in range(8)],
            Num(0),
        )
        formulas.append(Formula(f"rot_time_{arc.action}", rot))
        upd_cases, t_cases, e_cases = [], [], []
        for entry in problem.catalog:
            t, e = move_cost(arc, entry)
            if t < 0 or e < 0:
                raise ValueError(f"negative cost on {arc.action}")
            units = energy_units(e)
            upd_cases.append(
                (eq("c", cfg_const(entry.config_id)), Call("max", (Num(0), Binary("-", Ident("b"), Num(units)))))
            )
            t_cases.append((eq("c", cfg_const(entry.config_id)), Num(t)))
            e_cases.append((eq("c", cfg_const(entry.config_id)), Num(units)))
        formulas.append(Formula(f"energy_{arc.action}", _chain(e_cases, Num(0))))
        formulas.append(Formula(f"b_upd_{arc.action}", _chain(upd_cases, Num(0))))
        # the last configuration is the fall-through branch of the time table
        time_cases[arc.action] = _chain(t_cases[:-1], t_cases[-1][1])

    variables = (
        Variable("l", Num(0), Num(len(names) - 1), Ident("INITIAL_LOCATION")),
        Variable("r", Num(0), Num(7), Ident("INITIAL_HEADING")),
        Variable("b", Num(0), Ident("MAX_BATTERY"), Ident("INITIAL_BATTERY")),
        Variable("c", Num(0), Num(len(configs) - 1), Ident("INITIAL_CONFIG")),
        Variable("k", Num(0), Ident("MAX_RECONFIGS"), Num(0)),
    )
    not_stop = Unary("!", Ident("stop"))
    commands = []
    if problem.max_reconfigs > 0 and len(configs) > 1:
        for c in configs:
            guard = conj(
                Binary("!=", Ident("c"), Ident(cfg_const(c))),
                Binary("<", Ident("k"), Ident("MAX_RECONFIGS")),
                not_stop,
            )
            ups = (Update("c", Ident(cfg_const(c))), Update("k", Binary("+", Ident("k"), Num(1))))
            commands.append(Command(reconfig_name(c), guard, ups))
    for arc in open_arcs:
        upd = Ident(f"b_upd_{arc.action}")
        # guard on the unclamped level so a move never relies on the clamp at zero
        need = Binary("-", Ident("b"), Ident(f"energy_{arc.action}"))
        guard = conj(eq("l", loc_const(arc.source)), not_stop, Binary(">=", need, Ident("MIN_BATTERY")))
        ups = (
            Update("l", Ident(loc_const(arc.target))),
            Update("b", upd),
            Update("r", Ident(heading_const(arc.heading))),
        )
        commands.append(Command(arc.action, guard, ups))
    chargers = env.chargers
    if chargers:
        at_charger = disj(*(eq("l", loc_const(n)) for n in chargers))
        guard = conj(at_charger, Binary("<", Ident("b"), Ident("MAX_BATTERY")), not_stop)
        commands.append(Command("charge", guard, (Update("b", Ident("MAX_BATTERY")),)))

    items = [
        RewardItem(arc.action, BoolLit(True), Binary("+", time_cases[arc.action], Ident(f"rot_time_{arc.action}")))
        for arc in open_arcs
    ]
    if chargers:
        items.append(
            RewardItem(
                "charge",
                BoolLit(True),
                Binary("/", Binary("-", Ident("MAX_BATTERY"), Ident("b")), Ident("CHARGE_RATE")),
            )
        )
    model = PlanningModel(
        tuple(constants),
        tuple(formulas),
        Module("bot_module", variables, tuple(commands)),
        (RewardStructure("time", tuple(items)),),
    )
    return model.validate()
