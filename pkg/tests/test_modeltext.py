import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from learnplan.harness.triple import bundled_map_path
from learnplan.planner.environment import load_map
from learnplan.planner.modeltext import (
    Binary,
    BoolLit,
    Call,
    Ident,
    Ite,
    ModelParseError,
    ModelSemanticError,
    Num,
    Unary,
    format_expr,
    parse_expr,
    parse_model,
    serialize_model,
)
from learnplan.planner.problem import CatalogEntry, ConfigCatalog, PlanningProblem
from learnplan.planner.semantics import evaluate, min_reward_to_goal
from learnplan.planner.translate import translate
from oracles import random_problem

REFERENCE_CATALOG = ConfigCatalog((CatalogEntry("HALF_SPEED", 0.35, 41.65), CatalogEntry("FULL_SPEED", 0.68, 142.35)))

MALFORMED = [
    # module without endmodule
    ("module m\n  x : [0..1] init 0;\n", "'endmodule'", 3),
    # missing arrow in a command
    ("module m\n  x : [0..1] init 0;\n  [a] x = 0 (x'=1);\nendmodule\n", "'->'", 3),
    # unbalanced parenthesis in a formula
    ("formula f = (1 + 2;\nmodule m\n  x : [0..1] init 0;\nendmodule\n", "')'", 1),
]


def ref_model(**kw):
    env = load_map(bundled_map_path("reference_map.json"))
    args = dict(
        map=env, catalog=REFERENCE_CATALOG, start="l1", target="l5", initial_config="HALF_SPEED",
        initial_battery=4000, max_battery=4000, initial_heading="SOUTH", max_reconfigs=1,
    )
    args.update(kw)
    return translate(PlanningProblem(**args))


def test_ref_round_trip():
    m = ref_model()
    text = serialize_model(m)
    assert parse_model(text) == m
    assert serialize_model(parse_model(text)) == text
    assert "module bot_module" in text and 'rewards "time"' in text
    assert "formula stop = goal | (b <= MIN_BATTERY);" in text


def test_random_translated_models_round_trip():
    for seed in range(100):
        m = translate(random_problem(seed))
        assert parse_model(serialize_model(m)) == m, seed


@pytest.mark.parametrize("text,expected,line", MALFORMED)
def test_malformed_inputs_report_position(text, expected, line):
    with pytest.raises(ModelParseError) as info:
        parse_model(text)
    err = info.value
    assert err.line == line and err.column >= 1
    assert expected in str(err)
    assert f"line {line}, column {err.column}" in str(err)


def test_unexpected_character():
    with pytest.raises(ModelParseError) as info:
        parse_expr("1 + $")
    assert info.value.column == 5


def test_undeclared_guard_variable():
    text = "module m\n  x : [0..1] init 0;\n  [a] y = 0 -> (x'=1);\nendmodule\n"
    with pytest.raises(ModelSemanticError) as info:
        parse_model(text)
    assert info.value.names == ("y",)
    assert "y" in str(info.value)


def test_reward_for_undeclared_action():
    text = 'module m\n  x : [0..1] init 0;\n  [a] x = 0 -> (x\'=1);\nendmodule\nrewards "time"\n  [b] true : 1;\nendrewards\n'
    with pytest.raises(ModelSemanticError) as info:
        parse_model(text)
    assert info.value.names == ("b",)


def test_cyclic_formula():
    text = "formula f = g + 1;\nformula g = f;\nmodule m\n  x : [0..1] init 0;\nendmodule\n"
    with pytest.raises(ModelSemanticError):
        parse_model(text)


def test_translate_structure():
    env = load_map(bundled_map_path("reference_map.json"))
    two = type(env).from_json(
        {"locations": [{"name": "a", "x": 0, "y": 0}, {"name": "b", "x": 0, "y": 2}], "arcs": [{"from": "a", "to": "b"}]}
    )
    one = ConfigCatalog((CatalogEntry("only", 0.5, 10.0),))
    m = translate(PlanningProblem(two, one, "a", "b", "only", 100, 100, max_reconfigs=0))
    assert m.state_count() == 2 * 8 * 101 * 1 * 1
    assert sorted(m.actions) == ["a_to_b", "b_to_a"]
    blocked = translate(PlanningProblem(two.with_blocked([("a", "b")]), one, "a", "b", "only", 100, 100))
    assert blocked.actions == []
    assert not any(a.startswith("t_set_") for a in ref_model(max_reconfigs=0).actions)
    assert "charge" in ref_model().actions


def test_interpreter_on_ref_single_move():
    result = min_reward_to_goal(ref_model(target="l2", max_reconfigs=0))
    assert result.actions == ("l1_to_l2",)
    assert result.cost == pytest.approx(8.5714, abs=1e-4)
    assert result.final_state["b"] == 4000 - 357


# -- expression round trip ------------------------------------------------------------------

names = st.sampled_from(["x", "y", "b", "MAX_BATTERY", "goal"])
numbers = st.one_of(st.integers(-50, 50), st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False))
leaves = st.one_of(numbers.map(Num), names.map(Ident), st.booleans().map(BoolLit))


def _extend(children):
    ops = st.sampled_from(["|", "&", "=", "!=", "<", "<=", ">", ">=", "+", "-", "*", "/"])
    return st.one_of(
        st.builds(Binary, ops, children, children),
        st.builds(Unary, st.sampled_from(["!", "-"]), children),
        st.builds(Ite, children, children, children),
        st.builds(lambda f, a, b: Call(f, (a, b)), st.sampled_from(["max", "min"]), children, children),
        st.builds(lambda f, a: Call(f, (a,)), st.sampled_from(["floor", "ceil"]), children),
    )


expressions = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300)
@given(expressions)
def test_expression_round_trip(e):
    assert parse_expr(format_expr(e)) == e


def test_precedence_examples():
    assert parse_expr("1 + 2 * 3") == Binary("+", Num(1), Binary("*", Num(2), Num(3)))
    assert parse_expr("a | b & !c") == Binary("|", Ident("a"), Binary("&", Ident("b"), Unary("!", Ident("c"))))
    assert parse_expr("x = 1 ? 2 : x = 2 ? 3 : 4") == Ite(
        Binary("=", Ident("x"), Num(1)), Num(2), Ite(Binary("=", Ident("x"), Num(2)), Num(3), Num(4))
    )
    assert parse_expr("10 - 3 - 2") == Binary("-", Binary("-", Num(10), Num(3)), Num(2))
    assert evaluate(parse_expr("10 - 3 - 2"), {}) == 5
    assert evaluate(parse_expr("max(0, 5 - 7) + floor(2.5)"), {}) == 2
