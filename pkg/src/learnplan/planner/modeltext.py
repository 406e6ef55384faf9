"""Guarded-command planning-model text: AST, serializer and recursive-descent parser.

Grammar (a PRISM-like subset)::

    model      := "mdp" { constant | formula } module { rewards }
    constant   := "const" ("int" | "double" | "bool") IDENT "=" expr ";"
    formula    := "formula" IDENT "=" expr ";"
    module     := "module" IDENT { variable } { command } "endmodule"
    variable   := IDENT ":" ( "[" expr ".." expr "]" | "bool" ) "init" expr ";"
    command    := "[" IDENT "]" expr "->" update { "&" update } ";"
    update     := "(" IDENT "'" "=" expr ")"
    rewards    := "rewards" STRING { "[" IDENT "]" expr ":" expr ";" } "endrewards"

Comments start with ``//`` and run to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

FUNCTIONS = {"max": (2, None), "min": (2, None), "floor": (1, 1), "ceil": (1, 1)}
KEYWORDS = {
    "mdp", "const", "int", "double", "bool", "formula", "module", "endmodule",
    "init", "rewards", "endrewards", "true", "false",
}


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: Union[int, float]


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Ite:
    cond: "Expr"
    then: "Expr"
    other: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]


Expr = Union[Num, BoolLit, Ident, Unary, Binary, Ite, Call]

RELATIONAL = ("=", "!=", "<=", ">=", "<", ">")


def identifiers(expr: Expr) -> Iterator[str]:
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Ident):
            yield e.name
        elif isinstance(e, Unary):
            stack.append(e.operand)
        elif isinstance(e, Binary):
            stack.extend((e.left, e.right))
        elif isinstance(e, Ite):
            stack.extend((e.cond, e.then, e.other))
        elif isinstance(e, Call):
            stack.extend(e.args)


def conj(*parts: Expr) -> Expr:
    out = parts[0]
    for p in parts[1:]:
        out = Binary("&", out, p)
    return out


def disj(*parts: Expr) -> Expr:
    out = parts[0]
    for p in parts[1:]:
        out = Binary("|", out, p)
    return out


def eq(name: str, other: Union[str, Expr]) -> Expr:
    return Binary("=", Ident(name), Ident(other) if isinstance(other, str) else other)


# -- declarations -------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    name: str
    type: str  # int | double | bool
    value: Expr


@dataclass(frozen=True)
class Formula:
    name: str
    body: Expr


@dataclass(frozen=True)
class Variable:
    name: str
    low: Expr | None  # None for bool variables
    high: Expr | None
    init: Expr

    @property
    def is_bool(self) -> bool:
        return self.low is None


@dataclass(frozen=True)
class Update:
    var: str
    value: Expr


@dataclass(frozen=True)
class Command:
    action: str
    guard: Expr
    updates: tuple[Update, ...]


@dataclass(frozen=True)
class Module:
    name: str
    variables: tuple[Variable, ...]
    commands: tuple[Command, ...]


@dataclass(frozen=True)
class RewardItem:
    action: str
    guard: Expr
    value: Expr


@dataclass(frozen=True)
class RewardStructure:
    name: str
    items: tuple[RewardItem, ...]


@dataclass(frozen=True)
class PlanningModel:
    constants: tuple[Constant, ...]
    formulas: tuple[Formula, ...]
    module: Module
    rewards: tuple[RewardStructure, ...] = ()
    kind: str = "mdp"

    @property
    def actions(self) -> list[str]:
        seen, out = set(), []
        for c in self.module.commands:
            if c.action not in seen:
                seen.add(c.action)
                out.append(c.action)
        return out

    def formula(self, name: str) -> Formula:
        for f in self.formulas:
            if f.name == name:
                return f
        raise KeyError(name)

    def constant(self, name: str) -> Constant:
        for c in self.constants:
            if c.name == name:
                return c
        raise KeyError(name)

    def state_count(self) -> int:
        """Size of the declared variable product."""
        from learnplan.planner.semantics import constant_values, evaluate

        env = constant_values(self)
        total = 1
        for v in self.module.variables:
            if v.is_bool:
                total *= 2
            else:
                total *= int(evaluate(v.high, env)) - int(evaluate(v.low, env)) + 1
        return total

    def validate(self) -> "PlanningModel":
        check_semantics(self)
        return self


# -- errors -------------------------------------------------------------------


class ModelParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, token: str):
        super().__init__(f"line {line}, column {column}: {message} (found {token!r})")
        self.line = line
        self.column = column
        self.token = token


class ModelSemanticError(ValueError):
    def __init__(self, message: str, names=()):
        super().__init__(message)
        self.names = tuple(names)


def check_semantics(model: PlanningModel) -> None:
    consts = [c.name for c in model.constants]
    forms = [f.name for f in model.formulas]
    vars_ = [v.name for v in model.module.variables]
    all_names = consts + forms + vars_
    dupes = sorted({n for n in all_names if all_names.count(n) > 1})
    if dupes:
        raise ModelSemanticError(f"duplicate declarations: {', '.join(dupes)}", dupes)

    def unknown_in(exprs, known):
        return sorted({n for e in exprs for n in identifiers(e) if n not in known})

    # constants may use earlier constants only
    known: set[str] = set()
    for c in model.constants:
        bad = unknown_in([c.value], known)
        if bad:
            raise ModelSemanticError(f"constant {c.name} uses undeclared names: {', '.join(bad)}", bad)
        known.add(c.name)
    for v in model.module.variables:
        exprs = [v.init] + ([] if v.is_bool else [v.low, v.high])
        bad = unknown_in(exprs, known)
        if bad:
            raise ModelSemanticError(f"variable {v.name} bounds use undeclared names: {', '.join(bad)}", bad)
    known = set(all_names)
    for f in model.formulas:
        bad = unknown_in([f.body], known)
        if bad:
            raise ModelSemanticError(f"formula {f.name} uses undeclared names: {', '.join(bad)}", bad)
    _check_formula_cycles(model)
    var_set = set(vars_)
    for cmd in model.module.commands:
        bad = unknown_in([cmd.guard], known)
        if bad:
            raise ModelSemanticError(
                f"guard of [{cmd.action}] references undeclared variables: {', '.join(bad)}", bad
            )
        targets = [u.var for u in cmd.updates]
        bad = sorted({t for t in targets if t not in var_set})
        if bad:
            raise ModelSemanticError(f"[{cmd.action}] updates undeclared variables: {', '.join(bad)}", bad)
        if len(set(targets)) != len(targets):
            raise ModelSemanticError(f"[{cmd.action}] updates a variable twice")
        bad = unknown_in([u.value for u in cmd.updates], known)
        if bad:
            raise ModelSemanticError(f"[{cmd.action}] update uses undeclared names: {', '.join(bad)}", bad)
    declared = set(model.actions)
    for rs in model.rewards:
        for item in rs.items:
            if item.action not in declared:
                raise ModelSemanticError(
                    f'reward "{rs.name}" refers to undeclared action [{item.action}]', [item.action]
                )
            bad = unknown_in([item.guard, item.value], known)
            if bad:
                raise ModelSemanticError(f"reward item [{item.action}] uses undeclared names: {', '.join(bad)}", bad)


def _check_formula_cycles(model: PlanningModel) -> None:
    deps = {f.name: {n for n in identifiers(f.body)} for f in model.formulas}
    state: dict[str, int] = {}

    def visit(name, path):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise ModelSemanticError(f"cyclic formula definition: {' -> '.join(path + [name])}", [name])
        state[name] = 1
        for dep in deps[name]:
            if dep in deps:
                visit(dep, path + [name])
        state[name] = 2

    for name in deps:
        visit(name, [])


# -- serializer -----------------------------------------------------------------

_PRECEDENCE = {"?": 0, "|": 1, "&": 2, "!": 3, "rel": 4, "+": 5, "-": 5, "*": 6, "/": 6, "neg": 7}


def _fmt_num(v) -> str:
    if isinstance(v, bool):
        raise TypeError("boolean in numeric literal")
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _is_atom(e: Expr) -> bool:
    return isinstance(e, (Num, BoolLit, Ident, Call)) and not (isinstance(e, Num) and e.value < 0)


def format_expr(e: Expr) -> str:
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Unary):
        if e.op == "-" and isinstance(e.operand, Num):
            # keep a negated literal distinct from a negative literal
            return f"-({format_expr(e.operand)})"
        return f"{e.op}{_wrap(e.operand)}"
    if isinstance(e, Binary):
        # left-associative chains of one operator print without inner parentheses
        if isinstance(e.left, Binary) and e.left.op == e.op and e.op not in RELATIONAL:
            left = format_expr(e.left)
        else:
            left = _wrap(e.left)
        return f"{left} {e.op} {_wrap(e.right)}"
    if isinstance(e, Ite):
        other = format_expr(e.other) if isinstance(e.other, Ite) else _wrap(e.other)
        return f"{_wrap(e.cond)} ? {_wrap(e.then)} : {other}"
    raise TypeError(f"not an expression: {e!r}")


def _wrap(e: Expr) -> str:
    s = format_expr(e)
    return s if _is_atom(e) else f"({s})"


def serialize_model(model: PlanningModel) -> str:
    lines = [model.kind, ""]
    for c in model.constants:
        lines.append(f"const {c.type} {c.name} = {format_expr(c.value)};")
    if model.constants:
        lines.append("")
    for f in model.formulas:
        lines.append(f"formula {f.name} = {format_expr(f.body)};")
    if model.formulas:
        lines.append("")
    m = model.module
    lines.append(f"module {m.name}")
    for v in m.variables:
        if v.is_bool:
            lines.append(f"  {v.name} : bool init {format_expr(v.init)};")
        else:
            lines.append(f"  {v.name} : [{format_expr(v.low)}..{format_expr(v.high)}] init {format_expr(v.init)};")
    lines.append("")
    for cmd in m.commands:
        ups = " & ".join(f"({u.var}'={format_expr(u.value)})" for u in cmd.updates)
        lines.append(f"  [{cmd.action}] {format_expr(cmd.guard)} -> {ups};")
    lines.append("endmodule")
    for rs in model.rewards:
        lines.append("")
        lines.append(f'rewards "{rs.name}"')
        for item in rs.items:
            lines.append(f"  [{item.action}] {format_expr(item.guard)} : {format_expr(item.value)};")
        lines.append("endrewards")
    return "\n".join(lines) + "\n"


# -- lexer ------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>\.\.|->|<=|>=|!=|[=<>!&|+\-*/?:;,()\[\]'])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | string | op | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ModelParseError("unexpected character", line, pos - line_start + 1, text[pos])
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "<end of input>", line, pos - line_start + 1))
    return tokens


# -- parser -----------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, expected: str):
        t = self.tok
        raise ModelParseError(f"expected {expected}", t.line, t.col, t.text)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "ident") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"'{text}'")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error(what)
        self.i += 1
        return t.text

    # model structure
    def model(self) -> PlanningModel:
        kind = "mdp"
        if self.at("mdp"):
            self.i += 1
        constants, formulas = [], []
        while True:
            if self.accept("const"):
                t = self.tok
                if t.text not in ("int", "double", "bool"):
                    self.error("constant type 'int', 'double' or 'bool'")
                self.i += 1
                name = self.ident("constant name")
                self.expect("=")
                value = self.expr()
                self.expect(";")
                constants.append(Constant(name, t.text, value))
            elif self.accept("formula"):
                name = self.ident("formula name")
                self.expect("=")
                body = self.expr()
                self.expect(";")
                formulas.append(Formula(name, body))
            else:
                break
        if not self.at("module"):
            self.error("'const', 'formula' or 'module'")
        module = self.module()
        rewards = []
        while self.at("rewards"):
            rewards.append(self.rewards())
        if self.tok.kind != "eof":
            self.error("'rewards' or end of input")
        return PlanningModel(tuple(constants), tuple(formulas), module, tuple(rewards), kind)

    def module(self) -> Module:
        self.expect("module")
        name = self.ident("module name")
        variables = []
        while self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
            vname = self.ident()
            self.expect(":")
            if self.accept("bool"):
                low = high = None
            else:
                self.expect("[")
                low = self.expr()
                self.expect("..")
                high = self.expr()
                self.expect("]")
            self.expect("init")
            init = self.expr()
            self.expect(";")
            variables.append(Variable(vname, low, high, init))
        commands = []
        while self.at("["):
            self.i += 1
            action = self.ident("action label")
            self.expect("]")
            guard = self.expr()
            self.expect("->")
            updates = [self.update()]
            while self.accept("&"):
                updates.append(self.update())
            self.expect(";")
            commands.append(Command(action, guard, tuple(updates)))
        if not self.at("endmodule"):
            self.error("'endmodule'")
        self.i += 1
        return Module(name, tuple(variables), tuple(commands))

    def update(self) -> Update:
        self.expect("(")
        var = self.ident("variable name")
        self.expect("'")
        self.expect("=")
        value = self.expr()
        self.expect(")")
        return Update(var, value)

    def rewards(self) -> RewardStructure:
        self.expect("rewards")
        t = self.tok
        if t.kind != "string":
            self.error("quoted reward name")
        self.i += 1
        items = []
        while self.accept("["):
            action = self.ident("action label")
            self.expect("]")
            guard = self.expr()
            self.expect(":")
            value = self.expr()
            self.expect(";")
            items.append(RewardItem(action, guard, value))
        if not self.at("endrewards"):
            self.error("'endrewards'")
        self.i += 1
        return RewardStructure(t.text[1:-1], tuple(items))

    # expressions, lowest precedence first
    def expr(self) -> Expr:
        cond = self.or_()
        if self.accept("?"):
            then = self.expr()
            self.expect(":")
            return Ite(cond, then, self.expr())
        return cond

    def or_(self) -> Expr:
        e = self.and_()
        while self.accept("|"):
            e = Binary("|", e, self.and_())
        return e

    def and_(self) -> Expr:
        e = self.not_()
        while self.accept("&"):
            e = Binary("&", e, self.not_())
        return e

    def not_(self) -> Expr:
        if self.accept("!"):
            return Unary("!", self.not_())
        return self.rel()

    def rel(self) -> Expr:
        e = self.add()
        t = self.tok
        if t.kind == "op" and t.text in RELATIONAL:
            self.i += 1
            e = Binary(t.text, e, self.add())
        return e

    def add(self) -> Expr:
        e = self.mul()
        while self.at("+") or self.at("-"):
            op = self.tok.text
            self.i += 1
            e = Binary(op, e, self.mul())
        return e

    def mul(self) -> Expr:
        e = self.unary()
        while self.at("*") or self.at("/"):
            op = self.tok.text
            self.i += 1
            e = Binary(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.accept("-"):
            if self.tok.kind == "num":
                return Num(-self.number())
            return Unary("-", self.unary())
        return self.primary()

    def number(self):
        text = self.tok.text
        self.i += 1
        if any(ch in text for ch in ".eE"):
            return float(text)
        return int(text)

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            return Num(self.number())
        if t.kind == "ident":
            if t.text == "true" or t.text == "false":
                self.i += 1
                return BoolLit(t.text == "true")
            if t.text in KEYWORDS:
                self.error("expression")
            self.i += 1
            if t.text in FUNCTIONS and self.at("("):
                self.i += 1
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                lo, hi = FUNCTIONS[t.text]
                if len(args) < lo or (hi is not None and len(args) > hi):
                    raise ModelParseError(f"wrong number of arguments to {t.text}", t.line, t.col, t.text)
                return Call(t.text, tuple(args))
            return Ident(t.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error("expression")


def parse_model(text: str, check: bool = True) -> PlanningModel:
    model = _Parser(text).model()
    if check:
        check_semantics(model)
    return model


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("end of expression")
    return e
