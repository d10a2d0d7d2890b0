"""Differentiable arithmetic expressions in (x, t).

Expressions are nested tuples:

    ('const', v)   ('x',)   ('t',)   ('neg', e)
    ('add', a, b)  ('sub', a, b)  ('mul', a, b)  ('div', a, b)
    ('pow', base, v)          # exponent is a plain float, folded at parse
    ('sin', e)     ('cos', e)

Grammar (text form):

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?        # right-assoc, exponent must be constant
    atom  := NUMBER | 'x' | 't' | '(' expr ')' | 'sin(' expr ')' | 'cos(' expr ')'

Structural equality of trees is plain tuple equality, which is what the
print/parse fixpoint tests rely on.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ExponentNotConstant, ExprSyntaxError

Expr = tuple

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()]))"
)

_FUNCS = ("sin", "cos")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", off)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"trailing input {val!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.term()
                e = ("add", e, rhs) if val == "+" else ("sub", e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.unary()
                e = ("mul", e, rhs) if val == "*" else ("div", e, rhs)
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            inner = self.unary()
            if inner[0] == "const":
                return ("const", -inner[1])
            return ("neg", inner)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            expo = self.unary()
            if contains_var(expo):
                raise ExponentNotConstant(
                    f"exponent must be constant (offset {off})"
                )
            return ("pow", base, float(evaluate(expo, 0.0, 0.0)))
        return base

    def atom(self) -> Expr:
        kind, val, off = self.advance()
        if kind == "num":
            return ("const", float(val))
        if kind == "name":
            if val == "x":
                return ("x",)
            if val == "t":
                return ("t",)
            if val in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return (val, arg)
            raise ExprSyntaxError(f"unknown name {val!r}", off)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(f"expected a value, got {val!r}" if val else "unexpected end of input", off)


def parse_expr(text: str) -> Expr:
    """Parse expression text; raises ExprSyntaxError / ExponentNotConstant."""
    return _Parser(text).parse()


def contains_var(e: Expr) -> bool:
    head = e[0]
    if head in ("x", "t"):
        return True
    if head == "const":
        return False
    if head == "pow":
        return contains_var(e[1])
    return any(contains_var(child) for child in e[1:])


def evaluate(e: Expr, x, t):
    """Evaluate at (x, t); accepts floats or numpy arrays (broadcasting)."""
    head = e[0]
    if head == "const":
        return e[1]
    if head == "x":
        return x
    if head == "t":
        return t
    if head == "neg":
        return -evaluate(e[1], x, t)
    if head == "add":
        return evaluate(e[1], x, t) + evaluate(e[2], x, t)
    if head == "sub":
        return evaluate(e[1], x, t) - evaluate(e[2], x, t)
    if head == "mul":
        return evaluate(e[1], x, t) * evaluate(e[2], x, t)
    if head == "div":
        return evaluate(e[1], x, t) / evaluate(e[2], x, t)
    if head == "pow":
        return evaluate(e[1], x, t) ** e[2]
    if head == "sin":
        return np.sin(evaluate(e[1], x, t))
    if head == "cos":
        return np.cos(evaluate(e[1], x, t))
    raise AssertionError(f"bad node {head!r}")


_ZERO = ("const", 0.0)
_ONE = ("const", 1.0)


def _is_const(e: Expr, v=None) -> bool:
    return e[0] == "const" and (v is None or e[1] == v)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return ("const", a[1] + b[1])
    return ("add", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return ("const", a[1] - b[1])
    if _is_const(a, 0.0):
        return _neg(b)
    return ("sub", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return ("const", a[1] * b[1])
    return ("mul", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return _ZERO
    if _is_const(b, 1.0):
        return a
    return ("div", a, b)


def _neg(a: Expr) -> Expr:
    if _is_const(a):
        return ("const", -a[1])
    if a[0] == "neg":
        return a[1]
    return ("neg", a)


def _pow(base: Expr, v: float) -> Expr:
    if v == 1.0:
        return base
    if v == 0.0:
        return _ONE
    return ("pow", base, v)


def differentiate(e: Expr, var: str) -> Expr:
    """Exact symbolic partial derivative with respect to 'x' or 't'."""
    if var not in ("x", "t"):
        raise ValueError("var must be 'x' or 't'")
    head = e[0]
    if head == "const":
        return _ZERO
    if head in ("x", "t"):
        return _ONE if head == var else _ZERO
    if head == "neg":
        return _neg(differentiate(e[1], var))
    if head == "add":
        return _add(differentiate(e[1], var), differentiate(e[2], var))
    if head == "sub":
        return _sub(differentiate(e[1], var), differentiate(e[2], var))
    if head == "mul":
        u, v = e[1], e[2]
        return _add(_mul(differentiate(u, var), v), _mul(u, differentiate(v, var)))
    if head == "div":
        u, v = e[1], e[2]
        num = _sub(_mul(differentiate(u, var), v), _mul(u, differentiate(v, var)))
        return _div(num, _pow(v, 2.0))
    if head == "pow":
        base, c = e[1], e[2]
        return _mul(_mul(("const", c), _pow(base, c - 1.0)), differentiate(base, var))
    if head == "sin":
        return _mul(("cos", e[1]), differentiate(e[1], var))
    if head == "cos":
        return _mul(_neg(("sin", e[1])), differentiate(e[1], var))
    raise AssertionError(f"bad node {head!r}")


_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _prec(e: Expr) -> int:
    if e[0] == "const" and e[1] < 0:
        return 3  # prints with a leading '-', binds like unary negation
    return _PREC.get(e[0], 5)


def to_text(e: Expr) -> str:
    """Deterministic text form; parse_expr(to_text(e)) == e structurally."""
    head = e[0]
    if head == "const":
        # repr round-trips; a leading '-' re-folds to the same const node
        return repr(e[1])
    if head == "x":
        return "x"
    if head == "t":
        return "t"
    if head == "neg":
        inner = to_text(e[1])
        if _prec(e[1]) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if head in ("add", "sub"):
        op = "+" if head == "add" else "-"
        lhs, rhs = to_text(e[1]), to_text(e[2])
        if _prec(e[1]) < 1:
            lhs = f"({lhs})"
        # right side needs parens at equal precedence (left associativity)
        if _prec(e[2]) <= 1:
            rhs = f"({rhs})"
        return f"{lhs} {op} {rhs}"
    if head in ("mul", "div"):
        op = "*" if head == "mul" else "/"
        lhs, rhs = to_text(e[1]), to_text(e[2])
        if _prec(e[1]) < 2:
            lhs = f"({lhs})"
        if _prec(e[2]) <= 2:
            rhs = f"({rhs})"
        return f"{lhs}{op}{rhs}"
    if head == "pow":
        base = to_text(e[1])
        if _prec(e[1]) <= 4:
            base = f"({base})"
        return f"{base}^{e[2]!r}"
    if head in _FUNCS:
        return f"{head}({to_text(e[1])})"
    raise AssertionError(f"bad node {head!r}")


# ---------------------------------------------------------------------------
# Flat program form consumed by the jit integrator core.
# ---------------------------------------------------------------------------

OP_CONST = 0
OP_X = 1
OP_T = 2
OP_ADD = 3
OP_SUB = 4
OP_MUL = 5
OP_DIV = 6
OP_NEG = 7
OP_POW = 8
OP_SIN = 9
OP_COS = 10


def compile_program(e: Expr) -> tuple[np.ndarray, np.ndarray, int]:
    """Flatten to postfix (code[K,2], consts[C], max stack depth)."""
    code: list[tuple[int, int]] = []
    consts: list[float] = []

    def _const_idx(v: float) -> int:
        consts.append(float(v))
        return len(consts) - 1

    def walk(node: Expr) -> int:
        head = node[0]
        if head == "const":
            code.append((OP_CONST, _const_idx(node[1])))
            return 1
        if head == "x":
            code.append((OP_X, 0))
            return 1
        if head == "t":
            code.append((OP_T, 0))
            return 1
        if head == "neg":
            d = walk(node[1])
            code.append((OP_NEG, 0))
            return d
        if head == "pow":
            d = walk(node[1])
            code.append((OP_POW, _const_idx(node[2])))
            return d
        if head in ("sin", "cos"):
            d = walk(node[1])
            code.append((OP_SIN if head == "sin" else OP_COS, 0))
            return d
        op = {"add": OP_ADD, "sub": OP_SUB, "mul": OP_MUL, "div": OP_DIV}[head]
        d1 = walk(node[1])
        d2 = walk(node[2])
        code.append((op, 0))
        return max(d1, 1 + d2)

    depth = walk(e)
    return (
        np.asarray(code, dtype=np.int32).reshape(-1, 2),
        np.asarray(consts, dtype=np.float64),
        depth,
    )
