"""SMT-LIB v2 export and model parsing."""
from __future__ import annotations

import re
from fractions import Fraction

from ..cir.csp import CSP
from ..cir.expr import fmt_rational, render
from ..errors import ParseError


def emit_smtlib(csp: CSP) -> str:
    """Script with exact rational constants, Xor lowered to ``distinct``, then check-sat and get-model."""
    lines = ["(set-option :produce-models true)", "(set-logic QF_LRA)"]
    lines += [f"(declare-const {name} {sort})" for name, sort in csp.variables.items()]
    lines += [f"(assert {render(a, num=fmt_rational, lower_xor=True)})" for a in csp.assertions]
    lines += ["(check-sat)", "(get-model)"]
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def _parse_sexprs(text: str) -> list:
    stack: list[list] = [[]]
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(None, pos, f"unexpected text at offset {pos}")
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(2):
            if len(stack) == 1:
                raise ParseError(None, pos, "unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        elif m.group(3) is not None:
            stack[-1].append(m.group(3))
    if len(stack) != 1:
        raise ParseError(None, pos, "unbalanced '('")
    return stack[0]


def _value(v):
    if isinstance(v, str):
        if v == "true":
            return True
        if v == "false":
            return False
        try:
            return Fraction(v)
        except ValueError:
            raise ParseError(None, v, f"bad literal {v!r}") from None
    if len(v) == 2 and v[0] == "-":
        x = _value(v[1])
        if isinstance(x, bool):
            raise ParseError(None, "-", "negated boolean")
        return -x
    if len(v) == 3 and v[0] == "/":
        a, b = _value(v[1]), _value(v[2])
        if isinstance(a, bool) or isinstance(b, bool) or b == 0:
            raise ParseError(None, "/", "bad rational")
        return a / b
    raise ParseError(None, str(v), f"unsupported value {v!r}")


def parse_model(text: str) -> dict:
    """Map each ``define-fun`` of a get-model response to a Fraction or bool."""
    items = _parse_sexprs(text)
    # some solvers wrap the definitions in a (model ...) list, others in a bare list
    if len(items) == 1 and isinstance(items[0], list):
        items = items[0]
    if items and items[0] == "model":
        items = items[1:]
    out = {}
    for d in items:
        if not (isinstance(d, list) and len(d) == 5 and d[0] == "define-fun" and d[2] == []):
            raise ParseError(None, str(d)[:40], f"not a constant definition: {d!r}")
        _, name, _, sort, val = d
        x = _value(val)
        if sort == "Bool" and not isinstance(x, bool):
            raise ParseError(None, name, f"{name}: expected a boolean")
        if sort in ("Real", "Int") and isinstance(x, bool):
            raise ParseError(None, name, f"{name}: expected a number")
        out[name] = x
    return out
