"""Expression IR for attack constraints, with exact, float and batch evaluation.

Boolean formulas are :class:`Expr` nodes. Real terms only appear inside
:class:`Linear` (a weighted sum of real variables plus a constant), which in
turn only appears inside :class:`Compare`. That keeps the IR well typed by
construction: there is no way to put a real term in a boolean position.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

EPS_DIV = 1e-6
DELTA_STRICT = 1e-6

_OPS = ("<", "<=", ">", ">=", "=")
_FLIP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": None}


class Expr:
    """Boolean formula node."""

    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()


@dataclass(frozen=True)
class BoolConst(Expr):
    value: bool

    def __repr__(self):
        return "TRUE" if self.value else "FALSE"


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class BoolVar(Expr):
    name: str


@dataclass(frozen=True)
class RealVar:
    name: str

    def lin(self) -> "Linear":
        return Linear(((self.name, 1.0),))


@dataclass(frozen=True)
class Const:
    value: float

    def lin(self) -> "Linear":
        return Linear((), float(self.value))


@dataclass(frozen=True)
class Linear:
    """``sum(c * var) + const``; duplicate names are merged and zero weights dropped."""

    terms: tuple[tuple[str, float], ...] = ()
    const: float = 0.0

    def __post_init__(self):
        merged: dict[str, float] = {}
        for name, c in self.terms:
            merged[name] = merged.get(name, 0.0) + float(c)
        terms = tuple((n, c) for n, c in merged.items() if c != 0.0)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "const", float(self.const))

    @classmethod
    def of(cls, coeffs: Mapping[str, float] | Iterable[tuple[str, float]], const: float = 0.0) -> "Linear":
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        return cls(tuple(items), const)

    def names(self):
        return [n for n, _ in self.terms]


def lin(x) -> Linear:
    if isinstance(x, Linear):
        return x
    if isinstance(x, (RealVar, Const)):
        return x.lin()
    if isinstance(x, str):
        return Linear(((x, 1.0),))
    return Linear((), float(x))


@dataclass(frozen=True)
class Compare(Expr):
    """``lhs op rhs`` with ``lhs`` linear and ``rhs`` a constant."""

    lhs: Linear
    op: str
    rhs: float = 0.0

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison {self.op!r}")
        object.__setattr__(self, "rhs", float(self.rhs))


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Expr):
    args: tuple[Expr, ...]

    def children(self):
        return self.args


@dataclass(frozen=True)
class Or(Expr):
    args: tuple[Expr, ...]

    def children(self):
        return self.args


@dataclass(frozen=True)
class Xor(Expr):
    """True when an odd number of ``args`` hold."""

    args: tuple[Expr, ...]

    def children(self):
        return self.args


@dataclass(frozen=True)
class Implies(Expr):
    lhs: Expr
    rhs: Expr

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class Iff(Expr):
    lhs: Expr
    rhs: Expr

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class CardinalitySum(Expr):
    """At most ``bound`` of the boolean variables are true."""

    flags: tuple[str, ...]
    bound: int


@dataclass(frozen=True)
class AbsRatioBound(Expr):
    """``|var| < threshold * max(|base|, eps_div)`` for a constant ``base``."""

    var: str
    base: float
    threshold: float
    eps_div: float = EPS_DIV

    @property
    def limit(self) -> float:
        return self.threshold * max(abs(self.base), self.eps_div)


# ---------------------------------------------------------------------------
# smart constructors

def cmp(lhs, op: str, rhs=0.0) -> Compare:
    """Comparison between two linear terms, normalised to ``linear op constant``."""
    a, b = lin(lhs), lin(rhs)
    if b.terms:
        a = Linear(a.terms + tuple((n, -c) for n, c in b.terms), a.const)
    return Compare(Linear(a.terms), op, b.const - a.const)


def conj(*args: Expr) -> Expr:
    out = []
    for a in _flatten(args):
        if isinstance(a, And):
            out.extend(a.args)
        elif a == FALSE:
            return FALSE
        elif a != TRUE:
            out.append(a)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(*args: Expr) -> Expr:
    out = []
    for a in _flatten(args):
        if isinstance(a, Or):
            out.extend(a.args)
        elif a == TRUE:
            return TRUE
        elif a != FALSE:
            out.append(a)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def xor(*args: Expr) -> Expr:
    out = []
    parity = False
    for a in _flatten(args):
        if isinstance(a, BoolConst):
            parity ^= a.value
        else:
            out.append(a)
    if not out:
        return BoolConst(parity)
    body = out[0] if len(out) == 1 else Xor(tuple(out))
    return negate(body) if parity else body


def negate(a: Expr) -> Expr:
    if isinstance(a, BoolConst):
        return BoolConst(not a.value)
    if isinstance(a, Not):
        return a.arg
    return Not(a)


def _flatten(args):
    for a in args:
        if isinstance(a, (list, tuple)):
            yield from _flatten(a)
        else:
            yield a


# ---------------------------------------------------------------------------
# traversal

def walk(e: Expr):
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def variables(exprs: Iterable[Expr]) -> dict[str, str]:
    """Variables in first-appearance order mapped to their sort ("Real" or "Bool")."""
    out: dict[str, str] = {}
    for e in exprs:
        for node in walk(e):
            if isinstance(node, BoolVar):
                out.setdefault(node.name, "Bool")
            elif isinstance(node, Compare):
                for n, _ in node.lhs.terms:
                    out.setdefault(n, "Real")
            elif isinstance(node, CardinalitySum):
                for n in node.flags:
                    out.setdefault(n, "Bool")
            elif isinstance(node, AbsRatioBound):
                out.setdefault(node.var, "Real")
    return out


def size(e: Expr) -> int:
    return sum(1 for _ in walk(e))


# ---------------------------------------------------------------------------
# evaluation

def _compare(v, op, r):
    if op == "<":
        return v < r
    if op == "<=":
        return v <= r
    if op == ">":
        return v > r
    if op == ">=":
        return v >= r
    return v == r


def evaluate_exact(e: Expr, env: Mapping[str, object]) -> bool:
    """Evaluate with rational arithmetic; every float constant is taken at its exact value."""
    def term(name):
        v = env[name]
        return v if isinstance(v, Fraction) else Fraction(v)

    def ev(node):
        if isinstance(node, BoolConst):
            return node.value
        if isinstance(node, BoolVar):
            return bool(env[node.name])
        if isinstance(node, Compare):
            v = sum((Fraction(c) * term(n) for n, c in node.lhs.terms), Fraction(node.lhs.const))
            return _compare(v, node.op, Fraction(node.rhs))
        if isinstance(node, Not):
            return not ev(node.arg)
        if isinstance(node, And):
            return all(ev(a) for a in node.args)
        if isinstance(node, Or):
            return any(ev(a) for a in node.args)
        if isinstance(node, Xor):
            return sum(ev(a) for a in node.args) % 2 == 1
        if isinstance(node, Implies):
            return (not ev(node.lhs)) or ev(node.rhs)
        if isinstance(node, Iff):
            return ev(node.lhs) == ev(node.rhs)
        if isinstance(node, CardinalitySum):
            return sum(bool(env[f]) for f in node.flags) <= node.bound
        if isinstance(node, AbsRatioBound):
            return abs(term(node.var)) < Fraction(node.limit)
        raise TypeError(f"unknown node {type(node).__name__}")

    return ev(e)


def evaluate(e: Expr, env: Mapping[str, object], tol: float = DELTA_STRICT) -> bool:
    """Float evaluation for a single assignment. Only ``=`` is relaxed, by ``tol`` relative."""
    out = evaluate_batch(e, {k: np.atleast_1d(np.asarray(v)) for k, v in env.items()}, tol=tol)
    return bool(out[0])


def evaluate_batch(e: Expr, env: Mapping[str, np.ndarray], tol: float = 0.0) -> np.ndarray:
    """Vectorised evaluation: every variable maps to an array of the same length."""
    n = len(next(iter(env.values()))) if env else 1

    def ev(node):
        if isinstance(node, BoolConst):
            return np.full(n, node.value)
        if isinstance(node, BoolVar):
            return np.asarray(env[node.name], dtype=bool)
        if isinstance(node, Compare):
            v = np.full(n, node.lhs.const)
            scale = np.full(n, abs(node.lhs.const) + abs(node.rhs))
            for name, c in node.lhs.terms:
                x = np.asarray(env[name], dtype=float)
                v = v + c * x
                scale = scale + np.abs(c * x)
            if node.op == "=":
                return np.abs(v - node.rhs) <= tol * np.maximum(scale, 1.0)
            return _compare(v, node.op, node.rhs)
        if isinstance(node, Not):
            return ~ev(node.arg)
        if isinstance(node, And):
            out = np.ones(n, dtype=bool)
            for a in node.args:
                out &= ev(a)
            return out
        if isinstance(node, Or):
            out = np.zeros(n, dtype=bool)
            for a in node.args:
                out |= ev(a)
            return out
        if isinstance(node, Xor):
            out = np.zeros(n, dtype=bool)
            for a in node.args:
                out ^= ev(a)
            return out
        if isinstance(node, Implies):
            return ~ev(node.lhs) | ev(node.rhs)
        if isinstance(node, Iff):
            return ev(node.lhs) == ev(node.rhs)
        if isinstance(node, CardinalitySum):
            total = np.zeros(n, dtype=np.int64)
            for f in node.flags:
                total += np.asarray(env[f], dtype=bool)
            return total <= node.bound
        if isinstance(node, AbsRatioBound):
            return np.abs(np.asarray(env[node.var], dtype=float)) < node.limit
        raise TypeError(f"unknown node {type(node).__name__}")

    return np.broadcast_to(ev(e), (n,)).copy()


# ---------------------------------------------------------------------------
# simplification against variable bounds

def simplify(e: Expr, bounds: Mapping[str, tuple[float, float]]) -> Expr:
    """Fold comparisons decided on the closed box ``bounds`` into constants.

    A comparison is folded only when interval arithmetic decides it with a
    margin that absorbs float rounding, so the result is equivalent to ``e``
    on every point of the box.
    """
    def fold(node):
        if isinstance(node, Compare):
            return _decide(node, bounds)
        if isinstance(node, Not):
            return negate(fold(node.arg))
        if isinstance(node, And):
            return conj(*[fold(a) for a in node.args])
        if isinstance(node, Or):
            return disj(*[fold(a) for a in node.args])
        if isinstance(node, Xor):
            return xor(*[fold(a) for a in node.args])
        if isinstance(node, Implies):
            lhs, rhs = fold(node.lhs), fold(node.rhs)
            if lhs == FALSE or rhs == TRUE:
                return TRUE
            if lhs == TRUE:
                return rhs
            return Implies(lhs, rhs)
        if isinstance(node, Iff):
            lhs, rhs = fold(node.lhs), fold(node.rhs)
            if isinstance(lhs, BoolConst):
                return rhs if lhs.value else negate(rhs)
            if isinstance(rhs, BoolConst):
                return lhs if rhs.value else negate(lhs)
            return Iff(lhs, rhs)
        return node

    return fold(e)


def _decide(node: Compare, bounds) -> Expr:
    lo = hi = node.lhs.const - node.rhs
    mag = abs(node.lhs.const) + abs(node.rhs)
    for name, c in node.lhs.terms:
        if name not in bounds:
            return node
        a, b = bounds[name]
        lo += min(c * a, c * b)
        hi += max(c * a, c * b)
        mag += abs(c) * max(abs(a), abs(b))
    margin = 1e-9 * max(mag, 1.0)
    op = node.op
    if op in ("<", "<="):
        lo, hi = -hi, -lo
        op = ">" if op == "<" else ">="
    if op in (">", ">="):
        if lo > margin:
            return TRUE
        if hi < -margin:
            return FALSE
        return node
    if lo > margin or hi < -margin:
        return FALSE
    return node


# ---------------------------------------------------------------------------
# rendering

def fmt_float(x: float) -> str:
    return repr(float(x))


def fmt_rational(x: float) -> str:
    """Exact SMT-LIB real literal for a float."""
    q = Fraction(float(x))
    neg = q < 0
    q = abs(q)
    s = f"{q.numerator}.0" if q.denominator == 1 else f"(/ {q.numerator}.0 {q.denominator}.0)"
    return f"(- {s})" if neg else s


def render(e: Expr, num: Callable[[float], str] = fmt_float, lower_xor: bool = False) -> str:
    """S-expression text. With ``lower_xor`` Xor becomes a balanced tree of ``distinct``."""
    def linear(t: Linear):
        parts = []
        for name, c in t.terms:
            parts.append(name if c == 1.0 else f"(* {num(c)} {name})")
        if t.const != 0.0 or not parts:
            parts.append(num(t.const))
        return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"

    def balanced(items):
        if len(items) == 1:
            return items[0]
        mid = len(items) // 2
        return f"(distinct {balanced(items[:mid])} {balanced(items[mid:])})"

    def r(node):
        if isinstance(node, BoolConst):
            return "true" if node.value else "false"
        if isinstance(node, BoolVar):
            return node.name
        if isinstance(node, Compare):
            return f"({node.op} {linear(node.lhs)} {num(node.rhs)})"
        if isinstance(node, Not):
            return f"(not {r(node.arg)})"
        if isinstance(node, And):
            return "(and " + " ".join(r(a) for a in node.args) + ")"
        if isinstance(node, Or):
            return "(or " + " ".join(r(a) for a in node.args) + ")"
        if isinstance(node, Xor):
            if lower_xor:
                return balanced([r(a) for a in node.args])
            return "(xor " + " ".join(r(a) for a in node.args) + ")"
        if isinstance(node, Implies):
            return f"(=> {r(node.lhs)} {r(node.rhs)})"
        if isinstance(node, Iff):
            return f"(= {r(node.lhs)} {r(node.rhs)})"
        if isinstance(node, CardinalitySum):
            if not node.flags:
                return "true" if node.bound >= 0 else "false"
            total = " ".join(f"(ite {f} 1.0 0.0)" for f in node.flags)
            total = total if len(node.flags) == 1 else f"(+ {total})"
            return f"(<= {total} {num(node.bound)})"
        if isinstance(node, AbsRatioBound):
            lim = num(node.limit)
            return f"(and (< {node.var} {lim}) (< (- {node.var}) {lim}))"
        raise TypeError(f"unknown node {type(node).__name__}")

    return r(e)
