"""Constraint-satisfaction problem container."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .expr import TRUE, And, Expr, Linear, evaluate_exact, render, variables


@dataclass(frozen=True)
class ReluOf:
    """``post = max(pre, 0)``."""

    pre: str


@dataclass(frozen=True)
class NonZero:
    """Boolean flag that holds exactly when ``var`` is nonzero."""

    var: str


# name -> Linear (value is that affine function of other variables), ReluOf or NonZero
Definition = Linear | ReluOf | NonZero


@dataclass(frozen=True, eq=False)
class CSP:
    assertions: tuple[Expr, ...]
    variables: dict = field(default_factory=dict)  # name -> "Real" | "Bool", declaration order
    metadata: dict = field(default_factory=dict)
    # functional dependencies between variables, in evaluation order
    definitions: dict = field(default_factory=dict)
    # closed box on some real variables; every point outside violates an assertion
    bounds: dict = field(default_factory=dict)

    @classmethod
    def build(cls, assertions, metadata=None, definitions=None, bounds=None) -> "CSP":
        flat = []
        for a in assertions:
            flat.extend(a.args if isinstance(a, And) else (a,))
        flat = [a for a in flat if a != TRUE]
        flat = tuple(flat)
        return cls(flat, variables(flat), dict(metadata or {}), dict(definitions or {}), dict(bounds or {}))

    def check_exact(self, env: Mapping[str, object]) -> list[int]:
        """Indices of assertions that fail under exact evaluation."""
        return [i for i, a in enumerate(self.assertions) if not evaluate_exact(a, env)]

    def dump(self) -> str:
        """Debug text: declarations, then one assertion per line."""
        lines = [f"(declare-const {n} {s})" for n, s in self.variables.items()]
        lines += [f"(assert {render(a)})" for a in self.assertions]
        return "\n".join(lines) + "\n"


def csp_stats(csp: CSP) -> dict:
    return {"variable_count": len(csp.variables), "clause_count": len(csp.assertions)}


def complete_env(csp: CSP, env: Mapping[str, object]) -> dict:
    """Fill defined variables from the free ones using exact arithmetic."""
    out = dict(env)
    for name, d in csp.definitions.items():
        if isinstance(d, Linear):
            out[name] = sum((Fraction(c) * Fraction(out[n]) for n, c in d.terms), Fraction(d.const))
        elif isinstance(d, ReluOf):
            out[name] = max(Fraction(out[d.pre]), Fraction(0))
        elif isinstance(d, NonZero):
            out[name] = Fraction(out[d.var]) != 0
    return out
