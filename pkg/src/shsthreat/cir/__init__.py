"""Constraint IR and encoders."""
from .csp import CSP, NonZero, ReluOf, complete_env, csp_stats
from .encode import (encode_attack, encode_consistency, encode_dt, encode_lr, encode_membership,
                     encode_model, encode_nn, measurement_vars)
from .expr import (DELTA_STRICT, EPS_DIV, FALSE, TRUE, AbsRatioBound, And, BoolConst, BoolVar,
                   CardinalitySum, Compare, Const, Expr, Iff, Implies, Linear, Not, Or, RealVar, Xor,
                   cmp, conj, disj, evaluate, evaluate_batch, evaluate_exact, negate, render, simplify,
                   xor)

__all__ = [
    "CSP", "NonZero", "ReluOf", "complete_env", "csp_stats", "encode_attack", "encode_consistency",
    "encode_dt", "encode_lr", "encode_membership", "encode_model", "encode_nn", "measurement_vars",
    "DELTA_STRICT", "EPS_DIV", "FALSE", "TRUE", "AbsRatioBound", "And", "BoolConst", "BoolVar",
    "CardinalitySum", "Compare", "Const", "Expr", "Iff", "Implies", "Linear", "Not", "Or", "RealVar",
    "Xor", "cmp", "conj", "disj", "evaluate", "evaluate_batch", "evaluate_exact", "negate", "render",
    "simplify", "xor",
]
