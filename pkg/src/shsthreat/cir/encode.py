"""Translate classifiers, cluster atlases and attacker capabilities into constraints."""
from __future__ import annotations

import logging

import numpy as np

from ..adm.atlas import ClusterAtlas, consistent
from ..adm.geometry import Polygon
from ..data import PatientRecord
from ..dcm import DecisionTreeModel, LogisticRegressionModel, NeuralNetworkModel
from ..errors import (BaselineInconsistent, InvalidCapability, InvalidGoal, UnknownLabel,
                      UnsupportedActivation)
from .csp import CSP, NonZero, ReluOf
from .expr import (EPS_DIV, FALSE, TRUE, AbsRatioBound, BoolVar, CardinalitySum, Expr, Iff,
                   Linear, cmp, conj, disj, negate, simplify, xor)

log = logging.getLogger(__name__)


def measurement_vars(n_s: int, prefix: str = "Pbar") -> list[str]:
    return [f"{prefix}_{s}" for s in range(n_s)]


def _check_label(j, n_l):
    if not 0 <= j < n_l:
        raise UnknownLabel(f"label {j} outside 0..{n_l - 1}")


def encode_dt(model: DecisionTreeModel, vars, j: int) -> Expr:
    """Disjunction over the paths ending in ``j`` of their edge rules.

    Returns FALSE when no leaf carries ``j``.
    """
    _check_label(j, model.n_l)
    paths = [rules for rules, label in model.paths() if label == j]
    if not paths:
        log.warning("no leaf predicts label %d; encoding as FALSE", j)
        return FALSE
    return disj(*[conj(*[cmp(vars[a], "<=" if left else ">", thr) for a, thr, left in rules])
                  for rules in paths])


def _dominance(logits: list[Linear], j: int) -> Expr:
    """Output ``j`` wins the argmax, ties going to the lowest index."""
    out = []
    for g, lg in enumerate(logits):
        if g == j:
            continue
        diff = Linear(logits[j].terms + tuple((n, -c) for n, c in lg.terms), logits[j].const - lg.const)
        out.append(cmp(diff, ">" if g < j else ">="))
    return conj(*out)


def encode_lr(model: LogisticRegressionModel, vars, j: int) -> Expr:
    _check_label(j, model.n_l)
    W, b = model.raw_coefficients()
    logits = [Linear(tuple(zip(vars, W[g])), b[g]) for g in range(model.n_l)]
    return _dominance(logits, j)


def encode_nn(model: NeuralNetworkModel, vars, j: int, prefix: str = "nn",
              definitions: dict | None = None) -> Expr:
    """Exact rectifier encoding with a (pre, post) variable pair per hidden node.

    When ``definitions`` is given it receives each auxiliary variable's
    defining function of earlier variables.
    """
    if model.activation != "relu":
        raise UnsupportedActivation(model.activation)
    _check_label(j, model.n_l)
    layers = model.raw_layers()
    parts = []
    inputs = list(vars)
    for m, (W, b) in enumerate(layers[:-1]):
        posts = []
        for i in range(W.shape[0]):
            pre, post = f"{prefix}_pre_{m}_{i}", f"{prefix}_post_{m}_{i}"
            affine = Linear(tuple(zip(inputs, W[i])), b[i])
            parts.append(cmp(pre, "=", affine))
            parts.append(disj(conj(cmp(pre, "<=", 0.0), cmp(post, "=", 0.0)),
                              conj(cmp(pre, ">", 0.0), cmp(post, "=", pre))))
            if definitions is not None:
                definitions[pre] = affine
                definitions[post] = ReluOf(pre)
            posts.append(post)
        inputs = posts
    W, b = layers[-1]
    logits = [Linear(tuple(zip(inputs, W[g])), b[g]) for g in range(W.shape[0])]
    parts.append(_dominance(logits, j))
    return conj(*parts)


def encode_model(model, vars, j: int, definitions: dict | None = None) -> Expr:
    if isinstance(model, DecisionTreeModel):
        return encode_dt(model, vars, j)
    if isinstance(model, LogisticRegressionModel):
        return encode_lr(model, vars, j)
    if isinstance(model, NeuralNetworkModel):
        return encode_nn(model, vars, j, definitions=definitions)
    raise TypeError(f"cannot encode {type(model).__name__}")


def encode_membership(poly: Polygon, var_x: str, var_y: str) -> Expr:
    """Odd-crossing test: Xor over edges of (y in edge range) and (point strictly left of edge)."""
    terms = []
    for seg in poly.segments:
        if seg.horizontal:
            terms.append(FALSE)
            continue
        cx, cy, c0 = seg.left_coefficients()
        terms.append(conj(cmp(var_y, ">", seg.ya), cmp(var_y, "<=", seg.yb),
                          cmp(Linear(((var_x, cx), (var_y, cy)), c0), ">", 0.0)))
    return xor(*terms)


def encode_consistency(atlas: ClusterAtlas, j: int, vars) -> Expr:
    _check_label(j, atlas.schema.n_l)
    parts = []
    for a, b in atlas.pairs():
        e = atlas.entry(j, a, b)
        if e.vacuous:
            log.warning("label %d pair (%d, %d) has no clusters; no constraint", j, a, b)
            continue
        parts.append(disj(*[encode_membership(p, vars[a], vars[b]) for p in e.polygons]))
    if not parts:
        log.warning("label %d: every pair is vacuous; consistency is TRUE", j)
    return conj(*parts)


def _box_prunes(poly: Polygon, box_a, box_b) -> bool:
    x0, y0, x1, y1 = poly.bounds
    return box_a[1] < x0 or box_a[0] > x1 or box_b[1] < y0 or box_b[0] > y1


def encode_attack(patient: PatientRecord, j: int, j_bar: int, capability, dcm, atlas: ClusterAtlas,
                  prune: bool = True) -> CSP:
    """Constraints for altering ``patient`` so ``dcm`` says ``j_bar`` and the atlas agrees.

    ``capability`` needs ``max_sensors`` and ``threshold``. With ``prune``
    the model and atlas formulas are simplified on the box the threshold
    allows; the box itself is asserted, so the CSP is unchanged in meaning.
    """
    P = np.asarray(patient.measurements, dtype=float)
    n_s = len(P)
    if j_bar == j:
        raise InvalidGoal("target label equals the source label")
    if capability.max_sensors < 0 or not capability.threshold > 0:
        raise InvalidCapability(f"bad capability {capability!r}")
    _check_label(j_bar, atlas.schema.n_l)
    if dcm.predict(P) != j:
        raise BaselineInconsistent(f"model predicts {dcm.predict(P)}, not {j}")
    if not consistent(P, j, atlas):
        raise BaselineInconsistent(f"baseline is not consistent with label {j}")

    pbar = measurement_vars(n_s)
    delta = measurement_vars(n_s, "dP")
    flags = measurement_vars(n_s, "a")
    definitions: dict = {}
    bounds = {}
    assertions: list[Expr] = []
    for s in range(n_s):
        assertions.append(cmp(Linear(((pbar[s], 1.0), (delta[s], -1.0))), "=", P[s]))
        definitions[pbar[s]] = Linear(((delta[s], 1.0),), P[s])
    for s in range(n_s):
        assertions.append(Iff(BoolVar(flags[s]), negate(cmp(delta[s], "=", 0.0))))
        definitions[flags[s]] = NonZero(delta[s])
    assertions.append(CardinalitySum(tuple(flags), int(capability.max_sensors)))
    for s in range(n_s):
        bound = AbsRatioBound(delta[s], float(P[s]), float(capability.threshold), EPS_DIV)
        assertions.append(bound)
        # widened a little so float rounding never makes the box tighter than the constraint
        lim = bound.limit * (1 + 1e-9)
        pad = 1e-12 * abs(P[s])
        bounds[delta[s]] = (-lim, lim)
        bounds[pbar[s]] = (P[s] - lim - pad, P[s] + lim + pad)

    model_expr = encode_model(dcm, pbar, j_bar, definitions)
    cons = []
    for a, b in atlas.pairs():
        e = atlas.entry(j_bar, a, b)
        if e.vacuous:
            log.warning("label %d pair (%d, %d) has no clusters; no constraint", j_bar, a, b)
            continue
        polys = e.polygons
        if prune:
            polys = [p for p in polys if not _box_prunes(p, bounds[pbar[a]], bounds[pbar[b]])]
        cons.append(disj(*[encode_membership(p, pbar[a], pbar[b]) for p in polys]))
    cons_expr = conj(*cons)
    if prune:
        model_expr = simplify(model_expr, bounds)
        cons_expr = simplify(cons_expr, bounds)
    assertions += [model_expr, cons_expr]
    meta = {"patient": list(map(float, P)), "source": int(j), "target": int(j_bar),
            "max_sensors": int(capability.max_sensors), "threshold": float(capability.threshold),
            "model": dcm.kind, "pruned": bool(prune)}
    return CSP.build(assertions, meta, _ordered(definitions, n_s, pbar, delta), bounds)


def _ordered(defs, n_s, pbar, delta):
    # measurements first, then flags, then network auxiliaries in layer order
    order = {name: i for i, name in enumerate(pbar)}
    return dict(sorted(defs.items(), key=lambda kv: order.get(kv[0], n_s)))
