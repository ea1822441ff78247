"""Incomplete local search: random sparse starts, then coordinate descent on a violation score."""
from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from ..cir.csp import CSP, NonZero, ReluOf, complete_env
from ..cir.expr import (AbsRatioBound, And, BoolConst, BoolVar, CardinalitySum, Compare, Iff, Implies,
                        Linear, Not, Or, Xor)
from ..errors import NoBoxBounds

_BIG = 1e12


def _violation(e, env, n):
    """Return (cost to make true, cost to make false), each zero when already satisfied."""
    if isinstance(e, BoolConst):
        z = np.zeros(n)
        inf = np.full(n, _BIG)
        return (z, inf) if e.value else (inf, z)
    if isinstance(e, BoolVar):
        v = np.asarray(env[e.name], dtype=bool)
        # a flag is only changed through its definition; charge a unit step
        return np.where(v, 0.0, 1.0), np.where(v, 1.0, 0.0)
    if isinstance(e, Compare):
        s = np.full(n, e.lhs.const - e.rhs)
        scale = abs(e.lhs.const) + abs(e.rhs)
        for name, c in e.lhs.terms:
            x = env[name]
            s = s + c * x
            scale = scale + np.abs(c * x)
        gap = 1e-9 * np.maximum(scale, 1.0)
        if e.op != "=":
            if e.op in ("<", "<="):
                s = -s
            strict = e.op in (">", "<")
            vt = np.maximum(0.0, gap - s) if strict else np.maximum(0.0, -s)
            vf = np.maximum(0.0, s) if strict else np.maximum(0.0, s + gap)
            return vt, vf
        # defined variables carry float rounding; the exact check settles equality later
        near = np.abs(s) <= gap
        return np.where(near, 0.0, np.abs(s)), np.where(near, gap, 0.0)
    if isinstance(e, Not):
        vt, vf = _violation(e.arg, env, n)
        return vf, vt
    if isinstance(e, (And, Or)):
        ts, fs = zip(*(_violation(a, env, n) for a in e.args))
        t = np.sum(ts, axis=0)
        f = np.min(fs, axis=0)
        return (t, f) if isinstance(e, And) else (np.min(ts, axis=0), np.sum(fs, axis=0))
    if isinstance(e, Xor):
        ts, fs = zip(*(_violation(a, env, n) for a in e.args))
        ts, fs = np.array(ts), np.array(fs)
        truth = ts == 0
        odd = truth.sum(axis=0) % 2 == 1
        flip = np.where(truth, fs, ts).min(axis=0)
        return np.where(odd, 0.0, flip), np.where(odd, flip, 0.0)
    if isinstance(e, Implies):
        lt, lf = _violation(e.lhs, env, n)
        rt, rf = _violation(e.rhs, env, n)
        return np.minimum(lf, rt), lt + rf
    if isinstance(e, Iff):
        lt, lf = _violation(e.lhs, env, n)
        rt, rf = _violation(e.rhs, env, n)
        same = (lt == 0) == (rt == 0)
        cost = np.minimum(np.where(lt == 0, lf, lt), np.where(rt == 0, rf, rt))
        return np.where(same, 0.0, cost), np.where(same, cost, 0.0)
    if isinstance(e, CardinalitySum):
        count = np.zeros(n)
        for f in e.flags:
            count = count + np.asarray(env[f], dtype=bool)
        return np.maximum(0.0, count - e.bound), np.maximum(0.0, e.bound + 1 - count)
    if isinstance(e, AbsRatioBound):
        x = np.abs(env[e.var])
        return np.maximum(0.0, x - e.limit * (1 - 1e-9)), np.maximum(0.0, e.limit - x)
    raise TypeError(f"unknown node {type(e).__name__}")


def _expand(csp: CSP, free: dict) -> dict:
    env = dict(free)
    for name, d in csp.definitions.items():
        if isinstance(d, Linear):
            v = d.const
            for n_, c in d.terms:
                v = v + c * env[n_]
            env[name] = v
        elif isinstance(d, ReluOf):
            env[name] = np.maximum(env[d.pre], 0.0)
        elif isinstance(d, NonZero):
            env[name] = env[d.var] != 0
    return env


def _score(csp, free, n):
    env = _expand(csp, free)
    total = np.zeros(n)
    for a in csp.assertions:
        total += _violation(a, env, n)[0]
    return total


def builtin_search(csp: CSP, budget: float = 20.0, seed: int = 0, starts: int = 2000,
                   rounds: int = 30, grid: int = 41):
    """Look for a satisfying assignment inside ``csp.bounds``.

    Returns the exact assignment dict on success or None. ``budget`` is a
    wall-clock limit in seconds.
    """
    free = [n for n, s in csp.variables.items() if s == "Real" and n not in csp.definitions]
    missing = [n for n in free if n not in csp.bounds]
    if missing:
        raise NoBoxBounds(f"no box bounds for {missing[:5]}")
    free_bool = [n for n, s in csp.variables.items() if s == "Bool" and n not in csp.definitions]
    if free_bool:
        raise NoBoxBounds(f"undefined boolean variables {free_bool[:5]}")
    deadline = time.monotonic() + budget
    rng = np.random.default_rng(seed)
    lo = np.array([csp.bounds[n][0] for n in free])
    hi = np.array([csp.bounds[n][1] for n in free])
    # keep strictly inside the box
    shrink = 1e-6 * (hi - lo)
    lo, hi = lo + shrink, hi - shrink
    k = len(free)
    max_support = int(csp.metadata.get("max_sensors", k))
    max_support = max(0, min(max_support, k))

    def score(points):
        return _score(csp, {n: points[:, i] for i, n in enumerate(free)}, len(points))

    # sparse random starts: zero on all but a random subset of coordinates
    pts = np.zeros((starts + 1, k))
    for r in range(1, starts + 1):
        m = rng.integers(1, max_support + 1) if max_support else 0
        idx = rng.choice(k, size=m, replace=False)
        pts[r, idx] = rng.uniform(lo[idx], hi[idx])
    s = score(pts)
    order = np.argsort(s, kind="stable")[:8]
    for r in order:
        x = pts[r].copy()
        best = s[r]
        for _ in range(rounds):
            if best == 0 or time.monotonic() > deadline:
                break
            improved = False
            for i in rng.permutation(k):
                cand = np.repeat(x[None, :], grid + 1, axis=0)
                cand[:grid, i] = np.linspace(lo[i], hi[i], grid)
                cand[grid, i] = 0.0
                cs = score(cand)
                b = int(np.argmin(cs))
                if cs[b] < best:
                    best = cs[b]
                    x = cand[b]
                    improved = True
                if best == 0:
                    break
            if not improved:
                break
        if best == 0:
            env = complete_env(csp, {n: Fraction(float(x[i])) for i, n in enumerate(free)})
            if not csp.check_exact(env):
                return env
        if time.monotonic() > deadline:
            break
    return None
