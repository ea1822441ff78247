"""Backends, results and the solve entry point."""
from __future__ import annotations

import os
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from fractions import Fraction

from ..cir.csp import CSP
from ..errors import BackendUnavailable, MalformedModel, ParseError
from .search import builtin_search
from .smtlib import emit_smtlib, parse_model

SOLVER_ENV = "SHSTHREAT_SOLVER"
DEFAULT_TIMEOUT = 300.0

SAT, UNSAT, UNKNOWN = "sat", "unsat", "unknown"


@dataclass(frozen=True)
class SolveResult:
    status: str
    assignment: dict = field(default_factory=dict)  # name -> Fraction | bool, only for sat
    reason: str | None = None                       # for unknown: timeout | incomplete-backend | backend-error
    backend: str = ""
    seconds: float = 0.0

    @property
    def is_sat(self) -> bool:
        return self.status == SAT

    @property
    def is_unsat(self) -> bool:
        return self.status == UNSAT

    @property
    def is_unknown(self) -> bool:
        return self.status == UNKNOWN


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    complete: bool
    timeout: float = DEFAULT_TIMEOUT
    solver_path: str | None = None
    seed: int = 0

    def describe(self) -> dict:
        return {"name": self.name, "complete": self.complete, "timeout": self.timeout,
                "solver_path": self.solver_path, "seed": self.seed}


def external_backend(solver_path: str | None = None, timeout: float = DEFAULT_TIMEOUT) -> BackendDescriptor:
    return BackendDescriptor("smtlib", True, timeout, solver_path)


def builtin_backend(timeout: float = 20.0, seed: int = 0) -> BackendDescriptor:
    return BackendDescriptor("builtin", False, timeout, None, seed)


def find_solver(path: str | None = None) -> str:
    """Resolve the external solver: explicit path, then the environment variable, then ``z3`` on PATH."""
    cand = path or os.environ.get(SOLVER_ENV) or shutil.which("z3")
    if not cand:
        raise BackendUnavailable(f"no SMT solver found; set {SOLVER_ENV} or install z3")
    resolved = shutil.which(cand) or (cand if os.path.isfile(cand) else None)
    if not resolved:
        raise BackendUnavailable(f"solver {cand!r} not found")
    return resolved


def backend_by_name(name: str, solver_path: str | None = None, timeout: float | None = None,
                    seed: int = 0) -> BackendDescriptor:
    if name in ("smtlib", "z3", "external"):
        return external_backend(solver_path, DEFAULT_TIMEOUT if timeout is None else timeout)
    if name == "builtin":
        return builtin_backend(20.0 if timeout is None else timeout, seed)
    raise ValueError(f"unknown backend {name!r}")


def _check(csp: CSP, assignment: dict, backend: str) -> dict:
    env = {}
    for name, sort in csp.variables.items():
        if name in assignment:
            env[name] = assignment[name]
        else:
            # solvers may omit variables whose value does not matter
            env[name] = False if sort == "Bool" else Fraction(0)
    bad = csp.check_exact(env)
    if bad:
        raise MalformedModel(f"{backend} model violates assertions {bad[:5]}")
    return env


def solve(csp: CSP, backend: BackendDescriptor) -> SolveResult:
    t0 = time.perf_counter()
    if backend.name == "builtin":
        env = builtin_search(csp, budget=backend.timeout, seed=backend.seed)
        dt = time.perf_counter() - t0
        if env is None:
            return SolveResult(UNKNOWN, reason="incomplete-backend", backend="builtin", seconds=dt)
        return SolveResult(SAT, _check(csp, env, "builtin"), backend="builtin", seconds=dt)
    if backend.name != "smtlib":
        raise BackendUnavailable(f"unknown backend {backend.name!r}")
    solver = find_solver(backend.solver_path)
    script = emit_smtlib(csp)
    ms = max(1, int(backend.timeout * 1000))
    try:
        proc = subprocess.run([solver, "-in", "-smt2", f"-t:{ms}"], input=script, capture_output=True,
                              text=True, timeout=backend.timeout + 10)
    except subprocess.TimeoutExpired:
        return SolveResult(UNKNOWN, reason="timeout", backend="smtlib", seconds=time.perf_counter() - t0)
    except OSError as exc:
        raise BackendUnavailable(f"cannot run {solver}: {exc}") from exc
    dt = time.perf_counter() - t0
    out = proc.stdout.lstrip()
    verdict, _, rest = out.partition("\n")
    verdict = verdict.strip()
    if verdict == "unsat":
        return SolveResult(UNSAT, backend="smtlib", seconds=dt)
    if verdict == "sat":
        try:
            model = parse_model(rest)
        except ParseError as exc:
            raise MalformedModel(f"cannot parse solver model: {exc}") from exc
        return SolveResult(SAT, _check(csp, model, "smtlib"), backend="smtlib", seconds=dt)
    if verdict in ("unknown", "timeout"):
        return SolveResult(UNKNOWN, reason="timeout", backend="smtlib", seconds=dt)
    return SolveResult(UNKNOWN, reason="backend-error", backend="smtlib", seconds=dt)
