"""Attack feasibility analysis."""
from .attack import (DEFAULT_THRESHOLDS, FEASIBLE, INFEASIBLE, UNKNOWN, AttackerCapability, AttackMatrix,
                     AttackResult, AttackVector, Escalation, FeasibilityGrid, ResiliencyReport, attack_matrix,
                     default_ladder, escalate, feasibility_grid, find_attack, monotonicity_violations,
                     perturbation_falsification, resiliency, sensor_frequency, validate_attack)

__all__ = [
    "DEFAULT_THRESHOLDS", "FEASIBLE", "INFEASIBLE", "UNKNOWN", "AttackerCapability", "AttackMatrix",
    "AttackResult", "AttackVector", "Escalation", "FeasibilityGrid", "ResiliencyReport", "attack_matrix",
    "default_ladder", "escalate", "feasibility_grid", "find_attack", "monotonicity_violations",
    "perturbation_falsification", "resiliency", "sensor_frequency", "validate_attack",
]
