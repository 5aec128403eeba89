"""Graph-based security analysis for DC power-system state estimation."""

__version__ = "0.1.0"

from .attack import AttackInfeasible, AttackPlan, AttackTarget, min_cut_attack, smallest_attack_meter_set
from .caseio import CaseSyntaxError, parse_case, parse_meters
from .estimator import (BddConfig, EstimatorConfig, UnobservableError, bdd_check, estimate_and_check,
                        forge_attack, verify_undetectable, wls_estimate)
from .grid import (Bus, GridError, Jacobian, Line, Meter, MeterSet, PowerNetwork, build_jacobian,
                   measured_subgraph)
from .observability import (Emst, construct_emst, find_basic_set, is_observable,
                            subnetwork_observable, validate_emst)
from .protection import ProtectionInfeasible, ProtectionPlan, protect_exact, protect_tph, verify_protection


def fixture_path(name: str):
    """Path of a bundled case file (``ieee14.json``, ``corner.json`` ...)."""
    from importlib.resources import files

    return files(__package__) / "fixtures" / name


__all__ = [
    "AttackInfeasible", "AttackPlan", "AttackTarget", "BddConfig", "Bus", "CaseSyntaxError", "Emst",
    "EstimatorConfig", "GridError", "Jacobian", "Line", "Meter", "MeterSet", "PowerNetwork",
    "ProtectionInfeasible", "ProtectionPlan", "UnobservableError", "bdd_check", "build_jacobian",
    "construct_emst", "estimate_and_check", "find_basic_set", "fixture_path", "forge_attack",
    "is_observable", "measured_subgraph", "min_cut_attack", "parse_case", "parse_meters",
    "protect_exact", "protect_tph", "smallest_attack_meter_set", "subnetwork_observable",
    "validate_emst", "verify_protection", "verify_undetectable", "wls_estimate",
]
