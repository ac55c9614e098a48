"""Experiment registry.

Every experiment is a function of keyword parameters plus ``seed`` and
``workers`` returning an :class:`ExperimentResult`.  ``PARAMETERS`` lists
the configurable keys of each one with their types, in the order the CLI
shows them.
"""
from __future__ import annotations

from dataclasses import dataclass

from .conditions import check_condition_G, check_condition_R, check_condition_V, check_thinness
from .constants import estimate_intersection_decay, estimate_nu, estimate_rho_constants, pivotal_statistics
from .core import (SCHEMA_VERSION, EstimateReport, ExperimentResult, ModelConstants, PlotData, Table,
                   replica_rng, run_replicas)
from .scaling import scaling_exponents


@dataclass(frozen=True)
class Experiment:
    name: str
    run: object
    description: str
    parameters: dict  # key -> "int" | "float" | "str" | "bool" | "ints" | "float?" | "interval?"


REGISTRY = {e.name: e for e in [
    Experiment("estimate-rho", estimate_rho_constants,
               "resistance and distance per backbone step between pivotal points",
               {"law": "str", "d": "int", "W": "int", "bush_depth_cap": "int", "replicas": "int"}),
    Experiment("estimate-nu", estimate_nu, "edge and vertex volume growth along the tree order",
               {"law": "str", "d": "int", "n": "int", "replicas": "int", "points": "int"}),
    Experiment("condition-R", check_condition_R, "resistance over graph distance across tree sizes",
               {"law": "str", "d": "int", "sizes": "ints", "replicas": "int", "rho": "interval?"}),
    Experiment("condition-V", check_condition_V, "skeleton volume against length discrepancy",
               {"law": "str", "d": "int", "sizes": "ints", "K": "int", "replicas": "int", "nu": "float?",
                "nu_replicas": "int"}),
    Experiment("condition-G", check_condition_G, "rescaled skeleton geometry against the continuum tree",
               {"law": "str", "d": "int", "sizes": "ints", "K": "int", "replicas": "int", "sigma_g": "float?",
                "mesh": "int", "rho_replicas": "int"}),
    Experiment("thinness", check_thinness, "thinness rates and sausage diameters",
               {"law": "str", "d": "int", "sizes": "ints", "Ks": "ints", "replicas": "int"}),
    Experiment("pivotal", pivotal_statistics, "pivotal point frequency and gap tail",
               {"law": "str", "d": "int", "W": "int", "bush_depth_cap": "int", "replicas": "int"}),
    Experiment("intersection-decay", estimate_intersection_decay, "meeting probability of two distant bushes",
               {"law": "str", "d": "int", "separations": "ints", "replicas": "int", "bush_depth_cap": "int",
                "cap_sensitivity": "bool"}),
    Experiment("scaling-exponents", scaling_exponents, "return probability and displacement exponents",
               {"law": "str", "d": "int", "n": "int", "graphs": "int", "walkers": "int", "steps": "int",
                "return_window": "ints", "displacement_window": "ints"}),
]}


def get_experiment(name: str) -> Experiment:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown experiment {name!r}; available: {', '.join(REGISTRY)}") from None


__all__ = [
    "REGISTRY", "SCHEMA_VERSION", "EstimateReport", "Experiment", "ExperimentResult", "ModelConstants", "PlotData",
    "Table", "check_condition_G", "check_condition_R", "check_condition_V", "check_thinness",
    "estimate_intersection_decay", "estimate_nu", "estimate_rho_constants", "get_experiment", "pivotal_statistics",
    "replica_rng", "run_replicas", "scaling_exponents",
]
