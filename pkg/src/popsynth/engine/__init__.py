"""Household assembly: persons, families and households for one SA2."""

from .heuristics import Heuristics, Rho
from .invariants import check_population
from .pools import FeasibilityError, PoolSet, SynthesisReport
from .synthesize import Population, finalize, sa2_rng, synthesize_sa2

__all__ = [
    "FeasibilityError",
    "Heuristics",
    "PoolSet",
    "Population",
    "Rho",
    "SynthesisReport",
    "check_population",
    "finalize",
    "sa2_rng",
    "synthesize_sa2",
]
