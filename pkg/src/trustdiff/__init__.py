"""Coordination-game diffusion under limited trust.

Simulation on explicit graphs (:mod:`.dynamics`), the equivalent threshold
model (:mod:`.threshold`) and a mean-field absorbing Markov chain
(:mod:`.meanfield`).
"""

from .game import A, B, LocalView, PayoffMatrix, Sensitivity, TrustProfile
from .graph import DegreeSequence, Graph, gen_configuration, gen_random_regular, read_edge_list
from .dynamics import (Configuration, DynamicsParams, Trajectory, allocate_seeds, br_lte_choice,
                       lte_choice_prob, ne_choice_prob, run_async, run_sync_br)
from .threshold import q_star, run_sync_lt
from .meanfield import ChainSpec, build_chain, closed_form_1d, seed_set, solve_absorption

__version__ = "0.1.0"

__all__ = [
    "A", "B", "LocalView", "PayoffMatrix", "Sensitivity", "TrustProfile",
    "DegreeSequence", "Graph", "gen_configuration", "gen_random_regular", "read_edge_list",
    "Configuration", "DynamicsParams", "Trajectory", "allocate_seeds", "br_lte_choice",
    "lte_choice_prob", "ne_choice_prob", "run_async", "run_sync_br",
    "q_star", "run_sync_lt",
    "ChainSpec", "build_chain", "closed_form_1d", "seed_set", "solve_absorption",
]
