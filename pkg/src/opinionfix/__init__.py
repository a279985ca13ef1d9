"""Weak-selection fixation of binary opinions on weighted networks."""
from .coalescence import (
    CONVENTIONS,
    LINEAGE,
    PAPER_LITERAL,
    PairTimes,
    TableCache,
    TripleTimes,
    pair_times,
    simulate_coalescence,
    triple_times,
)
from .dynamics import (
    SimEstimate,
    estimate_fixation,
    exact_fixation,
    imitation_prob,
    run_to_fixation,
    weak_slope_oracle,
)
from .errors import OpinionFixError
from .model import GameScores
from .netgraph import WeightedGraph, barabasi_albert, complete, from_edge_list, newman_watts
from .theory import (
    WeakSelectionReport,
    critical_ratio_ad,
    critical_ratio_bc,
    dprime_expectation,
    dprime_state,
    favored,
)

__version__ = "0.1.0"
