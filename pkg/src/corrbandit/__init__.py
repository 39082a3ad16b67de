"""Cooperative multi-objective bandit simulator under corruption and verification budgets."""

from .adversary import AdversaryChoice, BudgetLedger, CorruptionEvent
from .env import GapProfile, Instance, compute_gaps, generate_instance
from .policy import Certificate, Dims, PolicyConfig, VerificationPlanner
from .protocol import ProtocolSpec
from .scalarize import ScalarizationSpec, chebyshev, linear, logsumexp
from .sim import (EpisodeConfig, FigurePlan, ResultRow, episode_row,
                  figure_presets, pinned_instance, run_episode, run_sweep)

__version__ = "0.1.0"

__all__ = [
    "AdversaryChoice", "BudgetLedger", "Certificate", "CorruptionEvent",
    "Dims", "EpisodeConfig", "FigurePlan", "GapProfile", "Instance",
    "PolicyConfig", "ProtocolSpec", "ResultRow", "ScalarizationSpec",
    "VerificationPlanner", "chebyshev", "compute_gaps", "episode_row",
    "figure_presets", "generate_instance", "linear", "logsumexp",
    "pinned_instance", "run_episode", "run_sweep",
]
