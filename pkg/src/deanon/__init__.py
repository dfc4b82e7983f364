"""Simulator for active de-anonymization by group-membership queries."""

__version__ = "0.1.0"

from .channels import BinaryChannel, JointUYZ, binary_entropy, build_joint, kl_divergence_binary, mutual_information_uy
from .errors import ParameterError, ProtocolError
from .experiments import ExperimentConfig, closed_form_candidates, exact_tiny_oracle, run_cell
from .graph_model import BipartiteGraph, GraphNoiseParams, generate_graph, observe_noisy, signature
from .oracle import AttackSession, new_session
from .strategies import (AttackOutcome, StrategyParams, gis_default_nprime, map_default_nprime,
                         run_exhaustive, run_gis, run_map, run_tss, tss_default_params)
