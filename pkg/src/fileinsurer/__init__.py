"""Deterministic simulator and bound evaluators for the FileInsurer
decentralized storage protocol."""

__version__ = "0.1.0"

from .adversary import AttackReport, AttackScenario, adversary_select, corrupt_sectors, run_attack_trial
from .agents import HonestProviders
from .bounds import (
    BoundInputs,
    binom_stirling_upper,
    compute_r1_r2,
    kl_lemma_check,
    thm1_capacity_bound,
    thm2_collision_bound,
    thm3_robustness_bound,
    thm4_deposit_ratio,
)
from .engine import Engine, EngineEvent, Proof, random_index, random_sector, sample_exp, split_large_file
from .errors import FileInsurerError, InvariantViolation, ProtocolError
from .experiments import ExperimentConfig, run_table3, sample_file_size, verify_thm2_empirical
from .rng import RngStream, child_seed
from .state import FeeSchedule, NetworkParams, NetworkState, init_network, snapshot_json, validate

__all__ = [
    "AttackReport", "AttackScenario", "BoundInputs", "Engine", "EngineEvent", "ExperimentConfig",
    "FeeSchedule", "FileInsurerError", "HonestProviders", "InvariantViolation", "NetworkParams",
    "NetworkState", "Proof", "ProtocolError", "RngStream", "adversary_select", "binom_stirling_upper",
    "child_seed", "compute_r1_r2", "corrupt_sectors", "init_network", "kl_lemma_check", "random_index",
    "random_sector", "run_attack_trial", "run_table3", "sample_exp", "sample_file_size", "snapshot_json",
    "split_large_file", "thm1_capacity_bound", "thm2_collision_bound", "thm3_robustness_bound",
    "thm4_deposit_ratio", "validate", "verify_thm2_empirical",
]
