"""Reward-reconstruction attacks on private reinforcement-learning policies over grid worlds."""

from pril.gridworld import GridMap, RewardTable, TabularMDP, build_mdp, bundled_map, bundled_map_ids, parse_map
from pril.harness import ExperimentConfig, ExperimentRecord, run_sweep
from pril.irl import IrlConfig, reconstruct_reward
from pril.metrics import distance_report
from pril.planning import Policy, evaluate_return, value_iteration

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "ExperimentRecord", "GridMap", "IrlConfig", "Policy", "RewardTable",
    "TabularMDP", "build_mdp", "bundled_map", "bundled_map_ids", "distance_report", "evaluate_return",
    "parse_map", "reconstruct_reward", "run_sweep", "value_iteration",
]
