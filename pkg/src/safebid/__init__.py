"""Safe multi-agent learning for market bidding and maintenance scheduling."""

from .config import ExperimentConfig, default_config, parse_config
from .ddpg import AgentBrain, Experience, Hyper, make_brain, select_action
from .harness import (DemandModel, RunResult, compute_reward, demand_profile,
                      env_step, make_world, run_training, run_unsafe_ablation,
                      write_run_outputs)
from .market import (MarketInstance, MarketOutcome, UnitParams, clear_market,
                     lp_dispatch_oracle, validate_instance)
from .milp import big_m_expand
from .qlearn import QTable, discretize_state, epsilon_greedy_action, q_update
from .safety import (FilterConfig, SafeDecision, SafetyState, advance_state,
                     brute_force_filter_oracle, feasible_completion, filter_project,
                     fresh_state)

__version__ = "0.1.0"

__all__ = [
    "AgentBrain", "DemandModel", "Experience", "ExperimentConfig", "FilterConfig",
    "Hyper", "MarketInstance", "MarketOutcome", "QTable", "RunResult", "SafeDecision",
    "SafetyState", "UnitParams", "advance_state", "big_m_expand",
    "brute_force_filter_oracle", "clear_market", "compute_reward", "default_config",
    "demand_profile", "discretize_state", "env_step", "epsilon_greedy_action",
    "feasible_completion", "filter_project", "fresh_state", "lp_dispatch_oracle",
    "make_brain", "make_world", "parse_config", "q_update", "run_training",
    "run_unsafe_ablation", "select_action", "validate_instance", "write_run_outputs",
]
