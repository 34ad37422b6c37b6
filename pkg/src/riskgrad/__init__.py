"""Risk-neutral and exponential-utility REINFORCE with iteration-bound analysis."""
from .complexity import (BetaRange, ComplexityInputs, alpha_min, alpha_ratio,
                         beta_admissible_range, corollary1_bound, iterations_lower_bound,
                         lipschitz_neutral, lipschitz_sensitive, stepsize_corollary2)
from .environments import CartPole, EnvSpec, GridNav, HolonomicNav, TabularMDP, make_env
from .policy_net import (ActionDistribution, PolicyParams, forward, grad_log_prob,
                         init_params, load_checkpoint, sample_action, save_checkpoint)
from .reinforce import (AdamState, RiskObjective, Trajectory, adam_update,
                        estimate_gradient, grad_norm, rewards_to_go, sample_trajectory,
                        sample_trajectories, utility_weight)

__version__ = "0.1.0"
