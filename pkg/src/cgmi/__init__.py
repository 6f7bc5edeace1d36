"""Black-box model inversion with CMA-ES over a generative prior's latent space."""
from .attack import AttackConfig, CandidatePool, objective_direct_style, objective_mapped, run_attack
from .cma import CMAES, CmaParams, StopRule, run
from .losses import TargetSpec, cross_entropy_loss, loss_by_name, max_margin_loss, poincare_loss
from .metrics import MetricBundle, delta_eval, evaluate, fid, topk_accuracy
from .oracle import (BudgetExhausted, LocalOracle, QueryBudget, RemoteOracle, ScoreVector,
                     ToyClassifier)
from .pipeline import RunConfig, attack_class, run_experiment
from .prior import PriorPair, generate, make_toy_prior, map_latent, synthesize, truncate_style
from .scenario import Scenario, make_planted_scenario
from .selection import TransformSpec, apply_transform, robust_score, select_top

__version__ = "0.1.0"
