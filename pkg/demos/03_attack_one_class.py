"""Invert one class: CMA-ES over the latent, robust selection, evaluation.

Uses the scaled protocol (4 restarts x 100 generations, pool 80, keep 20,
50 transforms) and prints the query ledger next to the metrics.
"""
import numpy as np

from cgmi import LocalOracle, QueryBudget, make_planted_scenario
from cgmi.attack import AttackConfig, run_attack
from cgmi.metrics import IdentityFeatures, evaluate
from cgmi.selection import TransformSpec, select_top

scen = make_planted_scenario(seed=0, num_classes=10)
target = LocalOracle(scen.target)
c = 7

budget = QueryBudget()
cfg = AttackConfig(target_class=c, restarts=4, generations=100, pool_size=80, select=20, seed=0)
pool = run_attack(cfg, scen.prior, target, budget)
print(f"pool: {len(pool)} candidates, best fitness {pool.entries[0].fitness:.4f}, {pool.queries} queries")

spec = TransformSpec.for_training_set(scen.training_sets[c], count=50, seed=0)
sel = select_top(spec, target, pool, c, cfg.select, budget)
print(f"selection: {sel.queries} queries, top robust score {sel.robust_scores[sel.indices[0]]:.3f}")

chosen = np.array([pool.entries[i].sample for i in sel.indices])
m = evaluate(LocalOracle(scen.evaluation), IdentityFeatures(), chosen, scen.training_sets[c], c)
print(f"eval acc@1 {m.acc1:.2f}  acc@5 {m.acc5:.2f}  delta_eval {m.delta_eval:.4f}  fid {m.fid:.4f}")
print("distance of best output to planted centroid:",
      round(float(np.linalg.norm(chosen[0] - scen.target.centroids[c])), 4))
print("target queries total:", budget.used)
