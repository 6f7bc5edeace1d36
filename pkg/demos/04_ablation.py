"""Loss, search-space and selection ablation on three planted scenarios."""
import numpy as np

from cgmi import make_planted_scenario
from cgmi.pipeline import RunConfig, run_experiment

arms = {
    "poincare": {},
    "max_margin": {"loss": "max_margin"},
    "cross_entropy": {"loss": "cross_entropy"},
    "no mapping": {"mode": "direct_style"},
    "no selection": {"selection": False},
}
scaled = dict(restarts=4, generations=100, pool=80, select=20, transforms=50)

table = {name: [] for name in arms}
for seed in range(3):
    scen = make_planted_scenario(seed=seed, num_classes=10)
    for name, kw in arms.items():
        res = run_experiment(scen, RunConfig(seed=seed, **scaled, **kw))
        table[name].append((res.mean("acc1"), res.mean("acc5"), res.mean("delta_eval")))

print(f"{'arm':14s} {'acc@1':>7s} {'acc@5':>7s} {'delta':>8s}")
for name, rows in table.items():
    a1, a5, d = np.mean(rows, axis=0)
    print(f"{name:14s} {a1:7.3f} {a5:7.3f} {d:8.4f}")
