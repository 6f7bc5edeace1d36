"""Serve the target model over HTTP and attack it through the wire client.

The remote run must reproduce the in-process metrics and ledger.
"""
from cgmi import make_planted_scenario
from cgmi.oracle import RemoteOracle
from cgmi.pipeline import RunConfig, run_experiment
from cgmi.server import OracleServer

scen = make_planted_scenario(seed=0, num_classes=4)
cfg = RunConfig(classes=[0, 1], restarts=2, generations=20, pool=20, select=5, transforms=10)

local = run_experiment(scen, cfg)
with OracleServer(scen.target, max_queries=100_000) as server:
    remote_oracle = RemoteOracle(server.url)
    print("meta:", remote_oracle.meta())
    remote = run_experiment(scen, cfg, remote_oracle)
    print("server-side queries:", server.budget.used)

for a, b in zip(local.classes, remote.classes):
    print(f"class {a.target_class}: local acc@1 {a.metrics.acc1:.2f} fid {a.metrics.fid:.6f} | "
          f"remote acc@1 {b.metrics.acc1:.2f} fid {b.metrics.fid:.6f} | ledger {b.ledger.to_dict()}")
