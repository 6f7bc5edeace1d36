"""CMA-ES on the sphere and Rosenbrock functions with the ask/tell loop and run()."""
import numpy as np

from cgmi.cma import CMAES, CmaParams, run

# the explicit loop
es = CMAES(CmaParams(dimension=10, popsize=25, seed=0), mean=np.full(10, 3.0))
while es.generation < 200 and es.best_f > 1e-10:
    xs = es.ask()
    es.tell(xs, [float(x @ x) for x in xs])
print(f"sphere: f={es.best_f:.2e} after {es.generation} generations, sigma={es.sigma:.2e}")

# run() adds stopping rules and a trace
rosen = lambda x: float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))
res = run(CmaParams(dimension=5, max_generations=2000, seed=1), rosen)
print(f"rosenbrock: f={res.best_f:.2e} in {len(res.trace)} generations ({res.stop_reason})")
print("x* ~", np.round(res.best_x, 6))
for rec in res.trace[::40]:
    print(f"  gen {rec['gen']:4d}  best {rec['best_f']:.3e}  sigma {rec['sigma']:.2e}  "
          f"cond {rec['eig_max'] / rec['eig_min']:.1e}")
