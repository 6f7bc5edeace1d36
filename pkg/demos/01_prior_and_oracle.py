"""Toy generative prior and planted-identity oracles.

Builds a scenario, maps a few latents through the prior, and shows that the
target oracle puts each planted identity on top while charging one query
per returned score vector.
"""
import numpy as np

from cgmi import LocalOracle, QueryBudget, generate, make_planted_scenario, map_latent, truncate_style

scen = make_planted_scenario(seed=0, num_classes=5)
prior = scen.prior
print(f"prior: z in R^{prior.latent_dim} -> w in R^{prior.style_dim} -> x in R^{prior.sample_dim}, "
      f"psi={prior.truncation_psi}")

z = np.random.default_rng(1).standard_normal(prior.latent_dim)
w = map_latent(prior, z)
# truncation happens inside synthesize(), pulling w halfway to w_avg
w_t = truncate_style(prior, w)
print("|w - w_avg| raw / truncated:",
      round(float(np.linalg.norm(w - prior.style_mean)), 3),
      round(float(np.linalg.norm(w_t - prior.style_mean)), 3))
print("generate(z) == synthesis(truncate(map(z))):",
      np.array_equal(generate(prior, z), prior.synthesis(w_t)))

oracle = LocalOracle(scen.target)
budget = QueryBudget(max_queries=50)
scores = oracle.query_scores(generate(prior, scen.planted_latents), budget)
print("top-1 for each planted latent:", np.argmax(scores, axis=1).tolist())
print("queries used:", budget.used, "of", budget.max_queries)
