"""Per-class inversion attack: multi-restart CMA-ES over the prior's input.

Two search spaces are supported:

``mapped``
    optimize the latent ``z``; candidates are ``synthesize(map_latent(z))``.
``direct_style``
    optimize the style vector ``w`` directly; candidates are
    ``synthesize(w)``.  This is the "no mapping" ablation.

Every restart keeps its best ``ceil(P / R)`` distinct candidates from its
whole trace.  The restarts' survivors are merged into one pool sorted by
fitness and cut to ``P`` entries.  Each pool entry carries the score vector
the oracle returned for it, so later stages never need to re-query it.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cma import CmaParams, StopRule, run
from .losses import DEFAULT_LOSS, loss_by_name
from .oracle import BudgetExhausted, Oracle, QueryBudget, as_logits
from .prior import PriorPair, generate, map_latent, synthesize
from .rng import substream

log = logging.getLogger(__name__)

MAPPED = "mapped"
DIRECT_STYLE = "direct_style"
MODES = (MAPPED, DIRECT_STYLE)


@dataclass
class AttackConfig:
    target_class: int = 0
    loss: str = DEFAULT_LOSS
    restarts: int = 8
    generations: int = 300
    popsize: int = 25
    pool_size: int = 200
    select: int = 50
    seed: int = 0
    mode: str = MAPPED
    sigma0: float = 1.0
    early_stop: bool = True
    harvest: str = "trace"  # or "final": survivors from the last generation only
    jobs: int = 8

    def __post_init__(self):
        loss_by_name(self.loss)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if min(self.restarts, self.generations, self.popsize) < 1:
            raise ValueError("restarts, generations and popsize must be >= 1")
        if self.popsize < 2:
            raise ValueError("popsize must be >= 2")
        if not 1 <= self.select <= self.pool_size:
            raise ValueError("need 1 <= select <= pool_size")
        if self.harvest not in ("trace", "final"):
            raise ValueError("harvest must be 'trace' or 'final'")

    @property
    def keep_per_restart(self) -> int:
        return math.ceil(self.pool_size / self.restarts)

    def restart_seed(self, restart: int) -> int:
        rng = substream(self.seed, "attack", self.mode, "class", self.target_class, "restart", restart)
        return int(rng.integers(0, 2 ** 62))


@dataclass
class PoolEntry:
    latent: np.ndarray | None  # z; None in direct_style mode
    style: np.ndarray
    sample: np.ndarray
    scores: np.ndarray
    fitness: float
    restart: int
    generation: int

    def to_dict(self) -> dict:
        return {
            "z": None if self.latent is None else self.latent.tolist(),
            "w": self.style.tolist(),
            "fitness": self.fitness,
            "scores": self.scores.tolist(),
            "restart": self.restart,
            "gen": self.generation,
        }


@dataclass
class CandidatePool:
    target_class: int
    mode: str
    loss: str
    entries: list[PoolEntry]
    score_kind: str = "logits"
    partial: bool = False
    traces: dict[int, list[dict]] = field(default_factory=dict)
    queries: int = 0

    def __len__(self):
        return len(self.entries)

    @property
    def samples(self) -> np.ndarray:
        return np.array([e.sample for e in self.entries])

    def to_dict(self) -> dict:
        return {"class": self.target_class, "mode": self.mode, "loss": self.loss,
                "kind": self.score_kind, "partial": self.partial, "queries": self.queries,
                "entries": [e.to_dict() for e in self.entries]}


class _Objective:
    """Batched fitness for one restart; records every evaluated candidate."""

    def __init__(self, prior, oracle, loss, c, mode, budget):
        self.prior, self.oracle, self.loss, self.c = prior, oracle, loss, c
        self.mode, self.budget = mode, budget
        self.records = []  # (generation, variables, styles, samples, scores, fitness)
        self.queries = 0

    def __call__(self, vs):
        vs = np.asarray(vs, dtype=np.float64)
        ws = map_latent(self.prior, vs) if self.mode == MAPPED else vs
        xs = synthesize(self.prior, ws)
        scores = self.oracle.query_scores(xs, self.budget)
        self.queries += len(xs)
        f = np.atleast_1d(self.loss(as_logits(scores, self.oracle.kind), self.c))
        self.records.append((len(self.records) + 1, vs, ws, xs, scores, f))
        return f


def objective_mapped(prior: PriorPair, oracle: Oracle, loss, c: int, budget: QueryBudget):
    """``z -> loss(query(synthesize(map_latent(z))), c)``; one query per call."""
    loss = loss_by_name(loss) if isinstance(loss, str) else loss

    def f(z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (prior.latent_dim,):
            raise ValueError(f"latent must have length {prior.latent_dim}")
        return loss(oracle.query(generate(prior, z), budget), c)
    return f


def objective_direct_style(prior: PriorPair, oracle: Oracle, loss, c: int, budget: QueryBudget):
    """``w -> loss(query(synthesize(w)), c)``; one query per call."""
    loss = loss_by_name(loss) if isinstance(loss, str) else loss

    def f(w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (prior.style_dim,):
            raise ValueError(f"style must have length {prior.style_dim}")
        return loss(oracle.query(synthesize(prior, w), budget), c)
    return f


def _harvest(records, keep, restart, mode, final_only):
    if final_only and records:
        records = records[-1:]
    seen = set()
    entries = []
    for gen, vs, ws, xs, scores, f in records:
        for i in range(len(vs)):
            key = vs[i].tobytes()
            if key in seen:
                continue
            seen.add(key)
            entries.append((i, PoolEntry(
                latent=vs[i].copy() if mode == MAPPED else None, style=ws[i].copy(),
                sample=xs[i].copy(), scores=scores[i].copy(),
                fitness=float(f[i]) if np.isfinite(f[i]) else math.inf,
                restart=restart, generation=gen)))
    entries.sort(key=lambda t: (t[1].fitness, t[1].generation, t[0]))
    return entries[:keep]


def run_attack(config: AttackConfig, prior: PriorPair, target_oracle: Oracle,
               budget: QueryBudget | None = None) -> CandidatePool:
    """Run all restarts for one class and assemble the candidate pool.

    A :class:`BudgetExhausted` inside any restart stops that restart; the
    pool is still built from everything evaluated so far and flagged partial.
    """
    budget = budget if budget is not None else QueryBudget()
    loss = loss_by_name(config.loss)
    dim = prior.latent_dim if config.mode == MAPPED else prior.style_dim
    stop = StopRule(enabled=config.early_stop)

    def one(restart):
        params = CmaParams(dim, config.popsize, config.sigma0, config.generations,
                           config.restart_seed(restart))
        obj = _Objective(prior, target_oracle, loss, config.target_class, config.mode, budget)
        partial = False
        try:
            trace = run(params, obj, stop, vectorized=True, queries=lambda: obj.queries).trace
        except BudgetExhausted as exc:
            log.info("class %d restart %d stopped: %s", config.target_class, restart, exc)
            partial = True
            trace = getattr(exc, "trace", [])
        survivors = _harvest(obj.records, config.keep_per_restart, restart, config.mode,
                             config.harvest == "final")
        return survivors, trace, partial, obj.queries

    workers = max(1, min(config.jobs, config.restarts))
    if workers == 1:
        outcomes = [one(r) for r in range(config.restarts)]
    else:
        with ThreadPoolExecutor(workers) as ex:
            outcomes = list(ex.map(one, range(config.restarts)))

    merged = [t for survivors, *_ in outcomes for t in survivors]
    merged.sort(key=lambda t: (t[1].fitness, t[1].restart, t[1].generation, t[0]))
    return CandidatePool(
        target_class=config.target_class, mode=config.mode, loss=config.loss,
        entries=[e for _, e in merged[:config.pool_size]], score_kind=target_oracle.kind,
        partial=any(o[2] for o in outcomes),
        traces={r: o[1] for r, o in enumerate(outcomes)},
        queries=sum(o[3] for o in outcomes),
    )
