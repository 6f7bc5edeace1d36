"""End-to-end per-class runs: attack, selection, evaluation, query ledger."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .attack import MAPPED, AttackConfig, CandidatePool, run_attack
from .losses import DEFAULT_LOSS
from .metrics import MetricBundle, evaluate, feature_map, fid
from .oracle import LocalOracle, Oracle, QueryBudget, QueryLedger
from .rng import substream
from .scenario import Scenario
from .selection import SelectionResult, TransformSpec, select_by_fitness, select_top

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Every knob of an experiment; field names mirror the CLI flags."""

    loss: str = DEFAULT_LOSS
    mode: str = MAPPED
    classes: list[int] | None = None
    restarts: int = 8
    generations: int = 300
    pop: int = 25
    pool: int = 200
    select: int = 50
    transforms: int = 100
    selection: bool = True
    budget: int | None = None
    seed: int = 0
    jobs: int = 8
    features: str = "identity"
    harvest: str = "trace"
    early_stop: bool = True
    noise_frac: float = 0.05
    mask_prob: float = 0.1
    scale_lo: float = 0.9
    scale_hi: float = 1.1

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def attack_config(self, c: int) -> AttackConfig:
        return AttackConfig(target_class=c, loss=self.loss, restarts=self.restarts,
                            generations=self.generations, popsize=self.pop, pool_size=self.pool,
                            select=self.select, seed=self.seed, mode=self.mode,
                            early_stop=self.early_stop, harvest=self.harvest, jobs=self.jobs)

    def transform_spec(self, training_set, c: int) -> TransformSpec:
        seed = int(substream(self.seed, "selection", "class", c).integers(0, 2 ** 62))
        return TransformSpec.for_training_set(training_set, self.transforms, seed, self.noise_frac,
                                              self.mask_prob, (self.scale_lo, self.scale_hi))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ClassResult:
    target_class: int
    pool: CandidatePool
    selection: SelectionResult
    metrics: MetricBundle | None
    ledger: QueryLedger
    budget_used: int
    partial: bool = False
    error: str | None = None

    @property
    def selected_samples(self) -> np.ndarray:
        return np.array([self.pool.entries[i].sample for i in self.selection.indices])


@dataclass
class ExperimentResult:
    config: RunConfig
    classes: list[ClassResult]
    wall_clock: float = 0.0
    overall_fid: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.extra.get("interrupted")) or any(r.partial for r in self.classes)

    def mean(self, name: str) -> float:
        vals = [getattr(r.metrics, name) for r in self.classes if r.metrics is not None]
        return float(np.mean(vals)) if vals else float("nan")

    def summary(self) -> dict:
        return {"acc1": self.mean("acc1"), "acc5": self.mean("acc5"),
                "delta_eval": self.mean("delta_eval"), "fid": self.mean("fid"),
                "overall_fid": self.overall_fid,
                "target_queries": sum(r.ledger.target_total for r in self.classes),
                "evaluation_queries": sum(r.ledger.evaluation for r in self.classes),
                "partial": self.partial}


def attack_class(scenario: Scenario, c: int, cfg: RunConfig, target_oracle: Oracle | None = None,
                 eval_oracle: Oracle | None = None, features=None) -> ClassResult:
    target_oracle = target_oracle or LocalOracle(scenario.target)
    eval_oracle = eval_oracle or LocalOracle(scenario.evaluation)
    features = features or feature_map(cfg.features, scenario.config.sample_dim, seed=cfg.seed)
    budget = QueryBudget(cfg.budget)
    pool = run_attack(cfg.attack_config(c), scenario.prior, target_oracle, budget)
    ledger = QueryLedger(attack=pool.queries)
    partial = pool.partial
    if not pool.entries:
        return ClassResult(c, pool, SelectionResult([], {}, []), None, ledger, budget.used, True,
                           "no candidates evaluated")
    k = min(cfg.select, len(pool))
    if cfg.selection:
        spec = cfg.transform_spec(scenario.training_sets[c], c)
        sel = select_top(spec, target_oracle, pool, c, k, budget)
        if sel.partial:
            partial = True
            if not sel.indices:
                sel = select_by_fitness(pool, k)
    else:
        sel = select_by_fitness(pool, k)
    ledger.selection = budget.used - pool.queries
    eval_budget = QueryBudget()
    chosen = np.array([pool.entries[i].sample for i in sel.indices])
    metrics = evaluate(eval_oracle, features, chosen, scenario.training_sets[c], c, eval_budget)
    ledger.evaluation = eval_budget.used
    ledger.cache_hits = budget.cache_hits
    return ClassResult(c, pool, sel, metrics, ledger, budget.used, partial)


def run_experiment(scenario: Scenario, cfg: RunConfig, target_oracle: Oracle | None = None,
                   eval_oracle: Oracle | None = None, allow_interrupt: bool = False) -> ExperimentResult:
    """Attack every configured class in turn.

    With ``allow_interrupt`` a KeyboardInterrupt ends the loop after the
    class in flight; finished classes are kept and the result is marked
    interrupted (and therefore partial).
    """
    classes = cfg.classes if cfg.classes is not None else list(range(scenario.num_classes))
    for c in classes:
        if not 0 <= c < scenario.num_classes:
            raise ValueError(f"class {c} out of range")
    features = feature_map(cfg.features, scenario.config.sample_dim, seed=cfg.seed)
    start = time.perf_counter()
    results = []
    interrupted = False
    try:
        for c in classes:
            log.info("attacking class %d (%s, %s)", c, cfg.mode, cfg.loss)
            results.append(attack_class(scenario, c, cfg, target_oracle, eval_oracle, features))
    except KeyboardInterrupt:
        if not allow_interrupt:
            raise
        log.warning("interrupted after %d classes", len(results))
        interrupted = True
    chosen = [r.selected_samples for r in results if r.metrics is not None]
    overall = None
    if chosen:
        train = scenario.training_sets[[r.target_class for r in results if r.metrics is not None]]
        overall = fid(features(np.concatenate(chosen)), features(train.reshape(-1, scenario.config.sample_dim)))
    result = ExperimentResult(cfg, results, time.perf_counter() - start, overall)
    if interrupted:
        result.extra["interrupted"] = True
    return result
