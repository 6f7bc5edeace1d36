"""Transformation-based selection of the most robust pool candidates.

A candidate's robust score is the Monte-Carlo mean of the target-class
probability over ``N`` randomly transformed copies:
``mean_i softmax(M(T_i(x)))_c``.  The vector analogue of image crops and
flips is ``T(x) = s * (x * mask) + noise`` with a random scale, a Bernoulli
coordinate mask and additive Gaussian noise.

The transforms for a sample come from an RNG keyed on the sample's bytes,
so scores do not depend on the order in which entries are processed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import BudgetExhausted, Oracle, QueryBudget, class_probabilities
from .rng import content_seed


@dataclass(frozen=True)
class TransformSpec:
    noise_sigma: float | np.ndarray = 0.0
    mask_prob: float = 0.1
    scale_range: tuple[float, float] = (0.9, 1.1)
    count: int = 100
    seed: int = 0

    def __post_init__(self):
        sig = np.asarray(self.noise_sigma, dtype=np.float64)
        if np.any(sig < 0):
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.mask_prob < 1.0:
            raise ValueError("mask_prob must lie in [0, 1)")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ValueError("scale_range needs 0 < lo <= hi")
        if self.count < 1:
            raise ValueError("count must be >= 1")

    @classmethod
    def identity(cls, count: int = 1, seed: int = 0) -> "TransformSpec":
        return cls(0.0, 0.0, (1.0, 1.0), count, seed)

    @classmethod
    def for_training_set(cls, training_samples, count: int = 100, seed: int = 0,
                         noise_frac: float = 0.05, mask_prob: float = 0.1,
                         scale_range=(0.9, 1.1)) -> "TransformSpec":
        """Defaults scaled to the data: noise is ``noise_frac`` of the per-dimension std."""
        std = np.asarray(training_samples, dtype=np.float64).std(axis=0)
        return cls(noise_frac * std, mask_prob, tuple(scale_range), count, seed)


def sample_transforms(spec: TransformSpec, x, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` transformed copies of ``x`` as rows."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = spec.scale_range
    scale = rng.uniform(lo, hi, size=(n, 1))
    keep = rng.random((n, x.size)) >= spec.mask_prob
    noise = rng.standard_normal((n, x.size)) * np.asarray(spec.noise_sigma, dtype=np.float64)
    return scale * (x * keep) + noise


def apply_transform(spec: TransformSpec, x, rng: np.random.Generator) -> np.ndarray:
    return sample_transforms(spec, x, 1, rng)[0]


class PartialEstimate(BudgetExhausted):
    def __init__(self, mean, count, cause: BudgetExhausted):
        super().__init__(f"budget ran out after {count} transformed queries",
                         requested=cause.requested, remaining=cause.remaining, index=count)
        self.partial = (mean, count)
        self.mean = mean
        self.count = count


def robust_score(spec: TransformSpec, oracle: Oracle, x, c: int, budget: QueryBudget,
                 rng: np.random.Generator | None = None) -> float:
    """Mean class-``c`` probability over ``spec.count`` transformed queries.

    If the budget runs out part-way, :class:`PartialEstimate` is raised with
    the mean and count over the queries that were answered.
    """
    rng = rng if rng is not None else content_seed(spec.seed, x)
    xs = sample_transforms(spec, x, spec.count, rng)
    n = spec.count
    left = budget.remaining
    if left < n:
        n = int(max(left, 0))
    probs = np.empty(0)
    if n:
        probs = class_probabilities(oracle.query_scores(xs[:n], budget), oracle.kind)[:, c]
    if n < spec.count:
        mean = float(probs.mean()) if n else float("nan")
        raise PartialEstimate(mean, n, BudgetExhausted(requested=spec.count, remaining=n))
    return float(probs.mean())


@dataclass
class SelectionResult:
    indices: list[int]  # pool indices of the chosen entries, best first
    robust_scores: dict[int, float]
    ranking: list[int]  # every scored pool index, best first
    partial: bool = False
    queries: int = 0

    def report(self) -> list[dict]:
        return [{"index": i, "robust_score": self.robust_scores.get(i), "rank": r}
                for r, i in enumerate(self.ranking)]


def select_top(spec: TransformSpec, oracle: Oracle, pool, c: int, k: int,
               budget: QueryBudget) -> SelectionResult:
    """Score every pool entry under transformations and keep the ``k`` best.

    Ties in robust score fall back to the original fitness, then pool index.
    On budget exhaustion only the entries scored so far are ranked and the
    result is flagged partial.
    """
    entries = pool.entries if hasattr(pool, "entries") else pool
    if not 1 <= k <= len(entries):
        raise ValueError(f"k must lie in [1, {len(entries)}]")
    before = budget.used
    scores: dict[int, float] = {}
    partial = False
    for i, e in enumerate(entries):
        try:
            scores[i] = robust_score(spec, oracle, e.sample, c, budget)
        except BudgetExhausted:
            partial = True
            break
    ranking = sorted(scores, key=lambda i: (-scores[i], entries[i].fitness, i))
    return SelectionResult(ranking[:k], scores, ranking, partial, budget.used - before)


def select_by_fitness(pool, k: int) -> SelectionResult:
    """No-selection baseline: the ``k`` lowest-fitness entries, zero queries."""
    entries = pool.entries if hasattr(pool, "entries") else pool
    ranking = sorted(range(len(entries)), key=lambda i: (entries[i].fitness, i))
    return SelectionResult(ranking[:k], {}, ranking, False, 0)
