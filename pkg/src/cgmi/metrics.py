"""Evaluation metrics against the independent evaluation classifier.

* top-k accuracy of the evaluation oracle on the attack outputs,
* ``delta_eval``: mean squared feature distance from each output to its
  nearest training sample of the target class,
* FID between Gaussians fitted to two feature sets.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .oracle import Oracle, QueryBudget
from .rng import substream

SHRINKAGE = 1e-6
NEG_EIG_TOL = 1e-8


class IdentityFeatures:
    name = "identity"

    def __call__(self, xs):
        return np.asarray(xs, dtype=np.float64)

    def to_dict(self):
        return {"name": self.name}


class RandomProjection:
    """Fixed Gaussian projection ``x -> x @ P`` with ``P ~ N(0, 1/d)``."""

    name = "projection"

    def __init__(self, input_dim: int, output_dim: int, seed: int = 0):
        self.input_dim, self.output_dim, self.seed = input_dim, output_dim, seed
        rng = substream(seed, "features", "projection")
        self.matrix = rng.standard_normal((input_dim, output_dim)) / np.sqrt(input_dim)

    def __call__(self, xs):
        return np.asarray(xs, dtype=np.float64) @ self.matrix

    def to_dict(self):
        return {"name": self.name, "input_dim": self.input_dim,
                "output_dim": self.output_dim, "seed": self.seed}


def feature_map(name: str = "identity", input_dim: int | None = None,
                output_dim: int | None = None, seed: int = 0):
    if name == "identity":
        return IdentityFeatures()
    if name == "projection":
        if input_dim is None:
            raise ValueError("projection needs input_dim")
        return RandomProjection(input_dim, output_dim or input_dim, seed)
    raise ValueError(f"unknown feature map {name!r}")


def topk_hits(scores, c: int, k: int) -> np.ndarray:
    """Per-row flag: is class ``c`` among the top ``k``?

    The rank of ``c`` counts classes with a strictly higher score plus tied
    classes with a smaller index, so ties go to the lower class index.
    """
    s = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    sc = s[:, [c]]
    idx = np.arange(s.shape[1])
    rank = np.sum((s > sc) | ((s == sc) & (idx < c)), axis=1)
    return rank < k


def topk_accuracy(eval_oracle: Oracle, samples, c: int, k: int,
                  budget: QueryBudget | None = None) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    scores = eval_oracle.query_scores(samples, budget if budget is not None else QueryBudget())
    return float(np.mean(topk_hits(scores, c, k)))


def delta_eval(features, samples, training_set) -> float:
    """Mean over samples of the squared L2 distance to the nearest training point."""
    a = features(samples)
    b = features(training_set)
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both sets must be nonempty")
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    nearest = np.argmin(d2, axis=1)
    diff = a - b[nearest]
    # exact distance for the chosen neighbour
    return float(np.mean(np.einsum("ij,ij->i", diff, diff)))


def covariance(features) -> np.ndarray:
    f = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n, dim = f.shape
    if n < 2:
        cov = np.zeros((dim, dim))
    else:
        cov = np.cov(f, rowvar=False, ddof=1).reshape(dim, dim)
    if n <= dim:
        cov = cov + SHRINKAGE * np.eye(dim)
    return cov


def _sqrtm_psd(a):
    evals, vecs = np.linalg.eigh((a + a.T) / 2)
    return (vecs * np.sqrt(np.maximum(evals, 0.0))) @ vecs.T


def frechet_distance(mu_a, cov_a, mu_b, cov_b) -> float:
    """``|mu_a - mu_b|^2 + tr(C_a + C_b - 2 (C_a C_b)^(1/2))``.

    ``tr (C_a C_b)^(1/2)`` equals the trace of the PSD square root of
    ``C_a^(1/2) C_b C_a^(1/2)``, whose eigenvalues come from a symmetric
    eigendecomposition.
    """
    diff = np.asarray(mu_a, dtype=np.float64) - np.asarray(mu_b, dtype=np.float64)
    cov_a = np.asarray(cov_a, dtype=np.float64)
    cov_b = np.asarray(cov_b, dtype=np.float64)
    root_a = _sqrtm_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    evals = np.linalg.eigvalsh((inner + inner.T) / 2)
    if evals.min() < -NEG_EIG_TOL:
        raise ValueError(f"covariance product is indefinite (eigenvalue {evals.min():.3g})")
    tr_sqrt = np.sum(np.sqrt(np.maximum(evals, 0.0)))
    return float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_sqrt)


def fid(features_a, features_b) -> float:
    a = np.atleast_2d(np.asarray(features_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(features_b, dtype=np.float64))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("features must be finite")
    if a.shape[1] != b.shape[1]:
        raise ValueError("feature dimensions differ")
    return frechet_distance(a.mean(0), covariance(a), b.mean(0), covariance(b))


@dataclass
class MetricBundle:
    acc1: float
    acc5: float
    delta_eval: float
    fid: float
    count: int
    delta_face: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(eval_oracle: Oracle, features, selected, class_training_set, c: int,
             budget: QueryBudget | None = None) -> MetricBundle:
    """All metrics for one class; evaluation queries are charged to ``budget``."""
    selected = np.atleast_2d(np.asarray(selected, dtype=np.float64))
    if len(selected) == 0:
        raise ValueError("nothing selected")
    budget = budget if budget is not None else QueryBudget()
    scores = eval_oracle.query_scores(selected, budget)
    k5 = min(5, scores.shape[1])
    return MetricBundle(
        acc1=float(np.mean(topk_hits(scores, c, 1))),
        acc5=float(np.mean(topk_hits(scores, c, k5))),
        delta_eval=delta_eval(features, selected, class_training_set),
        fid=fid(features(selected), features(class_training_set)),
        count=len(selected),
    )
