"""Covariance Matrix Adaptation Evolution Strategy (minimization).

Standard CMA-ES with weighted recombination, cumulative step-size
adaptation, and rank-one plus rank-mu covariance updates.  Strategy
parameters follow the usual defaults expressed in terms of the dimension
``n`` and the variance-effective selection mass ``mueff``.

Typical use is either the ask/tell loop::

    es = CMAES(CmaParams(dimension=10), mean=np.zeros(10))
    while es.generation < 100:
        xs = es.ask()
        es.tell(xs, [f(x) for x in xs])

or :func:`run`, which adds stopping rules and a per-generation trace.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import substream

log = logging.getLogger(__name__)

EIG_FLOOR = 1e-14
SIGMA_MIN = 1e-12
SIGMA_MAX = 1e12


@dataclass
class CmaParams:
    dimension: int
    popsize: int = 25
    sigma0: float = 1.0
    max_generations: int = 300
    seed: int = 0
    mu: int = field(init=False)
    weights: np.ndarray = field(init=False, repr=False)
    mueff: float = field(init=False)
    cs: float = field(init=False)
    ds: float = field(init=False)
    cc: float = field(init=False)
    c1: float = field(init=False)
    cmu: float = field(init=False)
    chi_n: float = field(init=False)

    def __post_init__(self):
        n, lam = self.dimension, self.popsize
        if n < 1:
            raise ValueError("dimension must be >= 1")
        if lam < 2:
            raise ValueError("popsize must be >= 2")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be > 0")
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")
        self.mu = lam // 2
        w = math.log((lam + 1) / 2) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)
        mueff = self.mueff
        self.cs = (mueff + 2) / (n + mueff + 5)
        self.ds = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + self.cs
        self.cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        self.c1 = 2 / ((n + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))


class CMAES:
    """Mutable optimizer state.  Not reentrant: one writer per instance."""

    def __init__(self, params: CmaParams, mean=None, rng: np.random.Generator | None = None):
        n = params.dimension
        self.params = params
        self.rng = rng if rng is not None else substream(params.seed, "cma", "sampling")
        if mean is None:
            mean = substream(params.seed, "cma", "mean").standard_normal(n)
        self.mean = np.array(mean, dtype=np.float64)
        if self.mean.shape != (n,):
            raise ValueError(f"mean must have length {n}")
        self.sigma = float(params.sigma0)
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.ps = np.zeros(n)
        self.pc = np.zeros(n)
        self.generation = 0
        self.evaluations = 0
        self.best_x = None
        self.best_f = math.inf
        self.degenerate = False

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.D ** 2

    def ask(self) -> np.ndarray:
        """Draw ``popsize`` candidates ``m + sigma * B diag(D) N(0, I)`` as rows."""
        n, lam = self.params.dimension, self.params.popsize
        z = self.rng.standard_normal((lam, n))
        return self.mean + self.sigma * (z * self.D) @ self.B.T

    def tell(self, candidates, fitnesses) -> "CMAES":
        p = self.params
        xs = np.asarray(candidates, dtype=np.float64)
        f = np.asarray(fitnesses, dtype=np.float64)
        if xs.shape != (p.popsize, p.dimension) or f.shape != (p.popsize,):
            raise ValueError(f"expected {p.popsize} candidates of dimension {p.dimension} "
                             f"and as many fitness values")
        # non-finite values rank last; ties keep input order
        key = np.where(np.isfinite(f), f, np.inf)
        order = np.argsort(key, kind="stable")
        finite = np.isfinite(f)
        if finite.any():
            i = int(np.argmin(key))
            if key[i] < self.best_f:
                self.best_f = float(key[i])
                self.best_x = xs[i].copy()
        self.evaluations += len(f)

        old_mean = self.mean
        y = (xs[order[:p.mu]] - old_mean) / self.sigma
        yw = p.weights @ y
        self.mean = old_mean + self.sigma * yw

        c_inv_sqrt_yw = self.B @ ((self.B.T @ yw) / self.D)
        self.ps = (1 - p.cs) * self.ps + math.sqrt(p.cs * (2 - p.cs) * p.mueff) * c_inv_sqrt_yw
        ps_norm = np.linalg.norm(self.ps)
        g = self.generation + 1
        hsig = ps_norm / math.sqrt(1 - (1 - p.cs) ** (2 * g)) < (1.4 + 2 / (p.dimension + 1)) * p.chi_n
        self.pc = (1 - p.cc) * self.pc + hsig * math.sqrt(p.cc * (2 - p.cc) * p.mueff) * yw

        delta_h = (1 - hsig) * p.cc * (2 - p.cc)
        rank_mu = (y.T * p.weights) @ y
        self.C = ((1 + p.c1 * delta_h - p.c1 - p.cmu) * self.C
                  + p.c1 * np.outer(self.pc, self.pc) + p.cmu * rank_mu)
        self.sigma *= math.exp((p.cs / p.ds) * (ps_norm / p.chi_n - 1))
        self.sigma = min(max(self.sigma, SIGMA_MIN), SIGMA_MAX)
        self._decompose()
        self.generation = g
        return self

    def _decompose(self):
        self.C = (self.C + self.C.T) / 2
        evals, B = np.linalg.eigh(self.C)
        clamped = evals < EIG_FLOOR
        self.degenerate = bool(clamped.all())
        if self.degenerate:
            log.warning("covariance degenerate: all eigenvalues clamped to %g", EIG_FLOOR)
        if clamped.any():
            evals = np.maximum(evals, EIG_FLOOR)
            self.C = (B * evals) @ B.T
            self.C = (self.C + self.C.T) / 2
        self.B = B
        self.D = np.sqrt(evals)


@dataclass
class StopRule:
    """Termination criteria besides the generation cap.

    Stops when the current population's fitness spread drops below
    ``spread_tol`` or the best-so-far value improved by less than
    ``improvement_tol`` over the last ``window`` generations.
    """

    max_generations: int | None = None
    spread_tol: float = 1e-12
    improvement_tol: float = 1e-10
    window: int = 20
    target: float | None = None
    enabled: bool = True


@dataclass
class RunResult:
    best_x: np.ndarray
    best_f: float
    trace: list[dict]
    stop_reason: str
    es: CMAES | None = None

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.trace)


def run(params: CmaParams, objective, stop: StopRule | None = None, *, mean=None,
        vectorized: bool = False, queries=None, callback=None) -> RunResult:
    """Minimize ``objective`` with ask/tell until a stopping rule fires.

    ``objective`` maps a vector to a float, or with ``vectorized=True`` maps a
    ``(popsize, n)`` array to ``popsize`` floats.  ``queries`` is an optional
    zero-argument callable whose value is logged per generation.  Errors
    raised by the objective propagate with ``.trace`` (records so far) and
    ``.result`` (partial :class:`RunResult`) attached.
    """
    stop = stop or StopRule()
    gens = params.max_generations if stop.max_generations is None else stop.max_generations
    es = CMAES(params, mean=mean)

    def evaluate(xs):
        if vectorized:
            return np.asarray(objective(xs), dtype=np.float64)
        return np.array([objective(x) for x in xs], dtype=np.float64)

    if gens == 0:
        f0 = float(evaluate(es.mean[None, :])[0])
        return RunResult(es.mean.copy(), f0, [], "max_generations", es)

    trace: list[dict] = []
    reason = "max_generations"
    history = []
    try:
        while es.generation < gens:
            xs = es.ask()
            f = evaluate(xs)
            es.tell(xs, f)
            finite = f[np.isfinite(f)]
            ev = es.eigenvalues
            rec = {
                "gen": es.generation,
                "best_f": float(finite.min()) if finite.size else math.inf,
                "median_f": float(np.median(finite)) if finite.size else math.inf,
                "best_so_far": es.best_f,
                "sigma": es.sigma,
                "eig_min": float(ev.min()),
                "eig_max": float(ev.max()),
                "queries_used": int(queries()) if queries else es.evaluations,
            }
            trace.append(rec)
            history.append(es.best_f)
            if callback is not None:
                callback(es, xs, f)
            if not stop.enabled:
                continue
            if stop.target is not None and es.best_f <= stop.target:
                reason = "target"
                break
            if finite.size == len(f) and finite.max() - finite.min() < stop.spread_tol:
                reason = "spread"
                break
            if len(history) > stop.window and history[-1 - stop.window] - history[-1] < stop.improvement_tol:
                reason = "stagnation"
                break
    except Exception as exc:
        exc.trace = trace
        exc.result = RunResult(es.best_x, es.best_f, trace, "error", es)
        raise
    best = es.best_x if es.best_x is not None else es.mean
    return RunResult(best.copy(), es.best_f, trace, reason, es)
