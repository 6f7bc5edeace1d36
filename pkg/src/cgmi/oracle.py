"""Query-only classifiers with exact query accounting.

An oracle only ever exposes a score vector per input.  Every returned score
vector is charged to a :class:`QueryBudget`; nothing is evaluated off the
books.  Two oracles are provided: :class:`LocalOracle` wraps an in-process
:class:`ToyClassifier`, and :class:`RemoteOracle` talks to the JSON/HTTP
wire format served by :mod:`cgmi.server`.
"""
from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import requests

LOGITS = "logits"
PROBS = "probs"
PROB_FLOOR = 1e-12


class BudgetExhausted(RuntimeError):
    """Raised before any evaluation when a query would exceed the budget."""

    def __init__(self, message="query budget exhausted", *, requested=0, remaining=0, index=None):
        super().__init__(message)
        self.requested = requested
        self.remaining = remaining
        # index of the first query that could not be served
        self.index = index
        self.partial = None


class TransportError(RuntimeError):
    """Remote oracle unreachable or timing out after all retries."""


class MalformedResponse(TransportError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class QueryBudget:
    """Thread-safe query counter with an optional hard cap.

    ``used`` only ever grows, and only when score vectors are actually
    delivered.  Remote calls reserve their slots first (so a full budget
    refuses before any network I/O) and commit or cancel afterwards.
    """

    def __init__(self, max_queries: int | None = None):
        if max_queries is not None and max_queries < 0:
            raise ValueError("max_queries must be >= 0")
        self.max_queries = max_queries
        self.used = 0
        self.cache_hits = 0
        self._pending = 0
        self._lock = threading.Lock()

    def __repr__(self):
        cap = "unlimited" if self.max_queries is None else self.max_queries
        return f"QueryBudget(used={self.used}, max={cap})"

    @property
    def remaining(self) -> float | int:
        if self.max_queries is None:
            return float("inf")
        with self._lock:
            return self.max_queries - self.used - self._pending

    @property
    def exhausted(self) -> bool:
        return self.remaining <= 0

    def reserve(self, n: int) -> None:
        with self._lock:
            if self.max_queries is not None:
                left = self.max_queries - self.used - self._pending
                if n > left:
                    raise BudgetExhausted(
                        f"need {n} queries, {left} left of {self.max_queries}",
                        requested=n, remaining=left, index=left)
            self._pending += n

    def commit(self, n: int) -> None:
        with self._lock:
            self._pending -= n
            self.used += n

    def cancel(self, n: int) -> None:
        with self._lock:
            self._pending -= n

    def charge(self, n: int) -> None:
        """Reserve and commit in one step (in-process evaluation)."""
        self.reserve(n)
        self.commit(n)

    def record_cache_hit(self, n: int = 1) -> None:
        with self._lock:
            self.cache_hits += n


@dataclass(frozen=True)
class ScoreVector:
    scores: np.ndarray
    kind: str = LOGITS

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("scores must be one-dimensional")
        if self.kind not in (LOGITS, PROBS):
            raise ValueError(f"unknown score kind {self.kind!r}")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        if self.kind == PROBS and (np.any(s < 0) or abs(s.sum() - 1.0) > 1e-9):
            raise ValueError("probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "scores", s)

    def __len__(self):
        return len(self.scores)

    def logits(self) -> np.ndarray:
        """Logit-scale view; probabilities become ``log(p + 1e-12)``."""
        return as_logits(self.scores, self.kind)


def as_logits(scores, kind: str = LOGITS) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    return np.log(scores + PROB_FLOOR) if kind == PROBS else scores


def softmax(scores, axis=-1) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    e = np.exp(s - s.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def class_probabilities(scores, kind: str = LOGITS) -> np.ndarray:
    return np.asarray(scores, dtype=np.float64) if kind == PROBS else softmax(scores)


@dataclass(frozen=True)
class ToyClassifier:
    """Nearest-centroid classifier: ``score_j = -||x - centroid_j||^2 / temperature``."""

    centroids: np.ndarray
    temperature: float = 1.0
    label_noise_seed: int | None = None

    def __post_init__(self):
        c = np.array(self.centroids, dtype=np.float64)
        if c.ndim != 2 or not np.all(np.isfinite(c)):
            raise ValueError("centroids must be a finite (C, d) matrix")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        c.setflags(write=False)
        object.__setattr__(self, "centroids", c)

    @property
    def num_classes(self) -> int:
        return self.centroids.shape[0]

    @property
    def input_dim(self) -> int:
        return self.centroids.shape[1]

    def scores(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        diff = xs[..., None, :] - self.centroids
        return -np.einsum("...ij,...ij->...i", diff, diff) / self.temperature

    def to_dict(self) -> dict:
        return {"centroids": self.centroids.tolist(), "temperature": self.temperature,
                "label_noise_seed": self.label_noise_seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "ToyClassifier":
        return cls(doc["centroids"], doc["temperature"], doc.get("label_noise_seed"))


def _as_inputs(xs, d: int) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs.reshape(0, d) if xs.size == 0 else xs[None, :]
    if xs.ndim != 2 or xs.shape[1] != d:
        raise ValueError(f"inputs must have dimension {d}, got shape {xs.shape}")
    return xs


class Oracle:
    """Common query surface; subclasses implement :meth:`_evaluate`."""

    kind = LOGITS
    num_classes: int
    input_dim: int

    def query(self, x, budget: QueryBudget) -> ScoreVector:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("query takes a single sample; use query_batch")
        return self.query_batch(x[None, :], budget)[0]

    def query_batch(self, xs, budget: QueryBudget) -> list[ScoreVector]:
        scores = self.query_scores(xs, budget)
        return [ScoreVector(s, self.kind) for s in scores]

    def query_scores(self, xs, budget: QueryBudget) -> np.ndarray:
        """Batch query returning an ``(n, C)`` array; same accounting as query_batch."""
        xs = _as_inputs(xs, self.input_dim)
        if len(xs) == 0:
            return np.empty((0, self.num_classes))
        return self._evaluate(xs, budget)

    def _evaluate(self, xs: np.ndarray, budget: QueryBudget) -> np.ndarray:
        raise NotImplementedError


class LocalOracle(Oracle):
    """In-process oracle over a :class:`ToyClassifier`.

    With ``cache=True`` exact repeats of an input (same float64 bytes) are
    answered from memory; hits are counted in ``budget.cache_hits`` and do
    not consume budget.
    """

    def __init__(self, classifier: ToyClassifier, kind: str = LOGITS, cache: bool = False):
        if kind not in (LOGITS, PROBS):
            raise ValueError(f"unknown score kind {kind!r}")
        self.classifier = classifier
        self.kind = kind
        self.num_classes = classifier.num_classes
        self.input_dim = classifier.input_dim
        self._cache = {} if cache else None
        self._cache_lock = threading.Lock()

    def _raw(self, xs):
        s = self.classifier.scores(xs)
        return softmax(s) if self.kind == PROBS else s

    def _evaluate(self, xs, budget):
        if self._cache is None:
            budget.charge(len(xs))
            return self._raw(xs)
        keys = [hashlib.blake2b(x.tobytes(), digest_size=16).digest() for x in xs]
        with self._cache_lock:
            miss, seen = [], set()
            for i, k in enumerate(keys):
                if k not in self._cache and k not in seen:
                    seen.add(k)
                    miss.append(i)
        budget.charge(len(miss))
        budget.record_cache_hit(len(xs) - len(miss))
        out = np.empty((len(xs), self.num_classes))
        if miss:
            fresh = self._raw(xs[miss])
            with self._cache_lock:
                for row, i in zip(fresh, miss):
                    self._cache.setdefault(keys[i], row)
        with self._cache_lock:
            for i, k in enumerate(keys):
                out[i] = self._cache[k]
        return out


class RemoteOracle(Oracle):
    """HTTP client for ``POST /v1/predict`` and ``GET /v1/meta``.

    Budget is reserved locally before any request goes out.  Timeouts,
    connection errors and malformed responses are retried with exponential
    backoff (``backoff`` seconds between attempts) and then raised.  A 429
    from the server means the server-side budget refused the request and
    becomes :class:`BudgetExhausted`.
    """

    def __init__(self, endpoint: str, kind: str = LOGITS, timeout: float = 5.0,
                 attempts: int = 3, backoff=(0.1, 0.2, 0.4), max_in_flight: int = 8,
                 session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.kind = kind
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = tuple(backoff)
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._session = session or requests.Session()
        self._meta = None

    def meta(self) -> dict:
        if self._meta is None:
            doc = self._call("GET", "/v1/meta", None)
            try:
                self._meta = {"classes": int(doc["classes"]), "input_dim": int(doc["input_dim"])}
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedResponse(f"bad meta document: {doc!r}") from exc
        return self._meta

    @property
    def num_classes(self) -> int:
        return self.meta()["classes"]

    @property
    def input_dim(self) -> int:
        return self.meta()["input_dim"]

    def close(self):
        self._session.close()

    def _call(self, method, path, body, validate=None):
        url = self.endpoint + path
        last = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff[min(attempt - 1, len(self.backoff) - 1)])
            try:
                with self._slots:
                    resp = self._session.request(method, url, json=body, timeout=self.timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last = TransportError(f"{method} {url}: {exc}")
                continue
            if resp.status_code == 429:
                raise BudgetExhausted("server refused: budget exhausted")
            if resp.status_code != 200:
                last = TransportError(f"{method} {url}: HTTP {resp.status_code} {resp.text[:200]}")
                if resp.status_code == 400:
                    break
                continue
            try:
                doc = resp.json()
                return validate(doc) if validate else doc
            except MalformedResponse as exc:
                last = exc
            except ValueError as exc:
                last = MalformedResponse(f"response is not JSON: {exc}")
        raise last

    def _evaluate(self, xs, budget):
        n, classes = len(xs), self.num_classes

        def validate(doc):
            try:
                out, kind = doc["outputs"], doc["kind"]
            except (KeyError, TypeError):
                raise MalformedResponse("response lacks outputs/kind")
            if kind != self.kind:
                raise MalformedResponse(f"asked for {self.kind}, got {kind}")
            if not isinstance(out, list) or len(out) != n:
                raise MalformedResponse(f"expected {n} outputs", index=min(len(out) if isinstance(out, list) else 0, n))
            for i, row in enumerate(out):
                if not isinstance(row, list) or len(row) != classes:
                    raise MalformedResponse(f"output {i} has wrong length", index=i)
            arr = np.asarray(out, dtype=np.float64)
            bad = np.flatnonzero(~np.all(np.isfinite(arr), axis=1))
            if bad.size:
                raise MalformedResponse("non-finite scores", index=int(bad[0]))
            return arr

        budget.reserve(n)
        try:
            arr = self._call("POST", "/v1/predict", {"inputs": xs.tolist(), "return": self.kind}, validate)
        except BaseException:
            budget.cancel(n)
            raise
        budget.commit(n)
        return arr


def query(oracle: Oracle, x, budget: QueryBudget) -> ScoreVector:
    return oracle.query(x, budget)


def query_batch(oracle: Oracle, xs, budget: QueryBudget) -> list[ScoreVector]:
    return oracle.query_batch(xs, budget)


@dataclass
class QueryLedger:
    """Per-class query counts split by purpose."""

    attack: int = 0
    selection: int = 0
    evaluation: int = 0
    cache_hits: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def target_total(self) -> int:
        return self.attack + self.selection

    def to_dict(self) -> dict:
        return {"attack": self.attack, "selection": self.selection, "evaluation": self.evaluation,
                "cache_hits": self.cache_hits, "target_total": self.target_total, **self.extra}
