"""Generative prior: a mapping network Z -> W followed by a synthesis network W -> X.

The toy prior mirrors the StyleGAN2 split at vector scale.  The mapping is a
two-hidden-layer tanh MLP (hidden width ``m``) and the synthesis is an
affine map.  Styles are pulled towards the average style by the truncation
factor ``psi`` before synthesis.

The StyleGAN2 truncation cutoff selects how many per-layer styles get
truncated.  A toy prior has a single style vector, so ``truncation_cutoff``
is stored for bookkeeping only and has no effect.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import substream

PRIOR_FORMAT = "cgmi-prior"
PRIOR_VERSION = 1


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        object.__setattr__(self, "weight", _frozen(self.weight))
        object.__setattr__(self, "bias", _frozen(self.bias))
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("layer weight must be (out, in) and bias (out,)")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weight.T + self.bias


@dataclass(frozen=True)
class PriorPair:
    """Immutable (mapping, synthesis) pair with truncation settings.

    ``mapping`` is a list of dense layers; tanh is applied after every layer
    except the last.  ``synthesis`` is a single affine layer.
    """

    mapping: tuple[DenseLayer, ...]
    synthesis: DenseLayer
    style_mean: np.ndarray
    truncation_psi: float = 0.5
    truncation_cutoff: int = 8
    seed: int | None = None
    style_samples: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mapping", tuple(self.mapping))
        object.__setattr__(self, "style_mean", _frozen(self.style_mean))
        if not self.mapping:
            raise ValueError("mapping needs at least one layer")
        if not 0.0 <= self.truncation_psi <= 1.0:
            raise ValueError(f"truncation_psi must lie in [0, 1], got {self.truncation_psi}")
        for a, b in zip(self.mapping, self.mapping[1:]):
            if b.weight.shape[1] != a.weight.shape[0]:
                raise ValueError("mapping layer shapes do not chain")
        if self.synthesis.weight.shape[1] != self.style_dim:
            raise ValueError("synthesis input does not match style dimension")
        if self.style_mean.shape != (self.style_dim,):
            raise ValueError("style_mean must have length style_dim")

    @property
    def latent_dim(self) -> int:
        return self.mapping[0].weight.shape[1]

    @property
    def style_dim(self) -> int:
        return self.mapping[-1].weight.shape[0]

    @property
    def sample_dim(self) -> int:
        return self.synthesis.weight.shape[0]

    def with_psi(self, psi: float) -> "PriorPair":
        return PriorPair(self.mapping, self.synthesis, self.style_mean, psi,
                         self.truncation_cutoff, self.seed, self.style_samples, dict(self.meta))

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": PRIOR_FORMAT,
            "version": PRIOR_VERSION,
            "seed": self.seed,
            "dims": {"latent": self.latent_dim, "style": self.style_dim, "sample": self.sample_dim},
            "truncation_psi": self.truncation_psi,
            "truncation_cutoff": self.truncation_cutoff,
            "style_samples": self.style_samples,
            "mapping": [{"weight": l.weight.tolist(), "bias": l.bias.tolist()} for l in self.mapping],
            "synthesis": {"weight": self.synthesis.weight.tolist(), "bias": self.synthesis.bias.tolist()},
            "style_mean": self.style_mean.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PriorPair":
        if doc.get("format") != PRIOR_FORMAT:
            raise ValueError("not a prior document")
        if doc.get("version") != PRIOR_VERSION:
            raise ValueError(f"unsupported prior version {doc.get('version')}")
        mapping = [DenseLayer(l["weight"], l["bias"]) for l in doc["mapping"]]
        prior = cls(
            mapping=mapping,
            synthesis=DenseLayer(doc["synthesis"]["weight"], doc["synthesis"]["bias"]),
            style_mean=doc["style_mean"],
            truncation_psi=float(doc["truncation_psi"]),
            truncation_cutoff=int(doc["truncation_cutoff"]),
            seed=doc.get("seed"),
            style_samples=doc.get("style_samples"),
        )
        dims = doc["dims"]
        if (dims["latent"], dims["style"], dims["sample"]) != (
                prior.latent_dim, prior.style_dim, prior.sample_dim):
            raise ValueError("declared dims disagree with weight shapes")
        return prior

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "PriorPair":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _check(v, n: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim not in (1, 2) or v.shape[-1] != n:
        raise ValueError(f"{what} must have trailing dimension {n}, got shape {v.shape}")
    return v


def _mapping_forward(layers, z: np.ndarray) -> np.ndarray:
    h = z
    for layer in layers[:-1]:
        h = np.tanh(layer(h))
    return layers[-1](h)


def map_latent(prior: PriorPair, z) -> np.ndarray:
    """Style vector(s) ``w = mapping(z)``; accepts one latent or a batch of rows."""
    return _mapping_forward(prior.mapping, _check(z, prior.latent_dim, "latent"))


def truncate_style(prior: PriorPair, w) -> np.ndarray:
    """``w_avg + psi * (w - w_avg)``."""
    w = _check(w, prior.style_dim, "style")
    return prior.style_mean + prior.truncation_psi * (w - prior.style_mean)


def synthesize(prior: PriorPair, w) -> np.ndarray:
    """Sample(s) ``x = synthesis(truncate_style(w))``."""
    return prior.synthesis(truncate_style(prior, w))


def generate(prior: PriorPair, z) -> np.ndarray:
    """Full pipeline ``synthesize(map_latent(z))``."""
    return synthesize(prior, map_latent(prior, z))


def estimate_style_mean(mapping, latent_dim: int, samples: int, rng: np.random.Generator,
                        chunk: int = 4096) -> np.ndarray:
    total = None
    left = samples
    while left > 0:
        n = min(chunk, left)
        w = _mapping_forward(mapping, rng.standard_normal((n, latent_dim))).sum(axis=0)
        total = w if total is None else total + w
        left -= n
    return total / samples


def make_toy_prior(seed: int, k: int = 16, m: int = 16, d: int = 16, style_samples: int = 10_000,
                   psi: float = 0.5, cutoff: int = 8, bias_scale: float = 0.1) -> PriorPair:
    """Deterministic toy prior.

    Weights are drawn from N(0, 1/fan_in) and biases from N(0, bias_scale^2)
    on the ``(seed, "prior", "weights")`` substream.  The average style is the
    mean mapping output over ``style_samples`` standard-normal latents drawn
    from ``(seed, "prior", "style-mean")``.
    """
    if min(k, m, d) < 1:
        raise ValueError("dimensions must be >= 1")
    if style_samples < 1:
        raise ValueError("style_samples must be >= 1")
    if bias_scale < 0:
        raise ValueError("bias_scale must be >= 0")
    rng = substream(seed, "prior", "weights")

    def dense(n_in, n_out):
        weight = rng.standard_normal((n_out, n_in)) / np.sqrt(n_in)
        bias = bias_scale * rng.standard_normal(n_out)
        return DenseLayer(weight, bias)

    mapping = (dense(k, m), dense(m, m), dense(m, m))
    synthesis = dense(m, d)
    style_mean = estimate_style_mean(mapping, k, style_samples, substream(seed, "prior", "style-mean"))
    return PriorPair(mapping, synthesis, style_mean, psi, cutoff, seed, style_samples)
