"""Planted-identity scenarios: a toy prior plus target/evaluation classifiers.

Each class ``c`` gets a planted latent ``z*_c``; the target classifier's
centroid for ``c`` is the prior's output at ``z*_c``.  The evaluation
classifier uses the same centroids perturbed by Gaussian noise, standing in
for an independently trained model.  Per-class "training samples" are
drawn around the target centroids for the distance-based metrics.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .oracle import ToyClassifier
from .prior import PriorPair, generate, make_toy_prior
from .rng import substream

SCENARIO_FORMAT = "cgmi-scenario"
SCENARIO_VERSION = 1


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    num_classes: int = 10
    latent_dim: int = 16
    style_dim: int = 16
    sample_dim: int = 16
    tau_target: float = 1.0
    tau_eval: float = 1.0
    centroid_noise: float = 0.1
    train_per_class: int = 50
    train_noise: float = 0.1
    style_samples: int = 10_000
    psi: float = 0.5

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("a scenario needs at least two classes")
        if self.centroid_noise < 0 or self.train_noise < 0:
            raise ValueError("noise levels must be >= 0")
        if self.train_per_class < 1:
            raise ValueError("train_per_class must be >= 1")
        if not (self.tau_target > 0 and self.tau_eval > 0):
            raise ValueError("temperatures must be > 0")


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    prior: PriorPair
    target: ToyClassifier
    evaluation: ToyClassifier
    training_sets: np.ndarray  # (C, n, d)
    planted_latents: np.ndarray  # (C, k)

    @property
    def num_classes(self) -> int:
        return self.target.num_classes

    def to_dict(self, prior_ref: str | None = None) -> dict:
        doc = {
            "format": SCENARIO_FORMAT,
            "version": SCENARIO_VERSION,
            "config": asdict(self.config),
            "target": self.target.to_dict(),
            "evaluation": self.evaluation.to_dict(),
            "training_sets": self.training_sets.tolist(),
            "planted_latents": self.planted_latents.tolist(),
        }
        if prior_ref is None:
            doc["prior"] = self.prior.to_dict()
        else:
            doc["prior_path"] = prior_ref
        return doc

    @classmethod
    def from_dict(cls, doc: dict, base: Path | None = None) -> "Scenario":
        if doc.get("format") != SCENARIO_FORMAT or doc.get("version") != SCENARIO_VERSION:
            raise ValueError("not a supported scenario document")
        if "prior" in doc:
            prior = PriorPair.from_dict(doc["prior"])
        else:
            prior = PriorPair.load(Path(base or ".") / doc["prior_path"])
        return cls(
            config=ScenarioConfig(**doc["config"]),
            prior=prior,
            target=ToyClassifier.from_dict(doc["target"]),
            evaluation=ToyClassifier.from_dict(doc["evaluation"]),
            training_sets=np.asarray(doc["training_sets"], dtype=np.float64),
            planted_latents=np.asarray(doc["planted_latents"], dtype=np.float64),
        )

    def save(self, directory, name: str = "scenario.json", prior_name: str = "prior.json") -> tuple[Path, Path]:
        """Write prior weights and scenario as two JSON files; return both paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        prior_path = directory / prior_name
        scen_path = directory / name
        self.prior.save(prior_path)
        scen_path.write_text(json.dumps(self.to_dict(prior_ref=prior_name)))
        return scen_path, prior_path

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base=path.parent)


def make_planted_scenario(seed: int = 0, num_classes: int = 10, latent_dim: int = 16,
                          style_dim: int = 16, sample_dim: int = 16, tau_target: float = 1.0,
                          tau_eval: float = 1.0, centroid_noise: float = 0.1, **kwargs) -> Scenario:
    cfg = ScenarioConfig(seed=seed, num_classes=num_classes, latent_dim=latent_dim,
                         style_dim=style_dim, sample_dim=sample_dim, tau_target=tau_target,
                         tau_eval=tau_eval, centroid_noise=centroid_noise, **kwargs)
    return build_scenario(cfg)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    prior = make_toy_prior(cfg.seed, cfg.latent_dim, cfg.style_dim, cfg.sample_dim,
                           style_samples=cfg.style_samples, psi=cfg.psi)
    C, d = cfg.num_classes, cfg.sample_dim
    planted = substream(cfg.seed, "scenario", "planted").standard_normal((C, cfg.latent_dim))
    centroids = generate(prior, planted)
    eval_centroids = centroids + cfg.centroid_noise * substream(cfg.seed, "scenario", "eval").standard_normal((C, d))
    train = centroids[:, None, :] + cfg.train_noise * substream(cfg.seed, "scenario", "train").standard_normal(
        (C, cfg.train_per_class, d))
    return Scenario(
        config=cfg,
        prior=prior,
        target=ToyClassifier(centroids, cfg.tau_target),
        evaluation=ToyClassifier(eval_centroids, cfg.tau_eval),
        training_sets=train,
        planted_latents=planted,
    )
