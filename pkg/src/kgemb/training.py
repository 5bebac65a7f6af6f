"""Training orchestration: batching, preprocessing, the loss/update loop,
logging, and checkpointing.

Neighborhood clustering is strictly a preprocessing step: it runs exactly
once, before step 0, and its wall-clock cost is reported separately from
the step loop ("Embedding Generation" and "Cluster Formation" line items
plus a total).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import models
from .clustering import ClusterModel, KMeansPP
from .datasets import TripleStore, build_true_index, default_entity_texts, \
    load_entity_texts
from .embeddings import PcaReducer, fallback_embed, ingest_embedding_file
from .errors import ConfigError, TrainingError
from .evaluation import evaluate
from .sampling import NegSamplerConfig, make_sampler

__all__ = ["TrainConfig", "TrainLog", "PreprocessResult", "make_batches",
           "preprocess", "train"]

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """One training run. Serialized as a flat JSON object with exactly
    these field names."""

    model: str = "transe"            # transe | distmult | rotate
    dim: int = 100
    gamma: float = 12.0
    lr: float = 0.01
    tau: float = 1.0
    batch_size: int = 64
    num_negatives: int = 10
    strategy: str = "uniform"        # uniform | lemon
    num_clusters: int = 6
    num_hops: int = 5
    reduce_dim: int = 2
    d_max: float | None = None
    adversarial: bool = False
    filter_true: bool = False
    norm: str = "l1"
    max_steps: int = 1000
    eval_every: int = 0              # 0 disables periodic validation
    early_stop_patience: int = 0     # 0 disables; counts evals without gain
    seed: int = 0
    data_dir: str = ""
    embeddings_path: str = ""        # LEMB file; empty -> fallback embedder
    embeddings_labels_path: str = ""
    texts_path: str = ""             # entity text TSV; empty -> vocab labels
    fallback_dim: int = 64
    out_dir: str = ""

    RANGES = {
        "dim": (1, 100_000), "batch_size": (1, 1_000_000),
        "num_negatives": (1, 100_000), "num_clusters": (1, 1_000_000),
        "num_hops": (1, 1_000_000), "reduce_dim": (1, 100_000),
        "max_steps": (1, 100_000_000), "fallback_dim": (2, 100_000),
    }

    def validate(self) -> None:
        if self.model not in models.KINDS:
            raise ConfigError(f"unknown model kind {self.model!r}")
        if self.strategy not in ("uniform", "lemon"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.norm not in ("l1", "l2"):
            raise ConfigError(f"norm must be 'l1' or 'l2', got {self.norm!r}")
        if self.seed is None:
            raise ConfigError("seed is mandatory")
        for name, (lo, hi) in self.RANGES.items():
            value = getattr(self, name)
            if not lo <= value <= hi:
                raise ConfigError(f"{name}={value} outside [{lo}, {hi}]")
        for name in ("gamma", "lr", "tau"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.strategy == "lemon" and self.d_max is None \
                and self.num_hops > self.num_clusters:
            raise ConfigError(
                f"num_hops ({self.num_hops}) exceeds num_clusters ({self.num_clusters})")
        if self.eval_every < 0 or self.early_stop_patience < 0:
            raise ConfigError("eval_every and early_stop_patience must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json_file(cls, path) -> "TrainConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)


class TrainLog:
    """Append-only run log, written out as JSON lines."""

    def __init__(self):
        self.records: list[dict] = []

    def append(self, **record) -> None:
        self.records.append(record)

    def losses(self) -> list[float]:
        return [r["loss"] for r in self.records if r.get("event") == "step"]

    def eval_records(self) -> list[dict]:
        return [r for r in self.records if r.get("event") == "eval"]

    def preprocessing(self) -> dict | None:
        for r in self.records:
            if r.get("event") == "preprocessing":
                return r
        return None

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.records:
                fh.write(json.dumps(record, sort_keys=True))
                fh.write("\n")

    @classmethod
    def load(cls, path) -> "TrainLog":
        out = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.records.append(json.loads(line))
        return out


@dataclass
class PreprocessResult:
    cluster_model: ClusterModel | None
    embedding_generation_min: float
    cluster_formation_min: float
    total_min: float
    detail: dict = field(default_factory=dict)

    def format_table(self) -> str:
        return "\n".join([
            f"Embedding Generation: {self.embedding_generation_min:.4f} minutes",
            f"Cluster Formation: {self.cluster_formation_min:.4f} minutes",
            f"Total Time: {self.total_min:.4f} minutes",
        ])


def make_batches(train_triples, batch_size: int, rng) -> list[np.ndarray]:
    """One epoch: seeded shuffle, then contiguous chunks (last one short)."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    triples = np.asarray(train_triples, dtype=np.int64)
    order = rng.permutation(triples.shape[0])
    return [triples[order[i:i + batch_size]]
            for i in range(0, triples.shape[0], batch_size)]


def preprocess(config: TrainConfig, store: TripleStore,
               embeddings: np.ndarray | None = None) -> PreprocessResult:
    """Build the sampler's neighborhood: embeddings -> PCA -> K-means.

    Timed with a monotonic clock and reported in minutes. For the uniform
    strategy there is nothing to do and all durations are zero.
    """
    if config.strategy != "lemon":
        return PreprocessResult(None, 0.0, 0.0, 0.0)
    t0 = time.monotonic()
    if embeddings is None:
        if config.embeddings_path:
            labels = config.embeddings_labels_path
            if not labels:
                raise ConfigError("embeddings_path requires embeddings_labels_path")
            embeddings = ingest_embedding_file(config.embeddings_path, labels,
                                               store.entity_vocab)
        else:
            if config.texts_path:
                texts = load_entity_texts(config.texts_path, store.entity_vocab)
            else:
                texts = default_entity_texts(store.entity_vocab)
            embeddings = fallback_embed(texts, config.fallback_dim, config.seed)
    embeddings = np.asarray(embeddings, dtype=np.float64)
    z = min(config.reduce_dim, embeddings.shape[0] - 1, embeddings.shape[1])
    if z < 1:
        raise ConfigError("not enough entities to reduce dimensionality")
    reducer = PcaReducer(n_components=z).fit(embeddings)
    reduced = reducer.transform(embeddings)
    t1 = time.monotonic()

    k = min(config.num_clusters, store.num_entities)
    est = KMeansPP(n_clusters=k, max_iter=1000, tol=1e-6,
                   random_state=config.seed).fit(reduced)
    cluster_model = ClusterModel.from_estimator(est, reduced, seed=config.seed)
    t2 = time.monotonic()

    result = PreprocessResult(
        cluster_model=cluster_model,
        embedding_generation_min=(t1 - t0) / 60.0,
        cluster_formation_min=(t2 - t1) / 60.0,
        total_min=(t2 - t0) / 60.0,
        detail={"reduce_dim": z, "num_clusters": k,
                "kmeans_iterations": cluster_model.iterations_run,
                "inertia": cluster_model.inertia},
    )
    log.info("preprocessing done:\n%s", result.format_table())
    return result


def train(config: TrainConfig, store: TripleStore,
          embeddings: np.ndarray | None = None):
    """Run one training job; returns (model, TrainLog).

    All randomness flows from config.seed through independent spawned
    streams, so identical configs produce bitwise-identical checkpoints.
    """
    config.validate()
    if store.train.shape[0] == 0:
        raise ConfigError("training split is empty")
    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    run_log = TrainLog()
    run_log.append(event="config", **config.to_dict())

    wall0 = time.monotonic()
    prep = preprocess(config, store, embeddings)
    run_log.append(event="preprocessing",
                   embedding_generation_min=prep.embedding_generation_min,
                   cluster_formation_min=prep.cluster_formation_min,
                   total_min=prep.total_min, **prep.detail)

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    rng_init, rng_batches, rng_sampler = (np.random.default_rng(s) for s in seeds)

    model = models.init_model(config.model, store.num_entities,
                              store.num_relations, config.dim, config.gamma,
                              seed=rng_init, norm=config.norm)
    state = models.AdamState.for_model(model)
    index = build_true_index(store)
    sampler_cfg = NegSamplerConfig(
        strategy=config.strategy, num_negatives=config.num_negatives,
        num_hops=config.num_hops, d_max=config.d_max,
        filter_true=config.filter_true, seed=config.seed)
    sampler = make_sampler(sampler_cfg, store.num_entities,
                           cluster_model=prep.cluster_model, true_index=index)
    mode = "self_adv" if config.adversarial else "plain"

    best_mrr = -1.0
    evals_since_best = 0
    batches: list[np.ndarray] = []
    step = 0
    stop = False
    while step < config.max_steps and not stop:
        if not batches:
            batches = make_batches(store.train, config.batch_size, rng_batches)
        positives = batches.pop(0)
        negatives = sampler.sample(positives, rng_sampler)
        try:
            loss, grads = models.loss_and_grads(model, positives, negatives,
                                                mode=mode, tau=config.tau)
        except TrainingError:
            if out_dir:
                models.save_checkpoint(out_dir / "abort.ckpt", model,
                                       seed=config.seed, step=step)
                run_log.save(out_dir / "log.jsonl")
            raise
        models.apply_update(model, grads, state, config.lr)
        step += 1
        run_log.append(event="step", step=step, loss=loss)

        if config.eval_every and (step % config.eval_every == 0
                                  or step == config.max_steps):
            report = evaluate(model, store.valid, index) if store.valid.size \
                else evaluate(model, store.train, index)
            run_log.append(event="eval", step=step, split="valid",
                           **report.to_dict())
            if report.mrr > best_mrr:
                best_mrr = report.mrr
                evals_since_best = 0
                if out_dir:
                    models.save_checkpoint(out_dir / "best.ckpt", model,
                                           seed=config.seed, step=step)
            else:
                evals_since_best += 1
                if config.early_stop_patience \
                        and evals_since_best >= config.early_stop_patience:
                    run_log.append(event="early_stop", step=step)
                    stop = True

    fallbacks = getattr(sampler, "fallback_count", 0)
    if fallbacks:
        run_log.append(event="sampler_fallbacks", count=fallbacks)
    run_log.append(event="done", steps=step,
                   train_minutes=(time.monotonic() - wall0) / 60.0)
    if out_dir:
        models.save_checkpoint(out_dir / "final.ckpt", model,
                               seed=config.seed, step=step)
        run_log.save(out_dir / "log.jsonl")
    return model, run_log
