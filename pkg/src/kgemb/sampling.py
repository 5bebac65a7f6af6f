"""Negative batch generation: uniform corruption, cluster-guided ("lemon")
corruption, and self-adversarial weighting.

Both samplers pick one corrupt position (head or tail) per positive triple
and draw N replacement entities with replacement. The lemon strategy draws
them from the clusters nearest to the corrupted entity in reduced
text-embedding space; uniform draws them from the whole entity set. The
original entity is never produced as its own replacement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterModel, centroid_distances
from .datasets import TrueTripleIndex
from .errors import ConfigError
from .utils import check_rng

__all__ = ["NegSamplerConfig", "NegativeBatch", "UniformSampler", "LemonSampler",
           "choose_corrupt_positions", "lemon_candidates", "self_adv_weights",
           "make_sampler"]

log = logging.getLogger(__name__)

HEAD, TAIL = 0, 1

# give up redrawing filtered true triples after this many passes
MAX_FILTER_PASSES = 10


@dataclass
class NegSamplerConfig:
    strategy: str = "uniform"            # "uniform" | "lemon"
    num_negatives: int = 1               # N replacements per positive
    num_hops: int = 1                    # H nearest clusters (lemon)
    d_max: float | None = None           # optional distance cutoff instead of H
    filter_true: bool = False
    seed: int = 0

    def validate(self, n_clusters: int | None = None) -> None:
        if self.strategy not in ("uniform", "lemon"):
            raise ConfigError(f"unknown sampling strategy {self.strategy!r}")
        if self.num_negatives < 1:
            raise ConfigError(f"num_negatives must be >= 1, got {self.num_negatives}")
        if self.strategy == "lemon":
            if self.d_max is None and self.num_hops < 1:
                raise ConfigError(f"num_hops must be >= 1, got {self.num_hops}")
            if n_clusters is not None and self.d_max is None \
                    and self.num_hops > n_clusters:
                raise ConfigError(
                    f"num_hops ({self.num_hops}) exceeds cluster count ({n_clusters})")


@dataclass
class NegativeBatch:
    """Per positive: the corrupted side and N replacement entity ids."""

    positions: np.ndarray      # (B,) uint8, HEAD or TAIL
    replacements: np.ndarray   # (B, N) int64


def choose_corrupt_positions(rng, size: int, p_head: float = 0.5) -> np.ndarray:
    """Bernoulli head-or-tail choice per positive; p_head=1.0 forces head."""
    rng = check_rng(rng)
    return np.where(rng.random(size) < p_head, HEAD, TAIL).astype(np.uint8)


def lemon_candidates(entity_id: int, model: ClusterModel, num_hops: int,
                     d_max: float | None = None) -> np.ndarray:
    """Corruption candidates: members of the nearest clusters, minus self.

    Distances from the entity's reduced embedding to all centroids are
    sorted ascending (ties by cluster index); the members of the first
    `num_hops` clusters are unioned. With `d_max` given, every cluster
    within that distance is taken instead. An empty result signals the
    caller to fall back to uniform corruption.
    """
    dists = centroid_distances(model.reduced[entity_id], model)
    order = np.argsort(dists, kind="stable")
    if d_max is not None:
        order = order[dists[order] <= d_max]
    else:
        if num_hops > model.n_clusters:
            raise ConfigError(
                f"num_hops ({num_hops}) exceeds cluster count ({model.n_clusters})")
        order = order[:num_hops]
    if order.size == 0:
        return np.empty(0, dtype=np.int64)
    union = np.concatenate([model.members[c] for c in order])
    return union[union != entity_id]


def self_adv_weights(neg_scores, tau: float) -> np.ndarray:
    """Softmax over tau-scaled scores, computed with max-subtraction.

    The result is used as constant weights on the negative loss terms; no
    gradient flows through it.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    scores = np.asarray(neg_scores, dtype=np.float64)
    if not np.isfinite(scores).all():
        raise ConfigError("non-finite score passed to self_adv_weights")
    scaled = tau * scores
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    w = np.exp(scaled)
    return w / w.sum(axis=-1, keepdims=True)


class UniformSampler:
    """Replacements drawn uniformly over all entities except the original."""

    def __init__(self, config: NegSamplerConfig, num_entities: int,
                 true_index: TrueTripleIndex | None = None):
        config.validate()
        if num_entities < 2:
            raise ConfigError("uniform corruption needs at least 2 entities")
        if config.filter_true and true_index is None:
            raise ConfigError("filter_true requires a true-triple index")
        self.config = config
        self.num_entities = num_entities
        self.true_index = true_index

    def sample(self, triples, rng, p_head: float = 0.5) -> NegativeBatch:
        rng = check_rng(rng)
        triples = np.asarray(triples, dtype=np.int64)
        n = self.config.num_negatives
        positions = choose_corrupt_positions(rng, triples.shape[0], p_head)
        targets = np.where(positions == HEAD, triples[:, 0], triples[:, 2])
        # draw in [0, |E|-1) and shift past the original entity
        repl = rng.integers(0, self.num_entities - 1,
                            size=(triples.shape[0], n), dtype=np.int64)
        repl += repl >= targets[:, None]
        batch = NegativeBatch(positions, repl)
        if self.config.filter_true:
            _redraw_true(batch, triples, self.true_index, rng,
                         lambda i, size: self._redraw(targets[i], size, rng))
        return batch

    def _redraw(self, target, size, rng):
        r = rng.integers(0, self.num_entities - 1, size=size, dtype=np.int64)
        return r + (r >= target)


class LemonSampler:
    """Cluster-guided corruption: replacements come from the clusters
    nearest to the corrupted entity.

    Candidate unions are built once per entity and cached; clustering is a
    preprocessing step, so distances never change during training. When an
    entity's union is empty (alone in its selected clusters) the draw falls
    back to uniform corruption and the event is counted.
    """

    def __init__(self, config: NegSamplerConfig, cluster_model: ClusterModel,
                 true_index: TrueTripleIndex | None = None,
                 cache_limit_bytes: int = 256 * 2**20):
        config.validate(n_clusters=cluster_model.n_clusters)
        if config.strategy != "lemon":
            raise ConfigError(f"LemonSampler got strategy {config.strategy!r}")
        if config.filter_true and true_index is None:
            raise ConfigError("filter_true requires a true-triple index")
        self.config = config
        self.model = cluster_model
        self.num_entities = cluster_model.n_entities
        self.true_index = true_index
        self.fallback_count = 0
        self._cache: dict[int, np.ndarray] = {}
        self._cache_bytes = 0
        self._cache_limit = cache_limit_bytes
        self._warned_fallback = False

    def candidates_for(self, entity_id: int) -> np.ndarray:
        cached = self._cache.get(entity_id)
        if cached is not None:
            return cached
        cand = lemon_candidates(entity_id, self.model, self.config.num_hops,
                                self.config.d_max)
        if self._cache_bytes + cand.nbytes <= self._cache_limit:
            self._cache[entity_id] = cand
            self._cache_bytes += cand.nbytes
        return cand

    def sample(self, triples, rng, p_head: float = 0.5) -> NegativeBatch:
        rng = check_rng(rng)
        triples = np.asarray(triples, dtype=np.int64)
        n = self.config.num_negatives
        positions = choose_corrupt_positions(rng, triples.shape[0], p_head)
        targets = np.where(positions == HEAD, triples[:, 0], triples[:, 2])
        repl = np.empty((triples.shape[0], n), dtype=np.int64)
        for i, target in enumerate(targets):
            cand = self.candidates_for(int(target))
            if cand.size == 0:
                self._note_fallback(int(target))
                r = rng.integers(0, self.num_entities - 1, size=n, dtype=np.int64)
                repl[i] = r + (r >= target)
            else:
                repl[i] = cand[rng.integers(0, cand.size, size=n)]
        batch = NegativeBatch(positions, repl)
        if self.config.filter_true:
            _redraw_true(batch, triples, self.true_index, rng,
                         lambda i, size: self._redraw(int(targets[i]), size, rng))
        return batch

    def _redraw(self, target, size, rng):
        cand = self.candidates_for(target)
        if cand.size == 0:
            r = rng.integers(0, self.num_entities - 1, size=size, dtype=np.int64)
            return r + (r >= target)
        return cand[rng.integers(0, cand.size, size=size)]

    def _note_fallback(self, entity_id: int) -> None:
        self.fallback_count += 1
        if not self._warned_fallback:
            log.warning("entity %d has no cluster candidates, falling back to "
                        "uniform corruption (logged once)", entity_id)
            self._warned_fallback = True


def _redraw_true(batch: NegativeBatch, triples, index: TrueTripleIndex, rng,
                 redraw) -> None:
    """Redraw replacements that happen to form true triples, in place.

    Bounded: after MAX_FILTER_PASSES the remaining collisions are kept.
    """
    for i, (h, r, t) in enumerate(triples):
        h, r, t = int(h), int(r), int(t)
        if batch.positions[i] == HEAD:
            truth = index.heads(r, t)
        else:
            truth = index.tails(h, r)
        if not truth:
            continue
        row = batch.replacements[i]
        for _ in range(MAX_FILTER_PASSES):
            bad = np.array([e in truth for e in row])
            if not bad.any():
                break
            row[bad] = redraw(i, int(bad.sum()))


def make_sampler(config: NegSamplerConfig, num_entities: int,
                 cluster_model: ClusterModel | None = None,
                 true_index: TrueTripleIndex | None = None):
    """Build the sampler named by `config.strategy`."""
    if config.strategy == "lemon":
        if cluster_model is None:
            raise ConfigError("lemon strategy requires a cluster model")
        return LemonSampler(config, cluster_model, true_index)
    return UniformSampler(config, num_entities, true_index)
