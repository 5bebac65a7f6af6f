"""Neighborhood construction: K-means++ over reduced embeddings.

The fitted partition is what the negative sampler consumes: every entity
belongs to exactly one cluster, and corruption candidates are drawn from
the clusters nearest to the entity being corrupted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import lemb
from .errors import FormatError, ValidationError
from .utils import check_matrix, check_rng, check_vector

__all__ = ["KMeansPP", "ClusterModel", "kmeanspp_init", "centroid_distances",
           "nearest_clusters", "build_cluster_dict"]


def _sq_dists_to(X, centroids) -> np.ndarray:
    """Squared Euclidean distances, shape (n_points, n_centroids)."""
    # ||x-c||^2 = ||x||^2 - 2 x.c + ||c||^2, clipped against rounding
    d2 = (
        (X * X).sum(axis=1)[:, None]
        - 2.0 * (X @ centroids.T)
        + (centroids * centroids).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def kmeanspp_init(X, n_clusters: int, rng) -> np.ndarray:
    """Seed centroids: first uniform, the rest D^2-weighted.

    Each subsequent centroid is a data row drawn with probability
    proportional to its squared distance to the nearest centroid chosen so
    far, so already-covered rows (distance 0) are never re-picked while any
    uncovered row remains.
    """
    X = check_matrix(X, "X")
    rng = check_rng(rng)
    n = X.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValidationError(f"n_clusters must be in [1, {n}], got {n_clusters}")
    centroids = np.empty((n_clusters, X.shape[1]), dtype=np.float64)
    centroids[0] = X[rng.integers(n)]
    if n_clusters == 1:
        return centroids
    # direct differences, not the expanded form: rows identical to a chosen
    # centroid must get exactly zero weight
    best_d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for k in range(1, n_clusters):
        total = best_d2.sum()
        if total > 0.0:
            idx = rng.choice(n, p=best_d2 / total)
        else:
            # fewer distinct rows than clusters: duplicates are unavoidable
            idx = rng.integers(n)
        centroids[k] = X[idx]
        if k < n_clusters - 1:
            np.minimum(best_d2, ((X - centroids[k]) ** 2).sum(axis=1), out=best_d2)
    return centroids


def _repair_empty(labels, d2_assigned, n_clusters):
    """Reseat the point farthest from its centroid into each empty cluster.

    Keeps the cluster count fixed. Empty clusters are filled in ascending
    index order; a reseated point cannot be picked twice because its
    distance is zeroed. Stealing a singleton's only point can empty the
    donor, so the scan repeats until the partition is stable. If every
    remaining distance is zero (duplicate rows), empties are accepted.
    """
    while True:
        counts = np.bincount(labels, minlength=n_clusters)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0 or d2_assigned.max() == 0.0:
            return labels
        for c in empty:
            if d2_assigned.max() == 0.0:
                return labels
            idx = int(np.argmax(d2_assigned))
            labels[idx] = c
            d2_assigned[idx] = 0.0


class KMeansPP(BaseEstimator):
    """Lloyd's algorithm with K-means++ seeding.

    Assignment uses squared Euclidean distance with ties broken toward the
    lowest cluster index; empty clusters are repaired by reseating the
    farthest point, so exactly `n_clusters` clusters survive. Iterations
    stop when the largest centroid displacement drops below `tol`.
    """

    def __init__(self, n_clusters: int = 8, max_iter: int = 1000,
                 tol: float = 1e-6, random_state=None):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        if self.max_iter < 1:
            raise ValidationError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ValidationError(f"tol must be >= 0, got {self.tol}")
        rng = check_rng(self.random_state)
        k = self.n_clusters
        centroids = kmeanspp_init(X, k, rng)
        history = []
        n_iter = 0
        for _ in range(self.max_iter):
            n_iter += 1
            d2 = _sq_dists_to(X, centroids)
            labels = np.argmin(d2, axis=1)
            d2_assigned = d2[np.arange(X.shape[0]), labels]
            labels = _repair_empty(labels, d2_assigned, k)
            # repair leaves empties only for degenerate duplicate data, in
            # which case the old centroid is kept
            new_centroids = centroids.copy()
            for c in range(k):
                members = labels == c
                if members.any():
                    new_centroids[c] = X[members].mean(axis=0)
            shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
            centroids = new_centroids
            history.append(_sq_dists_to(X, centroids)[np.arange(X.shape[0]), labels].sum())
            if shift < self.tol:
                break
        # final assignment pass (no repair, no update): at convergence every
        # point must sit with its exactly-nearest centroid, ties to lowest index
        d2 = _sq_dists_to(X, centroids)
        labels = np.argmin(d2, axis=1)
        d2_assigned = d2[np.arange(X.shape[0]), labels]
        history.append(float(d2_assigned.sum()))

        self.cluster_centers_ = centroids
        self.labels_ = labels.astype(np.int64)
        self.inertia_ = float(d2_assigned.sum())
        self.n_iter_ = n_iter
        self.inertia_history_ = [float(v) for v in history]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_matrix(X, "X")
        return np.argmin(_sq_dists_to(X, self.cluster_centers_), axis=1)

    def transform(self, X) -> np.ndarray:
        """Euclidean distances from each row to every centroid."""
        self._check_fitted()
        X = check_matrix(X, "X")
        return np.sqrt(_sq_dists_to(X, self.cluster_centers_))

    def _check_fitted(self):
        if not hasattr(self, "cluster_centers_"):
            raise NotFittedError("KMeansPP is not fitted")


@dataclass
class ClusterModel:
    """Fitted neighborhood: centroids, per-entity assignment, members.

    `reduced` keeps the entities' coordinates in the clustering space so
    that entity-to-centroid distances can be recomputed downstream.
    """

    centroids: np.ndarray        # (K, Z)
    assignment: np.ndarray       # (|E|,) cluster id per entity
    reduced: np.ndarray          # (|E|, Z)
    inertia: float
    iterations_run: int
    seed: int | None = None

    def __post_init__(self):
        if self.assignment.shape[0] != self.reduced.shape[0]:
            raise ValidationError("assignment and reduced row counts differ")
        if self.centroids.shape[1] != self.reduced.shape[1]:
            raise ValidationError("centroid and reduced dimensionality differ")
        k = self.centroids.shape[0]
        self.members = [np.flatnonzero(self.assignment == c) for c in range(k)]

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    @property
    def n_entities(self) -> int:
        return self.assignment.shape[0]

    @classmethod
    def from_estimator(cls, est: KMeansPP, reduced, seed=None) -> "ClusterModel":
        return cls(centroids=est.cluster_centers_, assignment=est.labels_,
                   reduced=np.asarray(reduced, dtype=np.float64),
                   inertia=est.inertia_, iterations_run=est.n_iter_, seed=seed)

    # --- persistence: JSON header + LEMB centroids + u32 assignment -------

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header = {
            "k": int(self.n_clusters),
            "z": int(self.centroids.shape[1]),
            "num_entities": int(self.n_entities),
            "inertia": self.inertia,
            "iterations_run": int(self.iterations_run),
            "seed": self.seed,
        }
        (directory / "header.json").write_text(
            json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        lemb.write_matrix(directory / "centroids.lemb", self.centroids)
        lemb.write_matrix(directory / "reduced.lemb", self.reduced)
        with open(directory / "assignment.u32", "wb") as fh:
            fh.write(self.assignment.astype("<u4").tobytes())

    @classmethod
    def load(cls, directory) -> "ClusterModel":
        directory = Path(directory)
        header = json.loads((directory / "header.json").read_text(encoding="utf-8"))
        centroids = lemb.read_matrix(directory / "centroids.lemb").astype(np.float64)
        reduced = lemb.read_matrix(directory / "reduced.lemb").astype(np.float64)
        raw = (directory / "assignment.u32").read_bytes()
        assignment = np.frombuffer(raw, dtype="<u4").astype(np.int64)
        if centroids.shape[0] != header["k"] or centroids.shape[1] != header["z"]:
            raise FormatError(f"{directory}: centroid shape does not match header")
        if assignment.shape[0] != header["num_entities"]:
            raise FormatError(f"{directory}: assignment length does not match header")
        if assignment.size and assignment.max() >= header["k"]:
            raise FormatError(f"{directory}: assignment references unknown cluster")
        return cls(centroids=centroids, assignment=assignment, reduced=reduced,
                   inertia=header["inertia"], iterations_run=header["iterations_run"],
                   seed=header["seed"])


def build_cluster_dict(model: ClusterModel, vocab) -> dict[int, int]:
    """Entity-id to cluster-id mapping, defined for every vocab entity."""
    if len(vocab) != model.n_entities:
        raise ValidationError(
            f"cluster model covers {model.n_entities} entities, vocab has {len(vocab)}")
    return {eid: int(c) for eid, c in enumerate(model.assignment)}


def centroid_distances(point, model: ClusterModel) -> np.ndarray:
    """Euclidean distance from `point` to every centroid, index-aligned."""
    point = check_vector(point, "point", dim=model.centroids.shape[1])
    return np.sqrt(_sq_dists_to(point[None, :], model.centroids)).ravel()


def nearest_clusters(entity_id: int, model: ClusterModel) -> np.ndarray:
    """Cluster ids sorted by ascending distance to the entity, ties by index."""
    dists = centroid_distances(model.reduced[entity_id], model)
    return np.argsort(dists, kind="stable")
