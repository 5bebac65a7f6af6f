"""Entity-text embedding matrices: file ingestion, a deterministic fallback
embedder, and PCA dimensionality reduction.

Real sentence-encoder embeddings arrive as LEMB files produced elsewhere;
the fallback embedder lets every pipeline stage run without any encoder.
"""

from __future__ import annotations

import hashlib

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import lemb
from .datasets import Vocab
from .errors import FormatError, ValidationError
from .utils import check_matrix

__all__ = ["ingest_embedding_file", "fallback_embed", "PcaReducer"]


def ingest_embedding_file(emb_path, labels_path, vocab: Vocab) -> np.ndarray:
    """Load a LEMB matrix and permute its rows into vocab-id order.

    The labels file pairs row i with an entity label. Every vocab entity
    must have exactly one row; extra rows for unknown labels are dropped.
    """
    matrix = lemb.read_matrix(emb_path)
    labels = lemb.read_labels(labels_path)
    if len(labels) != matrix.shape[0]:
        raise FormatError(
            f"{labels_path}: {len(labels)} labels for {matrix.shape[0]} rows")
    row_of = {}
    for i, label in enumerate(labels):
        if label in row_of:
            raise FormatError(f"{labels_path}: duplicate label {label!r}")
        row_of[label] = i
    missing = [lab for lab in vocab.id_to_label if lab not in row_of]
    if missing:
        raise FormatError(
            f"{emb_path}: no embedding row for {len(missing)} entities, "
            f"first missing: {missing[0]!r}")
    order = np.array([row_of[lab] for lab in vocab.id_to_label], dtype=np.int64)
    return matrix[order]


def _trigrams(text: str):
    return [text[i:i + 3] for i in range(len(text) - 2)]


def _hash_trigram(trigram: str, seed: int) -> int:
    digest = hashlib.blake2b(trigram.encode("utf-8"),
                             digest_size=8,
                             key=seed.to_bytes(8, "little")).digest()
    return int.from_bytes(digest, "little")


def fallback_embed(texts, dim: int, seed: int = 0) -> np.ndarray:
    """Character-trigram hashing embedder, deterministic under (texts, seed).

    Each trigram hashes to a (bucket, sign) pair; a row is the L2-normalized
    signed bucket counts of its text. Texts shorter than 3 characters yield
    no trigrams and get the unit basis vector e_{id mod dim} instead, so the
    matrix never contains a zero row.
    """
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    out = np.zeros((len(texts), dim), dtype=np.float64)
    for i, text in enumerate(texts):
        row = out[i]
        for tri in _trigrams(text):
            h = _hash_trigram(tri, seed)
            bucket = h % dim
            sign = 1.0 if (h >> 63) & 1 else -1.0
            row[bucket] += sign
        norm = np.linalg.norm(row)
        if norm == 0.0:
            row[i % dim] = 1.0
        else:
            row /= norm
    return out


class PcaReducer(BaseEstimator, TransformerMixin):
    """PCA onto the top `n_components` directions of the centered data.

    Computed by thin SVD. Components are orthonormal rows ordered by
    decreasing explained variance; each component's largest-magnitude
    coordinate is made positive, which pins the otherwise arbitrary signs
    and keeps transforms deterministic.
    """

    def __init__(self, n_components: int = 2):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X, "X")
        n, d = X.shape
        z = self.n_components
        if not 1 <= z <= min(n - 1, d):
            raise ValidationError(
                f"n_components must be in [1, min(rows-1, cols)] = "
                f"[1, {min(n - 1, d)}], got {z}")
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        # thin SVD: right singular vectors are the principal directions
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        components = vt[:z]
        variance = (s[:z] ** 2) / (n - 1)
        # sign convention: largest-magnitude coordinate positive
        anchor = np.argmax(np.abs(components), axis=1)
        flip = np.sign(components[np.arange(z), anchor])
        flip[flip == 0] = 1.0
        self.components_ = components * flip[:, None]
        self.explained_variance_ = variance
        self.n_features_in_ = d
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "components_"):
            raise NotFittedError("PcaReducer is not fitted")
        X = check_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"X has {X.shape[1]} columns, model was fit on {self.n_features_in_}")
        return (X - self.mean_) @ self.components_.T
