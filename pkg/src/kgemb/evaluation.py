"""Filtered and raw link-prediction ranking with MR / MRR / Hits@k.

Each test triple yields two queries: predict the head given (?, r, t) and
the tail given (h, r, ?). All entities are scored as substitutes; the true
entity's rank uses the mid-rank tie rule

    rank = 1 + #{better} + #{equal, other than the true entity} / 2

so a constant scorer ranks everything at (|E|+1)/2 instead of 1. Filtered
mode first removes candidates that form a different known-true triple.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .datasets import TrueTripleIndex
from .models import score_candidates

__all__ = ["RankRecord", "MetricsReport", "rank_query", "evaluate"]

HITS_KS = (1, 3, 10)


@dataclass
class RankRecord:
    triple: tuple
    side: str
    raw_rank: float
    filtered_rank: float


@dataclass
class MetricsReport:
    mr: float
    mrr: float
    hits: dict            # k -> fraction, filtered
    raw_mr: float
    raw_mrr: float
    raw_hits: dict
    num_queries: int

    def to_dict(self) -> dict:
        return {
            "filtered": {"MR": self.mr, "MRR": self.mrr,
                         **{f"Hits@{k}": v for k, v in self.hits.items()}},
            "raw": {"MR": self.raw_mr, "MRR": self.raw_mrr,
                    **{f"Hits@{k}": v for k, v in self.raw_hits.items()}},
            "num_queries": self.num_queries,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        """Aligned table with one metric per row."""
        rows = [("Metric", "filtered", "raw"),
                ("MRR", f"{self.mrr:.4f}", f"{self.raw_mrr:.4f}"),
                ("MR", f"{self.mr:.2f}", f"{self.raw_mr:.2f}")]
        for k in sorted(self.hits):
            rows.append((f"H@{k}", f"{100 * self.hits[k]:.2f}",
                         f"{100 * self.raw_hits[k]:.2f}"))
        widths = [max(len(row[i]) for row in rows) for i in range(3)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                 for row in rows]
        return "\n".join(lines)


def _candidate_scores(model, h, r, t, side) -> np.ndarray:
    """Duck-typed scoring: anything with a score_candidates method works."""
    fn = getattr(model, "score_candidates", None)
    if fn is not None:
        return np.asarray(fn(h, r, t, side), dtype=np.float64)
    return score_candidates(model, h, r, t, side)


def _rank_from_scores(scores: np.ndarray, true_id: int, mask=None) -> float:
    """Mid-rank of `true_id` among (optionally masked) candidates."""
    s_true = scores[true_id]
    if mask is not None:
        scores = scores[mask]
    better = int((scores > s_true).sum())
    equal = int((scores == s_true).sum()) - 1  # the true entity ties itself
    return 1.0 + better + equal / 2.0


def rank_query(model, triple, side: str,
               index: TrueTripleIndex | None = None) -> RankRecord:
    """Raw and filtered rank of the true entity for one query."""
    h, r, t = (int(x) for x in triple)
    scores = _candidate_scores(model, h, r, t, side)
    true_id = h if side == "head" else t
    raw = _rank_from_scores(scores, true_id)
    if index is None:
        return RankRecord((h, r, t), side, raw, raw)
    known = index.heads(r, t) if side == "head" else index.tails(h, r)
    mask = np.ones(scores.shape[0], dtype=bool)
    for e in known:
        mask[e] = False
    mask[true_id] = True  # the query's own entity always competes
    filtered = _rank_from_scores(scores, true_id, mask)
    return RankRecord((h, r, t), side, raw, filtered)


def evaluate(model, test_triples, index: TrueTripleIndex | None = None,
             ks=HITS_KS) -> MetricsReport:
    """Head and tail queries for every test triple (2 x |test| ranks)."""
    raw_ranks, filt_ranks = [], []
    for triple in np.asarray(test_triples, dtype=np.int64):
        for side in ("head", "tail"):
            rec = rank_query(model, triple, side, index)
            raw_ranks.append(rec.raw_rank)
            filt_ranks.append(rec.filtered_rank)
    raw = np.array(raw_ranks, dtype=np.float64)
    filt = np.array(filt_ranks, dtype=np.float64)
    if raw.size == 0:
        nan = float("nan")
        empty = {k: nan for k in ks}
        return MetricsReport(nan, nan, dict(empty), nan, nan, dict(empty), 0)
    return MetricsReport(
        mr=float(filt.mean()),
        mrr=float((1.0 / filt).mean()),
        hits={k: float((filt <= k).mean()) for k in ks},
        raw_mr=float(raw.mean()),
        raw_mrr=float((1.0 / raw).mean()),
        raw_hits={k: float((raw <= k).mean()) for k in ks},
        num_queries=int(raw.size),
    )
