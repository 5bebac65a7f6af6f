"""Translational and bilinear KGE models: scoring, loss, exact gradients,
and sparse Adam updates.

Scores follow a plausibility convention (higher is better). For the two
distance models the score is margin minus distance, so score <= margin
with equality only when the translated/rotated head lands on the tail.

Parameter layout:
    transe    entity (|E|, D), relation (|R|, D)
    distmult  entity (|E|, D), relation (|R|, D)
    rotate    entity (|E|, 2D) as [real parts | imaginary parts],
              relation (|R|, D) rotation phases in (-pi, pi]
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import lemb
from .errors import ConfigError, FormatError, TrainingError
from .sampling import HEAD, NegativeBatch, self_adv_weights
from .utils import check_rng

__all__ = ["KgeModel", "SparseGrads", "AdamState", "init_model", "score",
           "score_batch", "score_candidates", "loss_and_grads", "apply_update",
           "save_checkpoint", "load_checkpoint"]

KINDS = ("transe", "distmult", "rotate")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class KgeModel:
    kind: str
    dim: int
    gamma: float
    entity_params: np.ndarray     # (|E|, P)
    relation_params: np.ndarray   # (|R|, Q)
    norm: str = "l1"              # aggregation for transe/rotate distances

    @property
    def num_entities(self) -> int:
        return self.entity_params.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relation_params.shape[0]


def init_model(kind: str, num_entities: int, num_relations: int, dim: int,
               gamma: float, seed=None, norm: str = "l1") -> KgeModel:
    """Uniform init in [-(gamma+2)/dim, +(gamma+2)/dim]; rotate phases
    uniform in (-pi, pi]."""
    if kind not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    if norm not in ("l1", "l2"):
        raise ConfigError(f"norm must be 'l1' or 'l2', got {norm!r}")
    rng = check_rng(seed)
    bound = (gamma + 2.0) / dim
    ent_cols = 2 * dim if kind == "rotate" else dim
    entity = rng.uniform(-bound, bound, size=(num_entities, ent_cols))
    if kind == "rotate":
        # pi - u with u in [0, 2pi) lands in (-pi, pi]
        relation = np.pi - rng.uniform(0.0, 2.0 * np.pi, size=(num_relations, dim))
    else:
        relation = rng.uniform(-bound, bound, size=(num_relations, dim))
    return KgeModel(kind, dim, float(gamma), entity, relation, norm)


def _wrap_phases(theta: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


# --- scoring -------------------------------------------------------------


def _rotate_residual(eh, theta, et, dim):
    re_h, im_h = eh[..., :dim], eh[..., dim:]
    cos, sin = np.cos(theta), np.sin(theta)
    re_rot = re_h * cos - im_h * sin
    im_rot = re_h * sin + im_h * cos
    return re_rot - et[..., :dim], im_rot - et[..., dim:], re_rot, im_rot, cos, sin


def _score_rows(model: KgeModel, eh, wr, et) -> np.ndarray:
    """Scores for stacked parameter rows; eh/et (M, P), wr (M, Q)."""
    if model.kind == "transe":
        u = eh + wr - et
        if model.norm == "l1":
            return model.gamma - np.abs(u).sum(axis=-1)
        return model.gamma - np.sqrt((u * u).sum(axis=-1))
    if model.kind == "distmult":
        return (eh * wr * et).sum(axis=-1)
    re_u, im_u, *_ = _rotate_residual(eh, wr, et, model.dim)
    mod = np.sqrt(re_u * re_u + im_u * im_u)
    if model.norm == "l1":
        return model.gamma - mod.sum(axis=-1)
    return model.gamma - np.sqrt((mod * mod).sum(axis=-1))


def score(model: KgeModel, h: int, r: int, t: int) -> float:
    """Plausibility of a single triple."""
    return float(score_batch(model, np.array([[h, r, t]]))[0])


def score_batch(model: KgeModel, triples) -> np.ndarray:
    triples = np.asarray(triples, dtype=np.int64)
    eh = model.entity_params[triples[:, 0]]
    wr = model.relation_params[triples[:, 1]]
    et = model.entity_params[triples[:, 2]]
    return _score_rows(model, eh, wr, et)


def score_candidates(model: KgeModel, h: int, r: int, t: int, side: str) -> np.ndarray:
    """Score every entity substituted at `side` of (h, r, t); length |E|."""
    E = model.entity_params
    wr = model.relation_params[r]
    if side == "head":
        eh, et = E, np.broadcast_to(E[t], E.shape)
    elif side == "tail":
        eh, et = np.broadcast_to(E[h], E.shape), E
    else:
        raise ConfigError(f"side must be 'head' or 'tail', got {side!r}")
    return _score_rows(model, eh, np.broadcast_to(wr, (E.shape[0], wr.shape[0])), et)


# --- loss and gradients ---------------------------------------------------


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _safe_div(num, den):
    """num/den with 0 where den == 0 (subgradient choice at kinks)."""
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0)
    return out


def _score_grad_rows(model: KgeModel, eh, wr, et, upstream):
    """d(upstream . scores)/d{eh, wr, et} for stacked rows."""
    up = upstream[..., None]
    if model.kind == "transe":
        u = eh + wr - et
        if model.norm == "l1":
            dsdu = -np.sign(u)
        else:
            dsdu = -_safe_div(u, np.sqrt((u * u).sum(axis=-1, keepdims=True)))
        g = up * dsdu
        return g, g.copy(), -g
    if model.kind == "distmult":
        return up * wr * et, up * eh * et, up * eh * wr
    dim = model.dim
    re_u, im_u, re_rot, im_rot, cos, sin = _rotate_residual(eh, wr, et, dim)
    if model.norm == "l1":
        mod = np.sqrt(re_u * re_u + im_u * im_u)
        gre = -_safe_div(re_u, mod)
        gim = -_safe_div(im_u, mod)
    else:
        total = np.sqrt((re_u * re_u + im_u * im_u).sum(axis=-1, keepdims=True))
        gre = -_safe_div(re_u, np.broadcast_to(total, re_u.shape))
        gim = -_safe_div(im_u, np.broadcast_to(total, im_u.shape))
    d_re_h = gre * cos + gim * sin
    d_im_h = -gre * sin + gim * cos
    d_theta = gre * (-im_rot) + gim * re_rot
    gh = up * np.concatenate([d_re_h, d_im_h], axis=-1)
    gr = up * d_theta
    gt = up * np.concatenate([-gre, -gim], axis=-1)
    return gh, gr, gt


@dataclass
class SparseGrads:
    """Gradients for the touched rows only."""

    entity_ids: np.ndarray       # (ne,) unique, sorted
    entity_grads: np.ndarray     # (ne, P)
    relation_ids: np.ndarray     # (nr,) unique, sorted
    relation_grads: np.ndarray   # (nr, Q)


def _aggregate(ids, grads, width):
    uniq, inverse = np.unique(ids, return_inverse=True)
    out = np.zeros((uniq.shape[0], width), dtype=np.float64)
    np.add.at(out, inverse, grads)
    return uniq, out


def loss_and_grads(model: KgeModel, positives, negatives: NegativeBatch,
                   mode: str = "plain", tau: float = 1.0):
    """Negative-sampling logistic loss and its exact sparse gradients.

    L = mean_b [ -log sig(s_pos) - sum_i w_i log sig(-s_neg_i) ] with
    w_i = 1/N in plain mode and softmax(tau * s_neg) (held constant) in
    self_adv mode.
    """
    if mode not in ("plain", "self_adv"):
        raise ConfigError(f"unknown loss mode {mode!r}")
    positives = np.asarray(positives, dtype=np.int64)
    b, n = negatives.replacements.shape
    h, r, t = positives[:, 0], positives[:, 1], positives[:, 2]

    head_side = negatives.positions == HEAD
    neg_h = np.where(head_side[:, None], negatives.replacements, h[:, None])
    neg_t = np.where(head_side[:, None], t[:, None], negatives.replacements)
    neg_r = np.broadcast_to(r[:, None], (b, n))

    eh_p = model.entity_params[h]
    wr_p = model.relation_params[r]
    et_p = model.entity_params[t]
    s_pos = _score_rows(model, eh_p, wr_p, et_p)

    eh_n = model.entity_params[neg_h.ravel()]
    wr_n = model.relation_params[neg_r.ravel()]
    et_n = model.entity_params[neg_t.ravel()]
    s_neg = _score_rows(model, eh_n, wr_n, et_n).reshape(b, n)

    if not (np.isfinite(s_pos).all() and np.isfinite(s_neg).all()):
        bad = int(np.flatnonzero(~np.isfinite(s_pos))[0]) \
            if not np.isfinite(s_pos).all() \
            else int(np.flatnonzero(~np.isfinite(s_neg).all(axis=1))[0])
        raise TrainingError(f"non-finite score for triple {tuple(positives[bad])}")

    if mode == "self_adv":
        weights = self_adv_weights(s_neg, tau)
    else:
        weights = np.full_like(s_neg, 1.0 / n)

    loss = float(np.mean(-_log_sigmoid(s_pos)
                         - (weights * _log_sigmoid(-s_neg)).sum(axis=1)))
    if not np.isfinite(loss):
        raise TrainingError(f"non-finite loss on batch of {b} triples")

    up_pos = (_sigmoid(s_pos) - 1.0) / b
    up_neg = (weights * _sigmoid(s_neg)) / b

    gh_p, gr_p, gt_p = _score_grad_rows(model, eh_p, wr_p, et_p, up_pos)
    gh_n, gr_n, gt_n = _score_grad_rows(model, eh_n, wr_n, et_n, up_neg.ravel())

    ent_ids = np.concatenate([h, t, neg_h.ravel(), neg_t.ravel()])
    ent_rows = np.concatenate([gh_p, gt_p, gh_n, gt_n])
    rel_ids = np.concatenate([r, neg_r.ravel()])
    rel_rows = np.concatenate([gr_p, gr_n])

    eids, egrads = _aggregate(ent_ids, ent_rows, model.entity_params.shape[1])
    rids, rgrads = _aggregate(rel_ids, rel_rows, model.relation_params.shape[1])
    return loss, SparseGrads(eids, egrads, rids, rgrads)


# --- optimizer ------------------------------------------------------------


@dataclass
class AdamState:
    m_entity: np.ndarray
    v_entity: np.ndarray
    m_relation: np.ndarray
    v_relation: np.ndarray
    step: int = 0

    @classmethod
    def for_model(cls, model: KgeModel) -> "AdamState":
        return cls(np.zeros_like(model.entity_params),
                   np.zeros_like(model.entity_params),
                   np.zeros_like(model.relation_params),
                   np.zeros_like(model.relation_params))


def _adam_rows(params, m, v, ids, grads, lr, step):
    mi = ADAM_BETA1 * m[ids] + (1.0 - ADAM_BETA1) * grads
    vi = ADAM_BETA2 * v[ids] + (1.0 - ADAM_BETA2) * grads * grads
    m[ids] = mi
    v[ids] = vi
    m_hat = mi / (1.0 - ADAM_BETA1 ** step)
    v_hat = vi / (1.0 - ADAM_BETA2 ** step)
    params[ids] -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def apply_update(model: KgeModel, grads: SparseGrads, state: AdamState,
                 lr: float) -> None:
    """One sparse Adam step over the touched rows; untouched rows are not
    written. Rotate phases are wrapped back into (-pi, pi]."""
    state.step += 1
    if grads.entity_ids.size:
        _adam_rows(model.entity_params, state.m_entity, state.v_entity,
                   grads.entity_ids, grads.entity_grads, lr, state.step)
    if grads.relation_ids.size:
        _adam_rows(model.relation_params, state.m_relation, state.v_relation,
                   grads.relation_ids, grads.relation_grads, lr, state.step)
        if model.kind == "rotate":
            model.relation_params[grads.relation_ids] = _wrap_phases(
                model.relation_params[grads.relation_ids])


# --- checkpoints -----------------------------------------------------------


def save_checkpoint(path, model: KgeModel, seed=None, step: int = 0) -> None:
    """Single-file checkpoint: one JSON header line, then entity and
    relation matrices as consecutive LEMB blobs."""
    header = {
        "kind": model.kind,
        "dim": model.dim,
        "gamma": model.gamma,
        "num_entities": model.num_entities,
        "num_relations": model.num_relations,
        "norm": model.norm,
        "seed": seed,
        "step": step,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(lemb.matrix_bytes(model.entity_params))
        fh.write(lemb.matrix_bytes(model.relation_params))


def load_checkpoint(path):
    """Returns (model, header_dict)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: bad checkpoint header: {exc}") from None
        entity = lemb.read_matrix_from(fh, name=f"{path}#entity").astype(np.float64)
        relation = lemb.read_matrix_from(fh, name=f"{path}#relation").astype(np.float64)
    if entity.shape[0] != header["num_entities"] \
            or relation.shape[0] != header["num_relations"]:
        raise FormatError(f"{path}: matrix shapes do not match header")
    model = KgeModel(header["kind"], header["dim"], header["gamma"],
                     entity, relation, header.get("norm", "l1"))
    return model, header
