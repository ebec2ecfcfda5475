"""The three contrastive losses and their weighted combination.

All three follow the same per-anchor shape: minus the positive logit plus
a log-sum-exp over a masked set of negative logits, at temperature tau.
The positive term is excluded from the denominator by default (the strict
form); the widespread variant that includes it is available behind
``inclusive_denominator`` for comparison. A consequence of the strict form
is that losses can be negative.

Per-anchor terms are averaged, not summed, so the combination weights are
independent of batch size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    add,
    constant,
    cosine_sim,
    exp,
    gather_rows,
    log,
    matmul,
    mul,
    row_sum,
    scale,
)


class BatchTooSmall(ValueError):
    pass


class NonFinite(ArithmeticError):
    pass


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.1
    alpha: float = 1.0  # weight of the cross-graph local loss
    beta: float = 1.0   # weight of the within-graph local loss
    degenerate_single_edge_policy: str = "skip"
    inclusive_denominator: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.degenerate_single_edge_policy != "skip":
            raise ValueError("only the 'skip' single-edge policy is supported")


@dataclass(frozen=True)
class LossReport:
    """Scalar losses for one training step plus anchor counts."""

    l_graph: float
    l_intra: float
    l_inter: float
    l_total: float
    graph_anchors: int
    intra_anchors: int
    inter_anchors: int

    def to_json_dict(self) -> dict:
        return {
            "l_graph": self.l_graph,
            "l_intra": self.l_intra,
            "l_inter": self.l_inter,
            "l_total": self.l_total,
            "graph_anchors": self.graph_anchors,
            "intra_anchors": self.intra_anchors,
            "inter_anchors": self.inter_anchors,
        }


def _check_finite(data: np.ndarray, what: str) -> None:
    if not np.isfinite(data).all():
        raise NonFinite(f"{what} contains a non-finite value")


def masked_anchor_nll(sims: Tensor, neg_mask: np.ndarray, tau: float,
                      inclusive: bool = False) -> tuple[Tensor | None, int]:
    """Sum over anchors of -pos_logit + logsumexp(masked negative logits).

    ``sims`` is square with positives on the diagonal; ``neg_mask`` marks
    each anchor row's negatives. Rows without negatives are skipped (this
    is how single-edge graphs drop out). Returns (sum as 1x1 tensor, number
    of contributing anchors), or (None, 0) when nothing contributes.
    Row-max subtraction keeps the exponentials stable without changing the
    value.
    """
    n = sims.shape[0]
    if sims.shape != (n, n) or neg_mask.shape != (n, n):
        raise ValueError(f"expected square sims and mask, got {sims.shape} and {neg_mask.shape}")
    keep = neg_mask.any(axis=1)
    k = int(keep.sum())
    if k == 0:
        return None, 0
    eff_mask = neg_mask | np.eye(n, dtype=bool) if inclusive else neg_mask

    logits = scale(sims, 1.0 / tau)
    stab = np.where(eff_mask, logits.data, -np.inf).max(axis=1, keepdims=True)
    stab[~keep] = 0.0  # dropped rows must not poison the arithmetic
    shifted = add(logits, constant(-stab))
    weighted = mul(exp(shifted), constant(eff_mask.astype(float)))
    denom = row_sum(weighted)

    pos = row_sum(mul(logits, constant(np.eye(n))))
    keep_idx = np.flatnonzero(keep)
    lse = add(log(gather_rows(denom, keep_idx)), constant(stab[keep_idx]))
    terms = add(scale(gather_rows(pos, keep_idx), -1.0), lse)
    total = matmul(constant(np.ones((1, k))), terms)
    return total, k


def _graph_ids(offsets: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(offsets) - 1), np.diff(offsets))


def nt_xent(z1: Tensor, z2: Tensor, tau: float,
            inclusive: bool = False) -> tuple[Tensor, int]:
    """Cross-view contrastive loss over graph representations.

    Evaluated in both directions (each view's rows anchor against the other
    view's negatives) and averaged over all 2N anchor terms. Negatives are
    the other rows only.
    """
    if z1.shape != z2.shape:
        raise ValueError(f"view shapes differ: {z1.shape} vs {z2.shape}")
    n = z1.shape[0]
    if n < 2:
        raise BatchTooSmall(f"need at least 2 rows, got {n}")
    neg = ~np.eye(n, dtype=bool)
    s12 = cosine_sim(z1, z2)
    _check_finite(s12.data, "similarity")
    s21 = cosine_sim(z2, z1)
    sum1, k1 = masked_anchor_nll(s12, neg, tau, inclusive)
    sum2, k2 = masked_anchor_nll(s21, neg, tau, inclusive)
    loss = scale(add(sum1, sum2), 1.0 / (k1 + k2))
    _check_finite(loss.data, "loss")
    return loss, k1 + k2


def intra_local(edge_repr: Tensor, line_repr: Tensor, edge_offsets: np.ndarray,
                tau: float, inclusive: bool = False) -> tuple[Tensor | None, int]:
    """Within-graph consensus between each edge's two-endpoint representation
    and the matching line-node state.

    Row i of both arguments refers to the same source edge. Negatives are
    drawn from the same graph only and anchors run one direction (edge
    representations against line-node states). Graphs with a single edge
    contribute nothing.
    """
    if edge_repr.shape != line_repr.shape:
        raise ValueError(f"row-aligned inputs required: {edge_repr.shape} vs {line_repr.shape}")
    ids = _graph_ids(edge_offsets)
    same = ids[:, None] == ids[None, :]
    neg = same & ~np.eye(len(ids), dtype=bool)
    sims = cosine_sim(edge_repr, line_repr)
    _check_finite(sims.data, "similarity")
    total, k = masked_anchor_nll(sims, neg, tau, inclusive)
    if total is None:
        return None, 0
    loss = scale(total, 1.0 / k)
    _check_finite(loss.data, "loss")
    return loss, k


def inter_local(edge_repr: Tensor, line_repr: Tensor, edge_offsets: np.ndarray,
                tau: float, inclusive: bool = False) -> tuple[Tensor, int]:
    """Cross-graph edge-level contrast targeting hard negative pairs.

    Each edge anchors its own line-node as the positive against all
    line-nodes of the other graphs in the batch; evaluated in both
    directions and averaged over all anchor terms.
    """
    if edge_repr.shape != line_repr.shape:
        raise ValueError(f"row-aligned inputs required: {edge_repr.shape} vs {line_repr.shape}")
    n_graphs = len(edge_offsets) - 1
    if n_graphs < 2:
        raise BatchTooSmall(f"need at least 2 graphs, got {n_graphs}")
    ids = _graph_ids(edge_offsets)
    neg = ids[:, None] != ids[None, :]
    s12 = cosine_sim(edge_repr, line_repr)
    _check_finite(s12.data, "similarity")
    s21 = cosine_sim(line_repr, edge_repr)
    sum1, k1 = masked_anchor_nll(s12, neg, tau, inclusive)
    sum2, k2 = masked_anchor_nll(s21, neg, tau, inclusive)
    loss = scale(add(sum1, sum2), 1.0 / (k1 + k2))
    _check_finite(loss.data, "loss")
    return loss, k1 + k2


def combine(l_graph: float, l_intra: float, l_inter: float, cfg: LossConfig,
            counts: tuple[int, int, int] = (0, 0, 0)) -> LossReport:
    """Weighted total: graph loss + alpha * cross-graph + beta * within-graph."""
    for name, value in (("l_graph", l_graph), ("l_intra", l_intra), ("l_inter", l_inter)):
        if not np.isfinite(value):
            raise NonFinite(f"{name} is not finite")
    total = l_graph + cfg.alpha * l_inter + cfg.beta * l_intra
    return LossReport(
        l_graph=float(l_graph),
        l_intra=float(l_intra),
        l_inter=float(l_inter),
        l_total=float(total),
        graph_anchors=counts[0],
        intra_anchors=counts[1],
        inter_anchors=counts[2],
    )
