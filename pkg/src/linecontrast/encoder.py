"""Dual message-passing encoder over a graph and its line graph.

Both helices run the same edge-attributed update in lockstep. Layer 0
embeds raw edge attributes; from layer 1 on (when fusion is enabled) each
helix's edge attributes are the other helix's node states from the
previous layer: the graph side reads the line-node vector of each edge,
the line side reads the shared source node's vector of each line-edge.
Node rows of the line helix are aligned one-to-one with edge rows of the
graph helix, which is what makes the exchange a plain row lookup.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from .autodiff import (
    Tensor,
    add,
    concat_cols,
    constant,
    gather_rows,
    matmul,
    relu,
    scatter_add_rows,
)


class VocabOutOfRange(ValueError):
    pass


class ViewMismatch(ValueError):
    pass


class EmptyGraph(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    """Encoder hyper-parameters; tau / alpha / beta ride along for the losses.

    Defaults are desk scale. The reference scale uses hidden_dim=300 and
    batch 256; see pipeline.full_train_config().
    """

    depth: int = 5
    hidden_dim: int = 32
    atomic_vocab: int = 12
    chirality_vocab: int = 4
    bond_type_vocab: int = 5
    bond_direction_vocab: int = 3
    readout: str = "mean"
    edge_fusion: bool = True
    tau: float = 0.1
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        if self.hidden_dim < 2:
            raise ValueError("hidden_dim must be at least 2")
        for name in ("atomic_vocab", "chirality_vocab", "bond_type_vocab", "bond_direction_vocab"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.readout != "mean":
            raise ValueError(f"unsupported readout {self.readout!r}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")

    @property
    def vocab(self) -> tuple[int, int, int, int]:
        return (self.atomic_vocab, self.chirality_vocab,
                self.bond_type_vocab, self.bond_direction_vocab)


def param_specs(cfg: EncoderConfig) -> list[tuple[str, tuple[int, int], float]]:
    """(name, shape, init bound) for every parameter, in a fixed order.

    Embedding tables and self-loop vectors use the bound sqrt(1/d); affine
    maps use sqrt(1/fan_in) for both weight and bias.
    """
    d = cfg.hidden_dim
    h = 2 * d
    emb = sqrt(1.0 / d)
    specs: list[tuple[str, tuple[int, int], float]] = []

    def affine(prefix: str, nin: int, nout: int) -> None:
        bound = sqrt(1.0 / nin)
        specs.append((f"{prefix}.w", (nin, nout), bound))
        specs.append((f"{prefix}.b", (1, nout), bound))

    def helix(name: str, node_vocabs: tuple[tuple[str, int], ...],
              edge_vocabs: tuple[tuple[str, int], ...]) -> None:
        for field_name, size in node_vocabs:
            specs.append((f"{name}.embed.{field_name}", (size, d), emb))
        for c in range(cfg.depth):
            for field_name, size in edge_vocabs:
                specs.append((f"{name}.layer{c}.edge.{field_name}", (size, d), emb))
            specs.append((f"{name}.layer{c}.self_loop", (1, d), emb))
            affine(f"{name}.layer{c}.mlp1", d, h)
            affine(f"{name}.layer{c}.mlp2", h, d)

    node_fields = (("atomic", cfg.atomic_vocab), ("chirality", cfg.chirality_vocab))
    edge_fields = (("bond_type", cfg.bond_type_vocab), ("bond_direction", cfg.bond_direction_vocab))
    helix("graph", node_fields, edge_fields)
    # line helix: node and edge vocabularies swap roles
    helix("line", edge_fields, node_fields)
    specs.append(("proj.w1", (d, d), emb))
    specs.append(("proj.w2", (d, d), emb))
    affine("edge_rep", 2 * d, d)
    return specs


def param_shapes(cfg: EncoderConfig) -> dict[str, tuple[int, int]]:
    return {name: shape for name, shape, _ in param_specs(cfg)}


@dataclass
class DualHelixParams:
    """All named parameter arrays for both helices plus the shared heads."""

    config: EncoderConfig
    seed: int
    arrays: dict[str, np.ndarray]

    @classmethod
    def initialize(cls, config: EncoderConfig, seed: int) -> "DualHelixParams":
        rng = np.random.default_rng(seed)
        arrays = {
            name: rng.uniform(-bound, bound, size=shape)
            for name, shape, bound in param_specs(config)
        }
        return cls(config=config, seed=seed, arrays=arrays)

    def watched(self, tape) -> dict[str, Tensor]:
        return {name: tape.watch(arr) for name, arr in self.arrays.items()}

    def as_constants(self) -> dict[str, Tensor]:
        return {name: constant(arr) for name, arr in self.arrays.items()}


@dataclass
class Mlp:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(relu(add(matmul(x, self.w1), self.b1)), self.w2), self.b2)


def _layer_mlp(params: dict[str, Tensor], helix: str, layer: int) -> Mlp:
    p = f"{helix}.layer{layer}"
    return Mlp(params[f"{p}.mlp1.w"], params[f"{p}.mlp1.b"],
               params[f"{p}.mlp2.w"], params[f"{p}.mlp2.b"])


def _check_vocab(feats: np.ndarray, sizes: tuple[int, int], what: str) -> None:
    if feats.size == 0:
        return
    for col, size in enumerate(sizes):
        top = int(feats[:, col].max())
        if top >= size:
            raise VocabOutOfRange(f"{what} field {col}: index {top} >= vocabulary size {size}")


def embed_pair(feats: np.ndarray, table_a: Tensor, table_b: Tensor,
               sizes: tuple[int, int], what: str) -> Tensor:
    """Sum of the two per-field table lookups for (n, 2) category indices."""
    _check_vocab(feats, sizes, what)
    return add(gather_rows(table_a, feats[:, 0]), gather_rows(table_b, feats[:, 1]))


@dataclass
class InitialEmbeddings:
    graph_nodes: Tensor
    graph_edges: Tensor
    line_nodes: Tensor
    line_edges: Tensor


def embed_inputs(batch, params: dict[str, Tensor], cfg: EncoderConfig) -> InitialEmbeddings:
    """Layer-0 node and edge embeddings for both helices.

    Line-node features equal the source edge features, so the line helix's
    node tables are bond tables; its edge features are the shared source
    node's features, so its layer-0 edge tables are atom tables.
    """
    node_sizes = (cfg.atomic_vocab, cfg.chirality_vocab)
    edge_sizes = (cfg.bond_type_vocab, cfg.bond_direction_vocab)
    g_nodes = embed_pair(batch.node_feat, params["graph.embed.atomic"],
                         params["graph.embed.chirality"], node_sizes, "node")
    g_edges = embed_pair(batch.edge_feat, params["graph.layer0.edge.bond_type"],
                         params["graph.layer0.edge.bond_direction"], edge_sizes, "edge")
    l_nodes = embed_pair(batch.edge_feat, params["line.embed.bond_type"],
                         params["line.embed.bond_direction"], edge_sizes, "line node")
    line_edge_feat = batch.node_feat[batch.line_edge_origin]
    l_edges = embed_pair(line_edge_feat, params["line.layer0.edge.atomic"],
                         params["line.layer0.edge.chirality"], node_sizes, "line edge")
    return InitialEmbeddings(g_nodes, g_edges, l_nodes, l_edges)


def gin_layer(h: Tensor, edge_attr: Tensor, arc_src: np.ndarray, arc_dst: np.ndarray,
              arc_edge: np.ndarray, num_nodes: int, self_loop: Tensor, mlp: Mlp) -> Tensor:
    """One update: relu(MLP(h_v + sum of neighbor states + sum of incident
    edge attributes + self-loop vector)).

    Arcs list each undirected edge twice (once per direction), so every
    edge attribute reaches each endpoint exactly once.
    """
    pre = h
    if len(arc_src):
        neighbor_sum = scatter_add_rows(gather_rows(h, arc_src), arc_dst, num_nodes)
        edge_sum = scatter_add_rows(gather_rows(edge_attr, arc_edge), arc_dst, num_nodes)
        pre = add(add(pre, neighbor_sum), edge_sum)
    pre = add(pre, self_loop)
    return relu(mlp(pre))


@dataclass
class BatchEncoding:
    """Final-layer states and derived representations for one batch."""

    node_embeddings: Tensor        # sum(V) x d, graph helix
    line_node_embeddings: Tensor   # sum(E) x d, line helix
    graph_repr: Tensor             # N x d mean-pooled, graph view
    line_graph_repr: Tensor        # N x d mean-pooled, line view
    z_graph: Tensor                # N x d projected, graph view
    z_line: Tensor                 # N x d projected, line view
    edge_pair: Tensor              # sum(E) x d two-endpoint edge representations
    node_offsets: np.ndarray = field(repr=False, default=None)
    edge_offsets: np.ndarray = field(repr=False, default=None)


def readout(h: Tensor, offsets: np.ndarray) -> Tensor:
    """Per-graph arithmetic mean of node rows, offsets delimiting graphs."""
    n_graphs = len(offsets) - 1
    counts = np.diff(offsets)
    if (counts <= 0).any():
        raise EmptyGraph(f"graph {int(np.flatnonzero(counts <= 0)[0])} has no nodes")
    pool = np.zeros((n_graphs, h.shape[0]))
    for i in range(n_graphs):
        pool[i, offsets[i]:offsets[i + 1]] = 1.0 / counts[i]
    return matmul(constant(pool), h)


def project(h: Tensor, w1: Tensor, w2: Tensor) -> Tensor:
    """Two-map projection head, used only inside the graph-level loss."""
    return matmul(relu(matmul(h, w1)), w2)


def edge_pair_representation(h: Tensor, edges: np.ndarray, w: Tensor, b: Tensor) -> Tensor:
    """Affine map of the concatenated endpoint states, canonical u < v order."""
    left = gather_rows(h, edges[:, 0])
    right = gather_rows(h, edges[:, 1])
    return add(matmul(concat_cols(left, right), w), b)


def encode_batch(batch, params: dict[str, Tensor], cfg: EncoderConfig) -> BatchEncoding:
    """Run both helices in lockstep over a batch and derive all
    representations used by the losses.

    With fusion enabled, layer c >= 1 takes the other helix's layer c-1
    node states as edge attributes; with fusion disabled each layer embeds
    raw attributes through its own layer tables.
    """
    init = embed_inputs(batch, params, cfg)
    g_hist = [init.graph_nodes]
    l_hist = [init.line_nodes]
    node_sizes = (cfg.atomic_vocab, cfg.chirality_vocab)
    edge_sizes = (cfg.bond_type_vocab, cfg.bond_direction_vocab)
    for c in range(cfg.depth):
        if c == 0:
            g_eattr, l_eattr = init.graph_edges, init.line_edges
        elif cfg.edge_fusion:
            g_eattr = l_hist[c - 1]
            l_eattr = gather_rows(g_hist[c - 1], batch.line_edge_origin)
        else:
            g_eattr = embed_pair(batch.edge_feat, params[f"graph.layer{c}.edge.bond_type"],
                                 params[f"graph.layer{c}.edge.bond_direction"],
                                 edge_sizes, "edge")
            l_eattr = embed_pair(batch.node_feat[batch.line_edge_origin],
                                 params[f"line.layer{c}.edge.atomic"],
                                 params[f"line.layer{c}.edge.chirality"],
                                 node_sizes, "line edge")
        g_hist.append(gin_layer(g_hist[c], g_eattr, batch.g_arc_src, batch.g_arc_dst,
                                batch.g_arc_edge, batch.num_nodes,
                                params[f"graph.layer{c}.self_loop"],
                                _layer_mlp(params, "graph", c)))
        l_hist.append(gin_layer(l_hist[c], l_eattr, batch.l_arc_src, batch.l_arc_dst,
                                batch.l_arc_edge, batch.num_edges,
                                params[f"line.layer{c}.self_loop"],
                                _layer_mlp(params, "line", c)))
    h_graph = g_hist[-1]
    h_line = l_hist[-1]
    graph_repr = readout(h_graph, batch.node_offsets)
    line_graph_repr = readout(h_line, batch.edge_offsets)
    return BatchEncoding(
        node_embeddings=h_graph,
        line_node_embeddings=h_line,
        graph_repr=graph_repr,
        line_graph_repr=line_graph_repr,
        z_graph=project(graph_repr, params["proj.w1"], params["proj.w2"]),
        z_line=project(line_graph_repr, params["proj.w1"], params["proj.w2"]),
        edge_pair=edge_pair_representation(h_graph, batch.edges,
                                           params["edge_rep.w"], params["edge_rep.b"]),
        node_offsets=batch.node_offsets,
        edge_offsets=batch.edge_offsets,
    )
