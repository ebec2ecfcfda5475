"""Corpus ingestion, disjoint-union batching, the pre-training loop,
checkpointing, and metrics emission.

The contrastive views are static: the corpus is transformed to line graphs
exactly once before training (a module counter records calls so tests and
the bench harness can assert the one-time cost). Each training step runs on
its own tape; the last incomplete mini-batch of an epoch is dropped so the
batch losses never degenerate.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import AdamState, Tape, add, adam_step, scale
from .checkpoint import ConfigMismatch, load_checkpoint, save_checkpoint
from .encoder import (
    BatchEncoding,
    DualHelixParams,
    EncoderConfig,
    ViewMismatch,
    encode_batch,
    param_shapes,
)
from .graphs import (
    InvariantViolation,
    LineGraphView,
    MolecularGraph,
    graph_from_record,
    graph_to_record,
    to_line_graph,
)
from .losses import LossConfig, LossReport, NonFinite, combine, inter_local, intra_local, nt_xent

log = logging.getLogger("linecontrast")


class ParseError(ValueError):
    pass


_transform_calls = 0


def transform_call_count() -> int:
    """How many corpus transformations have run in this process."""
    return _transform_calls


@dataclass
class Batch:
    """Disjoint union of graphs and their line graphs with row offsets.

    Node rows of the line view are aligned one-to-one with edge rows of the
    graph view; arc arrays list each undirected edge in both directions for
    the message-passing scatters.
    """

    n_graphs: int
    node_feat: np.ndarray      # sum(V) x 2 int
    edges: np.ndarray          # sum(E) x 2 global node ids
    edge_feat: np.ndarray      # sum(E) x 2 int
    node_offsets: np.ndarray   # N + 1
    edge_offsets: np.ndarray   # N + 1
    line_edges: np.ndarray     # sum(EL) x 2 global line-node ids
    line_edge_origin: np.ndarray  # sum(EL) global source node ids
    line_edge_offsets: np.ndarray  # N + 1
    g_arc_src: np.ndarray = field(repr=False, default=None)
    g_arc_dst: np.ndarray = field(repr=False, default=None)
    g_arc_edge: np.ndarray = field(repr=False, default=None)
    l_arc_src: np.ndarray = field(repr=False, default=None)
    l_arc_dst: np.ndarray = field(repr=False, default=None)
    l_arc_edge: np.ndarray = field(repr=False, default=None)

    @property
    def num_nodes(self) -> int:
        return int(self.node_offsets[-1])

    @property
    def num_edges(self) -> int:
        return int(self.edge_offsets[-1])

    @classmethod
    def build(cls, pairs: list[tuple[MolecularGraph, LineGraphView]]) -> "Batch":
        if not pairs:
            raise ValueError("cannot batch zero graphs")
        node_feat, edges, edge_feat = [], [], []
        line_edges, line_origin = [], []
        node_off = [0]
        edge_off = [0]
        line_edge_off = [0]
        for g, view in pairs:
            lg = view.graph
            if lg.num_nodes != g.num_edges:
                raise ViewMismatch(
                    f"line view has {lg.num_nodes} nodes for {g.num_edges} source edges")
            if view.node_origin != tuple(range(g.num_edges)):
                raise ViewMismatch("line nodes are not in source-edge order")
            if any(not (0 <= v < g.num_nodes) for v in view.edge_origin):
                raise ViewMismatch("edge origin references a missing source node")
            base_n, base_e = node_off[-1], edge_off[-1]
            node_feat.extend(g.node_features)
            edge_feat.extend(g.edge_features)
            edges.extend((u + base_n, v + base_n) for u, v in g.edges)
            line_edges.extend((a + base_e, b + base_e) for a, b in lg.edges)
            line_origin.extend(v + base_n for v in view.edge_origin)
            node_off.append(base_n + g.num_nodes)
            edge_off.append(base_e + g.num_edges)
            line_edge_off.append(line_edge_off[-1] + lg.num_edges)

        def arcs(pair_array: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            if len(pair_array) == 0:
                empty = np.zeros(0, dtype=np.int64)
                return empty, empty.copy(), empty.copy()
            ids = np.arange(len(pair_array), dtype=np.int64)
            src = np.concatenate([pair_array[:, 0], pair_array[:, 1]])
            dst = np.concatenate([pair_array[:, 1], pair_array[:, 0]])
            return src, dst, np.concatenate([ids, ids])

        edges_arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        line_edges_arr = np.asarray(line_edges, dtype=np.int64).reshape(-1, 2)
        g_src, g_dst, g_edge = arcs(edges_arr)
        l_src, l_dst, l_edge = arcs(line_edges_arr)
        return cls(
            n_graphs=len(pairs),
            node_feat=np.asarray(node_feat, dtype=np.int64).reshape(-1, 2),
            edges=edges_arr,
            edge_feat=np.asarray(edge_feat, dtype=np.int64).reshape(-1, 2),
            node_offsets=np.asarray(node_off, dtype=np.int64),
            edge_offsets=np.asarray(edge_off, dtype=np.int64),
            line_edges=line_edges_arr,
            line_edge_origin=np.asarray(line_origin, dtype=np.int64),
            line_edge_offsets=np.asarray(line_edge_off, dtype=np.int64),
            g_arc_src=g_src, g_arc_dst=g_dst, g_arc_edge=g_edge,
            l_arc_src=l_src, l_arc_dst=l_dst, l_arc_edge=l_edge,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    shuffle: bool = True
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    inclusive_denominator: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def desk_train_config(**overrides) -> TrainConfig:
    """Desk-scale preset: batch 16, hidden 32, 20 epochs."""
    return replace(TrainConfig(), **overrides) if overrides else TrainConfig()


def full_train_config(**overrides) -> TrainConfig:
    """Full-scale preset: batch 256, hidden 300, 100 epochs, 5 layers."""
    cfg = TrainConfig(epochs=100, batch_size=256,
                      encoder=EncoderConfig(depth=5, hidden_dim=300, tau=0.1))
    return replace(cfg, **overrides) if overrides else cfg


def loss_config(cfg: TrainConfig) -> LossConfig:
    enc = cfg.encoder
    return LossConfig(tau=enc.tau, alpha=enc.alpha, beta=enc.beta,
                      inclusive_denominator=cfg.inclusive_denominator)


# --- corpus I/O ---------------------------------------------------------------

def load_corpus(path) -> list[MolecularGraph]:
    """Read a JSONL corpus; malformed lines raise with their line number.

    Graphs without edges carry no contrastive signal; they are skipped and
    the count is reported through the logger.
    """
    graphs: list[MolecularGraph] = []
    zero_edge = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ParseError(f"line {lineno}: {err}") from err
            try:
                g = graph_from_record(record)
            except InvariantViolation as err:
                raise InvariantViolation(f"line {lineno}: {err}") from err
            if g.num_edges == 0:
                zero_edge += 1
                continue
            graphs.append(g)
    if zero_edge:
        log.warning("rejected %d zero-edge graph(s) from %s", zero_edge, path)
    return graphs


def save_corpus(graphs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(json.dumps(graph_to_record(g), separators=(",", ":")) + "\n")


def transform_corpus(corpus, workers: int = 1) -> list[tuple[MolecularGraph, LineGraphView]]:
    """Transform every graph once, preserving corpus order.

    Pure per-graph work; with workers > 1 the transformation fans out over
    a thread pool and the merge stays in input order.
    """
    global _transform_calls
    _transform_calls += 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            views = list(pool.map(to_line_graph, corpus))
    else:
        views = [to_line_graph(g) for g in corpus]
    return list(zip(corpus, views))


# --- training ------------------------------------------------------------------

@dataclass
class PretrainResult:
    params: DualHelixParams
    optimizer: AdamState
    reports: list[LossReport]
    step: int = 0
    epochs_done: int = 0


def compute_step_losses(batch: Batch, enc: BatchEncoding, lcfg: LossConfig):
    """Tape-level losses for one batch with zero-weight short-circuiting.

    Returns (total tensor, report floats). Losses whose weight is zero are
    skipped entirely and reported as exact zeros.
    """
    l_graph, n_graph = nt_xent(enc.z_graph, enc.z_line, lcfg.tau,
                               lcfg.inclusive_denominator)
    total = l_graph
    l_inter_val, n_inter = 0.0, 0
    if lcfg.alpha > 0:
        l_inter, n_inter = inter_local(enc.edge_pair, enc.line_node_embeddings,
                                       batch.edge_offsets, lcfg.tau,
                                       lcfg.inclusive_denominator)
        total = add(total, scale(l_inter, lcfg.alpha))
        l_inter_val = l_inter.item()
    l_intra_val, n_intra = 0.0, 0
    if lcfg.beta > 0:
        l_intra, n_intra = intra_local(enc.edge_pair, enc.line_node_embeddings,
                                       batch.edge_offsets, lcfg.tau,
                                       lcfg.inclusive_denominator)
        if l_intra is not None:
            total = add(total, scale(l_intra, lcfg.beta))
            l_intra_val = l_intra.item()
    report = combine(l_graph.item(), l_intra_val, l_inter_val, lcfg,
                     counts=(n_graph, n_intra, n_inter))
    return total, report


def pretrain(corpus, cfg: TrainConfig, *, metrics_path=None,
             init: PretrainResult | None = None) -> PretrainResult:
    """Run the pre-training loop and return the final parameters.

    Deterministic given the seed: initialization, the per-epoch shuffle
    (derived from seed and epoch), and every update are reproducible
    bit-for-bit. One LossReport is emitted per step; with a metrics path it
    is also appended as one JSON object per line.
    """
    if len(corpus) < cfg.batch_size:
        raise ValueError(f"corpus has {len(corpus)} graphs, batch needs {cfg.batch_size}")
    pairs = transform_corpus(corpus)
    lcfg = loss_config(cfg)
    if init is None:
        params = DualHelixParams.initialize(cfg.encoder, cfg.seed)
        opt = AdamState.for_params(params.arrays, learning_rate=cfg.learning_rate)
        step = 0
        first_epoch = 0
    else:
        if init.params.config != cfg.encoder:
            raise ConfigMismatch("checkpoint encoder config differs from the requested one")
        params, opt, step, first_epoch = init.params, init.optimizer, init.step, init.epochs_done
    reports: list[LossReport] = []

    metrics_fh = open(metrics_path, "a", encoding="utf-8") if metrics_path else None
    try:
        for epoch in range(first_epoch, cfg.epochs):
            order = np.arange(len(pairs))
            if cfg.shuffle:
                order = np.random.default_rng([cfg.seed, epoch]).permutation(len(pairs))
            n_batches = len(pairs) // cfg.batch_size  # drop the incomplete tail
            for b in range(n_batches):
                chunk = [pairs[i] for i in order[b * cfg.batch_size:(b + 1) * cfg.batch_size]]
                batch = Batch.build(chunk)
                tape = Tape()
                tensors = params.watched(tape)
                enc = encode_batch(batch, tensors, cfg.encoder)
                try:
                    total, report = compute_step_losses(batch, enc, lcfg)
                except NonFinite as err:
                    raise NonFinite(f"step {step}: {err}") from err
                tape.backward(total)
                grads = {name: tape.grad(t) for name, t in tensors.items()}
                adam_step(params.arrays, grads, opt)
                reports.append(report)
                if metrics_fh is not None:
                    row = {"step": step, "epoch": epoch, **report.to_json_dict()}
                    metrics_fh.write(json.dumps(row, separators=(",", ":")) + "\n")
                step += 1
            log.info("epoch %d done, mean total loss %.6f", epoch,
                     float(np.mean([r.l_total for r in reports[-max(1, n_batches):]])))
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    return PretrainResult(params=params, optimizer=opt, reports=reports,
                          step=step, epochs_done=cfg.epochs)


def embed_corpus(corpus, params: DualHelixParams, batch_size: int = 64) -> np.ndarray:
    """Mean-pooled graph representations in corpus order.

    The projection head is bypassed; downstream consumers get the pooled
    encoder output. Batch composition cannot change the rows.
    """
    if not corpus:
        return np.zeros((0, params.config.hidden_dim))
    pairs = transform_corpus(corpus)
    rows = []
    tensors = params.as_constants()
    for start in range(0, len(pairs), batch_size):
        batch = Batch.build(pairs[start:start + batch_size])
        enc = encode_batch(batch, tensors, params.config)
        rows.append(enc.graph_repr.data)
    return np.concatenate(rows, axis=0)


# --- checkpoint composition -----------------------------------------------------

_OPT_META_KEYS = ("learning_rate", "beta1", "beta2", "eps")


def save_training_checkpoint(path, result: PretrainResult) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, arr in result.params.arrays.items():
        arrays[f"model.{name}"] = arr
        arrays[f"opt.m.{name}"] = result.optimizer.m[name]
        arrays[f"opt.v.{name}"] = result.optimizer.v[name]
    meta = {
        "step": result.step,
        "epochs_done": result.epochs_done,
        "seed": result.params.seed,
        "adam": {k: getattr(result.optimizer, k) for k in _OPT_META_KEYS},
        "adam_step": result.optimizer.step,
    }
    save_checkpoint(path, result.params.config, arrays, meta)


def load_training_checkpoint(path) -> PretrainResult:
    ck = load_checkpoint(path)
    expected = param_shapes(ck.config)
    model: dict[str, np.ndarray] = {}
    m: dict[str, np.ndarray] = {}
    v: dict[str, np.ndarray] = {}
    for name, arr in ck.arrays.items():
        kind, _, rest = name.partition(".")
        if kind == "model":
            model[rest] = arr
        elif kind == "opt":
            moment, _, pname = rest.partition(".")
            (m if moment == "m" else v)[pname] = arr
    for name, shape in expected.items():
        if name not in model or tuple(model[name].shape) != shape:
            raise ConfigMismatch(f"parameter {name} missing or misshaped for the stored config")
    adam_meta = ck.meta.get("adam", {})
    opt = AdamState(
        learning_rate=float(adam_meta.get("learning_rate", 1e-3)),
        beta1=float(adam_meta.get("beta1", 0.9)),
        beta2=float(adam_meta.get("beta2", 0.999)),
        eps=float(adam_meta.get("eps", 1e-8)),
        step=int(ck.meta.get("adam_step", 0)),
        m=m,
        v=v,
    )
    params = DualHelixParams(config=ck.config, seed=int(ck.meta.get("seed", 0)), arrays=model)
    return PretrainResult(params=params, optimizer=opt, reports=[],
                          step=int(ck.meta.get("step", 0)),
                          epochs_done=int(ck.meta.get("epochs_done", 0)))
