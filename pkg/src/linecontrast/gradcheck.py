"""Finite-difference validation of every gradient rule.

Each component builds seeded inputs, evaluates a scalar objective on a
fresh tape, and compares the analytic gradients against central
differences at h = 1e-5. Differences below 1e-7 count as zero error (the
absolute fallback near zero); otherwise the error is relative to the
larger magnitude. The `inject_bug` hook perturbs one analytic gradient on
purpose so the harness itself can be tested as a negative control.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .encoder import DualHelixParams, EncoderConfig, encode_batch
from .graphs import to_line_graph
from .losses import inter_local, intra_local, nt_xent
from .pipeline import Batch
from .synth import random_molecular_graph

DEFAULT_TOLERANCE = 1e-4
_FD_STEP = 1e-5
_ABS_FLOOR = 1e-7


@dataclass
class ComponentResult:
    name: str
    max_rel_err: float
    passed: bool


def _scalarize(out: Tensor, weights: np.ndarray) -> Tensor:
    """Reduce a matrix output to a scalar with a fixed random weighting so
    every output element influences the objective."""
    flat = ad.row_sum(ad.mul(out, ad.constant(weights)))
    return ad.matmul(ad.constant(np.ones((1, flat.shape[0]))), flat)


def _evaluate(build: Callable[[dict[str, Tensor]], Tensor],
              arrays: dict[str, np.ndarray]):
    tape = Tape()
    tensors = {k: tape.watch(v) for k, v in arrays.items()}
    loss = build(tensors)
    return tape, tensors, loss


def _analytic_grads(build, arrays) -> dict[str, np.ndarray]:
    tape, tensors, loss = _evaluate(build, arrays)
    tape.backward(loss)
    return {k: tape.grad(t) for k, t in tensors.items()}


def _value(build, arrays) -> float:
    _, _, loss = _evaluate(build, arrays)
    return loss.item()


def _fd_grads(build, arrays) -> dict[str, np.ndarray]:
    grads = {}
    for key, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + _FD_STEP
            up = _value(build, arrays)
            flat[i] = keep - _FD_STEP
            down = _value(build, arrays)
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * _FD_STEP)
        grads[key] = g
    return grads


def max_relative_error(analytic: dict[str, np.ndarray],
                       numeric: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for key in analytic:
        a = analytic[key]
        n = numeric[key]
        diff = np.abs(a - n)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-12)
        rel = np.where(diff < _ABS_FLOOR, 0.0, diff / denom)
        worst = max(worst, float(rel.max()) if rel.size else 0.0)
    return worst


def _away_from_zero(x: np.ndarray, margin: float = 5e-2) -> np.ndarray:
    """Nudge values off the relu kink so finite differences stay two-sided."""
    return x + np.sign(x) * margin + (x == 0) * margin


Case = tuple[Callable[[dict[str, Tensor]], Tensor], dict[str, np.ndarray]]


def _primitive_cases(rng: np.random.Generator) -> dict[str, list[Case]]:
    def mat(*shape):
        return rng.standard_normal(shape)

    # weight matrices are fixed up front; evaluation must be pure for the
    # finite differences to probe the same objective
    w34 = rng.standard_normal((3, 4))
    w45 = rng.standard_normal((4, 5))
    w33 = rng.standard_normal((3, 3))
    w37 = rng.standard_normal((3, 7))
    w36 = rng.standard_normal((3, 6))
    w31 = rng.standard_normal((3, 1))
    cases: dict[str, list[Case]] = {}

    cases["add"] = [
        (lambda t: _scalarize(ad.add(t["a"], t["b"]), w34), {"a": mat(3, 4), "b": mat(3, 4)}),
        (lambda t: _scalarize(ad.add(t["a"], t["b"]), w34), {"a": mat(3, 4), "b": mat(1, 4)}),
        (lambda t: _scalarize(ad.add(t["a"], t["b"]), w34), {"a": mat(3, 4), "b": mat(3, 1)}),
    ]
    cases["mul"] = [
        (lambda t: _scalarize(ad.mul(t["a"], t["b"]), w34), {"a": mat(3, 4), "b": mat(3, 4)}),
        (lambda t: _scalarize(ad.mul(t["a"], t["b"]), w34), {"a": mat(3, 4), "b": mat(1, 4)}),
        (lambda t: _scalarize(ad.mul(t["a"], t["b"]), w34), {"a": mat(3, 4), "b": mat(3, 1)}),
    ]
    cases["divide"] = [
        (lambda t: _scalarize(ad.divide(t["a"], t["b"]), w34),
         {"a": mat(3, 4), "b": np.abs(mat(3, 4)) + 0.5}),
        (lambda t: _scalarize(ad.divide(t["a"], t["b"]), w34),
         {"a": mat(3, 4), "b": np.abs(mat(1, 4)) + 0.5}),
    ]
    cases["scale"] = [
        (lambda t: _scalarize(ad.scale(t["a"], -1.7), w34), {"a": mat(3, 4)}),
    ]
    cases["matmul"] = [
        (lambda t: _scalarize(ad.matmul(t["a"], t["b"]), w37),
         {"a": mat(3, 4), "b": mat(4, 7)}),
        (lambda t: _scalarize(ad.matmul(t["a"], t["b"], transpose_b=True), w37),
         {"a": mat(3, 4), "b": mat(7, 4)}),
    ]
    cases["concat_cols"] = [
        (lambda t: _scalarize(ad.concat_cols(t["a"], t["b"]), w36),
         {"a": mat(3, 2), "b": mat(3, 4)}),
    ]
    gather_idx = np.array([2, 0, 2, 1])  # repeated row on purpose
    cases["gather_rows"] = [
        (lambda t: _scalarize(ad.gather_rows(t["x"], gather_idx), w45),
         {"x": mat(3, 5)}),
    ]
    scatter_idx = np.array([1, 0, 1, 3])  # collision on row 1, row 2 unreached
    cases["scatter_add_rows"] = [
        (lambda t: _scalarize(ad.scatter_add_rows(t["x"], scatter_idx, 4), w45),
         {"x": mat(4, 5)}),
    ]
    cases["relu"] = [
        (lambda t: _scalarize(ad.relu(t["x"]), w34), {"x": _away_from_zero(mat(3, 4))}),
    ]
    cases["row_sum"] = [
        (lambda t: _scalarize(ad.row_sum(t["x"]), w31), {"x": mat(3, 4)}),
    ]
    cases["row_mean"] = [
        (lambda t: _scalarize(ad.row_mean(t["x"]), w31), {"x": mat(3, 4)}),
    ]
    cases["l2_normalize_rows"] = [
        (lambda t: _scalarize(ad.l2_normalize_rows(t["x"]), w34),
         {"x": mat(3, 4) + 0.1}),
    ]
    cases["exp"] = [
        (lambda t: _scalarize(ad.exp(t["x"]), w34), {"x": mat(3, 4)}),
    ]
    cases["log"] = [
        (lambda t: _scalarize(ad.log(t["x"]), w34), {"x": np.abs(mat(3, 4)) + 0.5}),
    ]
    cases["cosine_sim"] = [
        (lambda t: _scalarize(ad.cosine_sim(t["a"], t["b"]), w33),
         {"a": mat(3, 4) + 0.1, "b": mat(3, 4) - 0.1}),
    ]
    return cases


def _loss_cases(rng: np.random.Generator) -> dict[str, list[Case]]:
    offsets = np.array([0, 3, 5])
    return {
        "nt_xent": [
            (lambda t: nt_xent(t["z1"], t["z2"], 0.1)[0],
             {"z1": rng.standard_normal((3, 5)), "z2": rng.standard_normal((3, 5))}),
        ],
        "intra_local": [
            (lambda t: intra_local(t["e"], t["l"], offsets, 0.1)[0],
             {"e": rng.standard_normal((5, 4)), "l": rng.standard_normal((5, 4))}),
        ],
        "inter_local": [
            (lambda t: inter_local(t["e"], t["l"], offsets, 0.1)[0],
             {"e": rng.standard_normal((5, 4)), "l": rng.standard_normal((5, 4))}),
        ],
    }


def _objective_case(seed: int) -> Case:
    """Full weighted objective through the dual encoder on a 2-graph batch."""
    cfg = EncoderConfig(depth=3, hidden_dim=8, atomic_vocab=6, chirality_vocab=3,
                        bond_type_vocab=4, bond_direction_vocab=3,
                        tau=0.1, alpha=1.0, beta=1.0)
    graphs = [random_molecular_graph(seed * 1000 + i, (5, 7), 3, vocab=cfg.vocab)
              for i in range(2)]
    batch = Batch.build([(g, to_line_graph(g)) for g in graphs])
    params = DualHelixParams.initialize(cfg, seed)

    def build(tensors: dict[str, Tensor]) -> Tensor:
        enc = encode_batch(batch, tensors, cfg)
        l_graph, _ = nt_xent(enc.z_graph, enc.z_line, cfg.tau)
        l_inter, _ = inter_local(enc.edge_pair, enc.line_node_embeddings,
                                 batch.edge_offsets, cfg.tau)
        l_intra, _ = intra_local(enc.edge_pair, enc.line_node_embeddings,
                                 batch.edge_offsets, cfg.tau)
        total = ad.add(l_graph, ad.scale(l_inter, cfg.alpha))
        return ad.add(total, ad.scale(l_intra, cfg.beta))

    return build, params.arrays


def component_names() -> list[str]:
    rng = np.random.default_rng(0)
    return list(_primitive_cases(rng)) + list(_loss_cases(rng)) + ["objective"]


def run_gradcheck(seed: int = 0, tolerance: float = DEFAULT_TOLERANCE,
                  inject_bug: str | None = None,
                  components: list[str] | None = None) -> list[ComponentResult]:
    rng = np.random.default_rng(seed)
    suites: dict[str, list[Case]] = {}
    suites.update(_primitive_cases(rng))
    suites.update(_loss_cases(rng))
    suites["objective"] = [_objective_case(seed)]
    if components is not None:
        unknown = set(components) - set(suites)
        if unknown:
            raise ValueError(f"unknown component(s): {sorted(unknown)}")
        suites = {k: suites[k] for k in components}
    if inject_bug is not None and inject_bug not in suites:
        raise ValueError(f"unknown component {inject_bug!r} for bug injection")

    results = []
    for name, cases in suites.items():
        worst = 0.0
        for build, arrays in cases:
            analytic = _analytic_grads(build, arrays)
            if inject_bug == name:
                first = next(iter(analytic))
                analytic[first] = analytic[first] + 1e-2
            numeric = _fd_grads(build, arrays)
            worst = max(worst, max_relative_error(analytic, numeric))
        results.append(ComponentResult(name=name, max_rel_err=worst,
                                       passed=worst < tolerance))
    return results
