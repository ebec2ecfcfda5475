"""Dense 2-D float64 tensors with a recording tape for reverse-mode
gradients, plus an Adam optimizer.

Values are matrices; vectors are stored as 1 x d or n x 1, scalars as
1 x 1. A Tape records primitive applications in execution order, which is
a topological order, so backward replays the record once in reverse. A
tape is meant to live for a single training step and be discarded after
backward.

Broadcasting is limited: the second operand of add / mul / divide may be
a 1 x m row or an n x 1 column against an n x m left operand; its gradient
is summed over the broadcast axis. Everything else is shape-strict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class ShapeMismatch(ValueError):
    pass


class NotScalar(ValueError):
    pass


class DetachedTensor(ValueError):
    pass


class ZeroNormRow(ValueError):
    pass


class Tensor:
    """A float64 matrix, optionally recorded on a tape."""

    __slots__ = ("data", "tape", "slot")

    def __init__(self, data, tape: "Tape | None" = None, slot: int = -1):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.tape = tape
        self.slot = slot

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise NotScalar(f"item() needs shape (1, 1), got {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        tag = f" slot={self.slot}" if self.tape is not None else ""
        return f"Tensor(shape={self.shape}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data) -> Tensor:
    return Tensor(data)


@dataclass
class _Node:
    out_slot: int
    in_slots: tuple[int, ...]
    backward: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class Tape:
    """Execution-ordered record of primitive applications."""

    def __init__(self):
        self._ops: list[_Node] = []
        self._next_slot = 0
        self._grads: dict[int, np.ndarray] | None = None
        self._leaf_shapes: dict[int, tuple[int, int]] = {}

    def watch(self, data) -> Tensor:
        """Register a leaf (parameter or input) on this tape."""
        t = Tensor(data, tape=self, slot=self._next_slot)
        self._leaf_shapes[t.slot] = t.shape
        self._next_slot += 1
        return t

    def _record(self, out: np.ndarray, in_slots: tuple[int, ...], backward) -> Tensor:
        t = Tensor(out, tape=self, slot=self._next_slot)
        self._next_slot += 1
        self._ops.append(_Node(t.slot, in_slots, backward))
        return t

    def backward(self, loss: Tensor) -> None:
        """Populate gradients for every slot reachable from `loss`."""
        if loss.tape is not self or loss.slot < 0:
            raise DetachedTensor("loss was not computed on this tape")
        if loss.shape != (1, 1):
            raise NotScalar(f"loss must have shape (1, 1), got {loss.shape}")
        grads: dict[int, np.ndarray] = {loss.slot: np.ones((1, 1))}
        for node in reversed(self._ops):
            g_out = grads.pop(node.out_slot, None)
            if g_out is None:
                continue
            for slot, g_in in zip(node.in_slots, node.backward(g_out)):
                if slot < 0 or g_in is None:
                    continue
                acc = grads.get(slot)
                grads[slot] = g_in if acc is None else acc + g_in
        self._grads = grads

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient of the last backward() w.r.t. `t`; zeros if unreached."""
        if self._grads is None:
            raise DetachedTensor("backward() has not been run on this tape")
        if t.tape is not self or t.slot < 0:
            raise DetachedTensor("tensor does not belong to this tape")
        g = self._grads.get(t.slot)
        if g is None:
            return np.zeros(t.shape)
        return g


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tape_of(*tensors: Tensor) -> Tape | None:
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is not None and tape is not t.tape:
                raise DetachedTensor("operands recorded on different tapes")
            tape = t.tape
    return tape


def _apply(tape: Tape | None, out: np.ndarray, ins: tuple[Tensor, ...], backward) -> Tensor:
    if tape is None:
        return Tensor(out)
    return tape._record(out, tuple(t.slot for t in ins), backward)


def _broadcast_ok(a: tuple[int, int], b: tuple[int, int]) -> bool:
    if a == b:
        return True
    return (b == (1, a[1])) or (b == (a[0], 1))


def _reduce_to(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape[0] == 1:
        return g.sum(axis=0, keepdims=True)
    return g.sum(axis=1, keepdims=True)


# --- primitives --------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")
    out = a.data + b.data
    b_shape = b.shape

    def backward(g):
        return g, _reduce_to(g, b_shape)

    return _apply(_tape_of(a, b), out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}")
    out = a.data * b.data
    a_data, b_data, b_shape = a.data, b.data, b.shape

    def backward(g):
        return g * b_data, _reduce_to(g * a_data, b_shape)

    return _apply(_tape_of(a, b), out, (a, b), backward)


def divide(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if not _broadcast_ok(a.shape, b.shape):
        raise ShapeMismatch(f"divide: {a.shape} vs {b.shape}")
    out = a.data / b.data
    a_data, b_data, b_shape = a.data, b.data, b.shape

    def backward(g):
        return g / b_data, _reduce_to(-g * a_data / (b_data * b_data), b_shape)

    return _apply(_tape_of(a, b), out, (a, b), backward)


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    out = a.data * c

    def backward(g):
        return (g * c,)

    return _apply(_tape_of(a), out, (a,), backward)


def matmul(a, b, transpose_b: bool = False) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    inner_b = b.shape[1] if transpose_b else b.shape[0]
    if a.shape[1] != inner_b:
        raise ShapeMismatch(
            f"matmul: {a.shape} vs {b.shape}" + (" (transposed)" if transpose_b else "")
        )
    a_data, b_data = a.data, b.data
    if transpose_b:
        out = a_data @ b_data.T

        def backward(g):
            return g @ b_data, g.T @ a_data

    else:
        out = a_data @ b_data

        def backward(g):
            return g @ b_data.T, a_data.T @ g

    return _apply(_tape_of(a, b), out, (a, b), backward)


def concat_cols(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatch(f"concat_cols: {a.shape} vs {b.shape}")
    out = np.concatenate([a.data, b.data], axis=1)
    split = a.shape[1]

    def backward(g):
        return g[:, :split], g[:, split:]

    return _apply(_tape_of(a, b), out, (a, b), backward)


def gather_rows(x, rows) -> Tensor:
    x = _as_tensor(x)
    idx = np.asarray(rows, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ShapeMismatch(f"gather_rows: index outside 0..{x.shape[0] - 1}")
    out = x.data[idx]
    x_shape = x.shape

    def backward(g):
        gx = np.zeros(x_shape)
        np.add.at(gx, idx, g)
        return (gx,)

    return _apply(_tape_of(x), out, (x,), backward)


def scatter_add_rows(x, rows, num_rows: int) -> Tensor:
    """out[r] = sum of x rows k with rows[k] == r; the adjoint of gather_rows."""
    x = _as_tensor(x)
    idx = np.asarray(rows, dtype=np.int64).reshape(-1)
    if idx.size != x.shape[0]:
        raise ShapeMismatch(f"scatter_add_rows: {idx.size} indices for {x.shape[0]} rows")
    if idx.size and (idx.min() < 0 or idx.max() >= num_rows):
        raise ShapeMismatch(f"scatter_add_rows: index outside 0..{num_rows - 1}")
    out = np.zeros((num_rows, x.shape[1]))
    np.add.at(out, idx, x.data)

    def backward(g):
        return (g[idx],)

    return _apply(_tape_of(x), out, (x,), backward)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    out = np.maximum(x.data, 0.0)
    mask = x.data > 0.0

    def backward(g):
        return (g * mask,)

    return _apply(_tape_of(x), out, (x,), backward)


def row_sum(x) -> Tensor:
    x = _as_tensor(x)
    out = x.data.sum(axis=1, keepdims=True)
    cols = x.shape[1]

    def backward(g):
        return (np.repeat(g, cols, axis=1),)

    return _apply(_tape_of(x), out, (x,), backward)


def row_mean(x) -> Tensor:
    x = _as_tensor(x)
    cols = x.shape[1]
    out = x.data.mean(axis=1, keepdims=True)

    def backward(g):
        return (np.repeat(g / cols, cols, axis=1),)

    return _apply(_tape_of(x), out, (x,), backward)


def l2_normalize_rows(x) -> Tensor:
    x = _as_tensor(x)
    norms = np.linalg.norm(x.data, axis=1, keepdims=True)
    small = norms < 1e-12
    if small.any():
        raise ZeroNormRow(f"row {int(np.flatnonzero(small)[0])} has near-zero norm")
    out = x.data / norms

    def backward(g):
        return ((g - out * (g * out).sum(axis=1, keepdims=True)) / norms,)

    return _apply(_tape_of(x), out, (x,), backward)


def exp(x) -> Tensor:
    x = _as_tensor(x)
    out = np.exp(x.data)

    def backward(g):
        return (g * out,)

    return _apply(_tape_of(x), out, (x,), backward)


def log(x) -> Tensor:
    x = _as_tensor(x)
    out = np.log(x.data)
    x_data = x.data

    def backward(g):
        return (g / x_data,)

    return _apply(_tape_of(x), out, (x,), backward)


def cosine_sim(a, b) -> Tensor:
    """Pairwise cosine similarities: out[i, j] = cos(a_i, b_j).

    Differentiable through both arguments. Rows with norm below 1e-12 are
    rejected; a zero embedding signals an upstream bug."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatch(f"cosine_sim: {a.shape} vs {b.shape}")
    return matmul(l2_normalize_rows(a), l2_normalize_rows(b), transpose_b=True)


# --- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    """Per-parameter Adam moments plus the shared step counter."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], learning_rate: float = 1e-3,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            step=0,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One Adam update with bias correction, in place and deterministic.

    Parameters are visited in sorted name order; moments and parameters are
    mutated, the step counter advances by one.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ShapeMismatch(f"adam_step: {name} gradient {g.shape} vs parameter {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
