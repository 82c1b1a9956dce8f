"""Dense double-precision tensors with tape-based reverse-mode autodiff.

Every value is a numpy float64 array wrapped in a :class:`Tensor`. Ops build a
graph on the fly whenever an input requires gradients; :func:`backward` walks
the graph once in reverse topological order, accumulates leaf gradients, and
releases the tape. There is no broadcasting support beyond what the model
code needs (trailing-axis bias adds, leading batch axes, scalar factors).
"""

from __future__ import annotations

import zlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, OracleError, ShapeError, StateError


class Rng:
    """Deterministic, splittable random source.

    Backed by the counter-based Philox generator so draw sequences depend only
    on (seed, split keys), never on platform. Splitting yields an independent
    stream; the same seed and key always reproduce the same stream.
    """

    def __init__(self, seed: int, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = _seq if _seq is not None else np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.Philox(self._seq))

    def split(self, key: int | str) -> "Rng":
        if isinstance(key, str):
            key = zlib.crc32(key.encode("utf-8"))
        spawn_key = tuple(self._seq.spawn_key) + (int(key),)
        return Rng(self.seed, np.random.SeedSequence(entropy=self._seq.entropy, spawn_key=spawn_key))

    def random(self, shape=None) -> np.ndarray:
        return self._gen.random(size=shape)

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, low: int, high: int, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice_index(self, weights: Sequence[float]) -> int:
        """Pick an index with the given (unnormalized) weights."""
        w = np.asarray(weights, dtype=np.float64)
        cum = np.cumsum(w / w.sum())
        return int(np.searchsorted(cum, self._gen.random(), side="right"))


class Tensor:
    """A dense float64 array plus an optional gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn",
                 "_backward_ran", "_pending")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple["Tensor", ...] = ()
        self._grad_fn: Callable[[np.ndarray], tuple] | None = None
        self._backward_ran = False
        self._pending: np.ndarray | None = None  # scratch used by backward()

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor has shape {self.shape}, not scalar")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)


Parameters = dict  # name -> Tensor; the canonical parameter collection type


def zero_grad(params: Iterable[Tensor] | Parameters) -> None:
    tensors = params.values() if isinstance(params, dict) else params
    for t in tensors:
        t.grad = None


_grad_enabled = True


class no_grad:
    """Context manager suppressing tape recording (value-only evaluation)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _tracked(t: Tensor) -> bool:
    return t.requires_grad or t._grad_fn is not None


def _make(data: np.ndarray, parents: tuple[Tensor, ...], grad_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(_tracked(p) for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to `shape` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape == b.data.shape:
        return
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not align") from None


# ---------------------------------------------------------------------------
# elementwise / linear ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)
    out = a.data + b.data

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), grad_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("sub", a, b)
    out = a.data - b.data

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out, (a, b), grad_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("mul", a, b)
    out = a.data * b.data

    def grad_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, (a, b), grad_fn)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def grad_fn(g):
        return (g * c,)

    return _make(a.data * c, (a,), grad_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    out = a.data @ b.data

    def grad_fn(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.ndim == 2 and a.ndim > 2:
            # batched input x 2-d weight: collapse batch axes into one product
            axes = tuple(range(a.ndim - 1))
            gb = np.tensordot(a.data, g, axes=(axes, axes))
        else:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _make(out, (a, b), grad_fn)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.ndim < 2:
        raise ShapeError(f"transpose: need at least 2 dims, got shape {a.shape}")
    out = np.swapaxes(a.data, -1, -2)

    def grad_fn(g):
        return (np.swapaxes(g, -1, -2),)

    return _make(out, (a,), grad_fn)


def swap_axes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    if not (-a.ndim <= ax1 < a.ndim and -a.ndim <= ax2 < a.ndim):
        raise ShapeError(f"swap_axes: axes ({ax1}, {ax2}) invalid for shape {a.shape}")
    out = np.swapaxes(a.data, ax1, ax2)

    def grad_fn(g):
        return (np.swapaxes(g, ax1, ax2),)

    return _make(out, (a,), grad_fn)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    e = np.exp(-np.abs(x))  # overflow-safe for either sign
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def grad_fn(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), grad_fn)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def grad_fn(g):
        return (g * (a.data > 0.0),)

    return _make(out, (a,), grad_fn)


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)

    def grad_fn(g):
        return (g / a.data,)

    return _make(out, (a,), grad_fn)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    out = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)

    def grad_fn(g):
        return (g * inside,)

    return _make(out, (a,), grad_fn)


# ---------------------------------------------------------------------------
# reductions and normalizers
# ---------------------------------------------------------------------------

def sum_all(a: Tensor) -> Tensor:
    def grad_fn(g):
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(np.asarray(a.data.sum()), (a,), grad_fn)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def grad_fn(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _make(np.asarray(a.data.mean()), (a,), grad_fn)


def mean_over_axis(a: Tensor, axis: int) -> Tensor:
    if not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"mean_over_axis: axis {axis} out of range for shape {a.shape}")
    axis = axis % a.ndim
    n = a.shape[axis]
    out = a.data.mean(axis=axis)

    def grad_fn(g):
        return (np.broadcast_to(np.expand_dims(g, axis) / n, a.shape).copy(),)

    return _make(out, (a,), grad_fn)


def softmax_over_axis(a: Tensor, axis: int) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (a,), grad_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} vs feature dim {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = gain.data * xhat + bias.data

    def grad_fn(g):
        dbias = g.reshape(-1, d).sum(axis=0)
        dgain = (g * xhat).reshape(-1, d).sum(axis=0)
        dxhat = g * gain.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return dx, dgain, dbias

    return _make(out, (x, gain, bias), grad_fn)


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------

def dropout(a: Tensor, p: float, rng: Rng | None, train: bool) -> Tensor:
    """Inverted dropout: zero ~p of entries, scale survivors by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout: p must be in [0, 1), got {p}")
    if not train or p == 0.0:
        return a
    if rng is None:
        raise ConfigError("dropout: rng required when train=True and p > 0")
    mask = (rng.random(a.shape) >= p) / (1.0 - p)
    out = a.data * mask

    def grad_fn(g):
        return (g * mask,)

    return _make(out, (a,), grad_fn)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ShapeError("concat: empty input list")
    axis = axis % tensors[0].ndim
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        pieces = []
        for i in range(len(tensors)):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(idx)])
        return tuple(pieces)

    return _make(out, tuple(tensors), grad_fn)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    axis = axis % a.ndim
    if not (0 <= start < stop <= a.shape[axis]):
        raise ShapeError(f"slice: range [{start}:{stop}] invalid for axis {axis} of shape {a.shape}")
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = a.data[idx]

    def grad_fn(g):
        full = np.zeros(a.shape)
        full[idx] = g
        return (full,)

    return _make(out, (a,), grad_fn)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    if int(np.prod(shape)) != a.data.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")

    def grad_fn(g):
        return (g.reshape(a.shape),)

    return _make(a.data.reshape(shape), (a,), grad_fn)


def pick(a: Tensor, index: tuple[int, ...]) -> Tensor:
    """One element of a tensor as a shape-(1,) tensor."""
    if len(index) != a.ndim:
        raise ShapeError(f"pick: index {index} does not address shape {a.shape}")
    out = a.data[index].reshape(1)

    def grad_fn(g):
        full = np.zeros(a.shape)
        full[index] = g[0]
        return (full,)

    return _make(out, (a,), grad_fn)


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Select rows of a 2-d table by integer id; ids may be any shape."""
    if table.ndim != 2:
        raise ShapeError(f"gather_rows: table must be 2-d, got {table.shape}")
    ids = np.asarray(ids)
    out = table.data[ids]

    def grad_fn(g):
        gt = np.zeros(table.shape)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (gt,)

    return _make(out, (table,), grad_fn)


# ---------------------------------------------------------------------------
# op dispatch (one entry per sanctioned kind)
# ---------------------------------------------------------------------------

OP_KINDS = {
    "matmul": matmul,
    "add": add,
    "scale": scale,
    "sigmoid": sigmoid,
    "mean_over_axis": mean_over_axis,
    "layer_norm": layer_norm,
    "softmax_over_axis": softmax_over_axis,
    "dropout": dropout,
    "concat": concat,
    "slice": slice_axis,
}


def op_forward(kind: str, *args, **kwargs) -> Tensor:
    if kind not in OP_KINDS:
        raise ConfigError(f"op_forward: unknown op kind {kind!r}")
    return OP_KINDS[kind](*args, **kwargs)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------

def backward(root: Tensor) -> None:
    """Propagate d(root)/d(leaf) into every reachable requires_grad leaf.

    The tape is released afterwards; a second call on the same root raises.
    """
    if root.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    if root._backward_ran:
        raise StateError("backward: already ran for this root; rebuild the graph")
    if root._grad_fn is None:
        raise StateError("backward: root has no recorded ops (empty tape)")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and _tracked(p):
                stack.append((p, False))

    root._pending = np.ones_like(root.data)
    for node in reversed(order):
        g = node._pending
        if g is None:
            continue
        node._pending = None
        if node._grad_fn is None:
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._grad_fn(g)):
            if pg is None or not _tracked(parent):
                continue
            parent._pending = pg if parent._pending is None else parent._pending + pg

    for node in order:
        if node._grad_fn is not None:
            node._grad_fn = None
            node._parents = ()
    root._backward_ran = True


# ---------------------------------------------------------------------------
# numerical gradient oracle
# ---------------------------------------------------------------------------

def finite_difference_grad(f, params: Parameters, eps: float = 1e-5) -> dict[str, np.ndarray]:
    """Central-difference gradient of scalar f(params) w.r.t. every coordinate.

    f must be deterministic (dropout off); this is checked by evaluating it
    twice at the current point.
    """
    if eps <= 0:
        raise ConfigError(f"finite_difference_grad: eps must be positive, got {eps}")
    with no_grad():
        base = float(f(params))
        if float(f(params)) != base:
            raise OracleError("finite_difference_grad: f is not deterministic at the base point")

        grads: dict[str, np.ndarray] = {}
        for name, t in params.items():
            flat = t.data.reshape(-1)
            g = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                fp = float(f(params))
                flat[i] = orig - eps
                fm = float(f(params))
                flat[i] = orig
                g[i] = (fp - fm) / (2.0 * eps)
            grads[name] = g.reshape(t.shape)
    return grads
