"""Dense float64 tensors with reverse-mode automatic differentiation.

Values are numpy float64 arrays (row-major); this module adds the graph:
every differentiable operation produces a Node that remembers its parents
and how to push gradients back to them.  The op set is the minimum needed
for an LSTM encoder-decoder: matmul, elementwise add/mul, concat, slice,
row gather, tanh/sigmoid/softmax, dropout, and cross entropy.

Gradients accumulate: each backward() call adds one full gradient of the
loss into ``.grad`` of every reachable node, so mini-batch summation works
and calling backward twice without zeroing doubles the result.
"""

from __future__ import annotations

import struct
from typing import Iterable, Sequence

import numpy as np

Tensor = np.ndarray  # row-major float64 throughout


class ShapeError(ValueError):
    """Raised when operand shapes do not conform."""


# ---------------------------------------------------------------------------
# deterministic RNG

class Rng:
    """Counter-based deterministic random stream (numpy Philox).

    A stream is identified by an integer seed plus a path of integer keys;
    ``spawn`` derives an independent child stream, so e.g. initialization,
    dropout and per-epoch shuffles never share state.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(k) for k in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def spawn(self, *keys: int) -> "Rng":
        return Rng(self.seed, self.path + tuple(keys))

    def random(self, shape=None) -> np.ndarray:
        return self._gen.random(shape)

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self._gen.integers(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)


# ---------------------------------------------------------------------------
# graph recording

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording (fast inference path)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._saved = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._saved
        return False


class Node:
    """One vertex of the computation graph.

    ``value`` is the forward tensor, ``grad`` the accumulated gradient
    (None until backward populates it), ``op`` a tag naming the producing
    operation, ``parents`` the upstream nodes.
    """

    __slots__ = ("value", "grad", "op", "parents", "requires_grad", "_backward")

    def __init__(self, value, op: str = "leaf", parents: tuple = (),
                 backward=None, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(value) -> Node:
    return Node(value, op="const")


def parameter(value) -> Node:
    return Node(value, op="param", requires_grad=True)


def as_node(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def _make(value, op: str, parents: tuple[Node, ...], backward) -> Node:
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Node(value, op=op, parents=parents, backward=backward,
                    requires_grad=True)
    return Node(value, op=op)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that numpy broadcasting expanded."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic ops

def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    try:
        out = a.value + b.value
    except ValueError:
        raise ShapeError(f"add: shapes {a.value.shape} and {b.value.shape} "
                         f"do not broadcast") from None
    ash, bsh = a.value.shape, b.value.shape

    def backward(g):
        return _unbroadcast(g, ash), _unbroadcast(g, bsh)

    return _make(out, "add", (a, b), backward)


def mul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    try:
        out = a.value * b.value
    except ValueError:
        raise ShapeError(f"mul: shapes {a.value.shape} and {b.value.shape} "
                         f"do not broadcast") from None
    av, bv = a.value, b.value

    def backward(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return _make(out, "mul", (a, b), backward)


def scale(a, s: float) -> Node:
    a = as_node(a)
    s = float(s)

    def backward(g):
        return (g * s,)

    return _make(a.value * s, "scale", (a,), backward)


def matmul(a, b, transpose_a: bool = False, transpose_b: bool = False) -> Node:
    """2-D matrix product with optional operand transposes."""
    a, b = as_node(a), as_node(b)
    av = a.value.T if transpose_a else a.value
    bv = b.value.T if transpose_b else b.value
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: shapes {a.value.shape} and {b.value.shape} "
                         f"do not conform (transpose_a={transpose_a}, "
                         f"transpose_b={transpose_b})")
    out = av @ bv

    def backward(g):
        da = g @ bv.T
        db = av.T @ g
        if transpose_a:
            da = da.T
        if transpose_b:
            db = db.T
        return da, db

    return _make(out, "matmul", (a, b), backward)


def concat(nodes: Sequence, axis: int = 0) -> Node:
    parts = [as_node(n) for n in nodes]
    try:
        out = np.concatenate([p.value for p in parts], axis=axis)
    except ValueError:
        shapes = [p.value.shape for p in parts]
        raise ShapeError(f"concat: shapes {shapes} do not align "
                         f"on axis {axis}") from None
    sizes = [p.value.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, "concat", tuple(parts), backward)


def slice_(a, key) -> Node:
    """Basic slicing (slices / ints in a tuple); gradient scatters back."""
    a = as_node(a)
    out = a.value[key]
    ash = a.value.shape

    def backward(g):
        z = np.zeros(ash)
        z[key] = g
        return (z,)

    return _make(out, "slice", (a,), backward)


def take_rows(a, indices) -> Node:
    """Gather rows of a 2-D node; repeated indices sum their gradients."""
    a = as_node(a)
    idx = np.asarray(indices, dtype=np.int64)
    if a.value.ndim != 2:
        raise ShapeError(f"take_rows: expected 2-D operand, got shape "
                         f"{a.value.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.value.shape[0]):
        raise IndexError(f"take_rows: index out of range for {a.value.shape}")
    out = a.value[idx]
    ash = a.value.shape

    def backward(g):
        z = np.zeros(ash)
        np.add.at(z, idx, g)
        return (z,)

    return _make(out, "take_rows", (a,), backward)


def sum_(a, axis=None, keepdims: bool = False) -> Node:
    a = as_node(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)
    ash = a.value.shape

    def backward(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, ash).copy(),)

    return _make(out, "sum", (a,), backward)


# ---------------------------------------------------------------------------
# nonlinearities

def tanh(a) -> Node:
    a = as_node(a)
    out = np.tanh(a.value)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _make(out, "tanh", (a,), backward)


def _sigmoid_values(v: np.ndarray) -> np.ndarray:
    # one-exp stable form: exp(-|v|) never overflows
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a) -> Node:
    a = as_node(a)
    out = _sigmoid_values(a.value)

    def backward(g):
        return (g * out * (1.0 - out),)

    return _make(out, "sigmoid", (a,), backward)


def softmax(a, axis: int = -1) -> Node:
    a = as_node(a)
    z = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _make(out, "softmax", (a,), backward)


# ---------------------------------------------------------------------------
# fused ops
#
# Composites of the primitives above, collapsed into single graph nodes so
# sequence models spend their time in numpy instead of graph bookkeeping.
# Each one's gradient is finite-difference tested like any primitive.

def affine(x, W, b) -> Node:
    """x @ W + b with a row-broadcast bias."""
    x, W, b = as_node(x), as_node(W), as_node(b)
    if x.value.ndim != 2 or x.value.shape[1] != W.value.shape[0]:
        raise ShapeError(f"affine: shapes {x.value.shape} and "
                         f"{W.value.shape} do not conform")
    out = x.value @ W.value + b.value
    xv, Wv = x.value, W.value

    def backward(g):
        return g @ Wv.T, xv.T @ g, g.sum(axis=0)

    return _make(out, "affine", (x, W, b), backward)


def lstm_step(z, h_prev, c_prev, mask_col: np.ndarray | None = None) -> Node:
    """One LSTM update from fused gate preactivations.

    ``z`` is (rows, 4*hidden) ordered [input, forget, output, candidate];
    returns the stacked (rows, 2*hidden) array [h', c'].  With ``mask_col``
    (rows, 1), rows at 0 keep their previous state (padding freeze).
    """
    z, c_prev = as_node(z), as_node(c_prev)
    hidden = z.value.shape[1] // 4
    if z.value.shape[1] != 4 * hidden or c_prev.value.shape[1] != hidden:
        raise ShapeError(f"lstm_step: preactivations {z.value.shape} vs "
                         f"cell {c_prev.value.shape}")
    v = z.value
    i = _sigmoid_values(v[:, :hidden])
    f = _sigmoid_values(v[:, hidden:2 * hidden])
    o = _sigmoid_values(v[:, 2 * hidden:3 * hidden])
    g_cand = np.tanh(v[:, 3 * hidden:])
    c_raw = f * c_prev.value + i * g_cand
    tc = np.tanh(c_raw)
    h_raw = o * tc

    masked = mask_col is not None and not np.all(mask_col == 1.0)
    if masked:
        h_prev = as_node(h_prev)
        inv = 1.0 - mask_col
        h_out = mask_col * h_raw + inv * h_prev.value
        c_out = mask_col * c_raw + inv * c_prev.value
    else:
        h_out, c_out = h_raw, c_raw
    out = np.concatenate([h_out, c_out], axis=1)

    def backward(gout):
        gh = gout[:, :hidden]
        gc = gout[:, hidden:]
        if masked:
            dh_prev = gh * inv
            dc_direct = gc * inv
            gh = gh * mask_col
            gc = gc * mask_col
        gc_total = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            gc_total * g_cand * i * (1.0 - i),
            gc_total * c_prev.value * f * (1.0 - f),
            gh * tc * o * (1.0 - o),
            gc_total * i * (1.0 - g_cand * g_cand),
        ], axis=1)
        dc_prev = gc_total * f
        if masked:
            return dz, dh_prev, dc_prev + dc_direct
        return dz, dc_prev

    parents = (z, h_prev, c_prev) if masked else (z, c_prev)
    return _make(out, "lstm_step", parents, backward)


def stack_rows(nodes: Sequence) -> Node:
    """Stack equal-shape 2-D nodes into one (count, rows, cols) node."""
    parts = [as_node(n) for n in nodes]
    out = np.stack([p.value for p in parts])

    def backward(g):
        return tuple(g[j] for j in range(len(parts)))

    return _make(out, "stack_rows", tuple(parts), backward)


def matmul_stack(stack, W, transpose_w: bool = False) -> Node:
    """(count, rows, d) @ W for every slice of the stack."""
    stack, W = as_node(stack), as_node(W)
    Wv = W.value.T if transpose_w else W.value
    if stack.value.ndim != 3 or stack.value.shape[2] != Wv.shape[0]:
        raise ShapeError(f"matmul_stack: shapes {stack.value.shape} and "
                         f"{W.value.shape} do not conform")
    out = stack.value @ Wv
    sv = stack.value

    def backward(g):
        ds = g @ Wv.T
        dW = np.einsum("jbe,jbh->eh", sv, g)
        return ds, (dW.T if transpose_w else dW)

    return _make(out, "matmul_stack", (stack, W), backward)


def dot_stack(x, stack) -> Node:
    """Row-wise dot products against a stack: out[b, j] = x[b] . stack[j, b]."""
    x, stack = as_node(x), as_node(stack)
    if x.value.shape != stack.value.shape[1:]:
        raise ShapeError(f"dot_stack: shapes {x.value.shape} and "
                         f"{stack.value.shape} do not conform")
    out = np.einsum("bd,jbd->bj", x.value, stack.value)
    xv, sv = x.value, stack.value

    def backward(g):
        return (np.einsum("bj,jbd->bd", g, sv),
                np.einsum("bj,bd->jbd", g, xv))

    return _make(out, "dot_stack", (x, stack), backward)


def mix_stack(weights, stack) -> Node:
    """Per-row weighted sum over a stack: out[b] = sum_j w[b, j] stack[j, b]."""
    weights, stack = as_node(weights), as_node(stack)
    if weights.value.shape != stack.value.shape[:2][::-1]:
        raise ShapeError(f"mix_stack: shapes {weights.value.shape} and "
                         f"{stack.value.shape} do not conform")
    out = np.einsum("bj,jbd->bd", weights.value, stack.value)
    wv, sv = weights.value, stack.value

    def backward(g):
        return (np.einsum("bd,jbd->bj", g, sv),
                np.einsum("bj,bd->jbd", wv, g))

    return _make(out, "mix_stack", (weights, stack), backward)


def dropout(a, p: float, rng: Rng, training: bool) -> Node:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Evaluation mode returns the input node untouched.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    a = as_node(a)
    if not training or p == 0.0:
        return a
    mask = (rng.random(a.value.shape) >= p) / (1.0 - p)

    def backward(g):
        return (g * mask,)

    return _make(a.value * mask, "dropout", (a,), backward)


def cross_entropy(logits, target, weights=None) -> Node:
    """Negative log softmax probability of the target class.

    ``logits`` is a vector (single prediction) or a matrix of rows;
    ``target`` the class id, or one id per row.  With ``weights`` the
    per-row losses are scaled before summing (used to mask padding).
    Returns a scalar node; stabilized by max subtraction.
    """
    logits = as_node(logits)
    v = logits.value
    squeeze = v.ndim == 1
    rows = v[None, :] if squeeze else v
    targets = np.atleast_1d(np.asarray(target, dtype=np.int64))
    if rows.ndim != 2 or targets.shape[0] != rows.shape[0]:
        raise ShapeError(f"cross_entropy: logits {v.shape} vs targets "
                         f"{targets.shape}")
    if targets.size and (targets.min() < 0 or targets.max() >= rows.shape[1]):
        raise IndexError(f"cross_entropy: target id out of range for width "
                         f"{rows.shape[1]}")
    w = np.ones(rows.shape[0]) if weights is None else \
        np.asarray(weights, dtype=np.float64)

    m = rows.max(axis=1, keepdims=True)
    z = rows - m
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True)) + m
    picked = rows[np.arange(rows.shape[0]), targets]
    losses = lse[:, 0] - picked
    out = float((w * losses).sum())

    def backward(g):
        soft = np.exp(z - (lse - m))
        d = soft * w[:, None]
        d[np.arange(rows.shape[0]), targets] -= w
        d = d * g
        return (d[0] if squeeze else d,)

    return _make(np.asarray(out), "cross_entropy", (logits,), backward)


# ---------------------------------------------------------------------------
# backward pass

def backward(loss: Node) -> None:
    """Populate ``.grad`` on every node reachable from a scalar loss.

    Gradients are computed fresh for this call and then added into each
    node's ``.grad``, so repeated calls without zeroing accumulate.
    """
    if loss.value.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape "
                         f"{loss.value.shape}")

    topo: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(topo):
        g = grads.get(id(node))
        if g is None or node._backward is None:
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            if pg is None:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg

    # one full gradient of this loss lands on every reachable leaf that
    # asked for it; intermediate nodes stay lazily zeroed
    for node in topo:
        if node.requires_grad and node._backward is None:
            g = grads.get(id(node))
            if g is not None:
                g = np.broadcast_to(g, node.value.shape)
                node.grad = g.copy() if node.grad is None else node.grad + g


# ---------------------------------------------------------------------------
# parameter container
#
# Versioned binary layout, all little-endian:
#   header: magic "TPAR", uint32 version, uint32 parameter count
#   record: uint32 name length, utf-8 name, uint32 rank, uint32 dims[rank],
#           float64 payload (row-major)

_MAGIC = b"TPAR"
_VERSION = 1


def pack_params(params: dict[str, np.ndarray]) -> bytes:
    chunks = [_MAGIC, struct.pack("<II", _VERSION, len(params))]
    for name, arr in params.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<I", a.ndim))
        chunks.append(struct.pack(f"<{a.ndim}I", *a.shape))
        chunks.append(a.tobytes())
    return b"".join(chunks)


def unpack_params(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != _MAGIC:
        raise ValueError("not a parameter file (bad magic)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported parameter file version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", data, off)
        off += 4
        name = data[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", data, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off)
        off += 8 * n
        out[name] = arr.reshape(dims).astype(np.float64)
    if off != len(data):
        raise ValueError("trailing bytes in parameter file")
    return out


def save_params(path, params: dict[str, np.ndarray]) -> None:
    from . import fileio
    fileio.write_bytes_atomic(path, pack_params(params))


def load_params(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        return unpack_params(f.read())
