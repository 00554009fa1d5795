"""Reverse-mode automatic differentiation over dense numpy arrays.

The engine is deliberately small: tensors wrap contiguous float32/float64
arrays, every operation validates its operands eagerly and records a
backward closure, and gradients of a scalar output are pulled by walking
the recorded graph in reverse topological order.  float32 is the compute
default; verification runs (gradient checking) build float64 graphs.
"""
from __future__ import annotations

import warnings
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Graph",
    "ShapeError",
    "NonFiniteError",
    "add",
    "subtract",
    "multiply",
    "scalar_multiply",
    "abs",
    "sum",
    "mean",
    "square",
    "sqrt",
    "exp",
    "tanh",
    "sigmoid",
    "relu",
    "leaky_relu",
    "reshape",
    "slice_axis",
    "concat",
    "conv2d",
    "conv2d_transpose",
    "batch_norm",
    "gradients",
    "custom_op",
]

_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Operand shapes or dtypes are incompatible for the requested op."""


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf values."""


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op}: output contains non-finite values")


class Tensor:
    """N-dimensional value, optionally recording the op that produced it."""

    __slots__ = ("data", "requires_grad", "grad", "name", "op", "_parents", "_backward", "_forward")

    def __init__(self, data, requires_grad: bool = False, dtype=None, name: str | None = None):
        if isinstance(data, Tensor):
            raise TypeError("wrap raw array data, not another Tensor")
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype in _FLOAT_DTYPES else np.float32
        if np.dtype(dtype) not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise TypeError(f"unsupported dtype {dtype}; use float32 or float64")
        arr = np.asarray(data, dtype=dtype)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        _check_finite(arr, "leaf")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self._forward: Callable[..., np.ndarray] | None = None

    # -- basic introspection -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item: tensor has {self.size} elements, expected 1")
        return float(self.data.reshape(())[()])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False, name=self.name)

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name)

    def __repr__(self) -> str:
        tag = self.name or self.op
        return f"Tensor({tag}, shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(_lift(other, self), self)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return multiply(self, other)
        return scalar_multiply(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scalar_multiply(self, -1.0)

    def sum(self) -> "Tensor":
        return sum(self)

    def mean(self) -> "Tensor":
        return mean(self)

    def abs(self) -> "Tensor":
        return abs(self)

    def reshape(self, shape) -> "Tensor":
        return reshape(self, shape)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad of every reachable grad leaf."""
        if self.size != 1:
            raise ShapeError(f"backward: output must be scalar, got shape {self.shape}")
        table = _pull_gradients(self)
        for node, g in table.items():
            if node.grad is None:
                node.grad = g.copy()
            else:
                node.grad = node.grad + g


def _lift(x, ref: Tensor) -> Tensor:
    """Promote a python scalar or ndarray to a constant tensor shaped like ref."""
    if isinstance(x, Tensor):
        return x
    if np.isscalar(x):
        return Tensor(np.full(ref.shape, x, dtype=ref.dtype))
    return Tensor(np.asarray(x), dtype=ref.dtype)


def _node(op: str, data: np.ndarray, parents: Sequence[Tensor],
          backward: Callable[[np.ndarray], tuple],
          forward: Callable[..., np.ndarray]) -> Tensor:
    _check_finite(data, op)
    t = Tensor.__new__(Tensor)
    t.data = data
    t.requires_grad = any(p.requires_grad for p in parents)
    t.grad = None
    t.name = None
    t.op = op
    t._parents = tuple(parents)
    t._backward = backward
    t._forward = forward
    return t


def custom_op(op: str, data: np.ndarray, parents: Sequence[Tensor],
              backward: Callable[[np.ndarray], tuple],
              forward: Callable[..., np.ndarray]) -> Tensor:
    """Record a caller-defined differentiable node (fused losses live on this)."""
    data = np.asarray(data)
    if not data.flags["C_CONTIGUOUS"]:
        data = np.ascontiguousarray(data)
    return _node(op, data, parents, backward, forward)


def _toposort(root: Tensor, grad_only: bool) -> list[Tensor]:
    """Iterative post-order walk; returns nodes with parents before children."""
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
        for parent in node._parents:
            if id(parent) not in seen and (parent.requires_grad or not grad_only):
                stack.append((parent, False))
    return order


def _pull_gradients(output: Tensor) -> dict:
    """Map every grad-requiring node reachable from output to its gradient."""
    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    nodes: dict[int, Tensor] = {id(output): output}
    if output.requires_grad:
        for node in reversed(_toposort(output, grad_only=True)):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                nodes[id(parent)] = parent
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else prev + pg
    return {nodes[k]: v for k, v in grads.items() if nodes[k].requires_grad}


def gradients(output: Tensor, leaves: Sequence[Tensor]) -> list[np.ndarray]:
    """Return d(output)/d(leaf) for each requested leaf.

    Leaves that do not require gradients (or are unreachable from the output)
    get zeros, with a warning for explicitly detached ones.
    """
    if output.size != 1:
        raise ShapeError(f"backward: output must be scalar, got shape {output.shape}")
    table = _pull_gradients(output)
    out = []
    for leaf in leaves:
        g = table.get(leaf)
        if g is None:
            if not leaf.requires_grad:
                warnings.warn(
                    f"gradient requested for detached tensor {leaf.name or leaf.op}; returning zeros",
                    stacklevel=2,
                )
            g = np.zeros_like(leaf.data)
        out.append(g)
    return out


class Graph:
    """Topologically ordered view of the computation that produced `output`.

    Replaying the graph with the leaves' current data reproduces the output
    bit-for-bit; nothing in the graph is mutated.
    """

    def __init__(self, output: Tensor):
        self.output = output
        self.nodes = _toposort(output, grad_only=False)

    @property
    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if not n._parents]

    def named_leaves(self) -> dict[str, Tensor]:
        return {n.name: n for n in self.leaves if n.name}

    def replay(self) -> np.ndarray:
        env: dict[int, np.ndarray] = {}
        for n in self.nodes:
            if not n._parents:
                env[id(n)] = n.data
            else:
                env[id(n)] = n._forward(*(env[id(p)] for p in n._parents))
        return env[id(self.output)]


# -- shape/dtype validation helpers -------------------------------------------

def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes {a.shape} and {b.shape} differ")


def _same_dtype(op: str, *ts: Tensor) -> None:
    dtypes = {t.dtype for t in ts}
    if len(dtypes) > 1:
        raise ShapeError(f"{op}: mixed dtypes {sorted(d.name for d in dtypes)}")


# -- elementwise and unary ops -------------------------------------------------

def add(a: Tensor, b) -> Tensor:
    b = _lift(b, a)
    _same_shape("add", a, b)
    _same_dtype("add", a, b)
    need_a, need_b = a.requires_grad, b.requires_grad
    return _node("add", a.data + b.data, (a, b),
                 lambda g: (g if need_a else None, g if need_b else None),
                 lambda da, db: da + db)


def subtract(a: Tensor, b) -> Tensor:
    b = _lift(b, a)
    _same_shape("subtract", a, b)
    _same_dtype("subtract", a, b)
    need_a, need_b = a.requires_grad, b.requires_grad
    return _node("subtract", a.data - b.data, (a, b),
                 lambda g: (g if need_a else None, -g if need_b else None),
                 lambda da, db: da - db)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("multiply", a, b)
    _same_dtype("multiply", a, b)
    need_a, need_b = a.requires_grad, b.requires_grad
    return _node("multiply", a.data * b.data, (a, b),
                 lambda g: (g * b.data if need_a else None, g * a.data if need_b else None),
                 lambda da, db: da * db)


def scalar_multiply(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _node("scalar_multiply", a.data * np.asarray(c, dtype=a.dtype), (a,),
                 lambda g: (g * np.asarray(c, dtype=a.dtype),),
                 lambda da: da * np.asarray(c, dtype=da.dtype))


def abs(a: Tensor) -> Tensor:  # noqa: A001 - numpy-style name
    sign = np.sign(a.data)  # subgradient 0 at the kink
    return _node("abs", np.abs(a.data), (a,),
                 lambda g: (g * sign,),
                 lambda da: np.abs(da))


def square(a: Tensor) -> Tensor:
    return _node("square", a.data * a.data, (a,),
                 lambda g: (g * (2.0 * a.data),),
                 lambda da: da * da)


def sqrt(a: Tensor) -> Tensor:
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)
    _check_finite(out, "sqrt")

    def backward(g):
        # subgradient 0 at the zero kink, matching abs
        d = np.zeros_like(out)
        np.divide(0.5, out, out=d, where=out > 0)
        return (g * d,)

    return _node("sqrt", out, (a,), backward, lambda da: np.sqrt(da))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    _check_finite(out, "exp")
    return _node("exp", out, (a,), lambda g: (g * out,), lambda da: np.exp(da))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _node("tanh", out, (a,), lambda g: (g * (1.0 - out * out),), lambda da: np.tanh(da))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid(a.data)
    return _node("sigmoid", out, (a,), lambda g: (g * (out * (1.0 - out)),), _sigmoid)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _node("relu", np.where(mask, a.data, 0.0).astype(a.dtype), (a,),
                 lambda g: (g * mask,),
                 lambda da: np.where(da > 0, da, 0.0).astype(da.dtype))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    slope = float(slope)
    mask = a.data > 0
    out = np.where(mask, a.data, slope * a.data).astype(a.dtype)
    grad_factor = np.where(mask, 1.0, slope).astype(a.dtype)
    return _node("leaky_relu", out, (a,),
                 lambda g: (g * grad_factor,),
                 lambda da: np.where(da > 0, da, slope * da).astype(da.dtype))


# -- reductions ----------------------------------------------------------------

def sum(a: Tensor) -> Tensor:  # noqa: A001 - numpy-style name
    out = np.asarray(a.data.sum(), dtype=a.dtype)
    return _node("sum", out, (a,),
                 lambda g: (np.full(a.shape, g, dtype=a.dtype),),
                 lambda da: np.asarray(da.sum(), dtype=da.dtype))


def mean(a: Tensor) -> Tensor:
    n = a.size
    out = np.asarray(a.data.mean(), dtype=a.dtype)
    return _node("mean", out, (a,),
                 lambda g: (np.full(a.shape, g / n, dtype=a.dtype),),
                 lambda da: np.asarray(da.mean(), dtype=da.dtype))


# -- shape ops -------------------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")
    return _node("reshape", a.data.reshape(shape), (a,),
                 lambda g: (g.reshape(a.shape),),
                 lambda da: da.reshape(shape))


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    if not 0 <= axis < a.ndim:
        raise ShapeError(f"slice_axis: axis {axis} out of range for shape {a.shape}")
    if not 0 <= start < stop <= a.shape[axis]:
        raise ShapeError(f"slice_axis: bounds [{start}, {stop}) invalid for axis {axis} of extent {a.shape[axis]}")
    key = tuple(slice(start, stop) if d == axis else slice(None) for d in range(a.ndim))

    def backward(g):
        full = np.zeros(a.shape, dtype=a.dtype)
        full[key] = g
        return (full,)

    return _node("slice_axis", np.ascontiguousarray(a.data[key]), (a,), backward,
                 lambda da: np.ascontiguousarray(da[key]))



def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = list(tensors)
    if not ts:
        raise ShapeError("concat: need at least one tensor")
    _same_dtype("concat", *ts)
    ref = ts[0]
    for t in ts[1:]:
        if t.ndim != ref.ndim or any(t.shape[d] != ref.shape[d] for d in range(ref.ndim) if d != axis):
            raise ShapeError(f"concat: shape {t.shape} incompatible with {ref.shape} along axis {axis}")
    sizes = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)
    needs = [t.requires_grad for t in ts]

    def backward(g):
        outs = []
        for k, t in enumerate(ts):
            if not needs[k]:
                outs.append(None)
                continue
            key = tuple(slice(offsets[k], offsets[k + 1]) if d == axis else slice(None)
                        for d in range(t.ndim))
            outs.append(np.ascontiguousarray(g[key]))
        return tuple(outs)

    return _node("concat", np.concatenate([t.data for t in ts], axis=axis), ts, backward,
                 lambda *datas: np.concatenate(datas, axis=axis))


# -- convolution ------------------------------------------------------------------
# Layout: activations are (C, H, W); conv weights are (out_ch, in_ch, kh, kw).
# Zero same-padding; stride 2 halves spatial extents with ceil division.

def _same_pads(size: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, total // 2, total - total // 2


def _im2col(xp: np.ndarray, k: int, stride: int, oh: int, ow: int) -> np.ndarray:
    c = xp.shape[0]
    cols = np.empty((c, k, k, oh, ow), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, i:i + stride * oh:stride, j:j + stride * ow:stride]
    return cols.reshape(c * k * k, oh * ow)


def _conv_forward(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    o, c, k, _ = w.shape
    _, h_in, w_in = x.shape
    oh, pt, pb = _same_pads(h_in, k, stride)
    ow, pl, pr = _same_pads(w_in, k, stride)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr)))
    cols = _im2col(xp, k, stride, oh, ow)
    return (w.reshape(o, -1) @ cols).reshape(o, oh, ow)


def _conv_input_grad(gy: np.ndarray, w: np.ndarray, stride: int, hw: tuple[int, int]) -> np.ndarray:
    """Adjoint of _conv_forward applied to gy; exact transpose of the linear map."""
    o, c, k, _ = w.shape
    h_in, w_in = hw
    oh, pt, pb = _same_pads(h_in, k, stride)
    ow, pl, pr = _same_pads(w_in, k, stride)
    cols = (w.reshape(o, -1).T @ gy.reshape(o, -1)).reshape(c, k, k, oh, ow)
    xp = np.zeros((c, h_in + pt + pb, w_in + pl + pr), dtype=gy.dtype)
    for i in range(k):
        for j in range(k):
            xp[:, i:i + stride * oh:stride, j:j + stride * ow:stride] += cols[:, i, j]
    return np.ascontiguousarray(xp[:, pt:pt + h_in, pl:pl + w_in])


def _conv_weight_grad(x: np.ndarray, gy: np.ndarray, stride: int, wshape: tuple) -> np.ndarray:
    o, c, k, _ = wshape
    _, h_in, w_in = x.shape
    oh, pt, pb = _same_pads(h_in, k, stride)
    ow, pl, pr = _same_pads(w_in, k, stride)
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr)))
    cols = _im2col(xp, k, stride, oh, ow)
    return (gy.reshape(o, -1) @ cols.T).reshape(wshape)


def _check_conv_args(op: str, x: Tensor, w: Tensor, b: Tensor | None, stride: int) -> None:
    if x.ndim != 3:
        raise ShapeError(f"{op}: input must be (channels, height, width), got shape {x.shape}")
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeError(f"{op}: weight must be (out_ch, in_ch, k, k), got shape {w.shape}")
    if w.shape[2] not in (1, 3):
        raise ShapeError(f"{op}: kernel size {w.shape[2]} unsupported (use 1 or 3)")
    if stride not in (1, 2):
        raise ShapeError(f"{op}: stride {stride} unsupported (use 1 or 2)")
    ts = [x, w] + ([b] if b is not None else [])
    _same_dtype(op, *ts)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1) -> Tensor:
    """2D convolution with zero same-padding, kernels 1x1 or 3x3, stride 1 or 2."""
    _check_conv_args("conv2d", x, w, b, stride)
    if x.shape[0] != w.shape[1]:
        raise ShapeError(f"conv2d: input has {x.shape[0]} channels, weight expects {w.shape[1]}")
    if b is not None and b.shape != (w.shape[0],):
        raise ShapeError(f"conv2d: bias shape {b.shape} != ({w.shape[0]},)")
    data = _conv_forward(x.data, w.data, stride)
    if b is not None:
        data = data + b.data[:, None, None]
    hw = x.shape[1:]
    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        gx = _conv_input_grad(g, w.data, stride, hw) if x.requires_grad else None
        gw = _conv_weight_grad(x.data, g, stride, w.shape) if w.requires_grad else None
        if b is None:
            return (gx, gw)
        gb = g.sum(axis=(1, 2)) if b.requires_grad else None
        return (gx, gw, gb)

    def forward(dx, dw, db=None):
        out = _conv_forward(dx, dw, stride)
        return out if db is None else out + db[:, None, None]

    return _node("conv2d", data, parents, backward, forward)


def conv2d_transpose(y: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 2,
                     output_hw: tuple[int, int] | None = None) -> Tensor:
    """Exact adjoint of conv2d with the same weight; used for learned upsampling.

    `output_hw` picks the pre-image spatial size when stride 2 makes it
    ambiguous (both 2h and 2h-1 downsample to h); defaults to (stride*h, stride*w).
    """
    _check_conv_args("conv2d_transpose", y, w, b, stride)
    if y.shape[0] != w.shape[0]:
        raise ShapeError(f"conv2d_transpose: input has {y.shape[0]} channels, weight expects {w.shape[0]}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"conv2d_transpose: bias shape {b.shape} != ({w.shape[1]},)")
    k = w.shape[2]
    if output_hw is None:
        output_hw = (stride * y.shape[1], stride * y.shape[2])
    output_hw = (int(output_hw[0]), int(output_hw[1]))
    for dim, (target, have) in enumerate(zip(output_hw, y.shape[1:])):
        out, _, _ = _same_pads(target, k, stride)
        if out != have:
            raise ShapeError(
                f"conv2d_transpose: output extent {target} on axis {dim} is inconsistent "
                f"with input extent {have} at stride {stride}")
    data = _conv_input_grad(y.data, w.data, stride, output_hw)
    if b is not None:
        data = data + b.data[:, None, None]
    parents = (y, w) if b is None else (y, w, b)

    def backward(g):
        gy = _conv_forward(g, w.data, stride) if y.requires_grad else None
        gw = _conv_weight_grad(g, y.data, stride, w.shape) if w.requires_grad else None
        if b is None:
            return (gy, gw)
        gb = g.sum(axis=(1, 2)) if b.requires_grad else None
        return (gy, gw, gb)

    def forward(dy, dw, db=None):
        out = _conv_input_grad(dy, dw, stride, output_hw)
        return out if db is None else out + db[:, None, None]

    return _node("conv2d_transpose", data, parents, backward, forward)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization with current statistics, then affine gamma/beta."""
    if x.ndim != 3:
        raise ShapeError(f"batch_norm: input must be (channels, height, width), got shape {x.shape}")
    c = x.shape[0]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"batch_norm: gamma/beta shapes {gamma.shape}/{beta.shape} != ({c},)")
    _same_dtype("batch_norm", x, gamma, beta)
    eps = float(eps)

    def _stats(dx):
        mu = dx.mean(axis=(1, 2), keepdims=True)
        xc = dx - mu
        var = (xc * xc).mean(axis=(1, 2), keepdims=True)
        s = np.sqrt(var + eps)
        return xc, s

    xc, s = _stats(x.data)
    xhat = xc / s
    data = gamma.data[:, None, None] * xhat + beta.data[:, None, None]

    def backward(g):
        gx = None
        if x.requires_grad:
            gm = g.mean(axis=(1, 2), keepdims=True)
            gxh = (g * xhat).mean(axis=(1, 2), keepdims=True)
            gx = (gamma.data[:, None, None] / s) * (g - gm - xhat * gxh)
        ggamma = (g * xhat).sum(axis=(1, 2)) if gamma.requires_grad else None
        gbeta = g.sum(axis=(1, 2)) if beta.requires_grad else None
        return (gx, ggamma, gbeta)

    def forward(dx, dgamma, dbeta):
        fxc, fs = _stats(dx)
        return dgamma[:, None, None] * (fxc / fs) + dbeta[:, None, None]

    return _node("batch_norm", data, (x, gamma, beta), backward, forward)
