"""Minimal reverse-mode differentiation over dense tensors.

A fixed catalogue of primitives (add, sub, mul, matmul, conv2d, relu, sin,
cos, concat, sum, scale, gather, reshape) is enough to express every layer
in this package.  Forward values are plain numpy arrays wrapped in `Tensor`;
when a `Tape` is active and an input requires grad, the primitive records a
backward closure on the tape.  `backward` replays the tape once in reverse
and accumulates gradients in that fixed order, so gradients are bit
reproducible.

Evaluation without an active tape records nothing and costs nothing beyond
the numpy work itself.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import (
    CatalogueError,
    ContractError,
    EvaluationError,
    ShapeError,
)

_DEFAULT_DTYPE = np.float64
_RELU_TRACE: list[np.ndarray] | None = None


class _TapeStacks(threading.local):
    """Per-thread tape stack: distinct tapes may run on distinct threads."""

    def __init__(self):
        self.stack: list[Tape] = []


_STACKS = _TapeStacks()

# When True every primitive verifies its output is finite (slow; off by
# default, the training loop has its own non-finite abort).
CHECK_FINITE = False


def set_default_dtype(dtype) -> None:
    """Set the dtype used for newly created tensors (float64 or float32)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ContractError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """Dense array with a requires-grad flag. Hashable by identity."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class Tape:
    """Ordered record of primitive applications for one backward pass."""

    def __init__(self):
        self.entries: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def __enter__(self):
        _STACKS.stack.append(self)
        return self

    def __exit__(self, *exc):
        popped = _STACKS.stack.pop()
        assert popped is self
        return False


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _finish(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    if CHECK_FINITE and not np.all(np.isfinite(out.data)):
        raise EvaluationError("primitive produced a non-finite value")
    stack = _STACKS.stack
    if stack and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        stack[-1].entries.append((out, inputs, backward_fn))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over axes that were broadcast in the forward pass."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, name: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} do not broadcast")


# ---------------------------------------------------------------------------
# primitive catalogue
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "add")
    out = Tensor(a.data + b.data)

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _finish(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "sub")
    out = Tensor(a.data - b.data)

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _finish(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "mul")
    out = Tensor(a.data * b.data)

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _finish(out, (a, b), bwd)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim > 2 or b.ndim > 2 or a.ndim == 0 or b.ndim == 0:
        raise ShapeError(f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)

    def bwd(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:  # scalar output
            return g * bd, g * ad
        if ad.ndim == 2 and bd.ndim == 2:
            return g @ bd.T, ad.T @ g
        if ad.ndim == 2 and bd.ndim == 1:  # (n,k)@(k,) -> (n,)
            return np.outer(g, bd), ad.T @ g
        # (k,)@(k,m) -> (m,)
        return bd @ g, np.outer(ad, g)

    return _finish(out, (a, b), bwd)


def relu(x) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0  # subgradient at 0 is 0
    if _RELU_TRACE is not None:
        _RELU_TRACE.append(mask.copy())
    out = Tensor(np.where(mask, x.data, 0.0))

    def bwd(g):
        return (g * mask,)

    return _finish(out, (x,), bwd)


def sin(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.sin(x.data))

    def bwd(g):
        return (g * np.cos(x.data),)

    return _finish(out, (x,), bwd)


def cos(x) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(np.cos(x.data))

    def bwd(g):
        return (g * -np.sin(x.data),)

    return _finish(out, (x,), bwd)


def scale(x, c: float) -> Tensor:
    x = _as_tensor(x)
    c = float(c)
    out = Tensor(x.data * c)

    def bwd(g):
        return (g * c,)

    return _finish(out, (x,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty list")
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _finish(out, tuple(tensors), bwd)


def reduce_sum(x, axes=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    if axes is not None and not isinstance(axes, tuple):
        axes = (axes,)
    out = Tensor(x.data.sum(axis=axes, keepdims=keepdims))

    def bwd(g):
        if axes is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axes)
        return (np.broadcast_to(gg, x.shape).copy(),)

    return _finish(out, (x,), bwd)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    shape = tuple(int(s) for s in np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    out = Tensor(x.data.reshape(shape))

    def bwd(g):
        return (g.reshape(x.shape),)

    return _finish(out, (x,), bwd)


def gather(x, index, axis: int = 0) -> Tensor:
    """Take rows along `axis` with a 1-D integer index map."""
    x = _as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1:
        raise ShapeError(f"gather index map must be 1-D, got shape {index.shape}")
    if index.size and (index.min() < 0 or index.max() >= x.shape[axis]):
        raise ShapeError("gather index out of range")
    out = Tensor(np.take(x.data, index, axis=axis))

    def bwd(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(np.moveaxis(gx, axis, 0), index, np.moveaxis(g, axis, 0))
        return (gx,)

    return _finish(out, (x,), bwd)


def conv2d(x, k, pad: str = "valid") -> Tensor:
    """2-D correlation of x (h, w, c_in) with kernels k (c_out, c_in, kh, kw).

    Stride 1; `pad` is "valid" or "same" (zero padding, odd kernels only).
    An optional leading batch axis on x is carried through.
    """
    x, k = _as_tensor(x), _as_tensor(k)
    if x.ndim not in (3, 4) or k.ndim != 4:
        raise ShapeError(f"conv2d expects ([b,]h,w,ci) and (co,ci,kh,kw), got {x.shape}, {k.shape}")
    batched = x.ndim == 4
    nb = x.shape[0] if batched else 1
    h, w, ci = x.shape[-3], x.shape[-2], x.shape[-1]
    co, kci, kh, kw = k.shape
    if kci != ci:
        raise ShapeError(f"conv2d channel mismatch: input has {ci}, kernel expects {kci}")
    if pad == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError("same padding requires odd kernel sizes")
        ph, pw = (kh - 1) // 2, (kw - 1) // 2
    elif pad == "valid":
        ph = pw = 0
        if h < kh or w < kw:
            raise ShapeError(f"valid conv2d: input {h}x{w} smaller than kernel {kh}x{kw}")
    else:
        raise ContractError(f"unknown padding mode {pad!r}")

    xd = x.data if batched else x.data[None]
    xp = np.pad(xd, ((0, 0), (ph, ph), (pw, pw), (0, 0))) if ph or pw else xd
    ho, wo = xp.shape[1] - kh + 1, xp.shape[2] - kw + 1
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    cols = win.reshape(nb * ho * wo, ci * kh * kw)
    # window flattening order is (ci, kh, kw); match it on the kernel side
    k2 = np.moveaxis(k.data, 0, -1).reshape(ci * kh * kw, co)
    y = (cols @ k2).reshape(nb, ho, wo, co)
    out = Tensor(y if batched else y[0])

    def bwd(g):
        g2 = g.reshape(nb * ho * wo, co)
        gk = None
        if k.requires_grad:
            gk = np.moveaxis((cols.T @ g2).reshape(ci, kh, kw, co), -1, 0)
        gx = None
        if x.requires_grad:
            dcols = (g2 @ k2.T).reshape(nb, ho, wo, ci, kh, kw)
            gxp = np.zeros_like(xp)
            for r in range(kh):
                for c in range(kw):
                    gxp[:, r:r + ho, c:c + wo, :] += dcols[:, :, :, :, r, c]
            gx = gxp[:, ph:ph + h, pw:pw + w, :] if (ph or pw) else gxp
            if not batched:
                gx = gx[0]
        return gx, gk

    return _finish(out, (x, k), bwd)


_PRIMITIVES = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "matmul": matmul,
    "conv2d": conv2d,
    "relu": relu,
    "sin": sin,
    "cos": cos,
    "concat": concat,
    "sum": reduce_sum,
    "scale": scale,
    "gather": gather,
    "reshape": reshape,
}


def apply_primitive(name: str, inputs, **attrs) -> Tensor:
    """Dispatch a primitive by catalogue name."""
    if name not in _PRIMITIVES:
        raise CatalogueError(f"unknown primitive {name!r}")
    fn = _PRIMITIVES[name]
    if name == "concat":
        return fn(inputs, **attrs)
    if not isinstance(inputs, (list, tuple)):
        inputs = (inputs,)
    return fn(*inputs, **attrs)


# ---------------------------------------------------------------------------
# composites built from catalogue primitives
# ---------------------------------------------------------------------------

_TRANSPOSE_MAPS: dict[tuple, np.ndarray] = {}


def transpose(x, axes) -> Tensor:
    """Axis permutation as a gather with a cached flat index map."""
    x = _as_tensor(x)
    axes = tuple(axes)
    key = (x.shape, axes)
    idx = _TRANSPOSE_MAPS.get(key)
    if idx is None:
        idx = np.arange(x.size, dtype=np.int64).reshape(x.shape).transpose(axes).ravel()
        _TRANSPOSE_MAPS[key] = idx
    new_shape = tuple(x.shape[a] for a in axes)
    return reshape(gather(reshape(x, (x.size,)), idx), new_shape)


def absolute(x) -> Tensor:
    """|x| as relu(x) + relu(-x)."""
    return add(relu(x), relu(scale(x, -1.0)))


# ---------------------------------------------------------------------------
# backward pass and gradient checking
# ---------------------------------------------------------------------------

def backward(tape: Tape, loss: Tensor) -> dict[Tensor, Tensor]:
    """Gradients of a scalar loss w.r.t. every requires-grad leaf on the tape.

    Accumulation happens in fixed reverse tape order, so results are
    bit-identical across runs with identical inputs.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[Tensor, np.ndarray] = {loss: np.ones(loss.shape, dtype=loss.data.dtype)}
    produced = {out for out, _, _ in tape.entries}
    for out, inputs, bwd in reversed(tape.entries):
        g = grads.get(out)
        if g is None:
            continue
        for t, gi in zip(inputs, bwd(g)):
            if gi is None or not t.requires_grad:
                continue
            acc = grads.get(t)
            if acc is None:
                grads[t] = gi if gi.shape == t.shape else np.broadcast_to(gi, t.shape).copy()
            else:
                grads[t] = acc + gi
    return {
        t: Tensor(g)
        for t, g in grads.items()
        if t.requires_grad and t not in produced
    }


class _relu_trace:
    """Context collecting relu sign patterns, used by the kink guard."""

    def __enter__(self):
        global _RELU_TRACE
        self._saved = _RELU_TRACE
        _RELU_TRACE = []
        return _RELU_TRACE

    def __exit__(self, *exc):
        global _RELU_TRACE
        _RELU_TRACE = self._saved
        return False


def _eval_scalar(fn, tensors) -> float:
    out = fn(*tensors)
    val = np.asarray(out.data, dtype=np.float64)
    if val.size != 1:
        raise ContractError("check_gradients needs a scalar-valued function")
    if not np.isfinite(val).all():
        raise EvaluationError("non-finite forward value during gradient check")
    return float(val.reshape(()))


def check_gradients(fn, inputs, step: float = 1e-5, max_coords: int = 10_000,
                    seed: int = 0) -> float:
    """Compare analytic gradients of `fn` against central finite differences.

    Every coordinate of every input is perturbed by +-step (above
    `max_coords` total coordinates a seeded subset is used).  A coordinate is
    skipped when the two side evaluations disagree on any relu sign pattern
    (the kink guard); a relu pre-activation sitting exactly on 0 is always
    skipped this way.  Returns the maximum relative error over the checked
    coordinates.
    """
    if not (1e-7 <= step <= 1e-3):
        raise ContractError(f"step {step} outside [1e-7, 1e-3]")
    leaves = [Tensor(np.array(t.data if isinstance(t, Tensor) else t, dtype=np.float64),
                     requires_grad=True) for t in inputs]
    with Tape() as tape:
        out = fn(*leaves)
    if out.size != 1:
        raise ContractError("check_gradients needs a scalar-valued function")
    if not np.isfinite(out.data).all():
        raise EvaluationError("non-finite forward value during gradient check")
    grads = backward(tape, out)
    analytic = [grads[t].data if t in grads else np.zeros(t.shape) for t in leaves]

    coords = [(i, j) for i, t in enumerate(leaves) for j in range(t.size)]
    if len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[p] for p in sorted(pick)]

    worst = 0.0
    for ti, flat in coords:
        base = leaves[ti].data.ravel()
        orig = base[flat]
        base[flat] = orig + step
        with _relu_trace() as pat_plus:
            f_plus = _eval_scalar(fn, leaves)
            pat_plus = list(pat_plus)
        base[flat] = orig - step
        with _relu_trace() as pat_minus:
            f_minus = _eval_scalar(fn, leaves)
            pat_minus = list(pat_minus)
        base[flat] = orig
        if any((p != q).any() for p, q in zip(pat_plus, pat_minus)):
            continue  # perturbation crosses a relu kink
        numeric = (f_plus - f_minus) / (2.0 * step)
        a = analytic[ti].ravel()[flat]
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
        worst = max(worst, err)
    return worst
