"""Minimal reverse-mode automatic differentiation on 64-bit numpy arrays.

A :class:`Tape` records every operation in execution order; ``backward`` walks
the records strictly in reverse and accumulates gradients, so two backward
passes over identical tapes are bit-identical.  Broadcasting is deliberately
restricted to scalar-vs-tensor (plus a dedicated row-bias op for affine
layers) to keep every backward rule auditable.

Tensors are thin wrappers around ``float64`` arrays.  Parameters are leaf
tensors created once with ``requires_grad=True`` and re-used across tapes;
a tape itself is cheap and meant to be rebuilt every step.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "Tape", "finite_diff_check"]


class Tensor:
    """A float64 array plus gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_elementwise_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape == b.data.shape:
        return
    if a.data.shape == () or b.data.shape == ():
        return
    raise ValueError(
        f"{op}: shapes {a.data.shape} and {b.data.shape} do not match; "
        "only scalar-vs-tensor broadcasting is supported"
    )


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    """Collapse an upstream gradient onto a (possibly scalar) input shape."""
    if grad.shape == shape:
        return grad
    # only scalar inputs can have been broadcast
    return np.asarray(grad.sum())


class Tape:
    """Ordered record of operations; gradients flow in exact reverse order."""

    def __init__(self):
        self._nodes = []

    def __len__(self):
        return len(self._nodes)

    def clear(self) -> None:
        """Drop all recorded nodes (frees saved activations)."""
        self._nodes = []

    def _record(self, inputs, output: Tensor, backward_fn) -> Tensor:
        output.requires_grad = any(t.requires_grad for t in inputs)
        self._nodes.append((inputs, output, backward_fn))
        return output

    # ----------------------------------------------------------------- #
    # elementwise arithmetic                                            #
    # ----------------------------------------------------------------- #

    def add(self, a, b) -> Tensor:
        a, b = _as_tensor(a), _as_tensor(b)
        _check_elementwise_shapes(a, b, "add")
        out = Tensor(a.data + b.data)

        def backward(g):
            return _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)

        return self._record((a, b), out, backward)

    def sub(self, a, b) -> Tensor:
        a, b = _as_tensor(a), _as_tensor(b)
        _check_elementwise_shapes(a, b, "sub")
        out = Tensor(a.data - b.data)

        def backward(g):
            return _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)

        return self._record((a, b), out, backward)

    def mul(self, a, b) -> Tensor:
        a, b = _as_tensor(a), _as_tensor(b)
        _check_elementwise_shapes(a, b, "mul")
        out = Tensor(a.data * b.data)

        def backward(g):
            return (
                _reduce_to(g * b.data, a.data.shape),
                _reduce_to(g * a.data, b.data.shape),
            )

        return self._record((a, b), out, backward)

    def neg(self, a: Tensor) -> Tensor:
        out = Tensor(-a.data)
        return self._record((a,), out, lambda g: (-g,))

    def scale(self, a: Tensor, c: float) -> Tensor:
        """Multiply by a python constant (not a differentiable input)."""
        c = float(c)
        out = Tensor(a.data * c)
        return self._record((a,), out, lambda g: (g * c,))

    # ----------------------------------------------------------------- #
    # elementwise nonlinearities                                        #
    # ----------------------------------------------------------------- #

    def exp(self, a: Tensor) -> Tensor:
        # saturates to inf silently; callers watch for non-finite objectives
        with np.errstate(over="ignore"):
            out = Tensor(np.exp(a.data))
        return self._record((a,), out, lambda g: (g * out.data,))

    def log(self, a: Tensor) -> Tensor:
        if not np.all(a.data > 0.0):
            bad = float(np.min(a.data))
            raise ValueError(f"log of non-positive input (min value {bad})")
        out = Tensor(np.log(a.data))
        return self._record((a,), out, lambda g: (g / a.data,))

    def sqrt(self, a: Tensor) -> Tensor:
        if not np.all(a.data > 0.0):
            raise ValueError("sqrt requires strictly positive input")
        out = Tensor(np.sqrt(a.data))
        return self._record((a,), out, lambda g: (g * (0.5 / out.data),))

    def reciprocal(self, a: Tensor) -> Tensor:
        if np.any(a.data == 0.0):
            raise ValueError("reciprocal of zero")
        out = Tensor(1.0 / a.data)
        return self._record((a,), out, lambda g: (-g * out.data * out.data,))

    def sigmoid(self, a: Tensor) -> Tensor:
        out = Tensor(_stable_sigmoid(a.data))
        return self._record((a,), out, lambda g: (g * out.data * (1.0 - out.data),))

    def log_sigmoid(self, a: Tensor) -> Tensor:
        """log(sigmoid(x)) computed without intermediate underflow."""
        x = a.data
        out_data = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))
        out = Tensor(out_data)

        def backward(g):
            return (g * _stable_sigmoid(-x),)

        return self._record((a,), out, backward)

    def tanh(self, a: Tensor) -> Tensor:
        out = Tensor(np.tanh(a.data))
        return self._record((a,), out, lambda g: (g * (1.0 - out.data * out.data),))

    def relu(self, a: Tensor) -> Tensor:
        out = Tensor(np.maximum(a.data, 0.0))
        return self._record((a,), out, lambda g: (g * (a.data > 0.0),))

    def leaky_relu(self, a: Tensor, slope: float = 0.01) -> Tensor:
        x = a.data
        out = Tensor(np.where(x > 0.0, x, slope * x))
        return self._record((a,), out, lambda g: (g * np.where(x > 0.0, 1.0, slope),))

    def clamp_min(self, a: Tensor, floor: float) -> Tensor:
        """Floor tiny values (gradient passes only where the input is above it)."""
        out = Tensor(np.maximum(a.data, floor))
        return self._record((a,), out, lambda g: (g * (a.data > floor),))

    # ----------------------------------------------------------------- #
    # linear algebra and reductions                                     #
    # ----------------------------------------------------------------- #

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ValueError("matmul expects 2-D operands")
        if a.data.shape[1] != b.data.shape[0]:
            raise ValueError(f"matmul: inner dims {a.data.shape} x {b.data.shape}")
        out = Tensor(a.data @ b.data)

        def backward(g):
            return g @ b.data.T, a.data.T @ g

        return self._record((a, b), out, backward)

    def add_bias(self, x: Tensor, b: Tensor) -> Tensor:
        """Row-wise bias add: (m,k) + (k,).  The one sanctioned non-scalar broadcast."""
        if x.data.ndim != 2 or b.data.ndim != 1 or x.data.shape[1] != b.data.shape[0]:
            raise ValueError(f"add_bias: shapes {x.data.shape} + {b.data.shape}")
        out = Tensor(x.data + b.data[None, :])

        def backward(g):
            return g, g.sum(axis=0)

        return self._record((x, b), out, backward)

    def sum_all(self, a: Tensor) -> Tensor:
        out = Tensor(a.data.sum())
        return self._record((a,), out, lambda g: (np.broadcast_to(g, a.data.shape).copy(),))

    def mean_all(self, a: Tensor) -> Tensor:
        n = a.data.size
        out = Tensor(a.data.sum() / n)
        return self._record((a,), out, lambda g: (np.broadcast_to(g / n, a.data.shape).copy(),))

    def take_per_row(self, x: Tensor, idx) -> Tensor:
        """Select one column per row; gradient scatters back, none to the indices."""
        idx = np.asarray(idx, dtype=np.int64)
        m, k = x.data.shape
        if idx.shape != (m,) or idx.min() < 0 or idx.max() >= k:
            raise ValueError("take_per_row: index array must be (rows,) within column range")
        rows = np.arange(m)
        out = Tensor(x.data[rows, idx])

        def backward(g):
            gx = np.zeros_like(x.data)
            gx[rows, idx] = g
            return (gx,)

        return self._record((x,), out, backward)

    def grad_reversal(self, a: Tensor, lam: float) -> Tensor:
        """Identity forward; backward multiplies the upstream gradient by -lam."""
        lam = float(lam)
        out = Tensor(a.data.copy())
        return self._record((a,), out, lambda g: (-lam * g,))

    def softmax_cross_entropy(self, logits: Tensor, labels) -> Tensor:
        """Mean negative log-softmax of the true class; max-shifted for stability."""
        labels = np.asarray(labels, dtype=np.int64)
        if logits.data.ndim != 2:
            raise ValueError("softmax_cross_entropy expects (batch, classes) logits")
        m, k = logits.data.shape
        if labels.shape != (m,):
            raise ValueError("labels must be a 1-D array matching the batch size")
        if labels.min() < 0 or labels.max() >= k:
            raise ValueError(f"label out of range [0, {k})")
        shifted = logits.data - logits.data.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_p = shifted - log_z
        rows = np.arange(m)
        out = Tensor(-log_p[rows, labels].sum() / m)

        def backward(g):
            grad = np.exp(log_p)
            grad[rows, labels] -= 1.0
            return (grad * (g / m),)

        return self._record((logits,), out, backward)

    # ----------------------------------------------------------------- #
    # reverse pass                                                      #
    # ----------------------------------------------------------------- #

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) into ``.grad`` of every requires_grad tensor.

        ``loss`` must be scalar.  Traversal is the exact reverse of recording
        order; repeated calls keep accumulating (call ``zero_grad`` between
        steps).
        """
        if loss.data.shape != ():
            raise ValueError("backward expects a scalar loss")
        if not np.isfinite(loss.data):
            raise FloatingPointError("backward on non-finite loss")
        flowing: dict[int, np.ndarray] = {id(loss): np.asarray(1.0)}
        for inputs, output, backward_fn in reversed(self._nodes):
            g = flowing.get(id(output))
            if g is None or not output.requires_grad:
                continue
            for tensor, contrib in zip(inputs, backward_fn(g)):
                if contrib is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in flowing:
                    flowing[key] = flowing[key] + contrib
                else:
                    flowing[key] = contrib
        produced = {id(output) for _, output, _ in self._nodes}
        for inputs, _, _ in self._nodes:
            for tensor in inputs:
                if tensor.requires_grad and id(tensor) not in produced and id(tensor) in flowing:
                    g = flowing.pop(id(tensor))
                    if tensor.grad is None:
                        tensor.grad = np.zeros_like(tensor.data)
                    tensor.grad = tensor.grad + g


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def finite_diff_check(f, point: np.ndarray, eps: float = 1e-5) -> float:
    """Compare an analytic gradient against central differences.

    ``f`` maps a flat parameter vector to ``(value, gradient)``; the return is
    the max over coordinates of ``|analytic - fd| / max(1, |analytic|)``.
    """
    point = np.asarray(point, dtype=np.float64)
    _, analytic = f(point)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != point.shape:
        raise ValueError("gradient shape does not match the point")
    worst = 0.0
    for i in range(point.size):
        bumped = point.copy()
        bumped.flat[i] += eps
        up, _ = f(bumped)
        bumped.flat[i] -= 2 * eps
        down, _ = f(bumped)
        fd = (up - down) / (2 * eps)
        a = analytic.flat[i]
        worst = max(worst, abs(a - fd) / max(1.0, abs(a)))
    return worst
