"""Hypothesis-class discrepancies and sample-based divergence estimators.

Three routes to the same family of quantities, at different levels of
idealization:

* exhaustive computation of the class-restricted discrepancies ``dhH`` and
  ``dH`` on :class:`FiniteDAInstance` objects, where the supremum is a literal
  maximum over an explicit hypothesis list;
* :func:`variational_estimate`, which trains a small discriminator network by
  full-batch gradient ascent on the conjugate lower bound
  ``E_s[T] - E_t[phi*(T)]`` and is therefore a lower-bound estimate of the
  divergence up to optimization slack;
* :func:`dst_surrogate`, the trainable batch statistic used inside the
  adversarial training loop, where the auxiliary head is read off at the task
  head's argmax class.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tape, Tensor
from .divergences import (
    DivergenceSpec,
    DomainError,
    FiniteDistribution,
    eval_conjugate,
)
from .seeding import substream

__all__ = [
    "FiniteDAInstance",
    "dhH",
    "dH",
    "dst_surrogate",
    "DiscriminatorNet",
    "variational_estimate",
]

_TRIANGLE_TOL = 1e-12
_STREAM_ESTIMATOR = 4  # sub-stream id (datasets own 1-3)


class FiniteDAInstance:
    """A fully-enumerated adaptation problem on m support points.

    Everything is explicit: densities ``ps``/``pt`` over the points, labeling
    functions ``fs``/``ft``, a finite hypothesis list (one function table per
    row), and a k x k label loss table whose values lie in [0, loss_scale].
    The loss must vanish on the diagonal and satisfy the triangle inequality
    over labels; both are asserted at construction because every bound this
    package checks silently depends on them.
    """

    def __init__(self, ps, pt, fs, ft, hypotheses, loss_table, loss_scale, points=None):
        self.ps = ps if isinstance(ps, FiniteDistribution) else FiniteDistribution(ps)
        self.pt = pt if isinstance(pt, FiniteDistribution) else FiniteDistribution(pt)
        m = self.ps.n
        if self.pt.n != m:
            raise ValueError(f"ps and pt sizes differ: {m} vs {self.pt.n}")

        loss_table = np.asarray(loss_table, dtype=np.float64)
        if loss_table.ndim != 2 or loss_table.shape[0] != loss_table.shape[1]:
            raise ValueError("loss_table must be square")
        if not np.all(np.isfinite(loss_table)) or loss_table.min() < 0:
            raise ValueError("loss_table must be finite and nonnegative")
        if np.any(np.diag(loss_table) != 0):
            raise ValueError("loss_table must vanish on the diagonal")
        lhs = loss_table[:, None, :]
        rhs = loss_table[:, :, None] + loss_table[None, :, :]
        if np.any(lhs > rhs + _TRIANGLE_TOL):
            raise ValueError("loss_table violates the triangle inequality over labels")
        loss_scale = float(loss_scale)
        if loss_scale <= 0:
            raise ValueError("loss_scale must be positive")
        if loss_table.max() > loss_scale + _TRIANGLE_TOL:
            raise ValueError(
                f"loss values reach {loss_table.max()}, above loss_scale {loss_scale}"
            )
        k = loss_table.shape[0]

        def as_labels(arr, what):
            arr = np.asarray(arr, dtype=np.int64)
            if arr.shape != (m,):
                raise ValueError(f"{what} must have shape ({m},), got {arr.shape}")
            if arr.size and (arr.min() < 0 or arr.max() >= k):
                raise ValueError(f"{what} labels must lie in [0, {k})")
            return arr

        self.fs = as_labels(fs, "fs")
        self.ft = as_labels(ft, "ft")
        hypotheses = np.asarray(hypotheses, dtype=np.int64)
        if hypotheses.ndim != 2 or hypotheses.shape[1] != m or hypotheses.shape[0] < 1:
            raise ValueError(f"hypotheses must be (n_h, {m}), got {hypotheses.shape}")
        if hypotheses.min() < 0 or hypotheses.max() >= k:
            raise ValueError(f"hypothesis labels must lie in [0, {k})")
        self.hypotheses = hypotheses
        self.loss_table = loss_table
        self.loss_scale = loss_scale
        if points is None:
            points = np.arange(m, dtype=np.float64)[:, None]
        points = np.asarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[0] != m:
            raise ValueError(f"points must have {m} rows")
        self.points = points

    @property
    def m(self) -> int:
        return self.ps.n

    @property
    def k(self) -> int:
        return self.loss_table.shape[0]

    @property
    def n_hypotheses(self) -> int:
        return self.hypotheses.shape[0]

    def member(self, h) -> np.ndarray:
        """Validate that ``h`` is one of the hypothesis tables and return it."""
        h = np.asarray(h, dtype=np.int64)
        if h.shape != (self.m,):
            raise ValueError(f"hypothesis must have shape ({self.m},)")
        if not np.any(np.all(self.hypotheses == h, axis=1)):
            raise ValueError("h is not a member of the hypothesis set")
        return h

    def pair_loss(self, h, h_prime) -> np.ndarray:
        """Pointwise loss vector l(h(x), h'(x))."""
        return self.loss_table[np.asarray(h), np.asarray(h_prime)]

    def source_risk(self, h) -> float:
        return float(self.pair_loss(h, self.fs) @ self.ps.probs)

    def target_risk(self, h) -> float:
        return float(self.pair_loss(h, self.ft) @ self.pt.probs)


def _require_losses_in_domain(instance: FiniteDAInstance, spec: DivergenceSpec) -> None:
    tab = instance.loss_table
    ok = spec.conjugate_domain.contains(tab)
    if not np.all(ok):
        bad = float(tab[~ok].flat[0])
        raise DomainError(
            f"loss value {bad!r} lies outside the conjugate domain "
            f"{spec.conjugate_domain.text} of {spec.name}; pick a smaller loss_scale"
        )


def dhH(instance: FiniteDAInstance, h, spec: DivergenceSpec, use_abs: bool = True) -> float:
    """Discrepancy of ``h`` against the class: sup over h' of
    E_ps[l(h,h')] - E_pt[phi*(l(h,h'))], absolute value optional.

    The signed variant (use_abs=False) is the one that is provably dominated
    by the analytic f-divergence, since it is a restriction of the conjugate
    lower bound's supremum.
    """
    _require_losses_in_domain(instance, spec)
    h = instance.member(h)
    losses = instance.loss_table[h[None, :], instance.hypotheses]  # (n_h, m)
    diff = losses @ instance.ps.probs - eval_conjugate(spec, losses) @ instance.pt.probs
    vals = np.abs(diff) if use_abs else diff
    return float(vals.max())


def dH(instance: FiniteDAInstance, spec: DivergenceSpec, use_abs: bool = True) -> float:
    """sup over h in the class of :func:`dhH`, computed in one pass over all
    (h, h') pairs."""
    _require_losses_in_domain(instance, spec)
    hyp = instance.hypotheses
    losses = instance.loss_table[hyp[:, None, :], hyp[None, :, :]]  # (n_h, n_h, m)
    diff = losses @ instance.ps.probs - eval_conjugate(spec, losses) @ instance.pt.probs
    vals = np.abs(diff) if use_abs else diff
    return float(vals.max())


# --------------------------------------------------------------------------
# trainable surrogate

def dst_surrogate(tape, zs, zt, h_hat, h_hat_prime, spec, with_parts=False):
    """Batch estimate mean_s[lhat] - mean_t[phi*(lhat)] with
    lhat(z) = a(h_hat_prime(z)[argmax h_hat(z)]).

    The argmax is taken over the task head's scores with ties broken toward
    the lowest index, and the selection is a constant during backward: no
    gradient reaches h_hat through this statistic.  ``h_hat``/``h_hat_prime``
    are callables (tape, Tensor) -> Tensor of per-class scores.

    With ``with_parts`` the per-domain mean lhat tensors are returned next to
    the value, for metric logging.
    """
    scores_s = h_hat(tape, zs)
    scores_t = h_hat(tape, zt)
    aux_s = h_hat_prime(tape, zs)
    aux_t = h_hat_prime(tape, zt)
    if scores_s.data.shape[1] != aux_s.data.shape[1]:
        raise ValueError(
            f"head width mismatch: task head emits {scores_s.data.shape[1]} classes, "
            f"auxiliary head {aux_s.data.shape[1]}"
        )
    sel_s = np.argmax(scores_s.data, axis=1)
    sel_t = np.argmax(scores_t.data, axis=1)
    lhat_s = spec.tape_activation(tape, tape.take_per_row(aux_s, sel_s))
    lhat_t = spec.tape_activation(tape, tape.take_per_row(aux_t, sel_t))
    mean_s = tape.mean_all(lhat_s)
    value = tape.sub(mean_s, tape.mean_all(spec.tape_conjugate(tape, lhat_t)))
    if with_parts:
        return value, mean_s, tape.mean_all(lhat_t)
    return value


# --------------------------------------------------------------------------
# variational estimator

class DiscriminatorNet:
    """MLP discriminator T = a(net(x)) whose terminal activation pins the
    output inside the spec's conjugate domain."""

    def __init__(self, in_dim, spec, hidden, rng):
        sizes = [int(in_dim), *(int(w) for w in hidden), 1]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(
                Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)
            )
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))
        self.spec = spec

    def parameters(self):
        return [*self.weights, *self.biases]

    def forward(self, tape: Tape, x: Tensor) -> Tensor:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = tape.add_bias(tape.matmul(h, w), b)
            if i < last:
                h = tape.leaky_relu(h, 0.01)
        return self.spec.tape_activation(tape, h)


def _as_sample_matrix(samples, what: str) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"{what} must be a nonempty 1-D or 2-D sample array")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{what} contains non-finite values")
    return x


def _conjugate_objective(tape, net, ts, tt):
    t_s = net.forward(tape, ts)
    t_t = net.forward(tape, tt)
    return tape.sub(
        tape.mean_all(t_s),
        tape.mean_all(net.spec.tape_conjugate(tape, t_t)),
    )


def variational_estimate(
    samples_s,
    samples_t,
    spec: DivergenceSpec,
    hidden=(32, 32),
    steps: int = 2000,
    lr: float = 0.05,
    seed: int = 0,
) -> float:
    """Train the discriminator by full-batch gradient ascent on the conjugate
    bound and return the final objective value.

    Whatever the optimizer achieves, the returned number is an evaluation of
    E_s[T] - E_t[phi*(T)] at some feasible T, i.e. a lower-bound estimate of
    the divergence up to sampling error.  Full-batch ascent keeps the run
    deterministic for a given seed.
    """
    xs = _as_sample_matrix(samples_s, "samples_s")
    xt = _as_sample_matrix(samples_t, "samples_t")
    if xs.shape[1] != xt.shape[1]:
        raise ValueError(f"sample dims differ: {xs.shape[1]} vs {xt.shape[1]}")
    net = DiscriminatorNet(xs.shape[1], spec, hidden, substream(seed, _STREAM_ESTIMATOR))
    ts, tt = Tensor(xs), Tensor(xt)

    for step in range(int(steps)):
        tape = Tape()
        obj = _conjugate_objective(tape, net, ts, tt)
        if not np.isfinite(obj.data):
            raise FloatingPointError(f"estimator objective became non-finite at step {step}")
        tape.backward(obj)
        for p in net.parameters():
            p.data = p.data + lr * p.grad
            p.grad = None

    obj = _conjugate_objective(Tape(), net, ts, tt)
    if not np.isfinite(obj.data):
        raise FloatingPointError(f"estimator objective became non-finite at step {steps}")
    return float(obj.data)
