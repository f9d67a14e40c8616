"""Adversarial model architectures and their forward passes.

The trio is: featurizer ``g``, task classifier ``h_hat``, and an auxiliary
per-class domain classifier ``h_hat_prime`` with layer shapes identical to
``h_hat``.  Features entering the auxiliary head pass through a gradient
reversal, so one ordinary descent step simultaneously descends the task loss
and ascends the transfer discrepancy.  A separate model with a single-logit
global discriminator covers the classic domain-adversarial baseline, and
``dann_reduction_check`` verifies numerically that the baseline is the
shifted-JS instance of this architecture with a constant task classifier.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tape, Tensor
from .discrepancy import dst_surrogate
from .divergences import DivergenceSpec, catalog_names, get_spec
from .seeding import substream

__all__ = [
    "MLP",
    "FDALModel",
    "DannModel",
    "fdal_forward",
    "dann_forward",
    "dann_reduction_check",
    "save_checkpoint",
    "load_checkpoint",
]

LEAKY_SLOPE = 0.01
_STREAM_MODEL = 5  # sub-stream id (datasets 1-3, estimator 4)
_CHECKPOINT_HEADER = "fdal-checkpoint v1"


class MLP:
    """Plain fully-connected stack, Leaky-ReLU between layers, linear output.

    Weights start uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)), biases at
    zero.
    """

    def __init__(self, sizes, rng):
        self.sizes = [int(s) for s in sizes]
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"bad layer sizes {sizes}")
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.weights.append(
                Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)
            )
            self.biases.append(Tensor(np.zeros(fan_out), requires_grad=True))

    @classmethod
    def from_arrays(cls, weights, biases):
        sizes = [weights[0].shape[0]] + [w.shape[1] for w in weights]
        obj = cls.__new__(cls)
        obj.sizes = sizes
        obj.weights = [Tensor(np.array(w, dtype=np.float64), requires_grad=True) for w in weights]
        obj.biases = [Tensor(np.array(b, dtype=np.float64), requires_grad=True) for b in biases]
        return obj

    def parameters(self):
        return [*self.weights, *self.biases]

    def forward(self, tape: Tape, x: Tensor) -> Tensor:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = tape.add_bias(tape.matmul(h, w), b)
            if i < last:
                h = tape.leaky_relu(h, LEAKY_SLOPE)
        return h

    def forward_data(self, x: np.ndarray) -> np.ndarray:
        """Inference path on raw arrays; no tape, no gradients."""
        h = np.asarray(x, dtype=np.float64)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if i < last:
                h = np.where(h > 0.0, h, LEAKY_SLOPE * h)
        return h


class FDALModel:
    """Featurizer + task head + same-topology auxiliary domain head."""

    def __init__(self, g: MLP, h_hat: MLP, h_hat_prime: MLP, lambda_grl: float,
                 spec: DivergenceSpec):
        if h_hat.sizes != h_hat_prime.sizes:
            raise ValueError(
                f"task and auxiliary heads must share topology: "
                f"{h_hat.sizes} vs {h_hat_prime.sizes}"
            )
        if g.sizes[-1] != h_hat.sizes[0]:
            raise ValueError(
                f"featurizer output {g.sizes[-1]} does not feed head input {h_hat.sizes[0]}"
            )
        if lambda_grl < 0:
            raise ValueError("lambda_grl must be nonnegative")
        self.g = g
        self.h_hat = h_hat
        self.h_hat_prime = h_hat_prime
        self.lambda_grl = float(lambda_grl)
        self.spec = spec

    @classmethod
    def create(cls, input_dim, num_classes, spec, lambda_grl=0.6,
               hidden_g=(64, 64), hidden_head=(32,), seed=0):
        g = MLP([input_dim, *hidden_g], substream(seed, _STREAM_MODEL, 0))
        feat = hidden_g[-1]
        h_hat = MLP([feat, *hidden_head, num_classes], substream(seed, _STREAM_MODEL, 1))
        h_hat_prime = MLP([feat, *hidden_head, num_classes], substream(seed, _STREAM_MODEL, 2))
        return cls(g, h_hat, h_hat_prime, lambda_grl, spec)

    @property
    def num_classes(self) -> int:
        return self.h_hat.sizes[-1]

    def parameters(self):
        return [*self.g.parameters(), *self.h_hat.parameters(), *self.h_hat_prime.parameters()]

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax task labels on raw arrays (ties toward the lowest index)."""
        return np.argmax(self.h_hat.forward_data(self.g.forward_data(x)), axis=1)


class DannModel:
    """Featurizer + task head + single-logit global domain discriminator."""

    def __init__(self, g: MLP, h_hat: MLP, discriminator: MLP, lambda_grl: float):
        if g.sizes[-1] != h_hat.sizes[0] or g.sizes[-1] != discriminator.sizes[0]:
            raise ValueError("head inputs must match featurizer output")
        if discriminator.sizes[-1] != 1:
            raise ValueError("discriminator must emit a single logit")
        if lambda_grl < 0:
            raise ValueError("lambda_grl must be nonnegative")
        self.g = g
        self.h_hat = h_hat
        self.discriminator = discriminator
        self.lambda_grl = float(lambda_grl)

    @classmethod
    def create(cls, input_dim, num_classes, lambda_grl=0.6,
               hidden_g=(64, 64), hidden_head=(32,), seed=0):
        g = MLP([input_dim, *hidden_g], substream(seed, _STREAM_MODEL, 0))
        feat = hidden_g[-1]
        h_hat = MLP([feat, *hidden_head, num_classes], substream(seed, _STREAM_MODEL, 1))
        disc = MLP([feat, *hidden_head, 1], substream(seed, _STREAM_MODEL, 3))
        return cls(g, h_hat, disc, lambda_grl)

    @property
    def num_classes(self) -> int:
        return self.h_hat.sizes[-1]

    def parameters(self):
        return [*self.g.parameters(), *self.h_hat.parameters(), *self.discriminator.parameters()]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.h_hat.forward_data(self.g.forward_data(x)), axis=1)


# --------------------------------------------------------------------------
# forward passes

def fdal_forward(tape: Tape, model: FDALModel, xs, ys, xt):
    """One adversarial forward pass.

    Returns (task_loss, dst, lhat_src, lhat_tgt): softmax cross-entropy of
    the task head on the source batch, the conjugate discrepancy surrogate
    over both batches (auxiliary head fed gradient-reversed features), and
    the per-domain batch means of lhat as plain floats for logging.
    """
    xs = np.asarray(xs, dtype=np.float64)
    xt = np.asarray(xt, dtype=np.float64)
    if xs.shape[0] == 0 or xt.shape[0] == 0:
        raise ValueError("batches must be nonempty")
    zs = model.g.forward(tape, Tensor(xs))
    zt = model.g.forward(tape, Tensor(xt))
    task_scores = model.h_hat.forward(tape, zs)
    task_loss = tape.softmax_cross_entropy(task_scores, ys)
    zs_rev = tape.grad_reversal(zs, model.lambda_grl)
    zt_rev = tape.grad_reversal(zt, model.lambda_grl)
    dst, mean_s, mean_t = dst_surrogate(
        tape,
        zs_rev,
        zt_rev,
        model.h_hat.forward,
        model.h_hat_prime.forward,
        model.spec,
        with_parts=True,
    )
    return task_loss, dst, float(mean_s.data), float(mean_t.data)


def dann_forward(tape: Tape, model: DannModel, xs, ys, xt):
    """Baseline forward: dst is mean_s[log sigma(D)] + mean_t[log(1 - sigma(D))]
    with the discriminator fed gradient-reversed features."""
    xs = np.asarray(xs, dtype=np.float64)
    xt = np.asarray(xt, dtype=np.float64)
    if xs.shape[0] == 0 or xt.shape[0] == 0:
        raise ValueError("batches must be nonempty")
    zs = model.g.forward(tape, Tensor(xs))
    zt = model.g.forward(tape, Tensor(xt))
    task_scores = model.h_hat.forward(tape, zs)
    task_loss = tape.softmax_cross_entropy(task_scores, ys)
    logit_s = model.discriminator.forward(tape, tape.grad_reversal(zs, model.lambda_grl))
    logit_t = model.discriminator.forward(tape, tape.grad_reversal(zt, model.lambda_grl))
    dst = tape.add(
        tape.mean_all(tape.log_sigmoid(logit_s)),
        tape.mean_all(tape.log_sigmoid(tape.neg(logit_t))),
    )
    return task_loss, dst


def dann_reduction_check(model: FDALModel, xs, xt, basis_index: int = 0) -> float:
    """Deviation between the shifted-JS surrogate under a constant task head
    and the baseline statistic using one auxiliary row as discriminator.

    With the task head overridden to the constant basis vector e_i, lhat
    picks row i of the auxiliary head everywhere, so the surrogate should
    coincide term by term with log sigma(D) / log(1 - sigma(D)) for
    D = h_hat_prime(.)[i].  Returns the max absolute per-example deviation
    over both batches.
    """
    if model.spec.name != "js_shifted":
        raise ValueError("reduction check is defined for the js_shifted divergence")
    k = model.num_classes
    if not 0 <= basis_index < k:
        raise ValueError(f"basis_index must lie in [0, {k})")
    zs = model.g.forward_data(np.asarray(xs, dtype=np.float64))
    zt = model.g.forward_data(np.asarray(xt, dtype=np.float64))
    aux_s = model.h_hat_prime.forward_data(zs)[:, basis_index]
    aux_t = model.h_hat_prime.forward_data(zt)[:, basis_index]

    # surrogate side, with argmax(e_i) = i everywhere
    spec = model.spec
    tape = Tape()
    lhat_s = spec.tape_activation(tape, Tensor(aux_s)).data
    lhat_t = spec.tape_activation(tape, Tensor(aux_t)).data
    conj_t = spec.tape_conjugate(tape, Tensor(lhat_t)).data

    # baseline side: D = the same auxiliary row
    def log_sigmoid(x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))

    dev_src = np.abs(lhat_s - log_sigmoid(aux_s))
    dev_tgt = np.abs(-conj_t - log_sigmoid(-aux_t))
    return float(max(dev_src.max(), dev_tgt.max()))


# --------------------------------------------------------------------------
# checkpoints

def _model_arrays(model):
    if isinstance(model, FDALModel):
        groups = [("g", model.g), ("h_hat", model.h_hat), ("h_hat_prime", model.h_hat_prime)]
    else:
        groups = [("g", model.g), ("h_hat", model.h_hat), ("discriminator", model.discriminator)]
    for prefix, mlp in groups:
        for i, w in enumerate(mlp.weights):
            yield f"{prefix}.w{i}", w.data
        for i, b in enumerate(mlp.biases):
            yield f"{prefix}.b{i}", b.data


def save_checkpoint(model, path) -> None:
    """Textual key/value checkpoint: versioned header, model kind and
    hyperparameters, then one `array name shape... : row-major values` line
    per parameter.  repr() serialization makes the round trip exact."""
    if isinstance(model, FDALModel):
        kind = "fdal"
        spec = model.spec
        if spec.name not in catalog_names():
            raise ValueError(f"cannot checkpoint non-catalog divergence {spec.name!r}")
        div_line = spec.name
        gamma_line = "-" if spec.gamma is None else repr(float(spec.gamma))
    elif isinstance(model, DannModel):
        kind, div_line, gamma_line = "dann", "-", "-"
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    lines = [
        _CHECKPOINT_HEADER,
        f"kind {kind}",
        f"divergence {div_line}",
        f"gamma {gamma_line}",
        f"lambda_grl {repr(model.lambda_grl)}",
    ]
    for name, arr in _model_arrays(model):
        shape = " ".join(str(s) for s in arr.shape)
        values = " ".join(repr(float(v)) for v in arr.reshape(-1))
        lines.append(f"array {name} {shape} : {values}")
    lines.append("end")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _collect_mlp(arrays, prefix):
    weights, biases = [], []
    i = 0
    while f"{prefix}.w{i}" in arrays:
        weights.append(arrays[f"{prefix}.w{i}"])
        biases.append(arrays[f"{prefix}.b{i}"])
        i += 1
    if not weights:
        raise ValueError(f"checkpoint missing arrays for {prefix!r}")
    return MLP.from_arrays(weights, biases)


def load_checkpoint(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _CHECKPOINT_HEADER:
        raise ValueError(f"{path}: not a checkpoint (missing {_CHECKPOINT_HEADER!r} header)")
    fields = {}
    arrays = {}
    for ln in lines[1:]:
        if ln == "end":
            break
        key, _, rest = ln.partition(" ")
        if key == "array":
            head, _, values = rest.partition(" : ")
            parts = head.split()
            name, shape = parts[0], tuple(int(s) for s in parts[1:])
            arr = np.array([float(v) for v in values.split()], dtype=np.float64)
            arrays[name] = arr.reshape(shape)
        else:
            fields[key] = rest
    lam = float(fields["lambda_grl"])
    g = _collect_mlp(arrays, "g")
    h_hat = _collect_mlp(arrays, "h_hat")
    if fields["kind"] == "fdal":
        gamma = None if fields["gamma"] == "-" else float(fields["gamma"])
        spec = get_spec(fields["divergence"]) if gamma is None else get_spec(
            fields["divergence"], gamma
        )
        return FDALModel(g, h_hat, _collect_mlp(arrays, "h_hat_prime"), lam, spec)
    if fields["kind"] == "dann":
        return DannModel(g, h_hat, _collect_mlp(arrays, "discriminator"), lam)
    raise ValueError(f"{path}: unknown model kind {fields['kind']!r}")
