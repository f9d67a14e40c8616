"""Single-pass adversarial training loop, its baseline variant, and evaluation.

One optimizer step descends ``task_loss - eta * dst`` for every parameter
group; the gradient reversal inside the model makes that a simultaneous
min-max move (auxiliary head ascends the discrepancy, featurizer descends
task loss plus eta times the discrepancy, task head descends task loss
alone).  No learning-rate schedule, no early stopping: runs are plain,
deterministic functions of (config, data).

Target labels are never read on the training path.  The evaluation helper
uses the datasets' eval accessor, and tests assert the training-path counter
stays at zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .autodiff import Tape
from .datasets import DADataset
from .divergences import get_spec
from .models import DannModel, FDALModel, dann_forward, fdal_forward
from .seeding import substream

__all__ = [
    "TrainConfig",
    "RunMetrics",
    "SGD",
    "clip_global_norm",
    "train",
    "train_dann",
    "evaluate",
]

METRIC_COLUMNS = (
    "epoch",
    "source_risk",
    "target_risk",
    "dst",
    "lhat_src",
    "lhat_tgt",
    "source_acc",
    "target_acc",
    "wall_ms",
)

GRAD_CLIP_NORM = 10.0
_STREAM_TRAINER = 6  # sub-stream id (datasets 1-3, estimator 4, models 5)


@dataclass(frozen=True)
class TrainConfig:
    divergence: str = "js_shifted"
    gamma: Optional[float] = None
    epochs: int = 30
    batch_size: int = 128
    lr: float = 0.01
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 0.002
    eta: float = 0.5
    lambda_grl: float = 0.6
    seed: int = 0
    eval_every: int = 1
    hidden_g: tuple = (64, 64)
    hidden_head: tuple = (32,)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("epochs, batch_size and eval_every must be at least 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0 or self.eta < 0 or self.lambda_grl < 0:
            raise ValueError("weight_decay, eta and lambda_grl must be nonnegative")

    def spec(self):
        if self.gamma is None:
            return get_spec(self.divergence)
        return get_spec(self.divergence, self.gamma)

    def with_overrides(self, **kwargs) -> "TrainConfig":
        return replace(self, **kwargs)


@dataclass
class RunMetrics:
    """Per-epoch metric rows plus a per-step loss log.

    Epoch rows carry evaluation-path risks/accuracies at epoch end and the
    step means of the discrepancy statistics.  For the baseline trainer the
    lhat columns hold the two halves of its statistic (source mean
    log sigma(D), target mean log(1 - sigma(D))).  The step log keeps
    (task, dst, total) per optimizer step for loss-level comparisons.
    """

    rows: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    def csv_text(self, zero_wall: bool = False) -> str:
        lines = [",".join(METRIC_COLUMNS)]
        for row in self.rows:
            cells = []
            for col in METRIC_COLUMNS:
                if col == "epoch":
                    cells.append(str(int(row[col])))
                elif col == "wall_ms" and zero_wall:
                    cells.append(repr(0.0))
                else:
                    cells.append(repr(float(row[col])))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write_csv(self, path, zero_wall: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text(zero_wall=zero_wall))

    def final(self, column: str) -> float:
        if not self.rows:
            raise ValueError("no metric rows recorded")
        return float(self.rows[-1][column])

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=np.float64)


class SGD:
    """Nesterov momentum in the convention v <- mu v + g; p <- p - lr (g + mu v),
    with L2 weight decay folded into g before the velocity update."""

    def __init__(self, params, lr, momentum=0.9, weight_decay=0.0, nesterov=True):
        self.params = list(params)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.nesterov = bool(nesterov)
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        mu = self.momentum
        for p, v in zip(self.params, self.velocity):
            g = np.zeros_like(p.data) if p.grad is None else p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            v *= mu
            v += g
            if self.nesterov:
                p.data = p.data - self.lr * (g + mu * v)
            else:
                p.data = p.data - self.lr * v
            p.grad = None


def clip_global_norm(params, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``;
    returns the pre-clip norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * factor
    return norm


class _Recycler:
    """Endless shuffled index stream over n items; reshuffles on exhaustion."""

    def __init__(self, n: int, rng):
        self.n = n
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def take(self, count: int) -> np.ndarray:
        out = []
        while count > 0:
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            grab = min(count, self.n - self.pos)
            out.append(self.order[self.pos : self.pos + grab])
            self.pos += grab
            count -= grab
        return np.concatenate(out)


def evaluate(model, dataset: DADataset):
    """(accuracy, mean task loss) of the task head on a labeled dataset,
    via the evaluation-path label accessor."""
    labels = dataset.eval_labels()
    logits = model.h_hat.forward_data(model.g.forward_data(dataset.features))
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    mean_loss = float(-log_probs[np.arange(len(labels)), labels].mean())
    accuracy = float((np.argmax(logits, axis=1) == labels).mean())
    return accuracy, mean_loss


def _check_datasets(source_ds: DADataset, target_ds: DADataset):
    if source_ds.n == 0 or target_ds.n == 0:
        raise ValueError("datasets must be nonempty")
    if not source_ds.has_labels:
        raise ValueError("source dataset must be labeled")
    if source_ds.d != target_ds.d:
        raise ValueError(f"feature dims differ: {source_ds.d} vs {target_ds.d}")


def _require_finite_params(model, epoch, step):
    for p in model.parameters():
        if not np.all(np.isfinite(p.data)):
            raise FloatingPointError(
                f"non-finite parameter after update at epoch {epoch}, step {step}"
            )


def _run_loop(config: TrainConfig, source_ds, target_ds, model, forward_step):
    """Shared epoch/step scaffolding for both trainers.

    ``forward_step(tape, xs, ys, xt) -> (task, dst, lhat_s, lhat_t)``.
    """
    _check_datasets(source_ds, target_ds)
    xs_all = source_ds.features
    ys_all = source_ds.labels  # single training-path read of source labels
    xt_all = target_ds.features

    opt = SGD(
        model.parameters(),
        lr=config.lr,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
        nesterov=config.nesterov,
    )
    src_rng = substream(config.seed, _STREAM_TRAINER, 0)
    tgt_stream = _Recycler(target_ds.n, substream(config.seed, _STREAM_TRAINER, 1))
    metrics = RunMetrics()

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = src_rng.permutation(source_ds.n)
        dst_sum = lhat_s_sum = lhat_t_sum = 0.0
        n_steps = 0
        for step, start in enumerate(range(0, source_ds.n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            tgt_idx = tgt_stream.take(len(idx))
            tape = Tape()
            task, dst, lhat_s, lhat_t = forward_step(
                tape, xs_all[idx], ys_all[idx], xt_all[tgt_idx]
            )
            total = tape.sub(task, tape.scale(dst, config.eta))
            if not np.isfinite(total.data):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, step {step}"
                )
            tape.backward(total)
            clip_global_norm(model.parameters(), GRAD_CLIP_NORM)
            opt.step()
            _require_finite_params(model, epoch, step)
            dst_sum += float(dst.data)
            lhat_s_sum += lhat_s
            lhat_t_sum += lhat_t
            n_steps += 1
            metrics.steps.append(
                {
                    "epoch": epoch,
                    "step": step,
                    "task": float(task.data),
                    "dst": float(dst.data),
                    "total": float(total.data),
                }
            )
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            source_acc, source_risk = evaluate(model, source_ds)
            if target_ds.has_labels:
                target_acc, target_risk = evaluate(model, target_ds)
            else:
                target_acc = target_risk = float("nan")
            metrics.rows.append(
                {
                    "epoch": epoch,
                    "source_risk": source_risk,
                    "target_risk": target_risk,
                    "dst": dst_sum / n_steps,
                    "lhat_src": lhat_s_sum / n_steps,
                    "lhat_tgt": lhat_t_sum / n_steps,
                    "source_acc": source_acc,
                    "target_acc": target_acc,
                    "wall_ms": (time.perf_counter() - t0) * 1000.0,
                }
            )
    return model, metrics


def train(config: TrainConfig, source_ds: DADataset, target_ds: DADataset):
    """Adversarial run; returns (FDALModel, RunMetrics)."""
    _check_datasets(source_ds, target_ds)
    k = source_ds.num_classes
    model = FDALModel.create(
        source_ds.d,
        k,
        config.spec(),
        lambda_grl=config.lambda_grl,
        hidden_g=config.hidden_g,
        hidden_head=config.hidden_head,
        seed=config.seed,
    )

    def step_fn(tape, xs, ys, xt):
        return fdal_forward(tape, model, xs, ys, xt)

    return _run_loop(config, source_ds, target_ds, model, step_fn)


def train_dann(config: TrainConfig, source_ds: DADataset, target_ds: DADataset):
    """Baseline run with the global binary discriminator; returns
    (DannModel, RunMetrics)."""
    _check_datasets(source_ds, target_ds)
    k = source_ds.num_classes
    model = DannModel.create(
        source_ds.d,
        k,
        lambda_grl=config.lambda_grl,
        hidden_g=config.hidden_g,
        hidden_head=config.hidden_head,
        seed=config.seed,
    )

    def step_fn(tape, xs, ys, xt):
        task, dst, part_s, part_t = dann_forward(tape, model, xs, ys, xt, with_parts=True)
        return task, dst, part_s, part_t

    return _run_loop(config, source_ds, target_ds, model, step_fn)
