"""Synthetic domain-adaptation tasks and CSV ingestion.

Two covariate-shift generators (rotated two-moons, shifted Gaussian blobs),
a label-shift resampler, and a plain-text dataset format.  Every generator
is a pure function of (parameters, seed): all randomness flows through
:func:`fdal.seeding.substream`, so outputs are byte-stable across runs and
platforms.

Label access is audited.  ``DADataset.labels`` is the training-path
accessor and increments ``label_reads``; ``DADataset.eval_labels()`` is the
evaluation-path accessor and increments ``eval_reads``.  Training code must
only ever touch target labels through the evaluation path — tests assert a
target dataset finishes training with ``label_reads == 0``.  Construction
helpers in this module read the private array directly; the counters audit
the trainer, not dataset plumbing.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .divergences import FiniteDistribution, analytic_gamma_js
from .seeding import substream

__all__ = [
    "DADataset",
    "make_rotated_moons",
    "make_gaussian_shift",
    "resample_label_shift",
    "js_label_distance",
    "save_csv",
    "load_csv",
]

_DOMAIN_TAGS = ("source", "target")

# Sub-stream ids, one per consumer so generators never share draws.
_STREAM_MOONS = 1
_STREAM_GAUSS = 2
_STREAM_RESAMPLE = 3


class DADataset:
    """Feature matrix plus optionally-withheld integer labels for one domain."""

    def __init__(self, features, labels, domain_tag, metadata=None):
        features = np.ascontiguousarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if not np.all(np.isfinite(features)):
            raise ValueError("features must be finite")
        if domain_tag not in _DOMAIN_TAGS:
            raise ValueError(f"domain_tag must be one of {_DOMAIN_TAGS}, got {domain_tag!r}")
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (features.shape[0],):
                raise ValueError(
                    f"labels must have shape ({features.shape[0]},), got {labels.shape}"
                )
            if not np.issubdtype(labels.dtype, np.integer):
                if not np.all(labels == np.floor(labels)):
                    raise ValueError("labels must be integer class indices")
            labels = labels.astype(np.int64)
            if labels.size and labels.min() < 0:
                raise ValueError("labels must be nonnegative class indices")
        self.features = features
        self._labels = labels
        self.domain_tag = domain_tag
        self.metadata = dict(metadata) if metadata else {}
        self.label_reads = 0
        self.eval_reads = 0

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def has_labels(self) -> bool:
        return self._labels is not None

    @property
    def num_classes(self):
        if self._labels is None or self._labels.size == 0:
            return None
        return int(self._labels.max()) + 1

    @property
    def labels(self) -> np.ndarray:
        """Training-path label accessor; every read is counted."""
        if self._labels is None:
            raise LookupError(f"{self.domain_tag} dataset has no labels")
        self.label_reads += 1
        return self._labels

    def eval_labels(self) -> np.ndarray:
        """Evaluation-path label accessor, counted separately from training reads."""
        if self._labels is None:
            raise LookupError(f"{self.domain_tag} dataset has no labels")
        self.eval_reads += 1
        return self._labels

    def __repr__(self) -> str:  # pragma: no cover - debugging nicety
        lab = "labeled" if self.has_labels else "unlabeled"
        return f"DADataset(n={self.n}, d={self.d}, {self.domain_tag}, {lab})"


# --------------------------------------------------------------------------
# generators

# Noiseless centroid of the union of the two arcs: the outer arc averages to
# (0, 2/pi), the inner to (1, 1/2 - 2/pi), so the midpoint is exact.
_MOONS_CENTER = np.array([0.5, 0.25])


def _rotate_about(points: np.ndarray, degrees: float, center: np.ndarray) -> np.ndarray:
    theta = math.radians(degrees)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return (points - center) @ rot.T + center


def _sample_moons(n: int, noise_sigma: float, rng: np.random.Generator):
    n_outer = n // 2
    n_inner = n - n_outer
    t_outer = rng.uniform(0.0, math.pi, size=n_outer)
    t_inner = rng.uniform(0.0, math.pi, size=n_inner)
    pts = np.empty((n, 2))
    pts[:n_outer, 0] = np.cos(t_outer)
    pts[:n_outer, 1] = np.sin(t_outer)
    pts[n_outer:, 0] = 1.0 - np.cos(t_inner)
    pts[n_outer:, 1] = 0.5 - np.sin(t_inner)
    labels = np.concatenate([np.zeros(n_outer, dtype=np.int64), np.ones(n_inner, dtype=np.int64)])
    if noise_sigma > 0:
        pts += rng.normal(scale=noise_sigma, size=pts.shape)
    order = rng.permutation(n)
    return pts[order], labels[order]


def make_rotated_moons(n: int, rotation_deg: float, noise_sigma: float, seed: int):
    """Two interleaved half-circles; the target copy is freshly sampled and
    rotated about the arcs' joint centroid.

    Rotating by 180 degrees maps the outer arc exactly onto the inner one, so
    that setting swaps the classes geometrically — the standard warning case
    for adaptation methods.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    src_x, src_y = _sample_moons(n, noise_sigma, substream(seed, _STREAM_MOONS, 0))
    tgt_x, tgt_y = _sample_moons(n, noise_sigma, substream(seed, _STREAM_MOONS, 1))
    tgt_x = _rotate_about(tgt_x, rotation_deg, _MOONS_CENTER)
    meta = {
        "generator": "rotated_moons",
        "n": int(n),
        "rotation_deg": float(rotation_deg),
        "noise_sigma": float(noise_sigma),
        "seed": int(seed),
    }
    return (
        DADataset(src_x, src_y, "source", meta),
        DADataset(tgt_x, tgt_y, "target", meta),
    )


def make_gaussian_shift(
    n: int,
    d: int,
    mean_shift: float,
    cov_scale: float,
    seed: int,
    class_sep: float = 2.0,
):
    """Two-class isotropic Gaussian blobs with a translated, rescaled target.

    Source class c is N(c * class_sep * e1, I); the target translates every
    mean by mean_shift along the first axis and scales the covariance by
    cov_scale.  With class_sep=0, d=1, mean_shift=1, cov_scale=1 the feature
    marginals are exactly N(0,1) vs N(1,1), whose KL divergence is 1/2.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if d < 1:
        raise ValueError("d must be at least 1")
    if cov_scale <= 0:
        raise ValueError("cov_scale must be positive")

    def sample(rng, shift, scale):
        n0 = n // 2
        y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n - n0, dtype=np.int64)])
        x = rng.normal(size=(n, d)) * math.sqrt(scale)
        x[:, 0] += shift + y * class_sep
        order = rng.permutation(n)
        return x[order], y[order]

    src_x, src_y = sample(substream(seed, _STREAM_GAUSS, 0), 0.0, 1.0)
    tgt_x, tgt_y = sample(substream(seed, _STREAM_GAUSS, 1), mean_shift, cov_scale)
    meta = {
        "generator": "gaussian_shift",
        "n": int(n),
        "d": int(d),
        "mean_shift": float(mean_shift),
        "cov_scale": float(cov_scale),
        "class_sep": float(class_sep),
        "seed": int(seed),
    }
    return (
        DADataset(src_x, src_y, "source", meta),
        DADataset(tgt_x, tgt_y, "target", meta),
    )


def resample_label_shift(dataset: DADataset, target_label_marginal, seed: int) -> DADataset:
    """Resample rows with replacement so the class frequencies match the
    requested marginal to within 1/n.

    Counts are apportioned by largest remainder (ties broken toward lower
    class index), then each class's quota is drawn only from that class's
    existing rows, which preserves the feature-given-label conditional.
    """
    marginal = FiniteDistribution(target_label_marginal)
    if dataset._labels is None:
        raise ValueError("cannot resample an unlabeled dataset")
    y = dataset._labels
    n = dataset.n

    scaled = marginal.probs * n
    counts = np.floor(scaled).astype(np.int64)
    frac = scaled - counts
    order = np.argsort(-frac, kind="stable")
    counts[order[: n - counts.sum()]] += 1

    rng = substream(seed, _STREAM_RESAMPLE)
    picks = []
    for c in range(marginal.n):
        if counts[c] == 0:
            continue
        pool = np.nonzero(y == c)[0]
        if pool.size == 0:
            raise ValueError(
                f"class {c} requested with probability {marginal.probs[c]:g} "
                "but absent from the dataset"
            )
        picks.append(rng.choice(pool, size=counts[c], replace=True))
    idx = np.concatenate(picks)
    idx = idx[rng.permutation(idx.size)]

    meta = dict(dataset.metadata)
    meta["label_shift"] = {
        "marginal": [float(p) for p in marginal.probs],
        "seed": int(seed),
    }
    return DADataset(dataset.features[idx], y[idx], dataset.domain_tag, meta)


def js_label_distance(p, q) -> float:
    """Jensen-Shannon divergence between two label marginals, in nats:
    (1/2) KL(p || m) + (1/2) KL(q || m) with m the equal mixture."""
    p = p if isinstance(p, FiniteDistribution) else FiniteDistribution(p)
    q = q if isinstance(q, FiniteDistribution) else FiniteDistribution(q)
    if p.n != q.n:
        raise ValueError(f"support sizes differ: {p.n} vs {q.n}")
    return analytic_gamma_js(p.probs, q.probs, 1.0)


# --------------------------------------------------------------------------
# CSV round-tripping

def save_csv(dataset: DADataset, path) -> None:
    """Write ``x0,...,x{d-1},y,domain`` rows plus a JSON metadata sidecar.

    Floats are serialized with repr(), which round-trips binary64 exactly, so
    load(save(ds)) reproduces the feature matrix bit for bit.  Unlabeled
    datasets leave the y cell empty.
    """
    path = os.fspath(path)
    header = [f"x{j}" for j in range(dataset.d)] + ["y", "domain"]
    lines = [",".join(header)]
    labels = dataset._labels
    for i in range(dataset.n):
        cells = [repr(float(v)) for v in dataset.features[i]]
        cells.append("" if labels is None else str(int(labels[i])))
        cells.append(dataset.domain_tag)
        lines.append(",".join(cells))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    sidecar = {"domain_tag": dataset.domain_tag, "metadata": dataset.metadata}
    with open(path + ".meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_csv(path) -> DADataset:
    """Inverse of :func:`save_csv`.

    Any row with an empty y cell marks the whole dataset's labels as
    withheld (the file format cannot express partially-labeled sets).
    Malformed cells are reported with their line number and column.
    """
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    d = len(header) - 2
    if d < 1 or header != [f"x{j}" for j in range(d)] + ["y", "domain"]:
        raise ValueError(f"{path}: malformed header {header!r}")

    feats = np.empty((len(rows) - 1, d))
    ys = np.empty(len(rows) - 1, dtype=np.int64)
    any_unlabeled = False
    domains = []
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != d + 2:
            raise ValueError(f"{path}, line {lineno}: expected {d + 2} cells, got {len(row)}")
        for j in range(d):
            try:
                feats[i, j] = float(row[j])
            except ValueError:
                raise ValueError(
                    f"{path}, line {lineno}, column x{j}: non-numeric value {row[j]!r}"
                ) from None
        ycell = row[d].strip()
        if ycell == "":
            any_unlabeled = True
        else:
            try:
                ys[i] = int(ycell)
            except ValueError:
                raise ValueError(
                    f"{path}, line {lineno}, column y: non-integer label {ycell!r}"
                ) from None
        domains.append(row[d + 1].strip())

    if feats.shape[0] == 0:
        raise ValueError(f"{path}: no data rows")
    tags = sorted(set(domains))
    if len(tags) != 1:
        raise ValueError(f"{path}: mixed domain tags {tags}")

    metadata = {}
    if os.path.exists(path + ".meta.json"):
        with open(path + ".meta.json") as fh:
            metadata = json.load(fh).get("metadata", {})
    labels = None if any_unlabeled else ys
    return DADataset(feats, labels, tags[0], metadata)
