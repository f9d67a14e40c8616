"""Catalog of f-divergences and their Fenchel conjugates.

Each entry bundles the generator φ, its conjugate φ*(t) = sup_x (xt − φ(x))
with an explicit validity interval, the derivative φ', and the terminal
activation a that maps raw network outputs into dom φ*.  Entries come in two
flavors: the classical normalized rows with φ(1) = 0, and "shifted" rows
(the DANN-form JS and the γ-weighted family) where φ(1) equals a declared
``shift_constant`` instead.

Two realizations of every formula are provided: vectorized numpy closed
forms for analysis, and tape-graph builders for training (both are tested
against each other and against central differences).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .autodiff import Tape, Tensor

__all__ = [
    "DomainError",
    "Interval",
    "FiniteDistribution",
    "DivergenceSpec",
    "catalog_names",
    "get_spec",
    "eval_phi",
    "eval_conjugate",
    "eval_activation",
    "phi_prime",
    "gamma_rescale",
    "analytic_f_divergence",
    "analytic_gamma_js",
    "table_rows",
]

LOG2 = math.log(2.0)
_CLAMP = 1e-12


class DomainError(ValueError):
    """A value fell outside the domain a formula is defined on."""


@dataclass(frozen=True)
class Interval:
    """A possibly unbounded interval with open/closed endpoints."""

    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def contains(self, t) -> np.ndarray:
        """Membership up to closure: rounding may land an activation output
        exactly on an open endpoint, and the conjugate clamps absorb that."""
        t = np.asarray(t, dtype=np.float64)
        return (t >= self.lo) & (t <= self.hi)

    def scaled(self, lam: float) -> "Interval":
        return Interval(self.lo * lam, self.hi * lam, self.lo_closed, self.hi_closed)

    def grid(self, n: int = 201, window: float = 20.0, inset: float = 1e-6) -> np.ndarray:
        """Finite test grid inside the interval (open ends pulled in by ``inset``)."""
        lo = self.lo if np.isfinite(self.lo) else -window
        hi = self.hi if np.isfinite(self.hi) else window
        if not self.lo_closed and np.isfinite(self.lo):
            lo = self.lo + inset
        if not self.hi_closed and np.isfinite(self.hi):
            hi = self.hi - inset
        return np.linspace(lo, hi, n)

    @property
    def text(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        lo = "-inf" if not np.isfinite(self.lo) else _fmt(self.lo)
        hi = "inf" if not np.isfinite(self.hi) else _fmt(self.hi)
        return f"{left}{lo}, {hi}{right}"


def _fmt(v: float) -> str:
    if v == math.floor(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:g}"


@dataclass(frozen=True)
class FiniteDistribution:
    """Probability vector on a finite support."""

    probs: np.ndarray

    def __init__(self, probs):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probability vector must be 1-D and nonempty")
        if np.any(p < 0):
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.size


def _as_probs(p) -> np.ndarray:
    if isinstance(p, FiniteDistribution):
        return p.probs
    return FiniteDistribution(p).probs


@dataclass(frozen=True)
class DivergenceSpec:
    """One catalog row: closed forms plus tape-graph builders."""

    name: str
    gamma: Optional[float]
    shift_constant: float
    conjugate_domain: Interval
    phi_fn: Callable[[np.ndarray], np.ndarray]
    phi_at_zero: Optional[float]
    phi_prime_fn: Callable[[np.ndarray], np.ndarray]
    phi_prime_at_one: float
    phi_prime_at_one_interval: Optional[tuple]
    kink: Optional[float]
    conjugate_fn: Callable[[np.ndarray], np.ndarray]
    activation_fn: Callable[[np.ndarray], np.ndarray]
    tape_activation: Callable[[Tape, Tensor], Tensor]
    tape_conjugate: Callable[[Tape, Tensor], Tensor]
    texts: dict = field(default_factory=dict, repr=False)


# --------------------------------------------------------------------- #
# numpy closed forms shared by several rows                             #
# --------------------------------------------------------------------- #


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))


# --------------------------------------------------------------------- #
# tape builders                                                         #
# --------------------------------------------------------------------- #


def _t_identity(tape: Tape, x: Tensor) -> Tensor:
    return x


def _t_neg_exp(tape: Tape, x: Tensor) -> Tensor:
    return tape.neg(tape.exp(x))


def _t_log_sigmoid(tape: Tape, x: Tensor) -> Tensor:
    return tape.log_sigmoid(x)


def _t_log2_plus_log_sigmoid(tape: Tape, x: Tensor) -> Tensor:
    return tape.add(tape.log_sigmoid(x), Tensor(LOG2))


def _t_half_tanh(tape: Tape, x: Tensor) -> Tensor:
    return tape.scale(tape.tanh(x), 0.5)


def _t_one_minus_exp(tape: Tape, x: Tensor) -> Tensor:
    return tape.sub(Tensor(1.0), tape.exp(x))


def _t_conj_kl(tape: Tape, t: Tensor) -> Tensor:
    return tape.exp(tape.add(t, Tensor(-1.0)))


def _t_conj_kl_rev(tape: Tape, t: Tensor) -> Tensor:
    return tape.sub(Tensor(-1.0), tape.log(tape.neg(t)))


def _t_conj_js(tape: Tape, t: Tensor) -> Tensor:
    inner = tape.clamp_min(tape.sub(Tensor(2.0), tape.exp(t)), _CLAMP)
    return tape.neg(tape.log(inner))


def _t_conj_js_shifted(tape: Tape, t: Tensor) -> Tensor:
    inner = tape.clamp_min(tape.sub(Tensor(1.0), tape.exp(t)), _CLAMP)
    return tape.neg(tape.log(inner))


def _t_conj_pearson(tape: Tape, t: Tensor) -> Tensor:
    return tape.add(tape.scale(tape.mul(t, t), 0.25), t)


def _t_conj_sq_hellinger(tape: Tape, t: Tensor) -> Tensor:
    denom = tape.clamp_min(tape.sub(Tensor(1.0), t), _CLAMP)
    return tape.mul(t, tape.reciprocal(denom))


def _t_conj_neyman(tape: Tape, t: Tensor) -> Tensor:
    inner = tape.clamp_min(tape.sub(Tensor(1.0), t), _CLAMP)
    return tape.sub(Tensor(2.0), tape.scale(tape.sqrt(inner), 2.0))


# --------------------------------------------------------------------- #
# spec factories                                                        #
# --------------------------------------------------------------------- #


def _spec_kl() -> DivergenceSpec:
    return DivergenceSpec(
        name="kl",
        gamma=None,
        shift_constant=0.0,
        conjugate_domain=Interval(-np.inf, np.inf, False, False),
        phi_fn=lambda x: x * np.log(x),
        phi_at_zero=0.0,
        phi_prime_fn=lambda x: 1.0 + np.log(x),
        phi_prime_at_one=1.0,
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=lambda t: np.exp(t - 1.0),
        activation_fn=lambda x: np.asarray(x, dtype=np.float64),
        tape_activation=_t_identity,
        tape_conjugate=_t_conj_kl,
        texts={
            "phi": "x log x",
            "conjugate": "exp(t-1)",
            "phi_prime_at_one": "1",
            "activation": "x",
        },
    )


def _spec_kl_rev() -> DivergenceSpec:
    return DivergenceSpec(
        name="kl_rev",
        gamma=None,
        shift_constant=0.0,
        conjugate_domain=Interval(-np.inf, 0.0, False, False),
        phi_fn=lambda x: -np.log(x),
        phi_at_zero=None,
        phi_prime_fn=lambda x: -1.0 / x,
        phi_prime_at_one=-1.0,
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=lambda t: -1.0 - np.log(np.maximum(-t, _CLAMP)),
        activation_fn=lambda x: -np.exp(x),
        tape_activation=_t_neg_exp,
        tape_conjugate=_t_conj_kl_rev,
        texts={
            "phi": "-log x",
            "conjugate": "-1 - log(-t)",
            "phi_prime_at_one": "-1",
            "activation": "-exp(x)",
        },
    )


def _spec_js() -> DivergenceSpec:
    return DivergenceSpec(
        name="js",
        gamma=None,
        shift_constant=0.0,
        conjugate_domain=Interval(-np.inf, LOG2, False, False),
        phi_fn=lambda x: x * np.log(x) - (1.0 + x) * np.log((1.0 + x) / 2.0),
        phi_at_zero=LOG2,
        phi_prime_fn=lambda x: np.log(2.0 * x / (1.0 + x)),
        phi_prime_at_one=0.0,
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=lambda t: -np.log(np.maximum(2.0 - np.exp(t), _CLAMP)),
        activation_fn=lambda x: LOG2 + _log_sigmoid(x),
        tape_activation=_t_log2_plus_log_sigmoid,
        tape_conjugate=_t_conj_js,
        texts={
            "phi": "x log x - (1+x) log((1+x)/2)",
            "conjugate": "-log(2 - exp(t))",
            "phi_prime_at_one": "0",
            "activation": "log(2 sigma(x))",
        },
    )


def _spec_js_shifted() -> DivergenceSpec:
    return DivergenceSpec(
        name="js_shifted",
        gamma=None,
        shift_constant=-2.0 * LOG2,
        conjugate_domain=Interval(-np.inf, 0.0, False, False),
        phi_fn=lambda x: x * np.log(x) - (1.0 + x) * np.log1p(x),
        phi_at_zero=0.0,
        phi_prime_fn=lambda x: np.log(x / (1.0 + x)),
        phi_prime_at_one=-LOG2,
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=lambda t: -np.log(np.maximum(-np.expm1(t), _CLAMP)),
        activation_fn=_log_sigmoid,
        tape_activation=_t_log_sigmoid,
        tape_conjugate=_t_conj_js_shifted,
        texts={
            "phi": "x log x - (1+x) log(1+x)",
            "conjugate": "-log(1 - exp(t))",
            "phi_prime_at_one": "-log 2",
            "activation": "log sigma(x)",
        },
    )


def _spec_pearson() -> DivergenceSpec:
    return DivergenceSpec(
        name="pearson_chi2",
        gamma=None,
        shift_constant=0.0,
        conjugate_domain=Interval(-np.inf, np.inf, False, False),
        phi_fn=lambda x: (x - 1.0) ** 2,
        phi_at_zero=1.0,
        phi_prime_fn=lambda x: 2.0 * (x - 1.0),
        phi_prime_at_one=0.0,
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=lambda t: t * t / 4.0 + t,
        activation_fn=lambda x: np.asarray(x, dtype=np.float64),
        tape_activation=_t_identity,
        tape_conjugate=_t_conj_pearson,
        texts={
            "phi": "(x-1)^2",
            "conjugate": "t^2/4 + t",
            "phi_prime_at_one": "0",
            "activation": "x",
        },
    )


def _spec_tv() -> DivergenceSpec:
    return DivergenceSpec(
        name="tv",
        gamma=None,
        shift_constant=0.0,
        conjugate_domain=Interval(-0.5, 0.5, True, True),
        phi_fn=lambda x: 0.5 * np.abs(x - 1.0),
        phi_at_zero=0.5,
        phi_prime_fn=lambda x: 0.5 * np.sign(x - 1.0),
        phi_prime_at_one=0.0,
        phi_prime_at_one_interval=(-0.5, 0.5),
        kink=1.0,
        conjugate_fn=lambda t: np.asarray(t, dtype=np.float64),
        activation_fn=lambda x: 0.5 * np.tanh(x),
        tape_activation=_t_half_tanh,
        tape_conjugate=_t_identity,
        texts={
            "phi": "|x-1|/2",
            "conjugate": "t",
            "phi_prime_at_one": "[-1/2, 1/2]",
            "activation": "tanh(x)/2",
        },
    )


def _spec_sq_hellinger() -> DivergenceSpec:
    return DivergenceSpec(
        name="sq_hellinger",
        gamma=None,
        shift_constant=0.0,
        conjugate_domain=Interval(-np.inf, 1.0, False, False),
        phi_fn=lambda x: (np.sqrt(x) - 1.0) ** 2,
        phi_at_zero=1.0,
        phi_prime_fn=lambda x: 1.0 - 1.0 / np.sqrt(x),
        phi_prime_at_one=0.0,
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=lambda t: t / np.maximum(1.0 - t, _CLAMP),
        activation_fn=lambda x: -np.expm1(np.asarray(x, dtype=np.float64)),
        tape_activation=_t_one_minus_exp,
        tape_conjugate=_t_conj_sq_hellinger,
        texts={
            "phi": "(sqrt(x)-1)^2",
            "conjugate": "t/(1-t)",
            "phi_prime_at_one": "0",
            "activation": "1 - exp(x)",
        },
    )


def _spec_neyman() -> DivergenceSpec:
    return DivergenceSpec(
        name="neyman_chi2",
        gamma=None,
        shift_constant=0.0,
        conjugate_domain=Interval(-np.inf, 1.0, False, True),
        phi_fn=lambda x: (1.0 - x) ** 2 / x,
        phi_at_zero=None,
        phi_prime_fn=lambda x: 1.0 - 1.0 / (x * x),
        phi_prime_at_one=0.0,
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=lambda t: 2.0 - 2.0 * np.sqrt(np.maximum(1.0 - t, 0.0)),
        activation_fn=lambda x: -np.expm1(np.asarray(x, dtype=np.float64)),
        tape_activation=_t_one_minus_exp,
        tape_conjugate=_t_conj_neyman,
        texts={
            "phi": "(1-x)^2/x",
            "conjugate": "2 - 2 sqrt(1-t)",
            "phi_prime_at_one": "0",
            "activation": "1 - exp(x)",
        },
    )


def _spec_gamma_js(g: float) -> DivergenceSpec:
    inv_g = 1.0 / g

    def conj(t):
        return -np.log(np.maximum(-np.expm1(t), _CLAMP)) * inv_g

    def tape_conj(tape: Tape, t: Tensor) -> Tensor:
        return tape.scale(_t_conj_js_shifted(tape, t), inv_g)

    return DivergenceSpec(
        name="gamma_js",
        gamma=g,
        shift_constant=math.log(g / (1.0 + g)) - inv_g * math.log1p(g),
        conjugate_domain=Interval(-np.inf, 0.0, False, False),
        phi_fn=lambda x: x * np.log(g * x / (1.0 + g * x)) - inv_g * np.log1p(g * x),
        phi_at_zero=0.0,
        phi_prime_fn=lambda x: np.log(g * x / (1.0 + g * x)),
        phi_prime_at_one=math.log(g / (1.0 + g)),
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=conj,
        activation_fn=_log_sigmoid,
        tape_activation=_t_log_sigmoid,
        tape_conjugate=tape_conj,
        texts={
            "phi": "x log(gx/(1+gx)) + (1/g) log(1/(1+gx))",
            "conjugate": "-log(1 - exp(t))/g",
            "phi_prime_at_one": "log(g/(1+g))",
            "activation": "log sigma(x)",
        },
    )


def _spec_gamma_pearson(g: float) -> DivergenceSpec:
    inv_g = 1.0 / g

    def tape_conj(tape: Tape, t: Tensor) -> Tensor:
        return tape.scale(_t_conj_pearson(tape, t), inv_g)

    return DivergenceSpec(
        name="gamma_pearson",
        gamma=g,
        shift_constant=(g - 1.0) ** 2 / g,
        conjugate_domain=Interval(-np.inf, np.inf, False, False),
        phi_fn=lambda x: (g * x - 1.0) ** 2 * inv_g,
        phi_at_zero=inv_g,
        phi_prime_fn=lambda x: 2.0 * (g * x - 1.0),
        phi_prime_at_one=2.0 * (g - 1.0),
        phi_prime_at_one_interval=None,
        kink=None,
        conjugate_fn=lambda t: (t * t / 4.0 + t) * inv_g,
        activation_fn=lambda x: np.asarray(x, dtype=np.float64),
        tape_activation=_t_identity,
        tape_conjugate=tape_conj,
        texts={
            "phi": "(gx-1)^2/g",
            "conjugate": "(t^2/4 + t)/g",
            "phi_prime_at_one": "2(g-1)",
            "activation": "x",
        },
    )


def _spec_gamma_tv(g: float) -> DivergenceSpec:
    inv_g = 1.0 / g
    at_one = 0.0 if g == 1.0 else 0.5 * math.copysign(1.0, g - 1.0)

    def tape_conj(tape: Tape, t: Tensor) -> Tensor:
        return tape.scale(t, inv_g)

    return DivergenceSpec(
        name="gamma_tv",
        gamma=g,
        shift_constant=abs(g - 1.0) / (2.0 * g),
        conjugate_domain=Interval(-0.5, 0.5, True, True),
        phi_fn=lambda x: np.abs(g * x - 1.0) / (2.0 * g),
        phi_at_zero=1.0 / (2.0 * g),
        phi_prime_fn=lambda x: 0.5 * np.sign(g * x - 1.0),
        phi_prime_at_one=at_one,
        phi_prime_at_one_interval=(-0.5, 0.5) if g == 1.0 else None,
        kink=inv_g,
        conjugate_fn=lambda t: np.asarray(t, dtype=np.float64) * inv_g,
        activation_fn=lambda x: 0.5 * np.tanh(x),
        tape_activation=_t_half_tanh,
        tape_conjugate=tape_conj,
        texts={
            "phi": "|gx-1|/(2g)",
            "conjugate": "t/g",
            "phi_prime_at_one": "sign(g-1)/2" if g != 1.0 else "[-1/2, 1/2]",
            "activation": "tanh(x)/2",
        },
    )


_PLAIN = {
    "kl": _spec_kl,
    "kl_rev": _spec_kl_rev,
    "js": _spec_js,
    "js_shifted": _spec_js_shifted,
    "pearson_chi2": _spec_pearson,
    "tv": _spec_tv,
    "sq_hellinger": _spec_sq_hellinger,
    "neyman_chi2": _spec_neyman,
}

_GAMMA = {
    "gamma_js": _spec_gamma_js,
    "mdd": _spec_gamma_js,
    "gamma_pearson": _spec_gamma_pearson,
    "gamma_tv": _spec_gamma_tv,
}


def catalog_names() -> list:
    """Canonical catalog order (``mdd`` is an accepted alias of gamma_js)."""
    return list(_PLAIN) + ["gamma_js", "gamma_pearson", "gamma_tv"]


def get_spec(name: str, gamma: Optional[float] = None) -> DivergenceSpec:
    """Look up a catalog row; γ-family rows take an optional gamma (default 1)."""
    if name in _PLAIN:
        if gamma is not None:
            raise ValueError(f"spec {name!r} is not gamma-parameterized")
        return _PLAIN[name]()
    if name in _GAMMA:
        g = 1.0 if gamma is None else float(gamma)
        if not (g > 0):
            raise ValueError(f"gamma must be positive, got {gamma!r}")
        return _GAMMA[name](g)
    known = ", ".join(catalog_names())
    raise KeyError(f"unknown divergence {name!r}; known: {known}")


# --------------------------------------------------------------------- #
# evaluation                                                            #
# --------------------------------------------------------------------- #


def eval_phi(spec: DivergenceSpec, x):
    """φ(x) for x ≥ 0 (x = 0 only where φ extends continuously)."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.shape == ()
    flat = np.atleast_1d(arr)
    if np.any(flat < 0):
        raise DomainError(f"phi of {spec.name} needs x >= 0")
    zero = flat == 0
    out = np.empty_like(flat)
    if np.any(zero):
        if spec.phi_at_zero is None:
            raise DomainError(f"phi of {spec.name} diverges at x = 0")
        out[zero] = spec.phi_at_zero
    if np.any(~zero):
        out[~zero] = spec.phi_fn(flat[~zero])
    out = out.reshape(arr.shape)
    return float(out) if scalar else out


def eval_conjugate(spec: DivergenceSpec, t):
    """φ*(t); raises DomainError outside the conjugate domain (never NaN)."""
    t = np.asarray(t, dtype=np.float64)
    ok = spec.conjugate_domain.contains(t)
    if not np.all(ok):
        bad = float(np.asarray(t)[~ok].flat[0]) if t.shape else float(t)
        raise DomainError(
            f"t = {bad!r} outside conjugate domain {spec.conjugate_domain.text} of {spec.name}"
        )
    out = spec.conjugate_fn(t)
    return out if np.asarray(out).shape else float(out)


def eval_activation(spec: DivergenceSpec, x):
    """Terminal activation a(x); always lands inside the conjugate domain."""
    out = spec.activation_fn(np.asarray(x, dtype=np.float64))
    return out if np.asarray(out).shape else float(out)


def phi_prime(spec: DivergenceSpec, x):
    """Closed-form φ'(x); kinks use the declared interval midpoint at x = 1."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise DomainError(f"phi_prime of {spec.name} needs x > 0")
    if spec.kink is not None and np.any(x == spec.kink):
        if spec.phi_prime_at_one_interval is None or spec.kink != 1.0:
            raise DomainError(f"phi of {spec.name} is not differentiable at x = {spec.kink}")
        out = np.asarray(spec.phi_prime_fn(x), dtype=np.float64)
        lo, hi = spec.phi_prime_at_one_interval
        out = np.where(x == spec.kink, (lo + hi) / 2.0, out)
        return out if out.shape else float(out)
    out = spec.phi_prime_fn(x)
    return out if np.asarray(out).shape else float(out)


def gamma_rescale(spec: DivergenceSpec, lam: float) -> DivergenceSpec:
    """Conjugate-preserving rescale: (λφ)*(t) = λ·φ*(t/λ) on λ·dom."""
    lam = float(lam)
    if not (lam > 0):
        raise ValueError(f"lambda must be positive, got {lam!r}")
    base_phi, base_phi_prime = spec.phi_fn, spec.phi_prime_fn
    base_conj, base_act = spec.conjugate_fn, spec.activation_fn
    base_tape_act, base_tape_conj = spec.tape_activation, spec.tape_conjugate

    def tape_act(tape: Tape, x: Tensor) -> Tensor:
        return tape.scale(base_tape_act(tape, x), lam)

    def tape_conj(tape: Tape, t: Tensor) -> Tensor:
        return tape.scale(base_tape_conj(tape, tape.scale(t, 1.0 / lam)), lam)

    interval = spec.phi_prime_at_one_interval
    return replace(
        spec,
        name=f"rescaled({spec.name},{_fmt(lam)})",
        shift_constant=lam * spec.shift_constant,
        conjugate_domain=spec.conjugate_domain.scaled(lam),
        phi_fn=lambda x: lam * base_phi(x),
        phi_at_zero=None if spec.phi_at_zero is None else lam * spec.phi_at_zero,
        phi_prime_fn=lambda x: lam * base_phi_prime(x),
        phi_prime_at_one=lam * spec.phi_prime_at_one,
        phi_prime_at_one_interval=None if interval is None else (lam * interval[0], lam * interval[1]),
        conjugate_fn=lambda t: lam * base_conj(np.asarray(t, dtype=np.float64) / lam),
        activation_fn=lambda x: lam * base_act(x),
        tape_activation=tape_act,
        tape_conjugate=tape_conj,
        texts=dict(spec.texts, scaled_by=_fmt(lam)),
    )


def analytic_f_divergence(ps, pt, spec: DivergenceSpec) -> float:
    """Exact D_φ(ps‖pt) = Σ_x pt(x)·φ(ps(x)/pt(x)) on finite supports."""
    ps, pt = _as_probs(ps), _as_probs(pt)
    if ps.size != pt.size:
        raise ValueError("supports differ in size")
    total = 0.0
    for i in range(ps.size):
        if pt[i] == 0.0:
            if ps[i] != 0.0:
                raise DomainError(
                    f"absolute continuity violated at atom {i}: ps={ps[i]!r}, pt=0"
                )
            continue
        total += pt[i] * float(eval_phi(spec, ps[i] / pt[i]))
    return total


def _kl_terms(p: np.ndarray, m: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / m[mask])))


def analytic_gamma_js(ps, pt, gamma: float) -> float:
    """γ-weighted JS: (γ/(γ+1))·KL(ps‖m) + (1/(γ+1))·KL(pt‖m), m the γ-mixture."""
    g = float(gamma)
    if not (g > 0):
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    ps, pt = _as_probs(ps), _as_probs(pt)
    if ps.size != pt.size:
        raise ValueError("supports differ in size")
    m = (g * ps + pt) / (g + 1.0)
    return (g / (g + 1.0)) * _kl_terms(ps, m) + (1.0 / (g + 1.0)) * _kl_terms(pt, m)


def table_rows(gamma: float = 1.0) -> list:
    """Catalog rows for display: dicts keyed name/gamma/phi/conjugate/domain/phi_prime/activation."""
    rows = []
    for name in catalog_names():
        spec = get_spec(name) if name in _PLAIN else get_spec(name, gamma)
        rows.append(
            {
                "name": name,
                "gamma": "" if spec.gamma is None else _fmt(spec.gamma),
                "phi": spec.texts["phi"],
                "conjugate": spec.texts["conjugate"],
                "domain": spec.conjugate_domain.text,
                "phi_prime_at_one": spec.texts["phi_prime_at_one"],
                "activation": spec.texts["activation"],
            }
        )
    return rows
