"""Class-restricted discrepancies, the training surrogate, and the estimator."""

import itertools
import math

import numpy as np
import pytest

from fdal.autodiff import Tape, Tensor
from fdal.discrepancy import (
    DiscriminatorNet,
    FiniteDAInstance,
    dH,
    dhH,
    dst_surrogate,
    variational_estimate,
)
from fdal.divergences import (
    DomainError,
    analytic_f_divergence,
    eval_conjugate,
    gamma_rescale,
    get_spec,
    phi_prime,
)
from fdal.seeding import substream

LOG2 = math.log(2.0)


def zero_one_loss(k, scale=1.0):
    return scale * (1.0 - np.eye(k))


def all_functions(k, m):
    return np.array(list(itertools.product(range(k), repeat=m)), dtype=np.int64)


def random_instance(rng, scale=1.0, k=2):
    """Small instance with the full function class, so sups are exact."""
    m = int(rng.integers(2, 7))
    hyp = all_functions(k, m)
    return FiniteDAInstance(
        ps=rng.dirichlet(np.ones(m)),
        pt=rng.dirichlet(np.ones(m)),
        fs=rng.integers(0, k, size=m),
        ft=rng.integers(0, k, size=m),
        hypotheses=hyp,
        loss_table=zero_one_loss(k, scale),
        loss_scale=scale,
    )


# Per-divergence loss scales that keep the 0-1 loss range inside dom phi*.
CHAIN_SPECS = [
    (get_spec("tv"), 0.5),
    (get_spec("pearson_chi2"), 1.0),
    (get_spec("kl"), 1.0),
]


class TestFiniteDAInstance:
    def test_triangle_violation_rejected(self):
        bad = np.array([[0.0, 3.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        with pytest.raises(ValueError, match="triangle"):
            FiniteDAInstance([0.5, 0.5], [0.5, 0.5], [0, 1], [0, 1],
                             [[0, 1]], bad, 3.0)

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(ValueError, match="diagonal"):
            FiniteDAInstance([1.0], [1.0], [0], [0], [[0]],
                             [[0.5, 1.0], [1.0, 0.0]], 1.0)

    def test_loss_above_scale_rejected(self):
        with pytest.raises(ValueError, match="loss_scale"):
            FiniteDAInstance([1.0], [1.0], [0], [0], [[0]],
                             zero_one_loss(2), 0.5)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[0, 2\)"):
            FiniteDAInstance([0.5, 0.5], [0.5, 0.5], [0, 2], [0, 1],
                             [[0, 1]], zero_one_loss(2), 1.0)

    def test_density_size_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            FiniteDAInstance([0.5, 0.5], [1.0], [0, 1], [0, 1],
                             [[0, 1]], zero_one_loss(2), 1.0)

    def test_risks(self):
        inst = FiniteDAInstance([0.25, 0.75], [0.5, 0.5], [0, 1], [1, 1],
                                all_functions(2, 2), zero_one_loss(2), 1.0)
        assert inst.source_risk([0, 1]) == 0.0
        assert inst.source_risk([1, 0]) == 1.0
        assert inst.target_risk([1, 1]) == 0.0
        assert inst.target_risk([1, 0]) == pytest.approx(0.5)


class TestDhH:
    def test_equal_distributions_tv_zero(self):
        rng = np.random.default_rng(3)
        p = rng.dirichlet(np.ones(4))
        inst = FiniteDAInstance(p, p, [0, 1, 0, 1], [1, 0, 1, 0],
                                all_functions(2, 4), zero_one_loss(2, 0.5), 0.5)
        for h in inst.hypotheses[:5]:
            assert dhH(inst, h, get_spec("tv")) == pytest.approx(0.0, abs=1e-15)

    def test_two_point_tv_value(self):
        """With every binary function available, the sup realizes every
        disagreement event, so the value is the scale times the largest
        event-probability gap: 0.5 * 0.25 here."""
        inst = FiniteDAInstance([0.5, 0.5], [0.25, 0.75], [0, 1], [0, 1],
                                all_functions(2, 2), zero_one_loss(2, 0.5), 0.5)
        for h in inst.hypotheses:
            assert dhH(inst, h, get_spec("tv")) == pytest.approx(0.125, abs=1e-15)

    def test_unit_loss_with_doubled_tv_matches_event_gap(self):
        """Same instance, unscaled 0-1 loss under the doubled TV conjugate
        (domain [-1,1]): the value is exactly max_D |Ps(D) - Pt(D)|."""
        inst = FiniteDAInstance([0.5, 0.5], [0.25, 0.75], [0, 1], [0, 1],
                                all_functions(2, 2), zero_one_loss(2), 1.0)
        spec2 = gamma_rescale(get_spec("tv"), 2.0)
        assert dH(inst, spec2) == pytest.approx(0.25, abs=1e-15)

    def test_signed_dominated_by_analytic(self):
        rng = np.random.default_rng(11)
        spec = get_spec("pearson_chi2")
        for _ in range(30):
            inst = random_instance(rng)
            an = analytic_f_divergence(inst.ps, inst.pt, spec)
            for h in inst.hypotheses[:: max(1, inst.n_hypotheses // 4)]:
                assert dhH(inst, h, spec, use_abs=False) <= an + 1e-9

    def test_non_member_rejected(self):
        inst = FiniteDAInstance([0.5, 0.5], [0.5, 0.5], [0, 1], [0, 1],
                                [[0, 0], [1, 1]], zero_one_loss(2, 0.5), 0.5)
        with pytest.raises(ValueError, match="member"):
            dhH(inst, [0, 1], get_spec("tv"))

    def test_loss_outside_domain_names_value(self):
        inst = FiniteDAInstance([0.5, 0.5], [0.5, 0.5], [0, 1], [0, 1],
                                all_functions(2, 2), zero_one_loss(2), 1.0)
        with pytest.raises(DomainError, match="1.0"):
            dhH(inst, [0, 0], get_spec("tv"))


class TestDH:
    def test_dominates_dhH(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            inst = random_instance(rng, scale=0.5)
            spec = get_spec("tv")
            top = dH(inst, spec)
            for h in inst.hypotheses:
                assert top >= dhH(inst, h, spec) - 1e-15

    def test_equal_distributions_zero(self):
        rng = np.random.default_rng(19)
        p = rng.dirichlet(np.ones(3))
        inst = FiniteDAInstance(p, p, [0, 0, 1], [1, 0, 1],
                                all_functions(2, 3), zero_one_loss(2, 0.5), 0.5)
        assert dH(inst, get_spec("tv")) == pytest.approx(0.0, abs=1e-15)

    def test_matches_explicit_double_loop(self):
        rng = np.random.default_rng(23)
        for spec, scale in CHAIN_SPECS:
            inst = random_instance(rng, scale=scale)
            best = 0.0
            for h in inst.hypotheses:
                for hp in inst.hypotheses:
                    v = inst.pair_loss(h, hp)
                    gap = abs(
                        float(v @ inst.ps.probs)
                        - float(np.asarray(eval_conjugate(spec, v)) @ inst.pt.probs)
                    )
                    best = max(best, gap)
            assert dH(inst, spec) == pytest.approx(best, abs=1e-12)


class TestLemmaChain:
    def test_chain_on_seeded_corpus(self):
        """|R_S(h,h') - R_T^{phi* o l}(h,h')| <= dhH(h) <= dH, exactly, for
        every pair, across 200 instances and three conjugates."""
        rng = np.random.default_rng(29)
        for i in range(200):
            spec, scale = CHAIN_SPECS[i % len(CHAIN_SPECS)]
            inst = random_instance(rng, scale=scale)
            top = dH(inst, spec)
            for h in inst.hypotheses:
                mid = dhH(inst, h, spec)
                assert mid <= top + 1e-12
                losses = inst.loss_table[h[None, :], inst.hypotheses]
                vals = np.abs(
                    losses @ inst.ps.probs
                    - np.asarray(eval_conjugate(spec, losses)) @ inst.pt.probs
                )
                assert vals.max() <= mid + 1e-12

    def test_signed_dH_below_analytic(self):
        rng = np.random.default_rng(31)
        for i in range(200):
            spec, scale = CHAIN_SPECS[i % len(CHAIN_SPECS)]
            inst = random_instance(rng, scale=scale)
            an = analytic_f_divergence(inst.ps, inst.pt, spec)
            assert dH(inst, spec, use_abs=False) <= an + 1e-9


class TestDstSurrogate:
    @staticmethod
    def const_head(values):
        values = np.asarray(values, dtype=np.float64)
        return lambda tape, x: Tensor(np.tile(values, (x.data.shape[0], 1)))

    def test_symmetric_collapse_js_shifted(self):
        """All-zero auxiliary logits give lhat = log sigma(0) = -log 2 on both
        domains; phi*(-log 2) = -log(1 - 1/2) = +log 2, so the value is
        -log2 - log2 = -2 log 2 (the spec point for this conjugate)."""
        zs, zt = Tensor(np.zeros((3, 2))), Tensor(np.zeros((7, 2)))
        head = self.const_head([0.0, 0.0])
        v = dst_surrogate(Tape(), zs, zt, head, head, get_spec("js_shifted"))
        assert float(v.data) == pytest.approx(-2 * LOG2, abs=1e-12)

    def test_symmetric_collapse_pearson(self):
        zs, zt = Tensor(np.zeros((4, 1))), Tensor(np.zeros((4, 1)))
        head = self.const_head([0.0, 0.0])
        v = dst_surrogate(Tape(), zs, zt, head, head, get_spec("pearson_chi2"))
        assert float(v.data) == 0.0

    @pytest.mark.parametrize("name", ["kl", "pearson_chi2", "js"])
    def test_forced_density_ratio_recovers_divergence(self, name):
        """Degenerate batches realizing ps=[1/2,1/2], pt=[1/4,3/4] on a 2-atom
        support, with the auxiliary head forced so lhat(z) = phi'(ps/pt):
        the surrogate equals the analytic divergence."""
        spec = get_spec(name)
        ps = np.array([0.5, 0.5])
        pt = np.array([0.25, 0.75])
        atoms = np.array([[0.0], [1.0]])
        zs = Tensor(atoms[np.array([0, 0, 1, 1])])
        zt = Tensor(atoms[np.array([0, 1, 1, 1])])
        targets = phi_prime(spec, ps / pt)

        def aux(tape, x):
            ratio_target = targets[(x.data[:, 0] > 0.5).astype(int)]
            if name == "js":
                # invert a(x) = log2 + log sigma(x)
                sig = np.exp(ratio_target - LOG2)
                pre = np.log(sig / (1.0 - sig))
            else:  # identity activation
                pre = ratio_target
            return Tensor(np.stack([pre, pre - 1.0], axis=1))

        task = self.const_head([1.0, 0.0])
        v = dst_surrogate(Tape(), zs, zt, task, aux, spec)
        an = analytic_f_divergence(ps, pt, spec)
        assert float(v.data) == pytest.approx(an, abs=1e-9)

    def test_permutation_invariance(self):
        rng = substream(5, 80)
        zs = rng.normal(size=(10, 3))
        zt = rng.normal(size=(12, 3))
        w = rng.normal(size=(3, 4))

        def head(tape, x):
            return Tensor(x.data @ w)

        spec = get_spec("js_shifted")
        base = dst_surrogate(Tape(), Tensor(zs), Tensor(zt), head, head, spec)
        per = dst_surrogate(
            Tape(),
            Tensor(zs[rng.permutation(10)]),
            Tensor(zt[rng.permutation(12)]),
            head,
            head,
            spec,
        )
        assert float(base.data) == pytest.approx(float(per.data), abs=1e-12)

    def test_split_batch_average(self):
        rng = substream(6, 81)
        zs = rng.normal(size=(8, 2))
        zt = rng.normal(size=(6, 2))
        w = rng.normal(size=(2, 3))

        def head(tape, x):
            return Tensor(x.data @ w)

        spec = get_spec("pearson_chi2")
        full = float(dst_surrogate(Tape(), Tensor(zs), Tensor(zt), head, head, spec).data)
        halves = [
            float(
                dst_surrogate(
                    Tape(), Tensor(zs[i::2]), Tensor(zt[i::2]), head, head, spec
                ).data
            )
            for i in range(2)
        ]
        assert full == pytest.approx(sum(halves) / 2.0, abs=1e-12)

    def test_no_gradient_through_selection(self):
        """The task head only picks indices, so its weights get no gradient
        from the surrogate; the auxiliary head's weights do."""
        rng = substream(7, 82)
        w_task = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        w_aux = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        zs = Tensor(rng.normal(size=(5, 2)))
        zt = Tensor(rng.normal(size=(5, 2)))
        tape = Tape()
        v = dst_surrogate(
            tape,
            zs,
            zt,
            lambda tp, x: tp.matmul(x, w_task),
            lambda tp, x: tp.matmul(x, w_aux),
            get_spec("js_shifted"),
        )
        tape.backward(v)
        assert w_task.grad is None or not np.any(w_task.grad)
        assert w_aux.grad is not None and np.any(w_aux.grad)

    def test_width_mismatch_rejected(self):
        zs = Tensor(np.zeros((2, 1)))
        with pytest.raises(ValueError, match="mismatch"):
            dst_surrogate(
                Tape(),
                zs,
                zs,
                self.const_head([0.0, 0.0, 0.0]),
                self.const_head([0.0, 0.0]),
                get_spec("kl"),
            )


class TestDiscriminatorNet:
    def test_output_inside_conjugate_domain(self):
        rng = substream(8, 83)
        for name in ("kl", "js", "tv", "sq_hellinger", "js_shifted"):
            spec = get_spec(name)
            net = DiscriminatorNet(3, spec, (16, 16), rng)
            out = net.forward(Tape(), Tensor(rng.normal(size=(50, 3)) * 10.0))
            assert np.all(spec.conjugate_domain.contains(out.data)), name


class TestVariationalEstimate:
    def test_identical_multisets_stay_near_zero(self):
        """t - e^(t-1) <= 0 pointwise, so with equal sample sets the KL
        objective can never go positive, whatever the optimizer does."""
        x = substream(9, 84).normal(size=(200, 1))
        est = variational_estimate(x, x, get_spec("kl"), steps=60, seed=0)
        assert est <= 0.02

    def test_small_gaussian_run_moves_toward_truth(self):
        rng = substream(10, 85)
        xs = rng.normal(size=2000)
        xt = rng.normal(size=2000) + 1.0
        est = variational_estimate(xs, xt, get_spec("kl"), steps=400, seed=1)
        assert 0.35 <= est <= 0.55

    def test_deterministic(self):
        rng = substream(11, 86)
        xs = rng.normal(size=(120, 2))
        xt = rng.normal(size=(120, 2)) + 0.3
        a = variational_estimate(xs, xt, get_spec("js_shifted"), steps=40, seed=4)
        b = variational_estimate(xs, xt, get_spec("js_shifted"), steps=40, seed=4)
        assert a == b

    def test_divergent_run_reports_step(self):
        rng = substream(12, 87)
        xs = rng.normal(size=100)
        xt = rng.normal(size=100) + 1.0
        with pytest.raises(FloatingPointError, match="step"):
            variational_estimate(xs, xt, get_spec("kl"), steps=50, lr=1e6, seed=5)

    def test_empty_samples_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            variational_estimate(np.empty((0, 1)), np.zeros((3, 1)), get_spec("kl"))

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dims differ"):
            variational_estimate(np.zeros((3, 1)), np.zeros((3, 2)), get_spec("kl"))
