"""Tests for the base, feature-distillation and preference-consistency losses."""

import numpy as np
import pytest

from pckd.core.gradcheck import assert_gradient_close
from pckd.core.rng import StreamFactory
from pckd.modules.backbones import init_model
from pckd.modules.data import BprBatch
from pckd.modules.distill import (
    DistillationObjective,
    KdMethod,
    LossValue,
    PckdConfig,
    PckdMethod,
    bpr_loss,
    combine,
    de_loss,
    fd_loss,
    pckd_h_loss,
    pckd_l_loss,
    pckd_p_loss,
    rebuild_rank_table,
    total_loss,
)
from pckd.modules.projectors import init_bank, init_mlp, project, wrap_single
from pckd.shared.exceptions import ConfigurationError, DomainError
from pckd.shared.schemas import BackboneKind, Mode

DRAWS = 20


def with_parameter(bank, key, loss_fn):
    """``loss_fn`` as a function of the bank parameter named ``key``."""

    def loss(value):
        params = bank.parameters()
        bank.load_parameters({**params, key: value})
        try:
            return loss_fn()
        finally:
            bank.load_parameters(params)

    return loss



def preference_instance(rng, rows=4, n_items=6, student_dim=3, teacher_dim=5):
    """Student and projected tables plus pair and list indices without clashes."""
    first = rng.integers(0, n_items, size=rows)
    second = (first + rng.integers(1, n_items, size=rows)) % n_items
    lists = np.stack([rng.permutation(n_items)[:4] for _ in range(rows)])
    return {
        "student_user": rng.normal(size=(rows, student_dim)),
        "student_items": rng.normal(size=(n_items, student_dim)),
        "projected_user": rng.normal(size=(rows, teacher_dim)),
        "projected_items": rng.normal(size=(n_items, teacher_dim)),
        "first": first,
        "second": second,
        "lists": lists,
    }


class TestBprLoss:
    """Test suite for the BPR base loss."""

    def test_zero_gap_is_ln2(self):
        """Test that equal positive and negative scores give ln 2."""
        user = np.array([[1.0, 0.0], [0.0, 2.0]])
        loss = bpr_loss(user, np.zeros((2, 2)), np.zeros((2, 2)))
        assert loss.value == pytest.approx(np.log(2.0), abs=1e-6)

    def test_unit_gap(self):
        """Test that a score gap of one gives softplus(-1)."""
        loss = bpr_loss(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]), np.zeros((1, 2)))
        assert loss.value == pytest.approx(0.313262, abs=1e-6)

    def test_gradients_match_finite_differences(self, rng):
        """Test user, positive and negative gradients over random instances."""
        for _ in range(DRAWS):
            user, pos, neg = (rng.normal(size=(5, 4)) for _ in range(3))
            grads = bpr_loss(user, pos, neg).grads
            assert_gradient_close(lambda p: bpr_loss(p, pos, neg).value, grads["user"], user)
            assert_gradient_close(lambda p: bpr_loss(user, p, neg).value, grads["pos"], pos)
            assert_gradient_close(lambda p: bpr_loss(user, pos, p).value, grads["neg"], neg)

    def test_empty_batch(self):
        """Test that an empty batch is a domain error."""
        with pytest.raises(DomainError):
            bpr_loss(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 2)))


class TestFdLoss:
    """Test suite for the feature-distillation distance."""

    def test_norm_reading(self):
        """Test that a 3-4-5 residual gives 5 as an unsquared norm."""
        loss = fd_loss(np.zeros((1, 2)), np.array([[3.0, 4.0]]), np.zeros((1, 2)), np.zeros((1, 2)), squared=False)
        assert loss.value == pytest.approx(5.0)

    def test_squared_reading(self):
        """Test that the same residual gives 25 when squared."""
        loss = fd_loss(np.zeros((1, 2)), np.array([[3.0, 4.0]]), np.zeros((1, 2)), np.zeros((1, 2)))
        assert loss.value == pytest.approx(25.0)

    def test_zero_residual_has_zero_gradient(self):
        """Test that the unsquared norm has a zero gradient at a perfect match."""
        same = np.ones((2, 3))
        loss = fd_loss(same, same, same, same, squared=False)
        assert loss.value == 0.0
        assert not np.any(loss.grads["user"])

    @pytest.mark.parametrize("squared", [True, False])
    def test_gradients_match_finite_differences(self, rng, squared):
        """Test the projected-feature gradients of both readings."""
        for _ in range(DRAWS):
            pu, tu, pi, ti = (rng.normal(size=(3, 4)) for _ in range(4))
            grads = fd_loss(pu, tu, pi, ti, squared).grads
            assert_gradient_close(lambda p: fd_loss(p, tu, pi, ti, squared).value, grads["user"], pu)
            assert_gradient_close(lambda p: fd_loss(pu, tu, p, ti, squared).value, grads["item"], pi)

    def test_shape_mismatch(self):
        """Test that mismatched projected and teacher rows are rejected."""
        with pytest.raises(ConfigurationError):
            fd_loss(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 3)), np.zeros((2, 3)))


class TestDeLoss:
    """Test suite for distillation through the expert banks."""

    def banks(self, seed, n_experts=3):
        factory = StreamFactory(seed)
        user_bank = init_bank(3, 4, n_experts, factory.stream("init", 2), dtype="float64")
        item_bank = init_bank(3, 4, n_experts, factory.stream("init", 3), dtype="float64")
        return user_bank, item_bank

    def test_gradients_match_finite_differences(self, rng):
        """Test student and selection gradients with frozen Gumbel noise."""
        for draw in range(DRAWS):
            user_bank, item_bank = self.banks(draw)
            su, si = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
            tu, ti = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
            noise_u, noise_i = rng.gumbel(size=(3, 3)), rng.gumbel(size=(3, 3))

            def run(student_u=su, student_i=si):
                return de_loss(
                    student_u, tu, student_i, ti, user_bank, item_bank, 2, Mode.TRAIN,
                    user_noise=noise_u, item_noise=noise_i,
                )

            grads = run().grads
            assert_gradient_close(lambda p: run(student_u=p).value, grads["user"], su)
            assert_gradient_close(lambda p: run(student_i=p).value, grads["item"], si)

            original = user_bank.selection_bias

            def with_bias(value):
                user_bank.selection_bias = value
                try:
                    return run().value
                finally:
                    user_bank.selection_bias = original

            assert_gradient_close(with_bias, grads["user_bank.select.b"], original)

    def test_expert_gradients_match_finite_differences(self, rng):
        """Test every expert weight and bias of both banks with frozen Gumbel noise."""
        for draw in range(DRAWS):
            user_bank, item_bank = self.banks(draw, n_experts=2)
            su, si = rng.normal(size=(3, 3)), rng.normal(size=(4, 3))
            tu, ti = rng.normal(size=(3, 4)), rng.normal(size=(4, 4))
            noise_u, noise_i = rng.gumbel(size=(3, 2)), rng.gumbel(size=(4, 2))

            def run():
                return de_loss(
                    su, tu, si, ti, user_bank, item_bank, 5, Mode.TRAIN, user_noise=noise_u, item_noise=noise_i
                ).value

            grads = de_loss(
                su, tu, si, ti, user_bank, item_bank, 5, Mode.TRAIN, user_noise=noise_u, item_noise=noise_i
            ).grads
            for prefix, bank in (("user_bank.", user_bank), ("item_bank.", item_bank)):
                for key, value in bank.parameters().items():
                    if key.startswith("expert"):
                        assert_gradient_close(with_parameter(bank, key, run), grads[prefix + key], value)

    def test_single_expert_equals_fd(self, rng):
        """Test that K=1 distillation is plain feature distillation through that expert."""
        factory = StreamFactory(4)
        user_expert = init_mlp(3, 4, factory.stream("init", 2), dtype="float64")
        item_expert = init_mlp(3, 4, factory.stream("init", 3), dtype="float64")
        su, si = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        tu, ti = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))

        through_bank = de_loss(
            su, tu, si, ti, wrap_single(user_expert, 4), wrap_single(item_expert, 4), 0, Mode.TRAIN,
            user_rng=factory.stream("selection"), item_rng=factory.stream("selection", 1),
        )
        direct = fd_loss(project(user_expert, su), tu, project(item_expert, si), ti)
        assert through_bank.value == pytest.approx(direct.value, rel=1e-12)

    def test_eval_mode_needs_no_randomness(self, rng):
        """Test that eval-mode distillation runs without noise or streams."""
        user_bank, item_bank = self.banks(1)
        loss = de_loss(
            rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(2, 3)), rng.normal(size=(2, 4)),
            user_bank, item_bank, 0, Mode.EVAL,
        )
        assert np.isfinite(loss.value)


class TestPckdPairwise:
    """Test suite for the pair-wise consistency loss."""

    def test_zero_projected_gap_is_ln2(self, rng):
        """Test that equal projected scores give ln 2 whatever the student prefers."""
        loss = pckd_p_loss(
            rng.normal(size=(2, 3)), rng.normal(size=(4, 3)), np.zeros((2, 5)), rng.normal(size=(4, 5)),
            np.array([0, 2]), np.array([1, 3]),
        )
        assert loss.value == pytest.approx(np.log(2.0), abs=1e-6)

    def test_inconsistent_pair(self):
        """Test that a reversed projected gap of one gives softplus(1)."""
        student_user = np.array([[1.0, 0.0]])
        student_items = np.array([[1.0, 0.0], [0.0, 0.0]])
        projected_user = np.array([[1.0, 0.0]])
        projected_items = np.array([[0.0, 0.0], [1.0, 0.0]])
        loss = pckd_p_loss(student_user, student_items, projected_user, projected_items, np.array([0]), np.array([1]))
        assert loss.value == pytest.approx(1.313262, abs=1e-6)

    def test_tied_student_scores_count_as_preferred(self):
        """Test that a zero student gap takes the positive sign."""
        tied = np.zeros((2, 2))
        projected_items = np.array([[0.0, 0.0], [1.0, 0.0]])
        loss = pckd_p_loss(np.ones((1, 2)), tied, np.array([[1.0, 0.0]]), projected_items, np.array([0]), np.array([1]))
        assert loss.value == pytest.approx(1.313262, abs=1e-6)

    def test_gradients_match_finite_differences(self, rng):
        """Test projected user and item gradients over random instances."""
        for _ in range(DRAWS):
            case = preference_instance(rng)
            args = (case["first"], case["second"])
            grads = pckd_p_loss(case["student_user"], case["student_items"], case["projected_user"],
                                case["projected_items"], *args).grads

            def on_user(p):
                return pckd_p_loss(case["student_user"], case["student_items"], p, case["projected_items"], *args).value

            def on_items(p):
                return pckd_p_loss(case["student_user"], case["student_items"], case["projected_user"], p, *args).value

            assert_gradient_close(on_user, grads["projected_user"], case["projected_user"])
            assert_gradient_close(on_items, grads["projected_items"], case["projected_items"])

    def test_identical_items(self, rng):
        """Test that a pair with i == j is a domain error."""
        with pytest.raises(DomainError):
            pckd_p_loss(np.zeros((1, 2)), np.zeros((3, 2)), np.zeros((1, 2)), np.zeros((3, 2)),
                        np.array([1]), np.array([1]))


class TestPckdListwise:
    """Test suite for the list-wise consistency loss."""

    def test_uniform_distributions(self):
        """Test that uniform student and projected softmaxes over five items give ln 5."""
        loss = pckd_l_loss(np.zeros((1, 2)), np.ones((5, 2)), np.zeros((1, 3)), np.ones((5, 3)),
                           np.array([[0, 1, 2, 3, 4]]))
        assert loss.value == pytest.approx(np.log(5.0), abs=1e-6)

    @pytest.mark.parametrize("detach_targets", [True, False])
    def test_gradients_match_finite_differences(self, rng, detach_targets):
        """Test projected gradients, plus student gradients when targets are not detached."""
        for _ in range(DRAWS):
            case = preference_instance(rng)

            def run(**override):
                values = {key: case[key] for key in ("student_user", "student_items", "projected_user", "projected_items")}
                values.update(override)
                return pckd_l_loss(lists=case["lists"], detach_targets=detach_targets, **values)

            grads = run().grads
            for key in ("projected_user", "projected_items"):
                assert_gradient_close(lambda p: run(**{key: p}).value, grads[key], case[key])
            if detach_targets:
                assert "student_user" not in grads
            else:
                for key in ("student_user", "student_items"):
                    assert_gradient_close(lambda p: run(**{key: p}).value, grads[key], case[key])

    def test_duplicate_items(self):
        """Test that a list with a repeated item is a domain error."""
        with pytest.raises(DomainError):
            pckd_l_loss(np.zeros((1, 2)), np.zeros((4, 2)), np.zeros((1, 2)), np.zeros((4, 2)), np.array([[0, 2, 2]]))

    def test_single_item_list(self):
        """Test that Q below two is rejected."""
        with pytest.raises(ConfigurationError):
            pckd_l_loss(np.zeros((1, 2)), np.zeros((4, 2)), np.zeros((1, 2)), np.zeros((4, 2)), np.array([[0]]))


class TestPckdHybrid:
    """Test suite for the hybrid consistency loss."""

    def run(self, case, alpha):
        return pckd_h_loss(
            case["student_user"], case["student_items"], case["projected_user"], case["projected_items"],
            case["lists"], case["first"], case["second"], alpha,
        )

    def test_alpha_zero_is_listwise(self, rng):
        """Test that alpha=0 reduces to the list-wise loss."""
        case = preference_instance(rng)
        hybrid = self.run(case, 0.0)
        listwise = pckd_l_loss(case["student_user"], case["student_items"], case["projected_user"],
                               case["projected_items"], case["lists"])
        assert hybrid.value == pytest.approx(listwise.value, rel=1e-12)
        np.testing.assert_allclose(hybrid.grads["projected_items"], listwise.grads["projected_items"], atol=1e-15)

    def test_alpha_one_is_pairwise(self, rng):
        """Test that alpha=1 reduces to the pair-wise loss."""
        case = preference_instance(rng)
        hybrid = self.run(case, 1.0)
        pairwise = pckd_p_loss(case["student_user"], case["student_items"], case["projected_user"],
                               case["projected_items"], case["first"], case["second"])
        assert hybrid.value == pytest.approx(pairwise.value, rel=1e-12)
        np.testing.assert_allclose(hybrid.grads["projected_user"], pairwise.grads["projected_user"], atol=1e-15)

    def test_gradients_match_finite_differences(self, rng):
        """Test the mixed projected-user gradient at alpha=0.3."""
        for _ in range(DRAWS):
            case = preference_instance(rng)
            grads = self.run(case, 0.3).grads

            def on_user(p):
                return self.run({**case, "projected_user": p}, 0.3).value

            assert_gradient_close(on_user, grads["projected_user"], case["projected_user"])

    def test_alpha_out_of_range(self, rng):
        """Test that alpha outside [0, 1] is rejected."""
        with pytest.raises(ConfigurationError):
            self.run(preference_instance(rng), 1.5)


class TestTotalLoss:
    """Test suite for the joint objective."""

    def test_weighted_sum(self):
        """Test that the total is base plus the weighted regularizers."""
        base = LossValue(1.0, {"user": np.ones(2)})
        de = LossValue(2.0, {"user": np.ones(2), "item": np.ones(2)})
        pckd = LossValue(4.0, {"item": np.ones(2)})

        total = total_loss(base, de, pckd, lambda_de=0.5, lambda_pckd=0.25)

        assert total.value == pytest.approx(3.0)
        np.testing.assert_allclose(total.grads["user"], [1.5, 1.5])
        np.testing.assert_allclose(total.grads["item"], [0.75, 0.75])

    def test_missing_components(self):
        """Test that absent regularizers leave the base loss unchanged."""
        base = LossValue(0.7, {"user": np.array([1.0])})
        total = total_loss(base, lambda_de=3.0, lambda_pckd=3.0)
        assert total.value == pytest.approx(0.7)
        np.testing.assert_array_equal(total.grads["user"], [1.0])

    def test_combine_keeps_inputs(self):
        """Test that combining does not modify the input gradients."""
        grad = np.ones(2)
        combine([(2.0, LossValue(1.0, {"a": grad})), (1.0, LossValue(1.0, {"a": grad}))])
        np.testing.assert_array_equal(grad, [1.0, 1.0])


class TestDistillationObjective:
    """Test suite for the batch objective assembling DE and PCKD terms."""

    @pytest.fixture
    def setup(self, rng):
        factory = StreamFactory(21)
        student = init_model(BackboneKind.MF, 12, 30, 3, factory.stream("init", 1), dtype="float64")
        teacher = init_model(BackboneKind.MF, 12, 30, 5, factory.stream("init", 0), dtype="float64")
        banks = [init_bank(3, 5, 2, factory.stream("init", k), dtype="float64") for k in (2, 3)]
        batch = BprBatch(
            users=rng.integers(0, 12, size=8),
            pos_items=rng.integers(0, 30, size=8),
            neg_items=rng.integers(0, 30, size=8),
        )
        return student, teacher, banks, batch, rebuild_rank_table(student)

    def compute(self, setup, method, lambda_pckd=0.005, reduction="mean"):
        student, teacher, (user_bank, item_bank), batch, table = setup
        config = PckdConfig(method=method, Q=5, lambda_pckd=lambda_pckd, reduction=reduction)
        objective = DistillationObjective(student, config, KdMethod.DE, teacher, user_bank, item_bank)
        return objective.compute(batch, epoch=3, batch_index=2, streams=StreamFactory(9), rank_table=table)

    def test_de_term_independent_of_regularizer(self, setup):
        """Test that the DE loss is identical with and without PCKD-L under the same seed."""
        plain = self.compute(setup, PckdMethod.NONE)
        listwise = self.compute(setup, PckdMethod.PCKD_L)
        assert listwise.de == plain.de
        assert listwise.base == plain.base
        assert listwise.pckd > 0.0

    def test_zero_weight_regularizer_leaves_gradients(self, setup):
        """Test that PCKD-L at weight zero reproduces the DE-only gradients exactly."""
        plain = self.compute(setup, PckdMethod.NONE)
        listwise = self.compute(setup, PckdMethod.PCKD_L, lambda_pckd=0.0)
        assert set(listwise.grads) == set(plain.grads)
        for name, grad in plain.grads.items():
            np.testing.assert_array_equal(listwise.grads[name], grad, err_msg=name)

    def test_sampled_items_outside_batch(self, setup):
        """Test that items drawn only for PCKD are separated from the batch items."""
        batch_items = np.array([1, 4, 7])
        lists = np.array([[4, 9, 2], [1, 9, 12]])
        extra = DistillationObjective._extra_items(batch_items, lists, (np.array([7, 30]), np.array([0, 4])))
        np.testing.assert_array_equal(extra, [0, 2, 9, 12, 30])

    @pytest.mark.parametrize("method", [PckdMethod.PCKD_P, PckdMethod.PCKD_L, PckdMethod.PCKD_H])
    def test_sum_reduction_scales_by_batch_users(self, setup, method):
        """Test that the summed regularizer is the mean times the number of batch users."""
        n_users = np.unique(setup[3].users).size
        mean = self.compute(setup, method, lambda_pckd=1.0)
        summed = self.compute(setup, method, lambda_pckd=1.0, reduction="sum")
        plain = self.compute(setup, PckdMethod.NONE)
        assert summed.pckd == pytest.approx(mean.pckd * n_users)
        assert summed.de == mean.de
        for name, grad in plain.grads.items():
            np.testing.assert_allclose(
                summed.grads[name] - grad, (mean.grads[name] - grad) * n_users, rtol=1e-9, atol=1e-12, err_msg=name
            )
