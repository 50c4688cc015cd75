import json
import math

import numpy as np
import pytest

from featesn import (FeatEsnHyperparams, FeatEsnModel, FeatureMatrix, feature_contributions,
                     full_feature_matrix, prefix_feature_matrix, prune, readout_vector,
                     singleton_feature_matrix, suggest_prune_threshold)
from featesn.exceptions import NotTrainedError, NumericError, ParameterError, ShapeError
from featesn.feat_esn import FeatureContribution

THREE_INPUT_ROWS = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]]


def model(features=None, b=5, p_out=3, **kw):
    return FeatEsnModel(features or full_feature_matrix(3), p_out, FeatEsnHyperparams(b=b, **kw))


class TestFeatureMatrices:
    def test_full_three(self):
        fm = full_feature_matrix(3)
        np.testing.assert_array_equal(fm.W_f, THREE_INPUT_ROWS)
        assert fm.label_names() == ["{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}", "{1-3}"]

    def test_full_one(self):
        np.testing.assert_array_equal(full_feature_matrix(1).W_f, [[1]])

    def test_full_four_enumerates_subsets(self):
        fm = full_feature_matrix(4)
        rows = {tuple(r) for r in fm.W_f.astype(int)}
        brute = {tuple((k >> j) & 1 for j in range(4)) for k in range(1, 16)}
        assert fm.n_features == 15 and rows == brute

    def test_full_limits(self):
        with pytest.raises(ParameterError):
            full_feature_matrix(0)
        with pytest.raises(ParameterError):
            full_feature_matrix(21)

    def test_prefix(self):
        np.testing.assert_array_equal(prefix_feature_matrix(3).W_f, [[1, 0, 0], [1, 1, 0], [1, 1, 1]])
        np.testing.assert_array_equal(prefix_feature_matrix(1).W_f, [[1]])
        big = prefix_feature_matrix(100)
        np.testing.assert_array_equal(big.W_f, np.tril(np.ones((100, 100))))
        assert big.label_names()[-1] == "{1-100}"

    def test_singleton(self):
        np.testing.assert_array_equal(singleton_feature_matrix(4).W_f, np.eye(4))

    @pytest.mark.parametrize("W", [[[0, 0]], [[1, 2]], [[1, 0], [1, 0]], []])
    def test_invalid(self, W):
        with pytest.raises(ParameterError):
            FeatureMatrix(np.array(W, dtype=float))

    def test_labels_checked(self):
        with pytest.raises(ParameterError):
            FeatureMatrix(np.eye(2), [(1,), (0,)])

    def test_compressed_label(self):
        fm = FeatureMatrix.from_subsets([(0, 2, 3, 4, 6)], 7)
        assert fm.label_names() == ["{1,3-5,7}"]


class TestConstruction:
    def test_reference_shape_and_support(self):
        mdl = model()
        assert mdl.state_size == 35 and mdl.W_in.shape == (35, 3)
        for i, row in enumerate(THREE_INPUT_ROWS):
            for j, on in enumerate(row):
                block = mdl.W_in[5 * i:5 * i + 5, j]
                if on:
                    np.testing.assert_array_equal(block, mdl.W_b[0])
                else:
                    assert np.all(block == 0)

    def test_transition_is_block_diagonal(self):
        mdl = model(p=0.3)
        np.testing.assert_array_equal(mdl.W.toarray(), np.kron(np.eye(7), mdl.W_r.toarray()))
        rho = np.max(np.abs(np.linalg.eigvals(mdl.W_r.toarray())))
        assert rho == pytest.approx(0.9, abs=1e-10)

    def test_scalar_reservoir(self):
        mdl = model(features=full_feature_matrix(1), b=1, p_out=1)
        assert mdl.state_size == 1 and mdl.W_in.shape == (1, 1)

    def test_deterministic(self):
        a, b = model(seed=9), model(seed=9)
        np.testing.assert_array_equal(a.W_in, b.W_in)
        np.testing.assert_array_equal(a.d, b.d)
        assert (a.W_r != b.W_r).nnz == 0

    def test_unshared_blocks(self):
        mdl = model(shared_block=False)
        assert mdl.W_b.shape == (7, 5)
        np.testing.assert_array_equal(mdl.W_in[5:10, 1], mdl.W_b[1])
        assert np.all(mdl.W_in[5:10, [0, 2]] == 0)

    @pytest.mark.parametrize("kw", [dict(b=0), dict(b=2, readout_kind="cube"),
                                    dict(b=2, beta=-1.0), dict(b=2, alpha=-0.1)])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            FeatEsnHyperparams(**kw)


class TestStep:
    def test_zero(self):
        mdl = model(alpha=1.0)
        mdl.d[:] = 0
        np.testing.assert_array_equal(mdl.step(np.zeros(3)), 0.0)

    def test_is_linear(self):
        mdl = model(alpha=0.5)
        mdl.d[:] = 0
        rng = np.random.default_rng(0)
        u1, u2 = rng.standard_normal(3), rng.standard_normal(3)
        a = mdl.copy().step(u1)
        b = mdl.copy().step(u2)
        np.testing.assert_allclose(mdl.copy().step(2 * u1 - 3 * u2), 2 * a - 3 * b, atol=1e-14)

    def test_outside_support_unchanged(self):
        mdl = model(p=0.3)
        rng = np.random.default_rng(1)
        us = rng.standard_normal((30, 3))
        ref = mdl.copy()
        pert = mdl.copy()
        for u in us:
            ref.step(u)
            v = u.copy()
            v[2] += rng.standard_normal()  # feature {1,2} (row 3) never sees input 3
            pert.step(v)
        np.testing.assert_array_equal(ref.r[15:20], pert.r[15:20])
        assert not np.allclose(ref.r[10:15], pert.r[10:15])

    def test_non_finite(self):
        with pytest.raises(NumericError):
            model().step([0.0, np.inf, 0.0])


class TestReadout:
    def test_zero_square(self):
        np.testing.assert_array_equal(readout_vector(np.zeros(3)), [1, 0, 0, 0, 0, 0, 0])

    def test_square(self):
        np.testing.assert_array_equal(readout_vector([2.0, -3.0], "square"), [1, 2, -3, 4, 9])

    def test_tanh(self):
        np.testing.assert_array_equal(readout_vector([0.5], "tanh"), [1, 0.5, math.tanh(0.5)])

    def test_model_readout(self):
        mdl = model()
        mdl.r = np.arange(35.0)
        out = mdl.readout_vector()
        assert out.shape == (71,) and out[0] == 1 and out[-1] == 34.0 ** 2


class TestTrain:
    def test_zero_targets(self):
        U = np.random.default_rng(2).standard_normal((300, 3))
        mdl = model().train(U, np.zeros((300, 3)))
        assert np.linalg.norm(mdl.W_out) < 1e-8
        assert all(c.total == 0 for c in feature_contributions(mdl))

    def test_constant_target_bias(self):
        # ridge shrinkage leaves a residual of order beta/N; N is the Lorenz training length
        U = np.random.default_rng(3).standard_normal((5000, 3))
        mdl = model(p_out=1).train(U, np.ones((5000, 1)))
        assert mdl.metadata["train_nrmse"] < 1e-6
        assert mdl.W_out.shape == (1, 71)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            model().train(np.zeros((10, 3)), np.zeros((10, 2)))

    def test_lorenz(self, lorenz_train):
        U, Y, _ = lorenz_train
        mdl = model().train(U, Y)
        assert mdl.metadata["train_nrmse"] < 0.05
        pred = mdl.predict(500).values
        assert np.all(np.isfinite(pred))
        assert np.max(np.abs(pred)) <= 3 * np.max(np.abs(U))

    def test_lorenz_nonlinear_dominates(self, lorenz_train):
        U, Y, _ = lorenz_train
        for seed in range(5):
            cs = feature_contributions(model(seed=seed).train(U, Y))
            lin = np.linalg.norm([c.linear_norm for c in cs])
            nonlin = np.linalg.norm([c.nonlinear_norm for c in cs])
            assert nonlin > lin


class TestPredict:
    def test_untrained(self):
        with pytest.raises(NotTrainedError):
            model().predict(3)

    def test_zero_steps(self):
        U = np.random.default_rng(3).standard_normal((100, 3))
        assert len(model().train(U, U).predict(0)) == 0

    def test_constant_fixed_point(self):
        c = np.full((1000, 3), 2.5)
        for seed in range(5):
            mdl = model(seed=seed).train(c[:-1], c[1:])
            assert np.max(np.abs(mdl.predict(100).values - 2.5)) < 1e-3


@pytest.fixture(scope="module")
def trained():
    U = np.random.default_rng(4).standard_normal((400, 3))
    return model(p=0.3, p_out=1).train(U[:-1], U[1:, :1]), U


class TestPrune:
    def test_zero_threshold_keeps_all(self, trained):
        mdl, _ = trained
        out = prune(mdl, 0.0)
        assert out.n_features == 7
        np.testing.assert_array_equal(out.W_out, mdl.W_out)

    def test_infinite_threshold(self, trained):
        with pytest.raises(ParameterError):
            prune(trained[0], math.inf)

    def test_negative_threshold(self, trained):
        with pytest.raises(ParameterError):
            prune(trained[0], -1.0)

    def test_drops_blocks_consistently(self, trained):
        mdl, U = trained
        cs = feature_contributions(mdl)
        thr = sorted(c.total for c in cs)[3]
        out = prune(mdl, thr)
        kept = [c.label for c in cs if c.total >= thr]
        assert out.features.labels == kept and out.state_size == 5 * len(kept)
        assert out.W_out.shape == (1, 1 + 2 * out.state_size)
        assert mdl.n_features == 7  # original untouched
        retrained = prune(mdl, thr, retrain_data=(U[:-1], U[1:, :1]))
        assert retrained.trained and retrained.metadata["pruned_from"] == 7

    def test_pruned_state_matches_surviving_blocks(self, trained):
        mdl, U = trained
        out = prune(mdl, sorted(c.total for c in feature_contributions(mdl))[2])
        keep = [mdl.features.labels.index(lab) for lab in out.features.labels]
        idx = np.concatenate([np.arange(5 * i, 5 * i + 5) for i in keep])
        full, small = mdl.copy(), out.copy()
        for u in U[:20]:
            full.step(u)
            small.step(u)
        np.testing.assert_allclose(small.r, full.r[idx], atol=1e-14)

    def test_untrained(self):
        with pytest.raises(NotTrainedError):
            prune(model(), 0.1)


def test_suggest_threshold():
    cs = [FeatureContribution((i,), v, 0.0) for i, v in enumerate([5.0, 4.0, 0.01, 0.02])]
    thr = suggest_prune_threshold(cs)
    assert 0.02 < thr < 4.0
    assert thr == pytest.approx(math.sqrt(0.02 * 4.0))
    assert suggest_prune_threshold(cs[:1]) == 0.0


def test_serialization_roundtrip():
    U = np.random.default_rng(6).standard_normal((100, 3))
    mdl = model(shared_block=False, readout_kind="tanh").train(U[:-1], U[1:])
    back = FeatEsnModel.from_dict(json.loads(json.dumps(mdl.to_dict())))
    assert back.features.labels == mdl.features.labels
    np.testing.assert_array_equal(back.predict(30).values, mdl.copy().predict(30).values)


def test_gap_threshold_isolates_relevant_input():
    # every block is driven by its own independent input; only input 1 matters
    for seed in range(10):
        rng = np.random.default_rng(seed)
        U = rng.standard_normal((3000, 4))
        u1 = U[:, 0]
        y = (0.6 * u1 + 0.3 * np.r_[0.0, u1[:-1]] + 0.2 * u1 ** 2 + 0.05 * rng.standard_normal(3000))[:, None]
        mdl = FeatEsnModel(singleton_feature_matrix(4), 1,
                           FeatEsnHyperparams(b=10, p=0.3, seed=seed)).train(U, y, washout=100)
        cs = feature_contributions(mdl)
        assert max(cs, key=lambda c: c.total).label == (0,)
        pruned = prune(mdl, suggest_prune_threshold(cs), retrain_data=(U, y), washout=100)
        assert pruned.features.labels == [(0,)]
        assert pruned.metadata["train_nrmse"] <= 1.05 * mdl.metadata["train_nrmse"]
