import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fieldguide.corpus import UnlabeledCaptions
from fieldguide.embed import EmbeddingStore
from fieldguide.errors import DataError, NumericError
from fieldguide.matcher import (
    MatcherParams,
    TrainConfig,
    gradient_check,
    gradient_check_regularizer,
    init_params,
    load_checkpoint,
    loss_pairs,
    pair_logits,
    positive_score,
    project,
    random_probe,
    regularizer,
    save_checkpoint,
    train,
    zeros_like_params,
)
from fieldguide.pairs import SentencePair


def tiny_params():
    """Hand-checkable fixture: d=2, p=2, q=2, 3 classes."""
    return MatcherParams(
        w_proj=np.array([[0.5, -0.25], [1.0, 0.75]]),
        b_proj=np.array([0.1, -0.2]),
        w_hidden=np.array(
            [[0.2, -0.1, 0.3, 0.0, -0.4, 0.5], [0.6, 0.1, -0.2, 0.3, 0.0, -0.1]]
        ),
        b_hidden=np.array([0.05, -0.05]),
        w_out=np.array([[1.0, -0.5], [0.25, 0.75], [-0.3, 0.2]]),
        b_out=np.array([0.01, 0.02, 0.03]),
    )


class TestProjection:
    def test_zero_params_give_zero(self):
        zero = zeros_like_params(init_params(4, 3, 3, 3, seed=0))
        assert np.array_equal(project(np.array([1.0, -2.0, 3.0, 0.5]), zero), np.zeros(3))

    def test_relu_inactive_passthrough(self):
        params = tiny_params()
        params.w_proj = np.eye(2)
        params.b_proj = np.zeros(2)
        e = np.array([0.3, 1.7])
        assert np.array_equal(project(e, params), e)

    def test_fixed_weights(self):
        # relu([[1,2],[3,-1]] @ (1,-1) + (0.5,-0.25)) = relu((-0.5, 3.75))
        params = tiny_params()
        params.w_proj = np.array([[1.0, 2.0], [3.0, -1.0]])
        params.b_proj = np.array([0.5, -0.25])
        out = project(np.array([1.0, -1.0]), params)
        assert np.allclose(out, [0.0, 3.75], atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            project(np.zeros(3), tiny_params())


class TestPairLogits:
    def test_identical_inputs_zero_difference_block(self):
        params = init_params(5, 4, 4, 3, seed=1)
        e = np.random.default_rng(0).normal(size=5)
        p = project(e, params)
        assert np.array_equal(np.abs(p - p), np.zeros(4))
        logits = pair_logits(e, e, params)
        assert logits.shape == (3,)

    def test_zero_params_zero_logits(self):
        zero = zeros_like_params(init_params(4, 3, 3, 3, seed=0))
        logits = pair_logits(np.ones(4), -np.ones(4), zero)
        assert np.array_equal(logits, np.zeros(3))
        assert positive_score(logits) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_fixed_forward_fixture(self):
        # Hand-computed: p1=(0.1,2.3), p2=(0,0), h=(0.95,0.01),
        # logits = (0.955, 0.265, -0.253).
        logits = pair_logits(np.array([1.0, 2.0]), np.array([-1.0, 0.5]), tiny_params())
        assert np.allclose(logits, [0.955, 0.265, -0.253], atol=1e-12)

    def test_swap_preserves_difference_block(self):
        params = init_params(6, 5, 5, 3, seed=2)
        rng = np.random.default_rng(3)
        e1, e2 = rng.normal(size=6), rng.normal(size=6)
        d12 = np.abs(project(e1, params) - project(e2, params))
        d21 = np.abs(project(e2, params) - project(e1, params))
        assert np.array_equal(d12, d21)

    def test_not_symmetric_in_general(self):
        params = init_params(6, 5, 5, 3, seed=2)
        rng = np.random.default_rng(4)
        e1, e2 = rng.normal(size=6), rng.normal(size=6)
        assert not np.allclose(pair_logits(e1, e2, params), pair_logits(e2, e1, params))


class TestPositiveScore:
    def test_binary_zero_logit(self):
        assert positive_score(np.array([0.0])) == 0.5

    def test_three_class_uniform(self):
        assert positive_score(np.zeros(3)) == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_three_class_ln2(self):
        assert positive_score(np.array([math.log(2.0), 0.0, 0.0])) == pytest.approx(
            0.5, abs=1e-12
        )

    def test_bad_shape(self):
        with pytest.raises(DataError):
            positive_score(np.zeros(2))


class TestLossPairs:
    def test_binary_zero_params_is_ln2(self):
        zero = zeros_like_params(init_params(4, 3, 3, 1, seed=0))
        rng = np.random.default_rng(5)
        batch = [
            (rng.normal(size=4), rng.normal(size=4), ["positive", "negative"][i % 2])
            for i in range(6)
        ]
        loss, _ = loss_pairs(batch, zero)
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)

    def test_three_class_zero_params_is_ln3(self):
        zero = zeros_like_params(init_params(4, 3, 3, 3, seed=0))
        rng = np.random.default_rng(6)
        batch = [
            (rng.normal(size=4), rng.normal(size=4), label)
            for label in ("positive", "neutral", "negative")
        ]
        loss, _ = loss_pairs(batch, zero)
        assert loss == pytest.approx(math.log(3.0), abs=1e-12)

    def test_neutral_label_invalid_for_binary(self):
        params = init_params(4, 3, 3, 1, seed=0)
        with pytest.raises(DataError):
            loss_pairs([(np.ones(4), np.zeros(4), "neutral")], params)

    @pytest.mark.parametrize("classes", [2, 3])
    def test_gradients_match_finite_differences(self, classes):
        params, batch = random_probe(0, classes=classes)
        assert gradient_check(batch, params) < 1e-4

    def test_gradient_check_at_zero_params_is_finite(self):
        _, batch = random_probe(1, classes=3)
        zero = zeros_like_params(init_params(6, 6, 6, 3, seed=0))
        err = gradient_check(batch, zero)
        assert math.isfinite(err) and err < 1e-4


class TestRegularizer:
    def test_orthogonal_one_hot(self):
        value, _ = regularizer(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert value == -2.0

    def test_two_identical_uniform(self):
        value, _ = regularizer(np.array([[0.5, 0.5], [0.5, 0.5]]))
        assert value == 0.0

    def test_mixed_batch(self):
        value, _ = regularizer(np.array([[0.8, 0.2], [0.3, 0.7]]))
        assert value == pytest.approx(-0.5, abs=1e-12)

    def test_rejects_unnormalized(self):
        with pytest.raises(DataError):
            regularizer(np.array([[0.5, 0.6]]))

    def test_rejects_negative(self):
        with pytest.raises(DataError):
            regularizer(np.array([[1.2, -0.2]]))

    def test_gradient_formula(self):
        probs = np.array([[0.8, 0.2], [0.3, 0.7], [0.5, 0.5]])
        _, grads = regularizer(probs)
        for x in range(3):
            others = probs.sum(axis=0) - probs[x]
            assert np.allclose(grads[x], -2 * probs[x] + 2 * others, atol=1e-15)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        raw = rng.random((5, 8))
        probs = raw / raw.sum(axis=1, keepdims=True)
        assert gradient_check_regularizer(probs) < 1e-6

    @given(
        st.integers(1, 8),
        st.integers(2, 10),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=200, deadline=None)
    def test_lower_bound(self, m, k, seed):
        rng = np.random.default_rng(seed)
        raw = rng.random((m, k)) + 1e-12
        probs = raw / raw.sum(axis=1, keepdims=True)
        value, _ = regularizer(probs)
        assert value >= -m - 1e-9

    @given(st.integers(1, 8), st.integers(2, 10), st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_identical_rows_closed_form(self, m, k, seed):
        rng = np.random.default_rng(seed)
        p = rng.random(k) + 1e-12
        p /= p.sum()
        value, _ = regularizer(np.tile(p, (m, 1)))
        assert value == pytest.approx(m * (m - 2) * float(p @ p), abs=1e-12)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        params = init_params(12, 5, 7, 3, seed=9)
        path = tmp_path / "model.ckpt"
        save_checkpoint(params, path)
        loaded = load_checkpoint(path)
        for name in ("w_proj", "b_proj", "w_hidden", "b_hidden", "w_out", "b_out"):
            assert np.array_equal(getattr(params, name), getattr(loaded, name))
        assert loaded.n_classes == 3 and loaded.embed_dim == 12

    def test_corrupt_header(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(init_params(4, 3, 3, 1, seed=0), path)
        data = bytearray(path.read_bytes())
        data[:8] = b"BADMAGIC"
        path.write_bytes(bytes(data))
        with pytest.raises(DataError, match="magic"):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(init_params(4, 3, 3, 1, seed=0), path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataError, match="truncated"):
            load_checkpoint(path)


def make_stores(rng, n_images=6, caps_per_image=3, dim=8):
    """Caption store with a planted two-cluster structure plus a doc store."""
    images = []
    cap_store = EmbeddingStore(dim)
    for i in range(n_images):
        center = np.zeros(dim)
        center[i % 2] = 1.0
        captions = tuple(f"caption {j} of image {i}" for j in range(caps_per_image))
        image = UnlabeledCaptions(f"im{i}", captions)
        images.append(image)
        for key in image.caption_keys:
            vec = center + 0.05 * rng.normal(size=dim)
            cap_store._add(key, vec.astype(np.float32))
    return images, cap_store


class TestTraining:
    def test_loss_decreases_on_separable_data(self):
        rng = np.random.default_rng(11)
        images, cap_store = make_stores(rng)
        from fieldguide.pairs import PairGenConfig, build_training_set

        dataset = build_training_set(images, None, None, PairGenConfig(seed=2, classes=2))
        cfg = TrainConfig(
            epochs=12, reg_epochs=0, reg_weight=0.0, seed=3, classes=2,
            proj_dim=8, hidden_dim=8, batch_size=16,
        )
        _, history = train(dataset, cap_store, cfg=cfg)
        assert history[-1].pair_loss < history[0].pair_loss

    def test_determinism(self):
        rng = np.random.default_rng(11)
        images, cap_store = make_stores(rng)
        from fieldguide.pairs import PairGenConfig, build_training_set

        dataset = build_training_set(images, None, None, PairGenConfig(seed=2, classes=2))
        cfg = TrainConfig(
            epochs=3, reg_epochs=0, reg_weight=0.0, seed=3, classes=2,
            proj_dim=8, hidden_dim=8, batch_size=16,
        )
        a, _ = train(dataset, cap_store, cfg=cfg)
        b, _ = train(dataset, cap_store, cfg=cfg)
        for name in ("w_proj", "b_proj", "w_hidden", "b_hidden", "w_out", "b_out"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_reg_weight_requires_corpus(self):
        rng = np.random.default_rng(11)
        images, cap_store = make_stores(rng)
        dataset = [SentencePair("img:im0:c0", "img:im1:c0", "negative")]
        with pytest.raises(DataError, match="regularizer"):
            train(dataset, cap_store, cfg=TrainConfig(epochs=1, reg_weight=1.0, classes=2))

    def test_missing_key_names_key(self):
        cap_store = EmbeddingStore(4, {"img:a:c0": np.ones(4, dtype=np.float32)})
        dataset = [SentencePair("img:a:c0", "img:b:c0", "negative")]
        with pytest.raises(DataError, match="img:b:c0"):
            train(dataset, cap_store, cfg=TrainConfig(epochs=1, reg_weight=0.0, classes=2))

    def test_divergence_reports_step(self):
        rng = np.random.default_rng(11)
        images, cap_store = make_stores(rng)
        from fieldguide.pairs import PairGenConfig, build_training_set

        dataset = build_training_set(images, None, None, PairGenConfig(seed=2, classes=2))
        # Adam steps are bounded by the learning rate, so it takes an absurd
        # rate to push the forward pass past float64 range.
        cfg = TrainConfig(
            epochs=2, reg_epochs=0, reg_weight=0.0, seed=3, classes=2,
            proj_dim=8, hidden_dim=8, batch_size=16, learning_rate=1e154,
        )
        with pytest.raises(NumericError, match="step"):
            with np.errstate(all="ignore"):
                train(dataset, cap_store, cfg=cfg)
