import numpy as np
import pytest

from tactopath.imageproc import ImageU8, ManifestEntry, save_image
from tactopath.nn.layers import (Conv2d, Dense, conv_output_size, softmax,
                                 softmax_cross_entropy)
from tactopath.nn.network import (DilatedResNet, DilatedResNetConfig,
                                  load_weights, save_weights)
from tactopath.nn.optimizer import AdaBound, lower_bound, upper_bound
from tactopath.nn.training import (TrainConfig, stratified_kfold, train,
                                   train_single)


class TestConv:
    def test_identity_kernel(self, rng):
        conv = Conv2d(2, 2, k=1, name="c")
        conv.w[:] = np.eye(2).reshape(2, 2, 1, 1)
        conv.b[:] = 0
        x = rng.random((1, 2, 5, 5))
        np.testing.assert_allclose(conv.forward(x), x)

    def test_dilated_center_value_hand_sum(self, rng):
        conv = Conv2d(1, 1, k=3, dilation=2, pad=2, name="c")
        conv.b[:] = 0
        x = rng.random((1, 1, 5, 5))
        out = conv.forward(x)
        assert out.shape == (1, 1, 5, 5)
        # center output taps the dilated grid {0, 2, 4} in both axes
        expected = sum(
            conv.w[0, 0, u, v] * x[0, 0, 2 * u, 2 * v]
            for u in range(3) for v in range(3)
        )
        assert out[0, 0, 2, 2] == pytest.approx(expected)

    def test_stride_2_output_size(self):
        assert conv_output_size(224, k=3, stride=2, dilation=1, pad=1) == 112

    def test_channel_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            Conv2d(3, 4).forward(rng.random((1, 2, 8, 8)))


class TestHead:
    def test_softmax_normalized(self, rng):
        probs = softmax(rng.normal(size=(5, 4)) * 10)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_zero_network_uniform_probs(self, rng):
        net = DilatedResNet(DilatedResNetConfig(input_size=16, seed=0))
        for p in net.param_dict().values():
            p[:] = 0.0
        probs = net.forward(rng.random((2, 3, 16, 16)))
        np.testing.assert_allclose(probs, 0.25, atol=1e-12)

    def test_forward_deterministic(self, rng):
        x = rng.random((1, 3, 16, 16))
        a = DilatedResNet(DilatedResNetConfig(input_size=16, seed=5)).forward(x)
        b = DilatedResNet(DilatedResNetConfig(input_size=16, seed=5)).forward(x)
        np.testing.assert_array_equal(a, b)

    def test_confident_correct_prediction_zero_gradient(self):
        logits = np.array([[500.0, 0.0, 0.0, 0.0]])
        loss, dlogits, probs = softmax_cross_entropy(logits, np.array([0]))
        assert loss == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(dlogits, 0.0, atol=1e-12)


def _flat_grads(net):
    return {k: v.copy() for k, v in net.grad_dict().items()}


class TestGradients:
    def test_finite_difference_oracle(self, rng):
        net = DilatedResNet(DilatedResNetConfig(input_size=16, seed=3))
        x = rng.random((2, 3, 16, 16))
        y = np.array([1, 3])
        net.zero_grads()
        _, _ = net.loss_and_grads(x, y)
        grads = _flat_grads(net)
        params = net.param_dict()
        h = 1e-5
        worst = 0.0
        for name, p in params.items():
            flat = p.ravel()
            idxs = rng.choice(flat.size, size=min(3, flat.size), replace=False)
            for idx in idxs:
                orig = flat[idx]
                flat[idx] = orig + h
                net.zero_grads()
                lp, _ = net.loss_and_grads(x, y)
                flat[idx] = orig - h
                net.zero_grads()
                lm, _ = net.loss_and_grads(x, y)
                flat[idx] = orig
                fd = (lp - lm) / (2 * h)
                an = grads[name].ravel()[idx]
                worst = max(worst, abs(fd - an) / max(1e-8, abs(fd), abs(an)))
        assert worst < 1e-4

    def test_batch_gradient_is_mean_of_singles(self, rng):
        cfg = DilatedResNetConfig(input_size=16, seed=1)
        x = rng.random((3, 3, 16, 16))
        y = np.array([0, 2, 3])
        net = DilatedResNet(cfg)
        net.zero_grads()
        net.loss_and_grads(x, y)
        batch = _flat_grads(net)
        singles = {}
        for i in range(3):
            net2 = DilatedResNet(cfg)
            net2.zero_grads()
            net2.loss_and_grads(x[i : i + 1], y[i : i + 1])
            for k, v in net2.grad_dict().items():
                singles[k] = singles.get(k, 0) + v / 3
        for k in batch:
            np.testing.assert_allclose(batch[k], singles[k], atol=1e-12)


class TestAdaBound:
    def test_zero_gradient_no_update(self):
        opt = AdaBound()
        p = {"w": np.array([1.0, -2.0])}
        g = {"w": np.zeros(2)}
        opt.step(p, g)
        np.testing.assert_array_equal(p["w"], [1.0, -2.0])

    def test_bound_formulas_at_t1(self):
        assert lower_bound(1, 0.01, 1e-3) == pytest.approx(0.01 * (1 - 1 / 1.001))
        assert upper_bound(1, 0.01, 1e-3) == pytest.approx(0.01 * (1 + 1000.0))

    def test_bounds_squeeze_toward_final_lr(self):
        lows = [lower_bound(t, 0.01, 1e-3) for t in (1, 10, 100, 1_000_000)]
        highs = [upper_bound(t, 0.01, 1e-3) for t in (1, 10, 100, 1_000_000)]
        assert lows == sorted(lows)
        assert highs == sorted(highs, reverse=True)
        assert lows[-1] == pytest.approx(0.01, rel=0.01)
        assert highs[-1] == pytest.approx(0.01, rel=0.01)

    def test_applied_rates_within_bounds(self, rng):
        opt = AdaBound()
        p = {"w": rng.normal(size=(4, 4))}
        for t in range(1, 30):
            opt.step(p, {"w": rng.normal(size=(4, 4)) * 10.0 ** rng.integers(-3, 4)})
            lo = lower_bound(t, opt.final_lr, opt.gamma)
            hi = upper_bound(t, opt.final_lr, opt.gamma)
            rates = opt.last_rates["w"]
            assert (rates >= lo - 1e-15).all()
            assert (rates <= hi + 1e-15).all()

    def test_pinned_bounds_equal_sgd_momentum_oracle(self, rng):
        c = 0.004
        opt = AdaBound(pinned_rate=c)
        w = rng.normal(size=5)
        p = {"w": w.copy()}
        # independent sign-free SGD-with-momentum oracle on bias-corrected m
        w_ref = w.copy()
        m_ref = np.zeros(5)
        for t in range(1, 20):
            g = rng.normal(size=5)
            opt.step(p, {"w": g.copy()})
            m_ref = opt.beta1 * m_ref + (1 - opt.beta1) * g
            w_ref = w_ref - c * (m_ref / (1 - opt.beta1**t))
            np.testing.assert_allclose(p["w"], w_ref, atol=1e-12)


def _make_dataset(tmp_path, rng, per_class=8, size=16):
    types = ["IP", "IIA", "IIC", "LST"]
    entries = []
    for t_idx, t in enumerate(types):
        for i in range(per_class):
            # class-coded brightness so the task is learnable
            level = 40 + 50 * t_idx
            arr = rng.integers(level - 15, level + 15,
                               size=(size, size, 3)).astype(np.uint8)
            name = f"{t}_{i}.png"
            save_image(ImageU8.from_array(arr), tmp_path / name)
            entries.append(ManifestEntry(name, t, i % 4 + 1, f"M{i % 3 + 1}", 0.6))
    return entries


class TestSplit:
    def test_fold_sizes_216(self, tmp_path, rng):
        entries = _make_dataset(tmp_path, rng, per_class=72, size=4)
        split = stratified_kfold(entries, k=4, seed=0)
        assert len(split.eval_indices) == 72
        assert all(len(f) == 54 for f in split.folds)

    def test_eval_is_class_balanced(self, tmp_path, rng):
        entries = _make_dataset(tmp_path, rng, per_class=72, size=4)
        split = stratified_kfold(entries, k=4, seed=1)
        counts = {}
        for i in split.eval_indices:
            counts[entries[i].paris_type] = counts.get(entries[i].paris_type, 0) + 1
        assert counts == {"IP": 18, "IIA": 18, "IIC": 18, "LST": 18}

    def test_folds_partition_pool(self, tmp_path, rng):
        entries = _make_dataset(tmp_path, rng, per_class=10, size=4)
        split = stratified_kfold(entries, k=4, seed=2)
        all_idx = sorted(split.pool) + sorted(split.eval_indices)
        assert sorted(all_idx) == list(range(len(entries)))
        assert len(set(split.pool)) == len(split.pool)

    def test_small_class_rejected(self, tmp_path, rng):
        entries = _make_dataset(tmp_path, rng, per_class=3, size=4)
        with pytest.raises(ValueError):
            stratified_kfold(entries, k=4)


class TestTraining:
    def test_two_image_memorization(self, rng):
        net = DilatedResNet(DilatedResNetConfig(input_size=16, seed=0))
        x = rng.random((2, 3, 16, 16))
        y = np.array([0, 2])
        opt = AdaBound(lr=0.01, final_lr=0.1)
        loss = np.inf
        for step in range(200):
            loss, _ = net.loss_and_grads(x, y)
            if loss < 0.01:
                break
            opt.step(net.param_dict(), net.grad_dict())
        assert loss < 0.01

    def test_weights_round_trip(self, tmp_path, rng):
        net = DilatedResNet(DilatedResNetConfig(input_size=16, seed=7))
        save_weights(net, tmp_path / "w.weights")
        back = load_weights(tmp_path / "w.weights")
        for k, v in net.param_dict().items():
            np.testing.assert_array_equal(back.param_dict()[k], v)

    def test_train_deterministic(self, tmp_path, rng):
        entries = _make_dataset(tmp_path, rng, per_class=6, size=16)
        cfg = TrainConfig(epochs=2, batch_size=4, k=4, input_size=16, seed=11)
        rep_a, split_a = train(entries, tmp_path, cfg)
        rep_b, split_b = train(entries, tmp_path, cfg)
        assert split_a == split_b
        for fa, fb in zip(rep_a.folds, rep_b.folds):
            assert fa.val_accuracy == fb.val_accuracy
            for k in fa.weights:
                np.testing.assert_array_equal(fa.weights[k], fb.weights[k])
