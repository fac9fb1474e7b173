import itertools
import math

import numpy as np
import pytest

from shipcrbm.crbm import (
    CrbmModel,
    TrainConfig,
    cd_update,
    dynamic_biases,
    encode,
    free_energy,
    free_energy_grad,
    hidden_probs,
    simulate_reconstruction,
    train,
    visible_means,
)
from shipcrbm.errors import DivergenceError, ValidationError
from shipcrbm.window import NormStats


def random_model(n_v, n_h, n, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    return CrbmModel(rng.normal(0, scale, (n_v, n_h)), rng.normal(0, scale, (n * n_v, n_v)),
                     rng.normal(0, scale, (n * n_v, n_h)), rng.normal(0, scale, n_h),
                     rng.normal(0, scale, n_v))


def ar_series(length, n_v=3, seed=0):
    """Smooth multivariate series: damped AR(1) driven by two sinusoids."""
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    base = np.column_stack([np.sin(2 * np.pi * t / 50), np.cos(2 * np.pi * t / 80),
                            np.sin(2 * np.pi * t / 30 + 1)])[:, :n_v]
    x = np.zeros((length, n_v))
    for i in range(1, length):
        x[i] = 0.7 * x[i - 1] + base[i] + 0.05 * rng.normal(size=n_v)
    return (x - x.mean(axis=0)) / x.std(axis=0)


def windows_of(series, n):
    frames = series[n:]
    hist = np.stack([series[i - n:i].reshape(-1) for i in range(n, len(series))])
    return frames, hist


class TestDynamicBiases:
    def test_unconditioned_reduces_to_static(self):
        m = random_model(3, 4, 2)
        m.A[:] = 0
        m.D[:] = 0
        c_hat, b_hat = dynamic_biases(m, np.ones(6))
        np.testing.assert_array_equal(c_hat, m.c)
        np.testing.assert_array_equal(b_hat, m.b)

    def test_zero_history(self):
        m = random_model(3, 4, 2)
        c_hat, b_hat = dynamic_biases(m, np.zeros(6))
        np.testing.assert_array_equal(c_hat, m.c)
        np.testing.assert_array_equal(b_hat, m.b)

    def test_hand_example(self):
        m = CrbmModel([[0.0]], [[2.0]], [[3.0]], [0.0], [1.0])
        c_hat, b_hat = dynamic_biases(m, [0.5])
        assert c_hat.tolist() == [2.0] and b_hat.tolist() == [1.5]

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            dynamic_biases(random_model(3, 4, 2), np.zeros(5))


class TestConditionals:
    def test_zero_model_half(self):
        np.testing.assert_array_equal(hidden_probs(CrbmModel.zeros(3, 5, 2), np.ones(3), np.ones(6)),
                                      np.full(5, 0.5))

    def test_saturation(self):
        m = CrbmModel.zeros(1, 1, 1)
        m.b[:] = 30
        assert hidden_probs(m, [0.0], [0.0])[0] > 1 - 1e-9

    def test_scalar_case(self):
        m = CrbmModel([[1.0], [1.0]], np.zeros((2, 2)), np.zeros((2, 1)), [0.0], [0.0, 0.0])
        assert hidden_probs(m, [1, 1], [0, 0])[0] == pytest.approx(0.8807970779778823, abs=1e-12)

    def test_visible_means(self):
        m = CrbmModel([[0.5, -0.5]], [[0.0]], [[0.0, 0.0]], [0.0, 0.0], [0.1])
        assert visible_means(m, [1, 1], [0.0]).tolist() == pytest.approx([0.1])
        m0 = random_model(3, 4, 2)
        m0.W[:] = 0
        np.testing.assert_allclose(visible_means(m0, [1, 0, 1, 1], np.ones(6)),
                                   dynamic_biases(m0, np.ones(6))[0])
        np.testing.assert_allclose(visible_means(random_model(3, 4, 2), np.zeros(4), np.ones(6)),
                                   dynamic_biases(random_model(3, 4, 2), np.ones(6))[0])


def brute_force_neg_log_marginal(m, v, hist):
    """-log sum_h exp(-E(v, h)) by enumerating every binary hidden configuration."""
    c_hat = m.c + hist @ m.A
    b_hat = m.b + hist @ m.D
    energies = []
    for bits in itertools.product((0.0, 1.0), repeat=m.n_h):
        h = np.array(bits)
        energies.append(0.5 * np.sum((v - c_hat) ** 2) - b_hat @ h - v @ m.W @ h)
    e = -np.array(energies)
    top = e.max()
    return -(top + math.log(np.exp(e - top).sum()))


class TestFreeEnergy:
    def test_zero_model_zero_visible(self):
        assert free_energy(CrbmModel.zeros(3, 4, 2), np.zeros(3), np.zeros(6)) == pytest.approx(-4 * math.log(2))

    def test_zero_model_arbitrary_visible(self):
        v = np.array([0.3, -1.2, 2.0])
        assert free_energy(CrbmModel.zeros(3, 4, 2), v, np.ones(6)) == pytest.approx(
            0.5 * (v ** 2).sum() - 4 * math.log(2))

    @pytest.mark.parametrize("n_h", [1, 4, 10])
    def test_matches_hidden_enumeration(self, n_h):
        m = random_model(3, n_h, 2, seed=n_h)
        rng = np.random.default_rng(1)
        diffs = []
        for _ in range(5):
            v, hist = rng.normal(size=3), rng.normal(size=6)
            diffs.append(free_energy(m, v, hist) - brute_force_neg_log_marginal(m, v, hist))
        assert np.ptp(diffs) < 1e-8

    def test_batch_matches_rows(self):
        m = random_model(3, 4, 2)
        rng = np.random.default_rng(2)
        V, H = rng.normal(size=(5, 3)), rng.normal(size=(5, 6))
        np.testing.assert_allclose(free_energy(m, V, H), [free_energy(m, v, h) for v, h in zip(V, H)])


def test_free_energy_gradients_match_finite_differences():
    m = random_model(2, 3, 2, seed=3)
    rng = np.random.default_rng(4)
    V, H = rng.normal(size=(4, 2)), rng.normal(size=(4, 4))
    grad = free_energy_grad(m, V, H)
    eps = 1e-5
    for name, param in m.params().items():
        for idx in np.ndindex(param.shape):
            orig = param[idx]
            param[idx] = orig + eps
            up = free_energy(m, V, H).mean()
            param[idx] = orig - eps
            down = free_energy(m, V, H).mean()
            param[idx] = orig
            assert abs((up - down) / (2 * eps) - grad[name][idx]) < 1e-6, (name, idx)


class TestCdUpdate:
    def setup_method(self):
        series = ar_series(300)
        self.frames, self.hist = windows_of(series, 2)
        self.model = CrbmModel.initialize(3, 5, 2, seed=0)

    def test_zero_learning_rate_is_identity(self):
        cfg = TrainConfig(learning_rate=0.0)
        new, mse = cd_update(self.model, (self.frames, self.hist), cfg)
        for name, p in self.model.params().items():
            np.testing.assert_array_equal(getattr(new, name), p)
        assert mse > 0

    def test_duplicated_batch_same_update(self):
        cfg = TrainConfig(learning_rate=0.01, sample_hidden=False)
        a, _ = cd_update(self.model, (self.frames, self.hist), cfg)
        b, _ = cd_update(self.model, (np.vstack([self.frames] * 2), np.vstack([self.hist] * 2)), cfg)
        for name in a.params():
            np.testing.assert_allclose(getattr(a, name), getattr(b, name), rtol=1e-12, atol=1e-15)

    def test_deterministic_given_seed(self):
        cfg = TrainConfig(learning_rate=0.01, seed=11)
        a, ma = cd_update(self.model, (self.frames, self.hist), cfg)
        b, mb = cd_update(self.model, (self.frames, self.hist), cfg)
        assert ma == mb
        for name in a.params():
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()

    def test_divergence_raises(self):
        cfg = TrainConfig(learning_rate=1e300, momentum=0.0, weight_decay=0.0)
        with pytest.raises(DivergenceError):
            cd_update(random_model(3, 5, 2, scale=5.0), (self.frames * 1e10, self.hist), cfg)

    def test_frozen_history_keeps_a_and_d(self):
        cfg = TrainConfig(learning_rate=0.1, freeze_history=True)
        new, _ = cd_update(self.model, (self.frames, self.hist), cfg)
        np.testing.assert_array_equal(new.A, self.model.A)
        np.testing.assert_array_equal(new.D, self.model.D)
        assert not np.array_equal(new.W, self.model.W)


class TestTrain:
    def test_zero_epochs(self):
        m = CrbmModel.initialize(3, 4, 2, seed=1)
        out, curve = train(m, (np.ones((5, 3)), np.ones((5, 6))), TrainConfig(epochs=0))
        assert curve == []
        for name, p in m.params().items():
            np.testing.assert_array_equal(getattr(out, name), p)

    def test_ar_series_learning_halves_error(self):
        frames, hist = windows_of(ar_series(1200, seed=5), 5)
        cfg = TrainConfig(epochs=50, batch_size=64, learning_rate=1e-3, seed=2)
        _, curve = train(CrbmModel.initialize(3, 10, 5, seed=2), (frames, hist), cfg)
        assert len(curve) == 50
        assert curve[-1] < 0.5 * curve[0]

    def test_full_batch_single_step_per_epoch(self):
        frames, hist = windows_of(ar_series(100), 2)
        m = CrbmModel.initialize(3, 4, 2, seed=3)
        cfg = TrainConfig(epochs=1, batch_size=10_000, learning_rate=0.01, sample_hidden=False)
        out, _ = train(m, (frames, hist), cfg)
        ref, _ = cd_update(m, (frames, hist), cfg)
        for name in out.params():
            np.testing.assert_allclose(getattr(out, name), getattr(ref, name), atol=1e-14)

    def test_deterministic(self):
        frames, hist = windows_of(ar_series(200), 3)
        cfg = TrainConfig(epochs=3, batch_size=16, seed=9)
        a, ca = train(CrbmModel.initialize(3, 4, 3, seed=1), (frames, hist), cfg)
        b, cb = train(CrbmModel.initialize(3, 4, 3, seed=1), (frames, hist), cfg)
        assert ca == cb and a.W.tobytes() == b.W.tobytes()

    def test_gaussian_noise_plateaus_near_unit_error(self):
        rng = np.random.default_rng(0)
        frames, hist = rng.normal(size=(3000, 3)), rng.normal(size=(3000, 6))
        m = CrbmModel.initialize(3, 10, 2, seed=0)
        m.A[:] = 0
        m.D[:] = 0
        cfg = TrainConfig(epochs=30, batch_size=64, seed=1, freeze_history=True)
        out, curve = train(m, (frames, hist), cfg)
        assert 0.85 < curve[-1] < 1.15
        assert not out.A.any() and not out.D.any()


class TestEncodeAndSimulate:
    def test_zero_model_encodes_half(self):
        np.testing.assert_array_equal(encode(CrbmModel.zeros(3, 10, 2), (np.ones((2, 3)), np.ones((2, 6)))),
                                      np.full((2, 10), 0.5))

    def test_encode_deterministic_and_sized(self):
        m = CrbmModel.initialize(3, 10, 20, seed=0)
        rng = np.random.default_rng(0)
        batch = (rng.normal(size=(4, 3)), rng.normal(size=(4, 60)))
        a = encode(m, batch)
        assert a.shape == (4, 10)
        np.testing.assert_array_equal(a, encode(m, batch))

    def test_constant_series_reconstructed(self):
        frames = np.tile([1.0, -0.5, 0.25], (400, 1))
        hist = np.tile([1.0, -0.5, 0.25] * 2, (400, 1))
        cfg = TrainConfig(epochs=150, batch_size=40, learning_rate=0.01, seed=0, sample_hidden=False)
        m, _ = train(CrbmModel.initialize(3, 3, 2, seed=0), (frames, hist), cfg)
        assert simulate_reconstruction(m, (frames, hist)) < 1e-2

    def test_zero_model_error_is_variance(self):
        rng = np.random.default_rng(0)
        frames = rng.normal(size=(20000, 3))
        mse = simulate_reconstruction(CrbmModel.zeros(3, 4, 1), (frames, rng.normal(size=(20000, 3))))
        assert mse == pytest.approx(1.0, abs=0.03)

    def test_single_window(self):
        m = random_model(3, 4, 2)
        rng = np.random.default_rng(5)
        v, h = rng.normal(size=(1, 3)), rng.normal(size=(1, 6))
        recon = visible_means(m, hidden_probs(m, v, h), h)
        assert simulate_reconstruction(m, (v, h)) == pytest.approx(float(np.mean((v - recon) ** 2)))

    def test_empty_windows(self):
        with pytest.raises(ValidationError):
            simulate_reconstruction(CrbmModel.zeros(3, 2, 1), (np.empty((0, 3)), np.empty((0, 3))))


def test_model_json_roundtrip(tmp_path):
    m = random_model(3, 4, 2)
    m.norm_stats = NormStats(np.array([1.0, 2.0, 3.0]), np.array([0.5, 1.0, 2.0]))
    path = tmp_path / "m.json"
    m.save(path)
    back = CrbmModel.load(path)
    assert (back.n_v, back.n_h, back.n) == (3, 4, 2)
    for name, p in m.params().items():
        np.testing.assert_array_equal(getattr(back, name), p)
    np.testing.assert_array_equal(back.norm_stats.std, m.norm_stats.std)


def test_inconsistent_shapes_rejected():
    with pytest.raises(ValidationError):
        CrbmModel(np.zeros((3, 4)), np.zeros((6, 3)), np.zeros((6, 5)), np.zeros(4), np.zeros(3))
