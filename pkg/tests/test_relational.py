import math

import numpy as np
import pytest

from scenesearch.embeddings import HashProvider, concat
from scenesearch.relational import (
    MlpModel,
    TrainConfig,
    WeightFormatError,
    grad_check,
    init_model,
    load_weights,
    loss_and_grads,
    save_weights,
    train,
)


def zero_model(relation="cooccur", dim=4, hidden=(3, 2)):
    model = init_model(relation, dim, hidden=hidden, seed=0)
    for w in model.weights:
        w[:] = 0.0
    for b in model.biases:
        b[:] = 0.0
    return model


class TestForward:
    def test_all_zero_parameters_score_half(self):
        model = zero_model()
        rng = np.random.default_rng(0)
        for _ in range(5):
            assert model.forward(rng.standard_normal(8)) == 0.5

    def test_hand_computed_tiny_network(self):
        # sizes [2, 1, 1, 1]; relu(0.5*1 + 0.25*(-2) + 0.1) = 0.1
        # second hidden: relu(2*0.1 - 0.05) = 0.15; logit = -1*0.15 + 0.4
        model = MlpModel(
            relation="contain",
            weights=[np.array([[0.5], [0.25]]), np.array([[2.0]]), np.array([[-1.0]])],
            biases=[np.array([0.1]), np.array([-0.05]), np.array([0.4])],
            embedding_dim=1,
        )
        expected = 1.0 / (1.0 + math.exp(-(-1.0 * 0.15 + 0.4)))
        assert model.forward(np.array([1.0, -2.0])) == pytest.approx(expected, abs=1e-12)

    def test_raising_output_bias_raises_score(self):
        model = init_model("cooccur", 4, hidden=(3, 2), seed=1)
        x = np.random.default_rng(2).standard_normal(8)
        before = model.forward(x)
        model.biases[-1][0] += 0.5
        assert model.forward(x) > before

    def test_scores_stay_strictly_inside_unit_interval(self):
        model = init_model("cooccur", 4, seed=3)
        rng = np.random.default_rng(4)
        batch = rng.standard_normal((64, 8)) * 50
        scores = model.forward(batch)
        assert np.all(scores > 0.0) and np.all(scores < 1.0)

    def test_dimension_mismatch_rejected(self):
        model = init_model("cooccur", 4, seed=0)
        with pytest.raises(ValueError, match="input dim"):
            model.forward(np.zeros(5))

    def test_unknown_relation_rejected(self):
        with pytest.raises(ValueError, match="relation"):
            init_model("sibling", 4)


class TestGradients:
    @pytest.mark.parametrize("loss", ["bce", "mse"])
    def test_grad_check_on_random_configurations(self, loss):
        rng = np.random.default_rng(42)
        for trial in range(6):
            dim = int(rng.integers(2, 6))
            hidden = (int(rng.integers(2, 8)), int(rng.integers(2, 8)))
            model = init_model("cooccur", dim, hidden=hidden, seed=trial)
            for b in model.biases:
                # keep pre-activations away from exact relu kinks, where
                # central differences measure the wrong one-sided slope
                b += rng.uniform(0.05, 0.2, size=b.shape)
            x = rng.standard_normal((4, 2 * dim))
            y = rng.random(4) if loss == "mse" else rng.integers(0, 2, size=4).astype(float)
            assert grad_check(model, x, y, loss) < 1e-4

    def test_zero_input_sample_is_finite(self):
        model = init_model("contain", 3, seed=9)
        error = grad_check(model, np.zeros((1, 6)), np.array([0.5]), "mse")
        assert math.isfinite(error)

    def test_bce_matches_reference_formula(self):
        model = zero_model()
        x = np.ones((2, 8))
        value, _, _ = loss_and_grads(model, x, np.array([1.0, 0.0]), "bce")
        assert value == pytest.approx(-math.log(0.5), abs=1e-12)

    def test_unknown_loss_rejected(self):
        model = zero_model()
        with pytest.raises(ValueError, match="loss"):
            loss_and_grads(model, np.zeros((1, 8)), np.zeros(1), "hinge")


def planted_linear_dataset(provider, n=200, seed=5):
    """Labels from a planted linear rule over concatenated hash embeddings."""
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(2 * provider.dim)
    rows = []
    for i in range(n):
        a = provider.embed(f"left {i}")
        b = provider.embed(f"right {i}")
        x = concat(a, b)
        rows.append((x, float(x @ direction > 0)))
    x = np.stack([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    return x, y


class TestTraining:
    def test_linearly_separable_cooccur_reaches_low_bce(self):
        provider = HashProvider(seed=1, dim=16)
        x, y = planted_linear_dataset(provider)
        model = init_model("cooccur", provider.dim, seed=0)
        result = train(model, x, y, config=TrainConfig(seed=0, max_epochs=500))
        assert result.train_losses[-1] < 0.1

    def test_constant_labels_saturate(self):
        provider = HashProvider(seed=2, dim=8)
        x = np.stack([concat(provider.embed(f"a {i}"), provider.embed("goal"))
                      for i in range(40)])
        y = np.ones(40)
        model = init_model("cooccur", provider.dim, seed=0)
        result = train(model, x, y, config=TrainConfig(seed=0, max_epochs=200))
        assert np.all(result.model.forward(x) >= 0.95)

    def test_contain_table_lookup_reaches_low_mse(self):
        provider = HashProvider(seed=3, dim=16)
        rng = np.random.default_rng(7)
        rows = [(f"room {i}", f"thing {j}", round(float(rng.random()), 3))
                for i in range(4) for j in range(25)]
        x = np.stack([concat(provider.embed(a), provider.embed(b)) for a, b, _ in rows])
        y = np.array([v for _, _, v in rows])
        model = init_model("contain", provider.dim, seed=0)
        result = train(model, x, y, config=TrainConfig(seed=0, max_epochs=500))
        assert result.train_losses[-1] < 0.01

    def test_training_is_deterministic(self):
        provider = HashProvider(seed=4, dim=8)
        x, y = planted_linear_dataset(provider, n=60, seed=6)
        losses = []
        for _ in range(2):
            model = init_model("cooccur", provider.dim, seed=11)
            result = train(model, x, y, config=TrainConfig(seed=11, max_epochs=40))
            losses.append(result.train_losses)
        assert losses[0] == losses[1]

    def test_early_stopping_restores_best_validation_weights(self):
        provider = HashProvider(seed=5, dim=8)
        x, y = planted_linear_dataset(provider, n=80, seed=8)
        model = init_model("cooccur", provider.dim, seed=0)
        result = train(model, x[:60], y[:60], x[60:], y[60:],
                       TrainConfig(seed=0, max_epochs=300, patience=10))
        from scenesearch.relational import evaluate_loss
        assert result.final_val_loss == pytest.approx(
            evaluate_loss(result.model, x[60:], y[60:], "bce"))

    def test_nan_loss_aborts_with_batch_index(self):
        model = init_model("cooccur", 2, seed=0)
        model.weights[0][0, 0] = np.nan
        x = np.ones((8, 4))
        y = np.zeros(8)
        with pytest.raises(FloatingPointError, match="batch 0"):
            train(model, x, y, config=TrainConfig(seed=0, max_epochs=1))

    def test_empty_data_rejected(self):
        model = init_model("cooccur", 2, seed=0)
        with pytest.raises(ValueError, match="empty"):
            train(model, np.zeros((0, 4)), np.zeros(0))


class TestWeightFiles:
    def test_round_trip_bit_exact(self, tmp_path):
        model = init_model("contain", 5, hidden=(7, 3), seed=13,
                           provider_fingerprint="hash:13:5")
        path = tmp_path / "w.bin"
        save_weights(model, path)
        loaded = load_weights(path)
        assert loaded.relation == "contain"
        assert loaded.embedding_dim == 5
        assert loaded.provider_fingerprint == "hash:13:5"
        for a, b in zip(model.weights, loaded.weights):
            assert a.tobytes() == b.tobytes()
        for a, b in zip(model.biases, loaded.biases):
            assert a.tobytes() == b.tobytes()

    def test_forward_agreement_after_round_trip(self, tmp_path):
        model = init_model("cooccur", 6, seed=17)
        path = tmp_path / "w.bin"
        save_weights(model, path)
        loaded = load_weights(path)
        rng = np.random.default_rng(18)
        for _ in range(100):
            x = rng.standard_normal(12)
            assert loaded.forward(x) == model.forward(x)

    def test_relation_slot_mismatch(self, tmp_path):
        model = init_model("contain", 4, seed=0)
        path = tmp_path / "w.bin"
        save_weights(model, path)
        with pytest.raises(WeightFormatError, match="relation tag"):
            load_weights(path, relation="cooccur")

    def test_embedding_dim_mismatch(self, tmp_path):
        model = init_model("contain", 4, seed=0)
        path = tmp_path / "w.bin"
        save_weights(model, path)
        with pytest.raises(WeightFormatError, match="dim"):
            load_weights(path, embedding_dim=8)

    def test_fingerprint_mismatch(self, tmp_path):
        model = init_model("contain", 4, seed=0, provider_fingerprint="hash:1:4")
        path = tmp_path / "w.bin"
        save_weights(model, path)
        with pytest.raises(WeightFormatError, match="fingerprint"):
            load_weights(path, provider_fingerprint="hash:2:4")

    def test_not_a_weight_file(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"JUNKJUNK")
        with pytest.raises(WeightFormatError, match="not a weight file"):
            load_weights(path)
