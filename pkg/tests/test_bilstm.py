import numpy as np
import pytest
import torch

from temsa.models.bilstm import BiLstmConfig, BiLstmClassifier


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_direction_oracle(emb, w_ih, w_hh, b_ih, b_hh):
    """One direction of the recurrence in float64 numpy, torch gate order
    (input, forget, cell, output)."""
    hidden = w_hh.shape[1]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    for x_t in emb:
        z = w_ih @ x_t + b_ih + w_hh @ h + b_hh
        i = sigmoid(z[:hidden])
        f = sigmoid(z[hidden:2 * hidden])
        g = np.tanh(z[2 * hidden:3 * hidden])
        o = sigmoid(z[3 * hidden:])
        c = f * c + i * g
        h = o * np.tanh(c)
    return h


def param(model, name):
    return getattr(model.lstm, name).detach().numpy()


class TestRecurrenceOracle:

    def test_final_states_match_numpy(self):
        cfg = BiLstmConfig(vocab_size=11, hidden_units=3, embed_dim=4)
        torch.manual_seed(3)
        model = BiLstmClassifier(cfg).double().eval()
        indices = torch.tensor([[1, 5, 2, 9, 4]])
        with torch.no_grad():
            h_fwd, h_bwd = model.final_states(indices)
        emb = model.embedding.weight.detach().numpy()[indices[0].numpy()]
        fwd = lstm_direction_oracle(emb, param(model, "weight_ih_l0"),
                                    param(model, "weight_hh_l0"),
                                    param(model, "bias_ih_l0"),
                                    param(model, "bias_hh_l0"))
        bwd = lstm_direction_oracle(emb[::-1],
                                    param(model, "weight_ih_l0_reverse"),
                                    param(model, "weight_hh_l0_reverse"),
                                    param(model, "bias_ih_l0_reverse"),
                                    param(model, "bias_hh_l0_reverse"))
        assert np.allclose(h_fwd[0].numpy(), fwd, atol=1e-6)
        assert np.allclose(h_bwd[0].numpy(), bwd, atol=1e-6)

    def test_context_is_concat_of_finals(self):
        cfg = BiLstmConfig(vocab_size=9, hidden_units=5, embed_dim=4)
        torch.manual_seed(5)
        model = BiLstmClassifier(cfg).eval()
        indices = torch.tensor([[2, 3, 4], [5, 6, 0]])
        with torch.no_grad():
            h_fwd, h_bwd = model.final_states(indices)
            ctx = model.context(indices)
        assert ctx.shape == (2, 10)
        assert torch.allclose(ctx, torch.cat([h_fwd, h_bwd], dim=1))

    def test_reversal_swaps_directions(self):
        # Swapping the directional weights and reversing the input swaps
        # the forward and backward final states.
        cfg = BiLstmConfig(vocab_size=13, hidden_units=4, embed_dim=6)
        torch.manual_seed(7)
        a = BiLstmClassifier(cfg).eval()
        b = BiLstmClassifier(cfg).eval()
        with torch.no_grad():
            b.embedding.weight.copy_(a.embedding.weight)
            for name in ("weight_ih_l0", "weight_hh_l0", "bias_ih_l0",
                         "bias_hh_l0"):
                getattr(b.lstm, name).copy_(getattr(a.lstm, f"{name}_reverse"))
                getattr(b.lstm, f"{name}_reverse").copy_(getattr(a.lstm, name))
        indices = torch.tensor([[1, 7, 3, 12, 4, 2]])
        reversed_indices = torch.flip(indices, dims=[1])
        with torch.no_grad():
            a_fwd, a_bwd = a.final_states(indices)
            b_fwd, b_bwd = b.final_states(reversed_indices)
        assert torch.allclose(a_fwd, b_bwd, atol=1e-6)
        assert torch.allclose(a_bwd, b_fwd, atol=1e-6)


class TestClassifier:

    def test_output_shape_and_simplex(self):
        cfg = BiLstmConfig(vocab_size=30, hidden_units=8, embed_dim=12)
        torch.manual_seed(11)
        model = BiLstmClassifier(cfg).eval()
        batch = torch.randint(0, 30, (32, 21))
        with torch.no_grad():
            probs = model(batch)
        assert probs.shape == (32, 3)
        assert torch.allclose(probs.sum(dim=1), torch.ones(32), atol=1e-6)
        assert (probs >= 0).all()

    def test_zeroed_head_gives_uniform(self):
        cfg = BiLstmConfig(vocab_size=10, hidden_units=4, embed_dim=4)
        model = BiLstmClassifier(cfg).eval()
        with torch.no_grad():
            model.fc.weight.zero_()
            model.fc.bias.zero_()
            probs = model(torch.tensor([[1, 2, 3]]))
        assert torch.allclose(probs, torch.full((1, 3), 1 / 3), atol=1e-7)

    def test_eval_forward_is_repeatable(self):
        cfg = BiLstmConfig(vocab_size=12, hidden_units=4, embed_dim=4,
                           dropout=0.5)
        torch.manual_seed(13)
        model = BiLstmClassifier(cfg).eval()
        batch = torch.tensor([[1, 2, 3, 4]])
        with torch.no_grad():
            first = model(batch)
            second = model(batch)
        assert torch.equal(first, second)

    def test_index_range_checks(self):
        cfg = BiLstmConfig(vocab_size=5, hidden_units=2, embed_dim=3)
        model = BiLstmClassifier(cfg).eval()
        with pytest.raises(ValueError, match="out of range"):
            model(torch.tensor([[1, 5]]))
        with pytest.raises(ValueError, match="non-negative"):
            model(torch.tensor([[1, -1]]))

    def test_prepare_batch_casts_to_long(self):
        batch = BiLstmClassifier.prepare_batch(np.array([[1, 2], [3, 0]],
                                                        dtype=np.int32))
        assert batch.dtype == torch.int64


class TestEmbeddings:

    def test_pretrained_table_is_wired_in(self):
        cfg = BiLstmConfig(vocab_size=6, hidden_units=2, embed_dim=3)
        table = np.arange(18, dtype=np.float32).reshape(6, 3)
        model = BiLstmClassifier(cfg, pretrained_embeddings=table)
        assert np.allclose(model.embedding.weight.detach().numpy(), table)

    def test_wrong_table_shape_rejected(self):
        cfg = BiLstmConfig(vocab_size=6, hidden_units=2, embed_dim=3)
        with pytest.raises(ValueError, match="shape"):
            BiLstmClassifier(cfg, pretrained_embeddings=np.zeros((5, 3)))

    def test_padding_row_stays_zero_after_init(self):
        cfg = BiLstmConfig(vocab_size=8, hidden_units=2, embed_dim=4)
        model = BiLstmClassifier(cfg)
        assert torch.equal(model.embedding.weight[0], torch.zeros(4))


class TestConfig:

    def test_defaults(self):
        cfg = BiLstmConfig(vocab_size=100)
        assert cfg.hidden_units == 32
        assert cfg.embed_dim == 300
        assert cfg.num_classes == 3
        assert cfg.dropout == 0.1

    @pytest.mark.parametrize("kwargs", [
        {"vocab_size": 0},
        {"vocab_size": 10, "hidden_units": 0},
        {"vocab_size": 10, "embed_dim": -1},
        {"vocab_size": 10, "dropout": 1.5},
        {"vocab_size": 10, "num_classes": 1},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            BiLstmConfig(**kwargs)

    def test_as_dict_round_trip(self):
        cfg = BiLstmConfig(vocab_size=50, hidden_units=16)
        assert BiLstmConfig(**cfg.as_dict()) == cfg
