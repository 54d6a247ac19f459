import math

import numpy as np
import pytest

from mtforge.errors import ConfigError, DataError
from mtforge.moe import RouterConfig, gate_loss, gate_loss_grad, route, softmax_rows
from oracles import central_difference


def random_router(rng, max_tokens=64, max_experts=16):
    T = int(rng.integers(1, max_tokens + 1))
    E = int(rng.integers(2, max_experts + 1))
    cf = float(rng.uniform(0.25, 3.0))
    logits = rng.normal(size=(T, E)) * 3.0
    return logits, RouterConfig(num_experts=E, capacity_factor=cf)


class TestRoute:
    def test_uniform_logits_tie_break_and_ample_capacity(self):
        result = route(np.zeros((2, 2)), RouterConfig(num_experts=2, capacity_factor=2.0))
        for chosen in result.assignments:
            assert chosen == [(0, 0.5), (1, 0.5)]
        assert not result.dropped.any()

    def test_overflow_rescues_bumped_tokens_first(self):
        # All four tokens prefer expert 0; capacity 2. Tokens 0,1 hold
        # expert 0; tokens 2,3 take their second choice with weight 1.
        logits = np.array([[5.0, 0.0]] * 4)
        result = route(logits, RouterConfig(num_experts=2, capacity_factor=1.0))
        assert result.capacity == 2
        assert result.assignments[0] == [(0, 1.0)]
        assert result.assignments[1] == [(0, 1.0)]
        assert result.assignments[2] == [(1, 1.0)]
        assert result.assignments[3] == [(1, 1.0)]
        assert not result.dropped.any()
        assert result.expert_load.tolist() == [2, 2]

    def test_softmax_weights_single_token(self):
        result = route(np.array([[math.log(3.0), 0.0]]), RouterConfig(num_experts=2))
        np.testing.assert_allclose(result.gates, [[0.75, 0.25]], atol=1e-12)
        assert result.assignments[0] == [(0, 0.75), (1, 0.25)]

    def test_gates_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        logits, cfg = random_router(rng)
        result = route(logits, cfg)
        np.testing.assert_allclose(result.gates.sum(axis=1), 1.0, atol=1e-9)

    def test_capacity_never_exceeded(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            logits, cfg = random_router(rng)
            result = route(logits, cfg)
            C = math.ceil(cfg.capacity_factor * logits.shape[0] / cfg.num_experts)
            assert result.capacity == C
            assert result.expert_load.max() <= C

    def test_weights_sum_to_one_unless_dropped(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            logits, cfg = random_router(rng)
            result = route(logits, cfg)
            for t, chosen in enumerate(result.assignments):
                assert len(chosen) <= 2
                if result.dropped[t]:
                    assert chosen == []
                else:
                    assert sum(w for _, w in chosen) == pytest.approx(1.0, abs=1e-9)

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        logits, cfg = random_router(rng)
        shifted = logits + rng.normal(size=(logits.shape[0], 1))
        a = route(logits, cfg)
        b = route(shifted, cfg)
        assert a.assignments == [
            [(e, pytest.approx(w, abs=1e-9)) for e, w in chosen] for chosen in b.assignments
        ]
        assert (a.dropped == b.dropped).all()

    def test_nonfinite_rejected(self):
        with pytest.raises(DataError):
            route(np.array([[np.nan, 0.0]]), RouterConfig(num_experts=2))

    def test_expert_count_mismatch(self):
        with pytest.raises(ConfigError):
            route(np.zeros((1, 3)), RouterConfig(num_experts=2))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            RouterConfig(num_experts=1)
        with pytest.raises(ConfigError):
            RouterConfig(num_experts=4, top_k=3)
        with pytest.raises(ConfigError):
            RouterConfig(num_experts=4, capacity_factor=0.0)
        with pytest.raises(ConfigError):
            RouterConfig(num_experts=4, gate_loss_weight=-0.1)


class TestGateLoss:
    def test_uniform_balanced_is_one(self):
        for E in (2, 4, 8):
            gates = np.full((E, E), 1.0 / E)
            top1 = np.arange(E)
            assert gate_loss(gates, top1) == pytest.approx(1.0, abs=1e-9)

    def test_fully_collapsed_is_num_experts(self):
        for E in (2, 5):
            gates = np.zeros((6, E))
            gates[:, 0] = 1.0
            top1 = np.zeros(6, dtype=int)
            assert gate_loss(gates, top1) == pytest.approx(float(E), abs=1e-12)

    def test_label_permutation_symmetric(self):
        rng = np.random.default_rng(4)
        gates = softmax_rows(rng.normal(size=(10, 2)))
        top1 = np.argmax(gates, axis=1)
        swapped = gates[:, ::-1].copy()
        assert gate_loss(gates, top1) == pytest.approx(
            gate_loss(swapped, 1 - top1), abs=1e-12
        )

    def test_at_least_one_on_hard_assignments(self):
        # With one-hot gates the mean gate equals the top-1 fraction, so
        # l_aux = E * sum(f^2) >= 1 with equality only at perfect balance.
        rng = np.random.default_rng(5)
        for _ in range(100):
            T = int(rng.integers(1, 40))
            E = int(rng.integers(2, 9))
            top1 = rng.integers(0, E, size=T)
            gates = np.zeros((T, E))
            gates[np.arange(T), top1] = 1.0
            assert gate_loss(gates, top1) >= 1.0 - 1e-9

    def test_approaches_one_near_balance(self):
        E, reps = 4, 50
        gates = np.full((E * reps, E), 1.0 / E)
        top1 = np.tile(np.arange(E), reps)
        jitter = 1e-4 * np.sin(np.arange(E * reps * E)).reshape(E * reps, E)
        noisy = softmax_rows(np.log(gates) + jitter)
        assert gate_loss(noisy, top1) == pytest.approx(1.0, abs=1e-3)
        assert gate_loss(gates, top1) == pytest.approx(1.0, abs=1e-12)


class TestGateLossGrad:
    def test_rows_sum_to_zero(self):
        rng = np.random.default_rng(6)
        logits = rng.normal(size=(5, 4))
        grad = gate_loss_grad(logits)
        np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)

    def test_uniform_balanced_gradient_zero_rows(self):
        logits = np.zeros((4, 4))
        grad = gate_loss_grad(logits)
        # f is concentrated on expert 0 by the tie rule, but rows still sum to 0
        np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)

    def test_matches_central_differences(self):
        rng = np.random.default_rng(7)
        logits = rng.normal(size=(3, 4))
        gates = softmax_rows(logits)
        top1 = np.argmax(gates, axis=1)

        def loss(x):
            return gate_loss(softmax_rows(x), top1)

        fd = central_difference(loss, logits, step=1e-4)
        grad = gate_loss_grad(logits)
        denom = max(np.abs(fd).max(), 1e-12)
        assert np.abs(grad - fd).max() / denom < 1e-5

    def test_zero_weight_kills_contribution(self):
        cfg = RouterConfig(num_experts=2, gate_loss_weight=0.0)
        result = route(np.array([[1.0, 0.0], [0.5, 0.2]]), cfg)
        assert cfg.gate_loss_weight * result.aux_loss == 0.0
