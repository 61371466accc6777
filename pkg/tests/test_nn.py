import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sharpshooter import nn
from sharpshooter.errors import NumericError, ShapeError


def layer(w, b, act="identity", groups=()):
    return nn.DenseLayer(np.array(w, float), np.array(b, float), act, groups)


def random_net(rng, sizes, acts, groups=()):
    return nn.init_mlp(sizes, acts, rng, output_groups=groups)


class TestForward:
    def test_identity_layer(self):
        net = nn.MlpNetwork([layer(np.eye(3), np.zeros(3))])
        x = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(nn.forward(net, x), x)

    def test_zero_weights_emit_bias(self):
        net = nn.MlpNetwork([layer(np.zeros((2, 3)), [0.5, -1.0])])
        out = nn.forward(net, np.random.default_rng(0).normal(size=(4, 3)))
        np.testing.assert_array_equal(out, np.tile([0.5, -1.0], (4, 1)))

    def test_by_hand_matmul(self):
        net = nn.MlpNetwork([layer([[1, 2], [3, 4]], [0, 0])])
        np.testing.assert_array_equal(nn.forward(net, [[1.0, 1.0]]), [[3.0, 7.0]])

    def test_shape_mismatch(self):
        net = nn.MlpNetwork([layer(np.eye(2), np.zeros(2))])
        with pytest.raises(ShapeError):
            nn.forward(net, np.zeros((1, 3)))

    def test_layers_must_chain(self):
        with pytest.raises(ShapeError):
            nn.MlpNetwork([layer(np.eye(2), np.zeros(2)), layer(np.eye(3), np.zeros(3))])

    def test_non_finite_reports_layer(self):
        net = nn.MlpNetwork([layer([[1e308]], [0.0]), layer([[10.0]], [0.0])])
        with pytest.raises(NumericError) as info:
            nn.forward(net, [[1.0]])
        assert info.value.layer == 1

    @given(st.integers(0, 10_000))
    def test_softmax_groups_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        net = random_net(rng, [3, 5, 7], ["tanh", "softmax-grouped"], groups=((1, 4), (4, 7)))
        out = nn.forward(net, rng.normal(size=(5, 3)) * 5)
        for lo, hi in ((1, 4), (4, 7)):
            np.testing.assert_allclose(out[:, lo:hi].sum(axis=1), 1.0, atol=1e-9)

    def test_forward_is_deterministic(self):
        rng = np.random.default_rng(3)
        net = random_net(rng, [4, 8, 2], ["relu", "sigmoid"])
        x = rng.normal(size=(10, 4))
        assert np.array_equal(nn.forward(net, x), nn.forward(net, x.copy()))

    def test_overlapping_groups_rejected(self):
        with pytest.raises(ValueError):
            layer(np.eye(4), np.zeros(4), "softmax-grouped", ((0, 3), (2, 4)))


class TestBackprop:
    def test_zero_loss_gradient_gives_zero_grads(self):
        rng = np.random.default_rng(0)
        net = random_net(rng, [3, 4, 2], ["tanh", "identity"])
        x = rng.normal(size=(5, 3))
        targets = nn.forward(net, x)
        _, grads = nn.loss_and_grads(net, x, targets, "mse")
        assert all(np.all(g == 0) for g in grads)

    def test_single_neuron_mse_closed_form(self):
        w, b, x, y = 0.7, -0.2, 1.5, 2.0
        net = nn.MlpNetwork([layer([[w]], [b])])
        _, grads = nn.loss_and_grads(net, [[x]], [[y]], "mse")
        yhat = w * x + b
        assert grads[0][0, 0] == pytest.approx(2 * (yhat - y) * x, rel=1e-12)
        assert grads[1][0] == pytest.approx(2 * (yhat - y), rel=1e-12)

    @pytest.mark.parametrize("loss,acts,groups", [
        ("mse", ["tanh", "identity"], ()),
        ("bce", ["sigmoid", "sigmoid"], ()),
        ("categorical", ["tanh", "softmax-grouped"], ((0, 2), (2, 5))),
    ])
    def test_random_nets_match_finite_differences(self, loss, acts, groups):
        rng = np.random.default_rng(11)
        for _ in range(3):
            net = random_net(rng, [3, 6, 5], acts, groups)
            x = rng.normal(size=(4, 3))
            if loss == "categorical":
                t = np.zeros((4, 5))
                t[np.arange(4), rng.integers(0, 2, 4)] = 1
                t[np.arange(4), 2 + rng.integers(0, 3, 4)] = 1
            elif loss == "bce":
                t = rng.integers(0, 2, size=(4, 5)).astype(float)
            else:
                t = rng.normal(size=(4, 5))
            assert nn.grad_check(net, loss, x, t).max_rel_dev < 1e-4

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        net = random_net(rng, [3, 5, 1], ["tanh", "sigmoid"])
        x = rng.normal(size=(1, 3))
        out, cache = nn.forward(net, x, return_cache=True)
        _, gx = nn.backward(net, cache, np.ones_like(out))
        h = 1e-6
        for k in range(3):
            e = np.zeros((1, 3))
            e[0, k] = h
            num = (nn.forward(net, x + e) - nn.forward(net, x - e))[0, 0] / (2 * h)
            assert gx[0, k] == pytest.approx(num, rel=1e-6)


class TestGradCheck:
    def test_linear_mse_is_tight(self):
        rng = np.random.default_rng(5)
        net = random_net(rng, [4, 3], ["identity"])
        report = nn.grad_check(net, "mse", rng.normal(size=(6, 4)), rng.normal(size=(6, 3)))
        assert report.max_rel_dev < 1e-6

    def test_zero_gradient_configuration(self):
        net = nn.MlpNetwork([layer(np.zeros((1, 2)), [0.0])])
        report = nn.grad_check(net, "mse", np.zeros((3, 2)), np.zeros((3, 1)))
        assert report.max_rel_dev == 0.0

    def test_deep_tanh_net(self):
        rng = np.random.default_rng(6)
        net = random_net(rng, [3, 8, 8, 2], ["tanh", "tanh", "identity"])
        report = nn.grad_check(net, "mse", rng.normal(size=(5, 3)), rng.normal(size=(5, 2)))
        assert report.passed and report.max_rel_dev < 1e-4

    def test_rejects_bad_eps(self):
        net = nn.MlpNetwork([layer([[1.0]], [0.0])])
        with pytest.raises(ValueError):
            nn.grad_check(net, "mse", [[1.0]], [[1.0]], eps=0.0)

    def test_params_restored(self):
        rng = np.random.default_rng(7)
        net = random_net(rng, [2, 3, 1], ["tanh", "identity"])
        before = [p.copy() for p in net.params()]
        nn.grad_check(net, "mse", rng.normal(size=(3, 2)), rng.normal(size=(3, 1)))
        assert all(np.array_equal(a, b) for a, b in zip(before, net.params()))


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        p = [np.array([1.0, -2.0]), np.array([[0.5]])]
        before = [a.copy() for a in p]
        state = nn.AdamState(lr=0.1)
        for _ in range(3):
            nn.adam_step(p, [np.zeros(2), np.zeros((1, 1))], state)
        assert all(np.array_equal(a, b) for a, b in zip(p, before))
        assert state.step == 3

    def test_first_step_closed_form(self):
        p = [np.array([0.0])]
        nn.adam_step(p, [np.array([1.0])], nn.AdamState(lr=0.01))
        # m_hat = 1, v_hat = 1 -> update = -lr / (1 + eps)
        assert p[0][0] == pytest.approx(-0.01 / (1 + 1e-8), rel=1e-12)

    def test_two_steps_monotone(self):
        p = [np.array([0.0])]
        state = nn.AdamState(lr=0.01)
        nn.adam_step(p, [np.array([1.0])], state)
        first = p[0][0]
        nn.adam_step(p, [np.array([1.0])], state)
        # constant gradient keeps m_hat / sqrt(v_hat) = 1
        assert p[0][0] < first < 0.0
        assert p[0][0] == pytest.approx(-0.02, rel=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            nn.adam_step([np.zeros(2)], [np.zeros(3)], nn.AdamState())


def test_serialization_round_trip_is_bit_exact():
    rng = np.random.default_rng(9)
    net = random_net(rng, [3, 4, 5], ["relu", "softmax-grouped"], groups=((0, 2), (2, 5)))
    text = json.dumps(nn.network_to_dict(net))
    back = nn.network_from_dict(json.loads(text))
    for a, b in zip(net.params(), back.params()):
        assert np.array_equal(a, b)
    assert back.layers[1].groups == ((0, 2), (2, 5))
    x = rng.normal(size=(2, 3))
    assert np.array_equal(nn.forward(net, x), nn.forward(back, x))


def test_unknown_format_version():
    with pytest.raises(ValueError):
        nn.network_from_dict({"version": 99, "layers": []})
