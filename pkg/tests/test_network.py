import numpy as np
import pytest

from scoremorph.network import (AdamState, LocalizerNet, StaleTapeError,
                                adam_step, zero_grads_like)


def toy_net():
    # single hidden unit: g = w2 * relu(w1*x + b1) + b2 with w1=1, b1=0,
    # w2=2, b2=1
    return LocalizerNet([np.array([[1.0]]), np.array([[2.0]])],
                        [np.array([0.0]), np.array([1.0])])


def test_init_deterministic_and_shapes():
    a = LocalizerNet.init(3, seed=42)
    b = LocalizerNet.init(3, seed=42)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert a.layer_dims == [3, 100, 100, 100, 100, 100, 1]
    assert a.weights[0].shape == (100, 3)


def test_init_d1_first_layer_shape():
    assert LocalizerNet.init(1, seed=0).weights[0].shape == (100, 1)


def test_init_fan_in_bound():
    net = LocalizerNet.init(4, seed=7)
    dims = [4, 100, 100, 100, 100, 100]
    for w, fan_in in zip(net.weights, dims):
        assert np.abs(w).max() <= 1.0 / np.sqrt(fan_in)
    for b in net.biases:
        assert np.array_equal(b, np.zeros_like(b))


def test_forward_zero_weights_gives_zero():
    net = LocalizerNet.init(2, seed=0)
    net.weights = [np.zeros_like(w) for w in net.weights]
    net.biases = [np.zeros_like(b) for b in net.biases]
    g, _ = net.forward(np.array([3.0, -1.0]))
    assert g == 0.0


def test_forward_toy_hand_values():
    net = toy_net()
    g, _ = net.forward(np.array([3.0]))
    assert g == pytest.approx(7.0)  # 2*relu(3)+1
    g, _ = net.forward(np.array([-3.0]))
    assert g == pytest.approx(1.0)  # 2*relu(-3)+1


def test_forward_dimension_mismatch():
    net = toy_net()
    with pytest.raises(ValueError):
        net.forward(np.array([1.0, 2.0]))


def test_backward_toy_hand_chain_rule():
    net = toy_net()
    _, tape = net.forward(np.array([3.0]))
    grads = net.backward(tape, 1.0)
    (dw1, db1), (dw2, db2) = grads
    assert dw2[0, 0] == pytest.approx(3.0)  # relu(3)
    assert db2[0] == pytest.approx(1.0)
    assert dw1[0, 0] == pytest.approx(6.0)  # 2*3
    assert db1[0] == pytest.approx(2.0)


def test_backward_zero_upstream():
    net = LocalizerNet.init(2, seed=1)
    _, tape = net.forward(np.array([0.5, 0.5]))
    for dw, db in net.backward(tape, 0.0):
        assert not dw.any()
        assert not db.any()


def test_backward_stale_tape():
    net = LocalizerNet.init(2, seed=1)
    _, tape = net.forward(np.array([0.5, 0.5]))
    state = AdamState.init(net)
    _, tape2 = net.forward(np.array([0.5, 0.5]))
    grads = net.backward(tape2, 1.0)
    adam_step(net, grads, state)
    with pytest.raises(StaleTapeError):
        net.backward(tape, 1.0)


def pre_activation_margin(net, x):
    _, tape = net.forward(np.asarray(x, dtype=float))
    return min(np.abs(z).min() for z in tape.pre_acts)


def sample_off_kink(seed, d=3, margin=1e-3):
    """Random (net, x) with hidden pre-activations bounded away from 0.

    Deep-layer pre-activations shrink under fan-in init, so only ~1% of
    draws clear the margin; keep sampling until one does.
    """
    rng = np.random.default_rng(seed)
    for _ in range(6000):
        net = LocalizerNet.init(d, seed=int(rng.integers(1 << 31)))
        x = rng.normal(size=d)
        if pre_activation_margin(net, x) >= margin:
            return net, x
    raise RuntimeError("no off-kink sample found")


def fd_gradient_subset(net, x, picks, step=1e-5):
    """Central finite differences on a parameter subset (oracle)."""
    out = []
    for layer, which, index in picks:
        arr = net.weights[layer] if which == "w" else net.biases[layer]
        orig = arr[index]
        arr[index] = orig + step
        up = net.value(x)
        arr[index] = orig - step
        down = net.value(x)
        arr[index] = orig
        out.append((up - down) / (2 * step))
    return np.asarray(out)


def random_param_picks(net, rng, count):
    picks = []
    for _ in range(count):
        layer = int(rng.integers(len(net.weights)))
        if rng.random() < 0.8:
            w = net.weights[layer]
            idx = (int(rng.integers(w.shape[0])), int(rng.integers(w.shape[1])))
            picks.append((layer, "w", idx))
        else:
            b = net.biases[layer]
            picks.append((layer, "b", (int(rng.integers(b.shape[0])),)))
    return picks


def test_gradient_matches_finite_differences_full_architecture():
    # 20 off-kink (net, x) pairs; 12 randomly chosen parameters each
    rng = np.random.default_rng(2024)
    for trial in range(20):
        net, x = sample_off_kink(seed=trial)
        _, tape = net.forward(x)
        grads = net.backward(tape, 1.0)
        picks = random_param_picks(net, rng, 12)
        fd = fd_gradient_subset(net, x, picks)
        analytic = []
        for layer, which, index in picks:
            g = grads[layer][0 if which == "w" else 1]
            analytic.append(g[index])
        analytic = np.asarray(analytic)
        denom = np.maximum(np.maximum(np.abs(fd), np.abs(analytic)), 1e-8)
        assert (np.abs(fd - analytic) / denom).max() <= 1e-5


def test_gradient_matches_exhaustive_fd_small_net():
    rng = np.random.default_rng(77)
    net = LocalizerNet.init(2, seed=5, hidden=(4, 3))
    x = rng.normal(size=2)
    assert pre_activation_margin(net, x) > 1e-3
    _, tape = net.forward(x)
    grads = net.backward(tape, 1.0)
    step = 1e-5
    for layer in range(len(net.weights)):
        for which in ("w", "b"):
            arr = net.weights[layer] if which == "w" else net.biases[layer]
            ga = grads[layer][0 if which == "w" else 1]
            for index in np.ndindex(arr.shape):
                orig = arr[index]
                arr[index] = orig + step
                up = net.value(x)
                arr[index] = orig - step
                down = net.value(x)
                arr[index] = orig
                fd = (up - down) / (2 * step)
                assert abs(fd - ga[index]) <= 1e-6 * max(1.0, abs(fd))


def test_batch_backward_matches_sum_of_singles():
    net = LocalizerNet.init(3, seed=9)
    xs = np.random.default_rng(1).normal(size=(5, 3))
    upstream = np.array([0.3, -1.0, 2.0, 0.0, 1.5])
    _, tape = net.forward_batch(xs)
    batch_grads = net.backward_batch(tape, upstream)
    acc = zero_grads_like(net)
    for i in range(5):
        _, t = net.forward(xs[i])
        for (aw, ab), (gw, gb) in zip(acc, net.backward(t, upstream[i])):
            aw += gw
            ab += gb
    for (bw, bb), (aw, ab) in zip(batch_grads, acc):
        assert np.allclose(bw, aw, atol=1e-12)
        assert np.allclose(bb, ab, atol=1e-12)


def test_output_bias_shift():
    net = LocalizerNet.init(2, seed=3)
    x = np.array([0.4, -0.2])
    before = net.value(x)
    net.biases[-1] = net.biases[-1] + 2.5
    assert net.value(x) == pytest.approx(before + 2.5, abs=1e-12)


def scalar_adam_oracle(grad_seq, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    theta, m, v = 0.0, 0.0, 0.0
    path = []
    for t, g in enumerate(grad_seq, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        path.append(theta)
    return path


def test_adam_single_step_matches_scalar_oracle():
    net = LocalizerNet([np.array([[0.0]])], [np.array([0.0])])
    state = AdamState.init(net, learning_rate=1e-3)
    grads = [(np.array([[1.0]]), np.array([0.0]))]
    adam_step(net, grads, state)
    expected = scalar_adam_oracle([1.0])[0]
    assert net.weights[0][0, 0] == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(-9.99999990e-4, rel=1e-6)
    assert state.step == 1


def test_adam_sequence_matches_scalar_oracle():
    net = LocalizerNet([np.array([[0.0]])], [np.array([0.0])])
    state = AdamState.init(net, learning_rate=1e-3)
    seq = [1.0, 0.5, -0.2, 0.9]
    path = scalar_adam_oracle(seq)
    for g, expected in zip(seq, path):
        adam_step(net, [(np.array([[g]]), np.array([0.0]))], state)
        assert net.weights[0][0, 0] == pytest.approx(expected, abs=1e-14)


def test_adam_zero_gradient_keeps_parameters():
    net = LocalizerNet.init(2, seed=4)
    before = net.snapshot()
    state = AdamState.init(net)
    adam_step(net, zero_grads_like(net), state)
    for w, w0 in zip(net.weights, before[0]):
        assert np.array_equal(w, w0)


def test_adam_constant_positive_gradient_decreases_parameter():
    net = LocalizerNet([np.array([[1.0]])], [np.array([0.0])])
    state = AdamState.init(net)
    values = [net.weights[0][0, 0]]
    for _ in range(3):
        adam_step(net, [(np.array([[1.0]]), np.array([0.0]))], state)
        values.append(net.weights[0][0, 0])
    assert all(b < a for a, b in zip(values, values[1:]))


def test_adam_rejects_nan_gradient():
    net = LocalizerNet.init(2, seed=4)
    state = AdamState.init(net)
    grads = zero_grads_like(net)
    grads[0][0][0, 0] = np.nan
    with pytest.raises(ValueError, match="NaN"):
        adam_step(net, grads, state)
