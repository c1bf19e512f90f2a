import numpy as np
import pytest

from satnetsim.routing import neural


def reference_forward(model, x):
    # independent straightforward re-implementation (loop arithmetic)
    out = []
    for row in np.atleast_2d(x):
        a = row
        for l, (w, b) in enumerate(zip(model.weights, model.biases)):
            z = np.array([np.dot(w[i], a) + b[i] for i in range(w.shape[0])])
            a = z if l == len(model.weights) - 1 else np.where(z > 0, z, 0.0)
        out.append(a)
    return np.array(out)


def reference_loss(model, states, actions, targets):
    q = reference_forward(model, states)
    err = q[np.arange(len(states)), actions] - targets
    return float(np.mean(err**2))


def make_model(sizes=(25, 64, 64, 5), seed=0):
    return neural.init_mlp(sizes, np.random.default_rng(seed))


def test_forward_zero_model_outputs_zero():
    m = make_model()
    for w in m.weights:
        w[:] = 0.0
    assert np.all(neural.forward(m, np.ones(25)) == 0.0)


def test_forward_identity_single_path():
    # one input, one hidden unit wired straight through
    m = neural.MlpModel(
        weights=[np.array([[1.0]]), np.array([[1.0]])],
        biases=[np.zeros(1), np.zeros(1)],
    )
    for v in (0.3, 1.7, 4.0):
        assert neural.forward(m, np.array([v]))[0] == pytest.approx(v)
    # rectifier blocks the negative branch
    assert neural.forward(m, np.array([-2.0]))[0] == 0.0


def test_forward_matches_reference_implementation():
    rng = np.random.default_rng(42)
    m = make_model(seed=3)
    x = rng.normal(size=(16, 25))
    got = neural.forward(m, x)
    ref = reference_forward(m, x)
    assert np.max(np.abs(got - ref) / np.maximum(1e-300, np.abs(ref))) < 1e-12


def test_forward_dimension_mismatch_raises():
    m = make_model()
    with pytest.raises(ValueError, match="dimension"):
        neural.forward(m, np.ones(7))


def grad_check(model, states, actions, targets, h=1e-5, tol=1e-4):
    grads_w, grads_b, _ = neural.backward(model, states, actions, targets)
    for kind, params, grads in (("w", model.weights, grads_w), ("b", model.biases, grads_b)):
        for l, (p, g) in enumerate(zip(params, grads)):
            flat_p = p.reshape(-1)
            flat_g = g.reshape(-1)
            idx = np.linspace(0, flat_p.size - 1, num=min(40, flat_p.size), dtype=int)
            for i in idx:
                orig = flat_p[i]
                flat_p[i] = orig + h
                up = reference_loss(model, states, actions, targets)
                flat_p[i] = orig - h
                down = reference_loss(model, states, actions, targets)
                flat_p[i] = orig
                fd = (up - down) / (2 * h)
                denom = max(abs(fd), abs(flat_g[i]), 1e-8)
                assert abs(fd - flat_g[i]) / denom < tol, (kind, l, i, fd, flat_g[i])


def test_gradients_match_central_differences():
    rng = np.random.default_rng(7)
    m = make_model(seed=11)
    states = rng.uniform(-1, 1, size=(8, 25))
    actions = rng.integers(0, 5, size=8)
    targets = rng.normal(size=8)
    grad_check(m, states, actions, targets)


def test_gradients_small_net_all_params():
    rng = np.random.default_rng(13)
    m = make_model(sizes=(3, 4, 4, 2), seed=5)
    states = rng.uniform(-1, 1, size=(6, 3))
    actions = rng.integers(0, 2, size=6)
    targets = rng.normal(size=6)
    grad_check(m, states, actions, targets)


def test_zero_learning_rate_keeps_parameters():
    rng = np.random.default_rng(0)
    m = make_model(seed=1)
    before = m.flat_params().copy()
    states = rng.uniform(-1, 1, size=(4, 25))
    actions = rng.integers(0, 5, size=4)
    targets = rng.normal(size=4)
    gw, gb, _ = neural.backward(m, states, actions, targets)
    neural.sgd_step(m, gw, gb, 0.0)
    assert np.array_equal(m.flat_params(), before)


def test_target_equal_prediction_zero_gradient():
    rng = np.random.default_rng(2)
    m = make_model(seed=9)
    states = rng.uniform(-1, 1, size=(4, 25))
    actions = rng.integers(0, 5, size=4)
    q = neural.forward(m, states)
    targets = q[np.arange(4), actions]
    gw, gb, loss = neural.backward(m, states, actions, targets)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in gw)
    assert all(np.all(g == 0) for g in gb)


def test_nonfinite_loss_faults():
    m = make_model(sizes=(2, 3, 2), seed=4)
    states = np.ones((2, 2))
    actions = np.zeros(2, dtype=int)
    with pytest.raises(FloatingPointError):
        neural.backward(m, states, actions, np.array([np.inf, 0.0]))


# ---------------------------------------------------------------- TD targets


def test_td_terminal_is_reward():
    m = make_model(sizes=(3, 4, 2), seed=0)
    y = neural.td_targets(
        m, m,
        rewards=np.array([1.5]),
        next_states=np.zeros((1, 3)),
        next_masks=np.zeros((1, 2), dtype=bool),
        terminals=np.array([True]),
        gamma=0.9,
    )
    assert y[0] == 1.5


def test_td_double_equals_plain_when_nets_identical():
    rng = np.random.default_rng(5)
    m = make_model(sizes=(3, 8, 2), seed=6)
    ns = rng.uniform(-1, 1, size=(10, 3))
    masks = np.ones((10, 2), dtype=bool)
    r = rng.normal(size=10)
    t = np.zeros(10, dtype=bool)
    y_ddqn = neural.td_targets(m, m, r, ns, masks, t, 0.9, ddqn=True)
    y_dqn = neural.td_targets(m, m, r, ns, masks, t, 0.9, ddqn=False)
    assert np.allclose(y_ddqn, y_dqn)


def _fixed_output_model(values):
    # zero weights, biases equal to the requested output values
    m = neural.MlpModel(
        weights=[np.zeros((2, 2)), np.zeros((2, 2))],
        biases=[np.zeros(2), np.array(values, dtype=float)],
    )
    return m


def test_td_double_vs_plain_known_gap():
    # online prefers action 0, target values favour action 1:
    # DDQN bootstraps Q_target[argmax Q_online] = 0, plain DQN max Q_target = 1
    online = _fixed_output_model([1.0, 0.0])
    target = _fixed_output_model([0.0, 1.0])
    ns = np.zeros((1, 2))
    masks = np.ones((1, 2), dtype=bool)
    r = np.array([0.25])
    t = np.array([False])
    gamma = 0.9
    y_ddqn = neural.td_targets(online, target, r, ns, masks, t, gamma, ddqn=True)
    y_dqn = neural.td_targets(online, target, r, ns, masks, t, gamma, ddqn=False)
    assert y_ddqn[0] == pytest.approx(0.25 + gamma * 0.0)
    assert y_dqn[0] == pytest.approx(0.25 + gamma * 1.0)
    assert y_dqn[0] - y_ddqn[0] == pytest.approx(gamma * 1.0)


def test_td_respects_action_mask():
    online = _fixed_output_model([5.0, 1.0])
    target = _fixed_output_model([5.0, 1.0])
    masks = np.array([[False, True]])
    y = neural.td_targets(
        online, target, np.array([0.0]), np.zeros((1, 2)), masks,
        np.array([False]), 1.0,
    )
    assert y[0] == pytest.approx(1.0)  # masked argmax skips the 5.0 action


def test_td_no_valid_next_action_bootstraps_zero():
    m = _fixed_output_model([5.0, 5.0])
    y = neural.td_targets(
        m, m, np.array([2.0]), np.zeros((1, 2)),
        np.zeros((1, 2), dtype=bool), np.array([False]), 0.9,
    )
    assert y[0] == 2.0


# -------------------------------------------------------------------- replay


def test_replay_ring_overwrites_oldest():
    buf = neural.ReplayBuffer(3, 2, 2)
    for i in range(5):
        buf.append(np.full(2, i), 0, float(i), None, None, True)
    assert len(buf) == 3
    kept = sorted(buf.rewards.tolist())
    assert kept == [2.0, 3.0, 4.0]


def test_replay_sample_without_replacement():
    buf = neural.ReplayBuffer(10, 2, 2)
    for i in range(10):
        buf.append(np.full(2, i), i % 2, float(i), None, None, False)
    rng = np.random.default_rng(0)
    for _ in range(20):
        s, a, r, ns, nm, t = buf.sample(8, rng)
        assert len(set(r.tolist())) == 8  # all distinct rewards -> no repeats


# ------------------------------------------------------------------- persist


def test_model_save_load_round_trip(tmp_path):
    m = make_model(seed=21)
    path = tmp_path / "model.npz"
    neural.save_model(m, path)
    loaded = neural.load_model(path)
    assert np.array_equal(m.flat_params(), loaded.flat_params())
    rng = np.random.default_rng(1)
    states = rng.uniform(-1, 1, size=(100, 25))
    assert np.array_equal(neural.forward(m, states), neural.forward(loaded, states))


def test_model_load_truncated_file_errors(tmp_path):
    m = make_model(seed=22)
    path = tmp_path / "model.npz"
    neural.save_model(m, path)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(neural.ModelFormatError):
        neural.load_model(path)


def test_model_load_missing_file_errors(tmp_path):
    with pytest.raises(neural.ModelFormatError):
        neural.load_model(tmp_path / "nope.npz")
