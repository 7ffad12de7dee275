import math

import numpy as np
import pytest

from splatedit.core.types import ContractError
from splatedit.optim import AdamState, NonFiniteGradientError, adam_step


def simple_params(rng, n=5):
    return {
        "weights": rng.normal(size=(n, 3)),
        "bias": rng.normal(size=n),
    }


def test_zero_grads_leave_params_unchanged(rng):
    params = simple_params(rng)
    state = AdamState.for_params(params, lr=0.1)
    new = adam_step(params, {k: np.zeros_like(v) for k, v in params.items()}, state)
    for k in params:
        np.testing.assert_array_equal(new[k], params[k])


def test_first_step_is_lr_times_sign(rng):
    # Hand computation: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
    params = {"w": np.array([1.0, -2.0, 0.5])}
    grads = {"w": np.array([0.3, -0.7, 2.0])}
    state = AdamState.for_params(params, lr=0.05)
    new = adam_step(params, grads, state)
    expected = params["w"] - 0.05 * np.sign(grads["w"]) * (
        np.abs(grads["w"]) / (np.abs(grads["w"]) + state.eps)
    )
    np.testing.assert_allclose(new["w"], expected, rtol=1e-12)


def test_matches_scalar_reference_trace():
    # Oracle: a from-scratch scalar Adam reimplementation, 10 steps.
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    theta_ref = 0.7
    m = v = 0.0
    grad_sequence = [math.sin(0.9 * t + 0.3) for t in range(10)]
    for t, g in enumerate(grad_sequence, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        theta_ref -= lr * m_hat / (math.sqrt(v_hat) + eps)

    params = {"x": np.array([0.7])}
    state = AdamState.for_params(params, lr=lr, beta1=b1, beta2=b2, eps=eps)
    for g in grad_sequence:
        params = adam_step(params, {"x": np.array([g])}, state)
    assert abs(params["x"][0] - theta_ref) < 1e-10


def test_non_finite_gradient_rejected_with_diagnostics(rng):
    params = simple_params(rng)
    state = AdamState.for_params(params)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    grads["bias"][2] = np.nan
    before = state.copy()
    with pytest.raises(NonFiniteGradientError) as err:
        adam_step(params, grads, state)
    assert "bias" in err.value.bad_keys
    assert state.step_count == before.step_count  # state untouched


def test_layout_mismatch_rejected(rng):
    params = simple_params(rng)
    state = AdamState.for_params(params)
    with pytest.raises(ContractError):
        adam_step(params, {"weights": np.zeros((5, 3))}, state)
    with pytest.raises(ContractError):
        adam_step({"weights": params["weights"]}, {"weights": np.zeros((5, 3))}, state)


def test_deterministic_and_order_independent(rng):
    params = simple_params(rng)
    grads = {k: rng.normal(size=v.shape) for k, v in params.items()}
    s1 = AdamState.for_params(params, lr=0.02)
    s2 = AdamState.for_params(params, lr=0.02)
    out1 = adam_step(params, grads, s1)
    reordered_params = dict(reversed(list(params.items())))
    reordered_grads = dict(reversed(list(grads.items())))
    out2 = adam_step(reordered_params, reordered_grads, s2)
    for k in params:
        np.testing.assert_array_equal(out1[k], out2[k])


def test_per_attribute_lr_overrides(rng):
    params = simple_params(rng)
    grads = {k: np.ones_like(v) for k, v in params.items()}
    state = AdamState.for_params(params, lr=0.1)
    new = adam_step(params, grads, state, lr_overrides={"bias": 0.0})
    np.testing.assert_array_equal(new["bias"], params["bias"])
    assert np.all(new["weights"] != params["weights"])


def test_rotations_renormalized_only_when_moved(rng):
    q = rng.normal(size=(4, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    params = {"rotations": q.copy()}
    grads = {"rotations": np.zeros_like(q)}
    grads["rotations"][1] = [0.2, -0.1, 0.3, 0.05]
    state = AdamState.for_params(params, lr=0.05)
    new = adam_step(params, grads, state)
    # Moved row is unit-norm; untouched rows keep their exact bits.
    assert abs(np.linalg.norm(new["rotations"][1]) - 1.0) < 1e-12
    for i in (0, 2, 3):
        np.testing.assert_array_equal(new["rotations"][i], q[i])
