"""Bias-corrected Adam over named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..core.types import ContractError


class NonFiniteGradientError(ValueError):
    """A step was rejected because gradients contained NaN or infinity."""

    def __init__(self, bad_keys: list[str]):
        super().__init__(f"non-finite gradients for parameters: {bad_keys}")
        self.bad_keys = bad_keys


@dataclass
class AdamState:
    """Optimizer moments plus hyperparameters.

    Moment arrays mirror the parameter layout exactly; ``lr`` is the
    default learning rate, optionally overridden per attribute at step
    time.
    """

    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], lr: float = 1e-3,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )

    def copy(self) -> "AdamState":
        return AdamState(
            first_moment={k: v.copy() for k, v in self.first_moment.items()},
            second_moment={k: v.copy() for k, v in self.second_moment.items()},
            step_count=self.step_count,
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr_overrides: Mapping[str, float] | None = None,
) -> dict[str, np.ndarray]:
    """One Adam update; returns new parameter arrays, mutating ``state``.

    Layouts must match the state exactly. Non-finite gradients reject the
    whole step (state untouched) with the offending keys in the error.
    Rows of a ``rotations`` parameter that actually moved are renormalized
    to unit quaternions; untouched rows keep their bits.
    """
    if set(params) != set(state.first_moment):
        raise ContractError(
            f"parameter keys {sorted(params)} do not match optimizer state "
            f"{sorted(state.first_moment)}"
        )
    if set(grads) != set(params):
        raise ContractError("gradient keys do not match parameter keys")
    for key, p in params.items():
        if grads[key].shape != p.shape or state.first_moment[key].shape != p.shape:
            raise ContractError(f"layout mismatch for {key!r}")

    bad = [k for k in sorted(grads) if not np.all(np.isfinite(grads[k]))]
    if bad:
        raise NonFiniteGradientError(bad)

    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t

    new_params: dict[str, np.ndarray] = {}
    for key in sorted(params):
        g = grads[key]
        m = state.first_moment[key]
        v = state.second_moment[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        lr = lr_overrides.get(key, state.lr) if lr_overrides else state.lr
        update = lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new = params[key] - update
        if key == "rotations":
            moved = np.any(update != 0.0, axis=-1)
            if np.any(moved):
                norms = np.linalg.norm(new[moved], axis=-1, keepdims=True)
                new[moved] = new[moved] / norms
        new_params[key] = new
    return new_params
