"""Adam updates with decoupled weight decay and a cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .network import ModelState

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass(frozen=True)
class ScheduleConfig:
    lr0: float
    lr_min: float
    total_steps: int

    def __post_init__(self):
        if self.lr0 < 0:
            raise ConfigError(f"lr0 must be >= 0, got {self.lr0}")
        if not 0 <= self.lr_min <= self.lr0:
            raise ConfigError(f"need 0 <= lr_min <= lr0, got lr_min={self.lr_min}, lr0={self.lr0}")
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")


def cosine_lr(t: int, cfg: ScheduleConfig) -> float:
    """Cosine decay from lr0 at t=0 down to lr_min at t=total_steps."""
    if not 0 <= t <= cfg.total_steps:
        raise ConfigError(f"step {t} outside [0, {cfg.total_steps}]")
    return cfg.lr_min + 0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + math.cos(math.pi * t / cfg.total_steps))


@dataclass
class AdamState:
    """First/second moment estimates, shaped exactly like the model parameters."""

    step_count: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON


def init_adam(params: ModelState, beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
              epsilon: float = ADAM_EPSILON) -> AdamState:
    zeros = {name: np.zeros_like(arr) for name, arr in params.params.items()}
    return AdamState(
        step_count=0,
        m=zeros,
        v={name: np.zeros_like(arr) for name, arr in params.params.items()},
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(
    params: ModelState,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[ModelState, AdamState]:
    """One Adam update with decoupled weight decay; biases are not decayed.

    Returns fresh parameter and optimizer states; inputs are left untouched.
    lr = 0 is accepted and produces a pure moment update with no parameter
    motion (used by zero-learning-rate training runs).

    Worked example (fresh state, w = 0.3, g = 0.5, lr = 0.1, no decay):
    m = 0.1 * 0.5 = 0.05 and v = 0.001 * 0.25 = 0.00025, so after bias
    correction m_hat = 0.5, v_hat = 0.25, and the new weight is
    0.3 - 0.1 * 0.5 / (0.5 + 1e-8) = 0.2000000020 (to ten decimals).
    """
    if lr < 0:
        raise ConfigError(f"lr must be >= 0, got {lr}")
    if set(grads) != set(params.params):
        raise DataError("gradient keys do not match parameter keys")
    t = state.step_count + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, p in params.params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DataError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        step = m_hat / (np.sqrt(v_hat) + state.epsilon)
        if weight_decay != 0.0 and not name.endswith(".b"):
            step = step + weight_decay * p
        new_params[name] = p - lr * step
        new_m[name] = m
        new_v[name] = v
    return (
        ModelState(params.topology, new_params),
        AdamState(t, new_m, new_v, state.beta1, state.beta2, state.epsilon),
    )
