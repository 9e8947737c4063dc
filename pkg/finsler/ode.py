"""Fixed-step classical Runge-Kutta integration."""
import logging
from typing import Callable, Optional, Tuple

import numpy as np

from finsler.errors import StepFailureError

logger = logging.getLogger(__name__)

RK4_ORDER = 4


def rk4_step(f: Callable, t: float, state: np.ndarray, h: float) -> np.ndarray:
    """One classical 4th-order step of state' = f(t, state)."""
    k1 = f(t, state)
    k2 = f(t + 0.5 * h, state + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, state + 0.5 * h * k2)
    k4 = f(t + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_count(length: float, step: float) -> Tuple[int, float]:
    """Number of steps covering [0, length] and the step adjusted to land on length."""
    if length <= 0 or step <= 0:
        raise ValueError(f"length and step must be positive, got length={length}, step={step}")
    steps = max(1, int(round(length / step)))
    return steps, length / steps


def integrate(f: Callable, t0: float, state0, h: float, steps: int,
              stop: Optional[Callable] = None) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Integrate with a fixed step and return (times, states, stopped).

    ``stop(t, state)`` is consulted after every step, before the finiteness
    check; a True return drops that state and ends the integration.
    """
    state = np.asarray(state0, dtype=float)
    times = [t0]
    states = [state]
    t = t0
    for i in range(steps):
        new_state = rk4_step(f, t, state, h)
        t = t0 + (i + 1) * h
        if stop is not None and stop(t, new_state):
            return np.asarray(times), np.asarray(states), True
        if not np.all(np.isfinite(new_state)):
            raise StepFailureError(f"Integrator produced a non-finite state at t={t:.6g} (step {i + 1})")
        state = new_state
        times.append(t)
        states.append(state)
    return np.asarray(times), np.asarray(states), False


def integrate_on_samples(f: Callable, times: np.ndarray, state0, stop: Optional[Callable] = None):
    """Stride-2 RK4 over a uniform grid: the step is 2h and the midpoint stages
    use the samples in between, so ``f(k, state)`` takes a sample index.

    Returns (indices, states, stopped) with indices of the even samples reached.
    """
    state = np.asarray(state0, dtype=float)
    last = len(times) - 1
    indices = [0]
    states = [state]
    for k in range(0, last - 1, 2):
        h = times[k + 2] - times[k]
        k1 = f(k, state)
        k2 = f(k + 1, state + 0.5 * h * k1)
        k3 = f(k + 1, state + 0.5 * h * k2)
        k4 = f(k + 2, state + h * k3)
        new_state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if stop is not None and stop(k + 2, new_state):
            return np.asarray(indices), np.asarray(states), True
        if not np.all(np.isfinite(new_state)):
            raise StepFailureError(f"Integrator produced a non-finite state at t={times[k + 2]:.6g}")
        state = new_state
        indices.append(k + 2)
        states.append(state)
    return np.asarray(indices), np.asarray(states), False
