"""Fixed-step classical Runge-Kutta integration."""

from __future__ import annotations

import math

import numpy as np

from .errors import NonFiniteState

DIVERGENCE_LIMIT = 1e12


def rk4_step(rate, t, y, h):
    k1 = rate(t, y)
    k2 = rate(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = rate(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = rate(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def substeps(t0, t1, step):
    """Uniform substep sizes covering ``[t0, t1]``; the last one is truncated.

    A remainder shorter than 1e-9 of a step is merged into the previous substep
    so that rounding in ``t1 - t0`` never produces a degenerate final step.
    """
    span = t1 - t0
    if span <= 0:
        return []
    full = math.floor(span / step)
    rem = span - full * step
    if rem <= 1e-9 * step:
        if full == 0:
            return [span]
        return [step] * (full - 1) + [span - (full - 1) * step]
    return [step] * full + [rem]


def integrate_segment(rate, state0, t0, t1, step, limit=DIVERGENCE_LIMIT):
    """Integrate ``y' = rate(t, y)`` from ``t0`` to exactly ``t1``.

    Returns ``(times, states)`` including both endpoints. ``states`` has one row
    per time. Raises :class:`NonFiniteState` (with the partial series attached)
    when the state leaves ``|y| <= limit``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    y = np.array(state0, dtype=float)
    times = [t0]
    states = [y]
    t = t0
    hs = substeps(t0, t1, step)
    for j, h in enumerate(hs):
        y = rk4_step(rate, t, y, h)
        t = t1 if j == len(hs) - 1 else t + h
        times.append(t)
        states.append(y)
        if not np.all(np.isfinite(y)) or np.abs(y).max() > limit:
            raise NonFiniteState(
                f"state diverged at t={t:.6g}", partial=(np.array(times), np.array(states))
            )
    return np.array(times), np.array(states)
