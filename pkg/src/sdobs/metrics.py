"""Error-series metrics: tail amplitude, convergence time, sup error."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySeries

NEVER = "never"


@dataclass(frozen=True)
class Metrics:
    amplitude: tuple
    convergence_time: float  # math.inf when the error never settles
    sup_error: float
    tail_sup: float

    def as_row(self):
        row = {f"amp_e{i + 1}": a for i, a in enumerate(self.amplitude)}
        row["convergence_time"] = (
            NEVER if math.isinf(self.convergence_time) else self.convergence_time
        )
        row["sup_error"] = self.sup_error
        row["tail_sup"] = self.tail_sup
        return row


def compute_metrics(times, errors, window=0.25, tolerance=1e-3) -> Metrics:
    """Metrics of an error series ``errors[j]`` sampled at ``times[j]``.

    The tail window is the final ``window`` fraction of the time span;
    amplitude is ``(max - min) / 2`` per component over it. Convergence time is
    the first instant after which ``|e|`` stays at or below ``tolerance``.
    """
    t = np.asarray(times, dtype=float).reshape(-1)
    e = np.asarray(errors, dtype=float)
    if t.size == 0:
        raise EmptySeries("cannot compute metrics of an empty series")
    if e.ndim == 1:
        e = e.reshape(-1, 1)
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    start = t[-1] - window * (t[-1] - t[0])
    tail = t >= start - 1e-12
    amp = tuple(float((e[tail, i].max() - e[tail, i].min()) / 2) for i in range(e.shape[1]))
    norms = np.linalg.norm(e, axis=1)
    above = np.nonzero(norms > tolerance)[0]
    if above.size == 0:
        conv = float(t[0])
    elif above[-1] == t.size - 1:
        conv = math.inf
    else:
        conv = float(t[above[-1] + 1])
    return Metrics(
        amplitude=amp,
        convergence_time=conv,
        sup_error=float(norms.max()),
        tail_sup=float(norms[tail].max()),
    )
