"""Comparison observers: continuous measurement, zero-order hold, discrete-time."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteState, WrongPlantKind
from .integrate import DIVERGENCE_LIMIT, rk4_step, substeps
from .linalg import as_vector, eigvals, expm, place_poles_discrete
from .plants import LINEAR
from .simulate import (
    HybridTrajectory,
    NoiseSignal,
    SamplingSchedule,
    _check_inputs,
    _fmt,
    simulate_sampled_data,
)


def simulate_continuous(plant, observer, v_continuous=None, x0=None, z0=None, step=1e-3, t_end=30.0):
    """Observer driven by the continuous measurement ``y(t) + v(t)``.

    ``v_continuous`` is any map ``t -> float`` (``None`` means no noise). The
    returned trajectory stores the measurement in the ``w`` column and has no
    jumps.
    """
    x0, z0 = _check_inputs(plant, observer, x0, z0)
    v = v_continuous or (lambda t: 0.0)
    n, k = plant.n, observer.dim
    f, F, h = plant.f, observer.F, plant.h
    lin = observer.linear
    if plant.a is not None and lin is not None and isinstance(v, NoiseSignal) and v.kind in ("zero", "constant"):
        # affine fast path: s' = M s + b
        m = np.zeros((n + k, n + k))
        m[:n, :n] = plant.a
        m[n:, n:] = lin.zz
        m[n:, :n] = np.outer(lin.zy, plant.c)
        b = np.zeros(n + k)
        b[n:] = lin.zy * v(0.0)
        rate = lambda t, s: m @ s + b  # noqa: E731
    else:

        def rate(t, s):
            out = np.empty(n + k)
            x = s[:n]
            out[:n] = f(x)
            out[n:] = F(s[n:], h(x) + v(t))
            return out

    s = np.concatenate([x0, z0])
    times = [0.0]
    states = [s]
    t = 0.0
    hs = substeps(0.0, t_end, step)
    for j, hh in enumerate(hs):
        s = rk4_step(rate, t, s, hh)
        t = t_end if j == len(hs) - 1 else t + hh
        times.append(t)
        states.append(s)
        if not np.isfinite(s).all() or np.abs(s).max() > DIVERGENCE_LIMIT:
            raise NonFiniteState(
                f"continuous observer diverged at t={t:.6g}",
                partial=_continuous_traj(times, states, n, observer, h, v),
            )
    return _continuous_traj(times, states, n, observer, h, v)


def _continuous_traj(times, states, n, observer, h, v):
    arr = np.array(states)
    ts = np.array(times)
    zs = arr[:, n:]
    meas = np.array([h(x) + v(t) for t, x in zip(ts, arr[:, :n])])
    return HybridTrajectory(
        times=ts,
        x=arr[:, :n],
        z=zs,
        w=meas,
        is_jump=np.zeros(len(ts), dtype=bool),
        estimate=np.array([observer.psi(z) for z in zs]).reshape(len(zs), -1),
    )


def simulate_zoh(plant, observer, schedule, v=NoiseSignal(), x0=None, z0=None, step=None, t_end=None):
    """Observer fed the most recent sample ``y(tau_i) + v(tau_i)`` held constant.

    This is the hybrid simulation with a frozen predictor, started from the
    first sample.
    """
    x0, z0 = _check_inputs(plant, observer, x0, z0)
    w0 = plant.h(x0) + v.sample(0, 0.0)
    return simulate_sampled_data(
        plant, observer, schedule, v, x0, z0, w0, step=step, t_end=t_end, predictor=False
    )


@dataclass(frozen=True)
class DiscreteObserverDesign:
    T: float
    ad: np.ndarray
    L: np.ndarray
    targets: tuple

    def report(self):
        return {
            "design": "discrete",
            "T": self.T,
            "L": self.L.tolist(),
            "targets": [complex(t).real if complex(t).imag == 0 else str(t) for t in self.targets],
            "A(T)": self.ad.tolist(),
        }


def design_discrete_observer(a, c, T, targets) -> DiscreteObserverDesign:
    """``z_{k+1} = A(T) z_k + L(c'z_k - y_k)`` with ``A(T) = exp(A T)``."""
    if not T > 0:
        raise ValueError("assumed period must be positive")
    ad = expm(a, T)
    L = place_poles_discrete(ad, c, targets)
    cl = eigvals(ad + np.outer(L, as_vector(c)))
    if np.any(np.abs(cl) >= 1.0):
        raise ValueError("placed discrete observer is not Schur stable")
    return DiscreteObserverDesign(T=float(T), ad=ad, L=L, targets=tuple(targets))


@dataclass
class SampledErrorSeries:
    k: np.ndarray
    tau: np.ndarray
    e: np.ndarray
    x: np.ndarray
    z: np.ndarray

    def write_csv(self, path):
        n = self.e.shape[1]
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["k", "tau_k"] + [f"e{i + 1}" for i in range(n)])
            for kk, tt, ee in zip(self.k, self.tau, self.e):
                out.writerow([int(kk), _fmt(tt)] + [_fmt(v) for v in ee])


def simulate_discrete_observer(plant, design: DiscreteObserverDesign, actual_schedule: SamplingSchedule, x0, z0, t_end=None) -> SampledErrorSeries:
    """Run the discrete observer on the true sampling instants.

    The plant is propagated exactly between instants with the matrix exponential
    of the actual gap, so the only disturbance is the period mismatch.
    """
    if plant.kind != LINEAR:
        raise WrongPlantKind("discrete baseline requires a linear plant")
    x = as_vector(x0, "x0").copy()
    z = as_vector(z0, "z0").copy()
    c = plant.c
    taus = actual_schedule.instants
    if t_end is not None:
        taus = taus[: int(np.searchsorted(taus, t_end, side="right"))]
    cache = {}
    xs, zs = [x], [z]
    for j in range(len(taus) - 1):
        gap = float(taus[j + 1] - taus[j])
        if gap not in cache:
            cache[gap] = expm(plant.a, gap)
        y = float(c @ x)
        z = design.ad @ z + design.L * (float(c @ z) - y)
        x = cache[gap] @ x
        if not np.isfinite(z).all():
            raise NonFiniteState("discrete observer diverged")
        xs.append(x)
        zs.append(z)
    xa, za = np.array(xs), np.array(zs)
    return SampledErrorSeries(
        k=np.arange(len(xs)), tau=np.array(taus[: len(xs)]), e=za - xa, x=xa, z=za
    )
