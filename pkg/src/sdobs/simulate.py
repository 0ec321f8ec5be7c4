"""Hybrid simulation of a plant coupled with a sampled-data observer.

Between sampling instants the plant, the observer and the output predictor
``w`` flow together; at each instant ``w`` is reset to the fresh (noisy)
measurement. Integration is fixed-step RK4 landing exactly on every instant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidDiameter, NonFiniteState, StepTooLarge
from .integrate import DIVERGENCE_LIMIT, rk4_step, substeps
from .linalg import as_vector

ZERO = "zero"
CONSTANT = "constant"
UNIFORM = "uniform"
CUSTOM = "custom"


@dataclass(frozen=True)
class PerturbationSource:
    """Where the schedule perturbation ``d_i >= 0`` comes from."""

    kind: str = ZERO
    value: float = 0.0
    d_max: float = 0.0
    seed: int = 0

    def values(self, count_hint=None):
        if self.kind == ZERO:
            while True:
                yield 0.0
        elif self.kind == CONSTANT:
            if self.value < 0:
                raise ValueError("perturbation must be non-negative")
            while True:
                yield float(self.value)
        elif self.kind == UNIFORM:
            if self.d_max < 0:
                raise ValueError("d_max must be non-negative")
            rng = np.random.default_rng(self.seed)
            while True:
                yield float(rng.uniform(0.0, self.d_max))
        else:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")


@dataclass(frozen=True)
class SamplingSchedule:
    instants: np.ndarray
    r: float
    d: np.ndarray

    @property
    def gaps(self):
        return np.diff(self.instants)

    @property
    def upper_diameter(self):
        return self.r


def generate_schedule(r, d_source=PerturbationSource(), t_end=1.0) -> SamplingSchedule:
    """Instants ``tau_{i+1} = tau_i + r exp(-d_i)`` from 0 until ``t_end`` is covered."""
    if not r > 0:
        raise InvalidDiameter(f"upper diameter must be positive, got {r}")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    taus = [0.0]
    ds = []
    gen = d_source.values()
    while taus[-1] < t_end:
        d = next(gen)
        ds.append(d)
        taus.append(taus[-1] + r * math.exp(-d))
    return SamplingSchedule(instants=np.array(taus), r=float(r), d=np.array(ds))


@dataclass(frozen=True)
class NoiseSignal:
    """Measurement error ``v``.

    Sampled noise is looked up by sample index ``i`` (the ``i``-th instant);
    continuous-time noise holds each random draw for ``hold`` time units.
    """

    kind: str = ZERO
    level: float = 0.0
    bound: float = 0.0
    seed: int = 0
    samples: tuple = ()
    hold: float = 0.01

    def _draw(self, index):
        rng = np.random.default_rng([self.seed, index])
        return float(rng.uniform(-self.bound, self.bound))

    def sample(self, i, tau=None):
        if self.kind == ZERO:
            return 0.0
        if self.kind == CONSTANT:
            return float(self.level)
        if self.kind == UNIFORM:
            return self._draw(i)
        if self.kind == CUSTOM:
            return float(self.samples[i]) if i < len(self.samples) else 0.0
        raise ValueError(f"unknown noise kind {self.kind!r}")

    def __call__(self, t):
        if self.kind in (ZERO, CONSTANT):
            return self.sample(0)
        return self.sample(int(math.floor(t / self.hold + 1e-9)))

    @property
    def sup(self):
        if self.kind == ZERO:
            return 0.0
        if self.kind == CONSTANT:
            return abs(self.level)
        if self.kind == UNIFORM:
            return abs(self.bound)
        return max((abs(s) for s in self.samples), default=0.0)


@dataclass(frozen=True)
class JumpRecord:
    i: int
    tau: float
    gap: float
    d: float
    y: float
    v: float
    w_before: float
    w_after: float


@dataclass
class HybridTrajectory:
    """Samples of ``(x, z, w)`` on the integration grid plus the reset log.

    Rows at a sampling instant hold the post-reset value of ``w`` and are flagged
    in ``is_jump``; the pre-reset value lives in the matching :class:`JumpRecord`.
    """

    times: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    is_jump: np.ndarray
    estimate: np.ndarray
    jumps: list = field(default_factory=list)
    schedule: Optional[SamplingSchedule] = None
    diverged: bool = False

    @property
    def error(self):
        """``psi(z(t)) - x(t)``."""
        return self.estimate - self.x

    def write_csv(self, path, stride=1):
        n = self.x.shape[1]
        k = self.z.shape[1]
        header = (
            ["t"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"z{i + 1}" for i in range(k)]
            + ["w"]
            + [f"e{i + 1}" for i in range(n)]
            + ["is_jump"]
        )
        err = self.error
        rows = range(0, len(self.times), max(1, int(stride)))
        last = len(self.times) - 1
        idx = list(rows)
        if idx and idx[-1] != last:
            idx.append(last)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(header)
            for j in idx:
                out.writerow(
                    [_fmt(self.times[j])]
                    + [_fmt(v) for v in self.x[j]]
                    + [_fmt(v) for v in self.z[j]]
                    + [_fmt(self.w[j])]
                    + [_fmt(v) for v in err[j]]
                    + [int(self.is_jump[j])]
                )

    def write_jumps_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["i", "tau_i", "gap", "d_i", "y", "v", "w_before", "w_after"])
            for jr in self.jumps:
                out.writerow(
                    [jr.i]
                    + [_fmt(v) for v in (jr.tau, jr.gap, jr.d, jr.y, jr.v, jr.w_before, jr.w_after)]
                )


def _fmt(v):
    return repr(float(v))


def default_step(r):
    return min(r / 20.0, 1e-3)


def _combined_rate(plant, observer, predictor):
    n, k = plant.n, observer.dim
    lin = observer.linear
    if plant.a is not None and lin is not None:
        m = np.zeros((n + k + 1, n + k + 1))
        m[:n, :n] = plant.a
        m[n : n + k, n : n + k] = lin.zz
        m[n : n + k, -1] = lin.zy
        if predictor:
            m[-1, n : n + k] = lin.wz
        return lambda t, s: m @ s

    f, F, rate = plant.f, observer.F, observer.predictor_rate

    def combined(t, s):
        out = np.empty(n + k + 1)
        z = s[n : n + k]
        out[:n] = f(s[:n])
        out[n : n + k] = F(z, s[-1])
        out[-1] = rate(z) if predictor else 0.0
        return out

    return combined


def _check_inputs(plant, observer, x0, z0):
    x0 = as_vector(x0, "x0")
    z0 = as_vector(z0, "z0")
    if x0.size != plant.n or z0.size != observer.dim:
        raise ValueError(
            f"initial condition dims ({x0.size}, {z0.size}) do not match "
            f"({plant.n}, {observer.dim})"
        )
    return x0, z0


def simulate_sampled_data(
    plant,
    observer,
    schedule: SamplingSchedule,
    v: NoiseSignal = NoiseSignal(),
    x0=None,
    z0=None,
    w0=0.0,
    step=None,
    t_end=None,
    predictor=True,
    stale_reset=False,
    limit=DIVERGENCE_LIMIT,
) -> HybridTrajectory:
    """Run the plant/observer/predictor hybrid system over ``[0, t_end]``.

    ``predictor=False`` freezes ``w`` between samples (zero-order hold).
    ``stale_reset=True`` resets ``w`` to the previous sample instead of the new
    one, for comparison with that variant of the update.

    Raises :class:`NonFiniteState` with the partial trajectory on divergence.
    """
    x0, z0 = _check_inputs(plant, observer, x0, z0)
    taus = schedule.instants
    if t_end is None:
        t_end = float(taus[-1])
    if taus[-1] < t_end - 1e-12:
        raise ValueError("schedule does not cover the simulation horizon")
    if step is None:
        step = default_step(schedule.r)
    if step <= 0:
        raise ValueError("step must be positive")
    gaps = np.diff(taus)
    n_used = int(np.searchsorted(taus, t_end, side="left"))
    if n_used and step > gaps[:n_used].min() * (1 + 1e-12):
        raise StepTooLarge(f"step {step} exceeds the smallest sampling gap {gaps.min()}")

    n, k = plant.n, observer.dim
    rate = _combined_rate(plant, observer, predictor)
    h_out, psi = plant.h, observer.psi
    s = np.concatenate([x0, z0, [float(w0)]])

    times = [0.0]
    states = [s]
    flags = [False]
    jumps = []
    prev_meas = h_out(x0) + v.sample(0, 0.0)
    diverged = False

    def finish():
        arr = np.array(states)
        zs = arr[:, n : n + k]
        est = np.array([psi(z) for z in zs]).reshape(len(zs), -1)
        return HybridTrajectory(
            times=np.array(times),
            x=arr[:, :n],
            z=zs,
            w=arr[:, -1],
            is_jump=np.array(flags, dtype=bool),
            estimate=est,
            jumps=jumps,
            schedule=schedule,
            diverged=diverged,
        )

    i = 0
    while taus[i] < t_end:
        t0 = float(taus[i])
        t_next = float(taus[i + 1])
        t1 = min(t_next, t_end)
        hs = substeps(t0, t1, step)
        t = t0
        for j, h in enumerate(hs):
            s = rk4_step(rate, t, s, h)
            t = t1 if j == len(hs) - 1 else t + h
            if not np.isfinite(s).all() or np.abs(s).max() > limit:
                times.append(t)
                states.append(s)
                flags.append(False)
                diverged = True
                raise NonFiniteState(f"hybrid state diverged at t={t:.6g}", partial=finish())
            times.append(t)
            states.append(s)
            flags.append(False)
        if t1 < t_next:
            break
        # reset at tau_{i+1}
        x = s[:n]
        y = h_out(x)
        vi = v.sample(i + 1, t_next)
        meas = y + vi
        w_before = float(s[-1])
        w_after = prev_meas if stale_reset else meas
        s = s.copy()
        s[-1] = w_after
        states[-1] = s
        flags[-1] = True
        jumps.append(
            JumpRecord(
                i=i + 1,
                tau=t_next,
                gap=t_next - t0,
                d=float(schedule.d[i]),
                y=float(y),
                v=float(vi),
                w_before=w_before,
                w_after=float(w_after),
            )
        )
        prev_meas = meas
        i += 1
        if i + 1 >= len(taus):
            break
    return finish()
