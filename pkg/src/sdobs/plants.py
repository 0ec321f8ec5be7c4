"""Continuous-time plant models: generic, triangular Lipschitz and linear."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, LipschitzViolated, WrongPlantKind
from .integrate import integrate_segment
from .linalg import as_matrix, as_vector, induced_norm

TRIANGULAR = "triangular"
LINEAR = "linear"
GENERIC = "generic"


@dataclass(frozen=True)
class Plant:
    """Autonomous plant ``x' = f(x)``, ``y = h(x)`` with output rate ``L_f h``.

    ``kind`` is one of ``"triangular"``, ``"linear"`` or ``"generic"``. Triangular
    plants carry their Lipschitz constant and component maps; linear plants carry
    ``a`` and ``c``. Generic plants are accepted as-is (growth hypothesis unchecked).
    """

    n: int
    f: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], float]
    output_rate: Callable[[np.ndarray], float]
    kind: str = GENERIC
    name: str = "generic"
    lipschitz: Optional[float] = None
    components: tuple = ()
    a: Optional[np.ndarray] = field(default=None, repr=False)
    c: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        zero = np.zeros(self.n)
        if np.abs(np.asarray(self.f(zero))).max() > 1e-12 or abs(self.h(zero)) > 1e-12:
            raise ValueError("plant must satisfy f(0) = 0 and h(0) = 0")


def make_generic_plant(n, f, h, output_rate, name="generic"):
    return Plant(n=n, f=f, h=h, output_rate=output_rate, kind=GENERIC, name=name)


def _lipschitz_spot_check(components, lipschitz, box, samples, seed):
    rng = np.random.default_rng(seed)
    n = len(components)
    xs = rng.uniform(-box, box, size=(samples, n))
    # half the pairs are local perturbations so steep regions near any point get probed
    deltas = rng.uniform(-box, box, size=(samples, n))
    scales = np.where(np.arange(samples) % 2 == 0, 1.0, 1e-3)
    ys = xs + deltas * scales[:, None]
    for i, fi in enumerate(components, start=1):
        for x, y in zip(xs, ys):
            dist = math.sqrt(float(np.dot(x[:i] - y[:i], x[:i] - y[:i])))
            if dist == 0.0:
                continue
            q = abs(fi(x[:i]) - fi(y[:i])) / dist
            if q > lipschitz * (1 + 1e-6):
                raise LipschitzViolated(
                    f"f_{i} has sampled Lipschitz quotient {q:.6g} > L = {lipschitz}"
                )


def make_triangular_plant(
    f_components: Sequence[Callable[[np.ndarray], float]],
    lipschitz_L: float,
    name="triangular",
    box=1e3,
    samples=10_000,
    seed=0,
) -> Plant:
    """Build ``x_i' = f_i(x_1..x_i) + x_{i+1}``, ``y = x_1``.

    Each ``f_i`` receives the leading slice ``x[:i]`` as a 1-D array, so it cannot
    depend on later coordinates. The declared Lipschitz constant is spot-checked
    on ``samples`` random point pairs drawn from ``|x_j| <= box``.
    """
    comps = tuple(f_components)
    n = len(comps)
    if n < 1:
        raise DimensionMismatch("need at least one component")
    if lipschitz_L < 0:
        raise ValueError("Lipschitz constant must be non-negative")
    _lipschitz_spot_check(comps, lipschitz_L, box, samples, seed)

    def f(x):
        out = np.empty(n)
        for i in range(n):
            out[i] = comps[i](x[: i + 1])
        out[:-1] += x[1:]
        return out

    def h(x):
        return float(x[0])

    def output_rate(x):
        second = x[1] if n > 1 else 0.0
        return float(comps[0](x[:1]) + second)

    return Plant(
        n=n,
        f=f,
        h=h,
        output_rate=output_rate,
        kind=TRIANGULAR,
        name=name,
        lipschitz=float(lipschitz_L),
        components=comps,
    )


def make_linear_plant(a, c, name="linear") -> Plant:
    am = as_matrix(a, "a")
    cv = as_vector(c, "c")
    n = am.shape[0]
    if am.shape != (n, n) or cv.size != n:
        raise DimensionMismatch(f"a has shape {am.shape}, c has dim {cv.size}")
    am.setflags(write=False)
    cv.setflags(write=False)
    ca = cv @ am

    return Plant(
        n=n,
        f=lambda x: am @ x,
        h=lambda x: float(cv @ x),
        output_rate=lambda x: float(ca @ x),
        kind=LINEAR,
        name=name,
        a=am,
        c=cv,
    )


OSCILLATOR_A = ((0.0, 1.0), (-4.0, 0.0))
OSCILLATOR_C = (1.0, 0.0)


def oscillator_preset() -> Plant:
    """``x1' = x2, x2' = -4 x1, y = x1``."""
    return make_linear_plant(OSCILLATOR_A, OSCILLATOR_C, name="oscillator")


def double_integrator() -> Plant:
    zero = lambda x: 0.0  # noqa: E731
    return make_triangular_plant([zero, zero], 0.0, name="double-integrator")


def sin_triangular() -> Plant:
    """``x1' = sin(x1) + x2, x2' = -x1``; Lipschitz constant 1."""
    return make_triangular_plant(
        [lambda x: math.sin(x[0]), lambda x: -x[0]], 1.0, name="sin-triangular"
    )


PLANTS = {
    "oscillator": oscillator_preset,
    "double-integrator": double_integrator,
    "sin-triangular": sin_triangular,
}


def get_plant(key) -> Plant:
    """Resolve a registry key or an inline ``{"A": ..., "c": ...}`` mapping."""
    if isinstance(key, str):
        try:
            return PLANTS[key]()
        except KeyError:
            raise KeyError(f"unknown plant {key!r}; known: {sorted(PLANTS)}") from None
    if isinstance(key, dict) and "A" in key and "c" in key:
        return make_linear_plant(key["A"], key["c"], name=key.get("name", "linear"))
    raise KeyError(f"cannot resolve plant from {key!r}")


def growth_rate(plant: Plant) -> float:
    """Exponent ``c`` of the growth bound ``|x(t)| <= exp(c t)|x0|``.

    Triangular plants use ``n L + n - 1``; linear plants use ``|A|`` since
    ``|exp(A t)| <= exp(|A| t)``. Generic plants carry no checkable bound.
    """
    if plant.kind == TRIANGULAR:
        return plant.n * plant.lipschitz + plant.n - 1
    if plant.kind == LINEAR:
        return induced_norm(plant.a)
    raise WrongPlantKind("no growth bound is available for generic plants")


def growth_bound_check(plant: Plant, x0, horizon, step) -> bool:
    """Check ``|x(t)| <= exp(c t)|x0|`` along a simulated trajectory."""
    c = growth_rate(plant)
    x0 = as_vector(x0, "x0")
    if not np.any(x0):
        return True
    times, states = integrate_segment(lambda t, x: plant.f(x), x0, 0.0, horizon, step)
    bound = np.exp(c * times) * np.linalg.norm(x0) * (1 + 1e-6)
    return bool(np.all(np.linalg.norm(states, axis=1) <= bound))
