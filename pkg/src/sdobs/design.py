"""Continuous-time observer designs and their sampled-data certificates.

Two constructions are provided:

* :func:`design_highgain` for triangular globally Lipschitz plants, with gains
  ``theta**i * k_i`` and the Lyapunov function ``e' D^-1 P D^-1 e``,
  ``D = diag(theta, ..., theta**n)``;
* :func:`design_linear` for linear plants ``x' = A x, y = c'x``.

Each yields the predictor mismatch constant ``K`` and the largest certified
upper diameter of the sampling partition ``r_max = 1/K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DimensionMismatch,
    DissipationFailed,
    NotHurwitz,
    ThetaTooSmall,
    WrongPlantKind,
)
from .linalg import (
    DEFAULT_TOL,
    as_matrix,
    as_vector,
    induced_norm,
    is_hurwitz,
    place_poles_continuous,
    solve_lyapunov,
    symmetric_extremal_eigs,
)
from .plants import LINEAR, TRIANGULAR, Plant

UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearForm:
    """Matrices such that ``F(z, y) = zz @ z + zy * y`` and rate ``= wz @ z``."""

    zz: np.ndarray
    zy: np.ndarray
    wz: np.ndarray


@dataclass(frozen=True)
class ContinuousObserver:
    """Observer ``z' = F(z, y)``, ``x_hat = psi(z)`` plus the predictor rate map.

    ``predictor_rate(z)`` is ``L_f h(psi(z))``: the rate at which the inter-sample
    output prediction ``w`` evolves between measurements.
    """

    dim: int
    F: Callable[[np.ndarray, float], np.ndarray]
    psi: Callable[[np.ndarray], np.ndarray]
    predictor_rate: Callable[[np.ndarray], float]
    linear: Optional[LinearForm] = field(default=None, repr=False)
    name: str = "observer"

    def __post_init__(self):
        zero = np.zeros(self.dim)
        if np.abs(self.F(zero, 0.0)).max() > 1e-12 or np.abs(self.psi(zero)).max() > 1e-12:
            raise ValueError("observer must satisfy F(0, 0) = 0 and psi(0) = 0")


def _identity(z):
    return z


def chain_matrix(n):
    """Shift matrix with ones on the superdiagonal."""
    return np.eye(n, k=1)


def first_unit(n):
    e = np.zeros(n)
    e[0] = 1.0
    return e


def _finite_or_unbounded(x):
    return UNBOUNDED if math.isinf(x) else x


@dataclass(frozen=True)
class HighGainDesign:
    observer: ContinuousObserver
    k: np.ndarray
    theta: float
    P: np.ndarray
    mu: float
    K1: float
    K2: float
    K: float
    r_max: float
    lipschitz: float
    n: int

    kind = "highgain"

    @property
    def scaling(self):
        return np.array([self.theta ** (i + 1) for i in range(self.n)])

    def lyapunov_value(self, e):
        """``V(e) = e' D^-1 P D^-1 e``."""
        s = np.asarray(e, dtype=float) / self.scaling
        return float(s @ self.P @ s)

    @property
    def decay_rate(self):
        """Exponential rate ``theta mu / |P|`` of the noise-free Lyapunov decay."""
        return self.theta * self.mu / induced_norm(self.P)

    def report(self):
        return {
            "design": self.kind,
            "k": self.k.tolist(),
            "theta": self.theta,
            "P": self.P.tolist(),
            "mu": self.mu,
            "gamma": None,
            "L": self.lipschitz,
            "K1": self.K1,
            "K2": self.K2,
            "K": self.K,
            "r_max": _finite_or_unbounded(self.r_max),
        }


@dataclass(frozen=True)
class LinearDesign:
    observer: ContinuousObserver
    k: np.ndarray
    P: np.ndarray
    mu: float
    gamma: float
    K1: float
    K2: float
    K: float
    r_max: float

    kind = "linear"

    @property
    def iss_gain(self):
        """Asymptotic gain ``sqrt(gamma / (2 mu K1))`` from noise to estimation error."""
        return math.sqrt(self.gamma / (2.0 * self.mu * self.K1))

    def report(self):
        return {
            "design": self.kind,
            "k": self.k.tolist(),
            "theta": None,
            "P": self.P.tolist(),
            "mu": self.mu,
            "gamma": self.gamma,
            "L": None,
            "K1": self.K1,
            "K2": self.K2,
            "K": self.K,
            "r_max": _finite_or_unbounded(self.r_max),
        }


def _reciprocal(K):
    return math.inf if K == 0.0 else 1.0 / K


def theta_lower_bound(P, lipschitz, mu):
    n = P.shape[0]
    return max(1.0, 2.0 * induced_norm(P) * lipschitz * math.sqrt(n) / mu)


def highgain_mismatch(lipschitz, theta, P, k, mu):
    """``2 (L + theta) |P||k| / mu * sqrt(K2 / K1)``."""
    K1, K2 = symmetric_extremal_eigs(P)
    return (
        2.0
        * (lipschitz + theta)
        * induced_norm(P)
        * float(np.linalg.norm(k))
        / mu
        * math.sqrt(K2 / K1)
    )


def design_highgain(plant: Plant, cont_poles, mu, theta_override=None, tol=DEFAULT_TOL):
    """High-gain observer for a triangular plant.

    ``k`` places the eigenvalues of ``A + k c'`` (``A`` the chain matrix) at
    ``cont_poles``; ``P`` solves the Lyapunov equation with right-hand side
    ``2 mu I``. ``theta`` defaults to its certified lower bound.
    """
    if plant.kind != TRIANGULAR:
        raise WrongPlantKind(f"high-gain design needs a triangular plant, got {plant.kind}")
    if mu <= 0:
        raise ValueError("mu must be positive")
    n = plant.n
    A = chain_matrix(n)
    c = first_unit(n)
    k = place_poles_continuous(A, c, cont_poles, tol)
    a_cl = A + np.outer(k, c)
    if not is_hurwitz(a_cl, tol):
        raise NotHurwitz("requested continuous poles are not stable")
    P = solve_lyapunov(a_cl, 2.0 * mu * np.eye(n), tol)
    K1, K2 = symmetric_extremal_eigs(P)
    L = plant.lipschitz
    bound = theta_lower_bound(P, L, mu)
    if theta_override is None:
        theta = bound
    else:
        theta = float(theta_override)
        if theta < bound:
            raise ThetaTooSmall(f"theta={theta} is below the certified bound {bound:.6g}")
    gains = np.array([theta ** (i + 1) for i in range(n)]) * k
    f = plant.f
    rate = plant.output_rate

    def F(z, y):
        return f(z) + gains * (z[0] - y)

    observer = ContinuousObserver(
        dim=n, F=F, psi=_identity, predictor_rate=rate, name=f"highgain[{plant.name}]"
    )
    K = highgain_mismatch(L, theta, P, k, mu)
    return HighGainDesign(
        observer=observer,
        k=k,
        theta=theta,
        P=P,
        mu=float(mu),
        K1=K1,
        K2=K2,
        K=K,
        r_max=_reciprocal(K),
        lipschitz=L,
        n=n,
    )


def dissipation_matrix(p, a, k, c, mu, gamma):
    """The (n+1)x(n+1) quadratic form whose negative semidefiniteness is the
    dissipation inequality with storage ``x'Px`` and supply ``gamma |v|^2``."""
    P = as_matrix(p, "p")
    A = as_matrix(a, "a")
    kv = as_vector(k, "k")
    cv = as_vector(c, "c")
    n = A.shape[0]
    if P.shape != (n, n) or A.shape != (n, n) or kv.size != n or cv.size != n:
        raise DimensionMismatch("inconsistent dimensions in dissipation check")
    a_cl = A + np.outer(kv, cv)
    top = P @ a_cl + a_cl.T @ P + 2.0 * mu * P
    pk = P @ kv
    m = np.empty((n + 1, n + 1))
    m[:n, :n] = 0.5 * (top + top.T)
    m[:n, n] = pk
    m[n, :n] = pk
    m[n, n] = -gamma
    return m


def _nsd(m, tol):
    _, top = symmetric_extremal_eigs(m, tol)
    return top <= tol.eig_check * max(1.0, float(np.abs(m).max()))


def verify_dissipation(p, a, k, c, mu, gamma, tol=DEFAULT_TOL) -> bool:
    """True iff ``x'P(A+kc')x + x'(A+kc')'Px + 2x'Pkv <= -2 mu x'Px + gamma v^2``
    for all ``(x, v)``."""
    P = as_matrix(p, "p")
    symmetric_extremal_eigs(P, tol)  # raises NotSymmetric
    return _nsd(dissipation_matrix(P, a, k, c, mu, gamma), tol)


def _largest_mu(P, a_cl, tol, iters=200):
    """Largest ``mu`` with ``P a_cl + a_cl' P + 2 mu P <= 0`` by bisection."""
    base = P @ a_cl + a_cl.T @ P

    def ok(mu):
        return _nsd(base + 2.0 * mu * P, tol)

    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2.0 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return lo


def _smallest_gamma(P, A, k, c, mu, tol, rel=1e-6):
    """Smallest ``gamma`` passing :func:`verify_dissipation`, bisected to ``rel``."""

    def ok(g):
        return _nsd(dissipation_matrix(P, A, k, c, mu, g), tol)

    hi = 1.0
    for _ in range(200):
        if ok(hi):
            break
        hi *= 2.0
    else:
        raise DissipationFailed(f"no gamma satisfies the dissipation inequality at mu={mu}")
    lo = 0.0
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _schur_gamma(P, a_cl, k, mu):
    m = P @ a_cl + a_cl.T @ P + 2.0 * mu * P
    pk = P @ k
    return float(-pk @ np.linalg.solve(m, pk))


def linear_mismatch(A, c, gamma, mu, K1):
    """``|c'A| sqrt(gamma / (2 mu K1))``."""
    return induced_norm(np.asarray(c) @ np.asarray(A)) * math.sqrt(gamma / (2.0 * mu * K1))


OSCILLATOR_Q = ((12.0, -4.5), (-4.5, 2.0))


def _default_q(plant, k):
    if plant.name == "oscillator" and np.array_equal(k, [-4.0, 0.0]):
        return np.array(OSCILLATOR_Q)
    return np.eye(plant.n)


def design_linear(plant: Plant, k, mu=None, gamma=None, P=None, Q=None, tol=DEFAULT_TOL):
    """Luenberger-type observer ``z' = A z + k(c'z - y)`` for a linear plant.

    If ``P`` is given it is used as-is and ``(mu, gamma)`` must be supplied and
    pass :func:`verify_dissipation`. Otherwise ``P`` solves the Lyapunov equation
    for ``A + k c'`` with right-hand side ``Q``; a missing
    ``mu`` is chosen in ``(0, mu_max)`` to minimise the mismatch constant and a
    missing ``gamma`` is the smallest admissible value.

    The default ``Q`` is the identity, except for the oscillator with its
    reference gain ``k = (-4, 0)``, where ``Q = [[12, -4.5], [-4.5, 2]]`` recovers
    the reference ``P = [[2.5, -1], [-1, 0.5]]``.
    """
    if plant.kind != LINEAR:
        raise WrongPlantKind(f"linear design needs a linear plant, got {plant.kind}")
    A, c = plant.a, plant.c
    n = plant.n
    kv = as_vector(k, "k")
    if kv.size != n:
        raise DimensionMismatch(f"k has dim {kv.size}, expected {n}")
    a_cl = A + np.outer(kv, c)
    if not is_hurwitz(a_cl, tol):
        raise NotHurwitz("A + k c' is not Hurwitz")

    if P is not None:
        Pm = as_matrix(P, "P")
        if mu is None or gamma is None:
            raise ValueError("an explicit P requires explicit mu and gamma")
    else:
        if Q is None:
            Q = _default_q(plant, kv)
        Pm = solve_lyapunov(a_cl, Q, tol)
        if mu is None:
            mu_max = _largest_mu(Pm, a_cl, tol)
            res = minimize_scalar(
                lambda m: _schur_gamma(Pm, a_cl, kv, m) / m,
                bounds=(1e-6 * mu_max, mu_max * (1 - 1e-6)),
                method="bounded",
                options={"xatol": 1e-10 * mu_max},
            )
            mu = float(res.x)
        if gamma is None:
            gamma = _smallest_gamma(Pm, A, kv, c, mu, tol)

    mu = float(mu)
    gamma = float(gamma)
    if mu <= 0 or gamma <= 0:
        raise ValueError("mu and gamma must be positive")
    K1, K2 = symmetric_extremal_eigs(Pm, tol)
    if K1 <= 0:
        raise DissipationFailed("P is not positive definite")
    if not verify_dissipation(Pm, A, kv, c, mu, gamma, tol):
        raise DissipationFailed(
            f"dissipation inequality fails for mu={mu:.6g}, gamma={gamma:.6g}"
        )

    zy = -kv.copy()
    ca = c @ A
    for arr in (a_cl, zy, ca):
        arr.setflags(write=False)

    def F(z, y):
        return a_cl @ z + zy * y

    observer = ContinuousObserver(
        dim=n,
        F=F,
        psi=_identity,
        predictor_rate=lambda z: float(ca @ z),
        linear=LinearForm(zz=a_cl, zy=zy, wz=ca),
        name=f"linear[{plant.name}]",
    )
    K = linear_mismatch(A, c, gamma, mu, K1)
    return LinearDesign(
        observer=observer,
        k=kv,
        P=Pm,
        mu=mu,
        gamma=gamma,
        K1=K1,
        K2=K2,
        K=K,
        r_max=_reciprocal(K),
    )


def max_sampling_period(design) -> float:
    """Largest certified upper diameter ``1/K`` (``inf`` when ``K = 0``)."""
    return design.r_max


def mismatch_constant(design) -> float:
    return design.K
