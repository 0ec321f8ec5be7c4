"""Small dense linear-algebra kernels.

Everything here operates on tiny matrices (n up to ~10), so the algorithms
favour clarity over asymptotic cost: the Lyapunov equation is solved through
its Kronecker form, symmetric spectra come from cyclic Jacobi rotations and
the matrix exponential is a Pade(13) scaling-and-squaring scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    ExpmOverflow,
    NotHurwitz,
    NotObservable,
    NotSymmetric,
)

__all__ = [
    "Tolerances",
    "DEFAULT_TOL",
    "as_matrix",
    "as_vector",
    "eigvals",
    "is_hurwitz",
    "is_schur",
    "observability_matrix",
    "solve_lyapunov",
    "place_poles_continuous",
    "place_poles_discrete",
    "expm",
    "symmetric_extremal_eigs",
    "symmetric_eigvals",
    "induced_norm",
]


@dataclass(frozen=True)
class Tolerances:
    """Per-call numerical tolerances; pass a modified copy to override."""

    hurwitz: float = 1e-12
    symmetry: float = 1e-12
    eig_check: float = 1e-9
    rank: float = 1e-10
    jacobi: float = 1e-15
    jacobi_max_sweeps: int = 100


DEFAULT_TOL = Tolerances()


def as_matrix(a, name="matrix"):
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def as_vector(v, name="vector"):
    x = np.array(v, dtype=float).reshape(-1)
    if x.size == 0:
        raise DimensionMismatch(f"{name} must be non-empty")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def _square(a, name="matrix"):
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {m.shape}")
    return m


def eigvals(a):
    """Eigenvalues of a general square matrix (used only for stability checks)."""
    return np.linalg.eigvals(_square(a))


def is_hurwitz(a, tol=DEFAULT_TOL):
    return bool(np.all(eigvals(a).real < -tol.hurwitz))


def is_schur(a, tol=DEFAULT_TOL):
    return bool(np.all(np.abs(eigvals(a)) < 1.0 - tol.hurwitz))


def solve_lyapunov(a_cl, q, tol=DEFAULT_TOL):
    """Solve ``P a_cl + a_cl' P = -q`` for symmetric positive definite P.

    Parameters
    ----------
    a_cl : (n, n) array_like
        Hurwitz matrix.
    q : (n, n) array_like
        Symmetric positive definite right-hand side.

    Returns
    -------
    P : (n, n) ndarray
    """
    a = _square(a_cl, "a_cl")
    qm = _square(q, "q")
    n = a.shape[0]
    if qm.shape != (n, n):
        raise DimensionMismatch(f"q has shape {qm.shape}, expected {(n, n)}")
    ev = eigvals(a)
    if np.any(ev.real >= -tol.hurwitz):
        raise NotHurwitz(f"closed-loop matrix is not Hurwitz, eigenvalues {ev}")
    eye = np.eye(n)
    # row-major vec: vec(P A) = (I kron A') vec(P), vec(A' P) = (A' kron I) vec(P)
    big = np.kron(eye, a.T) + np.kron(a.T, eye)
    p = np.linalg.solve(big, -qm.reshape(-1)).reshape(n, n)
    return 0.5 * (p + p.T)


def observability_matrix(a, c):
    am = _square(a, "a")
    cv = as_vector(c, "c")
    n = am.shape[0]
    if cv.size != n:
        raise DimensionMismatch(f"c has dim {cv.size}, expected {n}")
    rows = [cv]
    for _ in range(n - 1):
        rows.append(rows[-1] @ am)
    return np.vstack(rows)


def _real_poly(targets, n):
    t = np.asarray(targets, dtype=complex).reshape(-1)
    if t.size != n:
        raise DimensionMismatch(f"need {n} target eigenvalues, got {t.size}")
    coeffs = np.poly(t)
    if np.max(np.abs(coeffs.imag)) > 1e-9 * max(1.0, np.max(np.abs(coeffs.real))):
        raise ValueError("target eigenvalues must be closed under conjugation")
    return coeffs.real


def _ackermann_output_injection(a, c, targets, tol):
    am = _square(a, "a")
    cv = as_vector(c, "c")
    n = am.shape[0]
    obs = observability_matrix(am, cv)
    if np.linalg.matrix_rank(obs, tol=tol.rank * max(1.0, np.abs(obs).max())) < n:
        raise NotObservable("observability matrix is rank deficient")
    coeffs = _real_poly(targets, n)
    # characteristic polynomial evaluated at a (Horner)
    phi = np.zeros((n, n))
    for coef in coeffs:
        phi = phi @ am + coef * np.eye(n)
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    # dual Ackermann: k = -phi(a) O^{-1} e_n
    return -phi @ np.linalg.solve(obs, e_n)


def place_poles_continuous(a, c, targets, tol=DEFAULT_TOL):
    """Gain ``k`` such that ``a + k c'`` has the requested eigenvalues."""
    return _ackermann_output_injection(a, c, targets, tol)


def place_poles_discrete(ad, c, targets, tol=DEFAULT_TOL):
    """Gain ``L`` such that ``ad + L c'`` has the requested eigenvalues.

    The targets must lie strictly inside the unit disk.
    """
    t = np.asarray(targets, dtype=complex).reshape(-1)
    if np.any(np.abs(t) >= 1.0):
        raise ValueError("discrete targets must lie strictly inside the unit disk")
    return _ackermann_output_injection(ad, c, t, tol)


_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152


def expm(a, t=1.0):
    """``exp(a t)`` by scaling and squaring with a degree-13 Pade approximant."""
    am = _square(a, "a") * float(t)
    n = am.shape[0]
    if not am.any():
        return np.eye(n)
    norm1 = np.abs(am).sum(axis=0).max()
    if not np.isfinite(norm1):
        raise ExpmOverflow("matrix norm is not finite")
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
    x = am / (2.0**s)
    b = _PADE13
    ident = np.eye(n)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    u = x @ (
        x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2)
        + b[7] * x6
        + b[5] * x4
        + b[3] * x2
        + b[1] * ident
    )
    v = (
        x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2)
        + b[6] * x6
        + b[4] * x4
        + b[2] * x2
        + b[0] * ident
    )
    r = np.linalg.solve(v - u, v + u)
    with np.errstate(over="raise", invalid="raise"):
        try:
            for _ in range(s):
                r = r @ r
        except FloatingPointError as exc:
            raise ExpmOverflow("overflow while squaring") from exc
    if not np.all(np.isfinite(r)):
        raise ExpmOverflow("result is not finite")
    return r


def _check_symmetric(s, tol):
    m = _square(s, "s")
    scale = max(1.0, np.abs(m).max())
    if np.abs(m - m.T).max() > tol.symmetry * scale:
        raise NotSymmetric("matrix is not symmetric")
    return 0.5 * (m + m.T)


def symmetric_eigvals(s, tol=DEFAULT_TOL):
    """All eigenvalues of a symmetric matrix via cyclic Jacobi, ascending."""
    a = _check_symmetric(s, tol).copy()
    n = a.shape[0]
    total = np.sqrt((a * a).sum())
    if total == 0.0:
        return np.zeros(n)
    for _ in range(tol.jacobi_max_sweeps):
        off = np.sqrt(max((a * a).sum() - (np.diag(a) ** 2).sum(), 0.0))
        if off <= tol.jacobi * total:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * max(1.0, abs(diff)):
                    # rotation angle below double resolution
                    a[p, q] = a[q, p] = 0.0
                    continue
                tau = diff / (2.0 * apq)
                t = np.copysign(1.0, tau) / (abs(tau) + np.hypot(1.0, tau))
                cs = 1.0 / np.hypot(1.0, t)
                sn = t * cs
                # a <- R' a R with R the (p, q) plane rotation
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = cs * col_p - sn * col_q
                a[:, q] = sn * col_p + cs * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = cs * row_p - sn * row_q
                a[q, :] = sn * row_p + cs * row_q
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))


def symmetric_extremal_eigs(s, tol=DEFAULT_TOL):
    """Return ``(lambda_min, lambda_max)`` of a symmetric matrix."""
    ev = symmetric_eigvals(s, tol)
    return float(ev[0]), float(ev[-1])


def induced_norm(m):
    """Spectral norm ``sqrt(lambda_max(m' m))``."""
    mm = as_matrix(m, "m")
    gram = mm @ mm.T if mm.shape[0] < mm.shape[1] else mm.T @ mm
    _, top = symmetric_extremal_eigs(0.5 * (gram + gram.T))
    return float(np.sqrt(max(top, 0.0)))
