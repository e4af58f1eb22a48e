"""Small-matrix Lie group operations for SO(3) and Z2 x| (SO(3) x SO(3)).

Rotations are plain 3x3 arrays. Algebra elements of so(3) are 3-vectors,
identified with skew matrices through :func:`hat`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SKEW_TOL = 1e-10
ROTATION_TOL = 1e-12
_TAYLOR_SWITCH = 1e-4


def hat(v):
    """Skew matrix with ``hat(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee(S):
    """Inverse of :func:`hat`.

    Raises
    ------
    ValueError
        If the symmetric part of ``S`` exceeds ``SKEW_TOL`` in Frobenius norm.
    """
    S = np.asarray(S, dtype=float)
    if S.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {S.shape}")
    sym = 0.5 * (S + S.T)
    if np.linalg.norm(sym) > SKEW_TOL:
        raise ValueError(f"matrix is not skew-symmetric (|sym| = {np.linalg.norm(sym):.3e})")
    return np.array([S[2, 1] - S[1, 2], S[0, 2] - S[2, 0], S[1, 0] - S[0, 1]]) * 0.5


def exp_so3(v):
    """Rodrigues exponential of ``hat(v)``.

    Uses a fourth-order Taylor expansion of the coefficients below
    ``|v| = 1e-4`` where ``sin(t)/t`` loses digits.
    """
    v = np.asarray(v, dtype=float)
    theta2 = float(v @ v)
    theta = np.sqrt(theta2)
    K = hat(v)
    if theta < _TAYLOR_SWITCH:
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + a * K + b * (K @ K)


def hat_batch(V):
    """:func:`hat` applied to each row of an ``(n, 3)`` array."""
    V = np.asarray(V, dtype=float)
    K = np.zeros(V.shape[:-1] + (3, 3))
    K[..., 0, 1], K[..., 0, 2] = -V[..., 2], V[..., 1]
    K[..., 1, 0], K[..., 1, 2] = V[..., 2], -V[..., 0]
    K[..., 2, 0], K[..., 2, 1] = -V[..., 1], V[..., 0]
    return K


def exp_so3_batch(V):
    """:func:`exp_so3` applied to each row of an ``(n, 3)`` array."""
    V = np.asarray(V, dtype=float)
    theta2 = np.einsum("...i,...i->...", V, V)
    theta = np.sqrt(theta2)
    small = theta < _TAYLOR_SWITCH
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta2 / 6.0 + theta2**2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24.0 + theta2**2 / 720.0, (1.0 - np.cos(safe)) / safe**2)
    K = hat_batch(V)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)


def is_rotation(R, tol=ROTATION_TOL):
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and np.linalg.norm(R.T @ R - np.eye(3)) <= tol
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def project_rotation(M):
    """Nearest rotation to ``M`` in Frobenius norm (orthogonal polar factor).

    Raises
    ------
    ValueError
        If ``M`` is singular or its polar factor is a reflection.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise ValueError("expected a finite 3x3 matrix")
    U, s, Vt = np.linalg.svd(M)
    if s[-1] <= s[0] * 1e-14:
        raise ValueError("matrix is singular; no unique nearest rotation")
    if np.linalg.det(M) <= 0.0:
        raise ValueError("matrix has non-positive determinant; polar factor is a reflection")
    return U @ Vt


def random_rotation(rng):
    """Haar-distributed rotation from a numpy Generator."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


# --- SO(3) adjoint operations -------------------------------------------------


def Ad_so3(U, xi):
    return np.asarray(U, dtype=float) @ np.asarray(xi, dtype=float)


def ad_so3(eta, zeta):
    return np.cross(eta, zeta)


def coad_so3(xi, mu):
    """``ad*_xi mu = mu x xi``, the dual of ``eta -> xi x eta``."""
    return np.cross(mu, xi)


# --- Z2 x| (SO(3) x SO(3)) ---------------------------------------------------


@dataclass(frozen=True)
class SemiDirectElement:
    """Element ``(tau, U, V)``; ``tau = -1`` carries the transposition."""

    tau: int
    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if self.tau not in (1, -1):
            raise ValueError(f"tau must be +1 or -1, got {self.tau}")
        object.__setattr__(self, "U", np.asarray(self.U, dtype=float))
        object.__setattr__(self, "V", np.asarray(self.V, dtype=float))

    @classmethod
    def identity(cls):
        return cls(1, np.eye(3), np.eye(3))

    @classmethod
    def random(cls, rng):
        tau = 1 if rng.random() < 0.5 else -1
        return cls(tau, random_rotation(rng), random_rotation(rng))

    def __mul__(self, other):
        if not isinstance(other, SemiDirectElement):
            return NotImplemented
        if self.tau == 1:
            return SemiDirectElement(other.tau, self.U @ other.U, self.V @ other.V)
        return SemiDirectElement(-other.tau, self.U @ other.V, self.V @ other.U)

    def inverse(self):
        if self.tau == 1:
            return SemiDirectElement(1, self.U.T, self.V.T)
        # (-1,U,V)(-1,U',V') = (1, U V', V U') = identity  =>  U' = V^T, V' = U^T
        return SemiDirectElement(-1, self.V.T, self.U.T)

    def act_matrix(self, A):
        """Left action on 3x3 matrices: ``U A V^T``, transposing first if tau = -1."""
        A = np.asarray(A, dtype=float)
        B = A if self.tau == 1 else A.T
        return self.U @ B @ self.V.T

    def Ad(self, eta, zeta):
        if self.tau == 1:
            return self.U @ eta, self.V @ zeta
        return self.U @ zeta, self.V @ eta


def pair_bracket(x, y):
    """Bracket ``[(eta, zeta), (eta~, zeta~)] = (eta x eta~, zeta x zeta~)``."""
    return np.cross(x[0], y[0]), np.cross(x[1], y[1])


def pair_coad(xi, mu):
    """Componentwise ``ad*`` on ``so(3) x so(3)``."""
    return np.cross(mu[0], xi[0]), np.cross(mu[1], xi[1])


def Ad(g, x):
    """Adjoint action for either group flavour.

    ``g`` is a rotation matrix (with ``x`` a 3-vector) or a
    :class:`SemiDirectElement` (with ``x`` a pair of 3-vectors).
    """
    if isinstance(g, SemiDirectElement):
        if not (isinstance(x, (tuple, list)) and len(x) == 2):
            raise TypeError("semidirect Ad needs a pair (eta, zeta)")
        return g.Ad(np.asarray(x[0], float), np.asarray(x[1], float))
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    if g.shape != (3, 3) or x.shape != (3,):
        raise TypeError("SO(3) Ad needs a 3x3 rotation and a 3-vector")
    return Ad_so3(g, x)


def ad(x, y):
    """Bracket for either algebra flavour."""
    if isinstance(x, (tuple, list)):
        if not (isinstance(y, (tuple, list)) and len(x) == len(y) == 2):
            raise TypeError("pair bracket needs two pairs")
        return pair_bracket(x, y)
    if isinstance(y, (tuple, list)):
        raise TypeError("cannot bracket a 3-vector with a pair")
    return ad_so3(x, y)


def coad(xi, mu):
    """``ad*_xi mu`` for either algebra flavour."""
    if isinstance(xi, (tuple, list)):
        if not (isinstance(mu, (tuple, list)) and len(xi) == len(mu) == 2):
            raise TypeError("pair ad* needs two pairs")
        return pair_coad(xi, mu)
    if isinstance(mu, (tuple, list)):
        raise TypeError("cannot pair a 3-vector with a dual pair")
    return coad_so3(xi, mu)
