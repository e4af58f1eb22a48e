"""Free rigid body on SO(3) with SO(3) acting by left multiplication.

The invariant is the body angular velocity ``Omega = A^T xi`` and the scalar
function the kinetic energy ``0.5 Omega^T I Omega``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from relcrit.critsolve import ScalarModel, algebra_product, criticality_residual
from relcrit.geometry import SO3, Action, LiftedAction, register_action
from relcrit.invariants import InvariantMapSpec
from relcrit.lie import hat, random_rotation

DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class RigidBodyParams:
    inertia: np.ndarray

    def __post_init__(self):
        I = np.asarray(self.inertia, dtype=float)
        if I.shape == (3,):
            I = np.diag(I)
        if I.shape != (3, 3):
            raise ValueError("inertia must be 3x3 or a 3-vector of principal moments")
        if np.max(np.abs(I - I.T)) > 1e-12:
            raise ValueError("inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(I)) <= 0:
            raise ValueError("inertia must be positive definite")
        object.__setattr__(self, "inertia", 0.5 * (I + I.T))

    @classmethod
    def random(cls, rng, low=0.5, high=5.0, min_gap=0.1):
        """Random SPD inertia whose sorted eigenvalues differ relatively by ``min_gap``."""
        while True:
            lam = np.sort(rng.uniform(low, high, size=3))
            if np.all(np.diff(lam) >= min_gap * lam[:-1]):
                R = random_rotation(rng)
                return cls(R @ np.diag(lam) @ R.T)


class BodyAction(Action):
    tag = "body"
    manifold = SO3
    algebra_dim = 3

    def generators(self, A):
        A = np.asarray(A, dtype=float)
        return np.stack([(hat(e) @ A).reshape(-1) for e in np.eye(3)])

    def act(self, g, A):
        return np.asarray(g, dtype=float) @ np.asarray(A, dtype=float)

    def random_element(self, rng):
        return random_rotation(rng)


register_action("body", BodyAction)


def body_model(params: RigidBodyParams) -> ScalarModel:
    """Model ``0.5 (A^T xi)^T I (A^T xi)``; it is also the locked Lagrangian."""
    I = params.inertia
    P = algebra_product(SO3, 3)

    def evaluate(x):
        A, xi = x
        return A.T @ xi

    def jacobian(x):
        A, xi = x
        J = np.zeros((3, P.size))
        # d(A^T xi)_i / dA_ki = xi_k
        for i in range(3):
            J[i, i:9:3] = xi
        J[:, 9:] = A.T
        return J

    action = BodyAction()
    map_ = InvariantMapSpec("body", P, 3, evaluate, jacobian, LiftedAction(action, lambda g, xi: g @ xi, np.cross))
    return ScalarModel(
        name="body",
        map=map_,
        f=lambda om: 0.5 * float(om @ I @ om),
        df=lambda om: I @ om,
        action=action,
        Ad=lambda g, xi: np.asarray(g, dtype=float) @ xi,
        coad=lambda xi, mu: np.cross(mu, xi),
        xi_names=("xi1", "xi2", "xi3"),
        locked=lambda A, xi: 0.5 * float((A.T @ xi) @ I @ (A.T @ xi)),
        system="body",
    )


def body_residual(params: RigidBodyParams, xi, A=None) -> float:
    """Criticality residual of ``A`` (default identity) at generator ``xi``."""
    A = np.eye(3) if A is None else A
    return criticality_residual(body_model(params), A, xi)


@dataclass(frozen=True)
class PrincipalAxis:
    moment: float
    axis: np.ndarray
    multiplicity: int
    residual: float

    @property
    def kind(self):
        return {1: "axis", 2: "plane", 3: "sphere"}[self.multiplicity]


@dataclass(frozen=True)
class BodyEquilibria:
    axes: tuple
    fully_degenerate: bool

    @property
    def generators(self):
        return np.stack([ax.axis for ax in self.axes])


def body_relative_equilibria(params: RigidBodyParams, tol=DEGENERACY_TOL) -> BodyEquilibria:
    """Principal axes as generators at ``A = 1``, with eigenvalue multiplicities.

    Each axis carries its verified residual. Repeated moments mark the axis
    as spanning an eigenplane (or, for a spherical body, every direction).
    """
    lam, Q = np.linalg.eigh(params.inertia)
    axes = []
    for k in range(3):
        mult = int(np.sum(np.abs(lam - lam[k]) <= tol * max(1.0, abs(lam[k]))))
        u = Q[:, k]
        u = u if u[np.argmax(np.abs(u))] > 0 else -u
        axes.append(PrincipalAxis(float(lam[k]), u, mult, body_residual(params, u)))
    return BodyEquilibria(tuple(axes), axes[0].multiplicity == 3)
