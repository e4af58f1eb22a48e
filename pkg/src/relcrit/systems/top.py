"""Lagrange (symmetric heavy) top on SO(3) with the S^1 x S^1 action.

The action is ``(theta, phi) . A = exp(theta e3) A exp(-phi sigma)``: rotation
about the vertical in space and about the symmetry axis ``sigma`` in the
body. The invariant ``iota(A) = e3^T A sigma`` is the cosine of the tilt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from relcrit.critsolve import ScalarModel, algebra_product
from relcrit.geometry import SO3, Action, LiftedAction, register_action
from relcrit.invariants import InvariantMapSpec
from relcrit.lie import exp_so3, hat

E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class LagrangeTopParams:
    I1: float
    I3: float
    gm: float
    sigma: np.ndarray = field(default_factory=lambda: E3.copy())

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float)
        if self.I1 <= 0 or self.I3 <= 0:
            raise ValueError("moments of inertia must be positive")
        if abs(np.linalg.norm(s) - 1.0) > 1e-12:
            raise ValueError("sigma must be a unit vector")
        object.__setattr__(self, "sigma", s)

    @property
    def inertia(self):
        s = self.sigma
        return self.I1 * np.eye(3) + (self.I3 - self.I1) * np.outer(s, s)


class TopAction(Action):
    tag = "top"
    manifold = SO3
    algebra_dim = 2

    def __init__(self, params: LagrangeTopParams | None = None):
        self.sigma = E3.copy() if params is None else params.sigma

    def generators(self, A):
        A = np.asarray(A, dtype=float)
        return np.stack([(hat(E3) @ A).reshape(-1), (-A @ hat(self.sigma)).reshape(-1)])

    def act(self, g, A):
        theta, phi = g
        return exp_so3(theta * E3) @ np.asarray(A, dtype=float) @ exp_so3(-phi * self.sigma)

    def random_element(self, rng):
        return tuple(rng.uniform(0.0, 2 * np.pi, size=2))


register_action("top", TopAction)


def top_iota(params: LagrangeTopParams, A) -> float:
    return float(E3 @ np.asarray(A, dtype=float) @ params.sigma)


def top_invariant_map(params: LagrangeTopParams) -> InvariantMapSpec:
    jac = np.outer(E3, params.sigma).reshape(1, 9)
    return InvariantMapSpec(
        "top",
        SO3,
        1,
        lambda A: np.array([top_iota(params, A)]),
        jacobian=lambda A: jac,
        action=TopAction(params),
    )


def top_locked(params: LagrangeTopParams, gen, A) -> float:
    """Locked Lagrangian from the body angular velocity of the generator."""
    xl, xr = gen
    A = np.asarray(A, dtype=float)
    omega = xl * (A.T @ E3) - xr * params.sigma
    return float(0.5 * omega @ params.inertia @ omega - params.gm * (E3 @ A @ params.sigma))


def top_locked_scalar(params: LagrangeTopParams, gen, x) -> float:
    xl, xr = gen
    I1, I3, gm = params.I1, params.I3, params.gm
    return 0.5 * xl**2 * (I3 - I1) * x**2 - (xl * xr * I3 + gm) * x + 0.5 * (xl**2 * I1 + xr**2 * I3)


def _locked_scalar_grad(params: LagrangeTopParams, y):
    x, xl, xr = y
    I1, I3, gm = params.I1, params.I3, params.gm
    return np.array(
        [
            xl**2 * (I3 - I1) * x - (xl * xr * I3 + gm),
            xl * (I3 - I1) * x**2 - xr * I3 * x + xl * I1,
            -xl * I3 * x + xr * I3,
        ]
    )


def top_tilt_spin(params: LagrangeTopParams, iota: float, xi_l: float) -> float:
    """Body spin ``xi_r`` that makes a state with tilt ``iota`` critical."""
    if xi_l == 0:
        raise ValueError("xi_l = 0 admits only the sleeping equilibria")
    if not abs(iota) < 1:
        raise ValueError("tilted states need |iota| < 1")
    return (xi_l**2 * (params.I3 - params.I1) * iota - params.gm) / (xi_l * params.I3)


@dataclass(frozen=True)
class LambdaRoots:
    roots: tuple
    threshold: float
    discriminant: float


def top_lambda(params: LagrangeTopParams, iota: float, xi: float) -> LambdaRoots:
    """Roots ``lam`` with ``(xi_l, xi_r) = (lam, lam - xi)`` on the tilt equation.

    ``threshold`` is ``4 gm (I3 + (I1 - I3) iota)``; real roots exist iff
    ``xi^2 I3^2`` reaches it. No roots are returned below it.
    """
    I1, I3, gm = params.I1, params.I3, params.gm
    a = I3 + (I1 - I3) * iota
    threshold = 4.0 * gm * a
    disc = xi**2 * I3**2 - threshold
    if disc < 0:
        return LambdaRoots((), threshold, disc)
    if a == 0:
        return LambdaRoots((gm / (xi * I3),) if xi else (), threshold, disc)
    sq = np.sqrt(disc)
    return LambdaRoots(((I3 * xi + sq) / (2 * a), (I3 * xi - sq) / (2 * a)), threshold, disc)


def _align(u, v):
    """Rotation taking unit ``u`` to unit ``v``."""
    axis = np.cross(u, v)
    s, c = np.linalg.norm(axis), float(u @ v)
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        perp = np.cross(u, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-8:
            perp = np.cross(u, [0.0, 1.0, 0.0])
        return exp_so3(np.pi * perp / np.linalg.norm(perp))
    return exp_so3(axis / s * np.arctan2(s, c))


def top_state(params: LagrangeTopParams, iota: float, precession=0.0, spin=0.0):
    """Attitude with ``e3^T A sigma = iota``, ``A sigma`` in the x-z plane rotated by ``precession``."""
    if abs(iota) > 1:
        raise ValueError("|iota| must not exceed 1")
    beta = np.arccos(np.clip(iota, -1.0, 1.0))
    A = exp_so3(beta * np.array([0.0, 1.0, 0.0])) @ _align(params.sigma, E3)
    return TopAction(params).act((precession, spin), A)


def top_sleeping_states(params: LagrangeTopParams):
    """The two sleeping attitudes ``A sigma = e3`` and ``A sigma = -e3``."""
    return top_state(params, 1.0), top_state(params, -1.0)


def top_model(params: LagrangeTopParams) -> ScalarModel:
    """Locked-Lagrangian model with invariant ``(e3^T A sigma, xi_l, xi_r)``."""
    P = algebra_product(SO3, 2)
    row = np.outer(E3, params.sigma).reshape(-1)
    J = np.zeros((3, P.size))
    J[0, :9] = row
    J[1, 9] = 1.0
    J[2, 10] = 1.0
    action = TopAction(params)
    zero = lambda *a: np.zeros(2)  # noqa: E731
    map_ = InvariantMapSpec(
        "top-relative",
        P,
        3,
        lambda x: np.array([top_iota(params, x[0]), x[1][0], x[1][1]]),
        jacobian=lambda x: J,
        action=LiftedAction(action, lambda g, xi: np.asarray(xi, dtype=float), zero),
    )
    return ScalarModel(
        name="top",
        map=map_,
        f=lambda y: top_locked_scalar(params, (y[1], y[2]), y[0]),
        df=lambda y: _locked_scalar_grad(params, y),
        action=action,
        Ad=lambda g, xi: np.asarray(xi, dtype=float),
        coad=lambda xi, mu: np.zeros(2),
        xi_names=("xil", "xir"),
        locked=lambda A, xi: top_locked(params, xi, A),
        system="top",
    )


def top_isotropy_sample(params: LagrangeTopParams, A, theta=np.pi / 3):
    """Element ``(theta, +-theta)`` fixing a sleeping attitude."""
    iota = top_iota(params, A)
    if abs(abs(iota) - 1.0) > 1e-10:
        raise ValueError("only sleeping attitudes have continuous isotropy")
    return (theta, np.sign(iota) * theta)
