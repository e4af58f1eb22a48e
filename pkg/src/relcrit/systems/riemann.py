"""Affine fluid (Riemann ellipsoid) structure on SL(3) x R^3 x R^3.

The group ``Z2 x| (SO(3) x SO(3))`` acts by ``(1, U, V).(A, eta, zeta) =
(U A V^T, U eta, V zeta)`` and ``(-1, 1, 1).(A, eta, zeta) = (A^T, zeta, eta)``.
The invariant map has nine components

    ``[phi1, phi2, K, K', eta^T A zeta, eta^T A^-T zeta, C, alpha1, alpha2]``

with ``K(A, eta, zeta) = 0.5 |hat(eta) A - A hat(zeta)|^2`` and ``K' = K(A^-T, ...)``.

Covector conventions
--------------------
The closed-form covectors (rigid-kernel spans at coplanar states, kernel
spans at S-type states) are exact for the unhalved kinetic term
``|hat(eta) A - A hat(zeta)|^2``. This module keeps the halved ``K`` in the
invariant and returns those covectors already converted to it, i.e. with
their ``K`` and ``K'`` components doubled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from relcrit.critsolve import ScalarModel, algebra_product
from relcrit.geometry import SL3, Action, LiftedAction, ManifoldPoint, register_action
from relcrit.invariants import InvariantMapSpec
from relcrit.lie import SemiDirectElement, hat, is_rotation, pair_bracket, pair_coad

CODOMAIN_DIM = 9
CHI = slice(2, 7)
DET_TOL = 1e-10
COND_LIMIT = 1e12
LABELS = ("phi1", "phi2", "K", "K_inv", "eta_A_zeta", "eta_Ainv_zeta", "C", "alpha1", "alpha2")


# --- states -------------------------------------------------------------------


@dataclass(frozen=True)
class RiemannState:
    """A point ``(A, eta, zeta)`` of ``SL(3) x R^3 x R^3``.

    ``normal_form`` optionally records ``a``, ``U``, ``V`` and the polar data
    the state was built from; it is checked against ``(A, eta, zeta)``.
    """

    A: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    normal_form: dict | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        zeta = np.asarray(self.zeta, dtype=float)
        if A.shape != (3, 3) or eta.shape != (3,) or zeta.shape != (3,):
            raise ValueError("expected a 3x3 matrix and two 3-vectors")
        if not np.all(np.isfinite(A)) or abs(np.linalg.det(A) - 1.0) > DET_TOL:
            raise ValueError(f"det A = {np.linalg.det(A)!r} is not 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "zeta", zeta)
        nf = self.normal_form
        if nf is not None:
            U, V = nf["U"], nf["V"]
            if not (is_rotation(U) and is_rotation(V)):
                raise ValueError("normal form U, V must be rotations")
            err = np.linalg.norm(U @ np.diag(nf["a"]) @ V.T - A)
            if err > 1e-10:
                raise ValueError(f"normal form does not reproduce A (error {err:.2e})")

    @property
    def xi(self):
        return np.concatenate([self.eta, self.zeta])

    @classmethod
    def from_point(cls, A, xi):
        xi = np.asarray(xi, dtype=float)
        return cls(A, xi[:3], xi[3:])


def _check_axes(a):
    a = np.asarray(a, dtype=float)
    if a.shape != (3,):
        raise ValueError("axes must be a 3-vector")
    if abs(np.prod(a) - 1.0) > 1e-12:
        raise ValueError(f"axes must satisfy a1 a2 a3 = 1, got {np.prod(a)!r}")
    return a


def polar_pair(r, theta):
    """``(r cos(theta/2), r sin(theta/2))``."""
    return r * np.cos(theta / 2.0), r * np.sin(theta / 2.0)


def coplanar_state(a, r1, r2, theta1, theta2, U=None, V=None) -> RiemannState:
    """``(U diag(a) V^T, U eta, V zeta)`` with ``eta, zeta`` in the e1-e2 plane."""
    a = _check_axes(a)
    U = np.eye(3) if U is None else np.asarray(U, dtype=float)
    V = np.eye(3) if V is None else np.asarray(V, dtype=float)
    e1, z1 = polar_pair(r1, theta1)
    e2, z2 = polar_pair(r2, theta2)
    nf = {"a": a, "U": U, "V": V, "r": (r1, r2), "theta": (theta1, theta2), "kind": "coplanar"}
    return RiemannState(U @ np.diag(a) @ V.T, U @ np.array([e1, e2, 0.0]), V @ np.array([z1, z2, 0.0]), nf)


def stype_state(a, j, r, theta, U=None, V=None) -> RiemannState:
    """``(U diag(a) V^T, eta U e_j, zeta V e_j)`` with ``(eta, zeta) = polar_pair(r, theta)``."""
    a = _check_axes(a)
    if j not in (1, 2, 3):
        raise ValueError("axis index j must be 1, 2 or 3")
    U = np.eye(3) if U is None else np.asarray(U, dtype=float)
    V = np.eye(3) if V is None else np.asarray(V, dtype=float)
    eta, zeta = polar_pair(r, theta)
    e = np.eye(3)[j - 1]
    nf = {"a": a, "U": U, "V": V, "r": r, "theta": theta, "j": j, "kind": "stype"}
    return RiemannState(U @ np.diag(a) @ V.T, eta * (U @ e), zeta * (V @ e), nf)


# --- invariant ----------------------------------------------------------------


def _inverse(A):
    Ainv = np.linalg.inv(A)
    if not np.all(np.isfinite(Ainv)) or np.linalg.cond(A) > COND_LIMIT:
        raise ValueError("A is numerically singular")
    return Ainv


def _kinetic(A, eta, zeta):
    M = hat(eta) @ A - A @ hat(zeta)
    return 0.5 * float(np.sum(M * M))


def _coupling(A, eta, zeta):
    S = A @ A.T
    T = A.T @ A
    return float(np.cross(eta, S @ eta) @ (A @ zeta) + np.cross(zeta, T @ zeta) @ (A.T @ eta))


def riemann_iota(state: RiemannState) -> np.ndarray:
    """Nine-component invariant (see module docstring for the layout)."""
    A, eta, zeta = state.A, state.eta, state.zeta
    Ainv = _inverse(A)
    B = Ainv.T
    n_eta, n_zeta = eta @ eta, zeta @ zeta
    return np.array(
        [
            np.sum(A * A),
            np.sum(Ainv * Ainv),
            _kinetic(A, eta, zeta),
            _kinetic(B, eta, zeta),
            eta @ A @ zeta,
            eta @ B @ zeta,
            _coupling(A, eta, zeta),
            n_eta + n_zeta,
            (n_eta - n_zeta) ** 2,
        ]
    )


def riemann_fields(y):
    """Split a 9-vector into ``{"phi", "chi", "alpha"}``."""
    y = np.asarray(y, dtype=float)
    return {"phi": y[:2], "chi": y[CHI], "alpha": y[7:]}


def _axial(X):
    """``v`` with ``<X, hat(w)>_F = v . w``."""
    return np.array([X[2, 1] - X[1, 2], X[0, 2] - X[2, 0], X[1, 0] - X[0, 1]])


def _kinetic_grads(A, eta, zeta):
    M = hat(eta) @ A - A @ hat(zeta)
    return -hat(eta) @ M + M @ hat(zeta), _axial(M @ A.T), -_axial(A.T @ M)


def riemann_jacobian(state: RiemannState) -> np.ndarray:
    """``(9, 15)`` derivative with respect to ``(vec(A), eta, zeta)``."""
    A, eta, zeta = state.A, state.eta, state.zeta
    Ainv = _inverse(A)
    B = Ainv.T
    J = np.zeros((CODOMAIN_DIM, 15))

    def put(row, dA, deta, dzeta):
        J[row, :9] = np.asarray(dA).reshape(-1)
        J[row, 9:12] = deta
        J[row, 12:] = dzeta

    put(0, 2 * A, 0, 0)
    put(1, -2 * B @ Ainv @ B, 0, 0)
    gA, ge, gz = _kinetic_grads(A, eta, zeta)
    put(2, gA, ge, gz)
    gB, ge, gz = _kinetic_grads(B, eta, zeta)
    put(3, -B @ gB.T @ B, ge, gz)
    put(4, np.outer(eta, zeta), A @ zeta, A.T @ eta)
    put(5, -B @ np.outer(zeta, eta) @ B, B @ zeta, B.T @ eta)

    S, T = A @ A.T, A.T @ A
    w, v = A @ zeta, A.T @ eta
    u1 = np.cross(eta, S @ eta)
    u2 = np.cross(zeta, T @ zeta)
    X1 = np.outer(np.cross(w, eta), eta)
    X2 = np.outer(np.cross(v, zeta), zeta)
    dA = np.outer(u1, zeta) + (X1 + X1.T) @ A + np.outer(eta, u2) + A @ (X2 + X2.T)
    deta = np.cross(S @ eta, w) + S @ np.cross(w, eta) + A @ u2
    dzeta = A.T @ u1 + np.cross(T @ zeta, v) + T @ np.cross(v, zeta)
    put(6, dA, deta, dzeta)

    D = eta @ eta - zeta @ zeta
    put(7, 0, 2 * eta, 2 * zeta)
    put(8, 0, 4 * D * eta, -4 * D * zeta)
    return J


def riemann_invariant_map() -> InvariantMapSpec:
    """Invariant on ``SL(3) x R^6`` (generator ``(eta, zeta)`` flattened)."""
    P = algebra_product(SL3, 6)

    def evaluate(x):
        return riemann_iota(RiemannState.from_point(*x))

    def jacobian(x):
        return riemann_jacobian(RiemannState.from_point(*x))

    return InvariantMapSpec("riemann", P, CODOMAIN_DIM, evaluate, jacobian, _lifted_action())


# --- symmetry -----------------------------------------------------------------


class RiemannAction(Action):
    """``Z2 x| (SO(3) x SO(3))`` acting on SL(3)."""

    tag = "riemann"
    manifold = SL3
    algebra_dim = 6

    def generators(self, A):
        A = np.asarray(A, dtype=float)
        rows = [(hat(e) @ A).reshape(-1) for e in np.eye(3)]
        rows += [(-A @ hat(e)).reshape(-1) for e in np.eye(3)]
        return np.stack(rows)

    def act(self, g: SemiDirectElement, A):
        return g.act_matrix(np.asarray(A, dtype=float))

    def random_element(self, rng):
        return SemiDirectElement.random(rng)


register_action("riemann", RiemannAction)


def _flat_Ad(g, xi):
    xi = np.asarray(xi, dtype=float)
    return np.concatenate(g.Ad(xi[:3], xi[3:]))


def _flat_bracket(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return np.concatenate(pair_bracket((x[:3], x[3:]), (y[:3], y[3:])))


def _flat_coad(xi, mu):
    xi, mu = np.asarray(xi, dtype=float), np.asarray(mu, dtype=float)
    return np.concatenate(pair_coad((xi[:3], xi[3:]), (mu[:3], mu[3:])))


def _lifted_action():
    return LiftedAction(RiemannAction(), _flat_Ad, _flat_bracket)


def act_state(g: SemiDirectElement, state: RiemannState) -> RiemannState:
    eta, zeta = g.Ad(state.eta, state.zeta)
    return RiemannState(g.act_matrix(state.A), eta, zeta)


def z2_act_state(signs, state: RiemannState) -> RiemannState:
    """``(-1, 1)`` negates the generator, ``(1, -1)`` replaces ``A`` by ``A^-T``."""
    s1, s2 = signs
    A = state.A if s2 == 1 else _inverse(state.A).T
    return RiemannState(A, s1 * state.eta, s1 * state.zeta)


def z2_act_codomain(signs, y) -> np.ndarray:
    """Linear action on the codomain matching :func:`z2_act_state`."""
    s1, s2 = signs
    y = np.array(y, dtype=float)
    if s1 == -1:
        y[6] = -y[6]
    if s2 == -1:
        y[[0, 1, 2, 3, 4, 5]] = y[[1, 0, 3, 2, 5, 4]]
        y[6] = -y[6]
    return y


# --- models -------------------------------------------------------------------


def riemann_model(f, df=None, name="riemann") -> ScalarModel:
    """Model ``f o iota`` for a user-supplied ``f`` on the 9-dim codomain."""
    return ScalarModel(
        name=name,
        map=riemann_invariant_map(),
        f=f,
        df=df,
        action=RiemannAction(),
        Ad=_flat_Ad,
        coad=_flat_coad,
        xi_names=("eta1", "eta2", "eta3", "zeta1", "zeta2", "zeta3"),
        system="riemann",
    )


def kinetic_model() -> ScalarModel:
    """``f(y) = y_K``, the kinetic component alone."""
    e = np.zeros(CODOMAIN_DIM)
    e[2] = 1.0
    return riemann_model(lambda y: float(y[2]), lambda y: e, name="riemann-kinetic")


# --- rigid kernel at coplanar states ------------------------------------------


def krig_matrix(state: RiemannState) -> np.ndarray:
    """``d chi / d xi o ad_xi`` as a ``(5, 6)`` matrix; its left kernel is ``K_rig``."""
    J = riemann_jacobian(state)[CHI, 9:]
    ad = np.zeros((6, 6))
    ad[:3, :3] = hat(state.eta)
    ad[3:, 3:] = hat(state.zeta)
    return J @ ad


def krig_membership(state: RiemannState, v) -> float:
    """``|M^T v| / (|M| |v|)`` for ``M = krig_matrix(state)`` (0 if ``M = 0``)."""
    M = krig_matrix(state)
    v = np.asarray(v, dtype=float)
    scale = np.linalg.norm(M) * np.linalg.norm(v)
    return float(np.linalg.norm(M.T @ v) / scale) if scale > 0 else 0.0


def krig_dimension(state: RiemannState) -> int:
    from relcrit.critsolve import kernel_basis

    return int(kernel_basis(krig_matrix(state).T).shape[1])


def _to_halved_kinetic5(v):
    """Convert a covector from the unhalved kinetic convention."""
    v = np.array(v, dtype=float)
    v[:2] *= 2.0
    return v


def _v_unhalved(a, theta1, theta2):
    e = np.eye(5)
    c = (np.cos(theta1), np.cos(theta2))
    s = (np.sin(theta1), np.sin(theta2))

    def w(i, j):
        return c[i - 1] * s[j - 1] * (a[j - 1] * e[2] - a[i - 1] / a[2] * e[3])

    return (c[1] - c[0]) * (0.5 * e[0] + 2.0 * e[3]) - w(1, 2) + w(2, 1)


def riemann_krig_span(a, theta1, theta2, tol=1e-12):
    """Covectors ``(v, v_tilde)`` on the 5 chi components, in ``K_rig``.

    Raises
    ------
    ValueError
        If ``a1 = a2`` (use :func:`riemann_krig_axisymmetric`).
    """
    a = _check_axes(a)
    if abs(a[0] - a[1]) <= tol * max(1.0, abs(a[0])):
        raise ValueError("a1 = a2: use the axisymmetric rigid kernel")
    v = _v_unhalved(a, theta1, theta2)
    vt = _v_unhalved(1.0 / a, theta1, theta2)[[1, 0, 3, 2, 4]]
    return _to_halved_kinetic5(v), _to_halved_kinetic5(vt)


def riemann_krig_axisymmetric(a):
    """Three covectors in ``K_rig`` at coplanar states with axes ``(a, a, a^-2)``."""
    e = np.eye(5)
    return tuple(_to_halved_kinetic5(v) for v in (e[0] + 4 * e[3], e[1] + 4 * e[2], e[2] - a**2 * e[3]))


# --- rigid axes ----------------------------------------------------------------


def riemann_remark_axes(theta1, theta2, tol=1e-12) -> np.ndarray:
    """Axes at which ``e1`` (the kinetic direction) lies in ``K_rig``.

    Raises
    ------
    ValueError
        If ``cos(theta1) + cos(theta2) = 0`` or ``sin(2 theta1) sin(2 theta2) <= 0``.
    """
    c1, c2 = np.cos(theta1), np.cos(theta2)
    s1, s2 = np.sin(theta1), np.sin(theta2)
    csum = c1 + c2
    denom = np.sin(2 * theta1) * np.sin(2 * theta2)
    if abs(csum) <= tol or denom <= tol:
        raise ValueError("degenerate angles: need cos t1 + cos t2 != 0 and sin 2t1 sin 2t2 > 0")
    a3 = np.cbrt(csum**2 / denom)
    return np.array([2 * c1 * s2 / csum * a3, 2 * c2 * s1 / csum * a3, a3])


# --- S-type kernels -----------------------------------------------------------


def _frame_axes(a, j):
    """Axes relabelled cyclically so that axis ``j`` comes last."""
    return np.roll(a, 3 - j)


def _embed(grave=(0.0, 0.0), acute=(0.0,) * 5):
    return np.concatenate([grave, acute, [0.0, 0.0]])


def riemann_stype_kernel(a, j, r, theta, tol=1e-9):
    """Covectors (9 components) in ``ker d_A^* iota`` at an S-type state.

    Distinct ``|a_i|`` give five vectors; equal ``|a_k|`` off axis ``j``
    (continuous isotropy) give six. Covectors are converted to the halved
    kinetic convention.

    Raises
    ------
    ValueError
        If ``r = 0``, if ``|a_j|`` equals another ``|a_k|``, or if the
        axisymmetric case has ``|a| = 1``.
    """
    a = _check_axes(a)
    if j not in (1, 2, 3):
        raise ValueError("axis index j must be 1, 2 or 3")
    if r == 0:
        raise ValueError("r must be nonzero")
    b1, b2, b3 = _frame_axes(a, j)
    m1, m2, m3 = np.abs([b1, b2, b3])
    st = np.sin(theta)
    if abs(m1 - m2) <= tol * m1:
        if abs(m1 - m3) <= tol * m1:
            raise ValueError("|a| = 1 has no closed-form S-type kernel")
        eta, zeta = polar_pair(r, theta)
        aa = b1
        c = aa**-6 - 1.0
        vectors = [
            _embed([(eta - zeta) ** 2, 0], [c, 0, 0, 0, 0]),
            _embed([eta * zeta, 0], [0, 0, 0, 2 * c, 0]),
            _embed([aa**2, -1], [0, 0, 0, 0, 0]),
            _embed([0, 0], [1, aa**4, 0, 0, 0]),
            _embed([0, 0], [0, 0, aa**4, 1, 0]),
            _embed([0, 0], [0, 0, 0, 0, 1]),
        ]
    elif abs(m1 - m3) <= tol * m3 or abs(m2 - m3) <= tol * m3:
        raise ValueError("|a_j| equals another axis: no closed-form S-type kernel")
    else:
        c1 = (b1**2 - b3**2) * (b3**2 - b2**2) / (r**2 * b3)

        def c2(u):
            return u**3 - b1 / b2 - b2 / b1 + st

        def c3(u):
            return 1.0 / u - u**2 * st

        u, w = 1.0 / b3, b3
        vectors = [
            _embed([c2(u), c3(u)], [c1, 0, 0, 0, 0]),
            _embed([c3(w), c2(w)], [0, c1, 0, 0, 0]),
            _embed([st * b3**2, -st], [0, 0, 4 * c1, 0, 0]),
            _embed([0, 0], [0, 0, 1, b3**2, 0]),
            _embed([0, 0], [0, 0, 0, 0, 1]),
        ]
    return tuple(_to_halved_kinetic9(v) for v in vectors)


def _to_halved_kinetic9(v):
    v = np.array(v, dtype=float)
    v[2:4] *= 2.0
    return v


def slice_differential(state: RiemannState) -> np.ndarray:
    """``d_A iota`` at fixed ``(eta, zeta)``: ``(9, 8)`` in the SL(3) tangent basis."""
    B = SL3.tangent_basis(state.A)
    return riemann_jacobian(state)[:, :9] @ B.T


def kernel_membership(state: RiemannState, v) -> float:
    """``|d_A iota^T v| / (|d_A iota| |v|)``."""
    D = slice_differential(state)
    v = np.asarray(v, dtype=float)
    return float(np.linalg.norm(D.T @ v) / (np.linalg.norm(D) * np.linalg.norm(v)))


def riemann_point(state: RiemannState) -> ManifoldPoint:
    return ManifoldPoint(SL3, state.A)
