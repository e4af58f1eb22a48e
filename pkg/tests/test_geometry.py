import numpy as np
import pytest

from relcrit.geometry import (
    SL3,
    SO3,
    S2xS2,
    Euclidean,
    ManifoldPoint,
    Product,
    fd_gradient,
    generator_span,
    isotropy_dim,
    numerical_rank,
    resolve_action,
    retract,
    tangent_basis,
)
from relcrit.lie import exp_so3, hat, random_rotation
from relcrit.systems.riemann import RiemannAction, riemann_point, coplanar_state
from relcrit.systems.top import LagrangeTopParams, TopAction, top_state

from oracles import rotation_expm

E = np.eye(3)
MANIFOLDS = [SO3, S2xS2, SL3, Product(SO3, Euclidean((2,))), Product(S2xS2, Euclidean((1,)))]


def _point(M, rng):
    return ManifoldPoint(M, M.random_point(rng))


def test_so3_basis_at_identity():
    B = tangent_basis(ManifoldPoint(SO3, np.eye(3)))
    assert B.dim == 3
    for row, e in zip(B.vectors, E):
        np.testing.assert_array_equal(row.reshape(3, 3), hat(e))


def test_s2xs2_basis_at_poles():
    B = tangent_basis(ManifoldPoint(S2xS2, np.stack([E[2], E[2]])))
    assert B.dim == 4
    V = B.vectors.reshape(4, 2, 3)
    for v in V:
        assert abs(v[0] @ E[2]) < 1e-15 and abs(v[1] @ E[2]) < 1e-15
    assert numerical_rank(B.vectors) == 4


def test_sl3_basis_preserves_det_to_first_order():
    A = np.diag([2.0, 1.0, 0.5])
    B = tangent_basis(ManifoldPoint(SL3, A))
    assert B.dim == 8
    h = 1e-6
    for v in B.vectors:
        X = v.reshape(3, 3)
        ddet = (np.linalg.det(A + h * X) - np.linalg.det(A - h * X)) / (2 * h)
        assert abs(ddet) < 1e-6


@pytest.mark.parametrize("M", [SO3, S2xS2, SL3])
def test_bases_orthonormal_and_tangent(rng, M):
    for _ in range(10):
        x = M.random_point(rng)
        B = M.tangent_basis(x)
        G = M.metric_weight * B @ B.T
        np.testing.assert_allclose(G, np.eye(M.dim), atol=1e-12)
        if M is SO3:
            for v in B:
                S = x.T @ v.reshape(3, 3)
                assert np.linalg.norm(S + S.T) < 1e-10
        elif M is S2xS2:
            for v in B.reshape(-1, 2, 3):
                assert abs(v[0] @ x[0]) < 1e-10 and abs(v[1] @ x[1]) < 1e-10
        else:
            for v in B:
                assert abs(np.trace(np.linalg.solve(x, v.reshape(3, 3)))) < 1e-10


@pytest.mark.parametrize("M", MANIFOLDS)
def test_retract_zero_step_is_exact(rng, M):
    p = _point(M, rng)
    t = rng.normal(size=M.dim)
    q = retract(p, t, 0.0)
    np.testing.assert_array_equal(q.flat, p.flat)
    q = retract(p, np.zeros(M.dim), 0.3)
    np.testing.assert_array_equal(q.flat, p.flat)


def test_so3_retract_quarter_turn():
    q = retract(ManifoldPoint(SO3, np.eye(3)), E[2], np.pi / 2)
    np.testing.assert_allclose(q.value, rotation_expm(np.pi / 2 * E[2]), atol=1e-15)


def test_sl3_retract_keeps_unit_det(rng):
    for _ in range(20):
        p = _point(SL3, rng)
        q = retract(p, rng.normal(size=8), 0.1)
        assert abs(np.linalg.det(q.value) - 1) < 1e-12


@pytest.mark.parametrize("M", [SO3, S2xS2, SL3])
def test_point_invariants_after_retract(rng, M):
    for _ in range(20):
        p = _point(M, rng)
        q = retract(p, rng.normal(size=M.dim), rng.uniform(-1, 1))
        M.validate(q.value)


def test_generator_span_top_sleeping_and_tilted():
    p = LagrangeTopParams(1.0, 2.0, 1.0)
    act = TopAction(p)
    assert generator_span(ManifoldPoint(SO3, top_state(p, 1.0)), act).dim == 1
    assert generator_span(ManifoldPoint(SO3, top_state(p, 0.3)), act).dim == 2


def test_generator_span_riemann_identity():
    assert generator_span(ManifoldPoint(SL3, np.eye(3)), RiemannAction()).dim == 3


def test_generator_span_accepts_tags_and_rejects_unknown():
    assert generator_span(ManifoldPoint(SO3, np.eye(3)), "body").dim == 3
    with pytest.raises(KeyError):
        resolve_action("no-such-action")


@pytest.mark.parametrize(
    "M,action",
    [(SO3, "top"), (SO3, "body"), (S2xS2, "pendulum"), (SL3, "riemann")],
)
def test_span_plus_isotropy_is_algebra_dim(rng, M, action):
    act = resolve_action(action)
    for _ in range(10):
        p = _point(M, rng)
        assert generator_span(p, act).dim + isotropy_dim(p, act) == act.algebra_dim


def test_fd_gradient_of_constant():
    g = fd_gradient(lambda x: 3.0, ManifoldPoint(SO3, np.eye(3)))
    assert np.max(np.abs(g)) < 1e-12


def test_fd_gradient_top_invariant_at_sleeping():
    p = LagrangeTopParams(1.0, 2.0, 1.0, sigma=np.array([0.0, 0.6, 0.8]))
    A = top_state(p, -1.0, 0.4, 1.1)
    g = fd_gradient(lambda B: E[2] @ B @ p.sigma, ManifoldPoint(SO3, A))
    assert np.linalg.norm(g) < 1e-8


def test_fd_gradient_frobenius_on_sl3():
    A = np.diag([2.0, 1.0, 0.5])
    p = ManifoldPoint(SL3, A)
    g = fd_gradient(lambda B: float(np.sum(B * B)), p)
    analytic = SL3.coords(A, (2 * A).reshape(1, -1))[0]
    assert np.linalg.norm(g - analytic) < 1e-6


def test_fd_gradient_second_order(rng):
    A = random_rotation(rng)
    p = ManifoldPoint(SO3, A)
    W = rng.normal(size=(3, 3))
    f = lambda B: float(np.sum(W * B)) ** 2  # noqa: E731
    exact = SO3.tangent_basis(A) @ (2 * np.sum(W * A) * W).reshape(-1)
    e1 = np.linalg.norm(fd_gradient(f, p, 1e-2) - exact)
    e2 = np.linalg.norm(fd_gradient(f, p, 5e-3) - exact)
    assert e1 / e2 >= 3.5


def test_fd_gradient_rejects_non_finite():
    with pytest.raises(ValueError):
        fd_gradient(lambda x: np.nan, ManifoldPoint(SO3, np.eye(3)))


def test_sl3_riemann_point_valid():
    s = coplanar_state(np.array([2.0, 1.0, 0.5]), 1.0, 1.0, 0.2, 0.3)
    SL3.validate(riemann_point(s).value)


def test_sphere_pair_basis_near_is_tangent_and_smooth():
    from relcrit.geometry import S2xS2

    x = np.array([[1e-9, 0.0, 1.0], [0.0, 0.6, 0.8]])
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    B = S2xS2.tangent_basis(x)
    y = S2xS2.retract(x, [1.0, 0.0, 0.0, 0.0], 1e-6)
    Bn = S2xS2.basis_near(y, B)
    for k in range(2):
        assert np.max(np.abs(Bn.reshape(4, 2, 3)[:, k] @ y[k])) < 1e-15
    assert np.linalg.norm(Bn - B) < 1e-5
