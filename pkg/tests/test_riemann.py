import numpy as np
import pytest

from relcrit.critsolve import kernel_basis, rigid_residual
from relcrit.lie import random_rotation
from relcrit.systems.riemann import (
    RiemannState,
    coplanar_state,
    kernel_membership,
    kinetic_model,
    krig_dimension,
    krig_membership,
    riemann_fields,
    riemann_iota,
    riemann_krig_axisymmetric,
    riemann_krig_span,
    riemann_model,
    riemann_remark_axes,
    riemann_stype_kernel,
    stype_state,
)

from oracles import krig_fd_matrix, relative_annihilation, riemann_invariant, sl3_fd_differential

DIAG = np.array([2.0, 1.0, 0.5])


def _axes(rng, spread=0.8):
    a = np.exp(rng.uniform(-spread, spread, 3))
    return a / np.cbrt(np.prod(a))


def _distinct_axes(rng):
    while True:
        a = _axes(rng)
        if np.min(np.abs(np.subtract.outer(a, a)) + np.eye(3)) > 0.05:
            return a


def test_state_validation():
    with pytest.raises(ValueError):
        RiemannState(2 * np.eye(3), np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        coplanar_state([1.0, 1.0, 2.0], 1, 1, 0.1, 0.2)
    with pytest.raises(ValueError):
        stype_state(DIAG, 4, 1.0, 0.3)


def test_identity_state():
    y = riemann_fields(riemann_iota(RiemannState(np.eye(3), np.zeros(3), np.zeros(3))))
    np.testing.assert_array_equal(y["phi"], [3.0, 3.0])
    np.testing.assert_array_equal(y["chi"], np.zeros(5))
    np.testing.assert_array_equal(y["alpha"], [0.0, 0.0])


def test_diagonal_phi():
    y = riemann_iota(RiemannState(np.diag(DIAG), np.zeros(3), np.zeros(3)))
    np.testing.assert_allclose(riemann_fields(y)["phi"], [5.25, 5.25], atol=1e-15)


def test_iota_matches_defining_formulas(rng):
    for _ in range(20):
        s = coplanar_state(_axes(rng), *rng.uniform(0.2, 2, 2), *rng.uniform(0, 2 * np.pi, 2),
                           random_rotation(rng), random_rotation(rng))
        s = RiemannState(s.A, s.eta + rng.normal(size=3), s.zeta + rng.normal(size=3))
        np.testing.assert_allclose(riemann_iota(s), riemann_invariant(s.A, s.eta, s.zeta), rtol=1e-12, atol=1e-12)


def test_coupling_vanishes_at_coplanar_example():
    s = RiemannState(np.diag(DIAG), [1.0, 0.3, 0.0], [0.2, -1.0, 0.0])
    assert abs(riemann_iota(s)[6]) < 1e-12


def test_coupling_vanishes_at_random_coplanar_states(rng):
    for _ in range(50):
        s = coplanar_state(_axes(rng), *rng.uniform(0.2, 2, 2), *rng.uniform(0, 2 * np.pi, 2),
                           random_rotation(rng), random_rotation(rng))
        assert abs(riemann_iota(s)[6]) < 1e-10 * (1 + np.linalg.norm(riemann_iota(s)))


def test_polar_convention():
    s = coplanar_state(DIAG, 2.0, 1.0, np.pi / 2, np.pi)
    np.testing.assert_allclose(s.eta, [2 * np.cos(np.pi / 4), np.cos(np.pi / 2), 0.0], atol=1e-15)
    np.testing.assert_allclose(s.zeta, [2 * np.sin(np.pi / 4), np.sin(np.pi / 2), 0.0], atol=1e-15)


def test_krig_span_annihilated(rng):
    for _ in range(30):
        a = _distinct_axes(rng)
        r1, r2 = rng.uniform(0.3, 2, 2)
        t1, t2 = rng.uniform(0, 2 * np.pi, 2)
        s = coplanar_state(a, r1, r2, t1, t2, random_rotation(rng), random_rotation(rng))
        M = krig_fd_matrix(s.A, s.eta, s.zeta)
        for v in riemann_krig_span(a, t1, t2):
            assert krig_membership(s, v) < 1e-7
            assert relative_annihilation(M, v) < 1e-7


def test_krig_span_at_equal_angles():
    a = DIAG
    t = 0.7
    v, vt = riemann_krig_span(a, t, t)
    c, s = np.cos(t), np.sin(t)
    w12 = c * s * (a[1] * np.eye(5)[2] - a[0] / a[2] * np.eye(5)[3])
    w21 = c * s * (a[0] * np.eye(5)[2] - a[1] / a[2] * np.eye(5)[3])
    # K components are rescaled by the halving convention; the others are untouched.
    np.testing.assert_allclose(v[2:], (-w12 + w21)[2:], atol=1e-15)
    assert np.all(v[:2] == 0)


def test_krig_span_rejects_equal_axes():
    with pytest.raises(ValueError):
        riemann_krig_span([1.0, 1.0, 1.0], 0.3, 0.5)


def test_krig_axisymmetric(rng):
    for aa in (0.7, 1.3, 2.0):
        a = np.array([aa, aa, aa**-2])
        for _ in range(5):
            s = coplanar_state(a, *rng.uniform(0.3, 2, 2), *rng.uniform(0, 2 * np.pi, 2),
                               random_rotation(rng), random_rotation(rng))
            M = krig_fd_matrix(s.A, s.eta, s.zeta)
            for v in riemann_krig_axisymmetric(aa):
                assert krig_membership(s, v) < 1e-7
                assert relative_annihilation(M, v) < 1e-7


def test_krig_dimension_contains_span(rng):
    a = _distinct_axes(rng)
    s = coplanar_state(a, 1.1, 0.7, 0.4, 1.9)
    assert krig_dimension(s) >= 2


def test_remark_axes_quarter_turn():
    a = riemann_remark_axes(np.pi / 4, np.pi / 4)
    np.testing.assert_allclose(a, [2 ** (-1 / 6), 2 ** (-1 / 6), 2 ** (1 / 3)], atol=1e-14)
    assert abs(np.prod(a) - 1) < 1e-12


def test_remark_axes_unit_product(rng):
    n = 0
    while n < 100:
        t1, t2 = rng.uniform(0.05, np.pi / 2 - 0.05, 2) * rng.choice([-1, 1])
        if np.sin(2 * t1) * np.sin(2 * t2) <= 0:
            continue
        a = riemann_remark_axes(t1, t2)
        assert abs(np.prod(a) - 1) < 1e-12
        n += 1


def test_remark_axes_rigid_condition(rng):
    for _ in range(20):
        t1, t2 = rng.uniform(0.1, np.pi / 2 - 0.1, 2)
        a = riemann_remark_axes(t1, t2)
        s = coplanar_state(a / np.cbrt(np.prod(a)), *rng.uniform(0.3, 2, 2), t1, t2,
                           random_rotation(rng), random_rotation(rng))
        assert rigid_residual(kinetic_model(), s.A, s.xi) < 1e-8
        assert krig_membership(s, np.eye(5)[0]) < 1e-8


@pytest.mark.parametrize("angles", [(np.pi / 3, 2 * np.pi / 3), (np.pi / 4, -np.pi / 4), (np.pi / 2, 0.3)])
def test_remark_axes_degenerate(angles):
    with pytest.raises(ValueError):
        riemann_remark_axes(*angles)


def _check_kernel(s, vectors):
    D = sl3_fd_differential(s.A, s.eta, s.zeta)
    for v in vectors:
        assert kernel_membership(s, v) < 1e-6
        assert relative_annihilation(D, v) < 1e-6


def test_stype_kernel_distinct_axes(rng):
    for _ in range(20):
        a, j = _distinct_axes(rng), int(rng.integers(1, 4))
        r, theta = rng.uniform(0.3, 2), rng.uniform(0, 2 * np.pi)
        s = stype_state(a, j, r, theta, random_rotation(rng), random_rotation(rng))
        vectors = riemann_stype_kernel(a, j, r, theta)
        assert len(vectors) == 5
        _check_kernel(s, vectors)


@pytest.mark.parametrize("aa", [0.6, 1.4, 2.2])
def test_stype_kernel_axisymmetric(rng, aa):
    a = np.array([aa, aa, aa**-2])
    for _ in range(5):
        r, theta = rng.uniform(0.3, 2), rng.uniform(0, 2 * np.pi)
        s = stype_state(a, 3, r, theta, random_rotation(rng), random_rotation(rng))
        vectors = riemann_stype_kernel(a, 3, r, theta)
        assert len(vectors) == 6
        _check_kernel(s, vectors)


def test_coupling_direction_always_in_kernel(rng):
    e5 = np.zeros(9)
    e5[6] = 1.0
    for _ in range(20):
        a, j = _axes(rng), int(rng.integers(1, 4))
        s = stype_state(a, j, rng.uniform(0.3, 2), rng.uniform(0, 2 * np.pi), random_rotation(rng), random_rotation(rng))
        D = sl3_fd_differential(s.A, s.eta, s.zeta)
        assert np.linalg.norm(D[6]) < 1e-8 * (1 + np.linalg.norm(D))
        assert kernel_membership(s, e5) < 1e-9


def test_stype_kernel_errors():
    with pytest.raises(ValueError):
        riemann_stype_kernel(DIAG, 1, 0.0, 0.3)
    with pytest.raises(ValueError):
        riemann_stype_kernel([1.0, 1.0, 1.0], 3, 1.0, 0.3)
    with pytest.raises(ValueError):
        riemann_stype_kernel([2.0, 2.0, 0.25], 1, 1.0, 0.3)


def test_kernel_dimension_not_asserted_equal(rng):
    # Only containment is claimed; the measured kernel may be larger.
    a = _distinct_axes(rng)
    s = stype_state(a, 2, 1.0, 0.8)
    from relcrit.systems.riemann import slice_differential

    dim = kernel_basis(slice_differential(s).T).shape[1]
    assert dim >= np.linalg.matrix_rank(np.stack(riemann_stype_kernel(a, 2, 1.0, 0.8)), tol=1e-8)


def _smooth_f(rng):
    w = rng.normal(size=9)
    c = rng.normal(size=9)
    return lambda y: float(np.sum(np.sin(w * y * 0.1 + c)) + 0.01 * (w @ y) ** 2)


def test_stype_rigid_for_every_model(rng):
    for _ in range(10):
        model = riemann_model(_smooth_f(rng))
        a, j = _distinct_axes(rng), int(rng.integers(1, 4))
        s = stype_state(a, j, rng.uniform(0.3, 2), rng.uniform(0, 2 * np.pi), random_rotation(rng), random_rotation(rng))
        assert rigid_residual(model, s.A, s.xi) < 1e-9
