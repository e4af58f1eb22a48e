import numpy as np
import pytest

from relcrit.systems.body import RigidBodyParams, body_relative_equilibria, body_residual

from oracles import rigid_body_residual


def test_params_validation():
    with pytest.raises(ValueError):
        RigidBodyParams([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(ValueError):
        RigidBodyParams([1.0, -1.0, 2.0])


def test_diagonal_axes():
    eq = body_relative_equilibria(RigidBodyParams([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(eq.generators, np.eye(3), atol=1e-15)
    assert [ax.kind for ax in eq.axes] == ["axis"] * 3
    assert all(ax.residual < 1e-10 for ax in eq.axes)
    assert not eq.fully_degenerate


def test_spherical_body_fully_degenerate(rng):
    p = RigidBodyParams(np.eye(3))
    assert body_relative_equilibria(p).fully_degenerate
    for _ in range(20):
        assert body_residual(p, rng.normal(size=3)) < 1e-10


def test_eigenplane_reported():
    eq = body_relative_equilibria(RigidBodyParams([2.0, 2.0, 5.0]))
    assert [ax.multiplicity for ax in eq.axes] == [2, 2, 1]


def test_random_inertia_off_axis_directions(rng):
    for _ in range(5):
        Q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        inertia = Q @ np.diag(rng.uniform(0.5, 3, 3)) @ Q.T
        inertia = 0.5 * (inertia + inertia.T)
        p = RigidBodyParams(inertia)
        for ax in body_relative_equilibria(p).axes:
            assert ax.residual < 1e-10
        for _ in range(20):
            xi = rng.normal(size=3)
            r = body_residual(p, xi)
            assert r > 0
            assert r == pytest.approx(rigid_body_residual(inertia, xi), rel=1e-6, abs=1e-12)


def test_residual_vanishes_exactly_on_eigen_directions():
    inertia = np.diag([1.0, 2.0, 3.0])
    p = RigidBodyParams(inertia)
    axes = np.linalg.eigh(inertia)[1].T
    hits = 0
    for theta in np.deg2rad(np.arange(0, 181)):
        for phi in np.deg2rad(np.arange(0, 360)):
            xi = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
            on_axis = bool(np.max(np.abs(axes @ xi)) > 1 - 1e-12)
            assert (body_residual(p, xi) < 1e-10) == on_axis
            hits += on_axis
    # The poles and the four equatorial axis directions.
    assert hits == 2 * 360 + 4
