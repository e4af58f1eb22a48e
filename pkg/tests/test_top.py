import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relcrit.critsolve import criticality_residual
from relcrit.geometry import SO3
from relcrit.lie import exp_so3
from relcrit.systems.top import (
    LagrangeTopParams,
    top_iota,
    top_lambda,
    top_locked,
    top_locked_scalar,
    top_model,
    top_sleeping_states,
    top_state,
    top_tilt_spin,
)

from oracles import tilt_spin

E3 = np.array([0.0, 0.0, 1.0])


def _matrix_lagrangian(I1, I3, gm, sigma, xl, xr, A):
    # Independent form: kinetic energy of the body angular velocity A^T(xl e3) - xr sigma.
    inertia = np.diag([I1, I1, I1]) + (I3 - I1) * np.outer(sigma, sigma)
    omega = A.T @ (xl * E3) - xr * sigma
    return 0.5 * omega @ inertia @ omega - gm * E3 @ (A @ sigma)


def test_params_validation():
    with pytest.raises(ValueError):
        LagrangeTopParams(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        LagrangeTopParams(1.0, 1.0, 1.0, sigma=[1.0, 1.0, 0.0])


def test_locked_composition_identity(rng):
    for _ in range(100):
        sigma = rng.normal(size=3)
        sigma /= np.linalg.norm(sigma)
        p = LagrangeTopParams(*rng.uniform(0.5, 3, 2), rng.uniform(0, 2), sigma=sigma)
        A, gen = SO3.random_point(rng), rng.normal(size=2) * 2
        x = E3 @ A @ sigma
        assert abs(top_locked(p, gen, A) - top_locked_scalar(p, gen, x)) < 1e-12
        assert abs(top_locked(p, gen, A) - _matrix_lagrangian(p.I1, p.I3, p.gm, sigma, *gen, A)) < 1e-12


@pytest.mark.parametrize("x", [-1.0, -0.3, 0.0, 0.6, 1.0])
def test_locked_scalar_linear_at_zero_generator(x):
    p = LagrangeTopParams(1.3, 2.1, 0.7)
    assert top_locked_scalar(p, (0.0, 0.0), x) == pytest.approx(-0.7 * x, abs=1e-15)


def test_locked_scalar_substitution():
    assert top_locked_scalar(LagrangeTopParams(1.0, 1.0, 1.0), (1.0, 1.0), 0.0) == 1.0


def test_tilt_spin_example():
    assert top_tilt_spin(LagrangeTopParams(1.0, 2.0, 1.0), 0.5, 2.0) == pytest.approx(0.25, abs=1e-15)


@given(st.floats(-0.99, 0.99), st.floats(0.2, 5.0))
@settings(max_examples=50, deadline=None)
def test_tilt_spin_makes_state_critical(iota, xl):
    p = LagrangeTopParams(1.0, 2.5, 0.8)
    xr = top_tilt_spin(p, iota, xl)
    assert xr == pytest.approx(tilt_spin(1.0, 2.5, 0.8, iota, xl), abs=1e-12)
    assert criticality_residual(top_model(p), top_state(p, iota, 0.4, 1.1), [xl, xr]) < 1e-8


def test_tilt_spin_spherical_top_ignores_tilt():
    p = LagrangeTopParams(1.5, 1.5, 2.0)
    for iota in (-0.8, 0.0, 0.7):
        assert top_tilt_spin(p, iota, 3.0) == pytest.approx(-2.0 / (3.0 * 1.5), abs=1e-15)


def test_tilt_spin_unique():
    p = LagrangeTopParams(1.0, 2.0, 1.0)
    A = top_state(p, 0.5)
    xs = np.linspace(-2, 2, 4001)
    res = [criticality_residual(top_model(p), A, [2.0, x]) for x in xs]
    # The residual is affine in xi_r with a single zero.
    assert xs[int(np.argmin(res))] == pytest.approx(0.25, abs=1e-3)
    assert sum(r < 1e-3 for r in res) == 1


@pytest.mark.parametrize("iota", [1.0, -1.0, 1.5])
def test_tilt_spin_errors(iota):
    p = LagrangeTopParams(1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        top_tilt_spin(p, iota, 1.0 if iota != 1.5 else 2.0)
    with pytest.raises(ValueError):
        top_tilt_spin(p, 0.3, 0.0)


def test_lambda_spherical_example():
    roots = top_lambda(LagrangeTopParams(1.0, 1.0, 1.0), 0.37, 3.0).roots
    np.testing.assert_allclose(sorted(roots), [(3 - np.sqrt(5)) / 2, (3 + np.sqrt(5)) / 2], atol=1e-14)


def test_lambda_threshold_at_sleeping():
    p = LagrangeTopParams(1.3, 2.0, 0.9)
    r = top_lambda(p, 1.0, 0.1)
    assert r.roots == ()
    assert r.threshold == pytest.approx(4 * p.gm * p.I1, abs=1e-15)


def test_lambda_roots_satisfy_tilt_equation(rng):
    for _ in range(100):
        p = LagrangeTopParams(*rng.uniform(0.5, 3, 2), rng.uniform(0.1, 2))
        iota, xi = rng.uniform(-0.99, 0.99), rng.uniform(-10, 10)
        for lam in top_lambda(p, iota, xi).roots:
            if abs(lam) < 1e-6:
                continue
            assert tilt_spin(p.I1, p.I3, p.gm, iota, lam) == pytest.approx(lam - xi, abs=1e-10 * (1 + abs(xi)))


def test_sleeping_states_and_iota():
    p = LagrangeTopParams(1.0, 2.0, 1.0, sigma=[0.0, 0.6, 0.8])
    up, down = top_sleeping_states(p)
    assert top_iota(p, up) == pytest.approx(1.0, abs=1e-14)
    assert top_iota(p, down) == pytest.approx(-1.0, abs=1e-14)
    assert top_iota(p, top_state(p, 0.3, 1.0, 2.0)) == pytest.approx(0.3, abs=1e-14)


def test_iota_critical_set_is_sleeping_set(rng):
    p = LagrangeTopParams(1.0, 2.0, 1.0)
    h = 1e-6
    for iota in np.linspace(-1, 1, 21):
        for prec in (0.0, 2.0):
            A = top_state(p, iota, prec, 0.5)
            grad = [
                (top_iota(p, A @ exp_so3(h * e)) - top_iota(p, A @ exp_so3(-h * e))) / (2 * h) for e in np.eye(3)
            ]
            g = np.linalg.norm(grad)
            if abs(iota) == 1:
                assert g < 1e-8
            else:
                assert g > 0.5 * np.sqrt(1 - iota**2)
