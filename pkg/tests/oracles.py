"""Independent reference computations used by the tests.

Nothing here calls into the code under test except for plain data classes.
"""

import numpy as np
from scipy.linalg import expm, polar


def cross_components(v, w):
    return np.array([v[1] * w[2] - v[2] * w[1], v[2] * w[0] - v[0] * w[2], v[0] * w[1] - v[1] * w[0]])


def skew(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def rotation_expm(v):
    """Rotation from the matrix exponential of a skew matrix."""
    return expm(skew(np.asarray(v, dtype=float)))


def polar_rotation(M):
    U, _ = polar(M)
    return U


def svd_rotation(M):
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def euclidean_fd_gradient(f, x, h=1e-6):
    """Plain central differences in the ambient coordinates."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def so3_riemannian_grad_norm(f, A, h=1e-6):
    """Gradient norm of ``f`` on SO(3) along body rotations ``A exp(t hat(e_i))``.

    With the bi-invariant metric 0.5 tr(X^T Y) the directions ``A hat(e_i)``
    are orthonormal, so the norm is that of the three directional derivatives.
    """
    d = []
    for e in np.eye(3):
        d.append((f(A @ rotation_expm(h * e)) - f(A @ rotation_expm(-h * e))) / (2 * h))
    return float(np.linalg.norm(d))


def rigid_body_residual(inertia, xi):
    """``|xi x I xi|``, the gradient norm of the body energy at the identity."""
    xi = np.asarray(xi, dtype=float)
    return float(np.linalg.norm(np.cross(xi, np.asarray(inertia) @ xi)))


def tilt_spin(I1, I3, gm, iota, xl):
    """Closed form of the tilt equation solved for the body spin."""
    return (xl * xl * (I3 - I1) * iota - gm) / (xl * I3)


def upsilon_fixed_point(gamma, ell, m, sign, start=(0.0, 0.0), numerators=None, iters=80):
    """Fixed point of the planar map by damped Newton on ``x - G(x)``.

    ``kappa = sqrt((1 - i1^2)/(1 - i2^2))`` and
    ``G(i1, i2) = (n1 / (1 + sign m / kappa), n2 / (ell + sign kappa))``.
    Newton runs on the cleared equations in angles ``i_j = cos(t_j)`` so
    points near the square's edge stay reachable. Returns ``None`` when Newton stalls or degenerates.
    """
    n1, n2 = (1 - gamma, ell - gamma) if numerators is None else numerators

    def G(x):
        i1, i2 = x
        k = np.sqrt((1 - i1 * i1) / (1 - i2 * i2))
        return np.array([n1 / (1 + sign * m / k), n2 / (ell + sign * k)])

    def resid(t):
        # Denominators cleared so Newton does not have to cross poles of G.
        i1, i2 = np.cos(t)
        k = np.sin(t[0]) / np.sin(t[1])
        return np.array([i1 * (1 + sign * m / k) - n1, i2 * (ell + sign * k) - n2])

    def inside(t):
        return bool(np.all((t > 1e-9) & (t < np.pi - 1e-9)))

    t = np.arccos(np.clip(np.asarray(start, dtype=float), -1 + 1e-9, 1 - 1e-9))
    with np.errstate(all="ignore"):
        for _ in range(iters):
            r = resid(t)
            if not np.all(np.isfinite(r)):
                return None
            if np.linalg.norm(r) < 1e-15:
                break
            J = np.empty((2, 2))
            for j in range(2):
                e = np.zeros(2)
                e[j] = 1e-7
                J[:, j] = (resid(t + e) - resid(t - e)) / 2e-7
            try:
                step = np.linalg.solve(J, r)
            except np.linalg.LinAlgError:
                return None
            if not np.all(np.isfinite(step)):
                return None
            s = 1.0
            while s > 1e-6:
                cand = t - s * step
                if inside(cand) and np.linalg.norm(resid(cand)) < np.linalg.norm(r):
                    break
                s *= 0.5
            else:
                # Stalled at rounding level; the fixed-point check below decides.
                break
            t = cand
        x = np.cos(t)
        if not inside(t) or not np.all(np.isfinite(G(x))) or np.linalg.norm(x - G(x)) > 1e-12:
            return None
    return x


def upsilon_solutions(gamma, ell, m, numerators=None, starts=60, seed=0):
    """All fixed points found from a spread of starting points, both signs."""
    rng = np.random.default_rng(seed)
    found = []
    for sign in (1, -1):
        grid = np.cos(np.linspace(0.05, np.pi - 0.05, 12))
        pts = [(0.0, 0.0)] + [(a, b) for a in grid for b in grid]
        pts += [tuple(rng.uniform(-0.999, 0.999, 2)) for _ in range(starts)]
        for s in pts:
            x = upsilon_fixed_point(gamma, ell, m, sign, s, numerators)
            if x is None:
                continue
            if not any(sg == sign and np.linalg.norm(x - y) < 1e-8 for sg, y in found):
                found.append((sign, x))
    return found


def riemann_invariant(A, eta, zeta):
    """Nine invariants from their defining formulas, ``K`` with the factor 1/2."""
    Ainv = np.linalg.inv(A)
    B = Ainv.T

    def kinetic(M):
        D = skew(eta) @ M - M @ skew(zeta)
        return 0.5 * np.sum(D * D)

    S, T = A @ A.T, A.T @ A
    coupling = np.cross(eta, S @ eta) @ A @ zeta + np.cross(zeta, T @ zeta) @ A.T @ eta
    ne, nz = eta @ eta, zeta @ zeta
    return np.array(
        [np.sum(A * A), np.sum(B * B), kinetic(A), kinetic(B), eta @ A @ zeta, eta @ B @ zeta, coupling, ne + nz,
         (ne - nz) ** 2]
    )


def krig_fd_matrix(A, eta, zeta, h=1e-6):
    """Columns: derivative of the five chi invariants along ``xi + t [xi, e_k]``."""
    cols = []
    for k in range(6):
        u = np.zeros(6)
        u[k] = 1.0
        d_eta, d_zeta = np.cross(eta, u[:3]), np.cross(zeta, u[3:])
        plus = riemann_invariant(A, eta + h * d_eta, zeta + h * d_zeta)[2:7]
        minus = riemann_invariant(A, eta - h * d_eta, zeta - h * d_zeta)[2:7]
        cols.append((plus - minus) / (2 * h))
    return np.array(cols).T


def sl3_fd_differential(A, eta, zeta, h=1e-6):
    """Derivative of all nine invariants along ``A expm(t X)`` for a traceless basis ``X``."""
    basis = []
    for i in range(3):
        for j in range(3):
            if i != j:
                X = np.zeros((3, 3))
                X[i, j] = 1.0
                basis.append(X)
    basis += [np.diag([1.0, -1.0, 0.0]), np.diag([0.0, 1.0, -1.0])]
    cols = []
    for X in basis:
        plus = riemann_invariant(A @ expm(h * X), eta, zeta)
        minus = riemann_invariant(A @ expm(-h * X), eta, zeta)
        cols.append((plus - minus) / (2 * h))
    return np.array(cols).T


def relative_annihilation(M, v):
    """``|M^T v| / (|M| |v|)``."""
    return float(np.linalg.norm(M.T @ v) / (np.linalg.norm(M) * np.linalg.norm(v)))


def rigid_body_rk4_first_departure(inertia, A0, xi, T, dt, threshold):
    """Plain RK4 on ``(A, body momentum)``; first time ``|A - expm(t hat xi) A0|`` exceeds ``threshold``.

    Returns ``None`` if it never does before ``T``.
    """
    inertia = np.asarray(inertia, dtype=float)
    Iinv = np.linalg.inv(inertia)

    def rhs(A, M):
        w = Iinv @ M
        return A @ skew(w), np.cross(M, w)

    A = np.array(A0, dtype=float)
    M = inertia @ (A.T @ xi)
    for k in range(1, int(round(T / dt)) + 1):
        a1, m1 = rhs(A, M)
        a2, m2 = rhs(A + 0.5 * dt * a1, M + 0.5 * dt * m1)
        a3, m3 = rhs(A + 0.5 * dt * a2, M + 0.5 * dt * m2)
        a4, m4 = rhs(A + dt * a3, M + dt * m3)
        A = A + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        M = M + dt / 6 * (m1 + 2 * m2 + 2 * m3 + m4)
        if np.linalg.norm(A - rotation_expm(k * dt * np.asarray(xi)) @ A0) > threshold:
            return k * dt
    return None
