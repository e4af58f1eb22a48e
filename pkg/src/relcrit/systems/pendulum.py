"""Double spherical pendulum on S^2 x S^2 with the O(2) action about e3.

Two scalar models are provided:

``"reference"``
    The scalar function whose gradient is
    ``(1 - i1 - gamma, m (l (1 - i2) - gamma), m)``. The closed-form solution
    families below (fixed points of ``Upsilon``, the special families at
    ``gamma = 1`` and ``gamma = l``) are stated for this model.
``"physical"``
    The locked Lagrangian obtained directly from the kinetic and potential
    energy of the two point masses. Its gradient is
    ``(-i1 - gamma, -m (l i2 + gamma), m)``; the same solution formulas hold
    with numerators ``-gamma`` in place of ``1 - gamma`` and ``l - gamma``,
    and it has no special families.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb

from relcrit.critsolve import ScalarModel, algebra_product, criticality_residual
from relcrit.geometry import S2xS2, Action, LiftedAction, ManifoldPoint, register_action
from relcrit.invariants import InvariantMapSpec
from relcrit.lie import exp_so3

E3 = np.array([0.0, 0.0, 1.0])
P3 = np.diag([1.0, 1.0, 0.0])
VARIANTS = ("reference", "physical")
DENOM_TOL = 1e-14


@dataclass(frozen=True)
class PendulumParams:
    m1: float
    m2: float
    l1: float
    l2: float
    g: float

    def __post_init__(self):
        if min(self.m1, self.m2, self.l1, self.l2, self.g) <= 0:
            raise ValueError("masses, lengths and gravity must be positive")

    @classmethod
    def from_ratios(cls, ell, m_ratio, l1=1.0, g=1.0, total_mass=1.0):
        """Parameters with ``l2/l1 = ell`` and ``m2 ell/(m1+m2) = m_ratio``."""
        if not 0 < m_ratio < ell:
            raise ValueError("need 0 < m_ratio < ell (m1 > 0)")
        m2 = m_ratio * total_mass / ell
        return cls(total_mass - m2, m2, l1, ell * l1, g)

    @property
    def ell(self):
        return self.l2 / self.l1

    @property
    def m_ratio(self):
        return self.m2 * self.ell / (self.m1 + self.m2)

    @property
    def scale(self):
        """``l1^2 (m1 + m2)``, the factor between ``L_xi / xi^2`` and ``f``."""
        return self.l1**2 * (self.m1 + self.m2)

    def gamma(self, xi):
        return self.g / (xi**2 * self.l1)

    def xi(self, gamma):
        """Positive generator with the given ``gamma``."""
        return float(np.sqrt(self.g / (gamma * self.l1)))


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"unknown pendulum model {variant!r}; choose from {VARIANTS}")


# --- action -------------------------------------------------------------------


@dataclass(frozen=True)
class O2Element:
    """Rotation by ``angle`` about e3, preceded by the reflection ``x -> S x``
    through the vertical plane with horizontal normal ``normal`` if given."""

    angle: float = 0.0
    normal: tuple | None = None

    def matrix(self):
        R = exp_so3(self.angle * E3)
        if self.normal is None:
            return R
        n = np.array([self.normal[0], self.normal[1], 0.0])
        n /= np.linalg.norm(n)
        return R @ (np.eye(3) - 2.0 * np.outer(n, n))


class PendulumAction(Action):
    tag = "pendulum"
    manifold = S2xS2
    algebra_dim = 1

    def generators(self, q):
        q = np.asarray(q, dtype=float)
        return np.concatenate([np.cross(E3, q[0]), np.cross(E3, q[1])])[None, :]

    def act(self, g, q):
        return np.asarray(q, dtype=float) @ g.matrix().T

    def random_element(self, rng):
        angle = rng.uniform(0.0, 2 * np.pi)
        if rng.random() < 0.5:
            return O2Element(angle)
        phi = rng.uniform(0.0, np.pi)
        return O2Element(angle, (np.cos(phi), np.sin(phi)))


register_action("pendulum", PendulumAction)


def reflection_through(q):
    """Reflection through a vertical plane containing the non-vertical vector(s) ``q``."""
    for v in np.atleast_2d(q):
        h = P3 @ v
        if np.linalg.norm(h) > 1e-8:
            return O2Element(0.0, (-h[1], h[0]))
    raise ValueError("all vectors are vertical; every vertical plane contains them")


# --- invariant ----------------------------------------------------------------


def pendulum_invariant(q1, q2) -> np.ndarray:
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    return np.array([q1[2], q2[2], q1 @ P3 @ q2])


def _invariant_jacobian(q):
    q = np.asarray(q, dtype=float)
    J = np.zeros((3, 6))
    J[0, 2] = 1.0
    J[1, 5] = 1.0
    J[2, :3] = P3 @ q[1]
    J[2, 3:] = P3 @ q[0]
    return J


def pendulum_invariant_map() -> InvariantMapSpec:
    return InvariantMapSpec(
        "pendulum",
        S2xS2,
        3,
        lambda q: pendulum_invariant(q[0], q[1]),
        jacobian=_invariant_jacobian,
        action=PendulumAction(),
    )


def kappa_of(iota):
    """``varkappa = i3 / (1 - i2^2)``."""
    return iota[2] / (1.0 - iota[1] ** 2)


def dependence_defect(iota):
    """``i3^2 - (1 - i1^2)(1 - i2^2)``; zero exactly for planar pairs."""
    return iota[2] ** 2 - (1 - iota[0] ** 2) * (1 - iota[1] ** 2)


# --- scalar function ----------------------------------------------------------


def _kinetic(params, iota, variant):
    i1, i2, i3 = iota
    ell, m = params.ell, params.m_ratio
    if variant == "reference":
        return 0.5 * (1 + 2 * i1 - i1**2) + 0.5 * m * ell * (1 + 2 * i2 - i2**2) + m * i3
    return 0.5 * (1 - i1**2) + 0.5 * m * ell * (1 - i2**2) + m * i3


def _kinetic_grad(params, iota, variant):
    i1, i2, _ = iota
    ell, m = params.ell, params.m_ratio
    if variant == "reference":
        return np.array([1 - i1, m * ell * (1 - i2), m])
    return np.array([-i1, -m * ell * i2, m])


def pendulum_f(params: PendulumParams, gamma, iota, variant="reference") -> float:
    _check_variant(variant)
    i1, i2, _ = iota
    return float(_kinetic(params, iota, variant) - gamma * (i1 + params.m_ratio * i2))


def pendulum_df(params: PendulumParams, gamma, iota, variant="reference") -> np.ndarray:
    _check_variant(variant)
    m = params.m_ratio
    return _kinetic_grad(params, iota, variant) - gamma * np.array([1.0, m, 0.0])


def pendulum_locked_raw(params: PendulumParams, q, xi) -> float:
    """Locked Lagrangian evaluated from the positions of the two masses."""
    q1, q2 = np.asarray(q, dtype=float)
    x1 = params.l1 * q1
    x2 = x1 + params.l2 * q2
    v1 = xi * np.cross(E3, x1)
    v2 = xi * np.cross(E3, x2)
    kinetic = 0.5 * (params.m1 * v1 @ v1 + params.m2 * v2 @ v2)
    return float(kinetic - params.g * (params.m1 * x1[2] + params.m2 * x2[2]))


def pendulum_model(params: PendulumParams, variant="reference") -> ScalarModel:
    """Locked-Lagrangian model ``xi^2 C kin(iota) - C (g/l1)(i1 + m i2)``.

    ``C = l1^2 (m1 + m2)``. For ``variant="physical"`` this equals
    :func:`pendulum_locked_raw`.
    """
    _check_variant(variant)
    P = algebra_product(S2xS2, 1)
    C = params.scale
    glen = params.g / params.l1
    m = params.m_ratio

    def evaluate(x):
        q, xi = x
        return np.concatenate([pendulum_invariant(q[0], q[1]), [xi[0]]])

    def jacobian(x):
        J = np.zeros((4, P.size))
        J[:3, :6] = _invariant_jacobian(x[0])
        J[3, 6] = 1.0
        return J

    def f(y):
        return C * (y[3] ** 2 * _kinetic(params, y[:3], variant) - glen * (y[0] + m * y[1]))

    def df(y):
        g = np.empty(4)
        g[:3] = C * (y[3] ** 2 * _kinetic_grad(params, y[:3], variant) - glen * np.array([1.0, m, 0.0]))
        g[3] = C * 2 * y[3] * _kinetic(params, y[:3], variant)
        return g

    action = PendulumAction()
    ident = lambda g, xi: np.asarray(xi, dtype=float)  # noqa: E731
    zero = lambda *a: np.zeros(1)  # noqa: E731
    map_ = InvariantMapSpec("pendulum-relative", P, 4, evaluate, jacobian, LiftedAction(action, ident, zero))
    return ScalarModel(
        name=f"pendulum-{variant}",
        map=map_,
        f=f,
        df=df,
        action=action,
        Ad=ident,
        coad=lambda xi, mu: np.zeros(1),
        xi_names=("xi",),
        locked=lambda q, xi: f(evaluate((q, xi))),
        system="pendulum",
    )


def normalized_residual(params: PendulumParams, q, gamma, variant="reference") -> float:
    """``|grad (f_gamma o iota)(q)|``; ``gamma = inf`` means the generator is zero."""
    model = pendulum_model(params, variant)
    if np.isinf(gamma):
        return criticality_residual(model, q, [0.0]) / (params.scale * params.g / params.l1)
    xi = params.xi(gamma)
    return criticality_residual(model, q, [xi]) / (params.scale * xi**2)


# --- closed-form solutions ----------------------------------------------------


def _numerators(params, gamma, variant):
    if variant == "reference":
        return 1.0 - gamma, params.ell - gamma
    return -gamma, -gamma


def pendulum_kappa(i1, i2) -> float:
    return float(np.sqrt((1.0 - i1**2) / (1.0 - i2**2)))


def pendulum_upsilon(params: PendulumParams, gamma, i1, i2, sign, variant="reference"):
    """``Upsilon_sign(i1, i2)``; generic solutions are its fixed points.

    Raises
    ------
    ValueError
        Outside ``(-1, 1)^2`` or when a denominator vanishes.
    """
    _check_variant(variant)
    if not (abs(i1) < 1 and abs(i2) < 1):
        raise ValueError("Upsilon is defined on (-1, 1)^2")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    n1, n2 = _numerators(params, gamma, variant)
    k = pendulum_kappa(i1, i2)
    d1 = 1.0 + sign * params.m_ratio / k
    d2 = params.ell + sign * k
    if abs(d1) < DENOM_TOL or abs(d2) < DENOM_TOL:
        raise ValueError("Upsilon denominator vanishes")
    return n1 / d1, n2 / d2


@dataclass(frozen=True)
class PendulumSolution:
    family: str
    iota: np.ndarray
    q: np.ndarray
    gamma: float
    xi: float
    residual: float
    kappa: float | None = None

    def as_dict(self):
        return {
            "family": self.family,
            "iota": self.iota,
            "q": self.q,
            "gamma": self.gamma,
            "xi": self.xi,
            "residual": self.residual,
        }


def planar_configuration(i1, i2, sign):
    """Pair in the e1-e3 plane with ``e3.q_j = i_j``, ``q1`` on the ``x >= 0`` side.

    ``sign`` is the sign of ``i3``.
    """
    s1 = np.sqrt(max(0.0, 1.0 - i1 * i1))
    s2 = np.sqrt(max(0.0, 1.0 - i2 * i2))
    q1 = np.array([s1, 0.0, i1])
    q2 = np.array([sign * s2, 0.0, i2])
    return np.stack([q1 / np.linalg.norm(q1), q2 / np.linalg.norm(q2)])


def _generic_iota(params, gamma, variant, k):
    """``(n1 k / (k + m), n2 / (l + k))``, with a zero numerator giving zero."""
    n1, n2 = _numerators(params, gamma, variant)
    has1, has2 = abs(n1) > 1e-12, abs(n2) > 1e-12
    i1 = n1 * k / (k + params.m_ratio) if has1 else 0.0
    i2 = n2 / (params.ell + k) if has2 else 0.0
    return i1, i2


def _active_poles(params, gamma, variant):
    n1, n2 = _numerators(params, gamma, variant)
    return abs(n1) > 1e-12, abs(n2) > 1e-12


def _rational_residual(params, gamma, variant, k):
    """``k^2 (1 - i2(k)^2) - (1 - i1(k)^2)``; singular at active poles."""
    i1, i2 = _generic_iota(params, gamma, variant, k)
    return k * k * (1 - i2 * i2) - (1 - i1 * i1)


def _cleared_residual(params, gamma, variant, k):
    """Rational residual times its squared active pole factors, in product form."""
    n1, n2 = _numerators(params, gamma, variant)
    has1, has2 = _active_poles(params, gamma, variant)
    ell, m = params.ell, params.m_ratio
    q2 = (ell + k) ** 2 - n2 * n2 if has2 else 1.0
    f2 = (ell + k) ** 2 if has2 else 1.0
    q1 = (k + m) ** 2 - n1 * n1 * k * k if has1 else 1.0
    f1 = (k + m) ** 2 if has1 else 1.0
    return k * k * q2 * f1 - q1 * f2


def kappa_polynomial(params: PendulumParams, gamma, variant="reference"):
    """Chebyshev series of the cleared rational residual in ``varkappa``.

    The residual ``k^2 (1 - i2(k)^2) - (1 - i1(k)^2)`` is multiplied by the
    squares of its pole factors ``(l + k)`` and ``(k + m)`` (only those that
    are present) and interpolated at ``degree + 1`` Chebyshev nodes. Generic
    parameters give degree six.
    """
    _check_variant(variant)
    n1, n2 = _numerators(params, gamma, variant)
    has1, has2 = _active_poles(params, gamma, variant)
    ell, m = params.ell, params.m_ratio
    degree = 2 + 2 * has1 + 2 * has2
    half = 2.0 * (1.0 + ell + m + abs(n1) + abs(n2))
    poles = np.array([-ell, -m])
    x = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
    for stretch in (1.0, 1.07, 1.13, 1.19):
        nodes = half * stretch * x
        if np.min(np.abs(nodes[:, None] - poles[None, :])) > 1e-3 * half:
            break
    vals = []
    for k in nodes:
        factor = ((ell + k) ** 2 if has2 else 1.0) * ((k + m) ** 2 if has1 else 1.0)
        vals.append(_rational_residual(params, gamma, variant, k) * factor)
    return cheb.Chebyshev.fit(nodes, vals, degree, domain=[-half * stretch, half * stretch])


def _polish_kappa(params, gamma, variant, k, iters=8):
    """Newton refinement of a root of the cleared residual."""
    for _ in range(iters):
        r = _cleared_residual(params, gamma, variant, k)
        h = 1e-7 * (1 + abs(k))
        dr = (_cleared_residual(params, gamma, variant, k + h) - _cleared_residual(params, gamma, variant, k - h)) / (
            2 * h
        )
        if dr == 0 or not np.isfinite(dr):
            break
        step = r / dr
        k -= step
        if abs(step) < 1e-16 * (1 + abs(k)):
            break
    return k


def generic_kappa_roots(params: PendulumParams, gamma, variant="reference"):
    """Admissible real roots ``varkappa`` of the generic-family polynomial."""
    has1, has2 = _active_poles(params, gamma, variant)
    ell, m = params.ell, params.m_ratio
    roots = kappa_polynomial(params, gamma, variant).roots()
    out = []
    for z in roots:
        if abs(z.imag) > 1e-6 * (1 + abs(z.real)):
            continue
        k = float(z.real)
        if abs(k) < 1e-10 or (has1 and abs(k + m) < 1e-8) or (has2 and abs(k + ell) < 1e-8):
            continue
        k = _polish_kappa(params, gamma, variant, k)
        out.append(k)
    return sorted(out)


def _record(params, gamma, variant, family, q, k=None):
    q = np.asarray(q, dtype=float)
    xi = 0.0 if np.isinf(gamma) else params.xi(gamma)
    return PendulumSolution(
        family=family,
        iota=pendulum_invariant(q[0], q[1]),
        q=q,
        gamma=float(gamma),
        xi=xi,
        residual=normalized_residual(params, q, gamma, variant),
        kappa=k,
    )


def vertical_configurations():
    out = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            out.append(np.array([[0.0, 0.0, s1], [0.0, 0.0, s2]]))
    return out


def pendulum_solve(params: PendulumParams, gamma, variant="reference", include_equilibria=True, tol=1e-8):
    """Enumerate relative equilibria at ``gamma`` (one planar representative each).

    Families: ``equilibrium`` (generator zero), ``vertical`` (both pendula
    vertical, any generator), ``generic`` (fixed points of ``Upsilon``) and
    ``special-1`` / ``special-2`` (``varkappa = -m`` at ``gamma = 1``,
    ``varkappa = -l`` at ``gamma = l``; reference model only). Records are
    deduplicated by invariant value and each carries its verified residual;
    candidates whose residual reaches ``tol`` are dropped.
    """
    _check_variant(variant)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    ell, m = params.ell, params.m_ratio
    n1, n2 = _numerators(params, gamma, variant)
    records = []
    if include_equilibria:
        records += [_record(params, np.inf, variant, "equilibrium", q) for q in vertical_configurations()]
    records += [_record(params, gamma, variant, "vertical", q) for q in vertical_configurations()]

    for k in generic_kappa_roots(params, gamma, variant):
        i1, i2 = _generic_iota(params, gamma, variant, k)
        if not (abs(i1) < 1 - 1e-12 and abs(i2) < 1 - 1e-12):
            continue
        q = planar_configuration(i1, i2, np.sign(k))
        records.append(_record(params, gamma, variant, "generic", q, k))

    if abs(n1) <= 1e-12:
        i2 = n2 / (ell - m)
        rad = 1.0 - m * m * (1.0 - i2 * i2)
        if abs(i2) < 1 - 1e-12 and 0 <= rad < 1 - 1e-12:
            for s in {np.sqrt(rad), -np.sqrt(rad)}:
                records.append(_record(params, gamma, variant, "special-1", planar_configuration(s, i2, -1.0), -m))
    if abs(n2) <= 1e-12:
        i1 = n1 * ell / (ell - m)
        rad = 1.0 - (1.0 - i1 * i1) / ell**2
        if abs(i1) < 1 - 1e-12 and 0 <= rad < 1 - 1e-12:
            for s in {np.sqrt(rad), -np.sqrt(rad)}:
                records.append(_record(params, gamma, variant, "special-2", planar_configuration(i1, s, -1.0), -ell))

    unique = []
    for r in records:
        if r.residual >= tol:
            continue
        if any(u.xi == r.xi and np.linalg.norm(u.iota - r.iota) < 1e-9 for u in unique):
            continue
        unique.append(r)
    return unique


def pendulum_isotropy_sample(q):
    """Closed-form isotropy element for the stratum of ``q`` (``None`` if trivial)."""
    q = np.asarray(q, dtype=float)
    vertical = [np.linalg.norm(P3 @ v) < 1e-12 for v in q]
    if all(vertical):
        return O2Element(np.pi)
    iota = pendulum_invariant(q[0], q[1])
    if any(vertical) or abs(dependence_defect(iota)) < 1e-12:
        return reflection_through(q)
    return None


def pendulum_point(q):
    return ManifoldPoint(S2xS2, q)
