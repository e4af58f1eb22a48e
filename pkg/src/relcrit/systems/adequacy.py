"""Catalogue of adequate invariant maps and their isotropy strata.

Each stratum samples points of one isotropy type together with isotropy
elements fixing them, and records the expected rank split
``(rank d iota, dim of orbit directions plus isotropy ranges)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from relcrit.geometry import SO3, Action, Euclidean, register_action
from relcrit.invariants import InvariantMapSpec, adequacy_test
from relcrit.lie import exp_so3, hat, random_rotation
from relcrit.systems.pendulum import O2Element, pendulum_invariant_map, reflection_through
from relcrit.systems.top import LagrangeTopParams, top_invariant_map, top_isotropy_sample, top_state

R3 = Euclidean((3,), name="R3")
GL3 = Euclidean((3, 3), name="GL3")


def _random_orthogonal(rng):
    R = random_rotation(rng)
    return R if rng.random() < 0.5 else -R


class OrthogonalAction(Action):
    """O(3) acting linearly on R^3."""

    tag = "o3"
    manifold = R3
    algebra_dim = 3

    def generators(self, x):
        return np.stack([np.cross(e, x) for e in np.eye(3)])

    def act(self, g, x):
        return np.asarray(g, dtype=float) @ np.asarray(x, dtype=float)

    def random_element(self, rng):
        return _random_orthogonal(rng)


class AxisRotationAction(Action):
    """S^1 rotating SO(3) on the left about a fixed axis ``sigma``."""

    tag = "axis-rotation"
    manifold = SO3
    algebra_dim = 1

    def __init__(self, sigma=(0.0, 0.0, 1.0)):
        self.sigma = np.asarray(sigma, dtype=float) / np.linalg.norm(sigma)

    def generators(self, A):
        return (hat(self.sigma) @ np.asarray(A, dtype=float)).reshape(1, -1)

    def act(self, theta, A):
        return exp_so3(theta * self.sigma) @ np.asarray(A, dtype=float)

    def random_element(self, rng):
        return rng.uniform(0.0, 2 * np.pi)


class BiOrthogonalAction(Action):
    """O(3) x O(3) acting on 3x3 matrices by ``(U, V).A = U A V^T``."""

    tag = "o3xo3"
    manifold = GL3
    algebra_dim = 6

    def generators(self, A):
        A = np.asarray(A, dtype=float)
        rows = [(hat(e) @ A).reshape(-1) for e in np.eye(3)]
        rows += [(-A @ hat(e)).reshape(-1) for e in np.eye(3)]
        return np.stack(rows)

    def act(self, g, A):
        U, V = g
        return U @ np.asarray(A, dtype=float) @ V.T

    def random_element(self, rng):
        return _random_orthogonal(rng), _random_orthogonal(rng)


register_action("o3", OrthogonalAction)
register_action("axis-rotation", AxisRotationAction)
register_action("o3xo3", BiOrthogonalAction)


def norm_squared_map() -> InvariantMapSpec:
    return InvariantMapSpec(
        "norm-squared", R3, 1, lambda x: [x @ x], jacobian=lambda x: 2 * np.asarray(x)[None, :], action=OrthogonalAction()
    )


def body_axis_map(sigma=(0.0, 0.0, 1.0)) -> InvariantMapSpec:
    """``A -> A^T sigma`` in ``S^2`` (embedded in R^3)."""
    s = np.asarray(sigma, dtype=float) / np.linalg.norm(sigma)
    J = np.zeros((3, 9))
    for i in range(3):
        J[i, i:9:3] = s
    return InvariantMapSpec(
        "body-axis", SO3, 3, lambda A: np.asarray(A).T @ s, jacobian=lambda A: J, action=AxisRotationAction(s)
    )


def gram_invariants(A) -> np.ndarray:
    """Coefficients of the characteristic polynomial of ``A^T A``."""
    C = np.asarray(A, dtype=float).T @ np.asarray(A, dtype=float)
    t = np.trace(C)
    return np.array([t, 0.5 * (t * t - np.trace(C @ C)), np.linalg.det(C)])


def _gram_jacobian(A):
    A = np.asarray(A, dtype=float)
    C = A.T @ A
    t = np.trace(C)
    d = np.linalg.det(C)
    g1 = 2 * A
    g2 = 2 * t * A - 2 * A @ C
    g3 = 2 * d * np.linalg.inv(A).T
    return np.stack([g1.reshape(-1), g2.reshape(-1), g3.reshape(-1)])


def gram_map() -> InvariantMapSpec:
    return InvariantMapSpec("gram", GL3, 3, gram_invariants, jacobian=_gram_jacobian, action=BiOrthogonalAction())


# --- strata -------------------------------------------------------------------


@dataclass(frozen=True)
class Stratum:
    """Sampler of points of one isotropy type.

    ``sample(rng)`` returns ``(point, isotropy_elements)``, plus the map for
    that point when it depends on sampled parameters.
    """

    item: int
    name: str
    map: InvariantMapSpec
    sample: Callable
    expected: tuple


def _unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _horizontal(rng):
    phi = rng.uniform(0, 2 * np.pi)
    return np.array([np.cos(phi), np.sin(phi), 0.0])


def _tilted(rng, direction=None):
    """Unit vector neither vertical nor horizontal-degenerate."""
    z = rng.uniform(-0.9, 0.9)
    h = _horizontal(rng) if direction is None else direction
    return np.sqrt(1 - z * z) * h + z * np.array([0.0, 0.0, 1.0])


def _pendulum_strata():
    m = pendulum_invariant_map()
    up = np.array([0.0, 0.0, 1.0])

    def both_vertical(rng):
        q = np.stack([rng.choice([-1.0, 1.0]) * up, rng.choice([-1.0, 1.0]) * up])
        return q, [O2Element(np.pi)]

    def one_vertical(rng):
        v = rng.choice([-1.0, 1.0]) * up
        w = _tilted(rng)
        q = np.stack([v, w]) if rng.random() < 0.5 else np.stack([w, v])
        return q, [reflection_through(q)]

    def coplanar(rng):
        h = _horizontal(rng)
        q = np.stack([_tilted(rng, h), _tilted(rng, rng.choice([-1.0, 1.0]) * h)])
        return q, [reflection_through(q)]

    def independent(rng):
        return np.stack([_tilted(rng), _tilted(rng)]), []

    return [
        Stratum(4, "both vertical", m, both_vertical, (0, 4)),
        Stratum(4, "one vertical", m, one_vertical, (2, 2)),
        Stratum(4, "common vertical plane", m, coplanar, (2, 2)),
        Stratum(4, "independent", m, independent, (3, 1)),
    ]


def _top_strata():
    def params(rng):
        return LagrangeTopParams(rng.uniform(0.5, 3), rng.uniform(0.5, 3), 1.0, sigma=_unit(rng))

    def sleeping(rng):
        p = params(rng)
        A = top_state(p, rng.choice([-1.0, 1.0]), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
        return A, [top_isotropy_sample(p, A, rng.uniform(0.3, 2.5))], p

    def tilted(rng):
        p = params(rng)
        A = top_state(p, rng.uniform(-0.95, 0.95), rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
        return A, [], p

    def bind(sampler):
        def sample(rng):
            A, iso, p = sampler(rng)
            return A, iso, top_invariant_map(p)

        return sample

    m = top_invariant_map(LagrangeTopParams(1.0, 1.0, 1.0))
    return [
        Stratum(3, "sleeping", m, bind(sleeping), (0, 3)),
        Stratum(3, "tilted", m, bind(tilted), (1, 2)),
    ]


def _gram_strata():
    m = gram_map()
    Rz = lambda t: exp_so3(np.array([0.0, 0.0, t]))  # noqa: E731

    def distinct3(rng):
        s = np.sort(rng.uniform(0.3, 3.0, size=3))
        while np.min(np.diff(s)) < 0.05:
            s = np.sort(rng.uniform(0.3, 3.0, size=3))
        return random_rotation(rng) @ np.diag(s) @ random_rotation(rng).T, []

    def distinct2(rng):
        s, t = rng.uniform(0.3, 3.0, size=2)
        while abs(s - t) < 0.05:
            s, t = rng.uniform(0.3, 3.0, size=2)
        U, V = random_rotation(rng), random_rotation(rng)
        A = U @ np.diag([s, s, t]) @ V.T
        R = Rz(rng.uniform(0.3, 2.5))
        return A, [(U @ R @ U.T, V @ R @ V.T)]

    def distinct1(rng):
        s = rng.uniform(0.3, 3.0)
        O = _random_orthogonal(rng)
        samples = []
        for _ in range(2):
            W = random_rotation(rng)
            samples.append((O @ W @ O.T, W))
        return s * O, samples

    return [
        Stratum(5, "three distinct singular values", m, distinct3, (3, 6)),
        Stratum(5, "two distinct singular values", m, distinct2, (2, 7)),
        Stratum(5, "one distinct singular value", m, distinct1, (1, 8)),
    ]


def _simple_strata():
    def nonzero(rng):
        return rng.normal(size=3), []

    def origin(rng):
        return np.zeros(3), [-np.eye(3)]

    def any_attitude(rng):
        return random_rotation(rng), []

    return [
        Stratum(1, "nonzero", norm_squared_map(), nonzero, (1, 2)),
        Stratum(1, "origin", norm_squared_map(), origin, (0, 3)),
        Stratum(2, "any attitude", body_axis_map(), any_attitude, (2, 1)),
    ]


def adequacy_strata(items=(1, 2, 3, 4, 5)):
    """Strata for the requested catalogue items, in item order."""
    builders = {1: _simple_strata, 2: _simple_strata, 3: _top_strata, 4: _pendulum_strata, 5: _gram_strata}
    out = []
    for k in sorted(set(items)):
        if k not in builders:
            raise ValueError(f"unknown adequacy item {k}; choose from 1-5")
        out += [s for s in builders[k]() if s.item == k]
    return out


@dataclass(frozen=True)
class StratumResult:
    stratum: Stratum
    reports: tuple

    @property
    def ranks(self):
        return sorted({(r.rank_diota, r.dim_orbit_union) for r in self.reports})

    @property
    def matches(self):
        return self.ranks == [self.stratum.expected]

    @property
    def adequate(self):
        return all(r.adequate_here for r in self.reports)


def run_stratum(stratum: Stratum, samples: int, rng) -> StratumResult:
    reports = []
    for k in range(samples):
        drawn = stratum.sample(rng)
        point, iso = drawn[0], drawn[1]
        map_ = drawn[2] if len(drawn) > 2 else stratum.map
        reports.append(adequacy_test(map_, point, iso, label=f"{stratum.name} #{k}"))
    return StratumResult(stratum, tuple(reports))


def run_catalogue(samples: int, seed: int = 0, items=(1, 2, 3, 4, 5), workers: int = 1):
    """Run every stratum of the requested items.

    Each stratum draws from its own generator spawned from ``seed``, so the
    results do not depend on ``workers``.
    """
    strata = adequacy_strata(items)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(strata))]
    if workers <= 1:
        return [run_stratum(s, samples, g) for s, g in zip(strata, rngs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda sg: run_stratum(sg[0], samples, sg[1]), zip(strata, rngs)))

