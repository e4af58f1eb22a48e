"""Invariant maps, their differentials and the adequacy certificate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from relcrit.geometry import (
    Action,
    Manifold,
    ManifoldPoint,
    coordinate_map,
    fd_jacobian,
    generator_coords,
    numerical_rank,
    resolve_action,
)

ISOTROPY_TOL = 1e-10


@dataclass(frozen=True)
class InvariantMapSpec:
    """An invariant map ``iota: P -> R^k`` on an embedded manifold.

    Parameters
    ----------
    name : str
    manifold : Manifold
        Domain ``P``.
    codomain_dim : int
    evaluate : callable
        Point value -> array of length ``codomain_dim``.
    jacobian : callable, optional
        Point value -> ``(codomain_dim, manifold.size)`` derivative with
        respect to the flattened embedding. When absent, differentials are
        finite-differenced.
    action : Action or str, optional
        The action ``iota`` is invariant under.
    """

    name: str
    manifold: Manifold
    codomain_dim: int
    evaluate: Callable
    jacobian: Optional[Callable] = None
    action: object = None

    def __call__(self, value):
        y = np.asarray(self.evaluate(value), dtype=float).reshape(-1)
        if y.shape != (self.codomain_dim,):
            raise ValueError(f"{self.name}: expected {self.codomain_dim} outputs, got {y.shape}")
        return y

    @property
    def has_analytic_differential(self):
        return self.jacobian is not None


def _as_point(map_: InvariantMapSpec, p) -> ManifoldPoint:
    return p if isinstance(p, ManifoldPoint) else ManifoldPoint(map_.manifold, p)


def differential(map_: InvariantMapSpec, p, basis=None) -> np.ndarray:
    """``d iota(p)`` with rows = codomain, columns = tangent basis."""
    p = _as_point(map_, p)
    if map_.jacobian is None:
        return fd_differential(map_, p)
    B = p.manifold.tangent_basis(p.value) if basis is None else basis
    J = np.asarray(map_.jacobian(p.value), dtype=float).reshape(map_.codomain_dim, -1)
    return J @ B.T


def fd_differential(map_: InvariantMapSpec, p) -> np.ndarray:
    p = _as_point(map_, p)
    return np.atleast_2d(fd_jacobian(map_, p))


def invariance_check(map_: InvariantMapSpec, p, samples: int, seed: int = 0, action=None) -> float:
    """Max of ``|iota(g.p) - iota(p)| / (1 + |iota(p)|)`` over random ``g``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    p = _as_point(map_, p)
    act = resolve_action(action if action is not None else map_.action)
    rng = np.random.default_rng(seed)
    y0 = map_(p.value)
    scale = 1.0 + np.linalg.norm(y0)
    worst = 0.0
    for _ in range(samples):
        g = act.random_element(rng)
        worst = max(worst, float(np.linalg.norm(map_(act.act(g, p.value)) - y0)) / scale)
    return worst


@dataclass(frozen=True)
class AdequacyReport:
    point: str
    rank_diota: int
    dim_orbit_union: int
    manifold_dim: int
    samples: tuple = field(default_factory=tuple)

    @property
    def adequate_here(self) -> bool:
        return self.rank_diota + self.dim_orbit_union == self.manifold_dim

    def as_dict(self):
        return {
            "point": self.point,
            "rank_diota": self.rank_diota,
            "dim_orbit_union": self.dim_orbit_union,
            "manifold_dim": self.manifold_dim,
            "adequate": self.adequate_here,
            "isotropy_samples": len(self.samples),
        }


def check_isotropy(act: Action, p: ManifoldPoint, g, tol=ISOTROPY_TOL):
    M = p.manifold
    moved = np.linalg.norm(M.flatten(act.act(g, p.value)) - p.flat)
    if moved > tol * (1.0 + np.linalg.norm(p.flat)):
        raise ValueError(f"supplied isotropy element moves the point by {moved:.3e}")


def orbit_union(p: ManifoldPoint, action, isotropy_samples: Sequence = ()) -> np.ndarray:
    """Columns spanning ``g.p`` plus the ranges of ``d Phi_g - 1`` for the samples."""
    act = resolve_action(action)
    blocks = [generator_coords(p, act)]
    I = np.eye(p.manifold.dim)
    for g in isotropy_samples:
        check_isotropy(act, p, g)
        blocks.append(coordinate_map(p, g, act) - I)
    return np.concatenate(blocks, axis=1)


def adequacy_test(
    map_: InvariantMapSpec,
    p,
    isotropy_samples: Sequence = (),
    action=None,
    label: str = "",
) -> AdequacyReport:
    """Rank bookkeeping of the adequacy condition at a single point.

    Raises
    ------
    ValueError
        If a supplied isotropy element does not fix ``p``.
    """
    p = _as_point(map_, p)
    act = resolve_action(action if action is not None else map_.action)
    union = orbit_union(p, act, isotropy_samples)
    return AdequacyReport(
        point=label,
        rank_diota=numerical_rank(differential(map_, p)),
        dim_orbit_union=numerical_rank(union),
        manifold_dim=p.manifold.dim,
        samples=tuple(isotropy_samples),
    )
