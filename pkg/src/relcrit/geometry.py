"""Embedded manifolds, tangent bases, retractions and finite differences.

Every manifold stores points as numpy arrays in a fixed embedding (or a
tuple of arrays for products). Tangent vectors are handled as flattened
embedded vectors. Each manifold supplies a basis of its tangent space that
is orthonormal for its metric, so gradient coordinates in that basis are
Riemannian gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from relcrit.lie import exp_so3, hat, project_rotation

RANK_RTOL = 1e-10
RANK_ATOL = 1e-9
FD_REL_STEP = 1e-5


# --- numerical rank -----------------------------------------------------------


def numerical_rank(M, rtol=RANK_RTOL, atol=RANK_ATOL):
    """Count singular values above ``max(sigma_max * dim * rtol, atol)``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rank_threshold(s, max(M.shape), rtol, atol)))


def rank_threshold(s, dim, rtol=RANK_RTOL, atol=RANK_ATOL):
    smax = float(s[0]) if len(s) else 0.0
    return max(smax * dim * rtol, atol)


def orthonormal_range(M, rtol=RANK_RTOL, atol=RANK_ATOL):
    """Orthonormal basis (as columns) of the numerical column space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > rank_threshold(s, max(M.shape), rtol, atol)))
    return U[:, :r]


# --- manifolds ----------------------------------------------------------------


class Manifold:
    """Base class. Subclasses set ``name``, ``dim``, ``size``."""

    name = "manifold"
    dim = 0
    size = 0
    metric_weight = 1.0

    def flatten(self, x):
        return np.asarray(x, dtype=float).reshape(-1)

    def unflatten(self, v):
        raise NotImplementedError

    def validate(self, x):
        """Raise ``ValueError`` if ``x`` is not a point of the manifold."""

    def tangent_basis(self, x):
        """``(dim, size)`` array whose rows are orthonormal tangent vectors."""
        raise NotImplementedError

    def retract(self, x, coeffs, step=1.0):
        raise NotImplementedError

    def basis_near(self, y, reference):
        """Tangent basis at ``y`` close to ``reference``, a basis at a nearby point.

        Used where bases at neighbouring points are compared, so that a frame
        that turns quickly (near a sphere's pole) does not look like curvature.
        """
        return self.tangent_basis(y)

    def random_point(self, rng):
        raise NotImplementedError

    def inner(self, u, v):
        return self.metric_weight * float(np.dot(u, v))

    def coords(self, x, vectors, basis=None):
        """Coordinates of embedded tangent vectors (rows of ``vectors``)."""
        B = self.tangent_basis(x) if basis is None else basis
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        return self.metric_weight * (V @ B.T)

    def norm(self, x):
        return float(np.linalg.norm(self.flatten(x)))

    def __repr__(self):
        return self.name

    def __eq__(self, other):
        return type(self) is type(other) and repr(self) == repr(other)

    def __hash__(self):
        return hash(repr(self))


class SO3Manifold(Manifold):
    """Rotations with left-trivialized tangent basis ``A hat(e_i)``.

    The metric is ``0.5 * tr(X^T Y)``, for which that basis is orthonormal
    and coefficients are body angular velocities.
    """

    name = "SO3"
    dim = 3
    size = 9
    metric_weight = 0.5

    def unflatten(self, v):
        return np.asarray(v, dtype=float).reshape(3, 3)

    def validate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (3, 3):
            raise ValueError(f"SO3 point must be 3x3, got {x.shape}")
        if np.linalg.norm(x.T @ x - np.eye(3)) > 1e-10 or abs(np.linalg.det(x) - 1) > 1e-10:
            raise ValueError("matrix is not a rotation")

    def tangent_basis(self, x):
        A = np.asarray(x, dtype=float)
        return np.stack([(A @ hat(e)).reshape(-1) for e in np.eye(3)])

    def retract(self, x, coeffs, step=1.0):
        eta = step * np.asarray(coeffs, dtype=float)
        A = np.asarray(x, dtype=float)
        if not np.any(eta):
            return A.copy()
        B = A @ exp_so3(eta)
        if np.linalg.norm(B.T @ B - np.eye(3)) > 1e-10:
            B = project_rotation(B)
        return B

    def random_point(self, rng):
        from relcrit.lie import random_rotation

        return random_rotation(rng)


def _sphere_frame(q):
    q = np.asarray(q, dtype=float)
    axis = np.array([0.0, 0.0, 1.0])
    if np.linalg.norm(np.cross(q, axis)) < 1e-8:
        axis = np.array([1.0, 0.0, 0.0])
    u = np.cross(q, axis)
    u /= np.linalg.norm(u)
    w = np.cross(q, u)
    w /= np.linalg.norm(w)
    return u, w


class S2xS2Manifold(Manifold):
    """Pairs of unit vectors stored as a ``(2, 3)`` array."""

    name = "S2xS2"
    dim = 4
    size = 6

    def unflatten(self, v):
        return np.asarray(v, dtype=float).reshape(2, 3)

    def validate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (2, 3):
            raise ValueError(f"S2xS2 point must have shape (2, 3), got {x.shape}")
        if np.any(np.abs(np.linalg.norm(x, axis=1) - 1.0) > 1e-12):
            raise ValueError("S2 factors must be unit vectors")

    def tangent_basis(self, x):
        x = np.asarray(x, dtype=float)
        rows = []
        for k in range(2):
            for v in _sphere_frame(x[k]):
                row = np.zeros((2, 3))
                row[k] = v
                rows.append(row.reshape(-1))
        return np.stack(rows)

    def basis_near(self, y, reference):
        y = np.asarray(y, dtype=float)
        R = np.array(reference, dtype=float).reshape(4, 2, 3)
        for k in range(2):
            R[:, k] -= np.outer(R[:, k] @ y[k], y[k])
        return R.reshape(4, 6)

    def retract(self, x, coeffs, step=1.0):
        x = np.asarray(x, dtype=float)
        c = step * np.asarray(coeffs, dtype=float)
        if not np.any(c):
            return x.copy()
        y = x + (c @ self.tangent_basis(x)).reshape(2, 3)
        return y / np.linalg.norm(y, axis=1, keepdims=True)

    def random_point(self, rng):
        y = rng.normal(size=(2, 3))
        return y / np.linalg.norm(y, axis=1, keepdims=True)


def _sl3_algebra_basis():
    basis = []
    for i in range(3):
        for j in range(3):
            if i != j:
                E = np.zeros((3, 3))
                E[i, j] = 1.0
                basis.append(E)
    basis.append(np.diag([1.0, -1.0, 0.0]) / np.sqrt(2.0))
    basis.append(np.diag([1.0, 1.0, -2.0]) / np.sqrt(6.0))
    return np.stack(basis)


_SL3_ALGEBRA = _sl3_algebra_basis()


def _symmetric_orthonormalize(B):
    """Loewdin orthonormalization of the rows of ``B`` (smooth in ``B``)."""
    G = B @ B.T
    w, Q = np.linalg.eigh(G)
    return (Q @ np.diag(w ** -0.5) @ Q.T) @ B


class SL3Manifold(Manifold):
    """Unimodular 3x3 matrices with the Frobenius metric."""

    name = "SL3"
    dim = 8
    size = 9

    def unflatten(self, v):
        return np.asarray(v, dtype=float).reshape(3, 3)

    def validate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (3, 3):
            raise ValueError(f"SL3 point must be 3x3, got {x.shape}")
        if abs(np.linalg.det(x) - 1.0) > 1e-10:
            raise ValueError(f"det = {np.linalg.det(x)!r} is not 1")

    def tangent_basis(self, x):
        A = np.asarray(x, dtype=float)
        raw = np.stack([(A @ X).reshape(-1) for X in _SL3_ALGEBRA])
        return _symmetric_orthonormalize(raw)

    def retract(self, x, coeffs, step=1.0):
        A = np.asarray(x, dtype=float)
        c = step * np.asarray(coeffs, dtype=float)
        if not np.any(c):
            return A.copy()
        B = (c @ self.tangent_basis(A)).reshape(3, 3)
        X = np.linalg.solve(A, B)
        X -= np.trace(X) / 3.0 * np.eye(3)
        Y = A @ expm(X)
        d = np.linalg.det(Y)
        if not np.isfinite(d) or d <= 0:
            raise ValueError("SL3 retraction produced a non-finite or non-positive determinant")
        return Y / np.cbrt(d)

    def random_point(self, rng):
        from relcrit.lie import random_rotation

        a = np.exp(rng.uniform(-0.7, 0.7, size=3))
        a /= np.cbrt(np.prod(a))
        return random_rotation(rng) @ np.diag(a) @ random_rotation(rng).T


class Euclidean(Manifold):
    """Flat space of arrays of a fixed shape (also used for open subsets)."""

    def __init__(self, shape, name=None):
        self.shape = tuple(int(s) for s in np.atleast_1d(shape))
        self.size = int(np.prod(self.shape))
        self.dim = self.size
        self.name = name or f"R{self.shape}"

    def __repr__(self):
        return f"Euclidean({self.shape})"

    def unflatten(self, v):
        return np.asarray(v, dtype=float).reshape(self.shape)

    def validate(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite coordinates")

    def tangent_basis(self, x):
        return np.eye(self.size)

    def retract(self, x, coeffs, step=1.0):
        x = np.asarray(x, dtype=float)
        return x + step * np.asarray(coeffs, dtype=float).reshape(self.shape)

    def random_point(self, rng):
        return rng.normal(size=self.shape)


class Product(Manifold):
    """Cartesian product; points are tuples of factor points."""

    def __init__(self, *factors):
        self.factors = tuple(factors)
        self.dim = sum(f.dim for f in self.factors)
        self.size = sum(f.size for f in self.factors)
        self.name = " x ".join(f.name for f in self.factors)

    def __repr__(self):
        return "Product(" + ", ".join(repr(f) for f in self.factors) + ")"

    def flatten(self, x):
        return np.concatenate([f.flatten(xi) for f, xi in zip(self.factors, x)])

    def unflatten(self, v):
        out, k = [], 0
        for f in self.factors:
            out.append(f.unflatten(v[k : k + f.size]))
            k += f.size
        return tuple(out)

    def validate(self, x):
        if len(x) != len(self.factors):
            raise ValueError("wrong number of product factors")
        for f, xi in zip(self.factors, x):
            f.validate(xi)

    def tangent_basis(self, x):
        B = np.zeros((self.dim, self.size))
        r = c = 0
        for f, xi in zip(self.factors, x):
            B[r : r + f.dim, c : c + f.size] = f.tangent_basis(xi)
            r += f.dim
            c += f.size
        return B

    def basis_near(self, y, reference):
        B = np.zeros((self.dim, self.size))
        r = c = 0
        for f, yi in zip(self.factors, y):
            B[r : r + f.dim, c : c + f.size] = f.basis_near(yi, reference[r : r + f.dim, c : c + f.size])
            r += f.dim
            c += f.size
        return B

    def _weights(self):
        return np.concatenate([np.full(f.size, f.metric_weight) for f in self.factors])

    def inner(self, u, v):
        return float(np.sum(self._weights() * u * v))

    def coords(self, x, vectors, basis=None):
        B = self.tangent_basis(x) if basis is None else basis
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        return (V * self._weights()) @ B.T

    def retract(self, x, coeffs, step=1.0):
        coeffs = np.asarray(coeffs, dtype=float)
        out, k = [], 0
        for f, xi in zip(self.factors, x):
            out.append(f.retract(xi, coeffs[k : k + f.dim], step))
            k += f.dim
        return tuple(out)

    def random_point(self, rng):
        return tuple(f.random_point(rng) for f in self.factors)


SO3 = SO3Manifold()
S2xS2 = S2xS2Manifold()
SL3 = SL3Manifold()


# --- points and bases ---------------------------------------------------------


@dataclass(frozen=True)
class ManifoldPoint:
    """A point together with the manifold it lives on."""

    manifold: Manifold
    value: object

    def __post_init__(self):
        if not isinstance(self.value, tuple):
            object.__setattr__(self, "value", np.asarray(self.value, dtype=float))

    @property
    def flat(self):
        return self.manifold.flatten(self.value)


@dataclass(frozen=True)
class TangentBasis:
    """Embedded tangent vectors (rows) at a point."""

    point: ManifoldPoint
    vectors: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return int(self.vectors.shape[0])


def tangent_basis(p: ManifoldPoint) -> TangentBasis:
    return TangentBasis(p, p.manifold.tangent_basis(p.value))


def retract(p: ManifoldPoint, coeffs, step=1.0) -> ManifoldPoint:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (p.manifold.dim,):
        raise ValueError(f"expected {p.manifold.dim} coefficients, got shape {coeffs.shape}")
    y = p.manifold.retract(p.value, coeffs, step)
    if not np.all(np.isfinite(p.manifold.flatten(y))):
        raise ValueError("retraction produced non-finite coordinates")
    return ManifoldPoint(p.manifold, y)


def default_step(p: ManifoldPoint, rel=FD_REL_STEP):
    return rel * (1.0 + float(np.linalg.norm(p.flat)))


def fd_gradient(f: Callable, p: ManifoldPoint, h=None):
    """Central-difference gradient coordinates of ``f`` in the tangent basis.

    ``f`` takes a raw point value and returns a float.
    """
    h = default_step(p) if h is None else float(h)
    M, x = p.manifold, p.value
    g = np.empty(M.dim)
    for i in range(M.dim):
        e = np.zeros(M.dim)
        e[i] = 1.0
        fp = f(M.retract(x, e, h))
        fm = f(M.retract(x, e, -h))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError("non-finite function value in finite differences")
        g[i] = (fp - fm) / (2.0 * h)
    return g


def fd_jacobian(F: Callable, p: ManifoldPoint, h=None):
    """Central-difference Jacobian (rows = outputs, columns = tangent basis)."""
    h = default_step(p) if h is None else float(h)
    M, x = p.manifold, p.value
    cols = []
    for i in range(M.dim):
        e = np.zeros(M.dim)
        e[i] = 1.0
        fp = np.asarray(F(M.retract(x, e, h)), dtype=float)
        fm = np.asarray(F(M.retract(x, e, -h)), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise ValueError("non-finite function value in finite differences")
        cols.append((fp - fm) / (2.0 * h))
    return np.stack(cols, axis=-1)


# --- group actions ------------------------------------------------------------


class Action:
    """A Lie group action on an embedded manifold, linear in the embedding.

    Subclasses implement ``generators`` (one embedded tangent vector per
    algebra basis element), ``act`` (which must also map embedded tangent
    vectors, by linearity) and ``random_element``.
    """

    tag = "action"
    manifold: Manifold
    algebra_dim = 0

    def generators(self, x) -> np.ndarray:
        raise NotImplementedError

    def act(self, g, x):
        raise NotImplementedError

    def random_element(self, rng):
        raise NotImplementedError

    def act_tangent(self, g, x, vectors):
        """Push embedded tangent vectors (rows) forward by the linear map of ``g``."""
        M = self.manifold
        return np.stack([M.flatten(self.act(g, M.unflatten(v))) for v in np.atleast_2d(vectors)])


ACTIONS: dict[str, Callable[..., Action]] = {}


def register_action(tag: str, factory: Callable[..., Action]):
    ACTIONS[tag] = factory
    return factory


def resolve_action(action) -> Action:
    if isinstance(action, Action):
        return action
    if isinstance(action, str):
        try:
            return ACTIONS[action]()
        except KeyError:
            raise KeyError(f"unknown action tag {action!r}; known: {sorted(ACTIONS)}") from None
    raise TypeError(f"expected an Action or tag, got {type(action).__name__}")


def generator_coords(p: ManifoldPoint, action) -> np.ndarray:
    """Tangent coordinates of the generators, as columns ``(dim M, dim g)``."""
    act = resolve_action(action)
    G = np.atleast_2d(act.generators(p.value))
    return p.manifold.coords(p.value, G).T


def generator_span(p: ManifoldPoint, action) -> TangentBasis:
    """Orthonormal basis of the orbit directions ``g . p``.

    ``dim`` is the numerical rank, so it drops at points with isotropy.
    """
    act = resolve_action(action)
    C = generator_coords(p, act)
    Q = orthonormal_range(C)
    B = p.manifold.tangent_basis(p.value)
    return TangentBasis(p, Q.T @ B, {"action": act.tag, "algebra_dim": act.algebra_dim})


def isotropy_dim(p: ManifoldPoint, action) -> int:
    act = resolve_action(action)
    return act.algebra_dim - generator_span(p, act).dim


def coordinate_map(p: ManifoldPoint, g, action) -> np.ndarray:
    """Matrix of ``d Phi_g`` at a fixed point ``p`` in tangent coordinates."""
    act = resolve_action(action)
    M = p.manifold
    B = M.tangent_basis(p.value)
    images = act.act_tangent(g, p.value, B)
    return M.coords(p.value, images, B).T


def stack_columns(blocks: Sequence[np.ndarray], rows: int) -> np.ndarray:
    blocks = [np.asarray(b, dtype=float).reshape(rows, -1) for b in blocks]
    return np.concatenate(blocks, axis=1) if blocks else np.zeros((rows, 0))


class LiftedAction(Action):
    """Action on ``M x R^k`` by ``g.(m, xi) = (g.m, Ad_g xi)``.

    ``bracket(eta, xi)`` gives the algebra part of the generators.
    """

    def __init__(self, base: Action, Ad: Callable, bracket: Callable):
        self.base = base
        self.Ad = Ad
        self.bracket = bracket
        self.algebra_dim = base.algebra_dim
        self.manifold = Product(base.manifold, Euclidean((base.algebra_dim,)))
        self.tag = base.tag + "+algebra"

    def generators(self, x):
        m, xi = x
        G = np.atleast_2d(self.base.generators(m))
        rows = []
        for j in range(self.algebra_dim):
            e = np.zeros(self.algebra_dim)
            e[j] = 1.0
            rows.append(np.concatenate([G[j], np.asarray(self.bracket(e, xi), dtype=float)]))
        return np.stack(rows)

    def act(self, g, x):
        m, xi = x
        return (self.base.act(g, m), np.asarray(self.Ad(g, xi), dtype=float))

    def random_element(self, rng):
        return self.base.random_element(rng)
