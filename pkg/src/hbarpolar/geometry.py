"""Symmetric convex bodies and their hbar-polar duals.

Four representations are supported: :class:`Ellipsoid` ``{x : Ax.x <= hbar}``,
axis-aligned :class:`Box`, vertex-described :class:`VPolytope` and
halfspace-described :class:`HPolytope`.  All bodies are centrally symmetric,
immutable and carry enough structure to evaluate support functions, gauges
and membership exactly (polytope facets/vertices are obtained from Qhull).

The polar dual at Planck constant ``hbar`` is

    X^hbar = {p : p.x <= hbar for all x in X}

and maps ellipsoids to ellipsoids (``A -> A^-1``), boxes to cross-polytopes,
and swaps the V- and H-representations of polytopes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Union

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from ._linalg import (
    as_points,
    as_vector,
    check_spd,
    check_square,
    make_rng,
    spd_inv,
    unit_directions,
)
from .exceptions import (
    DimensionMismatchError,
    InvalidBodyError,
    NumericalError,
    UnboundedBodyError,
    ValidationError,
)

DEFAULT_HBAR = 1.0
# relative tolerance for geometric predicates, scaled by the circumradius
GEOM_RTOL = 1e-9
MIRROR_TOL = 1e-12
EXACT_MAX_DIM = 4


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_hbar(hbar) -> float:
    hbar = float(hbar)
    if not (hbar > 0.0 and math.isfinite(hbar)):
        raise ValidationError(f"hbar must be positive and finite, got {hbar}")
    return hbar


def _symmetrize_rows(rows: np.ndarray, keys: np.ndarray, tol: float = MIRROR_TOL):
    """Deduplicate rows and add missing mirrors ``key -> -key``.

    ``keys`` are the rows' scale-free signatures (vertices themselves, or
    normals divided by offsets).  Returns the kept row indices, a mask of
    which entries are added mirrors, and whether anything was added.
    """
    kept_rows: list[np.ndarray] = []
    kept_keys: list[np.ndarray] = []
    mirrored: list[bool] = []

    def present(k):
        if not kept_keys:
            return False
        K = np.asarray(kept_keys)
        scale = max(1.0, float(np.max(np.abs(k))))
        return bool(np.any(np.max(np.abs(K - k), axis=1) <= tol * scale))

    for r, k in zip(rows, keys):
        if not present(k):
            kept_rows.append(r)
            kept_keys.append(k)
            mirrored.append(False)
    added = False
    for r, k in list(zip(kept_rows, kept_keys)):
        if not present(-k):
            kept_rows.append(-r)
            kept_keys.append(-k)
            mirrored.append(True)
            added = True
    return np.asarray(kept_rows), np.asarray(mirrored), added


def _singular(M: np.ndarray) -> bool:
    # Hadamard ratio |det M| / prod(row norms) is scale free and in [0, 1]
    norms = np.linalg.norm(M, axis=1)
    if np.any(norms == 0.0):
        return True
    return abs(np.linalg.det(M)) / np.prod(norms) <= 1e-12


def _hull(points: np.ndarray) -> ConvexHull:
    try:
        return ConvexHull(points)
    except (QhullError, ValueError) as exc:
        raise NumericalError(f"convex hull computation failed: {exc}") from exc


class _BodyBase:
    kind: ClassVar[str]

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def support(self, directions) -> np.ndarray | float:
        """``sup{x.u : x in X}`` for one direction or a stack of directions."""
        U = np.asarray(directions, dtype=float)
        single = U.ndim == 1
        U = as_points(U, self.dim)
        if np.any(np.all(U == 0.0, axis=1)):
            raise ValidationError("support direction must be nonzero")
        h = self._support(U)
        return float(h[0]) if single else h

    def gauge(self, points) -> np.ndarray:
        """Minkowski functional ``inf{t >= 0 : x in tX}`` for each row."""
        return self._gauge(as_points(points, self.dim))

    def contains(self, points, tol: float | None = None) -> np.ndarray | bool:
        P = np.asarray(points, dtype=float)
        single = P.ndim == 1
        if tol is None:
            tol = self.default_tol
        out = self._contains(as_points(P, self.dim), float(tol))
        return bool(out[0]) if single else out

    @property
    def default_tol(self) -> float:
        return GEOM_RTOL * self.circumradius

    def polar(self, hbar: float = DEFAULT_HBAR) -> "Body":
        return self._polar(_check_hbar(hbar))

    def apply_linear(self, M) -> "Body":
        M = check_square(M, "linear map")
        if M.shape[0] != self.dim:
            raise DimensionMismatchError(f"map is {M.shape[0]}x{M.shape[0]}, body has dim {self.dim}")
        if _singular(M):
            raise ValidationError("linear map is singular")
        return self._apply_linear(M)

    def bounding_half_widths(self) -> np.ndarray:
        return self._support(np.eye(self.dim))


@dataclass(frozen=True, eq=False)
class Ellipsoid(_BodyBase):
    """``{x : form x . x <= hbar}`` with ``form`` symmetric positive definite."""

    form: np.ndarray
    hbar: float = DEFAULT_HBAR
    kind: ClassVar[str] = "ellipsoid"

    def __post_init__(self):
        A = check_spd(self.form, "ellipsoid form", error=InvalidBodyError)
        object.__setattr__(self, "form", _frozen(A))
        try:
            object.__setattr__(self, "hbar", _check_hbar(self.hbar))
        except ValidationError as exc:
            raise InvalidBodyError(str(exc)) from None

    @classmethod
    def ball(cls, dim: int, radius: float, hbar: float = DEFAULT_HBAR) -> "Ellipsoid":
        """Euclidean ball of the given radius, written as ``(hbar/R^2) I``."""
        return cls(np.eye(dim) * (hbar / radius**2), hbar)

    @property
    def dim(self) -> int:
        return self.form.shape[0]

    @cached_property
    def inv_form(self) -> np.ndarray:
        return _frozen(spd_inv(self.form))

    @cached_property
    def circumradius(self) -> float:
        return math.sqrt(self.hbar / np.linalg.eigvalsh(self.form)[0])

    def _support(self, U):
        q = np.einsum("ij,jk,ik->i", U, self.inv_form, U)
        return np.sqrt(self.hbar * np.maximum(q, 0.0))

    def _gauge(self, X):
        q = np.einsum("ij,jk,ik->i", X, self.form, X)
        return np.sqrt(np.maximum(q, 0.0) / self.hbar)

    def _contains(self, X, tol):
        q = np.einsum("ij,jk,ik->i", X, self.form, X)
        return q <= self.hbar + tol

    def _polar(self, hbar):
        # {A^-1 p.p <= hbar^2 / h0} written with Planck constant hbar
        return Ellipsoid(self.inv_form * (self.hbar / hbar), hbar)

    def _apply_linear(self, M):
        Minv = np.linalg.inv(M)
        return Ellipsoid(Minv.T @ self.form @ Minv, self.hbar)

    def volume(self) -> float:
        n = self.dim
        _, logdet = np.linalg.slogdet(self.form)
        logv = 0.5 * n * math.log(math.pi * self.hbar) - 0.5 * logdet - math.lgamma(0.5 * n + 1.0)
        return math.exp(logv)

    def data(self):
        return self.form.tolist()


@dataclass(frozen=True, eq=False)
class Box(_BodyBase):
    """The parallelepiped ``prod_j [-a_j, a_j]``."""

    half_widths: np.ndarray
    kind: ClassVar[str] = "box"

    def __post_init__(self):
        try:
            a = as_vector(self.half_widths, name="half_widths")
        except ValidationError as exc:
            raise InvalidBodyError(str(exc)) from None
        if a.size == 0 or np.any(a <= 0.0):
            raise InvalidBodyError("box half widths must be positive")
        object.__setattr__(self, "half_widths", _frozen(a))

    @property
    def dim(self) -> int:
        return self.half_widths.shape[0]

    @cached_property
    def circumradius(self) -> float:
        return float(np.linalg.norm(self.half_widths))

    def corners(self) -> np.ndarray:
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=self.dim)))
        return signs * self.half_widths

    def _support(self, U):
        return np.abs(U) @ self.half_widths

    def _gauge(self, X):
        return np.max(np.abs(X) / self.half_widths, axis=1)

    def _contains(self, X, tol):
        return np.all(np.abs(X) <= self.half_widths + tol, axis=1)

    def _polar(self, hbar):
        n = self.dim
        V = np.vstack([np.diag(hbar / self.half_widths), -np.diag(hbar / self.half_widths)])
        return VPolytope(V[np.argsort(np.tile(np.arange(n), 2), kind="stable")])

    def _apply_linear(self, M):
        if np.count_nonzero(M - np.diag(np.diagonal(M))) == 0:
            return Box(np.abs(np.diagonal(M)) * self.half_widths)
        return VPolytope(self.corners() @ M.T)

    def volume(self) -> float:
        return float(np.prod(2.0 * self.half_widths))

    def data(self):
        return self.half_widths.tolist()


@dataclass(frozen=True, eq=False)
class VPolytope(_BodyBase):
    """Convex hull of a centrally symmetric vertex set.

    Missing mirror vertices are added on construction (``symmetrized`` records
    that) unless ``symmetrize=False``, in which case an asymmetric input raises
    :class:`InvalidBodyError`.
    """

    vertices: np.ndarray
    symmetrize: bool = field(default=True, repr=False)
    symmetrized: bool = field(default=False, init=False)
    kind: ClassVar[str] = "vpolytope"

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim == 1:
            V = V.reshape(-1, 1)
        if V.ndim != 2 or V.shape[0] == 0 or not np.all(np.isfinite(V)):
            raise InvalidBodyError("vertices must be a non-empty finite (m, n) array")
        V, _, added = _symmetrize_rows(V, V)
        if added and not self.symmetrize:
            raise InvalidBodyError("vertex set is not centrally symmetric")
        if np.linalg.matrix_rank(V) < V.shape[1]:
            raise InvalidBodyError("vertices do not span the space; origin is not interior")
        object.__setattr__(self, "vertices", _frozen(V))
        object.__setattr__(self, "symmetrized", added)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @cached_property
    def circumradius(self) -> float:
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    @cached_property
    def facets(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit outer normals ``w`` and offsets ``b`` with ``X = {w.x <= b}``."""
        if self.dim == 1:
            r = float(np.max(np.abs(self.vertices)))
            return _frozen([[1.0], [-1.0]]), _frozen([r, r])
        hull = _hull(self.vertices)
        W, b = hull.equations[:, :-1], -hull.equations[:, -1]
        key = np.round(np.hstack([W, b[:, None]]), 12)
        _, idx = np.unique(key, axis=0, return_index=True)
        idx = np.sort(idx)
        return _frozen(W[idx]), _frozen(b[idx])

    @cached_property
    def extreme_vertices(self) -> np.ndarray:
        if self.dim == 1:
            r = float(np.max(np.abs(self.vertices)))
            return _frozen([[r], [-r]])
        return _frozen(self.vertices[np.sort(_hull(self.vertices).vertices)])

    def axis_cross_half_widths(self) -> np.ndarray | None:
        """Half widths ``b`` if this is the cross-polytope ``conv{+-b_j e_j}``."""
        V = self.vertices
        n = self.dim
        if V.shape[0] != 2 * n:
            return None
        nz = np.abs(V) > 0.0
        if not np.all(nz.sum(axis=1) == 1):
            return None
        axes = np.argmax(nz, axis=1)
        if sorted(axes.tolist()) != sorted(list(range(n)) * 2):
            return None
        b = np.zeros(n)
        for v, j in zip(V, axes):
            b[j] = abs(v[j])
        return b

    def _support(self, U):
        return np.max(U @ self.vertices.T, axis=1)

    def _gauge(self, X):
        W, b = self.facets
        return np.maximum(np.max((X @ W.T) / b, axis=1), 0.0)

    def _contains(self, X, tol):
        W, b = self.facets
        return np.all(X @ W.T <= b + tol, axis=1)

    def _polar(self, hbar):
        return HPolytope(self.vertices, np.full(self.vertices.shape[0], hbar))

    def _apply_linear(self, M):
        return VPolytope(self.vertices @ M.T)

    def data(self):
        return self.vertices.tolist()


@dataclass(frozen=True, eq=False)
class HPolytope(_BodyBase):
    """``{x : a_j.x <= c_j}`` with halfspaces in symmetric pairs and ``c_j > 0``."""

    normals: np.ndarray
    offsets: np.ndarray
    symmetrize: bool = field(default=True, repr=False)
    symmetrized: bool = field(default=False, init=False)
    kind: ClassVar[str] = "hpolytope"

    def __post_init__(self):
        A = np.asarray(self.normals, dtype=float)
        if A.ndim == 1:
            A = A.reshape(-1, 1)
        c = np.asarray(self.offsets, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] == 0 or A.shape[0] != c.shape[0]:
            raise InvalidBodyError("normals must be (m, n) with m matching offsets")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(c))):
            raise InvalidBodyError("halfspaces have non-finite entries")
        if np.any(c <= 0.0):
            raise InvalidBodyError("halfspace offsets must be positive")
        if np.any(np.all(A == 0.0, axis=1)):
            raise InvalidBodyError("halfspace normal is zero")
        rows = np.hstack([A, c[:, None]])
        rows, mirrored, added = _symmetrize_rows(rows, A / c[:, None])
        if added and not self.symmetrize:
            raise InvalidBodyError("halfspaces are not in symmetric pairs")
        A, c = rows[:, :-1], rows[:, -1]
        c = np.where(mirrored, -c, c)
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise UnboundedBodyError("halfspace normals do not span the space; body is unbounded")
        object.__setattr__(self, "normals", _frozen(A))
        object.__setattr__(self, "offsets", _frozen(c))
        object.__setattr__(self, "symmetrized", added)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @cached_property
    def dual_points(self) -> np.ndarray:
        return _frozen(self.normals / self.offsets[:, None])

    @cached_property
    def vertices(self) -> np.ndarray:
        """Vertex enumeration through the facets of ``conv{a_j / c_j}``."""
        D = self.dual_points
        if self.dim == 1:
            r = 1.0 / float(np.max(np.abs(D)))
            return _frozen([[r], [-r]])
        hull = _hull(D)
        W, off = hull.equations[:, :-1], hull.equations[:, -1]
        V = W / (-off)[:, None]
        V, _, _ = _symmetrize_rows(V, V, tol=1e-10)
        return _frozen(V)

    @cached_property
    def circumradius(self) -> float:
        if self.dim <= EXACT_MAX_DIM:
            return float(np.max(np.linalg.norm(self.vertices, axis=1)))
        return float(np.linalg.norm(self.bounding_half_widths()))

    def _support(self, U):
        if self.dim <= EXACT_MAX_DIM:
            return np.max(U @ self.vertices.T, axis=1)
        return np.array([self._support_lp(u) for u in U])

    def _support_lp(self, u):
        res = linprog(
            -u,
            A_ub=self.normals,
            b_ub=self.offsets,
            bounds=[(None, None)] * self.dim,
            method="highs",
            options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        )
        if res.status == 3:
            raise UnboundedBodyError("support LP is unbounded")
        if res.status != 0:
            raise NumericalError(f"support LP failed: {res.message}")
        return -res.fun

    def _gauge(self, X):
        return np.maximum(np.max(X @ self.dual_points.T, axis=1), 0.0)

    def _contains(self, X, tol):
        return np.all(X @ self.normals.T <= self.offsets + tol, axis=1)

    def _polar(self, hbar):
        return VPolytope(hbar * self.dual_points)

    def _apply_linear(self, M):
        return HPolytope(self.normals @ np.linalg.inv(M), self.offsets)

    def data(self):
        return {"normals": self.normals.tolist(), "offsets": self.offsets.tolist()}


Body = Union[Ellipsoid, Box, VPolytope, HPolytope]
BODY_TYPES = (Ellipsoid, Box, VPolytope, HPolytope)


def _check_body(body) -> Body:
    if not isinstance(body, BODY_TYPES):
        raise InvalidBodyError(f"not a convex body: {type(body).__name__}")
    return body


def polar_dual(body: Body, hbar: float = DEFAULT_HBAR) -> Body:
    """The hbar-polar dual ``{p : p.x <= hbar for all x in body}``."""
    return _check_body(body).polar(hbar)


def contains(body: Body, point, tol: float | None = None):
    """Membership of one point (returns bool) or of rows of an array.

    ``tol`` is an absolute slack on the body's defining inequalities; the
    default is ``1e-9`` times the circumradius.
    """
    return _check_body(body).contains(point, tol)


def apply_linear(body: Body, M) -> Body:
    """Image ``M X`` of the body under an invertible linear map."""
    return _check_body(body).apply_linear(M)


def scale(body: Body, factor: float) -> Body:
    return apply_linear(body, float(factor) * np.eye(body.dim))


def support(body: Body, direction):
    return _check_body(body).support(direction)


def gauge(body: Body, points) -> np.ndarray:
    return _check_body(body).gauge(points)


def is_subset(inner: Body, outer: Body, mode: str = "exact", n_dirs: int = 512, seed: int = 0) -> bool:
    """Decide ``inner ⊂ outer``.

    In ``exact`` mode every pair of representations is decided exactly
    except an H-polytope inner body in dimension above 4, which falls back to
    sampling.  The ``sampled`` mode compares support functions over
    ``n_dirs`` random directions and can report false positives.
    """
    _check_body(inner), _check_body(outer)
    if inner.dim != outer.dim:
        raise DimensionMismatchError(f"dimensions differ: {inner.dim} vs {outer.dim}")
    if mode not in ("exact", "sampled"):
        raise ValidationError(f"unknown subset mode {mode!r}")
    slack = GEOM_RTOL * max(outer.circumradius, 1.0)

    if mode == "exact":
        if isinstance(inner, Ellipsoid) and isinstance(outer, Ellipsoid):
            # inner ⊂ outer  iff  A_out/h_out <= A_in/h_in in the Loewner order
            L = np.linalg.cholesky(inner.form / inner.hbar)
            Linv = np.linalg.inv(L)
            K = Linv @ (outer.form / outer.hbar) @ Linv.T
            return bool(np.linalg.eigvalsh(0.5 * (K + K.T))[-1] <= 1.0 + 1e-10)
        if isinstance(outer, HPolytope):
            return bool(np.all(inner.support(outer.normals) <= outer.offsets + slack))
        if isinstance(outer, Box):
            h = inner.bounding_half_widths()
            return bool(np.all(h <= outer.half_widths + slack))
        if isinstance(outer, VPolytope):
            W, b = outer.facets
            return bool(np.all(inner.support(W) <= b + slack))
        # outer is an ellipsoid and inner a polytope: test its vertices
        if isinstance(inner, Box):
            pts = inner.corners()
        elif isinstance(inner, VPolytope):
            pts = inner.vertices
        elif inner.dim <= EXACT_MAX_DIM:
            pts = inner.vertices
        else:
            pts = None
        if pts is not None:
            return bool(np.all(outer.contains(pts, tol=outer.default_tol)))

    rng = make_rng(seed)
    U = unit_directions(n_dirs, inner.dim, rng)
    U = np.vstack([U, np.eye(inner.dim), -np.eye(inner.dim)])
    return bool(np.all(inner.support(U) <= outer.support(U) + 1e-9 * max(outer.circumradius, 1.0)))


def sample_boundary(body: Body, count: int, seed: int = 0) -> np.ndarray:
    """``count`` seeded points on the boundary, found by radial projection."""
    _check_body(body)
    if count < 1:
        raise ValidationError("count must be at least 1")
    U = unit_directions(int(count), body.dim, make_rng(seed))
    return U / body.gauge(U)[:, None]


def body_to_dict(body: Body, hbar: float | None = None) -> dict:
    if hbar is None:
        hbar = body.hbar if isinstance(body, Ellipsoid) else DEFAULT_HBAR
    return {"kind": body.kind, "dim": body.dim, "data": body.data(), "hbar": float(hbar)}


def body_from_dict(doc: dict) -> Body:
    """Inverse of :func:`body_to_dict`; raises :class:`InvalidBodyError`."""
    if not isinstance(doc, dict):
        raise InvalidBodyError("body document must be a JSON object")
    try:
        kind, dim, data = doc["kind"], int(doc["dim"]), doc["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidBodyError(f"malformed body document: {exc}") from None
    hbar = doc.get("hbar", DEFAULT_HBAR)
    try:
        if kind == "ellipsoid":
            body = Ellipsoid(np.asarray(data, dtype=float), hbar)
        elif kind == "box":
            body = Box(np.asarray(data, dtype=float))
        elif kind == "vpolytope":
            body = VPolytope(np.asarray(data, dtype=float).reshape(-1, dim))
        elif kind == "hpolytope":
            body = HPolytope(
                np.asarray(data["normals"], dtype=float).reshape(-1, dim),
                np.asarray(data["offsets"], dtype=float),
            )
        else:
            raise InvalidBodyError(f"unknown body kind {kind!r}")
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, InvalidBodyError):
            raise
        raise InvalidBodyError(f"malformed body data: {exc}") from None
    if body.dim != dim:
        raise InvalidBodyError(f"declared dim {dim} does not match data dim {body.dim}")
    return body
