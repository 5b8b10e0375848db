"""Small linear-algebra and validation helpers."""
from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError, ValidationError

SYM_TOL = 1e-12
EIG_FLOOR = 1e-14


def as_vector(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} has non-finite entries")
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatchError(f"{name} has length {v.shape[0]}, expected {dim}")
    return v


def as_points(x, dim: int) -> np.ndarray:
    """Coerce to an (m, dim) float array; a single point becomes shape (1, dim)."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DimensionMismatchError(f"points of shape {pts.shape} do not live in dimension {dim}")
    return pts


def check_square(M, name: str = "matrix") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{name} has non-finite entries")
    return M


def check_spd(A, name: str = "form", error=ValidationError) -> np.ndarray:
    """Return ``A`` as a symmetric float array, raising ``error`` unless it is SPD.

    Symmetry is tested to ``SYM_TOL`` relative to the largest entry; the
    returned matrix is exactly symmetrized.
    """
    try:
        A = check_square(A, name)
    except ValidationError as exc:
        raise error(str(exc)) from None
    scale = max(np.max(np.abs(A)), 1.0)
    if np.max(np.abs(A - A.T)) > SYM_TOL * scale:
        raise error(f"{name} is not symmetric")
    A = 0.5 * (A + A.T)
    if np.linalg.eigvalsh(A)[0] <= 0.0:
        raise error(f"{name} is not positive definite")
    return A


def spd_power(A: np.ndarray, power: float) -> np.ndarray:
    """Principal power of an SPD matrix via eigendecomposition."""
    w, V = np.linalg.eigh(A)
    w = np.maximum(w, EIG_FLOOR * max(w[-1], EIG_FLOOR))
    out = (V * w**power) @ V.T
    return 0.5 * (out + out.T)


def spd_inv(A: np.ndarray) -> np.ndarray:
    out = np.linalg.solve(A, np.eye(A.shape[0]))
    return 0.5 * (out + out.T)


def random_spd(n: int, rng: np.random.Generator, log_spread: float = 1.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues in ``[exp(-log_spread), exp(log_spread)]``."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(-log_spread, log_spread, size=n))
    A = (Q * w) @ Q.T
    return 0.5 * (A + A.T)


def unit_directions(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    d = rng.standard_normal((count, dim))
    norms = np.linalg.norm(d, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        d[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(d, axis=1)
    return d / norms[:, None]


def make_rng(seed) -> np.random.Generator:
    """Generator from an int or a sequence of ints, e.g. ``(seed, worker)``."""
    if seed is None:
        raise ValidationError("an explicit seed is required for randomized computations")
    if isinstance(seed, (int, np.integer)):
        return np.random.default_rng(int(seed))
    return np.random.default_rng([int(s) for s in seed])


def derive_seed(seed, *keys):
    """Extend ``seed`` with stream keys; ``None`` stays ``None`` (no implicit entropy)."""
    if seed is None:
        return None
    base = (int(seed),) if isinstance(seed, (int, np.integer)) else tuple(int(s) for s in seed)
    return base + tuple(int(k) for k in keys)
