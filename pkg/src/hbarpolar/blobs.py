"""Symplectic matrices and quantum blobs.

A quantum blob is the image ``S(B^{2n}(sqrt(hbar)))`` of the phase-space ball
under a linear symplectic map ``S``.  Phase-space vectors are ordered
``z = (x, p)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import eigh

from ._linalg import check_spd, check_square, make_rng, spd_inv, spd_power, unit_directions
from .exceptions import ValidationError
from .geometry import Ellipsoid, polar_dual
from .volumes import ball_volume

SYMPLECTIC_TOL = 1e-10
TANGENCY_TOL = 1e-6


def standard_symplectic_form(n: int) -> np.ndarray:
    """The ``2n x 2n`` matrix ``J = [[0, I], [-I, 0]]``."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    n = int(n)
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


def is_symplectic(S, tol: float = SYMPLECTIC_TOL) -> bool:
    """``True`` iff ``||S^T J S - J||_F <= tol``."""
    S = check_square(S, "S")
    if S.shape[0] % 2:
        raise ValidationError("symplectic matrices have even dimension")
    J = standard_symplectic_form(S.shape[0] // 2)
    return bool(np.linalg.norm(S.T @ J @ S - J, "fro") <= tol)


def block_diagonal_generator(A) -> np.ndarray:
    """``diag(A^{-1/2}, A^{1/2})``, mapping ``B_X x B_P`` onto ``X x X^hbar``."""
    A = check_spd(A, "A")
    n = A.shape[0]
    S = np.zeros((2 * n, 2 * n))
    S[:n, :n] = spd_power(A, -0.5)
    S[n:, n:] = spd_power(A, 0.5)
    return S


@dataclass(frozen=True, eq=False)
class QuantumBlob:
    """Phase-space ellipsoid ``{z : M z.z <= hbar}`` with ``M = (S S^T)^{-1}``."""

    generator: np.ndarray
    hbar: float = 1.0
    form: np.ndarray = field(init=False)

    def __post_init__(self):
        S = check_square(self.generator, "generator")
        if not is_symplectic(S, 1e-9 * max(1.0, np.linalg.norm(S) ** 2)):
            raise ValidationError("blob generator is not symplectic")
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")
        object.__setattr__(self, "generator", S)
        object.__setattr__(self, "form", spd_inv(S @ S.T))

    @property
    def n(self) -> int:
        return self.generator.shape[0] // 2

    @cached_property
    def ellipsoid(self) -> Ellipsoid:
        return Ellipsoid(self.form, self.hbar)

    def volume(self) -> float:
        """Equal to ``Vol B^{2n}(sqrt(hbar)) = (pi hbar)^n / n!`` since det S = 1."""
        return self.ellipsoid.volume()

    def sample_boundary(self, count: int, seed=0) -> np.ndarray:
        U = unit_directions(int(count), 2 * self.n, make_rng(seed))
        return (math.sqrt(self.hbar) * U) @ self.generator.T


def blob_from_spd(A, hbar: float = 1.0) -> QuantumBlob:
    """The blob inscribed in ``{Ax.x <= hbar} x {A^-1 p.p <= hbar}``."""
    return QuantumBlob(block_diagonal_generator(A), hbar)


@dataclass
class Claim3Report:
    A: np.ndarray
    S: np.ndarray
    M: np.ndarray
    containment_pass: bool
    max_x_excess: float
    max_p_excess: float
    tangency_pass: bool
    tangency_points: list
    volume_ratio: float
    blob_volume: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "S": self.S.tolist(),
            "M": self.M.tolist(),
            "containment_pass": self.containment_pass,
            "tangency_pass": self.tangency_pass,
            "tangency_points": [list(map(float, z)) for z in self.tangency_points],
            "volume_ratio": self.volume_ratio,
            "blob_volume": self.blob_volume,
        }


def _tangency_witnesses(M: np.ndarray, C: np.ndarray, hbar: float):
    """Blob points maximizing ``C z.z`` on ``{M z.z = hbar}`` (generalized eigenproblem)."""
    w, V = eigh(C, M)
    top = w[-1]
    vecs = V[:, np.abs(w - top) <= TANGENCY_TOL]
    pts = []
    for v in vecs.T:
        z = v * math.sqrt(hbar / (v @ M @ v))
        pts.extend([z, -z])
    return top, pts


def claim3_check(X: Ellipsoid, hbar: float | None = None, n_boundary_samples: int = 1000,
                 seed: int = 0) -> Claim3Report:
    """Check that the blob of ``X`` sits in ``X x X^hbar`` touching both factors.

    Containment is checked on sampled blob boundary points.  Maximality is
    evidenced by the points of the blob that maximize each factor's quadratic
    form: they must lie on the boundary of that factor and in the interior
    of the other one.
    """
    if not isinstance(X, Ellipsoid):
        raise ValidationError("claim3_check requires an Ellipsoid")
    if hbar is None:
        hbar = X.hbar
    # rewrite X with Planck constant hbar
    A = X.form * (hbar / X.hbar)
    Xh = Ellipsoid(A, hbar)
    P = polar_dual(Xh, hbar)
    blob = blob_from_spd(A, hbar)
    n = blob.n

    Z = blob.sample_boundary(n_boundary_samples, seed)
    x, p = Z[:, :n], Z[:, n:]
    qx = np.einsum("ij,jk,ik->i", x, A, x) / hbar
    qp = np.einsum("ij,jk,ik->i", p, P.form, p) / hbar
    contained = bool(np.all(qx <= 1.0 + 1e-9) and np.all(qp <= 1.0 + 1e-9))

    Cx = np.zeros((2 * n, 2 * n))
    Cx[:n, :n] = A
    Cp = np.zeros((2 * n, 2 * n))
    Cp[n:, n:] = P.form
    tangent = []
    ok = True
    for C_on, C_off in ((Cx, Cp), (Cp, Cx)):
        top, pts = _tangency_witnesses(blob.form, C_on, hbar)
        hits = [z for z in pts
                if abs(z @ C_on @ z / hbar - 1.0) <= TANGENCY_TOL and z @ C_off @ z / hbar < 1.0 - TANGENCY_TOL]
        ok = ok and abs(top - 1.0) <= TANGENCY_TOL and bool(hits)
        tangent.extend(hits)

    vb = blob.volume()
    return Claim3Report(
        A=A, S=blob.generator, M=blob.form,
        containment_pass=contained,
        max_x_excess=float(np.max(qx) - 1.0),
        max_p_excess=float(np.max(qp) - 1.0),
        tangency_pass=ok,
        tangency_points=tangent,
        volume_ratio=vb / (Xh.volume() * P.volume()),
        blob_volume=vb,
        samples=int(n_boundary_samples),
    )


def phase_space_ball_volume(n: int, hbar: float = 1.0) -> float:
    return ball_volume(2 * n, math.sqrt(hbar))
