"""Wavefunctions, the hbar-Fourier transform and concentration probabilities.

The transform convention is

    psi_hat(p) = (2 pi hbar)^{-n/2} ∫ exp(-i p.x / hbar) psi(x) dx,

under which the coherent state ``phi_0(x) = (pi hbar)^{-n/4} exp(-|x|^2 / 2hbar)``
is a fixed point.
"""
from __future__ import annotations

import base64
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_dilation
from scipy.special import erf, gammainc

from ._linalg import as_points, check_spd, make_rng, spd_inv
from .exceptions import DimensionMismatchError, GridLeakageError, NumericalError, ValidationError
from .geometry import Body, Box, Ellipsoid

LEAK_WARN = 1e-8
LEAK_ERROR = 1e-4
MAX_GRID_DIM = 2
SERIES_TOL = 1e-13
SERIES_MAX_TERMS = 200_000
_CHUNK = 1 << 17


class LeakageWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class GaussianState:
    """``psi(x) = (pi hbar)^{-n/4} (det A)^{1/4} exp(-Ax.x / 2hbar)``."""

    form: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        A = check_spd(self.form, "state form")
        A.setflags(write=False)
        object.__setattr__(self, "form", A)
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def dim(self) -> int:
        return self.form.shape[0]

    @property
    def norm_constant(self) -> float:
        n = self.dim
        _, logdet = np.linalg.slogdet(self.form)
        return math.exp(-0.25 * n * math.log(math.pi * self.hbar) + 0.25 * logdet)

    def __call__(self, x) -> np.ndarray:
        X = as_points(x, self.dim)
        q = np.einsum("ij,jk,ik->i", X, self.form, X)
        return self.norm_constant * np.exp(-q / (2.0 * self.hbar))

    def density_covariance(self) -> np.ndarray:
        """Covariance of ``|psi|^2``, namely ``hbar A^{-1} / 2``."""
        return 0.5 * self.hbar * spd_inv(self.form)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        L = np.linalg.cholesky(self.density_covariance())
        return rng.standard_normal((count, self.dim)) @ L.T

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "dim": self.dim, "form": self.form.tolist(), "hbar": self.hbar}


def coherent_state(n: int, hbar: float = 1.0) -> GaussianState:
    """The standard coherent state ``phi_0`` in ``n`` dimensions."""
    if int(n) != n or n < 1:
        raise ValidationError("n must be a positive integer")
    return GaussianState(np.eye(int(n)), hbar)


def fourier_gaussian(state: GaussianState) -> GaussianState:
    """Closed-form transform: a Gaussian of form ``A`` maps to one of form ``A^-1``."""
    return GaussianState(spd_inv(state.form), state.hbar)


def _is_pow2(k: int) -> bool:
    return k >= 2 and (k & (k - 1)) == 0


def _grid_axes(extents, counts) -> list[np.ndarray]:
    return [(np.arange(N) - N // 2) * (2.0 * L / N) for L, N in zip(extents, counts)]


def _grid_points(extents, counts) -> np.ndarray:
    mesh = np.meshgrid(*_grid_axes(extents, counts), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class GridState:
    """Samples of a wavefunction on a centered uniform grid.

    Axis ``j`` has ``counts[j]`` points ``x_k = (k - N/2) dx`` with
    ``dx = 2 L / N`` and ``L = extents[j]``.
    """

    extents: tuple
    counts: tuple
    values: np.ndarray
    hbar: float = 1.0
    norm_tol: float = field(default=1e-6, repr=False)

    def __post_init__(self):
        ext = tuple(float(e) for e in np.atleast_1d(self.extents))
        cnt = tuple(int(c) for c in np.atleast_1d(self.counts))
        if len(ext) != len(cnt) or not 1 <= len(ext) <= MAX_GRID_DIM:
            raise ValidationError(f"grid states support 1 to {MAX_GRID_DIM} dimensions")
        if any(e <= 0 for e in ext):
            raise ValidationError("grid extents must be positive")
        if not all(_is_pow2(c) for c in cnt):
            raise ValidationError("grid counts must be powers of two")
        vals = np.asarray(self.values, dtype=complex).reshape(cnt)
        vals.setflags(write=False)
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "counts", cnt)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "hbar", float(self.hbar))
        norm = self.norm()
        if abs(norm - 1.0) > self.norm_tol:
            raise ValidationError(f"grid state is not normalized (norm^2 = {norm:.9g})")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([2.0 * L / N for L, N in zip(self.extents, self.counts)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return _grid_axes(self.extents, self.counts)

    def points(self) -> np.ndarray:
        return _grid_points(self.extents, self.counts)

    def norm(self) -> float:
        """Discrete squared L2 norm ``sum |psi|^2 prod dx``."""
        return float(np.sum(np.abs(self.values) ** 2) * self.cell_volume)

    def boundary_ratio(self) -> float:
        """Largest amplitude on the outermost grid layer relative to the peak."""
        a = np.abs(self.values)
        peak = float(a.max())
        edge = 0.0
        for ax in range(self.dim):
            edge = max(edge, float(np.take(a, 0, axis=ax).max()), float(np.take(a, -1, axis=ax).max()))
        return edge / peak if peak > 0 else math.inf

    @classmethod
    def from_function(cls, fn, extents, counts, hbar: float = 1.0, normalize: bool = True) -> "GridState":
        """Sample ``fn`` (vectorized over an (m, n) point array) on the grid."""
        ext = tuple(np.atleast_1d(extents).astype(float))
        cnt = tuple(np.atleast_1d(counts).astype(int))
        vals = np.asarray(fn(_grid_points(ext, cnt)), dtype=complex).reshape(cnt)
        if normalize:
            cell = float(np.prod([2.0 * L / N for L, N in zip(ext, cnt)]))
            vals = vals / math.sqrt(np.sum(np.abs(vals) ** 2) * cell)
        return cls(ext, cnt, vals, hbar)

    @classmethod
    def from_gaussian(cls, state: GaussianState, extents, counts) -> "GridState":
        return cls.from_function(state, extents, counts, state.hbar, normalize=False)

    def to_dict(self) -> dict:
        raw = np.ascontiguousarray(self.values, dtype="<c16").tobytes()
        return {
            "kind": "grid",
            "dim": self.dim,
            "extents": list(self.extents),
            "counts": list(self.counts),
            "hbar": self.hbar,
            "data": base64.b64encode(raw).decode("ascii"),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GridState":
        try:
            counts = tuple(int(c) for c in doc["counts"])
            raw = base64.b64decode(doc["data"], validate=True)
            vals = np.frombuffer(raw, dtype="<c16")
            if int(doc["dim"]) != len(counts) or vals.size != int(np.prod(counts)):
                raise ValidationError("grid data size does not match header")
            return cls(tuple(doc["extents"]), counts, vals.reshape(counts).astype(complex), float(doc["hbar"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed grid state: {exc}") from None


def balanced_extent(count: int, hbar: float = 1.0) -> float:
    """Extent ``L`` for which position and momentum spacings coincide."""
    return math.sqrt(math.pi * count * hbar / 2.0)


def fourier_grid(state: GridState) -> GridState:
    """Discrete hbar-Fourier transform onto the conjugate centered grid.

    Momentum spacing is ``2 pi hbar / (N dx)``.  A boundary amplitude above
    ``1e-8`` of the peak warns; above ``1e-4`` it raises.
    """
    leak = state.boundary_ratio()
    if leak > LEAK_ERROR:
        raise GridLeakageError(f"boundary amplitude ratio {leak:.3g} exceeds {LEAK_ERROR}")
    if leak > LEAK_WARN:
        warnings.warn(f"boundary amplitude ratio {leak:.3g} exceeds {LEAK_WARN}", LeakageWarning, stacklevel=2)
    dx = state.spacing
    axes = tuple(range(state.dim))
    # fftshift/ifftshift center both grids on index N/2
    F = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(state.values, axes=axes), axes=axes), axes=axes)
    F *= np.prod(dx) / (2.0 * math.pi * state.hbar) ** (state.dim / 2.0)
    p_ext = tuple(math.pi * state.hbar / d for d in dx)
    return GridState(p_ext, state.counts, F, state.hbar, norm_tol=max(state.norm_tol, 1e-6))


@dataclass(frozen=True)
class ConcentrationResult:
    probability: float
    std_error: float = 0.0
    method: str = "exact"
    samples: int = 0

    def to_dict(self) -> dict:
        return {"probability": self.probability, "std_error": self.std_error,
                "method": self.method, "samples": self.samples}


def chi2_cdf(x: float, k: int) -> float:
    return float(gammainc(0.5 * k, 0.5 * x)) if x > 0 else 0.0


def weighted_chi2_cdf(weights, t: float, tol: float = SERIES_TOL) -> float:
    """``P(sum_j w_j Z_j^2 <= t)`` for iid standard normals ``Z_j``.

    Expands the law as a mixture of central chi-square laws with scale
    ``beta = min w``; mixture coefficients are nonnegative and sum to one,
    so the unassigned mass bounds the truncation error.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    if t <= 0:
        return 0.0
    n = w.size
    beta = float(w.min())
    g = 1.0 - beta / w
    cap = 1024
    c = np.zeros(cap)
    gsum = np.zeros(cap)
    c[0] = float(np.prod(np.sqrt(beta / w)))
    total = c[0] * chi2_cdf(t / beta, n)
    mass = c[0]
    powers = np.ones_like(g)
    k = 0
    while 1.0 - mass > tol:
        k += 1
        if k > SERIES_MAX_TERMS:
            raise NumericalError("weighted chi-square series did not converge")
        if k >= cap:
            cap *= 2
            c = np.resize(c, cap)
            gsum = np.resize(gsum, cap)
        powers = powers * g
        gsum[k] = powers.sum()
        # c_k = (1/2k) sum_{r<k} gsum[k-r] c_r
        ck = float(np.dot(gsum[k:0:-1], c[:k])) / (2.0 * k)
        c[k] = ck
        mass += ck
        total += ck * chi2_cdf(t / beta, n + 2 * k)
        if not np.any(powers):
            break
    return float(min(max(total, 0.0), 1.0))


def _gaussian_interval_box(state: GaussianState, box: Box) -> float:
    a = np.diagonal(state.form)
    return float(np.prod(erf(box.half_widths * np.sqrt(a / state.hbar))))


def _interval_half_width(body: Body) -> float:
    return float(body.support(np.array([1.0])))


def _gaussian_ellipsoid(state: GaussianState, body: Ellipsoid) -> tuple[float, str]:
    # whiten: x = sqrt(hbar/2) A^{-1/2} z, then B x.x = (hbar/2) z.K z
    A = state.form
    L = np.linalg.cholesky(A)
    Linv = np.linalg.inv(L)
    K = Linv @ body.form @ Linv.T
    lam = np.linalg.eigvalsh(0.5 * (K + K.T))
    t = 2.0 * body.hbar / state.hbar
    if lam[-1] - lam[0] <= 1e-12 * lam[-1]:
        return chi2_cdf(t / lam[0], state.dim), "exact"
    return weighted_chi2_cdf(lam, t), "series"


def _monte_carlo(state: GaussianState, body: Body, samples: int, seed) -> ConcentrationResult:
    samples = int(samples)
    if samples < 1:
        raise ValidationError("samples must be positive")
    rng = make_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        m = min(_CHUNK, samples - done)
        hits += int(np.count_nonzero(body.contains(state.sample(m, rng), tol=0.0)))
        done += m
    p = hits / samples
    return ConcentrationResult(p, math.sqrt(p * (1.0 - p) / samples), "monte_carlo", samples)


def _grid_concentration(state: GridState, body: Body, subdivisions: int | None) -> ConcentrationResult:
    n = state.dim
    s = subdivisions or (1024 if n == 1 else 48)
    dx = state.spacing
    shape = state.counts
    pts = state.points()
    rho = np.abs(state.values) ** 2
    # local quadratic model of the density from central differences; the
    # plain midpoint rule would leave an O(dx^2) error proportional to the
    # flux of grad rho through the boundary of the body
    grads = [np.gradient(rho, dx[j], axis=j) for j in range(n)]
    hess = [[np.gradient(grads[i], dx[j], axis=j) for j in range(n)] for i in range(n)]
    # cell averages of the quadratic model
    avg = rho + sum(hess[j][j] * dx[j] ** 2 / 24.0 for j in range(n))

    # corners decide full/empty cells; cells cut by the boundary (and their
    # neighbours, which may be clipped between corners) are refined
    offs = np.array(np.meshgrid(*[[-0.5, 0.5]] * n, indexing="ij")).reshape(n, -1).T * dx
    inside = np.stack([body.contains(pts + o, tol=0.0) for o in offs], axis=1)
    full = inside.all(axis=1).reshape(shape)
    cut = (inside.any(axis=1).reshape(shape) & ~full)
    mixed = binary_dilation(cut) & ~full
    total = float(np.sum(avg[full]))
    if np.any(mixed):
        sub = (np.arange(s) + 0.5) / s - 0.5
        sub_offs = np.array(np.meshgrid(*[sub] * n, indexing="ij")).reshape(n, -1).T * dx
        flat = mixed.ravel()
        centers = pts[flat]
        r0 = rho[mixed]
        g = np.stack([gr[mixed] for gr in grads], axis=1)
        H = np.stack([np.stack([h[mixed] for h in row], axis=1) for row in hess], axis=1)
        mass = np.zeros(centers.shape[0])
        for o in sub_offs:
            hit = body.contains(centers + o, tol=0.0)
            mass += hit * (r0 + g @ o + 0.5 * np.einsum("mij,i,j->m", H, o, o))
        total += float(np.sum(mass)) / sub_offs.shape[0]
    prob = total * state.cell_volume
    return ConcentrationResult(min(max(prob, 0.0), 1.0), 0.0, "grid")


def concentration(state, body: Body, samples: int = 10**6, seed=0, method: str = "auto",
                  subdivisions: int | None = None) -> ConcentrationResult:
    """Probability ``∫_X |psi|^2`` that ``state`` is found in ``body``.

    Gaussian states use a closed form whenever one exists (intervals, boxes
    aligned with a diagonal form, ellipsoids) and Monte Carlo sampling of
    ``|psi|^2`` otherwise.  Grid states use a cell-fraction Riemann sum in
    which cells cut by the boundary are refined ``subdivisions`` times per
    axis.
    """
    if state.dim != body.dim:
        raise DimensionMismatchError(f"state has dim {state.dim}, body has dim {body.dim}")
    if method not in ("auto", "exact", "monte_carlo"):
        raise ValidationError(f"unknown concentration method {method!r}")
    if isinstance(state, GridState):
        return _grid_concentration(state, body, subdivisions)
    if not isinstance(state, GaussianState):
        raise ValidationError(f"unsupported state type {type(state).__name__}")

    if method != "monte_carlo":
        if state.dim == 1:
            a = _interval_half_width(body)
            return ConcentrationResult(float(erf(a * math.sqrt(state.form[0, 0] / state.hbar))), 0.0, "exact")
        if isinstance(body, Box) and np.count_nonzero(state.form - np.diag(np.diagonal(state.form))) == 0:
            return ConcentrationResult(_gaussian_interval_box(state, body), 0.0, "exact")
        if isinstance(body, Ellipsoid):
            p, tag = _gaussian_ellipsoid(state, body)
            return ConcentrationResult(p, 0.0, tag)
        if method == "exact":
            raise ValidationError(f"no exact concentration for a Gaussian over a {body.kind}")
    return _monte_carlo(state, body, samples, seed)


def momentum_state(state):
    """Momentum-space representation: closed form for Gaussians, FFT for grids."""
    if isinstance(state, GaussianState):
        return fourier_gaussian(state)
    if isinstance(state, GridState):
        return fourier_grid(state)
    raise ValidationError(f"unsupported state type {type(state).__name__}")


def state_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise ValidationError("state document must be a JSON object")
    kind = doc.get("kind", "grid")
    if kind == "gaussian":
        try:
            return GaussianState(np.asarray(doc["form"], dtype=float), float(doc.get("hbar", 1.0)))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed gaussian state: {exc}") from None
    if kind == "grid":
        return GridState.from_dict(doc)
    raise ValidationError(f"unknown state kind {kind!r}")


__all__ = [
    "GaussianState", "GridState", "ConcentrationResult", "coherent_state", "fourier_gaussian",
    "fourier_grid", "concentration", "momentum_state", "balanced_extent", "weighted_chi2_cdf",
    "chi2_cdf", "state_from_dict", "LeakageWarning",
]
