"""Volumes, the Mahler volume and its classical bounds.

Exact volumes are available for ellipsoids, boxes, axis cross-polytopes and
(for dimension at most 4) general polytopes through an origin-fan
triangulation.  Everything else is estimated by rejection sampling in the
axis-aligned bounding box.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import ConvexHull

from ._linalg import derive_seed, make_rng
from .exceptions import ValidationError
from .geometry import (
    EXACT_MAX_DIM,
    Body,
    Box,
    Ellipsoid,
    HPolytope,
    VPolytope,
    polar_dual,
)

METHODS = ("exact", "triangulation", "monte_carlo")
MIN_MC_SAMPLES = 1000
_CHUNK = 1 << 17
# floating slack when comparing exact values against closed-form bounds
_BOUND_RTOL = 1e-12


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    std_error: float = 0.0
    method: str = "exact"
    samples: int = 0
    degenerate: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown volume method {self.method!r}")
        if self.value < 0.0:
            raise ValidationError("volume must be nonnegative")
        if (self.std_error == 0.0) == (self.method == "monte_carlo"):
            raise ValidationError("std_error must be positive exactly for Monte Carlo estimates")

    @property
    def rel_error(self) -> float:
        return self.std_error / self.value if self.value > 0 else math.inf

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MahlerReport:
    v: VolumeEstimate
    bs_upper: float
    kuperberg_lower: float
    conjecture_lower: float
    within_bounds: bool
    n: int = 0
    hbar: float = 1.0

    def to_dict(self) -> dict:
        return {
            "v": self.v.value,
            "std_error": self.v.std_error,
            "method": self.v.method,
            "bs_upper": self.bs_upper,
            "kuperberg_lower": self.kuperberg_lower,
            "conjecture_lower": self.conjecture_lower,
            "within_bounds": self.within_bounds,
        }


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise ValidationError(f"dimension must be a positive integer, got {n}")
    return int(n)


def _gamma_half_plus_one(n: int) -> float:
    return math.gamma(0.5 * n + 1.0)


def ball_volume(n: int, radius: float = 1.0) -> float:
    n = _check_n(n)
    return math.exp(0.5 * n * math.log(math.pi) + n * math.log(radius) - math.lgamma(0.5 * n + 1.0))


def bs_upper(n: int, hbar: float = 1.0) -> float:
    """Santalo upper bound ``(pi hbar)^n / Gamma(n/2 + 1)^2``."""
    n = _check_n(n)
    return math.exp(n * math.log(math.pi * hbar) - 2.0 * math.lgamma(0.5 * n + 1.0))


def kuperberg_lower(n: int, hbar: float = 1.0) -> float:
    """Proven lower bound ``(pi hbar)^n / (4^n n!)``."""
    n = _check_n(n)
    return math.exp(n * math.log(math.pi * hbar / 4.0) - math.lgamma(n + 1.0))


def conjecture_lower(n: int, hbar: float = 1.0) -> float:
    """Conjectured lower bound ``(4 hbar)^n / n!`` (attained by boxes)."""
    n = _check_n(n)
    return math.exp(n * math.log(4.0 * hbar) - math.lgamma(n + 1.0))


def delta(n: int) -> float:
    """Dimension error term ``1 / (2^{n/2} Gamma(n/2 + 1))``."""
    n = _check_n(n)
    if n <= 300:
        return 1.0 / (2.0 ** (0.5 * n) * _gamma_half_plus_one(n))
    return math.exp(-0.5 * n * math.log(2.0) - math.lgamma(0.5 * n + 1.0))


def delta_stirling(n: int) -> float:
    """Stirling asymptotic of :func:`delta`, ``1/(2^{n/2} sqrt(pi n) (n/2e)^{n/2})``."""
    n = _check_n(n)
    if n < 2:
        raise ValidationError("the Stirling form is defined for n >= 2")
    log_val = 0.5 * n * math.log(2.0) + 0.5 * math.log(math.pi * n) + 0.5 * n * math.log(n / (2.0 * math.e))
    return math.exp(-log_val)


def _fan_volume(points: np.ndarray) -> float:
    """Volume of ``conv(points)`` (origin interior) by coning facets to 0."""
    n = points.shape[1]
    if n == 1:
        return float(np.max(points) - np.min(points))
    hull = ConvexHull(points)
    simplices = points[hull.simplices]
    dets = np.abs(np.linalg.det(simplices))
    return float(dets.sum() / math.factorial(n))


def _exact_volume(body: Body) -> VolumeEstimate | None:
    if isinstance(body, Ellipsoid):
        return VolumeEstimate(body.volume(), method="exact")
    if isinstance(body, Box):
        return VolumeEstimate(body.volume(), method="exact")
    if isinstance(body, VPolytope):
        b = body.axis_cross_half_widths()
        if b is not None:
            n = body.dim
            logv = n * math.log(2.0) + float(np.sum(np.log(b))) - math.lgamma(n + 1.0)
            return VolumeEstimate(math.exp(logv), method="exact")
        if body.dim <= EXACT_MAX_DIM:
            return VolumeEstimate(_fan_volume(body.vertices), method="triangulation")
    if isinstance(body, HPolytope) and body.dim <= EXACT_MAX_DIM:
        return VolumeEstimate(_fan_volume(body.vertices), method="triangulation")
    return None


def _count_hits(body: Body, half_widths: np.ndarray, samples: int, seed) -> int:
    rng = make_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        m = min(_CHUNK, samples - done)
        pts = rng.uniform(-1.0, 1.0, size=(m, body.dim)) * half_widths
        hits += int(np.count_nonzero(body.contains(pts, tol=0.0)))
        done += m
    return hits


def monte_carlo_volume(body: Body, samples: int = 10**6, seed=0, workers: int = 1) -> VolumeEstimate:
    """Rejection-sampling estimate in the axis-aligned support box.

    Samples are split across ``workers`` shards seeded with
    ``(seed..., worker_index)`` so the result is reproducible for a fixed
    ``(seed, workers)`` pair.
    """
    samples = int(samples)
    if samples < MIN_MC_SAMPLES:
        raise ValidationError(f"Monte Carlo needs at least {MIN_MC_SAMPLES} samples")
    workers = max(1, int(workers))
    make_rng(seed)  # fail fast without a seed
    half = body.bounding_half_widths()
    box_volume = float(np.prod(2.0 * half))
    shares = [samples // workers + (1 if i < samples % workers else 0) for i in range(workers)]
    keys = [derive_seed(seed, i) for i in range(workers)]
    if workers == 1:
        hits = [_count_hits(body, half, shares[0], keys[0])]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = list(pool.map(lambda a: _count_hits(body, half, *a), zip(shares, keys)))
    total = sum(hits)
    p = total / samples
    degenerate = total in (0, samples)
    if degenerate:
        # the binomial error bar collapses at p = 0 or 1; use the add-two estimate instead
        p_err = (total + 1.0) / (samples + 2.0)
    else:
        p_err = p
    err = box_volume * math.sqrt(p_err * (1.0 - p_err) / samples)
    return VolumeEstimate(box_volume * p, err, "monte_carlo", samples, degenerate=degenerate)


def volume(body: Body, method: str = "auto", samples: int = 10**6, seed=0, workers: int = 1) -> VolumeEstimate:
    """Lebesgue volume of a body.

    ``method="auto"`` uses a closed form or triangulation when available and
    Monte Carlo otherwise; ``"exact"`` raises if no exact path exists.
    """
    if method not in ("auto", "exact", "monte_carlo"):
        raise ValidationError(f"unknown volume method {method!r}")
    if method != "monte_carlo":
        est = _exact_volume(body)
        if est is not None:
            return est
        if method == "exact":
            raise ValidationError(f"no exact volume for {body.kind} in dimension {body.dim}")
    return monte_carlo_volume(body, samples, seed, workers)


def product_estimate(a: VolumeEstimate, b: VolumeEstimate) -> VolumeEstimate:
    """Product of two estimates; relative errors add in quadrature."""
    value = a.value * b.value
    if a.std_error == 0.0 and b.std_error == 0.0:
        method = "exact" if a.method == b.method == "exact" else "triangulation"
        return VolumeEstimate(value, 0.0, method, 0)
    if value == 0.0:
        err = a.std_error * b.value + b.std_error * a.value
    else:
        err = value * math.hypot(a.std_error / a.value if a.value else 0.0, b.std_error / b.value if b.value else 0.0)
    return VolumeEstimate(
        value, err, "monte_carlo", a.samples + b.samples, degenerate=a.degenerate or b.degenerate
    )


def mahler_volume(body: Body, hbar: float | None = None, samples: int = 10**6, seed=0,
                  method: str = "auto", workers: int = 1) -> MahlerReport:
    """``Vol(X) Vol(X^hbar)`` together with the three classical bounds."""
    if hbar is None:
        hbar = body.hbar if isinstance(body, Ellipsoid) else 1.0
    n = body.dim
    vx = volume(body, method, samples, derive_seed(seed, 0), workers)
    vp = volume(polar_dual(body, hbar), method, samples, derive_seed(seed, 1), workers)
    v = product_estimate(vx, vp)
    up, kl, cl = bs_upper(n, hbar), kuperberg_lower(n, hbar), conjecture_lower(n, hbar)
    slack = 3.0 * v.std_error
    within = (kl * (1 - _BOUND_RTOL) - slack <= v.value <= up * (1 + _BOUND_RTOL) + slack)
    return MahlerReport(v, up, kl, cl, bool(within), n, float(hbar))
