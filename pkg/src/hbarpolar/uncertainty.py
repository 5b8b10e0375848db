"""Uncertainty checks built on polar duality.

* :func:`donoho_stark_check` evaluates ``Vol(X) Vol(P) >= (2 pi hbar)^n (1 - eps - eta)^2``.
* :func:`main_theorem_trial` measures ``Pr(x in X) + Pr(p in X^hbar) - 1`` and
  compares it with ``delta(n)``.
* :func:`hardy_check` decides the ellipsoid inclusion ``X_A^hbar ⊂ P_B``.

Every statistical comparison uses a 3-sigma allowance built from the
propagated Monte Carlo errors.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._linalg import check_spd, derive_seed, make_rng, random_spd, spd_power
from .exceptions import DimensionMismatchError, ValidationError
from .geometry import Body, Box, Ellipsoid, body_to_dict, polar_dual
from .volumes import VolumeEstimate, delta, product_estimate, volume
from .waves import (
    GaussianState,
    GridState,
    balanced_extent,
    coherent_state,
    concentration,
    momentum_state,
)

N_SIGMA = 3.0
# floating slack for comparisons between exact quantities
_EXACT_SLACK = 1e-12
FAMILIES = ("ball", "box", "ellipsoid")
STATES = ("coherent", "squeezed")
# rounded value of (1 + delta(1)) / 2 quoted for the interval example; not reproducible
REFERENCE_ESTIMATE = 0.813


def _resolve_hbar(state, hbar):
    if hbar is None:
        return state.hbar
    if abs(float(hbar) - state.hbar) > 1e-12 * state.hbar:
        raise ValidationError(f"hbar={hbar} differs from the state's hbar={state.hbar}")
    return float(hbar)


@dataclass
class DSReport:
    epsilon: float
    eta: float
    epsilon_err: float
    eta_err: float
    vol_product: VolumeEstimate
    ds_bound: float
    sigma: float
    applicable: bool
    satisfied: bool | None
    n: int
    hbar: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "hbar": self.hbar,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "epsilon_err": self.epsilon_err,
            "eta_err": self.eta_err,
            "vol_product": self.vol_product.value,
            "vol_product_err": self.vol_product.std_error,
            "vol_method": self.vol_product.method,
            "ds_bound": self.ds_bound,
            "sigma": self.sigma,
            "applicable": self.applicable,
            "satisfied": self.satisfied,
        }


def donoho_stark_check(state, X: Body, P: Body | None = None, hbar: float | None = None,
                       samples: int = 10**6, seed=0) -> DSReport:
    """Evaluate the Donoho-Stark volume bound for ``state`` on ``(X, P)``.

    ``P`` defaults to the polar dual of ``X``.  ``satisfied`` is ``None``
    when the hypothesis ``eps + eta < 1`` fails.
    """
    hbar = _resolve_hbar(state, hbar)
    n = state.dim
    if P is None:
        P = polar_dual(X, hbar)
    if X.dim != n or P.dim != n:
        raise DimensionMismatchError("state and bodies must share a dimension")
    c_x = concentration(state, X, samples, derive_seed(seed, 0))
    c_p = concentration(momentum_state(state), P, samples, derive_seed(seed, 1))
    eps, eta = 1.0 - c_x.probability, 1.0 - c_p.probability
    vx = volume(X, "auto", samples, derive_seed(seed, 2))
    vp = volume(P, "auto", samples, derive_seed(seed, 3))
    vprod = product_estimate(vx, vp)
    gap = 1.0 - eps - eta
    scale = (2.0 * math.pi * hbar) ** n
    bound = scale * gap**2
    bound_err = scale * 2.0 * abs(gap) * math.hypot(c_x.std_error, c_p.std_error)
    sigma = math.hypot(vprod.std_error, bound_err)
    applicable = eps + eta < 1.0
    satisfied = None
    if applicable:
        satisfied = bool(vprod.value >= bound * (1.0 - _EXACT_SLACK) - N_SIGMA * sigma)
    return DSReport(eps, eta, c_x.std_error, c_p.std_error, vprod, bound, sigma,
                    bool(applicable), satisfied, n, hbar)


@dataclass
class TheoremReport:
    n: int
    P1: float
    P2: float
    P1_err: float
    P2_err: float
    Delta: float
    sigma: float
    delta_n: float
    upper_ok: bool
    lower_ok: bool
    body: dict = field(default_factory=dict)
    family: str = ""
    scale: float = float("nan")
    state: str = ""
    methods: tuple = ("", "")
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "family": self.family,
            "scale": self.scale,
            "state": self.state,
            "body": self.body,
            "P1": self.P1,
            "P1_err": self.P1_err,
            "P2": self.P2,
            "P2_err": self.P2_err,
            "Delta": self.Delta,
            "sigma": self.sigma,
            "delta_n": self.delta_n,
            "upper_ok": self.upper_ok,
            "lower_ok": self.lower_ok,
            "methods": list(self.methods),
            "error": self.error,
        }


CSV_COLUMNS = ("n", "family", "scale", "P1", "P2", "Delta", "delta_n", "upper_ok", "lower_ok")


def main_theorem_trial(state, X: Body, hbar: float | None = None, samples: int = 10**6,
                       seed=0) -> TheoremReport:
    """One trial of ``Pr(x in X) + Pr(p in X^hbar) = 1 + Delta`` with ``Delta <= delta(n)``.

    ``lower_ok`` records whether ``Delta >= 0`` holds empirically; it is a
    finding, not a failure.
    """
    hbar = _resolve_hbar(state, hbar)
    n = state.dim
    if X.dim != n:
        raise DimensionMismatchError(f"state has dim {n}, body has dim {X.dim}")
    c1 = concentration(state, X, samples, derive_seed(seed, 0))
    c2 = concentration(momentum_state(state), polar_dual(X, hbar), samples, derive_seed(seed, 1))
    d = c1.probability + c2.probability - 1.0
    sigma = math.hypot(c1.std_error, c2.std_error)
    dn = delta(n)
    return TheoremReport(
        n=n,
        P1=c1.probability,
        P2=c2.probability,
        P1_err=c1.std_error,
        P2_err=c2.std_error,
        Delta=d,
        sigma=sigma,
        delta_n=dn,
        upper_ok=bool(d <= dn + N_SIGMA * sigma + _EXACT_SLACK),
        lower_ok=bool(d >= -N_SIGMA * sigma - _EXACT_SLACK),
        body=body_to_dict(X, hbar),
        methods=(c1.method, c2.method),
    )


@dataclass
class SweepConfig:
    dims: tuple = (1, 2, 3)
    families: tuple = FAMILIES
    scales: tuple = (0.5, 1.0, 2.0)
    states: tuple = ("coherent",)
    samples: int = 10**6
    seed: int = 0
    hbar: float = 1.0
    workers: int = 1

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.families = tuple(self.families)
        self.scales = tuple(float(s) for s in self.scales)
        self.states = tuple(self.states)
        if any(d < 1 for d in self.dims):
            raise ValidationError("dims must be positive")
        bad = set(self.families) - set(FAMILIES)
        if bad:
            raise ValidationError(f"unknown body families {sorted(bad)}")
        bad = set(self.states) - set(STATES)
        if bad:
            raise ValidationError(f"unknown states {sorted(bad)}")
        if any(s <= 0 for s in self.scales):
            raise ValidationError("scales must be positive")


def make_state(name: str, n: int, hbar: float = 1.0) -> GaussianState:
    if name == "coherent":
        return coherent_state(n, hbar)
    if name == "squeezed":
        # alternating squeeze factors 4 and 1/4
        return GaussianState(np.diag([4.0 if j % 2 == 0 else 0.25 for j in range(n)]), hbar)
    raise ValidationError(f"unknown state {name!r}")


def make_body(family: str, n: int, scale: float, hbar: float = 1.0, rng=None) -> Body:
    """Sweep bodies: radius ``scale sqrt(hbar)`` ball/cube, or a rotated ellipsoid."""
    r = scale * math.sqrt(hbar)
    if family == "ball":
        return Ellipsoid.ball(n, r, hbar)
    if family == "box":
        return Box(np.full(n, r))
    if family == "ellipsoid":
        rng = rng if rng is not None else np.random.default_rng(0)
        radii = r * rng.uniform(0.5, 2.0, size=n)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = (Q * (hbar / radii**2)) @ Q.T
        return Ellipsoid(0.5 * (A + A.T), hbar)
    raise ValidationError(f"unknown body family {family!r}")


def _sweep_trials(config: SweepConfig):
    idx = 0
    for n in config.dims:
        for state in config.states:
            for family in config.families:
                for k, t in enumerate(config.scales):
                    yield idx, n, state, family, k, t
                    idx += 1


def _run_trial(config: SweepConfig, spec) -> TheoremReport:
    idx, n, state_name, family, k, t = spec
    try:
        rng = make_rng((config.seed, 1_000_003, n, k))
        X = make_body(family, n, t, config.hbar, rng)
        rep = main_theorem_trial(make_state(state_name, n, config.hbar), X, config.hbar,
                                 config.samples, (config.seed, idx))
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        nan = float("nan")
        rep = TheoremReport(n, nan, nan, nan, nan, nan, nan, delta(n), False, False,
                            error=f"{type(exc).__name__}: {exc}")
    rep.family, rep.scale, rep.state = family, t, state_name
    return rep


def theorem_sweep(config: SweepConfig | dict) -> list[TheoremReport]:
    """Run :func:`main_theorem_trial` over dims x states x families x scales.

    Trials are seeded from ``(seed, trial_index)`` and returned in
    enumeration order regardless of ``workers``.  Per-trial failures are
    recorded in the report's ``error`` field.
    """
    if isinstance(config, dict):
        config = SweepConfig(**config)
    specs = list(_sweep_trials(config))
    if config.workers > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(lambda s: _run_trial(config, s), specs))
    return [_run_trial(config, s) for s in specs]


def summarize_sweep(reports) -> dict:
    """Per-dimension trial counts, violations and the largest observed Delta."""
    out: dict = {}
    for r in reports:
        agg = out.setdefault(r.n, {"n": r.n, "trials": 0, "errors": 0, "upper_violations": 0,
                                   "lower_findings": 0, "max_Delta": -math.inf, "delta_n": r.delta_n})
        agg["trials"] += 1
        if r.error is not None:
            agg["errors"] += 1
            continue
        if r.Delta >= 0 and not r.upper_ok:
            agg["upper_violations"] += 1
        if not r.lower_ok:
            agg["lower_findings"] += 1
        agg["max_Delta"] = max(agg["max_Delta"], r.Delta)
    return {n: out[n] for n in sorted(out)}


@dataclass
class HardyReport:
    A: np.ndarray
    B: np.ndarray
    lambda_max: float
    included: bool
    equality: bool
    hbar: float = 1.0

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "hbar": self.hbar,
                "lambda_max": self.lambda_max, "included": self.included, "equality": self.equality}


def hardy_check(A, B, hbar: float = 1.0) -> HardyReport:
    """Decide ``{A^-1 p.p <= hbar} ⊂ {B p.p <= hbar}``, i.e. ``B <= A^-1``."""
    A = check_spd(A, "A")
    B = check_spd(B, "B")
    if A.shape != B.shape:
        raise DimensionMismatchError("A and B must have the same shape")
    if not hbar > 0:
        raise ValidationError("hbar must be positive")
    R = spd_power(A, 0.5)
    K = R @ B @ R
    lam = float(np.linalg.eigvalsh(0.5 * (K + K.T))[-1])
    included = lam <= 1.0 + 1e-10
    equality = bool(np.max(np.abs(A @ B - np.eye(A.shape[0]))) <= 1e-9)
    return HardyReport(A, B, lam, bool(included or equality), equality, float(hbar))


def coherent_interval_example(hbar: float = 1.0, grid_count: int = 1 << 16) -> dict:
    """The one-dimensional coherent state on ``[-sqrt(hbar), sqrt(hbar)]``.

    The interval is its own polar dual and ``phi_0`` is its own transform, so
    both probabilities equal ``erf(1)``.  The grid columns repeat the
    computation through a sampled state and the discrete transform.
    """
    phi = coherent_state(1, hbar)
    X = Box([math.sqrt(hbar)])
    rep = main_theorem_trial(phi, X, hbar)
    L = balanced_extent(grid_count, hbar)
    g = GridState.from_gaussian(phi, [L], [grid_count])
    P = polar_dual(X, hbar)
    g1 = concentration(g, X).probability
    g2 = concentration(momentum_state(g), P).probability
    half = 0.5 * (1.0 + delta(1))
    return {
        "P1": rep.P1,
        "P2": rep.P2,
        "erf1": math.erf(1.0),
        "grid_P1": g1,
        "grid_P2": g2,
        "Delta": rep.Delta,
        "delta_1": delta(1),
        "half_one_plus_delta": half,
        "reference_estimate": REFERENCE_ESTIMATE,
        "reference_estimate_reproduced": abs(half - REFERENCE_ESTIMATE) < 5e-4,
    }


def random_ds_triple(n: int, rng: np.random.Generator, hbar: float = 1.0):
    """Random (Gaussian state, ellipsoid X, ellipsoid P) for Donoho-Stark sweeps."""
    state = GaussianState(random_spd(n, rng, 1.0), hbar)
    X = Ellipsoid(random_spd(n, rng, 1.0) / rng.uniform(0.5, 2.0), hbar)
    P = Ellipsoid(random_spd(n, rng, 1.0) / rng.uniform(0.5, 2.0), hbar)
    return state, X, P
