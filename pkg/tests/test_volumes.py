import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _bodies import random_body, random_invertible, random_vpolytope
from hbarpolar._linalg import random_spd
from hbarpolar.exceptions import ValidationError
from hbarpolar.geometry import Box, Ellipsoid, HPolytope, VPolytope, apply_linear, polar_dual
from hbarpolar.volumes import (
    VolumeEstimate,
    bs_upper,
    conjecture_lower,
    delta,
    delta_stirling,
    kuperberg_lower,
    mahler_volume,
    monte_carlo_volume,
    product_estimate,
    volume,
)

SQRT_PI = math.sqrt(math.pi)


def gamma_half_plus_one(n):
    """Independent Gamma(n/2 + 1): factorials and the sqrt(pi)/2 recursion."""
    if n % 2 == 0:
        return float(math.factorial(n // 2))
    g = SQRT_PI / 2.0  # Gamma(3/2)
    k = 1.5
    while k < n / 2 + 1 - 1e-9:
        g *= k
        k += 1.0
    return g


class TestClosedForms:
    def test_bs_upper_examples(self):
        assert bs_upper(1, 1.0) == pytest.approx(4.0, rel=1e-14)
        assert bs_upper(2, 1.0) == pytest.approx(math.pi**2, rel=1e-14)
        assert bs_upper(2, 0.5) == pytest.approx(math.pi**2 / 4, rel=1e-14)

    def test_kuperberg_examples(self):
        assert kuperberg_lower(1, 1.0) == pytest.approx(math.pi / 4, rel=1e-14)
        assert kuperberg_lower(2, 1.0) == pytest.approx(math.pi**2 / 32, rel=1e-14)

    def test_conjecture_examples(self):
        assert conjecture_lower(1, 1.0) == pytest.approx(4.0, rel=1e-14)
        assert conjecture_lower(2, 1.0) == pytest.approx(8.0, rel=1e-14)

    @pytest.mark.parametrize("n", range(1, 41))
    def test_bounds_ordered_and_gamma(self, n):
        h = 0.7
        assert kuperberg_lower(n, h) <= conjecture_lower(n, h) <= bs_upper(n, h)
        assert bs_upper(n, h) == pytest.approx((math.pi * h) ** n / gamma_half_plus_one(n) ** 2, rel=1e-12)

    def test_delta_table(self):
        assert delta(1) == pytest.approx(math.sqrt(2.0 / math.pi), abs=1e-15)
        assert abs(delta(1) - 0.797885) < 1e-6
        assert delta(2) == 0.5
        assert delta(10) == pytest.approx(1.0 / 3840.0, rel=1e-14)

    @pytest.mark.parametrize("n", range(1, 30))
    def test_delta_matches_independent_gamma(self, n):
        assert delta(n) == pytest.approx(1.0 / (2 ** (n / 2) * gamma_half_plus_one(n)), rel=1e-13)

    def test_delta_decreasing_to_zero(self):
        vals = [delta(n) for n in range(1, 200)]
        assert all(a > b > 0.0 for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-150
        assert delta(2000) == 0.0  # underflows cleanly, no overflow error

    def test_delta_stirling(self):
        assert abs(delta(20) / delta_stirling(20) - 1.0) < 0.01
        assert abs(delta(50) / delta_stirling(50) - 1.0) < 0.005
        s = [delta_stirling(n) for n in range(2, 200)]
        assert all(a > b for a, b in zip(s, s[1:]))
        with pytest.raises(ValidationError):
            delta_stirling(1)

    def test_bad_dimension(self):
        with pytest.raises(ValidationError):
            delta(0)
        with pytest.raises(ValidationError):
            bs_upper(1.5)


class TestVolume:
    def test_unit_disc(self):
        v = volume(Ellipsoid.ball(2, 1.0))
        assert v.value == pytest.approx(math.pi, rel=1e-14)
        assert v.method == "exact" and v.std_error == 0.0

    @pytest.mark.parametrize("n", [1, 2, 3, 6])
    def test_ball_sqrt_hbar(self, n):
        h = 0.37
        v = volume(Ellipsoid(np.eye(n), h)).value
        assert v**2 == pytest.approx(bs_upper(n, h), rel=1e-12)

    def test_box_monte_carlo_degenerate(self):
        v = volume(Box([1.0, 1.0, 1.0]), method="monte_carlo", samples=10**6, seed=0)
        assert v.method == "monte_carlo"
        assert abs(v.value - 8.0) <= 3 * v.std_error
        assert v.degenerate

    def test_monte_carlo_ball(self):
        v = volume(Ellipsoid.ball(3, 1.0), method="monte_carlo", samples=10**6, seed=11)
        assert abs(v.value - 4.0 / 3.0 * math.pi) <= 4 * v.std_error

    def test_cross_polytope_closed_form(self):
        V = polar_dual(Box([1.0, 2.0, 0.5, 3.0, 1.0, 1.0]))
        v = volume(V)
        assert v.method == "exact"
        assert v.value == pytest.approx(2**6 / np.prod([1.0, 2.0, 0.5, 3.0, 1.0, 1.0]) / math.factorial(6))

    def test_triangulation_square(self):
        v = volume(VPolytope([[1.0, 1.0], [1.0, -1.0]]))
        assert v.method == "triangulation"
        assert v.value == pytest.approx(4.0, rel=1e-14)

    def test_triangulation_vs_monte_carlo(self, rng):
        for n in (2, 3, 4):
            P = random_vpolytope(n, rng)
            exact = volume(P)
            mc = volume(P, "monte_carlo", 4 * 10**5, seed=n)
            assert abs(exact.value - mc.value) <= 4 * mc.std_error
            H = polar_dual(P)
            exact = volume(H)
            mc = volume(H, "monte_carlo", 4 * 10**5, seed=n)
            assert abs(exact.value - mc.value) <= 4 * mc.std_error

    def test_high_dim_polytope_falls_back_to_mc(self, rng):
        P = random_vpolytope(5, rng, k=8)
        v = volume(P, samples=2 * 10**4, seed=1)
        assert v.method == "monte_carlo"
        with pytest.raises(ValidationError):
            volume(P, method="exact")

    def test_seed_required_for_mc(self):
        with pytest.raises(ValidationError):
            volume(Box([1.0]), method="monte_carlo", seed=None)
        assert volume(Box([1.0]), seed=None).value == 2.0

    def test_too_few_samples(self):
        with pytest.raises(ValidationError):
            volume(Box([1.0]), method="monte_carlo", samples=10)

    def test_workers_deterministic(self, rng):
        P = random_vpolytope(3, rng)
        a = monte_carlo_volume(P, 10**5, seed=4, workers=3)
        b = monte_carlo_volume(P, 10**5, seed=4, workers=3)
        assert a == b
        assert a.samples == 10**5

    def test_zero_hits_flagged(self):
        # a sliver: its bounding box is the unit square, the body has area ~ 4e-6
        V = VPolytope([[1.0, 1.0], [1e-6, -1e-6]])
        v = monte_carlo_volume(V, 1000, seed=0)
        assert v.value == 0.0 and v.degenerate and v.std_error > 0


def test_volume_estimate_invariant():
    with pytest.raises(ValidationError):
        VolumeEstimate(1.0, 0.1, "exact")
    with pytest.raises(ValidationError):
        VolumeEstimate(1.0, 0.0, "monte_carlo", 100)


def test_product_propagation():
    a = VolumeEstimate(2.0, 0.02, "monte_carlo", 10)
    b = VolumeEstimate(4.0, 0.0)
    p = product_estimate(a, b)
    assert p.value == 8.0 and p.std_error == pytest.approx(0.08)


class TestMahler:
    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_ball_equality(self, n):
        rep = mahler_volume(Ellipsoid(np.eye(n), 0.8), 0.8)
        assert rep.v.value == pytest.approx(bs_upper(n, 0.8), rel=1e-12)
        assert rep.within_bounds

    def test_box_equality(self):
        rep = mahler_volume(Box([0.3, 4.0]), 1.7)
        assert rep.v.value == pytest.approx((4 * 1.7) ** 2 / 2, rel=1e-12)
        assert rep.v.value == pytest.approx(rep.conjecture_lower, rel=1e-12)

    def test_ellipsoid_unit_det(self):
        rep = mahler_volume(Ellipsoid(np.diag([2.0, 0.5])), 1.0)
        assert rep.v.value == pytest.approx(math.pi**2, rel=1e-12)

    def test_report_json_fields(self):
        d = mahler_volume(Box([1.0])).to_dict()
        assert set(d) == {"v", "std_error", "method", "bs_upper", "kuperberg_lower",
                          "conjecture_lower", "within_bounds"}

    def test_monte_carlo_sandwich(self, rng):
        P = random_vpolytope(3, rng)
        rep = mahler_volume(P, 1.0, samples=2 * 10**5, seed=3, method="monte_carlo")
        assert rep.v.method == "monte_carlo" and rep.v.std_error > 0
        assert rep.within_bounds


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_mahler_linear_invariance(seed, n):
    rng = np.random.default_rng(seed)
    X = random_body(n, rng)
    M = random_invertible(n, rng)
    a = mahler_volume(X, 1.0).v
    b = mahler_volume(apply_linear(X, M), 1.0).v
    assert a.value == pytest.approx(b.value, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_ellipsoid_santalo_equality(seed, n):
    rng = np.random.default_rng(seed)
    h = float(rng.uniform(0.1, 3.0))
    rep = mahler_volume(Ellipsoid(random_spd(n, rng), h), h)
    assert rep.v.value == pytest.approx(rep.bs_upper, rel=1e-9)
