import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _bodies import directions, random_body, random_invertible
from hbarpolar.exceptions import (
    DimensionMismatchError,
    InvalidBodyError,
    UnboundedBodyError,
    ValidationError,
)
from hbarpolar.geometry import (
    Box,
    Ellipsoid,
    HPolytope,
    VPolytope,
    apply_linear,
    body_from_dict,
    body_to_dict,
    contains,
    is_subset,
    polar_dual,
    sample_boundary,
    scale,
    support,
)


class TestPolarDual:
    def test_ball_is_self_dual(self):
        for n in (1, 2, 5):
            for h in (1.0, 0.3, 7.0):
                dual = polar_dual(Ellipsoid(np.eye(n), h), h)
                assert isinstance(dual, Ellipsoid)
                assert np.array_equal(dual.form, np.eye(n))

    def test_ball_radius_inverts(self):
        dual = polar_dual(Ellipsoid.ball(3, 2.0, 1.0), 1.0)
        assert support(dual, [1.0, 0, 0]) == pytest.approx(0.5)

    def test_ellipsoid_inverse_form(self):
        dual = polar_dual(Ellipsoid(np.diag([4.0, 1.0]), 1.0), 1.0)
        np.testing.assert_allclose(dual.form, np.diag([0.25, 1.0]), atol=1e-15)

    def test_ellipsoid_other_hbar(self):
        X = Ellipsoid(np.diag([4.0, 1.0]), 1.0)
        dual = polar_dual(X, 2.0)
        for u in directions(2, np.random.default_rng(0), 16):
            # p in dual iff p.x <= 2 on X, i.e. support = 2 * gauge
            assert support(dual, u) == pytest.approx(2.0 * X.gauge(u)[0], rel=1e-12)

    def test_box_gives_cross_polytope(self):
        dual = polar_dual(Box([1.0, 1.0]), 1.0)
        assert isinstance(dual, VPolytope)
        got = {tuple(np.round(v, 12) + 0.0) for v in dual.vertices}
        assert got == {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)}

    def test_box_dual_brute_force(self, rng):
        # oracle: maximize p.x over a dense grid of the box
        g = np.linspace(-1.0, 1.0, 41)
        X = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        dual = polar_dual(Box([1.0, 1.0]), 1.0)
        P = rng.uniform(-1.5, 1.5, size=(2000, 2))
        sup = np.max(P @ X.T, axis=1)
        l1 = np.abs(P).sum(axis=1)
        keep = np.abs(l1 - 1.0) > 1e-3
        np.testing.assert_array_equal((sup <= 1.0)[keep], contains(dual, P[keep]))
        np.testing.assert_allclose(sup, l1, atol=1e-12)

    def test_vpolytope_to_hpolytope(self):
        V = np.array([[1.0, 2.0], [-1.0, 0.5]])
        dual = polar_dual(VPolytope(V), 3.0)
        assert isinstance(dual, HPolytope)
        assert np.all(dual.offsets == 3.0)
        assert dual.normals.shape == (4, 2)

    def test_hpolytope_to_vpolytope(self):
        H = HPolytope([[2.0, 0.0], [0.0, 1.0]], [1.0, 4.0])
        dual = polar_dual(H, 1.0)
        np.testing.assert_allclose(np.sort(np.abs(dual.vertices[:, 0])), [0, 0, 2, 2], atol=0)
        assert support(dual, [0.0, 1.0]) == pytest.approx(0.25)

    def test_invalid_hbar(self):
        with pytest.raises(ValidationError):
            polar_dual(Box([1.0]), -1.0)

    def test_unbounded_hpolytope(self):
        with pytest.raises(UnboundedBodyError):
            HPolytope([[1.0, 0.0]], [1.0])

    def test_non_spd_ellipsoid(self):
        with pytest.raises(InvalidBodyError):
            Ellipsoid(np.diag([1.0, -1.0]))
        with pytest.raises(InvalidBodyError):
            Ellipsoid([[1.0, 0.5], [0.0, 1.0]])

    def test_asymmetric_vertices(self):
        with pytest.raises(InvalidBodyError):
            VPolytope([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], symmetrize=False)
        P = VPolytope([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        assert P.symmetrized
        assert P.vertices.shape == (4, 2)

    def test_degenerate_vertices(self):
        with pytest.raises(InvalidBodyError):
            VPolytope([[1.0, 1.0], [2.0, 2.0]])


class TestContains:
    def test_center_of_ball(self):
        assert contains(Ellipsoid.ball(2, 1.0), [0.0, 0.0])

    def test_box_boundary_tolerance(self):
        B = Box([1.0, 2.0])
        assert contains(B, [1.0001, 0.0], tol=1e-3)
        assert not contains(B, [1.0001, 0.0], tol=1e-6)

    def test_cross_polytope(self):
        C = polar_dual(Box([1.0, 1.0]))
        assert not contains(C, [0.5, 0.6])
        assert contains(C, [0.5, 0.4])

    def test_vectorized(self):
        out = contains(Box([1.0]), [[0.5], [2.0]])
        assert out.tolist() == [True, False]

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            contains(Box([1.0, 1.0]), [0.0, 0.0, 0.0])


class TestApplyLinear:
    def test_identity(self):
        out = apply_linear(Ellipsoid.ball(2, 1.0), np.eye(2))
        np.testing.assert_allclose(out.form, np.eye(2))

    def test_stretch(self):
        out = apply_linear(Ellipsoid.ball(2, 1.0), np.diag([2.0, 1.0]))
        np.testing.assert_allclose(out.form, np.diag([0.25, 1.0]), atol=1e-15)

    def test_box_rotation_becomes_vpolytope(self):
        c, s = math.cos(0.3), math.sin(0.3)
        out = apply_linear(Box([1.0, 2.0]), [[c, -s], [s, c]])
        assert isinstance(out, VPolytope)
        assert out.vertices.shape == (4, 2)

    def test_singular(self):
        with pytest.raises(ValidationError):
            apply_linear(Box([1.0, 1.0]), [[1.0, 2.0], [2.0, 4.0]])

    def test_covariance_example(self, rng):
        X = Box([1.0, 0.5])
        M = np.array([[2.0, 1.0], [0.0, 1.0]])
        lhs = polar_dual(apply_linear(X, M))
        rhs = apply_linear(polar_dual(X), np.linalg.inv(M).T)
        U = directions(2, rng)
        np.testing.assert_allclose(lhs.support(U), rhs.support(U), atol=1e-9)


class TestSupport:
    def test_ball(self, rng):
        for u in directions(4, rng, 8):
            assert support(Ellipsoid.ball(4, 1.7), u) == pytest.approx(1.7)

    def test_box_corner(self):
        assert support(Box([1.0, 2.0]), [1.0, 1.0]) == 3.0

    def test_cross_polytope(self):
        assert support(VPolytope([[1.0, 0.0], [0.0, 1.0]]), [1.0, 1.0]) == 1.0

    def test_hpolytope_lp_path_matches_vertices(self, rng):
        # dimension 5 uses the LP; compare with the dual V-polytope's gauge
        n = 5
        H = HPolytope(rng.standard_normal((8, n)), rng.uniform(0.5, 1.5, 8))
        V = polar_dual(H, 1.0)
        for u in directions(n, rng, 5):
            assert support(H, u) == pytest.approx(V.gauge(u)[0], abs=1e-8)

    def test_zero_direction(self):
        with pytest.raises(ValidationError):
            support(Box([1.0]), [0.0])


class TestSubset:
    def test_concentric_balls(self):
        assert is_subset(Ellipsoid.ball(2, 1.0), Ellipsoid.ball(2, 2.0))
        assert not is_subset(Ellipsoid.ball(2, 2.0), Ellipsoid.ball(2, 1.0))

    def test_anti_monotone_balls(self):
        X, Y = Ellipsoid.ball(2, 1.0), Ellipsoid.ball(2, 2.0)
        assert is_subset(polar_dual(Y), polar_dual(X))

    def test_thin_ellipsoid(self):
        assert is_subset(Ellipsoid(np.diag([1.0, 4.0])), Ellipsoid(np.eye(2)))

    def test_mixed_representations(self):
        B = Box([1.0, 1.0])
        assert is_subset(Ellipsoid.ball(2, 1.0), B)
        assert not is_subset(Ellipsoid.ball(2, 1.01), B)
        assert is_subset(B, Ellipsoid.ball(2, math.sqrt(2) + 1e-12))
        assert not is_subset(B, Ellipsoid.ball(2, 1.4))
        C = polar_dual(B)
        assert is_subset(C, B) and not is_subset(B, C)
        assert is_subset(polar_dual(C), B) and is_subset(B, polar_dual(C))

    def test_sampled_mode(self):
        assert is_subset(Ellipsoid.ball(3, 1.0), Box([1.0, 1.0, 1.0]), mode="sampled", n_dirs=200)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            is_subset(Box([1.0]), Box([1.0, 1.0]))


class TestSampleBoundary:
    def test_interval(self):
        pts = sample_boundary(Ellipsoid.ball(1, 1.0), 2, seed=3)
        assert set(np.round(pts.ravel(), 12)) <= {-1.0, 1.0}

    def test_box(self):
        pts = sample_boundary(Box([1.0, 1.0]), 100, seed=1)
        np.testing.assert_allclose(np.max(np.abs(pts), axis=1), 1.0, atol=1e-9)

    def test_ellipsoid(self, rng):
        from hbarpolar._linalg import random_spd
        A = random_spd(3, rng)
        X = Ellipsoid(A, 0.7)
        pts = sample_boundary(X, 100, seed=2)
        np.testing.assert_allclose(np.einsum("ij,jk,ik->i", pts, A, pts), 0.7, atol=1e-9)

    def test_polytopes(self, rng):
        for body in (random_body(3, rng, ("vpolytope",)), random_body(3, rng, ("hpolytope",))):
            pts = sample_boundary(body, 50, seed=0)
            np.testing.assert_allclose(body.gauge(pts), 1.0, atol=1e-9)

    def test_deterministic(self):
        a = sample_boundary(Box([1.0, 2.0]), 10, seed=5)
        b = sample_boundary(Box([1.0, 2.0]), 10, seed=5)
        assert np.array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_reflexivity(seed, n):
    rng = np.random.default_rng(seed)
    X = random_body(n, rng)
    h = float(rng.uniform(0.2, 3.0))
    U = directions(n, rng)
    np.testing.assert_allclose(polar_dual(polar_dual(X, h), h).support(U), X.support(U), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_linear_covariance(seed, n):
    rng = np.random.default_rng(seed)
    X = random_body(n, rng)
    M = random_invertible(n, rng)
    U = directions(n, rng)
    lhs = polar_dual(apply_linear(X, M))
    rhs = apply_linear(polar_dual(X), np.linalg.inv(M).T)
    np.testing.assert_allclose(lhs.support(U), rhs.support(U), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.1, 10.0))
def test_inverse_scaling(seed, lam):
    rng = np.random.default_rng(seed)
    X = random_body(3, rng)
    U = directions(3, rng)
    np.testing.assert_allclose(
        polar_dual(scale(X, lam)).support(U), polar_dual(X).support(U) / lam, rtol=1e-10, atol=1e-12
    )


def test_json_round_trip(rng):
    for kind in ("ellipsoid", "box", "vpolytope", "hpolytope"):
        X = random_body(3, rng, (kind,))
        doc = json.loads(json.dumps(body_to_dict(X)))
        Y = body_from_dict(doc)
        U = directions(3, rng, 8)
        np.testing.assert_allclose(X.support(U), Y.support(U), rtol=1e-14)


@pytest.mark.parametrize("doc", [
    {"kind": "box", "dim": 2, "data": [1.0]},
    {"kind": "blob", "dim": 1, "data": [1.0]},
    {"kind": "ellipsoid", "dim": 2, "data": [[1, 0], [0, -1]]},
    {"kind": "hpolytope", "dim": 2, "data": {"normals": [[1, 0]]}},
    {"dim": 1, "data": [1.0]},
])
def test_json_rejects_malformed(doc):
    with pytest.raises(InvalidBodyError):
        body_from_dict(doc)
