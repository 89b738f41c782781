import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SIG11, SIG21, cusp_curve_descriptor, hyperbola_descriptor
from pseudoskel.errors import (
    BoundaryParameterError,
    EmptyDomainError,
    NonFiniteValueError,
    PointListHasNoTangentError,
)
from pseudoskel.sets import (
    Curve,
    Graph,
    PointList,
    SetDescriptor,
    check_acausal,
    estimate_pseudo_lipschitz,
    sample,
    tangent_directions,
)


def brute_lipschitz(points, l):
    """Independent all-pairs loop for the pseudo-Lipschitz ratio."""
    best = 0.0
    pts = np.asarray(points, dtype=float)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = pts[i] - pts[j]
            dl = np.linalg.norm(d[:l])
            dp = np.linalg.norm(d[l:])
            if dl == 0.0 and dp > 0.0:
                return float("inf")
            if dl > 0.0:
                best = max(best, dp / dl)
    return best


class TestSample:
    def test_endpoint_and_midpoint_sampling(self):
        desc = hyperbola_descriptor(samples=3, span=1.0)
        got = sample(desc).points
        want = np.array([[-1.0, np.sqrt(2.0)], [0.0, 1.0], [1.0, np.sqrt(2.0)]])
        assert np.allclose(got, want)

    def test_identity_on_point_lists(self):
        desc = SetDescriptor(SIG11, (PointList([[-1.0, 0.0], [1.0, 0.0]]),))
        got = sample(desc).points
        assert np.array_equal(got, [[-1.0, 0.0], [1.0, 0.0]])

    def test_graph_direct_evaluation(self):
        desc = SetDescriptor(
            SIG11,
            (Graph(func=lambda x: x / 2.0, domain=((0.0, 1.0),), resolution=(2,)),),
        )
        got = sample(desc).points
        assert np.allclose(got, [[0.0, 0.0], [1.0, 0.5]])

    def test_empty_domain_rejected(self):
        with pytest.raises(EmptyDomainError):
            Curve(func=lambda t: np.stack([t, t], axis=-1), domain=(1.0, -1.0), samples=5)

    def test_non_finite_values_rejected(self):
        desc = SetDescriptor(
            SIG11,
            (Curve(func=lambda t: np.stack([t, 1.0 / t], axis=-1), domain=(-1.0, 1.0), samples=3),),
        )
        with pytest.raises(NonFiniteValueError):
            sample(desc)

    def test_nested_grids(self):
        coarse = sample(hyperbola_descriptor(samples=11)).points
        fine = sample(hyperbola_descriptor(samples=21)).points
        for row in coarse:
            assert np.min(np.linalg.norm(fine - row, axis=1)) < 1e-12


class TestCheckAcausal:
    def test_vertical_segment_witness(self):
        pts = np.array([[0.0, 0.0], [0.0, 1.0]])
        report = check_acausal(pts, SIG11)
        assert not report.acausal
        assert report.witness[:2] == (0, 1)
        assert report.witness[2] == -1.0

    def test_space_like_pair_is_acausal(self):
        report = check_acausal(np.array([[-1.0, 0.0], [1.0, 0.0]]), SIG11)
        assert report.acausal and report.witness is None

    def test_singleton_is_vacuously_acausal(self):
        assert check_acausal(np.array([[5.0, 5.0]]), SIG11).acausal

    def test_duplicate_points_do_not_witness(self):
        report = check_acausal(np.array([[1.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), SIG11)
        assert report.acausal

    def test_full_scan_counts_violations(self):
        pts = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]])
        report = check_acausal(pts, SIG11, early_exit=False)
        assert not report.acausal
        assert report.violations == 3


class TestPseudoLipschitz:
    def test_single_pair_ratio_zero(self):
        est = estimate_pseudo_lipschitz(np.array([[-1.0, 0.0], [1.0, 0.0]]), SIG11)
        assert est.l_hat == 0.0

    def test_half_slope_pair(self):
        est = estimate_pseudo_lipschitz(np.array([[0.0, 0.0], [1.0, 0.5]]), SIG11)
        assert est.l_hat == 0.5

    def test_sharpness_curve_is_one_pseudo_lipschitz(self):
        # ||x-y||_p = |t-s| while ||x-y||_l >= |t-s|, so every ratio is <= 1;
        # symmetric parameter pairs have equal heights and reach 1 exactly
        est = estimate_pseudo_lipschitz(sample(cusp_curve_descriptor(samples=201, span=5.0)), SIG21)
        assert est.l_hat == pytest.approx(1.0, abs=1e-12)
        assert est.l_hat <= 1.0 + 1e-12

    def test_sharpness_curve_ratio_grows_toward_one(self):
        # on asymmetric domains the heights never match, so the ratio stays
        # below 1 and climbs toward it as the range grows
        def curve(span):
            def f(t):
                t = np.asarray(t, dtype=float)
                return np.stack([t, t * t / (1.0 + t * t), t], axis=-1)
            return SetDescriptor(SIG21, (Curve(func=f, domain=(1.0, span), samples=201),))

        est_narrow = estimate_pseudo_lipschitz(sample(curve(3.0)), SIG21)
        est_wide = estimate_pseudo_lipschitz(sample(curve(60.0)), SIG21)
        assert est_narrow.l_hat < 1.0
        assert est_wide.l_hat < 1.0
        assert est_wide.l_hat > est_narrow.l_hat
        assert est_wide.l_hat > 0.999

    def test_non_injective_projection_gives_infinity(self):
        est = estimate_pseudo_lipschitz(np.array([[0.0, 0.0], [0.0, 1.0]]), SIG11)
        assert est.l_hat == float("inf")
        assert est.witness == (0, 1)

    def test_matches_brute_force_on_random_cloud(self):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(40, 3))
        est = estimate_pseudo_lipschitz(pts, SIG21)
        assert est.l_hat == pytest.approx(brute_lipschitz(pts, 2), rel=1e-12)


class TestTangentDirections:
    def test_hyperbola_apex(self):
        desc = hyperbola_descriptor(samples=41, span=1.0)
        dirs = tangent_directions(desc, 0, 0.0)
        assert len(dirs) == 2
        assert np.allclose(sorted(d[0] for d in dirs), [-1.0, 1.0])
        assert np.allclose([d[1] for d in dirs], 0.0, atol=1e-12)

    def test_graph_partials(self):
        desc = SetDescriptor(
            SIG11,
            (Graph(func=lambda x: x / 2.0, domain=((0.0, 1.0),), resolution=(5,)),),
        )
        dirs = tangent_directions(desc, 0, [0.3])
        want = np.array([1.0, 0.5]) / np.linalg.norm([1.0, 0.5])
        assert any(np.allclose(d, want, atol=1e-9) for d in dirs)
        assert any(np.allclose(d, -want, atol=1e-9) for d in dirs)

    def test_sharpness_curve_origin(self):
        desc = cusp_curve_descriptor(samples=41, span=1.0)
        dirs = tangent_directions(desc, 0, 0.0)
        want = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
        assert any(np.allclose(d, want, atol=1e-9) for d in dirs)

    def test_boundary_parameter_rejected(self):
        desc = hyperbola_descriptor(samples=41, span=1.0)
        with pytest.raises(BoundaryParameterError):
            tangent_directions(desc, 0, 1.0)

    def test_point_list_has_no_tangent(self):
        desc = SetDescriptor(SIG11, (PointList([[0.0, 0.0]]),))
        with pytest.raises(PointListHasNoTangentError):
            tangent_directions(desc, 0, 0.0)

    def test_finite_difference_fallback(self):
        desc = SetDescriptor(
            SIG11,
            (Curve(func=lambda t: np.stack([t, np.sqrt(t * t + 1.0)], axis=-1),
                   domain=(-1.0, 1.0), samples=11),),
        )
        dirs = tangent_directions(desc, 0, 0.5)
        slope = 0.5 / np.sqrt(1.25)
        want = np.array([1.0, slope]) / np.linalg.norm([1.0, slope])
        assert any(np.allclose(d, want, atol=1e-7) for d in dirs)


class TestInvariants:
    def test_acausal_implies_injective_projection_and_small_l_hat(self, hyperbola):
        s = sample(hyperbola)
        assert check_acausal(s.points, SIG11).acausal
        est = estimate_pseudo_lipschitz(s.points, SIG11)
        assert np.isfinite(est.l_hat)
        assert est.l_hat <= 1.0

    @given(order=st.permutations(list(range(6))))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance(self, order):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(6, 2))
        base = estimate_pseudo_lipschitz(pts, SIG11).l_hat
        shuffled = estimate_pseudo_lipschitz(pts[np.array(order)], SIG11).l_hat
        assert shuffled == pytest.approx(base, rel=1e-12)

    @pytest.mark.parametrize("r", [5, 9, 17])
    def test_refinement_never_decreases_l_hat(self, r):
        coarse = sample(hyperbola_descriptor(samples=r))
        fine = sample(hyperbola_descriptor(samples=2 * r - 1))
        lc = estimate_pseudo_lipschitz(coarse, SIG11).l_hat
        lf = estimate_pseudo_lipschitz(fine, SIG11).l_hat
        assert lf >= lc - 1e-15
