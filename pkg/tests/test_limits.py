import numpy as np
import pytest

from conftest import SIG11, two_point_descriptor
from pseudoskel.errors import EmptyInWindowError, ValidationError
from pseudoskel.limits import (
    SetFamily,
    kuratowski_window_distance,
    m_upper_limit,
    medial_liminf_check,
    rho_family_limit,
)
from pseudoskel.sets import PointList, SetDescriptor
from pseudoskel.skeleton import GridSpec

WINDOW = ((-2.0, 2.0), (-2.0, 2.0))


def tilted_pair(t):
    return SetDescriptor(SIG11, (PointList([[-1.0, t], [1.0, -t]]),), label=f"pair-{t}")


def tilted_family(ts=(0.2, 0.1, 0.05, 0.02, 0.01)):
    members = [(t, tilted_pair(t)) for t in ts]
    members.append((0.0, two_point_descriptor()))
    return SetFamily(tuple(members))


def constant_family(ts=(0.2, 0.1, 0.05)):
    members = [(t, two_point_descriptor()) for t in ts]
    members.append((0.0, two_point_descriptor()))
    return SetFamily(tuple(members))


class TestSetFamily:
    def test_limit_member_is_mandatory(self):
        with pytest.raises(ValidationError):
            SetFamily(((0.1, two_point_descriptor()),))

    def test_duplicate_parameters_rejected(self):
        with pytest.raises(ValidationError):
            SetFamily(((0.1, two_point_descriptor()), (0.1, two_point_descriptor()),
                       (0.0, two_point_descriptor())))

    def test_sorted_decreasing(self):
        fam = tilted_family()
        ts = [t for t, _ in fam.members]
        assert ts == sorted(ts, reverse=True)
        assert fam.members[-1][0] == 0.0


class TestKuratowskiWindowDistance:
    def test_two_singletons(self):
        got = kuratowski_window_distance([[0.0, 0.0]], [[1.0, 0.0]], WINDOW)
        assert got == (1.0, 1.0)

    def test_identity(self):
        pts = np.array([[0.3, 0.4], [-1.0, 0.2]])
        assert kuratowski_window_distance(pts, pts, WINDOW) == (0.0, 0.0)

    def test_window_clipping(self):
        # (3, 0) falls outside the window so only (0,0) constrains the sup
        got = kuratowski_window_distance([[0.0, 0.0], [3.0, 0.0]], [[0.0, 0.0]], WINDOW)
        assert got == (0.0, 0.0)

    def test_empty_in_window_rejected(self):
        with pytest.raises(EmptyInWindowError):
            kuratowski_window_distance([[5.0, 5.0]], [[0.0, 0.0]], WINDOW)

    def test_window_monotonicity(self):
        rng = np.random.default_rng(3)
        # keep one guaranteed point per sample inside the small window
        a = np.vstack([[[0.1, 0.1]], rng.uniform(-3, 3, size=(12, 2))])
        b = np.vstack([[[-0.2, 0.4]], rng.uniform(-3, 3, size=(9, 2))])
        small = ((-1.0, 1.0), (-1.0, 1.0))
        big = ((-3.0, 3.0), (-3.0, 3.0))
        d_small = kuratowski_window_distance(a, b, small)
        d_big = kuratowski_window_distance(a, b, big)
        assert d_big[0] >= d_small[0] - 1e-12
        assert d_big[1] >= d_small[1] - 1e-12


class TestRhoFamilyLimit:
    def test_tilted_pair_converges(self):
        # closed form: rho_t((0,0)) = 1 - t^2 for both points
        fam = tilted_family()
        probes = np.array([[0.05, 0.0], [0.0, 0.05], [-0.05, 0.0], [0.0, -0.05],
                           [0.02, 0.02], [-0.01, 0.03]])
        report = rho_family_limit(fam, [0.0, 0.0], probes)
        assert report.rho_limit == pytest.approx(1.0)
        assert report.passed, (report.c1, report.c2, report.eta_tol)
        for t, desc in fam.positive():
            from pseudoskel.distance import rho as rho_query

            assert rho_query([0.0, 0.0], desc).rho == pytest.approx(1.0 - t * t)

    def test_constant_family_zero_deviation(self):
        fam = constant_family()
        probes = np.array([[0.05, 0.0], [0.0, 0.05]])
        report = rho_family_limit(fam, [0.0, 0.0], probes)
        assert max(report.eta) <= 1e-9
        assert report.passed

    def test_shifted_pair_closed_form(self):
        # X_t = {(-1+t, 0), (1+t, 0)}: rho_t((0,0)) = (1-t)^2
        members = [(t, SetDescriptor(SIG11, (PointList([[-1.0 + t, 0.0], [1.0 + t, 0.0]]),)))
                   for t in (0.2, 0.1, 0.05)]
        members.append((0.0, two_point_descriptor()))
        fam = SetFamily(tuple(members))
        from pseudoskel.distance import rho as rho_query

        for t, desc in fam.positive():
            assert rho_query([0.0, 0.0], desc).rho == pytest.approx((1.0 - t) ** 2)
        probes = np.array([[0.05, 0.0], [0.0, 0.05]])
        report = rho_family_limit(fam, [0.0, 0.0], probes)
        assert report.passed

    def test_monotone_eta_on_nested_probes(self):
        fam = tilted_family()
        base = np.array([[0.08, 0.0], [0.0, 0.08], [-0.08, 0.0]])
        etas = []
        for shrink in (1.0, 0.5, 0.25):
            report = rho_family_limit(fam, [0.0, 0.0], base * shrink)
            etas.append(max(report.eta))
        assert etas[2] <= etas[0] + 1e-9


class TestMUpperLimit:
    def test_tilted_pair_reps_converge(self):
        fam = tilted_family()
        report = m_upper_limit(fam, [0.0, 0.0])
        assert report.passed
        # deviation at parameter t is exactly t (vertical offset of the pair)
        for t, dev in zip(report.t_values, report.deviations):
            assert dev == pytest.approx(t, abs=report.delta_limit + 1e-9)

    def test_constant_family_exact_containment(self):
        report = m_upper_limit(constant_family(), [0.0, 0.0])
        assert max(report.deviations) == 0.0
        assert report.passed

    def test_one_sidedness_documented(self):
        # X_t loses a point: limsup is a strict subset, containment holds
        members = [(t, SetDescriptor(SIG11, (PointList([[-1.0, 0.0]]),)))
                   for t in (0.2, 0.1)]
        members.append((0.0, two_point_descriptor()))
        fam = SetFamily(tuple(members))
        report = m_upper_limit(fam, [0.0, 0.3])
        assert max(report.deviations) == 0.0
        assert report.passed


class TestMedialLiminf:
    def test_tilted_family_bisectors_converge(self):
        # brute-force oracle: M_t is the line x1 = -t x2 from the Q equality
        fam = tilted_family()
        grid = GridSpec(WINDOW, (41, 41))
        report = medial_liminf_check(fam, grid, eta_cells=2.0)
        assert report.passed
        assert report.threshold is not None and report.threshold >= 0.05
        for t, dev in zip(report.t_values, report.deviations):
            if t <= 0.05:
                # analytic deviation of the tilted line inside the window
                assert dev <= 2.0 * grid.max_spacing
                assert dev >= t * 2.0 / np.sqrt(1 + t * t) - 2.0 * grid.max_spacing

    def test_constant_family_zero_deviation(self):
        fam = constant_family()
        grid = GridSpec(WINDOW, (41, 41))
        report = medial_liminf_check(fam, grid, eta_cells=2.0)
        assert report.passed
        assert max(report.deviations) == 0.0

    def test_merging_points_vacuous(self):
        # M_0 of a singleton is empty; the converse inclusion is not claimed
        members = [(t, SetDescriptor(SIG11, (PointList([[-t, 0.0], [t, 0.0]]),)))
                   for t in (0.2, 0.1)]
        members.append((0.0, SetDescriptor(SIG11, (PointList([[0.0, 0.0]]),))))
        fam = SetFamily(tuple(members))
        grid = GridSpec(WINDOW, (21, 21))
        report = medial_liminf_check(fam, grid)
        assert report.passed
        assert report.limit_medial_count == 0

    def test_warns_on_non_lipschitz_member(self):
        bad = SetDescriptor(SIG11, (PointList([[0.0, 0.0], [0.1, 0.2]]),))
        members = [(0.1, bad), (0.0, two_point_descriptor())]
        fam = SetFamily(tuple(members))
        grid = GridSpec(WINDOW, (11, 11))
        with pytest.warns(UserWarning):
            report = medial_liminf_check(fam, grid)
        assert report.warnings
