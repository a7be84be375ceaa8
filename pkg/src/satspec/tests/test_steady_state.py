# pylint: disable=missing-docstring

import logging
import math

import numpy as np
import pytest

from pytest import mark

from . import PointFixtures
from .. import ConfigException, NumericalException
from ..params import DimensionlessPoint
from ..steady_state import (
    Stability,
    bistability_cubic,
    bistability_thresholds,
    critical_cooperativity,
    fold_points,
    normal_mode_overlay,
    phase_slope_exact,
    phase_zero_crossing,
    real_roots,
    residual,
    resonant_drive,
    scan_drive,
    scan_spectrum,
    scan_surface,
    solve_branches,
    transmitted_phase,
    vacuum_rabi_splitting,
)


def resonant_drive_slope(C, u):
    """dI_in/du of u (1 + C/(1+u))^2"""
    f = 1.0 + C / (1.0 + u)
    return f**2 - 2.0 * u * C * f / (1.0 + u) ** 2


class TestRealRoots:
    def test_simple_roots(self):
        roots = real_roots(np.poly([1.0, 2.0, 5.0]))
        assert [r for r, _ in roots] == pytest.approx([1.0, 2.0, 5.0])
        assert not any(t for _, t in roots)

    def test_negative_roots_dropped(self):
        roots = real_roots(np.poly([-3.0, -1.0, 4.0]))
        assert [r for r, _ in roots] == pytest.approx([4.0])

    def test_double_root_is_tangency(self):
        roots = real_roots(np.poly([2.0, 2.0, 7.0]))
        assert len(roots) == 2
        assert roots[0][0] == pytest.approx(2.0, rel=1e-6)
        assert roots[0][1]
        assert not roots[1][1]


class TestSolveBranches(PointFixtures):
    @mark.parametrize("point", [(0.0, 100.0), (0.0, 100.0, 3.0, -0.5)], indirect=True)
    def test_empty_cavity(self, point):
        branches = solve_branches(point)
        assert len(branches) == 1
        # |y|^2 = |x|^2 |1 + i theta|^2 without atoms
        assert branches.top.u == pytest.approx(point.I_in / (1 + point.theta**2), rel=1e-10)

    @mark.parametrize("point", [(100.0, 0.0)], indirect=True)
    def test_no_drive(self, point):
        branches = solve_branches(point)
        assert len(branches) == 1
        assert branches.top.u == 0.0
        assert branches.top.sigma_z == -1.0

    @mark.parametrize("point", [(100.0, 1e3)], indirect=True)
    def test_three_branches(self, point):
        branches = solve_branches(point)
        assert len(branches) == 3
        us = [b.u for b in branches]
        assert us == sorted(us)
        assert us[0] == pytest.approx(0.1234, rel=1e-2)
        assert us[2] == pytest.approx(787, rel=1e-2)
        for b in branches:
            assert residual(point, b.u) <= 1e-9 * point.I_in
            assert b.stability == Stability.UNCLASSIFIED

    @mark.parametrize("point, count", [((100.0, 1e2), 1), ((100.0, 5e2), 3), ((100.0, 1e3), 3), ((100.0, 2e3), 3), ((100.0, 1e4), 1)], indirect=["point"])
    def test_resonant_branch_count(self, point, count):
        assert len(solve_branches(point)) == count

    @mark.parametrize("point", [(100.0, 5e3)], indirect=True)
    def test_single_saturated_branch(self, point):
        branches = solve_branches(point)
        assert len(branches) == 1
        assert branches.top.u == pytest.approx(4798, rel=1e-4)
        assert point.beta == pytest.approx(2.0)

    @mark.parametrize("point", [(8.0, 27.0)], indirect=True)
    def test_critical_point_triple_root(self, point):
        branches = solve_branches(point)
        assert len(branches) == 1
        assert branches.top.u == pytest.approx(3.0, abs=1e-6)
        assert branches.top.stability == Stability.MARGINAL

    @mark.parametrize("point", [(100.0, 1e3, 20.0, 0.3)], indirect=True)
    def test_branch_fields_consistent(self, point):
        for b in solve_branches(point):
            assert abs(b.x) ** 2 == pytest.approx(b.u, rel=1e-9)
            a0 = 1 + point.delta**2
            assert b.sigma_z == pytest.approx(-a0 / (a0 + b.u))
            assert b.dipole == pytest.approx(b.x * b.sigma_z / (1 + 1j * point.delta))
            assert -1 <= b.sigma_z <= 0

    def test_residual_failure_raises(self, monkeypatch):
        monkeypatch.setattr("satspec.steady_state.real_roots", lambda coeffs: [(5.0, False)])
        with pytest.raises(NumericalException, match="residual"):
            solve_branches(DimensionlessPoint(C=100.0, I_in=1e3))

    def test_tangent_residual_only_warns(self, monkeypatch, caplog):
        monkeypatch.setattr("satspec.steady_state.real_roots", lambda coeffs: [(5.0, True)])
        with caplog.at_level(logging.WARNING, logger="satspec"):
            branches = solve_branches(DimensionlessPoint(C=100.0, I_in=1e3))
        assert branches.top.stability == Stability.MARGINAL
        assert "tangent steady state" in caplog.text

    def test_random_points_ordered_with_small_residual(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            point = DimensionlessPoint(
                C=float(rng.uniform(0, 300)),
                I_in=float(10 ** rng.uniform(-2, 5)),
                delta=float(rng.uniform(-50, 50)),
                theta=float(rng.uniform(-5, 5)),
            )
            branches = solve_branches(point)
            assert 1 <= len(branches) <= 3
            us = [b.u for b in branches]
            assert us == sorted(us)
            for b in branches:
                assert b.u >= 0
                assert residual(point, b.u) <= 1e-9 * max(1.0, point.I_in)

    def test_root_count_matches_sign_changes(self):
        rng = np.random.default_rng(13)
        checked = 0
        for _ in range(2000):
            point = DimensionlessPoint(
                C=float(rng.uniform(0, 1e3)),
                I_in=float(10 ** rng.uniform(-2, 6)),
                delta=float(rng.uniform(-1e3, 1e3)),
                theta=float(rng.uniform(-1, 1)),
            )
            us = [b.u for b in solve_branches(point)]
            # closely spaced roots hide between grid nodes
            if len(us) > 1 and min(b / a for a, b in zip(us, us[1:])) < 1.01:
                continue
            # every root lies in (0, I_in]
            grid = np.geomspace(1e-16 * point.I_in, point.I_in * (1 + 1e-9), 40000)
            signs = np.sign(np.polyval(bistability_cubic(point), grid))
            assert np.count_nonzero(np.diff(signs[signs != 0])) == len(us)
            checked += 1
        assert checked > 1000

    def test_top_branch_monotone_in_drive(self):
        scans = scan_drive(100.0, 0.0, np.geomspace(1, 1e6, 500))
        tops = [s.top.u for s in scans]
        assert all(b >= a for a, b in zip(tops, tops[1:]))

    def test_drive_limits(self):
        C = 100.0
        weak = solve_branches(DimensionlessPoint(C=C, I_in=1e-3)).top.u
        assert weak == pytest.approx(1e-3 / (1 + C) ** 2, rel=1e-2)
        strong = solve_branches(DimensionlessPoint(C=C, I_in=1e9)).top.u
        assert strong / 1e9 == pytest.approx(1.0, rel=1e-2)

    def test_detuning_symmetry(self):
        for delta in [3.0, 30.0, 300.0]:
            plus = solve_branches(DimensionlessPoint(C=100, I_in=1e3, delta=delta))
            minus = solve_branches(DimensionlessPoint(C=100, I_in=1e3, delta=-delta))
            assert [b.u for b in plus] == pytest.approx([b.u for b in minus], rel=1e-9)

    def test_far_detuned_is_empty_cavity(self):
        branches = solve_branches(DimensionlessPoint(C=100, I_in=1e3, delta=1e4))
        assert branches.top.u == pytest.approx(1e3, rel=1e-3)

    def test_cubic_coefficients(self):
        coeffs = bistability_cubic(DimensionlessPoint(C=0.0, I_in=4.0))
        # (u - I)(u + 1)^2 without atoms or detuning
        assert coeffs == pytest.approx(np.poly([4.0, -1.0, -1.0]))


class TestThresholds:
    def test_critical_cooperativity(self):
        assert critical_cooperativity() == 8.0
        assert fold_points(8.0) == pytest.approx((3.0,))
        assert fold_points(7.9) == ()
        assert bistability_thresholds(8.0) is None
        assert bistability_thresholds(4.0) is None

    def test_folds_at_C100(self):
        thresholds = bistability_thresholds(100.0)
        assert thresholds.u_upper_fold == pytest.approx(1.0417, rel=1e-4)
        assert thresholds.u_lower_fold == pytest.approx(96.958, rel=1e-4)
        assert thresholds.upper == pytest.approx(2602.0, rel=1e-3)
        assert thresholds.lower == pytest.approx(396.0, rel=1e-3)

    def test_large_C_asymptotes(self):
        thresholds = bistability_thresholds(1e4)
        lower, upper = thresholds.asymptotes
        assert thresholds.lower == pytest.approx(lower, rel=1e-2)
        assert thresholds.upper == pytest.approx(upper, rel=1e-2)

    @mark.parametrize("C", [9.0, 20.0, 100.0, 1e3, 1e5])
    def test_fold_is_stationary(self, C):
        for u in fold_points(C):
            assert abs(resonant_drive_slope(C, u)) <= 1e-9 * resonant_drive(C, u) / u

    def test_branch_count_changes_at_folds(self):
        thresholds = bistability_thresholds(100.0)
        inside = [thresholds.lower * 1.001, thresholds.upper * 0.999]
        outside = [thresholds.lower * 0.999, thresholds.upper * 1.001]
        for I in inside:
            assert len(solve_branches(DimensionlessPoint(C=100.0, I_in=I))) == 3
        for I in outside:
            assert len(solve_branches(DimensionlessPoint(C=100.0, I_in=I))) == 1
        assert thresholds.contains(1e3)
        assert not thresholds.contains(1e4)

    def test_tangency_at_fold(self):
        thresholds = bistability_thresholds(100.0)
        branches = solve_branches(DimensionlessPoint(C=100.0, I_in=thresholds.upper))
        assert len(branches) == 2
        assert branches.bottom.u == pytest.approx(thresholds.u_upper_fold, rel=1e-5)
        assert branches.bottom.stability == Stability.MARGINAL

    def test_window_opens_above_critical(self):
        thresholds = bistability_thresholds(8.5)
        assert thresholds is not None
        # folds of u^2 + (2 - C) u + 1 + C at C = 8.5
        assert thresholds.u_upper_fold == pytest.approx(2.2192, rel=1e-4)
        assert thresholds.u_lower_fold == pytest.approx(4.2808, rel=1e-4)
        assert thresholds.lower < thresholds.upper
        middle = (thresholds.lower + thresholds.upper) / 2
        assert len(solve_branches(DimensionlessPoint(C=8.5, I_in=middle))) == 3

    def test_negative_C(self):
        with pytest.raises(ConfigException):
            fold_points(-1.0)


class TestScans:
    def test_scan_drive(self):
        scans = scan_drive(100.0, 0.0, np.geomspace(1, 1e5, 200))
        counts = [len(s) for s in scans]
        assert max(counts) == 3
        assert counts[0] == 1 and counts[-1] == 1

    def test_scan_drive_examples(self):
        weak, detuned = scan_drive(100.0, 0.0, [1e2]) + scan_drive(100.0, 100.0, [1e2])
        assert len(weak) == 1
        assert weak.top.u == pytest.approx(1e2 / 101**2, rel=3e-2)
        assert resonant_drive(100.0, weak.top.u) == pytest.approx(1e2, rel=1e-9)
        # |1 + C/(1 + i delta)|^2 ~ 2 at delta = C: half the drive gets through
        assert len(detuned) == 1
        assert detuned.top.u == pytest.approx(50.0, rel=5e-2)
        (saturated,) = scan_drive(100.0, 0.0, [1e4])
        assert len(saturated) == 1
        assert saturated.top.u / 1e4 > 0.9

    def test_small_C_single_valued(self):
        assert all(len(s) == 1 for s in scan_drive(4.0, 0.0, np.geomspace(1, 1e5, 200)))

    @mark.parametrize("grid", [[1.0, 3.0, 2.0], [], [1.0, math.nan], [-1.0, 1.0]])
    def test_invalid_drive_grid(self, grid):
        with pytest.raises(ConfigException):
            scan_drive(100.0, 0.0, grid)

    def test_scan_spectrum_symmetric(self):
        deltas = np.linspace(-300, 300, 61)
        scans = scan_spectrum(100.0, 5e3, deltas)
        tops = np.array([s.top.u for s in scans])
        assert tops == pytest.approx(tops[::-1], rel=1e-9)
        assert tops[30] == pytest.approx(4798, rel=1e-4)

    def test_scan_spectrum_peak_near_resonance(self):
        minus, zero, plus = (s.top.u for s in scan_spectrum(100.0, 5e3, [-50.0, 0.0, 50.0]))
        assert zero > minus
        assert zero > plus

    def test_scan_spectrum_bistable_window(self):
        counts = [len(s) for s in scan_spectrum(100.0, 1e3, np.linspace(-300, 300, 61))]
        assert counts[30] == 3
        assert counts[0] == counts[-1] == 1
        assert counts == counts[::-1]

    def test_scan_spectrum_absorption_dip(self):
        C, I_in = 100.0, 1e2
        deltas = [-10 * C, -C, 0.0, C, 10 * C]
        tops = [s.top.u for s in scan_spectrum(C, I_in, deltas)]
        assert tops[2] < 1e-3 * I_in
        assert tops[1] == pytest.approx(I_in / 2, rel=5e-2)
        assert tops[3] == pytest.approx(I_in / 2, rel=5e-2)
        assert min(tops[0], tops[4]) > 0.95 * I_in

    def test_surface_matches_spectrum(self):
        deltas = np.linspace(-50, 50, 11)
        grid = scan_surface(100.0, 5e3, deltas, [-1.0, 0.0, 1.0])
        spectrum = [s.top.u for s in scan_spectrum(100.0, 5e3, deltas, theta=0.0)]
        assert [b.u for b in grid.row(1)] == spectrum
        assert grid.u.shape == (3, 11)


class TestNormalModes:
    def test_vacuum_rabi_splitting(self):
        overlay = normal_mode_overlay(100.0, [0.0], K=1e3)
        splitting = (overlay.upper[0] - overlay.lower[0]) * overlay.K
        assert splitting == pytest.approx(vacuum_rabi_splitting(100.0, 1e3))
        assert vacuum_rabi_splitting(100.0, 1e3) == pytest.approx(2 * math.sqrt(1e5))

    def test_empty_cavity_resonance(self):
        overlay = normal_mode_overlay(0.0, np.linspace(-100, 100, 21))
        assert np.all(overlay.cavity_like == 0.0)

    def test_far_detuned_branch_follows_ridge(self):
        overlay = normal_mode_overlay(100.0, [1e4, 3e4], K=1e3)
        assert overlay.upper == pytest.approx(overlay.ridge, rel=1e-2)

    def test_invalid(self):
        with pytest.raises(ConfigException):
            normal_mode_overlay(100.0, [0.0], K=0.0)


class TestPhase:
    def test_on_resonance_phase_vanishes(self):
        point = DimensionlessPoint(C=100.0, I_in=5e3)
        assert transmitted_phase(point, solve_branches(point).top) == pytest.approx(0.0, abs=1e-15)

    def test_slope_matches_numerical_derivative(self):
        h = 1e-3

        def phase(delta):
            p = DimensionlessPoint(C=100.0, I_in=5e3, delta=delta)
            return transmitted_phase(p, solve_branches(p).top)

        numeric = (phase(h) - phase(-h)) / (2 * h)
        exact = phase_slope_exact(DimensionlessPoint(C=100.0, I_in=5e3))
        assert numeric == pytest.approx(exact, rel=1e-6)
        assert exact == pytest.approx(0.0204, rel=1e-2)

    def test_zero_crossing(self):
        C, I_in, theta = 100.0, 5e3, 1e-4
        delta = phase_zero_crossing(C, I_in, theta)
        u = solve_branches(DimensionlessPoint(C=C, I_in=I_in, delta=delta, theta=theta)).top.u
        # Im D = 0 at the lock point: delta = theta (1 + u + delta^2) / C
        assert delta == pytest.approx(theta * (1 + u + delta**2) / C, rel=1e-9)
        assert phase_zero_crossing(C, I_in, -theta) == pytest.approx(-delta, rel=1e-9)
        assert phase_zero_crossing(C, I_in, 0.0) == 0.0

    def test_zero_crossing_empty_cavity(self):
        assert phase_zero_crossing(0.0, 0.0, 0.0) == 0.0
        with pytest.raises(ConfigException, match="no atoms"):
            phase_zero_crossing(0.0, 0.0, 1e-4)
