# pylint: disable=missing-docstring

import logging
import math

import pytest

from pytest import mark
from scipy import constants

from . import SystemFixtures
from .. import ConfigException
from ..metrology import (
    LockBudget,
    budget,
    collective_dipole,
    intracavity_beta,
    line_pulling,
    lock_bandwidth,
    phase_slope,
    pulling_zero_crossing,
    quantum_limited_linewidth,
    radiative_linewidth,
    signal_power,
    snr,
    table1,
)
from ..params import derive_params, laser_linewidth_reference, operating_point
from ..steady_state import solve_branches

# name: (C0, P in W, SNR in sqrt(Hz), linewidth in Hz), two significant figures at most
REFERENCE_VALUES = {
    "Mg24": ("9.6e-3", "20e-12", "9.8e3", "20e-3"),
    "Sr87": ("7.4e-4", "3e-15", "1.5e2", "4.7e-3"),
    "Yb171": ("1.1e-2", "27e-15", "3.9e2", "1.6e-3"),
    "Hg199": ("1.1e-2", "130e-15", "5.8e2", "0.68e-3"),
    "Sr87-radiative": ("1.2e-2", "0.5e-15", "6.1e1", "0.74e-6"),
}


def printed(text: str):
    """Value of a printed number and the tolerance it deserves: 10%, or half a unit in the last printed digit"""
    mantissa = float(text.lower().partition("e")[0])
    digits = text.lower().partition("e")[0].replace(".", "").lstrip("0")
    unit = 10 ** (math.floor(math.log10(mantissa)) - len(digits) + 1)
    return pytest.approx(float(text), rel=max(0.1, 0.5 * unit / mantissa))


class TestTable1(SystemFixtures):
    def test_rows_in_catalog_order(self, catalog):
        assert [r.name for r in table1(catalog)] == catalog.names()

    @mark.parametrize("name", list(REFERENCE_VALUES.keys()))
    def test_reference_values(self, catalog, name):
        row = {r.name: r for r in table1(catalog)}[name]
        C0, P, SNR, linewidth = REFERENCE_VALUES[name]
        assert row.C0 == printed(C0)
        assert row.signal_power == printed(P)
        assert row.snr == printed(SNR)
        assert row.linewidth == printed(linewidth)

    def test_bandwidth_above_kHz(self, catalog):
        for row in table1(catalog):
            assert row.bandwidth > 1e3

    def test_default_is_builtin(self, catalog):
        assert table1() == table1(catalog)


@mark.parametrize("system", ["Sr87"], indirect=True)
class TestSrBudget(SystemFixtures):
    def test_power_and_snr(self, system):
        assert signal_power(system) == pytest.approx(3.31e-15, rel=1e-2)
        assert snr(system) == pytest.approx(152.5, rel=1e-2)
        assert lock_bandwidth(system) == pytest.approx(snr(system) ** 2, rel=1e-12)

    def test_power_from_snr(self, system):
        d = derive_params(system)
        photon = constants.hbar * d.omega_L
        assert signal_power(system) == pytest.approx(photon * snr(system) ** 2 / 2, rel=1e-12)

    def test_detector_efficiency(self, system):
        assert snr(system.with_changes(detector_efficiency=0.25)) == pytest.approx(snr(system) / 2, rel=1e-12)
        half = quantum_limited_linewidth(system.with_changes(detector_efficiency=0.5))
        assert half.closed_form == pytest.approx(2 * quantum_limited_linewidth(system).closed_form, rel=1e-12)

    def test_empty_sample(self, system):
        empty = system.with_changes(N=0)
        assert signal_power(empty) == 0.0
        assert snr(empty) == 0.0
        assert lock_bandwidth(empty) == 0.0
        assert collective_dipole(empty).steady_state == 0.0

    def test_linewidth(self, system):
        linewidth = quantum_limited_linewidth(system)
        assert linewidth.closed_form == pytest.approx(4.69e-3, rel=1e-2)
        assert linewidth.relative_gap <= 5.0 / derive_params(system).C

    def test_budget_record(self, system):
        b = budget(system)
        record = b.to_record()
        assert record["phase_slope_per_hz"] == pytest.approx(2 * math.pi * b.phase_slope)
        assert record["linewidth"] == b.linewidth
        assert b.laser_linewidth_reference == pytest.approx(laser_linewidth_reference(system))

    def test_sub_saturated_beta_warns(self, system, caplog):
        with caplog.at_level(logging.WARNING, logger="satspec"):
            signal_power(system, beta=0.5)
        assert "saturated regime" in caplog.text

    @mark.parametrize("beta", [0.0, -1.0, math.inf])
    def test_invalid_beta(self, system, beta):
        with pytest.raises(ConfigException):
            snr(system, beta)


class TestPhaseSlope:
    def test_large_C_limit(self):
        slope = phase_slope(100.0, 2.0)
        assert slope.leading == pytest.approx(0.02)
        assert slope.exact == pytest.approx(0.0204, rel=1e-2)
        assert slope.relative_gap <= 3.0 / 100

    def test_gap_closes_with_C(self):
        gaps = [phase_slope(C, 2.0).relative_gap for C in [50.0, 500.0, 5000.0]]
        assert gaps == sorted(gaps, reverse=True)
        assert gaps[-1] < 1e-3

    def test_explicit_sigma_z(self):
        assert phase_slope(100.0, 2.0, sigma_z=-1.0).exact == pytest.approx(100.0 / 101.0)


class TestLinewidth(SystemFixtures):
    @mark.parametrize("system", ["Sr87"], indirect=True)
    def test_full_converges_to_closed_form(self, system):
        gaps = []
        for N in [10**5, 10**6, 10**7]:
            sys = system.with_changes(N=N)
            C = derive_params(sys).C
            gap = quantum_limited_linewidth(sys).relative_gap
            assert gap <= 5.0 / C
            gaps.append(gap)
        assert gaps == sorted(gaps, reverse=True)

    @mark.parametrize("system", ["Sr87"], indirect=True)
    def test_increases_with_beta(self, system):
        widths = [quantum_limited_linewidth(system, beta) for beta in [1.5, 2.0, 3.0]]
        assert [w.closed_form for w in widths] == sorted(w.closed_form for w in widths)
        assert [w.full for w in widths] == sorted(w.full for w in widths)

    @mark.parametrize("system", ["Sr87"], indirect=True)
    def test_increases_with_single_atom_cooperativity(self, system):
        # C0 scales with the finesse at fixed gamma and T2
        systems = [system.with_changes(finesse=system.finesse * f) for f in [1.0, 2.0, 4.0]]
        C0 = [derive_params(s).C0 for s in systems]
        assert C0 == sorted(C0)
        widths = [quantum_limited_linewidth(s) for s in systems]
        assert [w.closed_form for w in widths] == pytest.approx([c * widths[0].closed_form / C0[0] for c in C0], rel=1e-12)
        full = [w.full for w in widths]
        assert all(b > a for a, b in zip(full, full[1:]))

    @mark.parametrize("system", ["Sr87"], indirect=True)
    def test_inverse_square_in_T2(self, system):
        # the finesse compensates T2 so that C0 stays put
        systems = [system.with_changes(T2=T2, finesse=1e5 / T2) for T2 in [0.25, 0.5, 1.0]]
        C0 = [derive_params(s).C0 for s in systems]
        assert C0 == pytest.approx([C0[0]] * 3, rel=1e-12)
        scaled = [quantum_limited_linewidth(s).closed_form * s.T2**2 for s in systems]
        assert scaled == pytest.approx([scaled[0]] * 3, rel=1e-12)

    @mark.parametrize("system", ["Sr87-radiative"], indirect=True)
    def test_radiative_limit(self, system):
        assert radiative_linewidth(system) == pytest.approx(quantum_limited_linewidth(system).closed_form, rel=1e-12)
        assert radiative_linewidth(system) == pytest.approx(0.74e-6, rel=2e-2)


class TestPulling(SystemFixtures):
    def test_below_one_mHz(self, sr_like):
        assert line_pulling(sr_like, 1e-4) == pytest.approx(0.796e-3, rel=1e-3)
        assert line_pulling(sr_like, 1e-4) < 1e-3
        assert line_pulling(sr_like, 0.0) == 0.0

    def test_zero_crossing_matches_intracavity_beta(self, sr_like):
        C = derive_params(sr_like).C
        numeric = pulling_zero_crossing(sr_like, 1e-4)
        assert numeric == pytest.approx(line_pulling(sr_like, 1e-4, intracavity_beta(C, 2.0)), rel=1e-2)
        assert numeric == pytest.approx(line_pulling(sr_like, 1e-4), rel=5e-2)
        assert pulling_zero_crossing(sr_like, 0.0) == 0.0

    def test_sign_follows_theta(self, sr_like):
        assert pulling_zero_crossing(sr_like, -1e-4) == pytest.approx(-pulling_zero_crossing(sr_like, 1e-4), rel=1e-9)

    def test_empty_cavity(self, sr_like):
        empty = sr_like.with_changes(N=0)
        assert intracavity_beta(0.0, 2.0) == 2.0
        assert line_pulling(empty, 1e-4) == 0.0
        assert pulling_zero_crossing(empty, 0.0) == 0.0
        with pytest.raises(ConfigException, match="no atoms, no lock point"):
            pulling_zero_crossing(empty, 1e-4)


class TestCollectiveDipole(SystemFixtures):
    @mark.parametrize("system", ["Sr87-radiative"], indirect=True)
    def test_closed_form(self, system):
        # tune the finesse for C = 100
        sys = system.with_changes(finesse=system.finesse * 100.0 / derive_params(system).C)
        assert derive_params(sys).C == pytest.approx(100.0)
        dipole = collective_dipole(sys)
        assert dipole.closed_form == pytest.approx(1e4, rel=1e-9)
        assert dipole.steady_state == pytest.approx(dipole.closed_form, rel=5.0 / 100)

    @mark.parametrize("system", ["Sr87-radiative"], indirect=True)
    def test_vanishes_with_saturation(self, system):
        assert collective_dipole(system, 1e3).closed_form < collective_dipole(system, 2.0).closed_form / 100


class TestSignalPowerFromField(SystemFixtures):
    def test_matches_transmitted_photon_flux(self, sr_like):
        d = derive_params(sr_like)
        u = solve_branches(operating_point(sr_like)).top.u
        flux = 2 * constants.hbar * d.omega_L * d.kappa * d.n0 * u
        assert signal_power(sr_like) == pytest.approx(flux, rel=5.0 / d.C)


class TestLockBudget:
    def test_rejects_negative_fields(self):
        with pytest.raises(ConfigException, match="negative"):
            LockBudget(
                name="x",
                beta=2.0,
                C0=1e-3,
                C=100.0,
                signal_power=-1.0,
                snr=1.0,
                phase_slope=1.0,
                phase_slope_leading=1.0,
                linewidth=1.0,
                linewidth_full=1.0,
                bandwidth=1.0,
                pulling_coefficient=1.0,
                collective_dipole=1.0,
                collective_dipole_closed_form=1.0,
                laser_linewidth_reference=1.0,
            )
