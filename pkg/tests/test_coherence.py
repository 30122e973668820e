import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itsim.coherence import (
    FieldShiftProfile,
    SequenceSpec,
    SpecError,
    accumulated_phase,
    detuning_at,
    fit_contrast,
    run_sequence,
)
from itsim.constants import TWO_PI, DomainError
from itsim.rng import make_rng
from itsim.transport import design_waveform, static_waveform, waypoint_waveform

PROFILE = FieldShiftProfile()
C_DETUNING = TWO_PI * PROFILE.dnu_db_hz_per_t * PROFILE.base_field_t * 0.004


def test_detuning_anchor_values():
    assert detuning_at(-890.0) == 0.0
    assert detuning_at(0.0) == pytest.approx(C_DETUNING, rel=1e-14)
    assert detuning_at(-445.0) == pytest.approx(C_DETUNING / 2, rel=1e-14)


def test_detuning_outside_extent():
    with pytest.raises(DomainError):
        detuning_at(1000.5)


def test_profile_validation():
    with pytest.raises(DomainError):
        FieldShiftProfile(knots_um=(0.0, 0.0), knot_fractions=(0.0, 1.0))
    with pytest.raises(DomainError):
        FieldShiftProfile(knots_um=(0.0, 1.0), knot_fractions=(0.0,))
    with pytest.raises(DomainError):
        FieldShiftProfile(base_field_t=0.0)


def test_stationary_at_e_has_no_phase():
    assert accumulated_phase(static_waveform(-890.0, 100e-6, freq_hz=3.6e6)) == 0.0


def test_stationary_at_c_integrates_constant():
    wf = static_waveform(0.0, 50e-6, freq_hz=5.7e6)
    assert accumulated_phase(wf) == pytest.approx(C_DETUNING * 50e-6, rel=1e-12)


def test_round_trip_is_twice_one_way():
    one = accumulated_phase(waypoint_waveform((-890.0, 0.0), (50e-6,)))
    both = accumulated_phase(design_waveform("E-C-E", 100e-6))
    assert both == pytest.approx(2 * one, rel=1e-9)


def test_one_way_minimum_jerk_oracle():
    # x(u) = 10u^3 - 15u^4 + 6u^5 averages to 1/2, so the mean fractional shift is half the C value
    one = accumulated_phase(waypoint_waveform((-890.0, 0.0), (50e-6,)))
    assert one == pytest.approx(C_DETUNING * 50e-6 / 2, rel=1e-6)


def test_trajectory_source_matches_waveform():
    class Rec:
        times = np.linspace(0, 50e-6, 4001)
        positions_um = -890.0 + 890.0 * (10 * (times / 50e-6) ** 3 - 15 * (times / 50e-6) ** 4
                                         + 6 * (times / 50e-6) ** 5)

    assert accumulated_phase(Rec()) == pytest.approx(accumulated_phase(waypoint_waveform((-890.0, 0.0), (50e-6,))), rel=1e-8)


def test_phase_source_type_checked():
    with pytest.raises(DomainError):
        accumulated_phase(object())


def test_no_transport_fringe():
    fr = run_sequence(SequenceSpec(), n_phases=64)
    fit = fit_contrast(fr.phases, fr.populations)
    assert fit.contrast == pytest.approx(0.85, abs=1e-6)
    assert fit.phase_offset == pytest.approx(0.0, abs=1e-9)


def test_both_halves_cancel():
    wf = design_waveform("E-C-E", 100e-6)
    fr = run_sequence(SequenceSpec(transports="both-halves"), wf)
    assert abs(fr.net_phase) < 1e-3
    assert fit_contrast(fr.phases, fr.populations).phase_offset == pytest.approx(0.0, abs=1e-9)


def test_second_half_matches_quadrature():
    wf = design_waveform("E-C-E", 100e-6)
    fr = run_sequence(SequenceSpec(transports="second-half"), wf)
    quad = accumulated_phase(wf)
    assert fr.net_phase == pytest.approx(quad, rel=0.01)
    fit = fit_contrast(fr.phases, fr.populations)
    assert fit.phase_offset == pytest.approx(quad % TWO_PI, abs=1e-9)


def test_fringe_formula():
    wf = design_waveform("E-C-E", 60e-6)
    fr = run_sequence(SequenceSpec(transports="second-half", contrast_floor=0.9), wf, n_phases=32)
    expected = 0.5 * (1 - 0.9 * np.cos(fr.phases - fr.net_phase))
    np.testing.assert_allclose(fr.populations, expected, atol=1e-12)


def test_without_echo_phases_add():
    wf = design_waveform("E-C-E", 100e-6)
    fr = run_sequence(SequenceSpec(echo=False, transports="both-halves"), wf)
    assert fr.net_phase == pytest.approx(2 * accumulated_phase(wf), rel=1e-12)


@given(st.floats(-10.0, 10.0), st.floats(0.0, 1.0), st.sampled_from(["none", "second-half", "both-halves"]))
@settings(max_examples=25, deadline=None)
def test_contrast_invariant_under_global_phase(g, floor, mode):
    wf = design_waveform("E-C-E", 100e-6)
    spec = SequenceSpec(transports=mode, contrast_floor=floor)
    base = fit_contrast(*_fringe(run_sequence(spec, wf)))
    shifted = fit_contrast(*_fringe(run_sequence(spec, wf, global_phase=g)))
    assert shifted.contrast == pytest.approx(base.contrast, abs=1e-9)
    assert shifted.contrast == pytest.approx(floor, abs=1e-6)


def _fringe(fr):
    return fr.phases, fr.populations


def test_transport_longer_than_window():
    wf = design_waveform("E-C-E", 300e-6)
    with pytest.raises(SpecError):
        run_sequence(SequenceSpec(transports="second-half"), wf)


def test_transport_needs_waveform():
    with pytest.raises(SpecError):
        run_sequence(SequenceSpec(transports="both-halves"))


@pytest.mark.parametrize("kwargs", [dict(transports="three"), dict(t1=0.0), dict(contrast_floor=1.5)])
def test_spec_validation(kwargs):
    with pytest.raises(SpecError):
        SequenceSpec(**kwargs)


def test_total_time_counts_pulses():
    assert SequenceSpec().total_time == pytest.approx(562e-6)
    assert SequenceSpec(echo=False).total_time == pytest.approx(561e-6)


def test_exact_fringe_fit():
    phi = np.linspace(0, TWO_PI, 40, endpoint=False)
    p = 0.5 * (1 - 0.86 * np.cos(phi - 1.3))
    fit = fit_contrast(phi, p)
    assert fit.contrast == pytest.approx(0.86, abs=1e-6)
    assert fit.phase_offset == pytest.approx(1.3, abs=1e-9)
    assert fit.mean == pytest.approx(0.5, abs=1e-12)


def test_flat_fringe_has_no_phase():
    fit = fit_contrast(np.linspace(0, TWO_PI, 16, endpoint=False), np.full(16, 0.5))
    assert fit.contrast == 0.0 and not fit.phase_defined and math.isnan(fit.phase_offset)


@pytest.mark.parametrize("seed", range(5))
def test_noisy_fringe_fit(seed):
    rng = make_rng(seed, 7)
    phi = np.linspace(0, TWO_PI, 100, endpoint=False)
    p = 0.5 * (1 - 0.86 * np.cos(phi - 2.0)) + rng.normal(0, 0.01, phi.size)
    assert fit_contrast(phi, p).contrast == pytest.approx(0.86, abs=0.01)


def test_fit_preconditions():
    with pytest.raises(DomainError):
        fit_contrast(np.linspace(0, 6, 5), np.zeros(5))
    with pytest.raises(DomainError):
        fit_contrast(np.linspace(0, math.pi, 20), np.zeros(20))


@given(st.floats(0.0, 1.0), st.floats(0.0, 2 * math.pi - 1e-9))
@settings(max_examples=50)
def test_fit_output_ranges(c, phi0):
    phi = np.linspace(0, TWO_PI, 24, endpoint=False)
    fit = fit_contrast(phi, 0.5 * (1 - c * np.cos(phi - phi0)))
    assert 0.0 <= fit.contrast <= 1.0
    if fit.phase_defined:
        assert 0.0 <= fit.phase_offset < TWO_PI
