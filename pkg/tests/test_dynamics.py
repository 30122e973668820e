import math

import numpy as np
import pytest

from itsim.constants import BE9, EV, HBAR, PLANCK, TWO_PI, UM, DomainError
from itsim.noise import NoiseSpec
from itsim.potential import DEFAULT_MODEL, InfeasibleWellError
from itsim.transport import (
    ConstantFrequency,
    MotionalTrajectory,
    design_waveform,
    energy_gain_quanta,
    integrate_batch,
    integrate_family,
    integrate_motion,
    linear_transport,
    static_waveform,
    waypoint_waveform,
)

M, ION = DEFAULT_MODEL, BE9
W36 = TWO_PI * 3.6e6
COARSEST_DT = 1.0 / (50 * 5.7e6)


def test_static_well_stays_at_rest():
    tr = integrate_motion(static_waveform(-890.0, 1e-3), M, ION, dt=COARSEST_DT, record_every=0)
    assert tr.gain_quanta < 1e-6


def test_displaced_oscillator_conserves_energy_over_100_periods():
    d = 0.1
    tr = integrate_motion(static_waveform(-890.0, 100 / 3.6e6), M, ION, dt=7e-11, s0_um=-890.0 + d)
    expect = 0.5 * ION.mass * W36**2 * (d * UM) ** 2
    assert tr.energies[0] == pytest.approx(expect, rel=1e-9)
    assert np.max(np.abs(tr.energies / expect - 1)) < 1e-6


def test_displaced_oscillator_frequency():
    tr = integrate_motion(static_waveform(-890.0, 20 / 3.6e6), M, ION, dt=2e-10, s0_um=-889.9)
    x = tr.positions_um + 890.0
    crossings = tr.times[1:][np.diff(np.sign(x)) != 0]
    period = 2 * np.mean(np.diff(crossings))
    assert 1 / period == pytest.approx(3.6e6, rel=1e-3)


def test_sudden_jump_matches_displaced_oscillator():
    d = 0.1
    z = -890.0
    # the 1 ns leg lies between two 100 ns DAC ticks, so the well jumps in one update
    wf = waypoint_waveform([z, z, z + d, z + d], [5e-6, 1e-9, 5e-6], ConstantFrequency(3.6e6), dac_rate=1e7)
    tr = integrate_motion(wf, M, ION, record_every=0)
    expect = 0.5 * ION.mass * W36**2 * (d * UM) ** 2 / (HBAR * W36)
    assert tr.gain_quanta == pytest.approx(expect, rel=1e-2)


def test_adiabatic_round_trip_returns_to_start():
    tr = integrate_motion(design_waveform("E-C-E", 400e-6), M, ION, record_every=0)
    assert abs(tr.positions_um[-1] + 890.0) < 1e-3
    assert tr.gain_quanta < 1e-3


def test_dt_too_large():
    with pytest.raises(DomainError):
        integrate_motion(static_waveform(-890.0, 1e-6), M, ION, dt=1e-8)


def test_infeasible_well_propagates():
    wf = design_waveform("E-C-E", 100e-6, freq_profile=ConstantFrequency(3.6e6))
    with pytest.raises(InfeasibleWellError):
        integrate_motion(wf, M, ION)


def test_run_ends_exactly_at_end_time():
    wf = linear_transport(-890, -790, 50e-6, dac_rate=0.37e6)
    tr = integrate_motion(wf, M, ION, record_every=50)
    assert wf.end_time > wf.duration
    assert tr.times[-1] == pytest.approx(wf.end_time, rel=1e-12)
    assert tr.final_center_um == pytest.approx(-790.0)


def test_batch_is_deterministic_and_seed_sensitive():
    wf = static_waveform(-190.0, 20e-6, freq_hz=3.6e6)
    noise = NoiseSpec(1e-15, rng_seed=5)
    a = integrate_batch(wf, M, ION, noise=noise, seeds=[0, 1, 2])
    b = integrate_batch(wf, M, ION, noise=noise, seeds=[0, 1, 2])
    np.testing.assert_array_equal(a.final_energy, b.final_energy)
    assert len(set(a.final_energy.tolist())) == 3


def test_batch_streams_match_single_runs():
    wf = static_waveform(-190.0, 20e-6, freq_hz=3.6e6)
    noise = NoiseSpec(1e-15, rng_seed=5)
    batch = integrate_batch(wf, M, ION, noise=noise, seeds=[3, 9])
    for k, seed in enumerate([3, 9]):
        single = integrate_motion(wf, M, ION, noise=noise, seed_key=seed, record_every=0)
        assert single.final_energy == pytest.approx(batch.final_energy[k], rel=1e-12)


def test_family_matches_individual_runs():
    rates = [0.3e6, 0.36e6, 0.41e6]
    wfs = [linear_transport(-890, -790, 50e-6, dac_rate=r) for r in rates]
    fam = integrate_family(wfs, M, ION)
    for k, wf in enumerate(wfs):
        # the family keeps integrating in the held final well until the slowest member ends
        assert integrate_motion(wf, M, ION, record_every=0).gain_quanta == pytest.approx(fam.gain_quanta[k], rel=0.05)


def test_intrinsic_heating_rate():
    rate, duration = 2e5, 50e-6
    wf = static_waveform(-890.0, duration)
    res = integrate_batch(wf, M, ION, seeds=range(120), intrinsic_rate=rate)
    mean = res.gain_quanta.mean()
    stderr = res.gain_quanta.std(ddof=1) / math.sqrt(120)
    assert abs(mean - rate * duration) < 3.5 * stderr + 0.05 * rate * duration


def test_energy_gain_quanta_conversions():
    zero = MotionalTrajectory(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), 0.0, 0.0, W36, -890.0)
    assert energy_gain_quanta(zero) == 0.0
    e = 82e-9 * EV
    assert energy_gain_quanta(e) == pytest.approx(5.5, rel=5e-3)
    assert energy_gain_quanta(e, 7.2e6) == pytest.approx(0.5 * energy_gain_quanta(e), rel=1e-14)
    assert energy_gain_quanta(PLANCK * 3.6e6) == pytest.approx(1.0, rel=1e-14)
