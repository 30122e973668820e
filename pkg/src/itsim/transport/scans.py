"""DAC update-rate scans, update-rate optimisation and noise-budget estimates."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.signal import find_peaks

from ..constants import TWO_PI, UM, DomainError, dbc_to_fractional_psd
from ..noise import NoiseSpec, heating_rate_si
from ..potential import DEFAULT_MODEL
from .dynamics import DEFAULT_DT, integrate_batch, integrate_family, integrate_motion
from .waveform import F_ZONE_HZ, design_waveform, linear_transport

RATE_LIMITS_HZ = (0.05e6, 5e6)


@dataclass(frozen=True)
class LinearTransportFamily:
    """Fixed-frequency move far from the barriers, parametrised by DAC rate and stretch."""

    start_um: float = -890.0
    end_um: float = -790.0
    duration: float = 50e-6
    freq_hz: float = F_ZONE_HZ

    def build(self, dac_rate, stretch=1.0):
        return linear_transport(self.start_um, self.end_um, self.duration * stretch, self.freq_hz, dac_rate)


@dataclass(frozen=True)
class DacScan:
    rates: np.ndarray
    stretch_factors: tuple
    gains: np.ndarray  # (n_stretch, n_rates)

    def series(self, stretch=None):
        i = 0 if stretch is None else self.stretch_factors.index(stretch)
        return self.rates, self.gains[i]

    def local_maxima(self, stretch=None, rel_prominence=0.1):
        """Rates of interior peaks whose prominence exceeds ``rel_prominence`` of the scan maximum.

        The relative threshold drops the sinc-like side lobes that flank each
        resonance on fine grids.
        """
        rates, g = self.series(stretch)
        idx, _ = find_peaks(g, prominence=rel_prominence * float(np.max(g)))
        return rates[idx]

    def fwhm(self, center_hz, stretch=None):
        return resonance_fwhm(*self.series(stretch), center_hz)


def resonance_fwhm(rates, gains, center_hz):
    """Full width at half maximum of the peak nearest ``center_hz``.

    Half-maximum crossings are linearly interpolated between grid points.
    Raises if the peak runs off either end of the grid.
    """
    rates = np.asarray(rates, dtype=float)
    g = np.asarray(gains, dtype=float)
    near = np.argmin(np.abs(rates - center_hz))
    lo_i = max(near - 3, 0)
    p = lo_i + int(np.argmax(g[lo_i: near + 4]))
    half = 0.5 * g[p]
    i = p
    while i > 0 and g[i] > half:
        i -= 1
    j = p
    while j < len(g) - 1 and g[j] > half:
        j += 1
    if g[i] > half or g[j] > half:
        raise DomainError("resonance not bracketed by the scan grid")
    left = rates[i] + (half - g[i]) * (rates[i + 1] - rates[i]) / (g[i + 1] - g[i])
    right = rates[j - 1] + (half - g[j - 1]) * (rates[j] - rates[j - 1]) / (g[j] - g[j - 1])
    return float(right - left)


def _check_rates(rates):
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0:
        raise DomainError("rate list is empty")
    lo, hi = RATE_LIMITS_HZ
    if np.any(rates < lo) or np.any(rates > hi):
        raise DomainError(f"DAC rates must lie in [{lo:g}, {hi:g}] Hz")
    return rates


def dac_resonance_scan(rates, family=None, stretch_factors=(1.0,), model=None, ion=None, drive=None,
                       dt=DEFAULT_DT, continuous=False):
    """Noiseless energy gain of a DAC-sampled transport as a function of update rate.

    With ``continuous`` the same transports are run without sampling, giving
    the rate-independent baseline.
    """
    model = model or DEFAULT_MODEL
    ion = ion or model.reference_ion
    family = family or LinearTransportFamily()
    rates = _check_rates(rates)
    stretch_factors = tuple(float(x) for x in stretch_factors)
    gains = np.empty((len(stretch_factors), rates.size))
    for i, st in enumerate(stretch_factors):
        if continuous:
            tr = integrate_motion(family.build(None, st), model, ion, drive, dt=dt, record_every=0)
            gains[i] = tr.gain_quanta
        else:
            res = integrate_family([family.build(r, st) for r in rates], model, ion, drive, dt=dt)
            gains[i] = res.gain_quanta
    return DacScan(rates, stretch_factors, gains)


def optimize_update_rate(search_range, waveform, n_points=201, model=None, ion=None, drive=None,
                         noise=None, seeds=1, dt=DEFAULT_DT):
    """Grid search for the DAC rate minimising the mean energy gain.

    ``waveform`` is a :class:`TransportWaveform` (its ``dac_rate`` is replaced)
    or a family with a ``build(rate)`` method. Ties go to the lower rate.
    """
    model = model or DEFAULT_MODEL
    ion = ion or model.reference_ion
    lo, hi = (float(x) for x in search_range)
    if not hi >= lo:
        raise DomainError("search range is empty")
    grid = np.array([lo]) if hi == lo else np.linspace(lo, hi, int(n_points))
    _check_rates(grid)
    build = waveform.build if hasattr(waveform, "build") else (
        lambda r: dataclasses.replace(waveform, dac_rate=float(r))
    )
    if noise is None or noise.fractional_psd == 0:
        gains = integrate_family([build(r) for r in grid], model, ion, drive, dt=dt).gain_quanta
    else:
        gains = np.array([
            integrate_batch(build(r), model, ion, drive, noise, range(seeds), dt=dt).gain_quanta.mean()
            for r in grid
        ])
    return float(grid[int(np.argmin(gains))])


def ambient_noise_spec(waveform, fractional_psd, seed=0):
    """Flat noise band covering every axial frequency the waveform visits, with margin."""
    w = waveform.knots(2001)[:, 2] / TWO_PI
    lo, hi = 0.5 * w.min(), 1.5 * w.max()
    return NoiseSpec(fractional_psd, TWO_PI * 0.5 * (lo + hi), hi - lo, seed)


def expected_noise_gain(waveform, fractional_psd, model, ion, drive=None, n=20001):
    """Adiabatic prediction: time integral of the local heating rate along z0(t)."""
    drive = drive or model.reference_drive
    t = np.linspace(0.0, waveform.duration, n)
    z = waveform.position(t)
    rate = heating_rate_si(z, fractional_psd, waveform.freq_profile(z / UM), model, ion, drive)
    return float(simpson(rate, x=t))


@dataclass(frozen=True)
class PassEstimate:
    mean: float
    stderr: float
    passes: int
    per_seed: np.ndarray


def per_pass_gain_estimate(waveform, ambient_dbc, seeds=20, model=None, ion=None, drive=None,
                           dt=DEFAULT_DT, master_seed=0):
    """Monte-Carlo mean energy gain per barrier pass for ambient RF noise at ``ambient_dbc``."""
    model = model or DEFAULT_MODEL
    ion = ion or model.reference_ion
    passes = waveform.barrier_crossings(model)
    if passes < 1:
        raise DomainError("waveform never crosses an RF barrier")
    if seeds < 10:
        raise DomainError("per-pass estimate needs at least 10 seeds")
    psd = dbc_to_fractional_psd(ambient_dbc)
    noise = ambient_noise_spec(waveform, psd, master_seed)
    res = integrate_batch(waveform, model, ion, drive, noise, range(seeds), dt=dt)
    per = res.gain_quanta / passes
    return PassEstimate(float(per.mean()), float(per.std(ddof=1) / math.sqrt(seeds)), passes, per)


def leg_duration_for_crossing(crossing_time, model=None, path="E-C-E"):
    """Leg duration whose barrier pass (+-2 sigma window) lasts ``crossing_time``.

    Minimum-jerk legs are self-similar, so crossing time scales linearly with
    leg duration.
    """
    model = model or DEFAULT_MODEL
    ref = design_waveform(path, 100e-6)
    n_legs = len(ref.segments)
    per_leg = ref.duration / n_legs
    return per_leg * crossing_time / ref.crossing_time(model)
