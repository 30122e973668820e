"""RF-sideband noise: force, heating rate, heating map and force-noise synthesis.

A voltage-noise component at Omega_RF + omega beats with the RF carrier and
produces an axial force at omega proportional to the gradient of E0^2. The
heating rate uses the one-sided force PSD convention

    ndot = S_F(omega_z) / (4 m hbar omega_z)

so that a white force with one-sided PSD S_F (N^2/Hz) raises the classical
energy at S_F / (4 m) per second. Noise is synthesised directly in the
secular frame with that PSD instead of simulating the 83 MHz micromotion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EV, HBAR, TWO_PI, UM, DomainError
from .potential import DEFAULT_MODEL
from .rng import make_rng


class SamplingError(ValueError):
    """Sample period too coarse for the requested noise band."""


@dataclass(frozen=True)
class NoiseSpec:
    """Voltage noise on the RF drive near a sideband.

    Parameters
    ----------
    fractional_psd : float
        One-sided S_V / V0^2 in 1/Hz, assumed flat across the band.
    band_center_offset : float
        Offset omega of the band centre from Omega_RF, in rad/s. Its magnitude
        is the centre of the resulting force band.
    bandwidth : float
        Full width of the flat band in Hz.
    rng_seed : int
        Seed for the noise realisation.
    """

    fractional_psd: float
    band_center_offset: float = TWO_PI * 3.6e6
    bandwidth: float = 150e3
    rng_seed: int = 0

    def __post_init__(self):
        if not self.fractional_psd >= 0 or not np.isfinite(self.fractional_psd):
            raise DomainError(f"fractional_psd must be finite and >= 0, got {self.fractional_psd!r}")
        if not self.bandwidth > 0:
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth!r}")
        lo, _ = self.band_hz
        if not lo > 0:
            raise DomainError("noise band must lie entirely at positive frequency")

    @property
    def center_hz(self):
        return abs(self.band_center_offset) / TWO_PI

    @property
    def band_hz(self):
        return self.center_hz - 0.5 * self.bandwidth, self.center_hz + 0.5 * self.bandwidth

    def check_drive(self, drive):
        if not abs(self.band_center_offset) < drive.angular_freq / 10:
            raise DomainError("noise offset must satisfy |omega| < Omega_RF / 10")

    def with_seed(self, seed):
        return NoiseSpec(self.fractional_psd, self.band_center_offset, self.bandwidth, int(seed))


def noise_force_prefactor_si(s, model, ion, drive):
    """Force per unit relative noise amplitude, -(q^2 / 2 m Omega^2) dE0^2/ds, in N."""
    return -(ion.charge**2 / (2.0 * ion.mass * drive.angular_freq**2)) * model.de0_squared_si(s, drive)


def noise_force_amplitude(s_um, xi_n, model=DEFAULT_MODEL, ion=None, drive=None):
    """Peak noise force (N, signed) for relative noise amplitude ``xi_n`` at ``s_um``."""
    ion = ion or model.reference_ion
    drive = drive or model.reference_drive
    model.check_extent(s_um)
    if not xi_n >= 0:
        raise DomainError(f"xi_n must be non-negative, got {xi_n!r}")
    out = noise_force_prefactor_si(np.asarray(s_um, dtype=float) * UM, model, ion, drive) * xi_n
    return out if np.ndim(out) else float(out)


def heating_rate_si(s, fractional_psd, omega_z, model, ion, drive):
    """Vectorised heating rate in quanta/s at positions ``s`` (m)."""
    grad = model.de0_squared_si(s, drive)
    pref = ion.charge**4 / (16.0 * ion.mass**3 * drive.angular_freq**4 * HBAR * omega_z)
    return pref * grad**2 * fractional_psd


def heating_rate(s_um, noise, omega_z, model=DEFAULT_MODEL, ion=None, drive=None):
    """Heating rate (quanta/s) for noise around Omega_RF + omega_z at ``s_um``.

    ``noise`` is a :class:`NoiseSpec` or a bare S_V/V0^2 value in 1/Hz.
    """
    ion = ion or model.reference_ion
    drive = drive or model.reference_drive
    model.check_extent(s_um)
    if not np.all(np.asarray(omega_z) > 0):
        raise DomainError("omega_z must be positive")
    psd = noise.fractional_psd if isinstance(noise, NoiseSpec) else float(noise)
    if isinstance(noise, NoiseSpec):
        noise.check_drive(drive)
    out = heating_rate_si(np.asarray(s_um, dtype=float) * UM, psd, omega_z, model, ion, drive)
    return out if np.ndim(out) else float(out)


def heating_map(s_grid_um, omega_z, scale=1.0, model=DEFAULT_MODEL, ion=None, drive=None):
    """Heating rate per unit voltage-noise PSD along the path.

    Parameters
    ----------
    s_grid_um : array_like
        Positions in um.
    omega_z : float or callable
        Axial angular frequency, either fixed or a function of position (um).
    scale : float
        Calibration factor applied to every point (1.4 reproduces the fitted
        curve of the original measurement).

    Returns
    -------
    dict
        ``s_um``, ``ratio`` (quanta/s per V^2/Hz) and ``phi_p_eV`` arrays.
    """
    ion = ion or model.reference_ion
    drive = drive or model.reference_drive
    s = np.atleast_1d(np.asarray(s_grid_um, dtype=float))
    if s.size == 0:
        raise DomainError("heating_map needs a non-empty position grid")
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale!r}")
    model.check_extent(s)
    w = np.asarray(omega_z(s) if callable(omega_z) else np.full_like(s, float(omega_z)), dtype=float)
    # S_V / V0^2 = 1 / V0^2 gives ndot per unit S_V
    ratio = scale * heating_rate_si(s * UM, 1.0 / drive.peak_voltage**2, w, model, ion, drive)
    phi = model.phi_si(s * UM, ion, drive) / EV
    return {"s_um": s, "ratio": ratio, "phi_p_eV": phi}


def band_limited_noise(n, dt, psd, band, rng, size=None):
    """Gaussian noise with a flat one-sided PSD ``psd`` inside ``band`` (Hz).

    Built in the frequency domain: every FFT bin inside the band gets
    independent normal quadratures with variance ``psd * df``. The record is
    periodic with period ``n * dt``.
    """
    shape = (n,) if size is None else (size, n)
    if psd == 0:
        return np.zeros(shape)
    freqs = np.fft.rfftfreq(n, dt)
    lo, hi = band
    if hi >= 0.5 / dt:
        raise SamplingError("noise band reaches the Nyquist frequency")
    sel = np.flatnonzero((freqs >= lo) & (freqs <= hi) & (freqs > 0))
    if sel.size == 0:
        raise SamplingError("record too short to resolve the noise band")
    df = 1.0 / (n * dt)
    sd = np.sqrt(psd * df)
    nb = (1,) if size is None else (size,)
    spec = np.zeros(nb + (freqs.size,), dtype=complex)
    re = rng.standard_normal(nb + (sel.size,))
    im = rng.standard_normal(nb + (sel.size,))
    spec[..., sel] = 0.5 * n * sd * (re - 1j * im)
    out = np.fft.irfft(spec, n=n, axis=-1)
    return out[0] if size is None else out


@dataclass(frozen=True)
class ForceNoiseSeries:
    sample_period: float
    samples: np.ndarray
    realized_psd: float
    band: tuple


def sample_force_noise(duration, sample_period, target, gradient_at, model=DEFAULT_MODEL,
                       ion=None, drive=None, rng=None):
    """Band-limited force noise for an ion held at ``gradient_at`` (um).

    The one-sided force PSD inside the band equals
    ``(q^2 dE0^2/ds / (2 m Omega^2))^2 * S_V/V0^2``. The band is the
    NoiseSpec band mapped to the secular frame.
    """
    ion = ion or model.reference_ion
    drive = drive or model.reference_drive
    if not duration > 0:
        raise DomainError("duration must be positive")
    lo, hi = target.band_hz
    if sample_period > 1.0 / (20.0 * hi):
        raise SamplingError(
            f"sample period {sample_period:.3g} s exceeds 1/(20 * {hi:.4g} Hz) for this band"
        )
    target.check_drive(drive)
    n = int(round(duration / sample_period))
    pref = float(noise_force_prefactor_si(float(gradient_at) * UM, model, ion, drive))
    rng = rng if rng is not None else make_rng(target.rng_seed)
    xi = band_limited_noise(n, sample_period, target.fractional_psd, (lo, hi), rng)
    return ForceNoiseSeries(sample_period, pref * xi, pref**2 * target.fractional_psd, (lo, hi))
