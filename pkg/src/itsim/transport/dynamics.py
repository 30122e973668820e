"""Classical axial motion in a moving, possibly noisy, well.

The ion obeys ``m s'' = -dPhi_total/ds + F_N(t)`` where the control quadratic
is re-solved from the (held) waveform sample at every step. Integration uses
fixed-step velocity Verlet and is vectorised over a batch of independent
trajectories: either noise seeds sharing one waveform, or a family of DAC
waveforms run side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..constants import HBAR, PLANCK, TWO_PI, UM, DomainError
from ..noise import NoiseSpec, band_limited_noise
from ..potential import control_coefficients, well_energy_si
from ..rng import make_rng
from .waveform import F_CENTER_HZ, F_ZONE_HZ

DEFAULT_DT = 1.0 / (100.0 * F_CENTER_HZ)


@dataclass(frozen=True)
class MotionalTrajectory:
    """Sampled motion plus the final energy in the final well.

    ``positions_um`` and ``velocities`` are recorded every ``record_every``
    steps; ``final_energy`` (J) is kinetic plus potential energy relative to
    the bottom of the last well, and ``gain_quanta`` divides it by
    hbar * omega_z of that well.
    """

    times: np.ndarray
    positions_um: np.ndarray
    velocities: np.ndarray
    energies: np.ndarray
    final_energy: float
    gain_quanta: float
    final_omega: float
    final_center_um: float


@dataclass(frozen=True)
class BatchResult:
    final_energy: np.ndarray
    gain_quanta: np.ndarray
    final_position_um: np.ndarray
    final_velocity: np.ndarray
    final_omega: np.ndarray


def _step_count(end_time, dt):
    n = int(math.ceil(end_time / dt * (1.0 - 1e-12)))
    return max(n, 1), end_time / max(n, 1)


def _check_dt(dt, f_max):
    if not dt > 0:
        raise DomainError("dt must be positive")
    if dt > 1.0 / (50.0 * max(f_max, F_CENTER_HZ)) * (1 + 1e-12):
        raise DomainError(f"dt = {dt:.3g} s too large; need dt <= 1/(50 * {max(f_max, F_CENTER_HZ):.4g} Hz)")


class _SingleSchedule:
    """Per-step control coefficients for one waveform, precomputed on the grid."""

    def __init__(self, waveform, model, ion, drive, n, dt):
        t = np.arange(n + 1) * dt
        if waveform.continuous:
            z = waveform.position(t)
            self.w = waveform.freq_profile(z / UM)
            self.b, self.c = control_coefficients(z, self.w, model, ion, drive)
            self.final = (float(z[-1]), float(self.w[-1]), float(self.b[-1]), float(self.c[-1]))
        else:
            zt = waveform.tick_positions()
            wt = waveform.freq_profile(zt / UM)
            bt, ct = control_coefficients(zt, wt, model, ion, drive)
            idx = waveform.tick_index(t)
            self.b, self.c, self.w = bt[idx], ct[idx], wt[idx]
            self.final = (float(zt[-1]), float(wt[-1]), float(bt[-1]), float(ct[-1]))
        self.z0 = float(waveform.position(0.0))
        self.f_max = float(np.max(self.w)) / TWO_PI

    def __call__(self, k):
        return self.b[k], self.c[k]


class _FamilySchedule:
    """Per-element tick tables for a batch of DAC waveforms; gathered per step."""

    def __init__(self, waveforms, model, ion, drive, dt):
        if any(w.continuous for w in waveforms):
            raise DomainError("family integration needs finite DAC rates")
        self.rates = np.array([w.dac_rate for w in waveforms])
        self.last = np.array([w.n_ticks for w in waveforms])
        width = int(self.last.max()) + 1
        self.b = np.zeros((len(waveforms), width))
        self.c = np.zeros((len(waveforms), width))
        finals = []
        f_max = 0.0
        for i, wf in enumerate(waveforms):
            zt = wf.tick_positions()
            wt = wf.freq_profile(zt / UM)
            bt, ct = control_coefficients(zt, wt, model, ion, drive)
            self.b[i, : bt.size], self.c[i, : ct.size] = bt, ct
            self.b[i, bt.size:], self.c[i, ct.size:] = bt[-1], ct[-1]
            finals.append((zt[-1], wt[-1], bt[-1], ct[-1]))
            f_max = max(f_max, float(np.max(wt)) / TWO_PI)
        self.rows = np.arange(len(waveforms))
        self.final = tuple(np.array(col) for col in zip(*finals))
        self.z0 = np.array([float(w.position(0.0)) for w in waveforms])
        self.f_max = f_max
        self.dt = dt

    def __call__(self, k):
        idx = np.minimum(np.floor(k * self.dt * self.rates + 1e-9).astype(np.int64), self.last)
        return self.b[self.rows, idx], self.c[self.rows, idx]


def _verlet(model, ion, drive, schedule, s, v, n, dt, xi=None, extra=None, record_every=0):
    """Velocity-Verlet loop. ``xi`` (B, n+1) is relative RF noise, ``extra`` (B, n+1) a direct force."""
    m = ion.mass
    pscale = model.pseudo_scale(ion, drive)
    # force per unit xi per unit reference dPhi/ds: -(q^2/2m Omega^2) * field factor
    nf = -(ion.charge**2 / (2.0 * m * drive.angular_freq**2)) * model._field_factor(drive)

    def accel(k, s):
        b, c = schedule(k)
        d = model.dphi_si(s)
        f = -(pscale * d + b + 2.0 * c * s)
        if xi is not None:
            f = f + nf * d * xi[:, k]
        if extra is not None:
            f = f + extra[:, k]
        return f / m

    rec_t, rec_s, rec_v = [], [], []
    a = accel(0, s)
    half = 0.5 * dt
    for k in range(n):
        if record_every and k % record_every == 0:
            rec_t.append(k * dt)
            rec_s.append(np.array(s, copy=True))
            rec_v.append(np.array(v, copy=True))
        v = v + half * a
        s = s + dt * v
        a = accel(k + 1, s)
        v = v + half * a
    rec_t.append(n * dt)
    rec_s.append(np.array(s, copy=True))
    rec_v.append(np.array(v, copy=True))
    return s, v, (np.array(rec_t), np.array(rec_s), np.array(rec_v))


def _final_energy(s, v, final, model, ion, drive):
    zf, wf, bf, cf = final
    e = 0.5 * ion.mass * v**2 + well_energy_si(s, zf, bf, cf, model, ion, drive)
    return e, wf


def _noise_arrays(noise, intrinsic_rate, schedule, n, dt, count, ion, stream_keys):
    """Relative RF noise and intrinsic force noise, one row per trajectory."""
    xi = extra = None
    if noise is not None and noise.fractional_psd > 0:
        xi = np.stack([
            band_limited_noise(n + 1, dt, noise.fractional_psd, noise.band_hz, make_rng(noise.rng_seed, *key))
            for key in stream_keys
        ])
    if intrinsic_rate:
        band = noise.band_hz if noise is not None else (0.5 * F_ZONE_HZ, 1.5 * schedule.f_max)
        seed = noise.rng_seed if noise is not None else 0
        # S_F = 4 m hbar omega ndot keeps ndot fixed as omega_z(t) changes
        w = schedule.w
        unit = np.stack([
            band_limited_noise(n + 1, dt, 1.0, band, make_rng(seed, *key, 1))
            for key in stream_keys
        ])
        extra = unit * np.sqrt(4.0 * ion.mass * HBAR * w * intrinsic_rate)
    return xi, extra


def integrate_batch(waveform, model, ion, drive=None, noise=None, seeds=(0,), intrinsic_rate=None,
                    dt=DEFAULT_DT, chunk=64):
    """Final energies for one waveform under several independent noise streams.

    Stream ``k`` draws from ``make_rng(noise.rng_seed, seeds[k])``.
    """
    drive = drive or model.reference_drive
    if noise is not None:
        noise.check_drive(drive)
    n, dt = _step_count(waveform.end_time, dt)
    sched = _SingleSchedule(waveform, model, ion, drive, n, dt)
    _check_dt(dt, sched.f_max)
    seeds = list(seeds)
    out = []
    for lo in range(0, len(seeds), chunk):
        keys = [(sd,) for sd in seeds[lo: lo + chunk]]
        count = len(keys)
        xi, extra = _noise_arrays(noise, intrinsic_rate, sched, n, dt, count, ion, keys)
        s = np.full(count, sched.z0)
        v = np.zeros(count)
        s, v, _ = _verlet(model, ion, drive, sched, s, v, n, dt, xi, extra)
        e, wf = _final_energy(s, v, sched.final, model, ion, drive)
        out.append((e, s, v))
    e = np.concatenate([o[0] for o in out])
    s = np.concatenate([o[1] for o in out])
    v = np.concatenate([o[2] for o in out])
    wf = sched.final[1]
    return BatchResult(e, e / (HBAR * wf), s / UM, v, np.full(e.shape, wf))


def integrate_family(waveforms, model, ion, drive=None, dt=DEFAULT_DT):
    """Noiseless final energies for a batch of DAC waveforms integrated side by side.

    All members run to the latest ``end_time``; each holds its own final well
    afterwards, which leaves its energy unchanged.
    """
    drive = drive or model.reference_drive
    end = max(w.end_time for w in waveforms)
    n, dt = _step_count(end, dt)
    sched = _FamilySchedule(list(waveforms), model, ion, drive, dt)
    _check_dt(dt, sched.f_max)
    s, v, _ = _verlet(model, ion, drive, sched, sched.z0.copy(), np.zeros(len(waveforms)), n, dt)
    e, wf = _final_energy(s, v, sched.final, model, ion, drive)
    return BatchResult(e, e / (HBAR * wf), s / UM, v, wf)


def integrate_motion(waveform, model, ion, drive=None, noise=None, intrinsic_rate=None, dt=DEFAULT_DT,
                     s0_um=None, v0=0.0, record_every=1, seed_key=0):
    """Integrate one trajectory through ``waveform``.

    Parameters
    ----------
    noise : NoiseSpec, optional
        RF-sideband voltage noise; the resulting force follows the local
        E0^2 gradient at the ion's instantaneous position.
    intrinsic_rate : float, optional
        Position-independent background heating in quanta/s.
    dt : float
        Time step; rounded down so the run ends exactly at ``end_time``.
    s0_um, v0 :
        Initial position (defaults to the first well centre) and velocity.

    Returns
    -------
    MotionalTrajectory
    """
    drive = drive or model.reference_drive
    if noise is not None:
        noise.check_drive(drive)
    n, dt = _step_count(waveform.end_time, dt)
    sched = _SingleSchedule(waveform, model, ion, drive, n, dt)
    _check_dt(dt, sched.f_max)
    s = np.array([sched.z0 if s0_um is None else s0_um * UM])
    model.check_extent(s / UM)
    v = np.array([float(v0)])
    xi, extra = _noise_arrays(noise, intrinsic_rate, sched, n, dt, 1, ion, [(seed_key,)])
    s, v, (t, rs, rv) = _verlet(model, ion, drive, sched, s, v, n, dt, xi, extra, record_every)
    e, wf = _final_energy(s, v, sched.final, model, ion, drive)
    rs, rv = rs[:, 0], rv[:, 0]
    model.check_extent(rs / UM)
    idx = (np.round(t / dt)).astype(np.int64)
    zr = np.asarray(waveform.sample(t)[0], dtype=float)
    energies = 0.5 * ion.mass * rv**2 + well_energy_si(rs, zr, sched.b[idx], sched.c[idx], model, ion, drive)
    return MotionalTrajectory(
        times=t,
        positions_um=rs / UM,
        velocities=rv,
        energies=energies,
        final_energy=float(e[0]),
        gain_quanta=float(e[0] / (HBAR * wf)),
        final_omega=float(wf),
        final_center_um=sched.final[0] / UM,
    )


def energy_gain_quanta(traj, reference_freq=F_ZONE_HZ):
    """Final secular energy in units of h * reference_freq (3.6 MHz by default)."""
    e = traj.final_energy if isinstance(traj, MotionalTrajectory) else float(traj)
    return e / (PLANCK * reference_freq)
