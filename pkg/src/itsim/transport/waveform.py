"""Moving-well transport waveforms and zero-order-hold DAC sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..constants import TWO_PI, UM, DomainError

F_ZONE_HZ = 3.6e6
F_CENTER_HZ = 5.7e6

PATHS = {
    "E-C-E": ("E", "C", "E"),
    "E-C-H-C-E": ("E", "C", "H", "C", "E"),
    "E-C-V-C-E": ("E", "C", "V", "C", "E"),
}
PATH_ALIASES = {"ece": "E-C-E", "echce": "E-C-H-C-E", "ecvce": "E-C-V-C-E"}


def canonical_path(label):
    key = PATH_ALIASES.get(str(label).lower(), str(label).upper())
    if key not in PATHS:
        raise DomainError(f"unknown path label {label!r}; expected one of {sorted(PATHS)}")
    return key


@dataclass(frozen=True)
class GaussianBumpProfile:
    """Axial frequency as a function of well position.

    Rises from ``f_zone_hz`` at the zones (|s| = zone_um) to ``f_center_hz``
    at the junction centre along a Gaussian of width ``width_um``, rescaled so
    both endpoint values are exact. Outside the zones it stays at
    ``f_zone_hz``.
    """

    f_zone_hz: float = F_ZONE_HZ
    f_center_hz: float = F_CENTER_HZ
    width_um: float = 200.0
    zone_um: float = 890.0

    def __post_init__(self):
        if not (self.f_zone_hz > 0 and self.f_center_hz > 0 and self.width_um > 0 and self.zone_um > 0):
            raise DomainError("frequency profile parameters must be positive")

    def __call__(self, s_um):
        s = np.asarray(s_um, dtype=float)
        g_end = math.exp(-0.5 * (self.zone_um / self.width_um) ** 2)
        g = np.exp(-0.5 * (s / self.width_um) ** 2)
        frac = np.clip((g - g_end) / (1.0 - g_end), 0.0, 1.0)
        return TWO_PI * (self.f_zone_hz + (self.f_center_hz - self.f_zone_hz) * frac)


@dataclass(frozen=True)
class ConstantFrequency:
    f_hz: float = F_ZONE_HZ

    def __call__(self, s_um):
        return np.full(np.shape(s_um), TWO_PI * self.f_hz) if np.ndim(s_um) else TWO_PI * self.f_hz


def min_jerk(tau):
    """Minimum-jerk interpolant 10 t^3 - 15 t^4 + 6 t^5 on [0, 1]."""
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


@dataclass(frozen=True)
class Segment:
    """Well motion from ``z_start`` to ``z_end`` (m) over [t0, t1] (s)."""

    t0: float
    t1: float
    z_start: float
    z_end: float
    shape: str = "minjerk"

    def position(self, t):
        if self.shape == "hold" or self.z_start == self.z_end:
            return np.full(np.shape(t), self.z_end, dtype=float)
        tau = (np.asarray(t, dtype=float) - self.t0) / (self.t1 - self.t0)
        return self.z_start + (self.z_end - self.z_start) * min_jerk(tau)


@dataclass(frozen=True)
class TransportWaveform:
    """Schedule of well centre and axial frequency.

    ``dac_rate`` of ``None`` means continuous (ideal) output. With a finite
    rate the DAC emits a new sample at every tick ``n / dac_rate``; the tick
    that first reaches or passes ``duration`` outputs the final value, so the
    run ends at ``end_time >= duration`` with the well at its destination.
    """

    segments: tuple
    freq_profile: object = field(default_factory=GaussianBumpProfile)
    dac_rate: float | None = None
    path_label: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise DomainError("waveform needs at least one segment")
        t = 0.0
        for seg in self.segments:
            if abs(seg.t0 - t) > 1e-15 or not seg.t1 > seg.t0:
                raise DomainError("segments must be contiguous, time-sorted and of positive length")
            t = seg.t1
        if self.dac_rate is not None and not self.dac_rate > 0:
            raise DomainError(f"dac_rate must be positive, got {self.dac_rate!r}")

    @property
    def duration(self):
        return self.segments[-1].t1

    @property
    def continuous(self):
        return self.dac_rate is None

    @property
    def end_time(self):
        if self.continuous:
            return self.duration
        return self.n_ticks / self.dac_rate

    @property
    def n_ticks(self):
        """Index of the final tick (the one outputting the destination)."""
        return int(math.ceil(self.duration * self.dac_rate * (1.0 - 1e-12)))

    # -- smooth profile ---------------------------------------------------

    def position(self, t):
        """Smooth well centre in metres; held at the endpoints outside [0, duration]."""
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.segments[0].z_start, dtype=float)
        for seg in self.segments:
            m = t >= seg.t0
            if np.any(m):
                out = np.where(m, seg.position(t), out)
        return out if out.ndim else float(out)

    def position_um(self, t):
        return self.position(t) / UM

    def omega(self, t):
        return self.freq_profile(self.position_um(t))

    def knots(self, n=501):
        """Table of (t, z0_um, omega_z) at ``n`` evenly spaced times."""
        t = np.linspace(0.0, self.duration, n)
        z = self.position_um(t)
        return np.column_stack([t, z, self.freq_profile(z)])

    # -- DAC output -------------------------------------------------------

    def tick_times(self):
        if self.continuous:
            raise DomainError("continuous waveform has no DAC ticks")
        return np.arange(self.n_ticks + 1) / self.dac_rate

    def tick_positions(self):
        """Well centre (m) emitted at each tick."""
        return self.position(np.minimum(self.tick_times(), self.duration))

    def tick_index(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.floor(t * self.dac_rate + 1e-9).astype(np.int64)
        return np.clip(idx, 0, self.n_ticks)

    def sample(self, t):
        """Output (z0 in m, omega_z) at time ``t``, vectorised."""
        if self.continuous:
            z = self.position(t)
        else:
            z = self.tick_positions()[self.tick_index(t)]
        return z, self.freq_profile(np.asarray(z) / UM)

    def barrier_crossings(self, model, n=20001):
        """Number of times the smooth well centre passes a barrier peak."""
        z = self.position_um(np.linspace(0.0, self.duration, n))
        count = 0
        for c in model.barrier_centers_um:
            d = np.sign(z - c)
            d = d[d != 0]
            count += int(np.count_nonzero(np.diff(d)))
        return count

    def crossing_time(self, model, half_width_sigmas=2.0, n=200001):
        """Mean time per barrier pass spent within +-half_width of a barrier peak."""
        passes = self.barrier_crossings(model)
        if passes == 0:
            return 0.0
        t = np.linspace(0.0, self.duration, n)
        z = self.position_um(t)
        near = np.zeros(n, dtype=bool)
        for c in model.barrier_centers_um:
            near |= np.abs(z - c) <= half_width_sigmas * model.barrier_width_um
        return float(np.count_nonzero(near) * (t[1] - t[0]) / passes)


def sample_zoh(waveform, t):
    """Well centre (um) and omega_z held at the last DAC tick at time ``t``."""
    if np.any(np.asarray(t) < 0) or np.any(np.asarray(t) > waveform.end_time * (1 + 1e-12)):
        raise DomainError(f"t outside [0, {waveform.end_time}] s")
    z, w = waveform.sample(t)
    z = np.asarray(z) / UM
    return (z if z.ndim else float(z)), (w if np.ndim(w) else float(w))


def waypoint_waveform(waypoints_um, leg_durations, freq_profile=None, dac_rate=None, label="custom"):
    """Minimum-jerk legs between consecutive waypoints, stopping at each one."""
    if len(waypoints_um) < 2 or len(leg_durations) != len(waypoints_um) - 1:
        raise DomainError("need n waypoints and n-1 leg durations")
    segs, t = [], 0.0
    for (a, b), dt in zip(zip(waypoints_um[:-1], waypoints_um[1:]), leg_durations):
        if not dt > 0:
            raise DomainError("leg durations must be positive")
        shape = "hold" if a == b else "minjerk"
        segs.append(Segment(t, t + dt, a * UM, b * UM, shape))
        t += dt
    return TransportWaveform(tuple(segs), freq_profile or GaussianBumpProfile(), dac_rate, label)


def design_waveform(path_label, duration, dac_rate=None, freq_profile=None, leg_durations=None,
                    zone_um=890.0):
    """Named junction transport built from minimum-jerk legs through C.

    ``duration`` is split evenly across the legs unless ``leg_durations``
    (which must sum to ``duration``) is given. Each leg starts and ends at
    rest, so round trips are time-symmetric.
    """
    key = canonical_path(path_label)
    if not duration > 0:
        raise DomainError(f"duration must be positive, got {duration!r}")
    zones = {"E": -zone_um, "C": 0.0, "H": zone_um, "V": zone_um}
    points = [zones[z] for z in PATHS[key]]
    n_legs = len(points) - 1
    if leg_durations is None:
        leg_durations = [duration / n_legs] * n_legs
    elif len(leg_durations) != n_legs or not math.isclose(sum(leg_durations), duration, rel_tol=1e-9):
        raise DomainError("leg_durations must have one entry per leg and sum to duration")
    profile = freq_profile or GaussianBumpProfile(zone_um=zone_um)
    return waypoint_waveform(points, leg_durations, profile, dac_rate, key)


def static_waveform(z_um, duration, freq_hz=None, freq_profile=None, dac_rate=None):
    profile = freq_profile or (ConstantFrequency(freq_hz) if freq_hz else GaussianBumpProfile())
    seg = Segment(0.0, duration, z_um * UM, z_um * UM, "hold")
    return TransportWaveform((seg,), profile, dac_rate, "static")


def linear_transport(start_um, end_um, duration, freq_hz=F_ZONE_HZ, dac_rate=None):
    """Fixed-frequency minimum-jerk move along a straight stretch of the path."""
    seg = Segment(0.0, duration, start_um * UM, end_um * UM)
    return TransportWaveform((seg,), ConstantFrequency(freq_hz), dac_rate, "linear")
