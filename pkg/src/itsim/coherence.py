"""Ramsey and spin-echo phase evolution of a qubit carried through a field gradient.

The transition frequency shifts with the local magnetic field, which varies
along the transport path. Pulses are ideal instantaneous rotations; their
durations only occupy time on the sequence timeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .constants import TWO_PI, UM, DomainError

PLACEHOLDER_DNU_DB = 1.0e10  # Hz/T, not a physical constant of any transition
DEFAULT_FIELD_T = 1.44e-3
EXTENT_UM = 1000.0
TRANSPORT_MODES = ("none", "second-half", "both-halves")


class SpecError(ValueError):
    """Sequence timing inconsistent with the requested transports."""


@dataclass(frozen=True)
class FieldShiftProfile:
    """Fractional field change dB/B along the path, linearly interpolated between knots.

    The default puts 0 at the E zone (-890 um) and ``fraction`` at the
    junction centre, continuing linearly beyond it.
    """

    fraction: float = 0.004
    base_field_t: float = DEFAULT_FIELD_T
    dnu_db_hz_per_t: float = PLACEHOLDER_DNU_DB
    zone_um: float = 890.0
    knots_um: tuple | None = None
    knot_fractions: tuple | None = None

    def __post_init__(self):
        if self.knots_um is None:
            object.__setattr__(self, "knots_um", (-self.zone_um, 0.0, self.zone_um))
            object.__setattr__(self, "knot_fractions", (0.0, self.fraction, 2.0 * self.fraction))
        k = np.asarray(self.knots_um, dtype=float)
        if self.knot_fractions is None or len(self.knot_fractions) != k.size or k.size < 2:
            raise DomainError("knots_um and knot_fractions must have equal length >= 2")
        if np.any(np.diff(k) <= 0):
            raise DomainError("knots_um must be strictly increasing")
        if not self.base_field_t > 0:
            raise DomainError("base field must be positive")

    def fractional_shift(self, s_um):
        return np.interp(s_um, self.knots_um, self.knot_fractions)


def detuning_at(s_um, profile=None):
    """Angular detuning 2 pi (dnu/dB) B (dB/B)(s) in rad/s."""
    profile = profile or FieldShiftProfile()
    s = np.asarray(s_um, dtype=float)
    if np.any(np.abs(s) > EXTENT_UM):
        raise DomainError(f"position outside +-{EXTENT_UM:g} um")
    out = TWO_PI * profile.dnu_db_hz_per_t * profile.base_field_t * profile.fractional_shift(s)
    return out if out.ndim else float(out)


def _simpson_converged(f, t0, t1, rtol, n0=64, max_doublings=20):
    n = n0
    prev = None
    for _ in range(max_doublings):
        t = np.linspace(t0, t1, n + 1)
        val = float(simpson(f(t), x=t))
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        if prev is not None and val == 0.0 and prev == 0.0:
            return 0.0
        prev, n = val, 2 * n
    raise RuntimeError("phase quadrature did not converge")


def accumulated_phase(source, profile=None, rtol=1e-6):
    """Phase (rad) picked up while following ``source``.

    ``source`` is a transport waveform (integrated segment by segment with
    step-halving until successive Simpson estimates agree to ``rtol``) or a
    recorded trajectory with ``times`` and ``positions_um`` (Simpson over its
    samples).
    """
    profile = profile or FieldShiftProfile()
    if hasattr(source, "segments"):
        total = 0.0
        for seg in source.segments:
            total += _simpson_converged(lambda t, seg=seg: detuning_at(seg.position(t) / UM, profile),
                                        seg.t0, seg.t1, rtol)
        return total
    if hasattr(source, "positions_um"):
        return float(simpson(detuning_at(source.positions_um, profile), x=source.times))
    raise DomainError("source must be a waveform or a recorded trajectory")


@dataclass(frozen=True)
class SequenceSpec:
    """Ramsey sequence: pi/2, wait T1, optional echo pi, wait T2, analysis pi/2 at phase phi."""

    t1: float = 280e-6
    t2: float = 280e-6
    echo: bool = True
    transports: str = "none"
    pi_pulse: float = 1e-6
    contrast_floor: float = 0.85

    def __post_init__(self):
        if self.transports not in TRANSPORT_MODES:
            raise SpecError(f"transports must be one of {TRANSPORT_MODES}")
        if not (self.t1 > 0 and self.t2 > 0 and self.pi_pulse >= 0):
            raise SpecError("free-precession times must be positive")
        if not 0 <= self.contrast_floor <= 1:
            raise SpecError("contrast_floor must lie in [0, 1]")

    @property
    def total_time(self):
        return self.t1 + self.t2 + (2.0 if self.echo else 1.0) * self.pi_pulse


def _rotation(theta, axis_phase):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    e = complex(math.cos(axis_phase), math.sin(axis_phase))
    return np.array([[c, -1j * s * e.conjugate()], [-1j * s * e, c]])


def _precession(phase):
    return np.array([[np.exp(-0.5j * phase), 0.0], [0.0, np.exp(0.5j * phase)]])


@dataclass(frozen=True)
class Fringe:
    phases: np.ndarray
    populations: np.ndarray
    net_phase: float
    half_phases: tuple
    contrast: float


def run_sequence(spec, waveform=None, profile=None, phases=None, n_phases=64, global_phase=0.0):
    """Simulate the interferometer and return P(phi) over the analysis-pulse phase grid.

    P is the upper-state population. With the echo pulse the net phase is
    (second-half phase) - (first-half phase); without it the two add. Loss of
    coherence enters only as the multiplicative ``contrast_floor``.
    ``global_phase`` is added to every pulse phase.
    """
    half = [0.0, 0.0]
    if spec.transports != "none":
        if waveform is None:
            raise SpecError("a transport waveform is needed when transports are enabled")
        if waveform.duration > min(spec.t1, spec.t2):
            raise SpecError(f"transport ({waveform.duration:.3g} s) longer than the free-precession window")
        phi_t = accumulated_phase(waveform, profile)
        half[1] = phi_t
        if spec.transports == "both-halves":
            half[0] = phi_t
    net = half[1] - half[0] if spec.echo else half[1] + half[0]
    if phases is None:
        phases = np.linspace(0.0, TWO_PI, int(n_phases), endpoint=False)
    phases = np.asarray(phases, dtype=float)

    psi0 = np.array([1.0, 0.0], dtype=complex)
    u = _precession(half[0]) @ _rotation(math.pi / 2, global_phase)
    if spec.echo:
        u = _precession(half[1]) @ _rotation(math.pi, global_phase) @ u
    else:
        u = _precession(half[1]) @ u
    mid = u @ psi0
    pop = np.empty(phases.size)
    for i, ph in enumerate(phases):
        psi = _rotation(math.pi / 2, ph + global_phase) @ mid
        pop[i] = abs(psi[1]) ** 2
    pop = 0.5 + spec.contrast_floor * (pop - 0.5)
    return Fringe(phases, pop, float(net), (float(half[0]), float(half[1])), spec.contrast_floor)


@dataclass(frozen=True)
class ContrastFit:
    contrast: float
    phase_offset: float
    mean: float
    phase_defined: bool = True


def fit_contrast(phases, populations):
    """Linear least-squares fit of P = A - (C/2) cos(phi - phi0).

    Returns contrast C clipped to [0, 1] and phi0 in [0, 2 pi). Flat data give
    C = 0 with ``phase_defined`` False.
    """
    phi = np.asarray(phases, dtype=float)
    p = np.asarray(populations, dtype=float)
    if phi.shape != p.shape or phi.size < 8:
        raise DomainError("need at least 8 (phi, P) samples")
    srt = np.sort(np.mod(phi, TWO_PI))
    gaps = np.diff(np.concatenate([srt, [srt[0] + TWO_PI]]))
    if gaps.max() > 0.5 * math.pi:
        raise DomainError("phase samples must cover a full period")
    a = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    (mean, b, c), *_ = np.linalg.lstsq(a, p, rcond=None)
    r = math.hypot(b, c)
    if r < 1e-12:
        return ContrastFit(0.0, float("nan"), float(mean), False)
    phi0 = math.atan2(-c, -b) % TWO_PI
    if phi0 >= TWO_PI:
        phi0 = 0.0
    return ContrastFit(min(2.0 * r, 1.0), phi0, float(mean))
