"""Built-in invariant and oracle checks run by ``itsim validate``.

Each check returns ``(passed, values)``; ``values`` holds the numbers the
verdict was based on so that they land in the run manifest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .coherence import SequenceSpec, accumulated_phase, fit_contrast, run_sequence
from .constants import TWO_PI, UM, RFDrive, quanta_to_energy
from .noise import band_limited_noise, heating_map, heating_rate
from .potential import e0_squared, field_sq_gradient
from .rng import make_rng
from .thermometry import fit_nbar, flopping_curve, genlaguerre, genlaguerre_sum, make_distribution
from .transport import design_waveform, integrate_motion, static_waveform


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    values: dict


def _unit_anchor(cfg):
    e = quanta_to_energy(5, 3.6e6, include_zero_point=True)
    return abs(e / 82e-9 - 1) < 5e-3, {"energy_ev": e}


def _heating_null(cfg):
    model, ion, drive = cfg.model, cfg.ion, cfg.drive
    peaks = [heating_rate(c, 1e-17, TWO_PI * 3.6e6, model, ion, drive) for c in model.barrier_centers_um]
    ok = all(p == 0.0 for p in peaks)
    vals = {"peak_rates": peaks}
    if model.is_symmetric():
        s = np.linspace(0.0, 400.0, 401)
        right = heating_map(s, TWO_PI * 3.6e6, model=model, ion=ion, drive=drive)["ratio"]
        left = heating_map(-s, TWO_PI * 3.6e6, model=model, ion=ion, drive=drive)["ratio"]
        asym = float(np.max(np.abs(right - left)) / np.max(np.abs(right)))
        ok = ok and asym <= 1e-12
        vals["asymmetry"] = asym
    return ok, vals


def _heating_scaling(cfg):
    model, ion, drive = cfg.model, cfg.ion, cfg.drive
    s, w = model.barrier_centers_um[0] - 60.0, TWO_PI * 3.6e6
    base = heating_rate(s, 1e-17, w, model, ion, drive)
    doubled = heating_rate(s, 2e-17, w, model, ion, drive)
    slow = RFDrive(drive.peak_voltage, drive.angular_freq / 2)
    halved = heating_rate(s, 1e-17, w, model, ion, slow)
    r_psd, r_rf = doubled / base, halved / base
    return abs(r_psd / 2 - 1) < 1e-12 and abs(r_rf / 16 - 1) < 1e-12, {"psd_ratio": r_psd, "rf_ratio": r_rf}


def _gradient_fd(cfg):
    model, drive = cfg.model, cfg.drive
    worst = 0.0
    for s in (-300.0, -190.0, -100.0, -40.0, 70.0, 200.0):
        h = 1e-3
        fd = (e0_squared(s + h, model, drive) - e0_squared(s - h, model, drive)) / (2 * h * UM)
        an = field_sq_gradient(s, model, None, drive)
        worst = max(worst, abs(fd - an) / abs(an))
    return worst < 1e-6, {"max_rel_error": worst}


def _laguerre(cfg):
    worst = 0.0
    for n in (0, 1, 2, 10, 50, 100):
        for a in (0, 1):
            for x in (0.01, 0.0576, 0.25):
                r, e = genlaguerre(n, a, x), float(genlaguerre_sum(n, a, x))
                worst = max(worst, abs(r - e) / max(abs(e), 1e-300))
    return worst < 1e-10, {"max_rel_error": worst}


def _noise_psd(cfg):
    rng = make_rng(cfg.seed, 101)
    dt, n, psd, band = 1e-8, 2**18, 1e-12, (3.5e6, 3.7e6)
    x = band_limited_noise(n, dt, psd, band, rng)
    f, p = signal.welch(x, fs=1 / dt, nperseg=2**13)
    inb = (f > band[0] + 5e4) & (f < band[1] - 5e4)
    ratio = float(np.mean(p[inb]) / psd)
    return abs(ratio - 1) < 0.1, {"psd_ratio": ratio}


def _thermometry(cfg):
    eta, w0 = cfg["thermometry.eta"], TWO_PI * cfg["thermometry.omega0_hz"]
    tr = cfg["thermometry.transition"]
    t = np.linspace(0, 12 * TWO_PI / (w0 * eta), 200) if tr != "carrier" else np.linspace(0, 12 * TWO_PI / w0, 200)
    curve = flopping_curve(make_distribution("thermal", 5.0), t, tr, eta, w0)
    est = fit_nbar(t, curve.populations, "thermal", eta, w0, tr).nbar
    return abs(est / 5.0 - 1) < 0.05, {"nbar_fit": est}


def _echo(cfg):
    spec, prof = cfg.sequence, cfg.field_profile
    wf = design_waveform("E-C-E", cfg["coherence.transport_us"] * 1e-6)
    both = run_sequence(SequenceSpec(spec.t1, spec.t2, True, "both-halves", spec.pi_pulse, spec.contrast_floor),
                        wf, prof)
    one = run_sequence(SequenceSpec(spec.t1, spec.t2, True, "second-half", spec.pi_pulse, spec.contrast_floor),
                       wf, prof)
    quad = accumulated_phase(wf, prof)
    fit = fit_contrast(one.phases, one.populations)
    ok = abs(both.net_phase) < 1e-3 and abs(one.net_phase - quad) <= 0.01 * abs(quad)
    ok = ok and abs(fit.contrast - spec.contrast_floor) < 1e-6
    return ok, {"net_phase_both": both.net_phase, "net_phase_one": one.net_phase, "quadrature": quad,
                "contrast": fit.contrast}


def _adiabatic(cfg):
    wf = design_waveform("E-C-E", 100e-6, freq_profile=cfg.freq_profile)
    tr = integrate_motion(wf, cfg.model, cfg.ion, cfg.drive, record_every=0)
    return tr.gain_quanta < 0.1, {"gain_quanta": tr.gain_quanta}


def _energy_conservation(cfg):
    z = -cfg.model.zone_um
    wf = static_waveform(z, 2e-6, freq_profile=cfg.freq_profile)
    # Verlet energy error scales as (omega dt)^2, so a pointwise 1e-6 bound needs a fine step
    tr = integrate_motion(wf, cfg.model, cfg.ion, cfg.drive, dt=5e-11, s0_um=z + 0.5, record_every=10)
    drift = float(np.max(np.abs(tr.energies / tr.energies[0] - 1)))
    return drift < 1e-6, {"max_rel_drift": drift}


def _zoh_limit(cfg):
    cont = design_waveform("E-C-E", 100e-6)
    fast = design_waveform("E-C-E", 100e-6, dac_rate=1e9)
    t = np.linspace(0, 100e-6, 1001)
    dev = float(np.max(np.abs(fast.sample(t)[0] - cont.sample(t)[0])) / UM)
    return dev < 1e-2, {"max_deviation_um": dev}


CHECKS = (
    ("unit_anchor_82_nev", _unit_anchor),
    ("heating_null_and_symmetry", _heating_null),
    ("heating_rate_scaling", _heating_scaling),
    ("field_gradient_finite_difference", _gradient_fd),
    ("laguerre_recurrence_vs_sum", _laguerre),
    ("noise_psd_welch", _noise_psd),
    ("thermometry_roundtrip", _thermometry),
    ("spin_echo_cancellation", _echo),
    ("adiabatic_transport", _adiabatic),
    ("energy_conservation_static_well", _energy_conservation),
    ("zoh_fast_rate_limit", _zoh_limit),
)


def run_checks(cfg):
    out = []
    for name, fn in CHECKS:
        try:
            ok, vals = fn(cfg)
        except Exception as exc:  # a crashing check is a failed check
            ok, vals = False, {"error": f"{type(exc).__name__}: {exc}"}
        out.append(CheckResult(name, bool(ok), {k: _plain(v) for k, v in vals.items()}))
    return out


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v
