"""Axial pseudopotential along the transport path and the moving-well solver.

The RF field is described by a sum of Gaussian barriers, one per junction leg,
calibrated as a pseudopotential height at a reference ion and drive. The
field itself, E0^2(s), is what stays fixed when the ion species or drive is
changed; the pseudopotential for any other ion/drive follows from
``Phi_p = q^2 E0^2 / (4 m Omega^2)`` (the time average of cos^2 is 1/2).

Each Gaussian is multiplied by a septic smoothstep window that takes it to
exactly zero between ``cutoff_start`` and ``cutoff_end`` (in units of the
width). With the default +-130 um / 60 um geometry the window closes before
the neighbouring barrier, so the gradient at every barrier peak is an exact
floating-point zero.

Positions passed to the public helpers are in micrometres; the ``*_si``
methods on :class:`AxialFieldModel` take metres and return SI values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import BE9, DEFAULT_DRIVE, EV, UM, DomainError, IonSpecies, RFDrive


class InfeasibleWellError(ValueError):
    """Requested axial curvature cannot be produced at the given position."""

    def __init__(self, position_um, omega_z, curvature_needed):
        self.position_um = position_um
        self.omega_z = omega_z
        super().__init__(
            f"infeasible well at s = {position_um:.6g} um: pseudopotential curvature "
            f"{curvature_needed:.4g} N/m exceeds m*omega_z^2 for omega_z/2pi = "
            f"{omega_z / (2 * np.pi):.6g} Hz"
        )


def _smoothstep7(u):
    # value, first and second derivative of 35u^4 - 84u^5 + 70u^6 - 20u^7 on [0, 1]
    u = np.clip(u, 0.0, 1.0)
    v = 1.0 - u
    s = u**4 * (35.0 - 84.0 * u + 70.0 * u**2 - 20.0 * u**3)
    ds = 140.0 * u**3 * v**3
    d2s = 420.0 * u**2 * v**2 * (1.0 - 2.0 * u)
    return s, ds, d2s


@dataclass(frozen=True)
class AxialFieldModel:
    """Pseudopotential profile along a 1-D path through the junction.

    ``s = 0`` is the junction centre C; the experiment zone E sits at
    ``-zone_um`` and the far zones (H or V) at ``+zone_um``.
    """

    barrier_height_ev: float = 0.35
    barrier_centers_um: tuple = (-130.0, 130.0)
    barrier_width_um: float = 60.0
    extent_um: tuple = (-1000.0, 1000.0)
    zone_um: float = 890.0
    cutoff_start: float = 3.5
    cutoff_end: float = 4.25
    reference_ion: IonSpecies = BE9
    reference_drive: RFDrive = field(default=DEFAULT_DRIVE)

    def __post_init__(self):
        object.__setattr__(self, "barrier_centers_um", tuple(float(c) for c in self.barrier_centers_um))
        object.__setattr__(self, "extent_um", tuple(float(e) for e in self.extent_um))
        if not self.barrier_height_ev > 0:
            raise DomainError(f"barrier_height_ev must be positive, got {self.barrier_height_ev!r}")
        if not self.barrier_width_um > 0:
            raise DomainError(f"barrier_width_um must be positive, got {self.barrier_width_um!r}")
        if not 0 < self.cutoff_start < self.cutoff_end:
            raise DomainError("need 0 < cutoff_start < cutoff_end")
        lo, hi = self.extent_um
        if not lo < -self.zone_um < 0 < self.zone_um < hi:
            raise DomainError("extent must strictly contain both zones at +-zone_um and C at 0")
        if not self.barrier_centers_um:
            raise DomainError("at least one barrier is required")
        for c in self.barrier_centers_um:
            if not 0 < abs(c) < self.zone_um:
                raise DomainError(f"barrier center {c} um must lie strictly between C and a zone")

    # -- geometry helpers -------------------------------------------------

    @property
    def zone_positions_um(self):
        return {"E": -self.zone_um, "C": 0.0, "H": self.zone_um, "V": self.zone_um}

    def check_extent(self, s_um):
        s = np.asarray(s_um, dtype=float)
        lo, hi = self.extent_um
        if np.any(~np.isfinite(s)) or np.any(s < lo) or np.any(s > hi):
            raise DomainError(f"position outside path extent [{lo}, {hi}] um")

    def is_symmetric(self):
        centers = sorted(self.barrier_centers_um)
        return np.allclose(centers, sorted(-c for c in centers), rtol=0, atol=0)

    def pseudo_scale(self, ion=None, drive=None):
        """Ratio of Phi_p for (ion, drive) to Phi_p at the reference calibration."""
        ion = ion or self.reference_ion
        drive = drive or self.reference_drive
        ref_i, ref_d = self.reference_ion, self.reference_drive
        return (
            (ion.charge / ref_i.charge) ** 2
            * (ref_i.mass / ion.mass)
            * (ref_d.angular_freq / drive.angular_freq) ** 2
            * (drive.peak_voltage / ref_d.peak_voltage) ** 2
        )

    # -- SI evaluation ----------------------------------------------------

    def profile_si(self, s, ion=None, drive=None, order=2):
        """Phi_p and its first ``order`` derivatives at ``s`` (m), in J, J/m, J/m^2."""
        s = np.asarray(s, dtype=float)
        sigma = self.barrier_width_um * UM
        r0, r1 = self.cutoff_start * sigma, self.cutoff_end * sigma
        height = self.barrier_height_ev * EV * self.pseudo_scale(ion, drive)
        phi = np.zeros_like(s)
        d1 = np.zeros_like(s)
        d2 = np.zeros_like(s)
        for c in self.barrier_centers_um:
            x = s - c * UM
            ax = np.abs(x)
            inside = ax < r1
            g = np.exp(-0.5 * (x / sigma) ** 2)
            sm, dsm, d2sm = _smoothstep7((ax - r0) / (r1 - r0))
            w = np.where(inside, 1.0 - sm, 0.0)
            dw = np.where(inside, -dsm * np.sign(x) / (r1 - r0), 0.0)
            d2w = np.where(inside, -d2sm / (r1 - r0) ** 2, 0.0)
            g1 = -x / sigma**2 * g
            phi = phi + height * g * w
            if order >= 1:
                d1 = d1 + height * (g1 * w + g * dw)
            if order >= 2:
                g2 = (x**2 / sigma**4 - 1.0 / sigma**2) * g
                d2 = d2 + height * (g2 * w + 2.0 * g1 * dw + g * d2w)
        return phi, d1, d2

    def phi_si(self, s, ion=None, drive=None):
        return self.profile_si(s, ion, drive, order=0)[0]

    def dphi_si(self, s, ion=None, drive=None):
        # hot path of the integrator: skips barriers the ions are nowhere near
        s = np.asarray(s, dtype=float)
        sigma = self.barrier_width_um * UM
        r0, r1 = self.cutoff_start * sigma, self.cutoff_end * sigma
        height = self.barrier_height_ev * EV * self.pseudo_scale(ion, drive)
        out = np.zeros_like(s)
        for c in self.barrier_centers_um:
            x = s - c * UM
            ax = np.abs(x)
            if np.all(ax >= r1):
                continue
            g = np.exp(-0.5 * (x / sigma) ** 2)
            term = -x / sigma**2 * g
            if np.any(ax > r0):
                sm, dsm, _ = _smoothstep7((ax - r0) / (r1 - r0))
                inside = ax < r1
                w = np.where(inside, 1.0 - sm, 0.0)
                dw = np.where(inside, -dsm * np.sign(x) / (r1 - r0), 0.0)
                term = term * w + g * dw
            out = out + height * term
        return out

    def d2phi_si(self, s, ion=None, drive=None):
        return self.profile_si(s, ion, drive, order=2)[2]

    def e0_squared_si(self, s, drive=None):
        """E0^2(s) in V^2/m^2; depends on the drive voltage but not on the ion."""
        return self._field_factor(drive) * self.phi_si(s)

    def de0_squared_si(self, s, drive=None):
        """d/ds E0^2(s) in V^2/m^3."""
        return self._field_factor(drive) * self.dphi_si(s)

    def _field_factor(self, drive=None):
        # E0^2 = 4 m Omega^2 Phi_p / q^2 at the reference calibration, scaled with V0^2
        drive = drive or self.reference_drive
        ref_i, ref_d = self.reference_ion, self.reference_drive
        return (
            4.0 * ref_i.mass * ref_d.angular_freq**2 / ref_i.charge**2
            * (drive.peak_voltage / ref_d.peak_voltage) ** 2
        )


DEFAULT_MODEL = AxialFieldModel()


def pseudopotential_at(s_um, model=DEFAULT_MODEL, ion=None, drive=None):
    """Pseudopotential in eV at path position ``s_um`` (um)."""
    model.check_extent(s_um)
    out = model.phi_si(np.asarray(s_um, dtype=float) * UM, ion, drive) / EV
    return out if np.ndim(out) else float(out)


def e0_squared(s_um, model=DEFAULT_MODEL, drive=None):
    model.check_extent(s_um)
    out = model.e0_squared_si(np.asarray(s_um, dtype=float) * UM, drive)
    return out if np.ndim(out) else float(out)


def field_sq_gradient(s_um, model=DEFAULT_MODEL, ion=None, drive=None):
    """Analytic d/ds of E0^2 at ``s_um``, in V^2/m^3.

    ``ion`` is accepted for symmetry with the other field helpers; the RF field
    is a property of the electrodes and drive only.
    """
    model.check_extent(s_um)
    out = model.de0_squared_si(np.asarray(s_um, dtype=float) * UM, drive)
    return out if np.ndim(out) else float(out)


def potential_profile(s_grid_um, model=DEFAULT_MODEL, drive=None):
    """Columns for the ``potential-profile`` export: s_um, phi_p_eV, dE0sq_dz."""
    s = np.asarray(s_grid_um, dtype=float)
    return {
        "s_um": s,
        "phi_p_eV": np.asarray(pseudopotential_at(s, model, None, drive), dtype=float),
        "dE0sq_dz": np.asarray(field_sq_gradient(s, model, None, drive), dtype=float),
    }


@dataclass(frozen=True)
class ControlSolution:
    """Quadratic control potential a + b*s + c*s^2 (SI: J, J/m, J/m^2, s in m).

    Together with the pseudopotential it places a stationary point at
    ``center`` with curvature ``m * omega_z**2``. ``a`` is chosen so the total
    potential is zero at the well centre.
    """

    offset: float
    linear: float
    quadratic: float
    center: float
    omega_z: float
    ion: IonSpecies = BE9
    drive: RFDrive = DEFAULT_DRIVE

    @property
    def center_um(self):
        return self.center / UM

    def in_ev_um(self):
        """(a [eV], b [eV/um], c [eV/um^2]) for reporting."""
        return self.offset / EV, self.linear * UM / EV, self.quadratic * UM**2 / EV


def control_coefficients(z0, omega_z, model, ion, drive=None):
    """Vectorised (b, c) for well centres ``z0`` (m) and frequencies ``omega_z``.

    Raises :class:`InfeasibleWellError` naming the first offending position.
    """
    z0 = np.asarray(z0, dtype=float)
    omega_z = np.asarray(omega_z, dtype=float)
    _, d1, d2 = model.profile_si(z0, ion, drive, order=2)
    target = ion.mass * omega_z**2
    bad = ~(target > d2)
    if np.any(bad):
        i = np.flatnonzero(np.ravel(bad))[0]
        raise InfeasibleWellError(
            float(np.ravel(z0 + 0 * omega_z)[i] / UM),
            float(np.ravel(omega_z + 0 * z0)[i]),
            float(np.ravel(d2 + 0 * omega_z)[i]),
        )
    c = 0.5 * (target - d2)
    b = -d1 - 2.0 * c * z0
    return b, c


def solve_control(z0_um, omega_z, model=DEFAULT_MODEL, ion=BE9, drive=None):
    """Quadratic control potential giving a well at ``z0_um`` with frequency ``omega_z``.

    Higher derivatives of the pseudopotential are left in place, so wells on a
    barrier shoulder are anharmonic.
    """
    model.check_extent(z0_um)
    if not omega_z > 0:
        raise DomainError(f"omega_z must be positive, got {omega_z!r}")
    drive = drive or model.reference_drive
    z0 = float(z0_um) * UM
    b, c = control_coefficients(z0, omega_z, model, ion, drive)
    b, c = float(b), float(c)
    a = -float(model.phi_si(z0, ion, drive)) - b * z0 - c * z0**2
    return ControlSolution(a, b, c, z0, float(omega_z), ion, drive)


def well_energy_si(s, z0, b, c, model, ion, drive=None):
    """Total potential at ``s`` relative to its value at the well centre ``z0`` (J).

    Written as a difference so that large linear/quadratic terms cancel
    analytically instead of numerically.
    """
    dphi = model.phi_si(s, ion, drive) - model.phi_si(z0, ion, drive)
    return dphi + (s - z0) * (b + c * (s + z0))


def total_axial_potential(s_um, ctrl, model=DEFAULT_MODEL):
    """Pseudopotential plus control quadratic at ``s_um``, in eV (zero at the well centre)."""
    model.check_extent(s_um)
    s = np.asarray(s_um, dtype=float) * UM
    out = well_energy_si(s, ctrl.center, ctrl.linear, ctrl.quadratic, model, ctrl.ion, ctrl.drive) / EV
    return out if np.ndim(out) else float(out)
