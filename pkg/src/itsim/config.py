"""Flat dotted-key configuration (TOML syntax) with per-key validation.

Every key carries its unit in its name. Unknown keys and out-of-range values
are rejected at load time with the offending key in the message.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .coherence import FieldShiftProfile, SequenceSpec
from .constants import SPECIES, TWO_PI, DomainError, RFDrive, dbc_to_fractional_psd
from .noise import NoiseSpec
from .potential import AxialFieldModel
from .transport.waveform import PATH_ALIASES, PATHS, GaussianBumpProfile

SEED_ENV = "ITSIM_SEED"

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_UNKNOWN_KEY, EXIT_CONSTRAINT, EXIT_RUNTIME = range(6)


class ConfigError(Exception):
    """Configuration problem carrying the process exit code to use."""

    def __init__(self, message, exit_code, key=None):
        super().__init__(message)
        self.exit_code = exit_code
        self.key = key


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _unit(v):
    return 0 <= v <= 1


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError
    return float(v)


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError
    return v


def _str(v):
    if not isinstance(v, str):
        raise TypeError
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError
    return v


def _floats(v):
    if not isinstance(v, (list, tuple)) or not v:
        raise TypeError
    return tuple(_float(x) for x in v)


def _path_ok(v):
    return v.lower() in PATH_ALIASES or v.upper() in PATHS


# key -> (default, coerce, check, constraint text)
FIELDS = {
    "ion.species": ("be9", _str, lambda v: v in SPECIES, f"one of {sorted(SPECIES)}"),
    "drive.v0_volts": (200.0, _float, _pos, "> 0"),
    "drive.rf_freq_hz": (83e6, _float, _pos, "> 0"),
    "drive.omega_rf_rad_s": (None, _float, _pos, "> 0"),
    "field-model.barrier_height_ev": (0.35, _float, _pos, "> 0"),
    "field-model.barrier_centers_um": ((-130.0, 130.0), _floats, lambda v: all(abs(c) > 0 for c in v),
                                       "non-empty list of non-zero positions"),
    "field-model.barrier_width_um": (60.0, _float, _pos, "> 0"),
    "field-model.extent_um": (1000.0, _float, _pos, "> 0"),
    "field-model.zone_um": (890.0, _float, _pos, "> 0"),
    "field-model.cutoff_start_sigma": (3.5, _float, _pos, "> 0"),
    "field-model.cutoff_end_sigma": (4.25, _float, _pos, "> 0"),
    "noise.psd_dbc": (-177.0, _float, lambda v: v < 0 or v == -math.inf, "< 0 dBc/Hz or -inf"),
    "noise.band_center_hz": (3.6e6, _float, _pos, "> 0"),
    "noise.bandwidth_hz": (150e3, _float, _pos, "> 0"),
    "noise.intrinsic_rate_per_s": (0.0, _float, _nonneg, ">= 0"),
    "waveform.path": ("E-C-E", _str, _path_ok, f"one of {sorted(PATHS)}"),
    "waveform.duration_us": (100.0, _float, _pos, "> 0"),
    "waveform.dac_rate_hz": (0.0, _float, _nonneg, ">= 0 (0 means continuous)"),
    "waveform.f_zone_hz": (3.6e6, _float, _pos, "> 0"),
    "waveform.f_center_hz": (5.7e6, _float, _pos, "> 0"),
    "waveform.bump_width_um": (200.0, _float, _pos, "> 0"),
    "waveform.dt_s": (1.0 / (100 * 5.7e6), _float, _pos, "> 0"),
    "thermometry.eta": (0.24, _float, lambda v: 0 < v < 1, "in (0, 1)"),
    "thermometry.omega0_hz": (100e3, _float, _pos, "> 0"),
    "thermometry.transition": ("blue", _str, lambda v: v in ("carrier", "blue", "red"), "carrier, blue or red"),
    "thermometry.n_max": (30, _int, lambda v: 0 <= v <= 30, "in [0, 30]"),
    "coherence.t1_us": (280.0, _float, _pos, "> 0"),
    "coherence.t2_us": (280.0, _float, _pos, "> 0"),
    "coherence.echo": (True, _bool, lambda v: True, "boolean"),
    "coherence.contrast_floor": (0.85, _float, _unit, "in [0, 1]"),
    "coherence.pi_pulse_us": (1.0, _float, _nonneg, ">= 0"),
    "coherence.field_fraction": (0.004, _float, lambda v: math.isfinite(v), "finite"),
    "coherence.base_field_t": (1.44e-3, _float, _pos, "> 0"),
    "coherence.dnu_db_hz_per_t": (1e10, _float, lambda v: math.isfinite(v), "finite"),
    "coherence.transport_us": (100.0, _float, _pos, "> 0"),
    "run.seed": (0, _int, lambda v: 0 <= v < 2**63, "integer in [0, 2^63)"),
    "run.seeds": (20, _int, lambda v: v >= 1, ">= 1"),
}


def _flatten(tree, prefix=""):
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


@dataclass(frozen=True)
class SimConfig:
    """Validated parameter set; ``values`` holds every key with defaults filled in."""

    values: dict = field(default_factory=dict)
    source: str | None = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self):
        return self.values["run.seed"]

    def with_overrides(self, kv):
        """Copy with dotted-key overrides (passed as a dict), re-validated."""
        raw = {k: v for k, v in self.values.items() if v is not None}
        raw.update({k: v for k, v in kv.items() if v is not None})
        return build_config(raw, self.source)

    def resolved(self):
        """Plain JSON-ready mapping of every key (provenance record)."""
        return {k: _jsonable(self.values[k]) for k in sorted(self.values)}

    def config_hash(self):
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    # -- domain objects ---------------------------------------------------

    @property
    def ion(self):
        return SPECIES[self["ion.species"]]

    @property
    def drive(self):
        w = self["drive.omega_rf_rad_s"]
        return RFDrive(self["drive.v0_volts"], w if w is not None else TWO_PI * self["drive.rf_freq_hz"])

    @property
    def model(self):
        ext = self["field-model.extent_um"]
        return AxialFieldModel(
            barrier_height_ev=self["field-model.barrier_height_ev"],
            barrier_centers_um=self["field-model.barrier_centers_um"],
            barrier_width_um=self["field-model.barrier_width_um"],
            extent_um=(-ext, ext),
            zone_um=self["field-model.zone_um"],
            cutoff_start=self["field-model.cutoff_start_sigma"],
            cutoff_end=self["field-model.cutoff_end_sigma"],
        )

    def noise(self, psd_dbc=None):
        level = self["noise.psd_dbc"] if psd_dbc is None else psd_dbc
        return NoiseSpec(dbc_to_fractional_psd(level), TWO_PI * self["noise.band_center_hz"],
                         self["noise.bandwidth_hz"], self.seed)

    @property
    def freq_profile(self):
        return GaussianBumpProfile(self["waveform.f_zone_hz"], self["waveform.f_center_hz"],
                                   self["waveform.bump_width_um"], self["field-model.zone_um"])

    @property
    def sequence(self):
        return SequenceSpec(t1=self["coherence.t1_us"] * 1e-6, t2=self["coherence.t2_us"] * 1e-6,
                            echo=self["coherence.echo"], pi_pulse=self["coherence.pi_pulse_us"] * 1e-6,
                            contrast_floor=self["coherence.contrast_floor"])

    @property
    def field_profile(self):
        return FieldShiftProfile(fraction=self["coherence.field_fraction"],
                                 base_field_t=self["coherence.base_field_t"],
                                 dnu_db_hz_per_t=self["coherence.dnu_db_hz_per_t"],
                                 zone_um=self["field-model.zone_um"])


def build_config(raw, source=None):
    """Validate a flat ``{dotted_key: value}`` mapping and fill defaults."""
    values = {}
    for key in raw:
        if key not in FIELDS:
            raise ConfigError(f"unknown config key '{key}'", EXIT_UNKNOWN_KEY, key)
    for key, (default, coerce, check, text) in FIELDS.items():
        if key not in raw:
            values[key] = default
            continue
        try:
            v = coerce(raw[key])
            ok = check(v)
        except (TypeError, ValueError):
            ok = False
        if not ok:
            raise ConfigError(f"config key '{key}' = {raw[key]!r} violates constraint: {text}",
                              EXIT_CONSTRAINT, key)
        values[key] = v

    w = values["drive.omega_rf_rad_s"]
    if w is not None:
        if "drive.rf_freq_hz" in raw and not math.isclose(w, TWO_PI * values["drive.rf_freq_hz"], rel_tol=1e-9):
            raise ConfigError("drive.omega_rf_rad_s and drive.rf_freq_hz disagree", EXIT_CONSTRAINT,
                              "drive.omega_rf_rad_s")
        values["drive.rf_freq_hz"] = w / TWO_PI
        values["drive.omega_rf_rad_s"] = None

    cfg = SimConfig(values, source)
    # cross-key invariants are enforced by the domain constructors
    for group, build in (("field-model", lambda: cfg.model), ("drive", lambda: cfg.drive),
                         ("noise", lambda: cfg.noise().check_drive(cfg.drive)),
                         ("waveform", lambda: cfg.freq_profile), ("coherence", lambda: cfg.sequence)):
        try:
            build()
        except (DomainError, ValueError) as exc:
            raise ConfigError(f"invalid {group} settings: {exc}", EXIT_CONSTRAINT, group) from None
    return cfg


def parse_config(path=None, env=None):
    """Load ``path`` (or defaults when ``None``) and apply the ITSIM_SEED override."""
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}", EXIT_MISSING)
        try:
            with p.open("rb") as fh:
                raw = _flatten(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}", EXIT_CONSTRAINT) from None
    env = os.environ if env is None else env
    if env.get(SEED_ENV, "").strip():
        try:
            raw["run.seed"] = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer", EXIT_CONSTRAINT, SEED_ENV) from None
    return build_config(raw, str(path) if path is not None else None)
