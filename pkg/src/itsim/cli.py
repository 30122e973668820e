"""``itsim`` command-line entry point.

Every subcommand writes ``<name>.csv`` and/or ``<name>.json`` plus
``manifest.json`` into ``--out``. Flags override config keys, and the
effective configuration is recorded in the manifest.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .coherence import SequenceSpec, fit_contrast, run_sequence
from .config import (
    EXIT_CONSTRAINT,
    EXIT_MISSING,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_USAGE,
    ConfigError,
    parse_config,
)
from .constants import TWO_PI, UM, DomainError
from .io import build_manifest, read_csv, write_csv, write_json
from .noise import heating_map
from .potential import potential_profile
from .thermometry import fit_nbar, flopping_curve, make_distribution
from .transport import (
    DEFAULT_DT,
    LinearTransportFamily,
    dac_resonance_scan,
    design_waveform,
    integrate_batch,
    integrate_motion,
)
from .validate import run_checks

ADIABATIC_THRESHOLD_QUANTA = 0.1
# flags whose values may start with '-' (e.g. -inf, -400)
_SIGNED_FLAGS = ("--noise-dbc", "--s-min-um", "--s-max-um")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid(lo, hi, step):
    n = int(round((hi - lo) / step)) + 1
    if n < 2 or hi <= lo:
        raise DomainError("grid needs s_max > s_min and at least two points")
    return lo + step * np.arange(n)


# -- subcommands -----------------------------------------------------------


def cmd_transport(cfg, args, out):
    wf = design_waveform(cfg["waveform.path"], cfg["waveform.duration_us"] * 1e-6,
                         dac_rate=cfg["waveform.dac_rate_hz"] or None, freq_profile=cfg.freq_profile,
                         zone_um=cfg["field-model.zone_um"])
    noise = cfg.noise()
    rate = cfg["noise.intrinsic_rate_per_s"] or None
    dt = cfg["waveform.dt_s"]
    stochastic = noise.fractional_psd > 0 or rate
    if stochastic:
        seeds = list(range(cfg["run.seeds"]))
        res = integrate_batch(wf, cfg.model, cfg.ion, cfg.drive, noise, seeds, rate, dt)
        gains = res.gain_quanta
    else:
        seeds = [0]
        gains = np.array([integrate_motion(wf, cfg.model, cfg.ion, cfg.drive, dt=dt, record_every=0).gain_quanta])
    files = ["transport.csv", "transport.json"]
    write_csv(out / "transport.csv", {"seed": np.array(seeds, dtype=float), "gain_quanta": gains})
    if args.trajectory:
        tr = integrate_motion(wf, cfg.model, cfg.ion, cfg.drive, noise if noise.fractional_psd > 0 else None,
                              rate, dt, record_every=args.record_every, seed_key=seeds[0])
        write_csv(out / "transport-trajectory.csv", {
            "t_s": tr.times, "s_um": tr.positions_um, "v_mps": tr.velocities, "energy_J": tr.energies,
        })
        files.append("transport-trajectory.csv")
    mean = float(np.mean(gains))
    stderr = float(np.std(gains, ddof=1) / math.sqrt(gains.size)) if gains.size > 1 else 0.0
    level = cfg["noise.psd_dbc"]
    summary = {
        "path": wf.path_label,
        "duration_s": wf.duration,
        "dac_rate_hz": wf.dac_rate or 0.0,
        "noise_dbc": level if math.isfinite(level) else repr(level),
        "seeds": len(seeds),
        "barrier_crossings": wf.barrier_crossings(cfg.model),
        "mean_gain_quanta": mean,
        "stderr": stderr,
        "adiabatic_threshold_quanta": ADIABATIC_THRESHOLD_QUANTA,
        "adiabatic": mean < ADIABATIC_THRESHOLD_QUANTA,
    }
    write_json(out / "transport.json", summary)
    return summary, files


def cmd_heating_map(cfg, args, out):
    s = _grid(args.s_min_um, args.s_max_um, args.step_um)
    hm = heating_map(s, cfg.freq_profile, args.scale, cfg.model, cfg.ion, cfg.drive)
    write_csv(out / "heating-map.csv", {
        "s_um": hm["s_um"], "ratio_quanta_per_s_per_V2Hz": hm["ratio"], "phi_p_eV": hm["phi_p_eV"],
    })
    i = int(np.argmax(hm["ratio"]))
    summary = {"points": int(s.size), "max_ratio": float(hm["ratio"][i]), "s_at_max_um": float(s[i])}
    write_json(out / "heating-map.json", summary)
    return summary, ["heating-map.csv", "heating-map.json"]


def cmd_dac_scan(cfg, args, out):
    rates = np.linspace(args.rate_min_hz, args.rate_max_hz, args.points)
    scan = dac_resonance_scan(rates, LinearTransportFamily(), tuple(args.stretch), cfg.model, cfg.ion,
                              cfg.drive, dt=min(cfg["waveform.dt_s"], DEFAULT_DT))
    n_st = len(scan.stretch_factors)
    write_csv(out / "dac-scan.csv", {
        "rate_hz": np.tile(rates, n_st),
        "stretch": np.repeat(np.array(scan.stretch_factors), rates.size),
        "gain_quanta": scan.gains.reshape(-1),
    })
    summary = {
        "stretch_factors": list(scan.stretch_factors),
        "maxima_hz": {f"{st:g}": scan.local_maxima(st).tolist() for st in scan.stretch_factors},
        "max_gain_quanta": float(scan.gains.max()),
    }
    write_json(out / "dac-scan.json", summary)
    return summary, ["dac-scan.csv", "dac-scan.json"]


def cmd_ramsey(cfg, args, out):
    seq = cfg.sequence
    mode = {0: "none", 1: "second-half", 2: "both-halves"}[args.transports]
    spec = SequenceSpec(seq.t1, seq.t2, seq.echo, mode, seq.pi_pulse, seq.contrast_floor)
    wf = design_waveform("E-C-E", cfg["coherence.transport_us"] * 1e-6, zone_um=cfg["field-model.zone_um"])
    fr = run_sequence(spec, wf, cfg.field_profile, n_phases=args.phase_points)
    fit = fit_contrast(fr.phases, fr.populations)
    write_csv(out / "ramsey.csv", {"phi_rad": fr.phases, "population": fr.populations})
    summary = {
        "transports": args.transports,
        "echo": spec.echo,
        "contrast": fit.contrast,
        "phase_offset_rad": fit.phase_offset if fit.phase_defined else None,
        "net_phase_rad": fr.net_phase,
    }
    write_json(out / "ramsey.json", summary)
    return summary, ["ramsey.csv", "ramsey.json"]


def _therm_params(cfg):
    return cfg["thermometry.eta"], TWO_PI * cfg["thermometry.omega0_hz"], cfg["thermometry.transition"]


def cmd_flop_synth(cfg, args, out):
    eta, w0, tr = _therm_params(cfg)
    dist = make_distribution(args.kind, args.nbar)
    if args.t_max_us is not None:
        t_max = args.t_max_us * 1e-6
    else:
        # ten flopping periods of the ground-state component
        base = w0 * (eta if tr != "carrier" else 1.0)
        t_max = 10 * TWO_PI / base
    t = np.linspace(0.0, t_max, args.points)
    curve = flopping_curve(dist, t, tr, eta, w0)
    write_csv(out / "flop-synth.csv", {"t_s": curve.times, "population": curve.populations})
    summary = {"kind": args.kind, "nbar": args.nbar, "transition": tr, "eta": eta,
               "omega0_hz": cfg["thermometry.omega0_hz"], "points": args.points, "n_max": dist.n_max}
    write_json(out / "flop-synth.json", summary)
    return summary, ["flop-synth.csv", "flop-synth.json"]


def cmd_flop_fit(cfg, args, out):
    path = Path(args.input)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}", EXIT_MISSING)
    t, p = read_csv(path, ["t_s", "population"])
    eta, w0, tr = _therm_params(cfg)
    fit = fit_nbar(t, p, args.assume, eta, w0, tr, n_max=cfg["thermometry.n_max"])
    summary = {"nbar": fit.nbar, "residual": fit.residual, "assumption": fit.assumption,
               "ill_conditioned": fit.ill_conditioned}
    write_json(out / "flop-fit.json", summary)
    return summary, ["flop-fit.json"]


def cmd_potential_profile(cfg, args, out):
    s = np.linspace(args.s_min_um, args.s_max_um, args.points)
    prof = potential_profile(s, cfg.model, cfg.drive)
    write_csv(out / "potential-profile.csv",
              {"s_um": prof["s_um"], "phi_p_eV": prof["phi_p_eV"], "dE0sq_dz": prof["dE0sq_dz"]})
    summary = {"points": int(s.size), "max_phi_p_ev": float(prof["phi_p_eV"].max())}
    write_json(out / "potential-profile.json", summary)
    return summary, ["potential-profile.csv", "potential-profile.json"]


def cmd_validate(cfg, args, out):
    results = run_checks(cfg)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}")
    summary = {
        "all_passed": all(r.passed for r in results),
        "checks": [{"name": r.name, "passed": r.passed, "values": r.values} for r in results],
    }
    write_json(out / "validate.json", summary)
    return summary, ["validate.json"]


# -- argument parsing ------------------------------------------------------


def build_parser():
    p = _Parser(prog="itsim", description="Ion transport through an RF junction: simulations and analysis.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat dotted-key TOML file")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, help="master seed; overrides ITSIM_SEED and run.seed")
    sub = p.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND", parser_class=_Parser)

    t = sub.add_parser("transport", parents=[common], help="energy gain of a junction transport")
    t.add_argument("--path", help="E-C-E, E-C-H-C-E or E-C-V-C-E (aliases ece, echce, ecvce)")
    t.add_argument("--duration-us", type=float)
    t.add_argument("--dac-rate-hz", type=float)
    t.add_argument("--continuous", action="store_true", help="ideal output, no DAC sampling")
    t.add_argument("--noise-dbc", type=float, help="ambient RF noise in dBc/Hz; -inf disables it")
    t.add_argument("--seeds", type=int, help="number of noise realisations")
    t.add_argument("--dt-s", type=float, help="integrator time step")
    t.add_argument("--trajectory", action="store_true", help="also write the first run's trajectory CSV")
    t.add_argument("--record-every", type=int, default=10, help="trajectory sampling stride in steps")
    t.set_defaults(func=cmd_transport)

    h = sub.add_parser("heating-map", parents=[common], help="heating rate per unit noise PSD along the path")
    h.add_argument("--s-min-um", type=float, default=-400.0)
    h.add_argument("--s-max-um", type=float, default=400.0)
    h.add_argument("--step-um", type=float, default=1.0)
    h.add_argument("--scale", type=float, default=1.0)
    h.set_defaults(func=cmd_heating_map)

    d = sub.add_parser("dac-scan", parents=[common], help="energy gain versus DAC update rate")
    d.add_argument("--rate-min-hz", type=float, default=0.25e6)
    d.add_argument("--rate-max-hz", type=float, default=0.55e6)
    d.add_argument("--points", type=int, default=601)
    d.add_argument("--stretch", type=float, nargs="+", default=[1.0])
    d.set_defaults(func=cmd_dac_scan)

    r = sub.add_parser("ramsey", parents=[common], help="spin-echo fringe with transports")
    r.add_argument("--transports", type=int, choices=(0, 1, 2), default=0)
    r.add_argument("--t1-us", type=float)
    r.add_argument("--phase-points", type=int, default=64)
    r.add_argument("--contrast-floor", type=float)
    r.add_argument("--no-echo", action="store_true")
    r.set_defaults(func=cmd_ramsey)

    fs = sub.add_parser("flop-synth", parents=[common], help="synthesise a Rabi-flopping curve")
    fs.add_argument("--kind", choices=("thermal", "coherent"), default="thermal")
    fs.add_argument("--nbar", type=float, default=5.0)
    fs.add_argument("--transition", choices=("carrier", "blue", "red"))
    fs.add_argument("--eta", type=float)
    fs.add_argument("--omega0-hz", type=float)
    fs.add_argument("--t-max-us", type=float)
    fs.add_argument("--points", type=int, default=200)
    fs.set_defaults(func=cmd_flop_synth)

    ff = sub.add_parser("flop-fit", parents=[common], help="fit nbar to a flopping curve CSV")
    ff.add_argument("--input", required=True, help="CSV with columns t_s, population")
    ff.add_argument("--assume", choices=("thermal", "coherent", "arbitrary"), default="thermal")
    ff.add_argument("--transition", choices=("carrier", "blue", "red"))
    ff.add_argument("--eta", type=float)
    ff.add_argument("--omega0-hz", type=float)
    ff.set_defaults(func=cmd_flop_fit)

    pp = sub.add_parser("potential-profile", parents=[common], help="pseudopotential and field gradient")
    pp.add_argument("--s-min-um", type=float, default=-1000.0)
    pp.add_argument("--s-max-um", type=float, default=1000.0)
    pp.add_argument("--points", type=int, default=2001)
    pp.set_defaults(func=cmd_potential_profile)

    v = sub.add_parser("validate", parents=[common], help="run the built-in invariant and oracle checks")
    v.set_defaults(func=cmd_validate)
    return p


def _overrides(args):
    """Map command-line flags onto config keys."""
    g = lambda name: getattr(args, name, None)  # noqa: E731
    kv = {
        "run.seed": g("seed"),
        "waveform.path": g("path"),
        "waveform.duration_us": g("duration_us"),
        "waveform.dac_rate_hz": 0.0 if g("continuous") else g("dac_rate_hz"),
        "noise.psd_dbc": g("noise_dbc"),
        "run.seeds": g("seeds"),
        "waveform.dt_s": g("dt_s"),
        "coherence.t1_us": g("t1_us"),
        "coherence.t2_us": g("t1_us"),
        "coherence.contrast_floor": g("contrast_floor"),
        "coherence.echo": False if g("no_echo") else None,
        "thermometry.eta": g("eta"),
        "thermometry.omega0_hz": g("omega0_hz"),
        "thermometry.transition": g("transition"),
    }
    return {k: v for k, v in kv.items() if v is not None}


def _join_signed(argv):
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _SIGNED_FLAGS and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def main(argv=None):
    argv = _join_signed(list(sys.argv[1:] if argv is None else argv))
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = parse_config(args.config).with_overrides(_overrides(args))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary, files = args.func(cfg, args, out)
        manifest = build_manifest(args.command, cfg, summary, time.perf_counter() - start, files)
        write_json(out / "manifest.json", manifest)
    except ConfigError as exc:
        print(f"itsim: {exc}", file=sys.stderr)
        return exc.exit_code
    except DomainError as exc:
        print(f"itsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except Exception as exc:
        print(f"itsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.command == "validate" and not summary["all_passed"]:
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
