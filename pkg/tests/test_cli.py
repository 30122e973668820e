import csv
import json
import math
import subprocess
import sys

import jsonschema
import pytest

from itsim.cli import main
from itsim.io import NonFiniteOutputError, output_schema, write_csv, write_json

SCHEMA = output_schema()


def _check_schema(payload, name):
    jsonschema.validate(payload, {"$ref": f"#/$defs/{name}", "$defs": SCHEMA["$defs"]})


def _run(tmp_path, *argv, sub="out"):
    out = tmp_path / sub
    code = main([argv[0], "--out", str(out), *argv[1:]])
    return code, out


def _rows(path):
    with path.open(encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def _all_finite(path):
    rows = _rows(path)
    return all(math.isfinite(float(v)) for r in rows[1:] for v in r)


FAST_CASES = [
    ("transport", ["--path", "ece", "--continuous", "--noise-dbc", "-inf"]),
    ("transport", ["--noise-dbc", "-167", "--seeds", "3", "--duration-us", "60"]),
    ("heating-map", ["--s-min-um", "-200", "--s-max-um", "200", "--step-um", "5"]),
    ("dac-scan", ["--rate-min-hz", "0.355e6", "--rate-max-hz", "0.365e6", "--points", "5", "--stretch", "1", "2"]),
    ("ramsey", ["--transports", "1"]),
    ("flop-synth", ["--nbar", "2"]),
    ("potential-profile", ["--points", "101"]),
]


@pytest.mark.parametrize("sub, flags", FAST_CASES, ids=[f"{c[0]}-{i}" for i, c in enumerate(FAST_CASES)])
def test_outputs_validate_and_are_finite(tmp_path, sub, flags):
    code, out = _run(tmp_path, sub, *flags)
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    _check_schema(manifest, "manifest")
    assert manifest["subcommand"] == sub
    payload = json.loads((out / f"{sub}.json").read_text(encoding="utf-8"))
    _check_schema(payload, sub)
    for f in manifest["outputs"]:
        assert (out / f).is_file()
        if f.endswith(".csv"):
            assert _all_finite(out / f)


def test_noiseless_continuous_transport_is_adiabatic(tmp_path):
    code, out = _run(tmp_path, "transport", "--path", "ece", "--continuous", "--noise-dbc", "-inf")
    assert code == 0
    res = json.loads((out / "transport.json").read_text())
    assert res["mean_gain_quanta"] < res["adiabatic_threshold_quanta"]
    assert res["adiabatic"] is True and res["seeds"] == 1


def test_transport_trajectory_columns(tmp_path):
    code, out = _run(tmp_path, "transport", "--continuous", "--noise-dbc", "-inf", "--trajectory",
                     "--record-every", "200")
    assert code == 0
    rows = _rows(out / "transport-trajectory.csv")
    assert rows[0] == ["t_s", "s_um", "v_mps", "energy_J"]
    assert float(rows[1][1]) == pytest.approx(-890.0, abs=1e-6)


def test_heating_map_null_at_barrier_centres(tmp_path):
    code, out = _run(tmp_path, "heating-map")
    assert code == 0
    rows = _rows(out / "heating-map.csv")
    assert rows[0] == ["s_um", "ratio_quanta_per_s_per_V2Hz", "phi_p_eV"]
    ratio = {float(r[0]): float(r[1]) for r in rows[1:]}
    assert ratio[-130.0] == 0.0 and ratio[130.0] == 0.0
    assert max(ratio.values()) > 0


def test_flop_synth_then_fit(tmp_path):
    code, out = _run(tmp_path, "flop-synth", "--nbar", "5")
    assert code == 0
    code, fit_out = _run(tmp_path, "flop-fit", "--input", str(out / "flop-synth.csv"), sub="fit")
    assert code == 0
    res = json.loads((fit_out / "flop-fit.json").read_text())
    _check_schema(res, "flop-fit")
    assert res["nbar"] == pytest.approx(5.0, rel=0.05)
    assert res["assumption"] == "thermal"


def test_ramsey_echo_cancels(tmp_path):
    code, out = _run(tmp_path, "ramsey", "--transports", "2")
    assert code == 0
    res = json.loads((out / "ramsey.json").read_text())
    assert abs(res["net_phase_rad"]) < 1e-3
    assert res["contrast"] == pytest.approx(0.85, abs=1e-6)
    assert _rows(out / "ramsey.csv")[0] == ["phi_rad", "population"]


def test_repeated_runs_are_byte_identical(tmp_path):
    flags = ["transport", "--noise-dbc", "-167", "--seeds", "3", "--duration-us", "60", "--seed", "9"]
    _, a = _run(tmp_path, *flags, sub="a")
    _, b = _run(tmp_path, *flags, sub="b")
    assert (a / "transport.csv").read_bytes() == (b / "transport.csv").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    ma.pop("wall_time_s"), mb.pop("wall_time_s")
    assert ma == mb


def test_seed_changes_noisy_result(tmp_path):
    flags = ["transport", "--noise-dbc", "-167", "--seeds", "3", "--duration-us", "60"]
    _, a = _run(tmp_path, *flags, "--seed", "1", sub="a")
    _, b = _run(tmp_path, *flags, "--seed", "2", sub="b")
    assert (a / "transport.csv").read_bytes() != (b / "transport.csv").read_bytes()


def test_env_seed_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("ITSIM_SEED", "42")
    _, out = _run(tmp_path, "ramsey", sub="env")
    assert json.loads((out / "manifest.json").read_text())["seed"] == 42
    _, out = _run(tmp_path, "ramsey", "--seed", "7", sub="flag")
    assert json.loads((out / "manifest.json").read_text())["seed"] == 7


def test_manifest_records_effective_config(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("coherence.contrast_floor = 0.9\n", encoding="utf-8")
    _, out = _run(tmp_path, "ramsey", "--config", str(cfg))
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["coherence.contrast_floor"] == 0.9
    assert m["config"]["drive.rf_freq_hz"] == 83e6


@pytest.mark.parametrize("text, code", [
    ("bogus.key = 1\n", 3),
    ("field-model.barrier_height_ev = -1\n", 4),
])
def test_config_exit_codes(tmp_path, capsys, text, code):
    cfg = tmp_path / "c.toml"
    cfg.write_text(text, encoding="utf-8")
    assert _run(tmp_path, "ramsey", "--config", str(cfg))[0] == code
    assert text.split(" ")[0] in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert _run(tmp_path, "ramsey", "--config", str(tmp_path / "nope.toml"))[0] == 2


def test_missing_input_exit_code(tmp_path):
    assert _run(tmp_path, "flop-fit", "--input", str(tmp_path / "nope.csv"))[0] == 2


def test_bad_flag_value_is_a_constraint_error(tmp_path):
    assert _run(tmp_path, "ramsey", "--contrast-floor", "1.5")[0] == 4


@pytest.mark.parametrize("argv", [["frobnicate"], [], ["ramsey", "--transports", "3"]])
def test_usage_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "itsim.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("transport", "heating-map", "dac-scan", "ramsey", "flop-synth", "flop-fit",
                "potential-profile", "validate"):
        assert sub in res.stdout


def test_writers_refuse_non_finite(tmp_path):
    with pytest.raises(NonFiniteOutputError):
        write_csv(tmp_path / "x.csv", {"a": [1.0, float("nan")]})
    with pytest.raises(NonFiniteOutputError):
        write_json(tmp_path / "x.json", {"a": float("inf")})


def test_csv_uses_17_significant_digits(tmp_path):
    write_csv(tmp_path / "x.csv", {"a": [1 / 3]})
    assert _rows(tmp_path / "x.csv")[1][0] == "0.33333333333333331"
