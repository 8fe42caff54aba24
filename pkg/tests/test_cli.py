import json
import math

import pytest

import qmeas.cli as cli
from qmeas.cli import (
    ConfigError,
    build_parser,
    main,
    render_json,
    resolve_config,
)
from qmeas.hilbert import InvariantViolation

SQ2 = 1 / math.sqrt(2)


def resolve(argv):
    return resolve_config(build_parser().parse_args(argv))


# ------------------------------------------------------------ config merging

def test_defaults_applied():
    config, warnings = resolve(["simulate"])
    assert config.a1_re == pytest.approx(SQ2)
    assert config.n_events == 100_000
    assert config.rng_seed == 0
    assert config.output_format == "json"
    assert warnings == []


def test_flags_override_defaults():
    config, _ = resolve(
        ["simulate", "--a1", "0.6", "--a2", "0,0.8", "--events", "500",
         "--seed", "9", "--gamma", "1.5", "--format", "csv"]
    )
    assert config.a1 == pytest.approx(0.6)
    assert config.a2 == pytest.approx(0.8j)
    assert config.n_events == 500
    assert config.rng_seed == 9
    assert config.gamma == 1.5
    assert config.output_format == "csv"


def test_config_file_with_flag_override(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"a1_re": 1.0, "a2_re": 0.0, "n_events": 50, "rng_seed": 5}))
    config, _ = resolve(["simulate", "--config", str(path), "--events", "60"])
    assert config.a1 == pytest.approx(1.0)
    assert config.n_events == 60  # flag wins
    assert config.rng_seed == 5


def test_env_seed_is_a_fallback(monkeypatch, tmp_path):
    monkeypatch.setenv("QMEAS_SEED", "777")
    config, _ = resolve(["simulate"])
    assert config.rng_seed == 777

    # the config file beats the environment
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"rng_seed": 5}))
    config, _ = resolve(["simulate", "--config", str(path)])
    assert config.rng_seed == 5

    # a flag beats both
    config, _ = resolve(["simulate", "--seed", "3"])
    assert config.rng_seed == 3


def test_env_seed_must_be_integer(monkeypatch):
    monkeypatch.setenv("QMEAS_SEED", "not-a-number")
    with pytest.raises(ConfigError, match="QMEAS_SEED"):
        resolve(["simulate"])


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"a1_real": 1.0}))
    with pytest.raises(ConfigError, match="unknown config keys"):
        resolve(["simulate", "--config", str(path)])


def test_amplitudes_renormalized_with_warning():
    config, warnings = resolve(["simulate", "--a1", "0.70710683", "--a2", "0.70710678"])
    assert len(warnings) == 1 and "renormalized" in warnings[0]
    assert abs(config.a1) ** 2 + abs(config.a2) ** 2 == pytest.approx(1.0, abs=1e-15)


def test_amplitudes_rejected_beyond_limit():
    with pytest.raises(ConfigError, match="normalization"):
        resolve(["simulate", "--a1", "0.8", "--a2", "0.7"])


def test_amplitude_parse_errors():
    with pytest.raises(ConfigError, match="RE"):
        resolve(["simulate", "--a1", "x"])
    with pytest.raises(ConfigError, match="RE"):
        resolve(["simulate", "--a1", "1,2,3"])


def test_bad_env_overlap_rejected():
    with pytest.raises(ConfigError, match="env_overlap"):
        resolve(["simulate", "--env-overlap", "1.5"])


# ------------------------------------------------------------------ running

def run_main(argv, capsys):
    rc = main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_simulate_eigenstate_input(capsys):
    rc, out, err = run_main(
        ["simulate", "--a1", "1", "--a2", "0", "--events", "100", "--seed", "1"],
        capsys,
    )
    assert rc == 0
    report = json.loads(out)
    assert report["frequency"]["branches"][0]["frequency"]["value"] == 1.0
    assert report["frequency"]["branches"][0]["count"] == 100
    assert "finished" in err


def test_report_schema_is_stable(capsys):
    rc, out, _ = run_main(
        ["simulate", "--events", "10", "--seed", "1"], capsys
    )
    assert rc == 0
    report = json.loads(out)
    expected = {"schema", "command", "config", "frequency", "restriction", "overlaps",
                "purity", "interference", "channel", "nogo", "decoherence"}
    assert set(report) == expected
    for absent in ("overlaps", "purity", "interference", "channel", "nogo",
                   "decoherence"):
        assert report[absent] is None


def test_simulate_reports_are_byte_identical(tmp_path, capsys):
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    base = ["simulate", "--events", "5000", "--seed", "31415"]
    assert main(base + ["--out", str(first)]) == 0
    assert main(base + ["--out", str(second)]) == 0
    capsys.readouterr()
    assert first.read_bytes() == second.read_bytes()


def test_csv_output_has_metric_rows(capsys):
    rc, out, _ = run_main(
        ["simulate", "--events", "10", "--seed", "1", "--format", "csv"], capsys
    )
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "name,value,tolerance,passed"
    frequency_rows = [l for l in lines if l.startswith("frequency.branches[0].frequency")]
    assert len(frequency_rows) == 1
    name, value, tolerance, passed = frequency_rows[0].split(",")
    assert passed in ("true", "false")


def test_discriminate_symmetric_table_rows(capsys):
    rc, out, _ = run_main(["discriminate"], capsys)
    assert rc == 0
    report = json.loads(out)
    assert report["overlaps"]["system_side"]["K_S_x"]["value"] == pytest.approx(
        0.5, abs=1e-9
    )
    assert report["overlaps"]["detector_side"]["K_Q"]["value"] == pytest.approx(
        1.0, abs=1e-9
    )
    assert report["interference"]["MS"]["K_at_c_phase"]["value"] == pytest.approx(
        0.5, abs=1e-9
    )
    assert report["channel"]["K_S_z_eigenstate_pair"]["value"] == 0.0
    assert report["purity"]["mixture_r_p_at_gamma"]["passed"] is True


def test_nogo_symmetric_finds_nothing(capsys):
    rc, out, _ = run_main(["nogo", "--events", "10000", "--seed", "4"], capsys)
    assert rc == 0
    scopes = json.loads(out)["nogo"]["scopes"]
    assert set(scopes) == {"O", "D", "MS"}
    for verdict in scopes.values():
        assert verdict["found"] is False
        assert verdict["witness"] is None
        assert verdict["max_min_gap"]["passed"] is True


def test_decohere_command_reports_factor(capsys):
    rc, out, _ = run_main(
        ["decohere", "--n-env", "5", "--env-overlap", "0.5"], capsys
    )
    assert rc == 0
    section = json.loads(out)["decoherence"]
    assert section["predicted_factor"] == 0.03125
    assert section["coherence_factor"]["passed"] is True
    assert all(p["passed"] for p in section["branch_purities"])

    rc, out, _ = run_main(["decohere", "--n-env", "3", "--env-overlap", "1"], capsys)
    assert rc == 0
    section = json.loads(out)["decoherence"]
    assert section["predicted_factor"] == 1.0
    assert section["coherence_factor"]["value"] == pytest.approx(1.0, abs=1e-10)


def test_decohere_requires_environment(capsys):
    rc, _, err = run_main(["decohere", "--n-env", "0"], capsys)
    assert rc == 1
    assert "n_env" in err


def test_nogo_rejects_small_sample_count(capsys):
    rc, _, err = run_main(["nogo", "--events", "100"], capsys)
    assert rc == 1
    assert "10000" in err


def test_nogo_flags_degenerate_amplitudes(capsys):
    rc, out, err = run_main(
        ["nogo", "--a1", "1", "--a2", "0", "--events", "10000"], capsys
    )
    assert rc == 0
    assert "out of the no-go regime" in err
    report = json.loads(out)
    assert all(v["out_of_regime"] for v in report["nogo"]["scopes"].values())


def test_usage_error_exits_one(capsys):
    rc, _, err = run_main(["simulate", "--format", "xml"], capsys)
    assert rc == 1
    assert "error" in err


def test_missing_command_exits_one(capsys):
    rc, _, _ = run_main([], capsys)
    assert rc == 1


def test_invariant_violation_exits_two(capsys, monkeypatch):
    def broken(config, warn):
        raise InvariantViolation("synthetic failure")

    monkeypatch.setitem(cli._COMMANDS, "simulate", broken)
    rc, _, err = run_main(["simulate"], capsys)
    assert rc == 2
    assert "invariant violation" in err


# ------------------------------------------------------------- serialization

def test_render_json_float_formatting():
    text = render_json({"x": 0.1, "flag": True, "n": 3, "none": None})
    parsed = json.loads(text)
    assert parsed["x"] == 0.1
    assert "0.10000000000000001" in text  # 17 significant digits round-trip
    assert parsed["flag"] is True and parsed["n"] == 3 and parsed["none"] is None


def test_render_json_rejects_non_finite():
    with pytest.raises(InvariantViolation, match="non-finite"):
        render_json({"x": float("nan")})


def test_render_json_round_trips_report(capsys):
    rc, out, _ = run_main(["simulate", "--events", "10", "--seed", "2"], capsys)
    assert rc == 0
    report = json.loads(out)
    assert report["config"]["n_events"] == 10
