"""Command-line contract: exit codes, serialization, determinism."""

import csv
import json

import pytest

from pimsner_lab.cli import RunConfig, _parse_n_range, main, run, serialize
from pimsner_lab.star_core import ConfigurationError
from pimsner_lab.presets import build_preset


def test_parse_n_range():
    assert _parse_n_range("2..5") == (2, 3, 4, 5)
    assert _parse_n_range("4") == (4,)
    with pytest.raises(ConfigurationError):
        _parse_n_range("5..2")
    with pytest.raises(ConfigurationError):
        _parse_n_range("abc")


def test_validate_exit_zero(tmp_path):
    out = tmp_path / "v.json"
    assert main(["validate", "--preset", "cuntz2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["pass"] is True
    assert doc["suites"]["validate"]["pass"] is True
    assert doc["tool_version"]


def test_unknown_preset_exit_two(capsys):
    assert main(["validate", "--preset", "nope"]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_preset_config_mutual_exclusion(tmp_path):
    assert main(["validate"]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text("{}")
    assert main(["validate", "--preset", "cuntz2", "--config", str(cfg)]) == 2


def test_bad_config_exit_two(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text('{"n": 2}')
    assert main(["validate", "--config", str(cfg)]) == 2


def test_corrupted_unitary_exit_one(tmp_path, capsys):
    """A single injected violation (U scaled by 2) flips exit to 1."""
    cfg = tmp_path / "bad_u.json"
    cfg.write_text(json.dumps({
        "block_dims": [1], "n": 2,
        "unitary": [[[[2, 0], [0, 0]], [[0, 0], [2, 0]]]],
        "alphas": [{"perm": [0]}, {"perm": [0]}],
    }))
    assert main(["validate", "--config", str(cfg)]) == 1
    assert "violation" in capsys.readouterr().err


def test_window_too_small_exit_two(capsys):
    assert main(["schur", "--preset", "cuntz2", "--N", "5", "--M", "3"]) == 2
    assert "window" in capsys.readouterr().err


def test_schur_csv_schema(tmp_path):
    out = tmp_path / "s.csv"
    code = main(["schur", "--preset", "crossed-z3", "--N", "1..3",
                 "--M", "5", "--band", "2", "--out", str(out)])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert rows, "empty Schur table"
    for row in rows:
        num, den = int(row["expected_num"]), int(row["expected_den"])
        assert abs(float(row["measured"]) - num / den) < 1e-9
        assert float(row["abs_err"]) < 1e-9
        assert row["sided"] == "two"
    # row count = sum over N of |generator pairs| x |representable offsets|
    want = sum(len(_offsets(r, s, 5))
               for _ in (1, 2, 3) for r in range(3) for s in range(3))
    assert len(rows) == want


def _offsets(r, s, hi):
    return [l for l in range(-hi - min(r, s), hi + 1)
            if -hi <= r + l <= hi and -hi <= s + l <= hi]


def test_empty_csv_has_header(tmp_path):
    """A bundle with no Schur rows still serializes to a valid CSV header."""
    out = tmp_path / "empty.csv"
    code = main(["validate", "--preset", "cuntz2", "--format", "csv",
                 "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == \
        "N,r,s,l,expected_num,expected_den,measured,abs_err,sided"
    assert len(text.splitlines()) == 1


def test_byte_determinism(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    args = ["schur", "--preset", "rotation-m2", "--N", "2..3", "--M", "5",
            "--seed", "9", "--format", "json"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_unwritable_out_exit_two():
    assert main(["validate", "--preset", "cuntz2",
                 "--out", "/nonexistent-dir/x.json"]) == 2


def test_run_rejects_unknown_command():
    cfg = RunConfig(spec=build_preset("cuntz2"))
    with pytest.raises(ConfigurationError):
        run("fnord", cfg)


def test_serialize_json_floats_17g(tmp_path):
    cfg = RunConfig(spec=build_preset("crossed-z3"), n_values=(2,),
                    window_m=4, band=1, seed=1)
    bundle = run("schur", cfg, created="2026-08-23")
    out = tmp_path / "t.json"
    serialize(bundle, "json", str(out))
    doc = json.loads(out.read_text())
    assert doc["created"] == "2026-08-23"
    assert doc["schur_table"]
    row = doc["schur_table"][0]
    assert isinstance(row["expected"], list) and len(row["expected"]) == 2
