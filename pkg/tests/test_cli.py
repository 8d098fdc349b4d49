import csv
import json

import pytest
from hypothesis import given, strategies as st

from trapsmooth import __version__
from trapsmooth.cli import (CSV_COLUMNS, ExperimentConfig, build_config, main, parse_check,
                            parse_number, parse_scan, read_config_file)
from trapsmooth.errors import ConfigError


def _run(tmp_path, *args, name="out"):
    prefix = tmp_path / name
    code = main(["run", *args, "--out", str(prefix)])
    return code, prefix


def test_parse_number():
    assert parse_number("2^-4") == 0.0625
    assert parse_number(" 1e-3 ") == 1e-3
    for bad in ("abc", "2^", "inf", ""):
        with pytest.raises(ConfigError):
            parse_number(bad)


def test_parse_scan_forms():
    assert parse_scan("8:128:dyadic") == [8, 16, 32, 64, 128]
    assert parse_scan("2^-4:2^-6:dyadic") == [2 ** -4, 2 ** -5, 2 ** -6]
    assert parse_scan("1,2,5") == [1, 2, 5]
    assert parse_scan("0.5") == [0.5]
    assert parse_scan("1:100:3") == pytest.approx([1, 10, 100])
    for bad in ("8:100:dyadic", "8:128", "8:128:sometimes", "", "a,b", "0:8:dyadic", "1:2:1"):
        with pytest.raises(ConfigError):
            parse_scan(bad)


@given(st.integers(min_value=-12, max_value=12), st.integers(min_value=0, max_value=10))
def test_dyadic_scan_property(j, count):
    vals = parse_scan(f"2^{j}:2^{j + count}:dyadic")
    assert len(vals) == count + 1
    assert all(b == 2 * a for a, b in zip(vals, vals[1:]))


def test_parse_check():
    assert parse_check("slope=-0.667±0.1") == ("slope", -0.667, 0.1)
    assert parse_check("slope = 1.5 +- 0.02") == ("slope", 1.5, 0.02)
    assert parse_check("rho_ratio=2+/-2") == ("rho_ratio", 2.0, 2.0)
    for bad in ("slope", "slope=1", "=1±2", "slope=1±-1"):
        with pytest.raises(ConfigError):
            parse_check(bad)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(experiment="nope")
    with pytest.raises(ConfigError):
        ExperimentConfig(n=15)
    with pytest.raises(ConfigError):
        build_config({"experiment": "spectrum", "mystery": "1"})
    with pytest.raises(ConfigError):
        build_config({"experiment": "spectrum", "m": "2.5"})


def test_config_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# comment\nm = 3\nlambda = 8:64:dyadic\npsi-scale = 0.5\nplot = no\n")
    values = read_config_file(path)
    cfg = build_config({"experiment": "full-resolvent", **values})
    assert cfg.m == 3 and cfg.lam == "8:64:dyadic" and cfg.psi_scale == 0.5 and cfg.plot is False
    assert cfg.scan() == [8, 16, 32, 64]
    (tmp_path / "bad.cfg").write_text("m 3\n")
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "bad.cfg")
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "missing.cfg")


def test_lower_bound_report(tmp_path):
    code, prefix = _run(tmp_path, "lower-bound", "--m", "1")
    assert code == 0
    report = json.loads(prefix.with_suffix(".json").read_text())
    assert report["version"] == __version__
    assert report["config"]["m"] == 1
    assert report["fits"]["lambda_0"]["slope"] == pytest.approx(1.0, abs=0.02)
    assert all(r["module"] == "trapsmooth.spectral" for r in report["rows"])
    with open(prefix.with_suffix(".csv")) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 2 * 6


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("m = 3\nh = 2^-4:2^-7:dyadic\n")
    code, prefix = _run(tmp_path, "lower-bound", "--config", str(cfg), "--m", "2")
    assert code == 0
    report = json.loads(prefix.with_suffix(".json").read_text())
    assert report["config"]["m"] == 2 and report["config"]["h"] == "2^-4:2^-7:dyadic"


def test_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        code, prefix = _run(d, "quasimode", "--m", "2", "--h", "2^-4:2^-7:dyadic", "--plot")
        assert code == 0
        outs.append(prefix)
    for suffix in (".csv", ".svg"):
        assert outs[0].with_suffix(suffix).read_bytes() == outs[1].with_suffix(suffix).read_bytes()
    ja, jb = (json.loads(p.with_suffix(".json").read_text()) for p in outs)
    ja["config"].pop("out"), jb["config"].pop("out")
    assert ja == jb


def test_rerun_same_prefix_is_byte_identical(tmp_path):
    blobs = []
    for _ in range(2):
        code, prefix = _run(tmp_path, "saturation", "--k", "16,32")
        assert code == 0
        blobs.append((prefix.with_suffix(".csv").read_bytes(), prefix.with_suffix(".json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_exit_codes(tmp_path):
    assert _run(tmp_path, "lower-bound", "--h", "2^-4:0.3:dyadic")[0] == 1
    assert main(["run", "bogus"]) == 1
    assert main([]) == 1
    assert _run(tmp_path, "lower-bound", "--m", "2", "--check", "slope=1.0±0.01")[0] == 3
    assert _run(tmp_path, "lower-bound", "--m", "2", "--check", "slope=1.333±0.02")[0] == 0
    assert _run(tmp_path, "lower-bound", "--m", "2", "--check", "bogus_key=1±1")[0] == 1
    # grid too coarse for the resolution rule
    assert _run(tmp_path, "lower-bound", "--m", "2", "--n", "64")[0] == 2
    assert _run(tmp_path, "quasimode", "--m", "1")[0] == 1


def test_summary_check(tmp_path):
    code, _ = _run(tmp_path, "saturation", "--k", "16,32", "--check", "rho_ratio=1±0.01")
    assert code == 0


def test_microlocal_defaults(tmp_path):
    code, prefix = _run(tmp_path, "microlocal-resolvent", "--m", "2", "--z", "1.5",
                        "--h", "2^-3:2^-6:dyadic")
    assert code == 0
    report = json.loads(prefix.with_suffix(".json").read_text())
    assert report["summary"]["psi_scale"] == 0.25
    assert all(r["module"] == "trapsmooth.resolvent" for r in report["rows"])
