import csv
import json
import math
import os
import shutil
from pathlib import Path

import numpy as np
import pytest

from hillspec import cli, harness
from hillspec import potential as pot
from hillspec.cli import RunConfig, UsageError, main

GOLDEN = Path(__file__).parent / "golden"
REGEN = os.environ.get("HILLSPEC_REGEN_GOLDEN") == "1"
PI2 = math.pi ** 2


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, q in {"zero": pot.zero(), "const3": pot.constant(3.0), "cos": pot.cos2pi(),
                    "sin": pot.sin2pi()}.items():
        paths[name] = tmp_path / f"{name}.json"
        q.save(paths[name])
    return paths


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        rows = list(csv.reader(fh))
    return header, rows[0], rows[1:]


def assert_matches_golden(path, name, rtol=1e-9, atol=1e-9):
    gold = GOLDEN / name
    if REGEN:
        shutil.copy(path, gold)
    h1, c1, r1 = read_csv(path)
    h2, c2, r2 = read_csv(gold)
    assert h1 == h2 and c1 == c2 and len(r1) == len(r2)
    for a, b in zip(r1, r2):
        for x, y in zip(a, b):
            try:
                fx, fy = float(x), float(y)
            except ValueError:
                assert x == y
                continue
            if math.isinf(fy) or math.isnan(fy):
                assert x == y
            else:
                assert abs(fx - fy) <= atol + rtol * abs(fy), (name, x, y)


def test_header_line_format():
    hdr = harness.make_header(pot.zero(), harness.default_region(pot.zero()), harness.DEFAULT_CONFIG)
    line = cli.header_line(hdr)
    assert line.startswith("# hillspec ")
    assert "config_hash=" in line and "tolerances=" in line and "rel_tol=1e-10" in line


def test_spectrum_free_golden(files, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["spectrum", "--potential", str(files["zero"]), "--tags", "P,AP", "--re", "-1..170",
               "--im", "-1..1", "--output-dir", str(out)])
    assert rc == 0
    assert_matches_golden(out / "spectrum_P.csv", "spectrum_P.csv", atol=1e-8)
    assert_matches_golden(out / "spectrum_AP.csv", "spectrum_AP.csv", atol=1e-8)
    _, cols, rows = read_csv(out / "spectrum_P.csv")
    assert cols == cli.SPECTRUM_COLUMNS
    mus = sorted(float(r[1]) for r in rows)
    np.testing.assert_allclose(mus, [0.0, 4 * PI2, 16 * PI2], atol=1e-8)
    assert [r[4] for r in rows] == ["1", "2", "2"]


def test_spectrum_constant_shift(files, tmp_path):
    out = tmp_path / "c"
    assert main(["spectrum", "--potential", str(files["const3"]), "--tags", "D", "--re", "4..100",
                 "--im", "-1..1", "--output-dir", str(out)]) == 0
    _, _, rows = read_csv(out / "spectrum_D.csv")
    np.testing.assert_allclose(sorted(float(r[1]) for r in rows), PI2 * np.arange(1, 4) ** 2 + 3, atol=1e-8)


def test_spectrum_json_format(files, tmp_path):
    out = tmp_path / "j"
    assert main(["spectrum", "--potential", str(files["zero"]), "--tags", "D", "--re", "1..50",
                 "--im", "-1..1", "--output-dir", str(out), "--format", "json"]) == 0
    d = json.loads((out / "spectrum.json").read_text())
    assert set(d) == {"header", "spectra"}
    assert [round(r["re_mu"] / PI2) for r in d["spectra"]["D"]] == [1, 4]


def test_missing_file_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["spectrum", "--potential", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_malformed_potential_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "constant", "params": {}}))
    assert main(["check", str(bad)]) == 2
    assert "params.value" in capsys.readouterr().err


def test_bad_tag_and_region_exit_2(files):
    assert main(["spectrum", "--potential", str(files["zero"]), "--tags", "X"]) == 2
    assert main(["spectrum", "--potential", str(files["zero"]), "--re", "5..1"]) == 2
    assert main(["spectrum", "--potential", str(files["zero"]), "--rel-tol", "0.5"]) == 2


def test_numerical_failure_exit_3(files, tmp_path, capsys):
    rc = main(["spectrum", "--potential", str(files["zero"]), "--tags", "D", "--re", "1e30..2e30",
               "--im", "-1..1", "--output-dir", str(tmp_path)])
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err


def test_discriminant_free_golden(files, tmp_path):
    out = tmp_path / "d"
    assert main(["discriminant", "--potential", str(files["zero"]), "--re", "0..100", "--n", "21",
                 "--map-n", "5", "--output-dir", str(out)]) == 0
    assert_matches_golden(out / "discriminant_trace.csv", "discriminant_trace.csv")
    assert_matches_golden(out / "discriminant_map.csv", "discriminant_map.csv", rtol=1e-8, atol=1e-8)
    _, cols, rows = read_csv(out / "discriminant_trace.csv")
    assert cols == ["re_mu", "re_delta", "im_delta"]
    mu = np.array([float(r[0]) for r in rows])
    np.testing.assert_allclose([float(r[1]) for r in rows], 2 * np.cos(np.sqrt(mu)), atol=1e-9)


def test_discriminant_constant_is_shifted_free(files, tmp_path):
    out = tmp_path / "d3"
    assert main(["discriminant", "--potential", str(files["const3"]), "--re", "3..103", "--n", "11",
                 "--map-n", "3", "--output-dir", str(out)]) == 0
    _, _, rows = read_csv(out / "discriminant_trace.csv")
    mu = np.array([float(r[0]) for r in rows])
    np.testing.assert_allclose([float(r[1]) for r in rows], 2 * np.cos(np.sqrt(mu - 3)), atol=1e-9)


def test_discriminant_degenerate_segment(files):
    assert main(["discriminant", "--potential", str(files["zero"]), "--re", "5..5"]) == 2


def test_check_free_golden(files, tmp_path, capsys):
    out = tmp_path / "check.json"
    assert main(["check", "--potential", str(files["zero"]), "-o", str(out)]) == 0
    d = json.loads(out.read_text())
    gold = GOLDEN / "check_zero.json"
    if REGEN:
        shutil.copy(out, gold)
    assert d == json.loads(gold.read_text())
    for key in ("residual_B", "residual_BB", "residual_sym_half", "residual_sym_unit"):
        assert d[key] == 0.0
    assert all(d["verdicts"].values())


def test_check_positional_sine(files, capsys):
    assert main(["check", str(files["sin"])]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["verdicts"]["sym_half"] and not d["verdicts"]["sym_unit"]


def test_construct_then_check(tmp_path, capsys):
    out = tmp_path / "bfam.json"
    assert main(["construct", "--q2", "poly:16,-4", "--extension", "half_period", "-o", str(out)]) == 0
    spec = json.loads(out.read_text())
    assert spec["kind"] == "b_family" and spec["comment"].startswith("hillspec ")
    capsys.readouterr()
    assert main(["check", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["residual_B"] < 1e-10


def test_construct_explicit_tail_needs_data(tmp_path):
    assert main(["construct", "--q2", "poly:16,-4", "--extension", "explicit_tail",
                 "-o", str(tmp_path / "x.json")]) == 2


def test_verify_free_golden(files, tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(harness, "__version__", "golden")
    out = tmp_path / "v.json"
    assert main(["verify", "--potential", str(files["zero"]), "--re", "-5..100", "--im", "-2..2",
                 "-o", str(out)]) == 0
    d = json.loads(out.read_text())
    gold = GOLDEN / "verify_zero.json"
    if REGEN:
        shutil.copy(out, gold)
    g = json.loads(gold.read_text())
    assert d["header"] == g["header"]
    assert d["verdicts"] == g["verdicts"]
    assert set(d) == set(g)
    assert len(d["doubleness"]) == len(g["doubleness"])
    for a, b in zip(d["doubleness"], g["doubleness"]):
        assert abs(complex(*a["mu"]) - complex(*b["mu"])) < 1e-8
    assert "theorem_1_3" in capsys.readouterr().out


def test_verify_violated_still_exits_0(tmp_path):
    bfam = tmp_path / "bfam.json"
    main(["construct", "--q2", "poly:16,-4", "-o", str(bfam)])
    out = tmp_path / "r.json"
    assert main(["verify", "--potential", str(bfam), "--re", "-5..100", "--im", "-2..2", "-o", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["doubleness"]
    assert d["verdicts"]["theorem_1_3"]["verdict"] in ("consistent", "violated")


def test_verify_inconclusive_exit_4(files, tmp_path, monkeypatch):
    real = harness.verify

    def fake(*args, **kwargs):
        rep = real(*args, **kwargs)
        rep.verdict_per_theorem["theorem_1_3"] = harness.Verdict(harness.INCONCLUSIVE, "forced")
        return rep
    monkeypatch.setattr(harness, "verify", fake)
    assert main(["verify", "--potential", str(files["zero"]), "--re", "-5..50", "--im", "-1..1",
                 "-o", str(tmp_path / "r.json")]) == 4


def test_kernel_free_golden(files, tmp_path, capsys):
    out = tmp_path / "k.csv"
    assert main(["kernel", "--potential", str(files["zero"]), "--n", "16", "-o", str(out)]) == 0
    assert_matches_golden(out, "kernel_zero.csv", atol=1e-14)
    _, cols, rows = read_csv(out)
    assert cols == ["x", "t", "re_K", "im_K"]
    assert all(float(r[2]) == 0.0 and float(r[3]) == 0.0 for r in rows)


def test_outputs_are_reproducible_by_library_calls(files, tmp_path):
    out = tmp_path / "lib"
    main(["spectrum", "--potential", str(files["cos"]), "--tags", "AP", "--re", "-1..50", "--im", "-1..1",
          "--output-dir", str(out)])
    _, _, rows = read_csv(out / "spectrum_AP.csv")
    from hillspec.spectra import SearchRegion, find_eigenvalues
    rep = find_eigenvalues(pot.cos2pi(), "AP", SearchRegion(-1.0, 50.0, -1.0, 1.0))
    assert [float(r[1]) for r in rows] == [e.mu.real for e in rep.eigenvalues]


def test_run_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(UsageError):
        RunConfig.from_dict({"subcommand": "spectrum", "colour": "red"})
    with pytest.raises(UsageError):
        RunConfig(subcommand="spectrum", integrator={"order": 8})
    with pytest.raises(UsageError):
        RunConfig(subcommand="spectrum", format="xml")
    f = tmp_path / "file"
    f.write_text("")
    with pytest.raises(UsageError):
        RunConfig(subcommand="spectrum", output_dir=str(f))
    rc = RunConfig.from_dict({"subcommand": "spectrum", "region": [0, 1, -1, 1], "integrator": {"rel_tol": 1e-8}})
    assert rc.cfg.rel_tol == 1e-8 and rc.region.re_max == 1


def test_parse_range():
    assert cli.parse_range("-1..170", "re") == (-1.0, 170.0)
    with pytest.raises(UsageError):
        cli.parse_range("1:2", "re")
