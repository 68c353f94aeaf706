import csv
import json

import numpy as np
import pytest

from photovortex import cli


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def solved_dir(tmp_path, capsys):
    code, out, _ = run(capsys, "solve", "--R", 20, "--m", 1, "--P0", 100, "--out-dir", tmp_path)
    assert code == 0
    return tmp_path, out


def test_solve_writes_outputs(solved_dir):
    d, out = solved_dir
    (row,) = read_rows(d / "summary.csv")
    assert float(row["beta"]) == pytest.approx(-0.78960468, abs=1e-6)
    assert row["converged"] == "true" and row["positive"] == "true"
    assert float(row["delta_beta"]) <= 1e-2
    prof = read_rows(d / "profile.csv")
    assert len(prof) == cli.PROFILE_ROWS
    assert float(prof[0]["r"]) == 0.0 and float(prof[-1]["r"]) == 20.0
    assert float(prof[0]["u"]) == 0.0 and float(prof[-1]["u"]) == 0.0
    assert "beta" in out


def test_solve_output_is_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "solve", "--R", 10, "--m", 2, "--P0", 50,
                   "--out-dir", tmp_path / name)[0] == 0
    for f in ("profile.csv", "summary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert b"\r\n" not in (tmp_path / "a" / "summary.csv").read_bytes()


@pytest.mark.parametrize("argv, needle", [
    (["solve", "--R", "20", "--m", "1", "--P0", "0"], "P0 must be positive"),
    (["solve", "--R", "20", "--m", "1"], "--P0 is required"),
    (["solve", "--R", "-1", "--m", "1", "--P0", "1"], "R must be positive"),
    (["solve", "--R", "20", "--m", "1", "--P0", "1", "--alpha", "0.5"], "alpha"),
    (["solve", "--R", "abc"], "invalid float"),
    (["solve", "--bogus"], "unrecognized"),
    (["frobnicate"], "invalid choice"),
    ([], "usage"),
])
def test_usage_errors(argv, needle, capsys, tmp_path):
    code, _, err = run(capsys, *argv, *(["--out-dir", tmp_path] if argv else []))
    assert code == cli.EXIT_USAGE
    assert needle in err


def test_jsonl_format(tmp_path, capsys):
    assert run(capsys, "solve", "--R", 10, "--m", 1, "--P0", 10, "--format", "jsonl",
               "--out-dir", tmp_path)[0] == 0
    rec = json.loads((tmp_path / "summary.jsonl").read_text().splitlines()[0])
    assert rec["converged"] is True and isinstance(rec["beta"], float)
    assert len((tmp_path / "profile.jsonl").read_text().splitlines()) == cli.PROFILE_ROWS


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# radius and flux\nR = 10\nm = 2   # vortex number\nP0 = 50\nN = 12\n")
    assert run(capsys, "solve", "--config", cfg, "--out-dir", tmp_path / "a")[0] == 0
    (row,) = read_rows(tmp_path / "a" / "summary.csv")
    assert (row["R"], row["m"], row["P0"], row["N"]) == ("10", "2", "50", "12")
    assert run(capsys, "solve", "--config", cfg, "--P0", 20, "--out-dir", tmp_path / "b")[0] == 0
    (row,) = read_rows(tmp_path / "b" / "summary.csv")
    assert row["P0"] == "20" and row["N"] == "12"


def test_bad_config_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("R = 10\nnonsense\n")
    code, _, err = run(capsys, "solve", "--config", cfg, "--out-dir", tmp_path)
    assert code == cli.EXIT_USAGE and "bad.cfg:2" in err


def test_not_converged_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, "solve", "--R", 20, "--m", 1, "--P0", 100, "--max-iters", 2,
                       "--out-dir", tmp_path)
    assert code == cli.EXIT_ERROR and "converge" in err


def test_sweep_order_and_script(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--R", 20, "--m", 2, "--m", 1, "--P0", 100, "--P0", 1,
                       "--gnuplot", "--out-dir", tmp_path)
    assert code == 0
    rows = read_rows(tmp_path / "beta_vs_P0.csv")
    assert list(rows[0]) == cli.SWEEP_HEADER
    assert [(r["m"], r["P0"]) for r in rows] == [("2", "100"), ("2", "1"), ("1", "100"), ("1", "1")]
    assert all(r["error"] == "" for r in rows)
    for r in rows:
        assert float(r["beta"]) < float(r["beta_upper_bound"])
    script = (tmp_path / "beta_vs_P0.gp").read_text()
    assert "beta_vs_P0.csv" in script and "m=2" in script


def test_sweep_records_failures(tmp_path, capsys):
    code, _, err = run(capsys, "sweep", "--R", 20, "--m", 1, "--P0", 10, "--P0", 800,
                       "--N", 20, "--panels", 1, "--nodes-per-panel", 2, "--out-dir", tmp_path)
    assert code == cli.EXIT_ERROR
    rows = read_rows(tmp_path / "beta_vs_P0.csv")
    assert len(rows) == 2
    assert all(r["error"].startswith("IllConditionedBasisError") for r in rows)
    assert all(r["beta"] == "" and r["converged"] == "false" for r in rows)
    assert "error" in err


def test_single_item_sweep_matches_solve(solved_dir, tmp_path, capsys):
    d, _ = solved_dir
    assert run(capsys, "sweep", "--R", 20, "--m", 1, "--P0", 100, "--out-dir", tmp_path / "s")[0] == 0
    (srow,) = read_rows(tmp_path / "s" / "beta_vs_P0.csv")
    (row,) = read_rows(d / "summary.csv")
    assert srow["beta"] == row["beta"] and srow["delta_beta"] == row["delta_beta"]


def test_validate_fresh_solve(tmp_path, capsys):
    code, out, _ = run(capsys, "validate", "--R", 20, "--m", 1, "--P0", 50, "--out-dir", tmp_path)
    assert code == 0
    rows = {r["check"]: r for r in read_rows(tmp_path / "validation.csv")}
    assert set(rows) == {"positive", "flux", "beta_bound", "peak_bound", "decay", "poincare"}
    assert rows["decay"]["pass"] == "true"
    assert float(rows["decay"]["value"]) > 0
    assert all(r["pass"] == "true" for r in rows.values())


def test_validate_decay_not_applicable_at_low_flux(tmp_path, capsys):
    code, out, _ = run(capsys, "validate", "--R", 20, "--m", 1, "--P0", 1, "--out-dir", tmp_path)
    assert code == 0
    rows = {r["check"]: r for r in read_rows(tmp_path / "validation.csv")}
    assert rows["decay"]["pass"] == "n/a"


def test_validate_saved_files(solved_dir, capsys):
    d, _ = solved_dir
    code, out, _ = run(capsys, "validate", "--profile", d / "profile.csv",
                       "--summary", d / "summary.csv", "--out-dir", d / "v")
    assert code == 0
    rows = {r["check"]: r for r in read_rows(d / "v" / "validation.csv")}
    assert float(rows["flux"]["value"]) == pytest.approx(100.0, rel=1e-3)


def test_validate_detects_flux_mismatch(solved_dir, capsys):
    d, _ = solved_dir
    rows = read_rows(d / "profile.csv")
    with open(d / "scaled.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cli.PROFILE_HEADER)
        for r in rows:
            w.writerow([r["r"]] + [repr(1.1 * float(r[k])) for k in ("u", "u_r", "u_rr")])
    code, out, _ = run(capsys, "validate", "--profile", d / "scaled.csv",
                       "--summary", d / "summary.csv", "--out-dir", d / "v")
    assert code == cli.EXIT_ERROR
    assert "flux" in out and "FAIL" in out


def test_validate_malformed_profile(solved_dir, capsys):
    d, _ = solved_dir
    lines = (d / "profile.csv").read_text().splitlines()
    lines[5] = "0.1,abc,0,0"
    (d / "broken.csv").write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "validate", "--profile", d / "broken.csv",
                       "--summary", d / "summary.csv")
    assert code == cli.EXIT_DATAERR
    assert "broken.csv:6" in err


def test_validate_needs_both_files(solved_dir, capsys):
    d, _ = solved_dir
    code, _, err = run(capsys, "validate", "--profile", d / "profile.csv")
    assert code == cli.EXIT_USAGE


def test_export_profiles_vs_m(tmp_path, capsys):
    assert run(capsys, "export", "--figure", 1, "--out-dir", tmp_path)[0] == 0
    rows = read_rows(tmp_path / "fig1_profiles_vs_m.csv")
    assert list(rows[0]) == ["r"] + [f"u_m{m}" for m in range(1, 7)]
    r = np.array([float(x["r"]) for x in rows])
    assert r[-1] == 40.0
    peaks = [r[np.argmax([float(x[f"u_m{m}"]) for x in rows])] for m in range(1, 7)]
    assert peaks[2] > peaks[0]
    assert all(b > a for a, b in zip(peaks, peaks[1:]))
    assert (tmp_path / "fig1_profiles_vs_m.gp").exists()


def test_export_profiles_vs_flux(tmp_path, capsys):
    assert run(capsys, "export", "--figure", 2, "--out-dir", tmp_path)[0] == 0
    rows = read_rows(tmp_path / "fig2_profiles_vs_P0.csv")
    cols = [k for k in rows[0] if k != "r"]
    assert len(cols) == 10
    peaks = [max(float(x[c]) for x in rows) for c in cols]
    assert all(b > a for a, b in zip(peaks, peaks[1:]))


def test_export_beta_sweep(tmp_path, capsys):
    assert run(capsys, "export", "--figure", 3, "--P0", 1, "--P0", 100,
               "--out-dir", tmp_path)[0] == 0
    rows = read_rows(tmp_path / "beta_vs_P0.csv")
    assert [r["m"] for r in rows] == [str(m) for m in range(1, 6) for _ in range(2)]
    assert (tmp_path / "beta_vs_P0.gp").exists()
