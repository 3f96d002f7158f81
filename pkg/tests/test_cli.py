import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fhr.cli import (BOUNDS_HEADER, DEFAULTS, FIELD_HEADER, LOCK_NAME, RunConfig, emit_config,
                     main, parse_config, parse_config_text, read_fields)
from fhr.errors import ConfigError, DataError, ValidationError
from fhr.grid import Grid

SMALL = """
[model]
c = 0
h = 0
[grid]
x_min = -10
x_max = 10
nx = 101
nt = 41
t_max = 1.0
[initial]
u0_amplitude = 0.001   # small data keep every estimate meaningful
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_minimal_model_section_uses_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, "[model]\na=0.5\nD=1\neps=0.08\nbeta=0.8\ndelta=0.04\nd=1\n"))
    assert cfg.grid == Grid(-20.0, 20.0, 401, 2.0, 201)
    assert cfg.params.a == 0.5 and cfg.params.c == DEFAULTS["model"]["c"]
    assert "grid.nx" in cfg.defaulted and "model.a" not in cfg.defaulted
    assert cfg.u0.kind == "gaussian"


def test_duplicate_key_names_line(tmp_path):
    with pytest.raises(ConfigError, match=r":3: duplicate key 'a'"):
        parse_config(write(tmp_path, "[model]\na = 0.5\na = 0.6\n"))


def test_invalid_parameter_is_validation_error(tmp_path):
    with pytest.raises(ValidationError) as exc:
        parse_config(write(tmp_path, "[model]\na = 1.5\n"))
    assert exc.value.name == "a"


@pytest.mark.parametrize("text,match", [
    ("[model]\nfoo = 1\n", "unknown key"),
    ("[extra]\nx = 1\n", "unknown section"),
    ("a = 1\n", "outside any"),
    ("[grid]\nnx = ten\n", "not a valid int"),
    ("[solver]\noracle = maybe\n", "not a valid bool"),
    ("[solver]\nkernel_form = other\n", "kernel_form"),
    ("[initial]\nu0_kind = triangle\n", "unknown initial profile"),
])
def test_config_errors(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "nope.ini")


def test_keys_are_case_sensitive():
    cfg = parse_config_text("[model]\nD = 2.0\nd = 3.0\n")
    assert cfg.params.D == 2.0 and cfg.params.d == 3.0


finite = dict(allow_nan=False, allow_infinity=False)


@given(a=st.floats(0.01, 0.99, **finite), eps=st.floats(1e-3, 1.0, **finite),
       nx=st.integers(3, 500), t_max=st.floats(0.1, 10.0, **finite),
       amp=st.floats(-2, 2, **finite), kind=st.sampled_from(["gaussian", "constant", "zero"]),
       oracle=st.booleans(), label=st.text(alphabet="abc xyz-_0123", max_size=12).map(str.strip),
       tol=st.floats(1e-12, 1e-2, **finite))
def test_emit_parse_round_trip(a, eps, nx, t_max, amp, kind, oracle, label, tol):
    text = (f"[model]\na = {a!r}\neps = {eps!r}\n[grid]\nnx = {nx}\nt_max = {t_max!r}\n"
            f"[initial]\nw0_kind = {kind}\nw0_amplitude = {amp!r}\nw0_value = {amp!r}\n"
            f"[solver]\noracle = {str(oracle).lower()}\ntol = {tol!r}\n[output]\nlabel = {label}\n")
    cfg = parse_config_text(text)
    again = parse_config_text(emit_config(cfg))
    assert isinstance(again, RunConfig)
    assert again == cfg


def run_cli(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_kernel_heat_reduction(tmp_path, capsys):
    cfg = write(tmp_path, "[model]\na = 1.0\nD = 1\neps = 0\ndelta = 0\n")
    code, out, _ = run_cli(["kernel", "--x", 0, "--t", 1, "--config", cfg], capsys)
    assert code == 0
    assert "0.103776" in out


def test_kernel_negative_time_is_domain_error(capsys):
    code, _, err = run_cli(["kernel", "--x", 1, "--t", -1], capsys)
    assert code == 2 and "t > 0" in err


def test_kernel_demo_within_bound(capsys):
    code, out, _ = run_cli(["kernel", "--x", 0.5, "--t", 0.5], capsys)
    assert code == 0 and "within bound" in out


@pytest.mark.parametrize("which", ["laplace", "moments", "bessel"])
def test_verify_suites_pass(which, capsys):
    code, out, _ = run_cli(["verify", which], capsys)
    assert code == 0, out
    assert f"verify {which}: PASS" in out


def test_verify_identities_collapsed_rates(tmp_path, capsys):
    cfg = write(tmp_path, "[model]\neps = 0.05\nbeta = 0.8\ndelta = 0.04\nd = 1\n")
    code, out, _ = run_cli(["verify", "identities", "--config", cfg], capsys)
    assert code == 0 and "collapse" in out


def test_verify_failure_names_worst_case(monkeypatch, capsys):
    import fhr.cli as cli
    monkeypatch.setattr(cli, "MOMENT_TOL", 1e-20)
    code, out, _ = run_cli(["verify", "moments"], capsys)
    assert code == 1 and "FAIL worst case t=" in out


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = base / "small.ini"
    cfg.write_text(SMALL + "[solver]\noracle = true\n", encoding="utf-8")
    run = base / "run"
    assert main(["solve", "--config", str(cfg), "--out", str(run)]) == 0
    return cfg, run


def test_solve_writes_run_directory(solved):
    _, run = solved
    names = {p.name for p in run.iterdir()}
    assert {"fields.csv", "diagnostics.csv", "manifest.json", "fields_fdm.csv",
            "route_diff.csv"} <= names
    assert LOCK_NAME not in names
    manifest = json.loads((run / "manifest.json").read_text())
    for name, digest in manifest["checksums"].items():
        assert hashlib.sha256((run / name).read_bytes()).hexdigest() == digest
    assert manifest["derived"]["M"]["degenerate"]
    assert manifest["diagnostics"]["final_update_norm"] <= manifest["config"]["solver"]["tol"]
    with open(run / "fields.csv") as fh:
        assert fh.readline().strip() == FIELD_HEADER
    with open(run / "diagnostics.csv") as fh:
        assert fh.readline().strip() == "iteration,update_norm"
    with open(run / "route_diff.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert max(float(r["picard_vs_fdm"]) for r in rows) <= 5e-3


def test_fields_rows_are_time_major(solved):
    cfg, run = solved
    g = parse_config(cfg).grid
    with open(run / "fields.csv") as fh:
        next(fh)
        first = [next(fh).split(",") for _ in range(2)]
    assert float(first[0][1]) == 0.0 and float(first[1][1]) == 0.0
    assert float(first[1][0]) == pytest.approx(g.x[1])
    u, w, y = read_fields(run / "fields.csv", g)
    assert u.shape == (g.nx, g.nt)


def test_solve_is_deterministic(solved, tmp_path):
    cfg, run = solved
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "fields.csv").read_bytes() == (run / "fields.csv").read_bytes()


def test_solve_refuses_existing_manifest(solved, capsys):
    cfg, run = solved
    code, _, err = run_cli(["solve", "--config", cfg, "--out", run], capsys)
    assert code == 2 and "immutable" in err


def test_solve_refuses_locked_directory(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    run = tmp_path / "locked"
    run.mkdir()
    (run / LOCK_NAME).write_text("123")
    code, _, err = run_cli(["solve", "--config", cfg, "--out", run], capsys)
    assert code == 2 and "locked" in err


def test_zero_run_is_all_zero_and_passes(tmp_path, capsys):
    cfg = write(tmp_path, SMALL.replace("u0_amplitude = 0.001", "u0_kind = zero"))
    run = tmp_path / "zero"
    assert run_cli(["solve", "--config", cfg, "--out", run], capsys)[0] == 0
    data = np.loadtxt(run / "fields.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, 2:] == 0.0)
    code, out, _ = run_cli(["bounds", run], capsys)
    assert code == 0 and "0 failed" in out


def test_non_convergence_exit_code_and_partial_diagnostics(tmp_path, capsys):
    cfg = write(tmp_path, SMALL + "[solver]\nmax_iter = 2\ntol = 1e-15\n")
    run = tmp_path / "nc"
    code, _, err = run_cli(["solve", "--config", cfg, "--out", run], capsys)
    assert code == 3 and "non-convergence" in err
    lines = (run / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "iteration,update_norm" and len(lines) == 3
    assert not (run / "manifest.json").exists()


def test_bounds_demo_kinetics_pass(solved, capsys):
    _, run = solved
    code, out, _ = run_cli(["bounds", run], capsys)
    assert code == 0
    for comp in "uwy":
        with open(run / f"bounds_{comp}.csv") as fh:
            assert fh.readline().strip() == BOUNDS_HEADER
    with open(run / "bounds_w.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["pass"] for r in rows} == {"skipped"}
    with open(run / "bounds_kernels.csv") as fh:
        assert fh.readline().strip() == "bound_id," + BOUNDS_HEADER


def test_bounds_detects_tampered_u(solved, tmp_path, capsys):
    _, run = solved
    bad = tmp_path / "bad"
    bad.mkdir()
    for name in ("manifest.json", "fields.csv"):
        (bad / name).write_bytes((run / name).read_bytes())
    lines = (bad / "fields.csv").read_text().splitlines()
    out_lines = [lines[0]]
    for line in lines[1:]:
        cols = line.split(",")
        cols[2] = repr(100 * float(cols[2]))
        out_lines.append(",".join(cols))
    (bad / "fields.csv").write_text("\n".join(out_lines) + "\n")
    code, out, _ = run_cli(["bounds", bad], capsys)
    assert code == 1
    assert "failing: u" in out and "checksum" in out
    with open(bad / "bounds_u.csv") as fh:
        assert "false" in {r["pass"] for r in csv.DictReader(fh)}


def test_bounds_missing_or_corrupt_files(tmp_path, solved, capsys):
    assert run_cli(["bounds", tmp_path], capsys)[0] == 2
    _, run = solved
    bad = tmp_path / "corrupt"
    bad.mkdir()
    (bad / "manifest.json").write_bytes((run / "manifest.json").read_bytes())
    (bad / "fields.csv").write_text("x,t,u\n1,2,3\n")
    code, _, err = run_cli(["bounds", bad], capsys)
    assert code == 2 and "header" in err


def test_read_fields_rejects_wrong_grid(solved):
    _, run = solved
    with pytest.raises(DataError):
        read_fields(run / "fields.csv", Grid(-10, 10, 101, 2.0, 41))


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "[grid]" in out and "nx = 401" in out and "FHR_THREADS" in out


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "fhr.cli", "kernel", "--x", "1", "--t", "-1"],
                         capture_output=True, text=True)
    assert res.returncode == 2
