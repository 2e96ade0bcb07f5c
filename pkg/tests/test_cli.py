"""End-to-end command-line tests run through subprocesses.

Each test invokes `python -m doublelasso ...` exactly as a user would, so
argument parsing, exit statuses, stdout/stderr routing, and byte-level
determinism of written files are all exercised for real.
"""

import os
import re
import subprocess
import sys

import numpy as np
import pytest
import yaml

from doublelasso import ColumnInfo, Dataset, link, save_dataset, sidecar_path
from doublelasso.cli import JOBS_ENV_VAR, version_string


def run_cli(*args, env=None):
    merged = os.environ.copy()
    merged.pop(JOBS_ENV_VAR, None)
    if env:
        merged.update(env)
    return subprocess.run(
        [sys.executable, "-m", "doublelasso", *args],
        capture_output=True,
        text=True,
        env=merged,
    )


SPEC_YAML = """\
version: 1
outcome: enrolled
missing_policy: drop
columns:
  - {name: d, kind: numeric, standardize: false, role: treatment}
  - {name: x1, kind: numeric}
  - {name: x2, kind: numeric}
  - {name: x3, kind: numeric}
  - {name: x4, kind: numeric}
  - {name: x5, kind: numeric}
  - {name: x6, kind: numeric}
  - {name: region, kind: categorical, levels: [north, south], baseline: north}
interactions:
  - {a: region_south, b: x1}
"""

STUDY_YAML = """\
version: 1
reps: 4
methods: [dml]
level: 0.05
base_seed: 11
dgp:
  family: linear
  n: 150
  p: 5
  alpha0: 0.5
  beta: {pattern: first-s, magnitude: 0.4, sparsity: 2}
  gamma: {pattern: first-s, magnitude: 0.3, sparsity: 2}
"""

# intercept -30 pushes every logistic index so low that y is all zeros,
# so each replication fails and the failure ceiling must trip
STUDY_ALWAYS_FAILS_YAML = """\
version: 1
reps: 3
methods: [dml]
base_seed: 3
dgp:
  family: logistic
  n: 60
  p: 3
  alpha0: 0.2
  intercept: -30.0
  beta: {pattern: first-s, magnitude: 0.4, sparsity: 2}
"""


def _write_raw_table(path):
    rng = np.random.Generator(np.random.Philox(key=np.uint64(2024)))
    n = 120
    X = rng.standard_normal((n, 6))
    d = 0.6 * X[:, 0] + rng.standard_normal(n)
    eta = 0.4 * d + 0.5 * X[:, 0] - 0.5 * X[:, 1]
    y = (rng.random(n) < link(eta)).astype(int)
    region = np.where(rng.random(n) < 0.5, "south", "north")
    lines = ["enrolled,d,x1,x2,x3,x4,x5,x6,region"]
    for i in range(n):
        cells = [str(int(y[i])), repr(float(d[i]))]
        cells += [repr(float(X[i, j])) for j in range(6)]
        cells.append(str(region[i]))
        if i in (5, 17):
            cells[4] = ""
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_degenerate_dataset(path):
    rng = np.random.Generator(np.random.Philox(key=np.uint64(7)))
    n = 80
    X = rng.standard_normal((n, 3))
    good = 0.5 * X[:, 0] + rng.standard_normal(n)
    flat = np.ones(n)
    y = (rng.random(n) < link(0.3 * good)).astype(float)
    columns = (
        ColumnInfo(name="good", role="treatment", source="good"),
        ColumnInfo(name="flat", role="treatment", source="flat"),
        ColumnInfo(name="x1", role="control", source="x1"),
        ColumnInfo(name="x2", role="control", source="x2"),
        ColumnInfo(name="x3", role="control", source="x3"),
    )
    ds = Dataset(y=y, design=np.column_stack([good, flat, X]),
                 columns=columns, outcome_name="y")
    save_dataset(ds, str(path))


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Shared workspace: raw table, specs, and one encoded dataset."""
    root = tmp_path_factory.mktemp("cliws")
    paths = {
        "data": root / "data.csv",
        "spec": root / "spec.yaml",
        "encoded": root / "dataset.tsv",
        "degenerate": root / "const.tsv",
        "study": root / "study.yaml",
        "study_fail": root / "study_fail.yaml",
        "root": root,
    }
    _write_raw_table(paths["data"])
    paths["spec"].write_text(SPEC_YAML, encoding="utf-8")
    paths["study"].write_text(STUDY_YAML, encoding="utf-8")
    paths["study_fail"].write_text(STUDY_ALWAYS_FAILS_YAML, encoding="utf-8")
    _write_degenerate_dataset(paths["degenerate"])
    proc = run_cli("encode", "--data", str(paths["data"]),
                   "--spec", str(paths["spec"]), "--out", str(paths["encoded"]))
    assert proc.returncode == 0, proc.stderr
    paths["encode_stdout"] = proc.stdout
    return paths


# ---------------------------------------------------------------- version


def test_version_flag_prints_config_fingerprint():
    proc = run_cli("--version")
    assert proc.returncode == 0
    assert proc.stdout.strip() == (
        "doublelasso 0.1.0 "
        "[instrument=sqrt-sigma;penalty=plugin(c=1.1);grid=401;level=0.05]"
    )
    assert proc.stdout.strip() == version_string()


# ---------------------------------------------------------------- encode


def test_encode_reports_shape_and_written_files(ws):
    lines = ws["encode_stdout"].splitlines()
    assert lines[0] == "n=118 p=9 dropped=2"
    assert lines[1] == f"wrote {ws['encoded']}"
    assert lines[2] == f"wrote {sidecar_path(str(ws['encoded']))}"
    assert ws["encoded"].exists()
    assert os.path.exists(sidecar_path(str(ws["encoded"])))


def test_encode_is_byte_deterministic(ws, tmp_path):
    out1, out2 = tmp_path / "e1.tsv", tmp_path / "e2.tsv"
    for out in (out1, out2):
        proc = run_cli("encode", "--data", str(ws["data"]),
                       "--spec", str(ws["spec"]), "--out", str(out))
        assert proc.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes() == ws["encoded"].read_bytes()


def test_encode_missing_data_file_exits_2(ws, tmp_path):
    proc = run_cli("encode", "--data", str(tmp_path / "nope.csv"),
                   "--spec", str(ws["spec"]), "--out", str(tmp_path / "o.tsv"))
    assert proc.returncode == 2
    assert proc.stderr.startswith("error:")


def test_encode_malformed_spec_exits_2(ws, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: 1\noutcome: enrolled\ncolumns: []\n", encoding="utf-8")
    proc = run_cli("encode", "--data", str(ws["data"]),
                   "--spec", str(bad), "--out", str(tmp_path / "o.tsv"))
    assert proc.returncode == 2
    assert "columns" in proc.stderr


def test_encode_empty_result_exits_2(ws, tmp_path):
    data = tmp_path / "allmissing.csv"
    data.write_text("enrolled,d,x1,x2,x3,x4,x5,x6,region\n"
                    "1,0.1,,0.2,0.3,0.4,0.5,0.6,north\n"
                    "0,0.2,,0.1,0.3,0.4,0.5,0.6,south\n", encoding="utf-8")
    proc = run_cli("encode", "--data", str(data),
                   "--spec", str(ws["spec"]), "--out", str(tmp_path / "o.tsv"))
    assert proc.returncode == 2
    assert proc.stderr.startswith("error:")


# ---------------------------------------------------------------- fit


def test_fit_encoded_dataset_prints_aligned_table(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]))
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.splitlines()
    assert lines[0].split()[:3] == ["Treatment", "Coefficient", "p-value"]
    assert lines[1].split()[0] == "d"
    note = "Note: p-values are per-treatment and unadjusted for multiple testing."
    assert proc.stdout.count(note) == 1


def test_fit_from_raw_table_with_spec(ws):
    proc = run_cli("fit", "--data", str(ws["data"]), "--spec", str(ws["spec"]),
                   "--family", "logit")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.splitlines()[1].split()[0] == "d"


def test_fit_structured_output_round_trips(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--format", "structured")
    assert proc.returncode == 0
    doc = yaml.safe_load(proc.stdout)
    assert doc["version"] == 1
    assert doc["rows"][0]["treatment"] == "d"
    assert doc["rows"][0]["n"] == 118
    assert doc["failures"] == []


def test_fit_tsv_output_has_note_comment(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--format", "tsv")
    assert proc.returncode == 0
    lines = proc.stdout.splitlines()
    assert lines[0].startswith("Treatment\tCoefficient\t")
    assert any(ln.startswith("# note: ") for ln in lines)


def test_fit_decimals_flag(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--decimals", "5")
    row = proc.stdout.splitlines()[1].split()
    assert all("." in c and len(c.split(".")[1]) == 5 for c in row[1:6])


def test_fit_treatment_subset_in_request_order(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--treatments", "x1,d")
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.splitlines()
    assert lines[1].split()[0] == "x1"
    assert lines[2].split()[0] == "d"


def test_fit_writes_out_file_and_says_so(ws, tmp_path):
    out = tmp_path / "fit.txt"
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--out", str(out))
    assert proc.returncode == 0
    assert proc.stdout.strip() == f"wrote {out}"
    assert out.read_text(encoding="utf-8").startswith("Treatment")


def test_fit_is_byte_deterministic_across_jobs(ws, tmp_path):
    outs = [tmp_path / f"r{k}.tsv" for k in range(3)]
    cmds = [
        ("--jobs", "1"),
        ("--jobs", "4"),
        (),
    ]
    envs = [None, None, {JOBS_ENV_VAR: "4"}]
    for out, extra, env in zip(outs, cmds, envs):
        proc = run_cli("fit", "--data", str(ws["encoded"]),
                       "--treatments", "d,x1", "--format", "tsv",
                       "--out", str(out), *extra, env=env)
        assert proc.returncode == 0, proc.stderr
    blobs = [o.read_bytes() for o in outs]
    assert blobs[0] == blobs[1] == blobs[2]


def test_fit_unknown_selector_exits_2(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--treatments", "ghost")
    assert proc.returncode == 2
    assert "ghost" in proc.stderr


def test_fit_overlapping_selectors_exit_2(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]),
                   "--treatments", "d", "--controls", "d")
    assert proc.returncode == 2
    assert "both treatment and control" in proc.stderr


def test_fit_outcome_mismatch_exits_2(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--outcome", "converted")
    assert proc.returncode == 2
    assert "converted" in proc.stderr


def test_fit_encoded_without_sidecar_exits_2(ws, tmp_path):
    orphan = tmp_path / "orphan.tsv"
    orphan.write_bytes(ws["encoded"].read_bytes())
    proc = run_cli("fit", "--data", str(orphan))
    assert proc.returncode == 2
    assert "sidecar" in proc.stderr


def test_fit_bad_level_exits_2(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--level", "1.5")
    assert proc.returncode == 2


def test_fit_captures_failures_without_fail_fast(ws):
    proc = run_cli("fit", "--data", str(ws["degenerate"]))
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.splitlines()[1].split()[0] == "good"
    assert "Failures:" in proc.stdout
    assert "flat: DegenerateTreatmentError:" in proc.stdout


def test_fit_fail_fast_exits_3(ws):
    proc = run_cli("fit", "--data", str(ws["degenerate"]), "--fail-fast")
    assert proc.returncode == 3
    assert proc.stderr.startswith("error:")
    assert proc.stdout == ""


def test_jobs_env_var_must_be_an_integer(ws):
    proc = run_cli("fit", "--data", str(ws["encoded"]),
                   env={JOBS_ENV_VAR: "many"})
    assert proc.returncode == 2
    assert "must be an integer" in proc.stderr


def test_jobs_flag_wins_over_bad_env_value(ws):
    bad_env = {JOBS_ENV_VAR: "0"}
    proc = run_cli("fit", "--data", str(ws["encoded"]), env=bad_env)
    assert proc.returncode == 2
    assert "at least 1" in proc.stderr
    proc = run_cli("fit", "--data", str(ws["encoded"]), "--jobs", "1", env=bad_env)
    assert proc.returncode == 0


# ---------------------------------------------------------------- simulate


def test_simulate_prints_verdict_and_writes_report(ws, tmp_path):
    out = tmp_path / "report.yaml"
    proc = run_cli("simulate", "--spec", str(ws["study"]), "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.splitlines()
    assert lines[0] == f"wrote {out}"
    assert re.fullmatch(
        r"dml: coverage=[01]\.\d{3} mean_bias=[+-]\d+\.\d{4} \(4/4 ok\)", lines[1]
    )
    doc = yaml.safe_load(out.read_text(encoding="utf-8"))
    assert doc["reports"][0]["method"] == "dml"
    assert doc["reports"][0]["reps"] == 4


def test_simulate_aligned_report_format(ws, tmp_path):
    out = tmp_path / "report.txt"
    proc = run_cli("simulate", "--spec", str(ws["study"]),
                   "--out", str(out), "--format", "aligned")
    assert proc.returncode == 0
    assert out.read_text(encoding="utf-8").startswith("Method")


def test_simulate_is_byte_deterministic_across_jobs(ws, tmp_path):
    out1, out2 = tmp_path / "r1.yaml", tmp_path / "r2.yaml"
    p1 = run_cli("simulate", "--spec", str(ws["study"]), "--out", str(out1),
                 "--jobs", "1")
    p2 = run_cli("simulate", "--spec", str(ws["study"]), "--out", str(out2),
                 "--jobs", "3")
    assert p1.returncode == 0 and p2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert p1.stdout.splitlines()[1:] == p2.stdout.splitlines()[1:]


def test_simulate_seed_override_changes_report(ws, tmp_path):
    out1, out2 = tmp_path / "a.yaml", tmp_path / "b.yaml"
    run_cli("simulate", "--spec", str(ws["study"]), "--out", str(out1))
    run_cli("simulate", "--spec", str(ws["study"]), "--out", str(out2),
            "--seed", "999")
    assert out1.read_bytes() != out2.read_bytes()


def test_simulate_failure_ceiling_exits_4(ws):
    proc = run_cli("simulate", "--spec", str(ws["study_fail"]))
    assert proc.returncode == 4
    assert "(0/3 ok)" in proc.stdout
    assert "failure rate above the ceiling" in proc.stderr


def test_simulate_malformed_spec_exits_2(ws, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: 1\nreps: 4\nbudget: big\ndgp: {family: linear, n: 50, p: 2, alpha0: 0.1}\n",
                   encoding="utf-8")
    proc = run_cli("simulate", "--spec", str(bad))
    assert proc.returncode == 2
    assert "budget" in proc.stderr


def test_simulate_missing_version_exits_2(ws, tmp_path):
    bad = tmp_path / "nover.yaml"
    bad.write_text("reps: 4\ndgp: {family: linear, n: 50, p: 2, alpha0: 0.1}\n",
                   encoding="utf-8")
    proc = run_cli("simulate", "--spec", str(bad))
    assert proc.returncode == 2
    assert "version" in proc.stderr
