import json
import subprocess
import sys

import pytest

from fairmiss.cli import (EXIT_CONFIG, EXIT_DISCARDED, EXIT_EMPTY_GROUP, EXIT_MCAR_UNDEFINED,
                          EXIT_OK, main)


def write_csv(tmp_path, name, text, schema=None):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    if schema is not None:
        (tmp_path / (path.stem + ".schema.json")).write_text(json.dumps(schema), encoding="utf-8")
    return path


SCHEMA = {"grp": "categorical", "x": "numeric", "y": {"kind": "categorical", "is_label": True}}


@pytest.fixture
def small(tmp_path):
    rows = ["grp,x,y"] + [f"{'a' if i % 2 else 'b'},{'' if i % 5 == 0 else i},{i % 3 == 0:d}"
                          for i in range(40)]
    return write_csv(tmp_path, "small.csv", "\n".join(rows) + "\n", SCHEMA)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_inspect_builtin_markdown(capsys):
    code, out, _ = run(capsys, "inspect", "adult")
    assert code == EXIT_OK
    assert "| workclass, occupation |" in out and "48842 rows" in out


def test_inspect_json_and_empty_file(capsys, small, tmp_path):
    code, out, _ = run(capsys, "inspect", str(small), "--format", "json")
    obj = json.loads(out)
    assert code == EXIT_OK and obj["rows"] == 40 and obj["schema_version"] == 1
    empty = write_csv(tmp_path, "empty.csv", "grp,x,y\n", SCHEMA)
    code, out, _ = run(capsys, "inspect", str(empty))
    assert code == EXIT_OK and "0 rows" in out


def test_malformed_csv_exits_2(capsys, tmp_path):
    bad = write_csv(tmp_path, "bad.csv", "grp,x,y\na,1\n", SCHEMA)
    code, out, err = run(capsys, "inspect", str(bad))
    assert code == EXIT_CONFIG and out == "" and err


def test_audit_adult_race(capsys, tmp_path):
    code, out, _ = run(capsys, "--format", "json", "audit", "adult",
                       "--protected", "race", "--privileged", "White", "--favourable", ">50K",
                       "--out-dir", str(tmp_path))
    assert code == EXIT_OK
    audit = next(iter(json.loads(out)["audit"].values()))
    assert audit["all"]["spd"] == pytest.approx(0.1014, abs=0.005)
    assert audit["with_miss"]["spd"] == pytest.approx(0.0361, abs=0.005)
    assert audit["without_miss"]["spd"] == pytest.approx(0.1040, abs=0.005)
    assert (tmp_path / "audit.md").read_text().count("**") == 2


def test_audit_config_errors(capsys, small, tmp_path):
    absent = tmp_path / "g.json"
    absent.write_text(json.dumps({"protected_attribute": "nope", "privileged_values": ["a"],
                                  "favourable_class": "1"}))
    assert run(capsys, "audit", str(small), "--group", str(absent))[0] == EXIT_CONFIG
    assert run(capsys, "audit", str(small))[0] == EXIT_CONFIG
    one_group = write_csv(tmp_path, "one.csv", "grp,x,y\na,1,1\na,2,0\n", SCHEMA)
    code, _, err = run(capsys, "audit", str(one_group), "--protected", "grp",
                       "--privileged", "a", "--favourable", "1")
    assert code == EXIT_EMPTY_GROUP and "empty group" in err


def test_mcar(capsys, small, tmp_path):
    code, out, _ = run(capsys, "mcar", str(small))
    obj = json.loads(out)
    assert code == EXIT_OK and 0 <= obj["p_value"] <= 1 and obj["dof"] >= 1
    full = write_csv(tmp_path, "full.csv", "grp,x,y\na,1,1\nb,2,0\n", SCHEMA)
    assert run(capsys, "mcar", str(full))[0] == EXIT_MCAR_UNDEFINED


def test_octagon_outputs(capsys, tmp_path):
    code, out, _ = run(capsys, "octagon", "adult", "--out-dir", str(tmp_path))
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "group,vertex,accuracy,spd" and len(lines) == 1 + 2 * 8
    first = lines[1].split(",")
    assert float(first[2]) == 1.0
    assert json.loads((tmp_path / "baselines.json").read_text())["schema_version"] == 1


def experiment_config(tmp_path, small, **extra):
    cfg = {"dataset": small.name, "groups": [{"protected_attribute": "grp",
                                              "privileged_values": ["a"], "favourable_class": "1"}],
           "protocol": "subset", "models": [{"kind": "cart", "params": {"min_split": 4}}],
           "repetitions": 3, "master_seed": 5}
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_experiment_run_directory_and_manifest_rerun(capsys, small, tmp_path):
    path = experiment_config(tmp_path, small)
    out_dir = tmp_path / "runs"
    code, out, _ = run(capsys, "experiment", str(path), "--out-dir", str(out_dir))
    assert code == EXIT_OK and out.startswith("# subset experiment")
    run_dir = out_dir / "small-subset-seed5"
    names = {p.name for p in run_dir.iterdir()}
    assert names == {"manifest.json", "report.json", "report.md", "report.csv", "points.csv",
                     "octagon.csv"}
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["finished_at"]
    assert len(manifest["config_sha256"]) == 64 and "sha256" in manifest["dataset"]
    first = (run_dir / "report.json").read_bytes()

    again = tmp_path / "again"
    code, _, _ = run(capsys, "experiment", str(run_dir / "manifest.json"), "--threads", "2",
                     "--out-dir", str(again), "--format", "json")
    assert code == EXIT_OK
    assert (again / "small-subset-seed5" / "report.json").read_bytes() == first


def test_experiment_flags_override_file(capsys, small, tmp_path):
    path = experiment_config(tmp_path, small)
    code, out, _ = run(capsys, "--seed", "9", "experiment", str(path), "--repetitions", "1",
                       "--out-dir", str(tmp_path / "r"), "--format", "json")
    obj = json.loads(out)
    assert code == EXIT_OK
    assert obj["config"]["master_seed"] == 9 and obj["config"]["repetitions"] == 1
    assert all(r["spd_std"] == 0 for r in obj["results"])


def test_experiment_config_errors(capsys, small, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "experiment", str(bad))[0] == EXIT_CONFIG
    path = experiment_config(tmp_path, small, protocol="bogus")
    assert run(capsys, "experiment", str(path), "--out-dir", str(tmp_path / "r"))[0] == EXIT_CONFIG


def test_experiment_too_many_discarded(capsys, tmp_path):
    rows = ["grp,x,y", "a,,1"] + [f"{'a' if i % 2 else 'b'},{i},{i % 2}" for i in range(39)]
    one_masked = write_csv(tmp_path, "one.csv", "\n".join(rows) + "\n", SCHEMA)
    path = experiment_config(tmp_path, one_masked, repetitions=20)
    code, _, err = run(capsys, "experiment", str(path), "--out-dir", str(tmp_path / "r"))
    assert code == EXIT_DISCARDED and "discarded" in err
    manifest = json.loads((tmp_path / "r" / "one-subset-seed5" / "manifest.json").read_text())
    assert manifest["status"].startswith("failed")


def test_bad_thread_count(capsys):
    assert run(capsys, "inspect", "titanic", "--threads", "0")[0] == EXIT_CONFIG


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "fairmiss.cli", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.startswith("fairmiss ")
