import csv
import json
import os

import pytest

from rltlab.cli import main


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def tiny_workspace(tmp_path_factory):
    """generate -> bench -> train on a small suite, shared by the tests."""
    root = tmp_path_factory.mktemp("ws")
    suite = root / "suite"
    arch = root / "arch"
    train = root / "train"
    assert run_cli("generate", "--suite", "regimes", "--per-family", "4",
                   "--seed", "0", "--out", str(suite)) == 0
    assert run_cli("bench", "--manifest", str(suite / "manifest.csv"),
                   "--out", str(arch), "--max-nodes", "25",
                   "--time-limit", "1e18") == 0
    assert run_cli("train", "--archive", str(arch), "--out", str(train),
                   "--partitions", "2", "--trees", "40") == 0
    return root


def test_generate_layout(tiny_workspace):
    suite = tiny_workspace / "suite"
    with open(suite / "manifest.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert {r["family"] for r in rows} == {"centrality", "shadowprice", "ranges"}
    for r in rows:
        assert (suite / r["path"]).exists()


def test_bench_archive_complete(tiny_workspace):
    arch = tiny_workspace / "arch"
    with open(arch / "traces.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    by_instance = {}
    for r in rows:
        by_instance.setdefault(r["instance"], set()).add(r["rule"])
    assert all(len(v) == 6 for v in by_instance.values())
    assert (arch / "features.csv").exists()
    assert (arch / "excluded.csv").exists()


def test_bench_rerun_is_idempotent(tiny_workspace, capsys):
    arch = tiny_workspace / "arch"
    before = sorted(os.listdir(arch / "traces"))
    stamp = {f: os.path.getmtime(arch / "traces" / f) for f in before}
    assert run_cli("bench", "--manifest", str(tiny_workspace / "suite" / "manifest.csv"),
                   "--out", str(arch), "--max-nodes", "25", "--time-limit", "1e18") == 0
    after = sorted(os.listdir(arch / "traces"))
    assert before == after
    assert all(os.path.getmtime(arch / "traces" / f) == stamp[f] for f in after)


def test_features_command(tiny_workspace, tmp_path):
    out = tmp_path / "features.csv"
    assert run_cli("features", "--manifest",
                   str(tiny_workspace / "suite" / "manifest.csv"),
                   "--out", str(out)) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert len(rows[0]) == 36  # instance, family + 34 features


def test_solve_command(tiny_workspace, tmp_path, capsys):
    inst = next((tiny_workspace / "suite" / "instances").glob("*.po"))
    out = tmp_path / "trace.json"
    assert run_cli("solve", "--instance", str(inst), "--rule", "sum",
                   "--max-nodes", "10", "--time-limit", "1e18",
                   "--clock", "nodes", "--out", str(out)) == 0
    printed = capsys.readouterr().out
    assert "status=" in printed
    obj = json.loads(out.read_text())
    assert obj["rule"] == "sum"
    assert obj["nodes"] <= 10


def test_train_outputs(tiny_workspace):
    train = tiny_workspace / "train"
    summary = json.loads((train / "summary.json").read_text())
    assert "test_sets" in summary and "out_of_bag" in summary
    assert (train / "partitions.csv").exists()
    assert (train / "selector-full.json").exists()
    assert (train / "selector-p00.json").exists()


def test_select_command(tiny_workspace, capsys):
    inst = sorted((tiny_workspace / "suite" / "instances").glob("centrality-*.po"))[0]
    assert run_cli("select", "--selector",
                   str(tiny_workspace / "train" / "selector-full.json"),
                   "--instance", str(inst)) == 0
    out = capsys.readouterr().out.strip()
    assert out in {"max", "sum", "dual", "range", "eig-vi", "eig-cmi"}


def test_report_command(tiny_workspace, tmp_path):
    out = tmp_path / "report"
    assert run_cli("report", "--archive", str(tiny_workspace / "arch"),
                   "--out", str(out), "--selector",
                   str(tiny_workspace / "train" / "selector-full.json"),
                   "--svg") == 0
    for name in ("pace_table.csv", "normalized_pace_summary.csv", "rank_table.csv",
                 "selection_frequency.csv", "feature_importance.csv",
                 "performance_profile.csv", "performance_profile.svg",
                 "rank_bars.svg"):
        assert (out / name).exists(), name
    with open(out / "rank_table.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 36  # 6 rules x 6 ranks
    # profile curves all reach rho = 1 at the largest ratio
    with open(out / "performance_profile.csv", newline="") as fh:
        prof = list(csv.DictReader(fh))
    tmax = max(float(r["tau"]) for r in prof)
    finals = [float(r["rho"]) for r in prof if float(r["tau"]) == tmax]
    assert all(v == 1.0 for v in finals)


def test_single_instance_archive_rank_coverage(tmp_path):
    suite = tmp_path / "suite"
    arch = tmp_path / "arch"
    assert run_cli("generate", "--suite", "regimes", "--per-family", "1",
                   "--seed", "3", "--out", str(suite)) == 0
    # keep only one instance in the manifest
    with open(suite / "manifest.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    with open(suite / "manifest.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["path", "instance", "family"])
        w.writeheader()
        w.writerow(rows[0])
    assert run_cli("bench", "--manifest", str(suite / "manifest.csv"),
                   "--out", str(arch), "--max-nodes", "20", "--time-limit", "1e18") == 0
    out = tmp_path / "report"
    assert run_cli("report", "--archive", str(arch), "--out", str(out)) == 0
    with open(out / "rank_table.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    occupied = [r for r in rows if r["share"] and float(r["share"]) > 0]
    assert sorted(int(r["rank"]) for r in occupied) == [1, 2, 3, 4, 5, 6]


def test_usage_error_exit_code_1(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("solve", "--rule", "sum")  # missing --instance
    assert exc.value.code == 1


def test_unknown_rule_is_data_error(tmp_path):
    inst = tmp_path / "p.po"
    inst.write_text("var x in [0,1]\nmin: x\nst c1: x >= 0\n")
    assert run_cli("solve", "--instance", str(inst), "--rule", "bogus") == 2


def test_bad_instance_is_data_error(tmp_path):
    inst = tmp_path / "bad.po"
    inst.write_text("var x in [2,1]\nmin: x\nst c1: x >= 0\n")
    assert run_cli("solve", "--instance", str(inst), "--rule", "sum") == 2
