import pytest

from src.core.enums import String
from src.main import EXIT_OK, EXIT_USAGE, main

QUICK = ["--set", "MAX_EPOCH=1", "--set", "WM_TASKS=5", "--set", "SCHEDULE=5:3"]


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("DYNAQ_OUT_DIR", raising=False)


def _run(out, experiment="qlearning-vs-dynaq", *extra):
    return main(["run", "--experiment", experiment, "--out", str(out), *QUICK, *extra])


def test_unknown_experiment_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["run", "--experiment", "not-an-experiment"])
    assert info.value.code == 2


def test_unknown_override_key(tmp_path):
    assert _run(tmp_path / "out", "qlearning-vs-dynaq", "--set", "NO_SUCH_KEY=1") == EXIT_USAGE


def test_invalid_override_value(tmp_path):
    assert _run(tmp_path / "out", "qlearning-vs-dynaq", "--set", "GAMMA=2") == EXIT_USAGE


def test_missing_config_file(tmp_path):
    assert _run(tmp_path / "out", "qlearning-vs-dynaq", "--config", str(tmp_path / "none.conf")) == EXIT_USAGE


def test_compare_needs_run_directories(tmp_path):
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == EXIT_USAGE


def test_tiny_run_writes_every_artifact(tmp_path, capsys):
    assert _run(tmp_path / "out") == EXIT_OK
    root = tmp_path / "out" / "qlearning-vs-dynaq"
    assert String.ARTIFACTS_WRITTEN in capsys.readouterr().out
    for name in ("header.json", "runs.csv", "learning_curves.csv", "summary.csv"):
        assert (root / name).is_file()
    for label in ("qlearning", "dynaq"):
        assert (root / label / "header.json").is_file()
        for name in ("trials.jsonl", "steps.csv", "replays.jsonl"):
            assert (root / label / "seed_0" / name).is_file()
        assert len((root / label / "seed_0" / "trials.jsonl").read_text().splitlines()) == 3
    assert (root / "qlearning" / "seed_0" / "replays.jsonl").read_text() == ""
    assert (root / "world_model" / "seed_0" / "pred_N.json").is_file()


def test_reruns_are_identical_and_compare_clean(tmp_path, capsys):
    assert _run(tmp_path / "a") == EXIT_OK
    assert _run(tmp_path / "b") == EXIT_OK
    run_a = tmp_path / "a" / "qlearning-vs-dynaq" / "dynaq"
    run_b = tmp_path / "b" / "qlearning-vs-dynaq" / "dynaq"
    for name in ("trials.jsonl", "replays.jsonl"):
        assert (run_a / "seed_0" / name).read_bytes() == (run_b / "seed_0" / name).read_bytes()
    capsys.readouterr()
    assert main(["compare", str(run_a), str(run_b), "--out", str(tmp_path / "cmp.csv")]) == EXIT_OK
    assert String.RUNS_ARE_IDENTICAL in capsys.readouterr().out
    assert (tmp_path / "cmp.csv").is_file()


def test_galmo_growth_run(tmp_path):
    assert _run(tmp_path / "out", "galmo-growth", "--set", "MAX_EPOCH=2", "--set", "GROWTH_TASKS=5") == EXIT_OK
    root = tmp_path / "out" / "galmo-growth"
    assert (root / "ensembles.csv").is_file()
    assert (root / "summary.csv").is_file()
    assert (root / "galmo" / "seed_0" / "growth.csv").is_file()
    assert (root / "galmo" / "seed_0" / "errors.csv").is_file()


@pytest.mark.slow
def test_two_seeds_in_parallel_match_sequential(tmp_path):
    seeds = ["--seeds", "2"]
    assert _run(tmp_path / "seq", "qlearning-vs-dynaq", *seeds) == EXIT_OK
    assert _run(tmp_path / "par", "qlearning-vs-dynaq", *seeds, "--workers", "2") == EXIT_OK
    for seed in ("seed_0", "seed_1"):
        seq = tmp_path / "seq" / "qlearning-vs-dynaq" / "dynaq" / seed / "trials.jsonl"
        par = tmp_path / "par" / "qlearning-vs-dynaq" / "dynaq" / seed / "trials.jsonl"
        assert seq.read_bytes() == par.read_bytes()
