"""Command-line entry points, exercised in-process."""

import json

from tutorkit.cli import main
from tutorkit.evalsim import DEFAULT_TRAIN_SEED


def test_train_evaluate_replay_round_trip(tmp_path, capsys):
    agent = tmp_path / "agent.json"
    transcript = tmp_path / "run.jsonl"
    code = main([
        "train", "--domain", "square-25", "--seed", str(DEFAULT_TRAIN_SEED),
        "--agent-file", str(agent), "--transcript-file", str(transcript),
        "--report", "json",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["converged"] is True

    code = main([
        "evaluate", "--domain", "square-25", "--agent-file", str(agent),
        "--report", "json",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["accuracy"] == 1.0

    code = main([
        "replay", "--transcript-file", str(transcript), "--expect-agent", str(agent),
    ])
    assert code == 0


def test_fraction_curriculum_and_bias_flags(tmp_path, capsys):
    agent = tmp_path / "fr.json"
    assert main(["train", "--domain", "fraction", "--agent-file", str(agent)]) == 0
    capsys.readouterr()
    assert main([
        "evaluate", "--domain", "fraction", "--agent-file", str(agent), "--report", "json",
    ]) == 0
    assert json.loads(capsys.readouterr().out)["accuracy"] == 1.0

    biased = tmp_path / "biased.json"
    assert main([
        "train", "--domain", "fraction-multiply", "--bias", "numerator-one",
        "--seed", "3", "--agent-file", str(biased),
    ]) == 0
    capsys.readouterr()
    # a biased model is expected to miss unbiased problems: nonzero exit
    assert main([
        "evaluate", "--domain", "fraction-multiply", "--agent-file", str(biased),
    ]) == 1
