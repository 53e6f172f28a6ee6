import json

import pytest
import yaml

from plansyntax.cli import main, oracle_params, oracle_reward, parse_args
from plansyntax.mask_io import ChannelCodeTable
from plansyntax.post_training import HybridReward, RewardClip, SelectionReward
from plansyntax.toy_generator import LayoutConfig


def test_parse_args():
    args = parse_args(["--seed", "7", "analyze", "masks", "out", "--method", "closeness", "--workers", "2"])
    assert args.seed == 7
    assert args.command == "analyze"
    assert args.method == "closeness"
    assert args.min_rect_area == 50
    assert args.workers == 2


def test_usage_errors(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["teleport"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "masks", "out", "--method", "axial"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_data_errors(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "missing"), str(tmp_path / "out")]) == 1
    assert main(["screen", str(tmp_path)]) == 1
    assert main(["plot", str(tmp_path)]) == 1
    assert "plansyntax plot" in capsys.readouterr().err


def test_synth_analyze_screen_plot(tmp_path, capsys):
    synth = tmp_path / "synth"
    run = tmp_path / "run"
    assert main(["--seed", "3", "synth", str(synth), "--count", "4", "--rooms", "4", "5"]) == 0
    assert sorted(p.name for p in (synth / "masks").iterdir())[0] == "plan00000.png"
    assert len((synth / "conditions.jsonl").read_text().splitlines()) == 4
    capsys.readouterr()

    assert main(["analyze", str(synth / "masks"), str(run)]) == 0
    assert "4 plans, 4 usable" in capsys.readouterr().out
    summary = (run / "convex_integration_summary.csv").read_text().splitlines()
    assert len(summary) == 6
    assert (run / "bench_report.json").exists()

    assert main(["screen", str(run), "--topk", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "usable: 4 (100.00%)" in out
    assert all(line.startswith("plan") for line in out[-2:])
    assert (run / "topk.txt").read_text().splitlines() == out[-2:]
    assert (run / "screening.csv").read_text().startswith("plan_id,stage,z,p,s\n")
    assert (run / "cleaning_ledger.csv").exists()

    svg = tmp_path / "redrawn.svg"
    assert main(["plot", str(run), "--output", str(svg)]) == 0
    assert svg.read_bytes().lstrip().startswith(b"<?xml")


def test_analyze_is_reproducible(tmp_path):
    synth = tmp_path / "synth"
    assert main(["synth", str(synth), "--count", "3"]) == 0
    assert main(["analyze", str(synth / "masks"), str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main(["analyze", str(synth / "masks"), str(tmp_path / "b"), "--workers", "3"]) == 0
    for name in ("convex_integration_summary.csv", "bench_report.json", "profile.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_pretrain_bench_and_training(tmp_path, capsys):
    ckpt = tmp_path / "base" / "policy.npz"
    assert main(["pretrain", str(ckpt), "--count", "8", "--epochs", "1", "--batch-size", "4"]) == 0
    assert ckpt.exists()
    capsys.readouterr()

    assert main(["bench", str(ckpt), str(tmp_path / "bench"), "--samples", "2", "--respacing", "4"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n_plans"] == 2
    assert sum(report["validity"].values()) == 2
    assert main(["bench", str(ckpt), str(tmp_path / "bad"), "--train-cap", "8"]) == 1

    ppo = tmp_path / "ppo"
    argv = ["train-ppo", str(ckpt), str(ppo), "--rounds", "2", "--rollouts", "2", "--sub-epochs", "1"]
    assert main(argv + ["--respacing", "4", "--reward-clip", "quantile:0.1,0.9"]) == 0
    assert len((ppo / "train_log.csv").read_text().splitlines()) == 3
    assert (ppo / "policy.npz").exists()

    it = tmp_path / "iter"
    argv = ["train-iter", str(ckpt), str(it), "--rounds", "1", "--samples", "2", "--topk", "2"]
    argv += ["--epochs", "1", "--batch-size", "2", "--base-size", "2", "--respacing", "4"]
    assert main(argv) == 0
    log = (it / "train_log.csv").read_text().splitlines()
    assert log[0].startswith("round,mode,")
    assert log[1].startswith("0,iter,")


def test_training_defaults():
    args = parse_args(["train-ppo", "ckpt.npz", "out"])
    assert RewardClip.parse(args.reward_clip) == RewardClip("quantile", 0.05, 0.95)
    assert args.reward == "selection"
    assert args.public_types == []
    assert type(oracle_reward(args, LayoutConfig())) is SelectionReward


def test_taxonomy_flags(tmp_path):
    cats = tmp_path / "categories.yaml"
    cats.write_text(
        yaml.safe_dump(
            {
                "categories": {0: "Living", 1: "Bedroom", 2: "Kitchen", 3: "Bathroom"},
                "living_type": 0,
                "denominator": ["Living", "Bedroom", "Kitchen", "Bathroom"],
            }
        )
    )
    codes = tmp_path / "codes.yaml"
    codes.write_text(
        yaml.safe_dump(
            {
                "boundary": {0: "none", 192: "interior_door"},
                "semantic": {0: "LivingRoom"},
                "interior": {0: "exterior", 255: "interior"},
            }
        )
    )
    argv = ["analyze", "masks", "out", "--categories", str(cats), "--codes", str(codes), "--public-types", "2", "3"]
    params = oracle_params(parse_args(argv))
    assert params.categories.public_types == frozenset({0, 2, 3})
    assert params.categories.denominator == ("Living", "Bedroom", "Kitchen", "Bathroom")
    assert params.codes.semantic == {0: "LivingRoom"}
    assert params.codes.ignore_types == frozenset()
    assert oracle_params(parse_args(["analyze", "masks", "out"])).codes == ChannelCodeTable.default()
    assert main(["analyze", "masks", "out", "--codes", str(tmp_path / "missing.yaml")]) == 1


def test_screen_scores_with_the_run_taxonomy(tmp_path):
    synth, run = tmp_path / "synth", tmp_path / "run"
    assert main(["--seed", "5", "synth", str(synth), "--count", "6", "--rooms", "5", "6"]) == 0
    assert main(["analyze", str(synth / "masks"), str(run)]) == 0
    assert main(["screen", str(run)]) == 0
    default = (run / "screening.csv").read_text()
    cats = tmp_path / "categories.yaml"
    cats.write_text(yaml.safe_dump({"categories": {0: "Living", 1: "Bedroom"}, "living_type": 1}))
    assert main(["screen", str(run), "--categories", str(cats)]) == 0
    assert (run / "screening.csv").read_text() != default
    assert not (run / "topk.txt").exists()


def test_hybrid_reward_from_the_command_line(tmp_path):
    weights = tmp_path / "weights.yaml"
    weights.write_text(yaml.safe_dump({"weights": {"selection": 1.0, "profile_distance": 0.5}}))
    args = parse_args(["train-iter", "ckpt.npz", "out", "--reward", "hybrid", "--reward-weights", str(weights)])
    reward = oracle_reward(args, LayoutConfig())
    assert isinstance(reward, HybridReward)
    assert reward.weights["profile_distance"] == 0.5
    assert reward.weights["living_adv"] == 0.0
    assert "Living" in reward.reference

    ckpt = tmp_path / "base" / "policy.npz"
    assert main(["pretrain", str(ckpt), "--count", "8", "--epochs", "1", "--batch-size", "4"]) == 0
    ppo = tmp_path / "ppo"
    argv = ["train-ppo", str(ckpt), str(ppo), "--rounds", "1", "--rollouts", "2", "--sub-epochs", "1", "--respacing", "4"]
    assert main(argv + ["--reward", "hybrid", "--reward-weights", "selection=1,living_adv=0.5"]) == 0
    assert len((ppo / "train_log.csv").read_text().splitlines()) == 2
    assert main(argv + ["--reward", "hybrid", "--reward-weights", "beauty=1"]) == 1
