"""
cli.py

The ``plansyntax`` console script. Subcommands:

    analyze     run the oracle over a directory of 4-channel PNG masks
    screen      score analyzed plans with the selection gates and count the cleaning stages
    bench       sample a checkpoint under held-out room counts and aggregate the oracle metrics
    train-iter  iterative Top-K retraining rounds
    train-ppo   PPO rounds against the oracle reward
    plot        redraw the profile SVG of a run directory
    synth       write synthesized conditions and their rendered masks
    pretrain    fit a baseline toy checkpoint on synthesized plans

Exit status is 0 on success, 1 on a data or configuration error and 2 on a usage error. Every random draw flows from ``--seed``. Logs go to stderr so that the files written under the output directories stay byte-stable.

The entry point is declared in ``setup.cfg``::

    console_scripts =
         plansyntax = plansyntax.cli:run
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from plansyntax import __version__

from .bench import (
    PROFILE_NAME,
    REPORT_NAME,
    TRAIN_LOG_NAME,
    BenchConfig,
    bench_report_from_dir,
    emit_profile_svg,
    load_plan_reports,
    load_reference_profile,
    run_bench,
    write_analysis,
)
from .errors import PlanSyntaxError
from .integration import METHODS
from .mask_io import ChannelCodeTable, load_mask_dir, render_png
from .metrics import CategoryMap
from .oracle import OracleParams, analyze_png, parallel_map, worker_count
from .post_training import (
    HybridReward,
    IterConfig,
    PPOConfig,
    RewardClip,
    SelectionReward,
    append_train_log,
    sspt_iter_round,
    sspt_ppo_round,
)
from .screening import GateConfig, clean_dataset, selection_score, top_k
from .syntax_graph import GraphParams
from .toy_generator import (
    Condition,
    ConditionSampler,
    LayoutConfig,
    condition_source,
    encode_condition,
    init_policy,
    load_policy,
    pretrain,
    read_conditions,
    render_layout,
    save_policy,
    synthesize_conditions,
    write_conditions,
)

__author__ = "Wai-Shing Luk"
__copyright__ = "Wai-Shing Luk"
__license__ = "MIT"

_logger = logging.getLogger(__name__)

TOPK_NAME = "topk.txt"


# ---- argument parsing ----


def _taxonomy_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("room taxonomy")
    group.add_argument("--codes", type=Path, default=None, help="channel-code table (YAML) replacing the shipped one")
    group.add_argument("--categories", type=Path, default=None, help="category map (YAML) replacing the shipped one")
    group.add_argument("--public-types", type=int, nargs="+", default=[], metavar="TYPE", help="extra room types counted as public")


def _oracle_flags(parser: argparse.ArgumentParser) -> None:
    _taxonomy_flags(parser)
    group = parser.add_argument_group("oracle")
    group.add_argument("--strict-codes", action="store_true", help="fail plans with unknown channel codes")
    group.add_argument("--min-rect-area", type=int, default=50, help="minimum rectangle area in pixels (default 50)")
    group.add_argument("--touch-dist", type=int, default=2, help="rectangle touch distance (default 2)")
    group.add_argument("--door-reach", type=int, default=2, help="door dilation reach (default 2)")
    group.add_argument("--method", choices=METHODS, default="hh", help="integration normalization (default hh)")
    group.add_argument("--raw-ra", action="store_true", help="use 1/RA instead of D_k/RA")
    group.add_argument("--workers", type=int, default=None, help="worker threads (default $PLANSYNTAX_WORKERS or 1)")


def _program_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--conditions", type=Path, default=None, help="condition file (JSON lines); synthesized when omitted")
    parser.add_argument("--train-cap", type=int, default=7, help="largest room count seen in training (default 7)")
    parser.add_argument("--respacing", default="80,20,0,0", help="timestep respacing (default 80,20,0,0)")


def _reward_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("reward")
    group.add_argument("--reward", choices=("selection", "hybrid"), default="selection", help="oracle reward (default selection)")
    group.add_argument("--reward-weights", default="selection=1", help='hybrid weights "term=w,..." or a YAML file (default selection=1)')
    group.add_argument("--reference", type=Path, default=None, help="reference profile CSV of the profile_distance term (default: shipped 8-room profile)")


def parse_args(args: Sequence[str]) -> argparse.Namespace:
    """
    The function `parse_args` builds the argument parser and parses ``args``.

    :param args: command line parameters as list of strings (for example ``["--help"]``)
    :type args: Sequence[str]
    :return: command line parameters namespace
    """
    parser = argparse.ArgumentParser(
        prog="plansyntax", description="Space-syntax oracle and post-training for floor-plan generators"
    )
    parser.add_argument("--version", action="version", version=f"plansyntax {__version__}")
    parser.add_argument("-v", "--verbose", dest="loglevel", action="store_const", const=logging.INFO, help="set loglevel to INFO")
    parser.add_argument("-vv", "--very-verbose", dest="loglevel", action="store_const", const=logging.DEBUG, help="set loglevel to DEBUG")
    parser.add_argument("--seed", type=int, default=0, help="seed of every random draw (default 0)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("analyze", help="analyze a directory of PNG masks")
    p.add_argument("masks", type=Path, help="directory of 4-channel PNG masks")
    p.add_argument("out", type=Path, help="output run directory")
    p.add_argument("--snap", action="store_true", help="snap near-miss channel values to the closest code")
    p.add_argument("--reference", type=Path, default=None, help="reference profile CSV for d_profile")
    _oracle_flags(p)

    p = sub.add_parser("screen", help="score analyzed plans with the selection gates")
    p.add_argument("run", type=Path, help="run directory holding plans/*.json")
    p.add_argument("--gates", type=Path, default=None, help="gate configuration (YAML)")
    p.add_argument("--topk", type=int, default=None, help="write the K best plan ids to RUN/topk.txt")
    _taxonomy_flags(p)

    p = sub.add_parser("bench", help="evaluate a checkpoint under held-out room counts")
    p.add_argument("checkpoint", type=Path, help="policy checkpoint (.npz)")
    p.add_argument("out", type=Path, help="output run directory")
    p.add_argument("--samples", type=int, default=200, help="plans per checkpoint (default 200)")
    p.add_argument("--eval-rooms", type=int, default=8, help="room count of the eval conditions (default 8)")
    p.add_argument("--reference", type=Path, default=None, help="reference profile CSV (default: shipped 8-room profile)")
    _program_flags(p)
    _oracle_flags(p)

    p = sub.add_parser("train-iter", help="iterative Top-K retraining")
    p.add_argument("checkpoint", type=Path, help="starting checkpoint (.npz)")
    p.add_argument("out", type=Path, help="output run directory")
    p.add_argument("--rounds", type=int, default=5)
    p.add_argument("--samples", type=int, default=64, help="candidates per round")
    p.add_argument("--topk", type=int, default=32)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--base-size", type=int, default=64, help="cached base plans entering the Top-K union")
    _program_flags(p)
    _oracle_flags(p)
    _reward_flags(p)

    p = sub.add_parser("train-ppo", help="PPO post-training")
    p.add_argument("checkpoint", type=Path, help="starting checkpoint (.npz)")
    p.add_argument("out", type=Path, help="output run directory")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--rollouts", type=int, default=32)
    p.add_argument("--sub-epochs", type=int, default=4)
    p.add_argument("--clip-eps", type=float, default=0.2)
    p.add_argument("--beta-kl", type=float, default=0.0)
    p.add_argument("--reward-clip", default="quantile:0.05,0.95", help='"none", "fixed:LO,HI" or "quantile:QLO,QHI" (default quantile:0.05,0.95)')
    p.add_argument("--lr", type=float, default=1e-3)
    _program_flags(p)
    _oracle_flags(p)
    _reward_flags(p)

    p = sub.add_parser("plot", help="redraw the profile SVG of a run directory")
    p.add_argument("run", type=Path, help="run directory holding plans/*.json")
    p.add_argument("--reference", type=Path, default=None, help="reference profile CSV")
    p.add_argument("--output", type=Path, default=None, help=f"SVG path (default RUN/{PROFILE_NAME})")

    p = sub.add_parser("synth", help="write synthesized conditions and masks")
    p.add_argument("out", type=Path, help="output directory")
    p.add_argument("--count", type=int, default=16)
    p.add_argument("--rooms", type=int, nargs="+", default=[4, 5, 6, 7], help="room counts to draw from")

    p = sub.add_parser("pretrain", help="fit a baseline checkpoint on synthesized plans")
    p.add_argument("checkpoint", type=Path, help="output checkpoint (.npz)")
    p.add_argument("--count", type=int, default=256, help="synthesized training plans")
    p.add_argument("--train-cap", type=int, default=7)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-2)
    return parser.parse_args(args)


def setup_logging(loglevel: Optional[int]) -> None:
    """
    Setup basic logging on stderr

    :param loglevel: minimum loglevel for emitting messages (WARNING when None)
    """
    logformat = "[%(asctime)s] %(levelname)s:%(name)s:%(message)s"
    logging.basicConfig(
        level=loglevel or logging.WARNING,
        stream=sys.stderr,
        format=logformat,
        datefmt="%Y-%m-%d %H:%M:%S",
    )


# ---- helpers ----


def taxonomy(args: argparse.Namespace) -> Tuple[ChannelCodeTable, CategoryMap]:
    """The channel-code table and category map of a run, shipped defaults unless overridden."""
    codes = ChannelCodeTable.from_yaml(args.codes) if args.codes else ChannelCodeTable.default()
    categories = CategoryMap.from_yaml(args.categories) if args.categories else CategoryMap.default()
    if args.public_types:
        categories = categories.with_public(args.public_types)
    return codes, categories


def oracle_params(args: argparse.Namespace, snap: bool = False) -> OracleParams:
    codes, categories = taxonomy(args)
    return OracleParams(
        graph=GraphParams(
            touch_dist=args.touch_dist,
            door_reach=args.door_reach,
            min_rect_area=args.min_rect_area,
        ),
        method=args.method,
        raw_ra=args.raw_ra,
        strict_codes=args.strict_codes,
        snap=snap,
        codes=codes,
        categories=categories,
    )


def oracle_reward(args: argparse.Namespace, layout: LayoutConfig) -> SelectionReward:
    params = oracle_params(args)
    if args.reward == "selection":
        return SelectionReward(params, layout=layout)
    weights = HybridReward.parse_weights(args.reward_weights)
    reference = load_reference_profile(args.reference) if weights.get("profile_distance") else None
    _logger.info("hybrid reward weights %s", weights)
    return HybridReward(weights, reference, params, layout=layout)


def _workers(args: argparse.Namespace) -> int:
    return worker_count() if args.workers is None else max(1, args.workers)


def _training_sampler(
    args: argparse.Namespace, layout: LayoutConfig, rng: np.random.Generator
) -> ConditionSampler:
    if args.conditions is not None:
        conditions = read_conditions(args.conditions)
    else:
        rooms = list(range(3, args.train_cap + 1))
        conditions = [c for c, _ in synthesize_conditions(256, rooms, rng, layout)]
    return ConditionSampler(conditions, cap=args.train_cap)


def _log_round(path: Path, i: int, diagnostics: Dict[str, Any], first: float, elapsed: float) -> None:
    row = dict(diagnostics, round=i)
    if elapsed > 0 and np.isfinite(first) and np.isfinite(diagnostics["mean_reward"]):
        row["delta_reward_per_hour"] = (diagnostics["mean_reward"] - first) / (elapsed / 3600.0)
    append_train_log(path, row)


# ---- subcommands ----


def cmd_analyze(args: argparse.Namespace) -> int:
    params = oracle_params(args, snap=args.snap)
    items = list(load_mask_dir(args.masks))
    if not items:
        raise PlanSyntaxError(f"no PNG mask under {args.masks}")
    reports = parallel_map(lambda item: analyze_png(item[1], params, item[0]), items, _workers(args))
    reference = load_reference_profile(args.reference) if args.reference else None
    report = write_analysis(args.out, reports, reference, params.categories.denominator)
    print(f"{report.n_plans} plans, {report.validity.get('usable', 0)} usable -> {args.out}")
    return 0


def cmd_screen(args: argparse.Namespace) -> int:
    gates = GateConfig.from_yaml(args.gates) if args.gates else GateConfig.default()
    gates = gates.aligned_with(*taxonomy(args))
    reports = load_plan_reports(args.run)
    if not reports:
        raise PlanSyntaxError(f"no plan report under {args.run}")
    ledger = clean_dataset(reports)
    ledger.write_csv(args.run / "cleaning_ledger.csv")
    scored = []
    with open(args.run / "screening.csv", "w", encoding="utf-8", newline="\n") as fp:
        fp.write("plan_id,stage,z,p,s\n")
        for r in reports:
            sc = selection_score(r, gates)
            scored.append((r.plan_id, sc.s))
            fp.write(f"{r.plan_id},{r.stage},{sc.z:.9g},{sc.p:.9g},{sc.s:.9g}\n")
    for stage, count, share in ledger.rows():
        print(f"{stage}: {count} ({share:.2f}%)")
    if args.topk:
        kept = top_k(scored, [], args.topk)
        (args.run / TOPK_NAME).write_text("".join(f"{plan_id}\n" for plan_id in kept), encoding="utf-8")
        for plan_id in kept:
            print(plan_id)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    pol = load_policy(args.checkpoint)
    cfg = BenchConfig(
        train_cap=args.train_cap,
        eval_rooms=args.eval_rooms,
        samples=args.samples,
        seed=args.seed,
        respacing=args.respacing,
        oracle=oracle_params(args),
        workers=_workers(args),
    )
    conditions = read_conditions(args.conditions) if args.conditions else None
    reference = load_reference_profile(args.reference)
    report = run_bench(pol, cfg, args.out, conditions, reference)
    print(report.to_json(), end="")
    return 0


def cmd_train_iter(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    layout = LayoutConfig()
    pol = load_policy(args.checkpoint)
    cfg = IterConfig(
        samples=args.samples,
        topk=args.topk,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        respacing=args.respacing,
        workers=_workers(args),
    )
    reward = oracle_reward(args, layout)
    sampler = _training_sampler(args, layout, rng)
    schedule = pol.config.schedule(cfg.respacing)
    draw = condition_source(sampler, layout)

    rooms = sorted({c.n_rooms for c in sampler.pool})
    base = []
    for k, (cond, x0) in enumerate(synthesize_conditions(args.base_size, rooms, rng, layout)):
        base.append((f"base{k:06d}", x0, encode_condition(cond, layout), reward(x0, cond)))

    args.out.mkdir(parents=True, exist_ok=True)
    log = args.out / TRAIN_LOG_NAME
    first, elapsed = float("nan"), 0.0
    for i in range(args.rounds):
        pol, diagnostics = sspt_iter_round(pol, base, cfg, reward, rng, schedule, draw)
        first = diagnostics["mean_reward"] if i == 0 else first
        elapsed += diagnostics["seconds"]
        _log_round(log, i, diagnostics, first, elapsed)
    _logger.info("condition guard: %d sampled, %d violations", sampler.sampled, sampler.violations)
    save_policy(args.out / "policy.npz", pol)
    print(f"{args.rounds} iter rounds -> {args.out}")
    return 0


def cmd_train_ppo(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    layout = LayoutConfig()
    pol = load_policy(args.checkpoint)
    cfg = PPOConfig(
        clip_eps=args.clip_eps,
        beta_kl=args.beta_kl,
        sub_epochs=args.sub_epochs,
        rollouts=args.rollouts,
        reward_clip=RewardClip.parse(args.reward_clip),
        respacing=args.respacing,
        lr=args.lr,
        workers=_workers(args),
    )
    reward = oracle_reward(args, layout)
    sampler = _training_sampler(args, layout, rng)
    schedule = pol.config.schedule(cfg.respacing)
    draw = condition_source(sampler, layout)

    args.out.mkdir(parents=True, exist_ok=True)
    log = args.out / TRAIN_LOG_NAME
    first, elapsed = float("nan"), 0.0
    for i in range(args.rounds):
        pol, diagnostics = sspt_ppo_round(pol, cfg, reward, rng, schedule, draw)
        first = diagnostics["mean_reward"] if i == 0 else first
        elapsed += diagnostics["seconds"]
        _log_round(log, i, diagnostics, first, elapsed)
    _logger.info("condition guard: %d sampled, %d violations", sampler.sampled, sampler.violations)
    save_policy(args.out / "policy.npz", pol)
    print(f"{args.rounds} ppo rounds -> {args.out}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    reference = load_reference_profile(args.reference) if args.reference else None
    report = bench_report_from_dir(args.run, reference)
    if not report.profile:
        raise PlanSyntaxError(f"no usable profile under {args.run}")
    (args.run / REPORT_NAME).write_text(report.to_json(), encoding="utf-8")
    out = emit_profile_svg(
        report.medians(),
        {g: (b["q25"], b["q75"]) for g, b in report.profile.items()},
        reference,
        args.output or args.run / PROFILE_NAME,
    )
    print(out)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    layout = LayoutConfig()
    plans = synthesize_conditions(args.count, args.rooms, rng, layout)
    masks = args.out / "masks"
    masks.mkdir(parents=True, exist_ok=True)
    conditions: List[Condition] = []
    for k, (cond, x0) in enumerate(plans):
        conditions.append(cond)
        (masks / f"plan{k:05d}.png").write_bytes(render_png(render_layout(x0, cond, layout)))
    write_conditions(args.out / "conditions.jsonl", conditions)
    print(f"{len(conditions)} plans -> {args.out}")
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    layout = LayoutConfig()
    rooms = list(range(3, args.train_cap + 1))
    corpus = [
        (x0, encode_condition(cond, layout))
        for cond, x0 in synthesize_conditions(args.count, rooms, rng, layout)
    ]
    pol = init_policy(layout.policy_config(), args.seed)
    pol = pretrain(pol, corpus, args.epochs, args.batch_size, args.lr, rng, pol.config.schedule())
    args.checkpoint.parent.mkdir(parents=True, exist_ok=True)
    save_policy(args.checkpoint, pol)
    print(args.checkpoint)
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "screen": cmd_screen,
    "bench": cmd_bench,
    "train-iter": cmd_train_iter,
    "train-ppo": cmd_train_ppo,
    "plot": cmd_plot,
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
}


def main(args: Sequence[str]) -> int:
    """
    The function `main` dispatches one subcommand and returns the exit status.

    :param args: command line parameters as list of strings (for example ``["-v", "analyze", "masks", "out"]``)
    :type args: Sequence[str]
    :return: 0 on success, 1 on a data or configuration error, 2 on a usage error
    """
    args = parse_args(args)
    setup_logging(args.loglevel)
    if args.command is None:
        print("usage: plansyntax [-h] [--version] [-v] [-vv] [--seed SEED] COMMAND ...", file=sys.stderr)
        return 2
    _logger.debug("running %s", args.command)
    try:
        return COMMANDS[args.command](args)
    except (PlanSyntaxError, OSError) as err:
        _logger.error("%s failed: %s", args.command, err)
        print(f"plansyntax {args.command}: {err}", file=sys.stderr)
        return 1


def run() -> None:
    """Calls :func:`main` passing the CLI arguments extracted from :obj:`sys.argv`"""
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    run()
