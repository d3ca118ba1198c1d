"""Command-line entry points: train, plot, oracle-check, eval."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .errors import ConfigError, UsageError
from .harness.config import load_config
from .harness.runner import run_experiment
from .harness.svgplot import plot_aggregates


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seeds=[args.seed])
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    summary = run_experiment(cfg, parallel_seeds=args.parallel_seeds)
    print(f"run {summary['config']}: {len(summary['seed_files'])} seed(s)")
    print(f"  aggregate: {summary['aggregate']}")
    print(
        f"  final smoothed return {summary['final_return_ma']:.4f}, "
        f"success rate {summary['final_success_ma']:.4f}"
    )
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    y_field = "success_ma_mean" if args.y == "success" else "return_ma_mean"
    err_field = "success_ma_stderr" if args.y == "success" else "return_ma_stderr"
    ylabel = "smoothed winrate" if args.y == "success" else "smoothed return"
    plot_aggregates(
        args.aggregates,
        args.out,
        y_field=y_field,
        err_field=err_field,
        xlabel=args.xlabel,
        ylabel=ylabel,
        title=args.title,
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    from .oracle import check_fixed_point_equivalence, check_monotonicity

    ok1, worst1 = check_monotonicity(args.mdps, seed=args.seed)
    print(
        f"monotonicity over {args.mdps} MDPs: "
        f"{'PASS' if ok1 else 'FAIL'} (worst violation {worst1:.3e}, tol 1e-9)"
    )
    ok2, worst2 = check_fixed_point_equivalence(args.mdps, seed=args.seed)
    print(
        f"multi-level fixed point over {args.mdps} MDPs: "
        f"{'PASS' if ok2 else 'FAIL'} (worst gap {worst2:.3e}, tol 1e-6)"
    )
    return 0 if ok1 and ok2 else 1


def _cmd_eval(args: argparse.Namespace) -> int:
    from .models.checkpoint import load_checkpoint

    model, meta = load_checkpoint(args.checkpoint)
    task = meta.get("task")
    rng = np.random.default_rng(args.seed)
    if task in ("mountain_car", "acrobot"):
        from .envs.control import make_control_env
        from .models.qset import greedy_actions

        env = make_control_env(task)
        h = model.hierarchy
        top = model.n_levels - 1
        returns, goals = [], 0
        for _ in range(args.episodes):
            s = env.reset(rng)
            total, done = 0.0, False
            while not done:
                qset = model.forward(env.features(s)[None, :].astype(np.float32))
                a = int(greedy_actions(qset, top)[0])
                out = env.step(s, float(h.payloads[top][a]))
                total += out.reward
                s = out.state
                done = out.done
            returns.append(total)
            goals += out.reached_goal
        print(
            f"{task}: mean return {np.mean(returns):.4f} over {args.episodes} episodes, "
            f"goal rate {goals / args.episodes:.2f}"
        )
    elif task == "microbattle":
        from .training.micro_loop import MicroTrainConfig, MicroTrainer

        cfg = MicroTrainConfig(
            max_level=model.tree_depth,
            scratch=len(model.levels) == 1,
            mode=model.mode,
            total_updates=0,
            eval_every=0,
        )
        trainer = MicroTrainer(cfg, args.seed)
        trainer.model = model
        wins, returns = 0, []
        for _ in range(args.episodes):
            _, ep_ret, won, _ = trainer._rollout(
                trainer.env, model.n_levels - 1, 0.0, rng
            )
            wins += won
            returns.append(ep_ret)
        print(
            f"microbattle: winrate {wins / args.episodes:.2f}, "
            f"mean return {np.mean(returns):.4f} over {args.episodes} episodes"
        )
    else:
        raise ConfigError(f"checkpoint has no usable task metadata ({task!r})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gasrl", description="growing-action-space RL experiments"
    )
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run a config over its seeds")
    t.add_argument("--config", required=True, help="path to a config file")
    t.add_argument("--seed", type=int, default=None, help="run only this seed")
    t.add_argument("--out", default=None, help="override the output directory")
    t.add_argument(
        "--parallel-seeds", type=int, default=1, help="seeds to run in parallel processes"
    )
    t.set_defaults(func=_cmd_train)

    pl = sub.add_parser("plot", help="plot aggregate CSVs to an SVG")
    pl.add_argument("aggregates", nargs="+", help="aggregate CSV files")
    pl.add_argument("--out", required=True, help="output SVG path")
    pl.add_argument("--y", choices=("return", "success"), default="return")
    pl.add_argument("--xlabel", default="episode")
    pl.add_argument("--title", default="")
    pl.set_defaults(func=_cmd_plot)

    oc = sub.add_parser("oracle-check", help="run the tabular oracle checks")
    oc.add_argument("--mdps", type=int, default=100)
    oc.add_argument("--seed", type=int, default=0)
    oc.set_defaults(func=_cmd_oracle_check)

    ev = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--episodes", type=int, default=20)
    ev.add_argument("--seed", type=int, default=0)
    ev.set_defaults(func=_cmd_eval)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
