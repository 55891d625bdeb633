"""Command-line surface: train, eval, sweep, rollout, plot.

Every command writes its artifacts under an output directory (flag --out,
config [run] out_dir, or $GAPCROSS_OUT/run_seed<N>) and refreshes that
directory's manifest.json with content hashes. Invalid configs exit with
status 2 and a message naming the offending key.
"""

import argparse
import os
import sys

import numpy as np

from .artifacts import (metrics_svg, read_metrics_csv, report_table,
                        report_to_csv, rollout_svg, rollouts_to_csv,
                        sweep_svg, sweep_table_csv, trace_from_csv,
                        trace_to_csv, write_manifest)
from .config import ConfigError, RunConfig
from .metrics import Policy, evaluate, run_episode
from .train import Trainer, load_policy


def _load_config(path: str | None, overrides) -> RunConfig:
    cfg = RunConfig.from_file(path) if path else RunConfig({})
    for sec, key, value in overrides:
        cfg.override(sec, key, value)
    return cfg


def _common_overrides(args) -> list:
    out = []
    if getattr(args, "seed", None) is not None:
        out.append(("run", "seed", args.seed))
    if getattr(args, "workers", None) is not None:
        out.append(("run", "workers", args.workers))
    if getattr(args, "n_envs", None) is not None:
        out.append(("run", "n_envs", args.n_envs))
    if getattr(args, "samples", None) is not None:
        out.append(("ppo", "total_samples", args.samples))
    if getattr(args, "case", None) is not None:
        out.append(("run", "case", args.case))
    if getattr(args, "obs_combo", None) is not None:
        out.append(("run", "obs_combo", args.obs_combo))
    if getattr(args, "scenario", None) is not None:
        out.append(("terrain", "mode", args.scenario))
    return out


def _train_run(cfg: RunConfig, out_dir: str, quiet: bool) -> Trainer:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.ini"), "w") as fh:
        fh.write(cfg.to_text())
    trainer = Trainer(cfg.env_factory(), cfg.ppo_config(),
                      seed=cfg["run", "seed"], n_envs=cfg["run", "n_envs"],
                      workers=cfg["run", "workers"], out_dir=out_dir,
                      config_text=cfg.to_text(),
                      checkpoint_every=cfg["run", "checkpoint_every"])
    trainer.train(quiet=quiet)
    with open(os.path.join(out_dir, "metrics.svg"), "w") as fh:
        fh.write(metrics_svg(trainer._metrics_rows))
    return trainer


def cmd_train(args) -> int:
    cfg = _load_config(args.config, _common_overrides(args))
    out_dir = cfg.out_dir(args.out)
    trainer = _train_run(cfg, out_dir, quiet=args.quiet)
    trainer.close()
    write_manifest(out_dir)
    print(f"trained {trainer.samples} samples -> {out_dir}")
    return 0


def _eval_setup(args):
    params, norm, meta = load_policy(args.checkpoint)
    if args.config:
        cfg = _load_config(args.config, _common_overrides(args))
    elif meta.get("config_text"):
        cfg = RunConfig.from_text(meta["config_text"])
        for sec, key, value in _common_overrides(args):
            cfg.override(sec, key, value)
    else:
        raise ConfigError("checkpoint carries no config; pass --config")
    factory = cfg.env_factory()
    probe = factory()
    if probe.obs_dim != params.obs_dim or probe.action_dim != params.act_dim:
        raise ConfigError(
            f"checkpoint dims (obs {params.obs_dim}, act {params.act_dim}) do "
            f"not match config (obs {probe.obs_dim}, act {probe.action_dim})")
    return params, norm, cfg, factory


def cmd_eval(args) -> int:
    params, norm, cfg, factory = _eval_setup(args)
    rng = (np.random.default_rng(args.seed or 0) if args.stochastic else None)
    policy = Policy(params, norm, rng=rng)
    report = evaluate(policy, factory, args.rollouts,
                      seed=args.seed if args.seed is not None else 0)
    print(report_table(report, label=os.path.basename(args.checkpoint)))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.csv"), "w") as fh:
            fh.write(report_to_csv(report, label=args.checkpoint))
        with open(os.path.join(args.out, "rollouts.csv"), "w") as fh:
            fh.write(rollouts_to_csv(report))
        with open(os.path.join(args.out, "report.txt"), "w") as fh:
            fh.write(report_table(report, label=args.checkpoint) + "\n")
        write_manifest(args.out)
    return 0


def cmd_rollout(args) -> int:
    params, norm, cfg, factory = _eval_setup(args)
    policy = Policy(params, norm)
    env = factory()
    rec, trace = run_episode(env, policy, seed=args.seed, record=args.record)
    print(f"episode: return {rec.ep_return:.3f} distance {rec.distance:.3f} m "
          f"duration {rec.duration:.2f} s gaps {rec.gaps_crossed}/{rec.n_gaps} "
          f"fall={rec.fall}")
    if args.record:
        out = args.out or "."
        os.makedirs(out, exist_ok=True)
        gaps = env.terrain.gaps
        with open(os.path.join(out, "trace.csv"), "w") as fh:
            fh.write(trace_to_csv(trace, gaps=gaps))
        with open(os.path.join(out, "rollout.svg"), "w") as fh:
            fh.write(rollout_svg(trace, gaps))
        with open(os.path.join(out, "terrain.txt"), "w") as fh:
            fh.write(env.terrain.to_text())
        write_manifest(out)
    return 0


ACTION_CASE_LABELS = {
    1: "case1_flat_cpg_xz", 2: "case2_cpg_xz", 3: "case3_cpg_z_off_x",
    4: "case4_cpg_xz_off_x", 5: "case5_off_xz", 6: "case6_cpg_off_xz",
}


def cmd_sweep(args) -> int:
    base = _load_config(args.config, _common_overrides(args))
    out_root = base.out_dir(args.out)
    os.makedirs(out_root, exist_ok=True)
    if args.mode == "action":
        ids = list(range(1, 7))
    else:
        ids = list(range(1, 17))
        base.override("run", "case", 4)  # offset+oscillator space for obs sweep
    rows = []
    for ident in ids:
        cfg = RunConfig.from_text(base.to_text())
        if args.mode == "action":
            cfg.override("run", "case", ident)
            label = ACTION_CASE_LABELS[ident]
            sub = os.path.join(out_root, f"case_{ident}")
        else:
            cfg.override("run", "obs_combo", ident)
            label = f"combo_{ident:02d}"
            sub = os.path.join(out_root, f"combo_{ident:02d}")
        trainer = _train_run(cfg, sub, quiet=True)
        policy = Policy(trainer.params, trainer.norm)
        report = evaluate(policy, cfg.env_factory(), args.rollouts,
                          seed=cfg["run", "seed"])
        trainer.close()
        row = {"id": ident, "label": label}
        row.update({name: value for name, value in report.summary_rows()})
        rows.append(row)
        print(f"{label}: success {row['success_rate_pct']:.1f}% "
              f"cot {row['cot']:.3f} froude {row['froude']:.3f} "
              f"omega_body {row['mean_body_angular_velocity']:.3f}")
    with open(os.path.join(out_root, "sweep_report.csv"), "w") as fh:
        fh.write(sweep_table_csv(rows))
    with open(os.path.join(out_root, "sweep.svg"), "w") as fh:
        fh.write(sweep_svg(rows, title=f"{args.mode} sweep"))
    write_manifest(out_root)
    return 0


def cmd_plot(args) -> int:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    wrote = []
    if args.trace:
        with open(args.trace) as fh:
            trace, gaps = trace_from_csv(fh.read())
        path = os.path.join(out, "rollout.svg")
        with open(path, "w") as fh:
            fh.write(rollout_svg(trace, gaps))
        wrote.append(path)
    if args.metrics:
        with open(args.metrics) as fh:
            rows = read_metrics_csv(fh.read())
        path = os.path.join(out, "metrics.svg")
        with open(path, "w") as fh:
            fh.write(metrics_svg(rows))
        wrote.append(path)
    if args.sweep:
        import csv as _csv
        with open(args.sweep) as fh:
            lines = [ln for ln in fh.read().splitlines()
                     if ln and not ln.startswith("#")]
        rows = []
        for row in _csv.DictReader(lines):
            rows.append({"id": row["id"], "label": row["label"],
                         "success_rate_pct": float(row["success_rate_pct"]),
                         "cot": float(row["cot"])})
        path = os.path.join(out, "sweep.svg")
        with open(path, "w") as fh:
            fh.write(sweep_svg(rows, title="sweep"))
        wrote.append(path)
    if not wrote:
        print("nothing to plot: pass --trace, --metrics, and/or --sweep",
              file=sys.stderr)
        return 2
    write_manifest(out)
    print("wrote " + ", ".join(wrote))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gapcross",
        description="Quadruped gap-crossing lab: oscillator-driven control "
                    "with PPO training, evaluation, and plotting.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=None,
                        help="root seed override")
        sp.add_argument("--workers", type=int, default=None,
                        help="rollout worker processes")
        sp.add_argument("--out", default=None,
                        help="output directory (default: config out_dir or "
                             "$GAPCROSS_OUT/run_seed<N>)")

    sp = sub.add_parser("train", help="train a policy")
    sp.add_argument("--config", help="run config (.ini)")
    sp.add_argument("--samples", type=int, default=None,
                    help="total samples override")
    sp.add_argument("--n-envs", dest="n_envs", type=int, default=None)
    sp.add_argument("--case", type=int, default=None, help="action case 1-6")
    sp.add_argument("--obs-combo", dest="obs_combo", type=int, default=None,
                    help="observation combination 1-16")
    sp.add_argument("--quiet", action="store_true")
    add_common(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--config", help="override the archived run config")
    sp.add_argument("--rollouts", type=int, default=30)
    sp.add_argument("--scenario", default=None,
                    choices=["flat", "standard", "challenging", "single_gap"])
    sp.add_argument("--stochastic", action="store_true",
                    help="sample actions instead of using the mean")
    add_common(sp)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("sweep", help="train+evaluate the 6 action cases or "
                                      "the 16 observation combinations")
    sp.add_argument("--mode", required=True, choices=["action", "obs"])
    sp.add_argument("--config", help="base run config (.ini)")
    sp.add_argument("--samples", type=int, default=None,
                    help="per-policy training samples override")
    sp.add_argument("--rollouts", type=int, default=100)
    sp.add_argument("--n-envs", dest="n_envs", type=int, default=None)
    add_common(sp)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("rollout", help="run one episode from a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--config", help="override the archived run config")
    sp.add_argument("--scenario", default=None,
                    choices=["flat", "standard", "challenging", "single_gap"])
    sp.add_argument("--record", action=argparse.BooleanOptionalAction,
                    default=True, help="write trace.csv and rollout.svg")
    add_common(sp)
    sp.set_defaults(fn=cmd_rollout)

    sp = sub.add_parser("plot", help="re-render SVGs from existing CSVs")
    sp.add_argument("--trace", help="trace.csv from `gapcross rollout`")
    sp.add_argument("--metrics", help="metrics.csv from `gapcross train`")
    sp.add_argument("--sweep", help="sweep_report.csv from `gapcross sweep`")
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
