"""Command-line harness: dataset generation, training, convergence studies,
MPC episodes, and timing benches, all seeded and reproducible.

Configuration comes from flags, optionally seeded by a TOML file
(``--config``); explicit flags win.  Exit codes: 0 success, 1 usage error,
2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import experiments
from .coarse_learned import (displacement_stats, generate_dataset,
                             load_dataset, save_dataset)
from .core import default_scene
from .fine_physics import FineParams
from .neural_net import (DEFAULT_HIDDEN, TrainConfig, TrainingDivergedError,
                         load_model, save_model, train)
from .planner import CostParams, OptimizerConfig, write_episode_logs
from .workers import get_pool

USAGE_ERROR, RUNTIME_ERROR = 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--workers", type=int, default=4, help="worker pool size")
    p.add_argument("--config", default=None, help="TOML file with flag defaults")
    p.add_argument("--out", default=None, help="output file path")


def build_parser() -> _Parser:
    parser = _Parser(prog="parapush", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[], help="generate a training dataset CSV")
    _add_shared(p)
    p.add_argument("--samples", type=int, default=50_000)
    p.add_argument("--sliders", type=int, default=4)
    p.add_argument("--active", type=int, default=None,
                   help="active slider count (default: all)")
    p.add_argument("--aim-fraction", type=float, default=0.5)
    p.add_argument("--chain-fraction", type=float, default=0.0)

    p = sub.add_parser("train", help="train the coarse network from a dataset")
    _add_shared(p)
    p.add_argument("--data", required=True, help="dataset CSV from gen-data")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--penetration-weight", type=float, default=10.0)
    p.add_argument("--hidden", default=",".join(str(h) for h in DEFAULT_HIDDEN))
    p.add_argument("--loss-out", default=None, help="per-epoch loss CSV path")

    p = sub.add_parser("convergence", help="Parareal convergence experiments")
    _add_shared(p)
    p.add_argument("--scenes", type=int, default=100)
    p.add_argument("--actions", type=int, default=4, choices=(4, 8))
    p.add_argument("--coarse", default="analytical",
                   choices=("analytical", "learned", "both"))
    p.add_argument("--sliders", type=int, default=4)
    p.add_argument("--active", type=int, default=None)
    p.add_argument("--weights", default=None, help="weight JSON for learned runs")
    p.add_argument("--k", type=int, default=None,
                   help="iteration count (default: number of actions)")

    p = sub.add_parser("mpc", help="run seeded MPC episodes")
    _add_shared(p)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--predictor", default="parareal-learned",
                   choices=("fine", "analytical", "learned",
                            "parareal-analytical", "parareal-learned"))
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--weights", default=None)
    p.add_argument("--world-noise", type=float, default=0.0)
    p.add_argument("--max-steps", type=int, default=25)
    p.add_argument("--init-seq", default="aim", choices=("zero", "aim"))
    p.add_argument("--candidates", type=int, default=32)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--elites", type=int, default=4)
    p.add_argument("--noise-std", type=float, default=0.03)

    p = sub.add_parser("bench", help="single-step and Parareal timing")
    _add_shared(p)
    p.add_argument("--weights", default=None)
    p.add_argument("--actions", type=int, default=4)
    p.add_argument("--k", type=int, default=1)

    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    """Parse args; an optional TOML file supplies defaults, flags override."""
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, "rb") as f:
            doc = tomllib.load(f)
        table = dict(doc.get(args.command.replace("-", "_"), {}))
        table.update({k: v for k, v in doc.items() if not isinstance(v, dict)})
        known = {a.replace("-", "_") for a in vars(args)}
        defaults = {}
        for key, value in table.items():
            k = key.replace("-", "_")
            if k not in known:
                parser.error(f"unknown config key {key!r}")
            defaults[k] = value
        # re-parse so explicit flags beat config values
        parser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _resolved(args: argparse.Namespace) -> dict:
    """Resolved run configuration for embedding in output files.

    Path and pool-size keys are excluded: they do not affect the produced
    numbers, and regeneration with the same seed must be byte-identical even
    when written elsewhere.
    """
    skip = {"config", "out", "loss_out", "workers"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_gen_data(args) -> int:
    cfg = default_scene(args.sliders)
    pool = get_pool(args.workers) if args.workers > 1 else None
    samples = generate_dataset(args.samples, cfg, FineParams(),
                               rng_seed=args.seed, active=args.active,
                               aim_fraction=args.aim_fraction,
                               chain_fraction=args.chain_fraction, pool=pool)
    out = args.out or "dataset.csv"
    save_dataset(out, samples, cfg, metadata=_resolved(args))
    stats = displacement_stats(samples, cfg)
    print(f"wrote {len(samples)} samples to {out}")
    print(f"contact rate (>1 mm displacement): {stats['contact_fraction']:.1%}, "
          f"max displacement {stats['max_displacement_m']:.4f} m")
    return 0


def cmd_train(args) -> int:
    samples, meta = load_dataset(args.data)
    cfg = default_scene(int(meta.get("num_sliders", 4)))
    tc = TrainConfig(learning_rate=args.lr, epochs=args.epochs,
                     batch_size=args.batch_size,
                     penetration_weight=args.penetration_weight,
                     rng_seed=args.seed)
    hidden = tuple(int(h) for h in str(args.hidden).split(",") if h)
    model, losses = train(samples, tc, cfg, hidden=hidden)
    out = args.out or "weights.json"
    save_model(out, model, metadata=_resolved(args))
    loss_out = args.loss_out or "loss.csv"
    with open(loss_out, "w", newline="") as f:
        f.write(f"# config: {json.dumps(_resolved(args), sort_keys=True)}\n")
        w = csv.writer(f)
        w.writerow(["epoch", "loss"])
        for e, l in enumerate(losses):
            w.writerow([e, repr(float(l))])
    print(f"trained {len(model.layers)} layers on {len(samples)} samples; "
          f"loss {losses[0]:.6f} -> {losses[-1]:.6f}")
    print(f"wrote {out} and {loss_out}")
    return 0


def cmd_convergence(args) -> int:
    active = args.active if args.active is not None else args.sliders
    kinds = ["analytical", "learned"] if args.coarse == "both" else [args.coarse]
    if "analytical" in kinds and active > 1:
        if args.coarse == "analytical":
            print("error: the analytical coarse model handles a single active "
                  "slider; use --coarse learned for multi-object scenes",
                  file=sys.stderr)
            return USAGE_ERROR
        print("note: skipping the analytical model (single active slider only)")
        kinds = [k for k in kinds if k != "analytical"]

    if "learned" in kinds and args.weights is None:
        print("error: --weights is required for learned-coarse runs", file=sys.stderr)
        return USAGE_ERROR
    model = load_model(args.weights) if "learned" in kinds else None
    cfg = default_scene(args.sliders)
    iterations = args.k or args.actions
    pool = get_pool(args.workers) if args.workers > 1 else None

    rows, totals = experiments.run_convergence(
        kinds, args.scenes, args.actions, cfg, FineParams(), iterations,
        seed=args.seed, active=args.active, model=model,
        worker_count=args.workers, pool=pool)
    out = args.out or "convergence.csv"
    experiments.write_convergence_csv(out, rows, _resolved(args))
    print(experiments.convergence_summary(totals))
    print(f"wrote {out}")
    return 0


def cmd_mpc(args) -> int:
    model = None
    if args.predictor in ("learned", "parareal-learned"):
        if args.weights is None:
            print("error: --weights is required for learned predictors",
                  file=sys.stderr)
            return USAGE_ERROR
        model = load_model(args.weights)
    pool = get_pool(args.workers) if args.workers > 1 else None
    oc = OptimizerConfig(num_candidates=args.candidates, noise_std=args.noise_std,
                         elites=args.elites, refine_rounds=args.rounds,
                         rng_seed=args.seed)
    results, summary = experiments.run_mpc_batch(
        args.predictor, args.episodes, FineParams(), CostParams(), oc,
        model=model, k=args.k, worker_count=args.workers, pool=pool,
        world_noise_std=args.world_noise, max_steps=args.max_steps,
        seed=args.seed, initial_seq_mode=args.init_seq)
    out = args.out or "episodes.jsonl"
    write_episode_logs(out, results, metadata=_resolved(args))
    print(f"success rate: {summary['successes']}/{summary['episodes']} "
          f"(mean steps {summary['mean_steps']:.1f}, "
          f"predict time {summary['total_predict_s']:.1f} s)")
    print(f"wrote {out}")
    return 0


def cmd_bench(args) -> int:
    cfg = default_scene(4)
    model = load_model(args.weights) if args.weights else None
    params = FineParams()
    single = experiments.bench_single_step(cfg, params, model)
    print(f"fine step: {single['fine_step_s'] * 1e3:.2f} ms")
    print(f"analytical step: {single['analytical_step_s'] * 1e6:.1f} us "
          f"(fine/coarse = {single['fine_over_analytical']:.0f}x)")
    if model is not None:
        print(f"learned step: {single['learned_step_s'] * 1e6:.1f} us "
              f"(fine/coarse = {single['fine_over_learned']:.0f}x)")

    pool = get_pool(args.workers) if args.workers > 1 else None
    from .coarse_analytical import analytical_propagator
    par = experiments.bench_parareal(
        default_scene(1), params, analytical_propagator(default_scene(1)),
        seed=args.seed, n_actions=args.actions, iterations=args.k,
        worker_count=args.workers, pool=pool)
    print(f"serial fine rollout ({args.actions} actions): {par['serial_fine_s']:.3f} s; "
          f"parareal k={args.k} with {args.workers} workers: {par['parareal_s']:.3f} s "
          f"(ratio {par['ratio']:.2f})")

    if args.out:
        with open(args.out, "w", newline="") as f:
            f.write(f"# config: {json.dumps(_resolved(args), sort_keys=True)}\n")
            w = csv.writer(f)
            w.writerow(["metric", "value"])
            for k, v in {**single, **{f"parareal_{k}": v for k, v in par.items()}}.items():
                w.writerow([k, repr(float(v))])
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "convergence": cmd_convergence,
    "mpc": cmd_mpc,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv if argv is not None else sys.argv[1:])
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
