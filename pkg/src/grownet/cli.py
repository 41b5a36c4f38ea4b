"""Command-line entry point.

Commands:

* ``train``     -- run (or resume) the full ES loop with periodic evaluation,
  checkpointing and CSV logging.
* ``eval``      -- print the mean +- std return of a checkpoint's best genome.
* ``trace``     -- develop a genome and write one graph snapshot per step.
* ``diversity`` -- the paired inhibition-on/off experiment.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import os

# Cap BLAS threading before numpy loads: evaluation batches are small, and
# single-threaded kernels keep runs reproducible and avoid oversubscription.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import sys

from .config import ConfigError, load_config
from .es import CheckpointError
from .nn_core import ContractError


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors are config errors
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grownet",
                     description="Grow recurrent control policies by evolution.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--encoding", help="ndp | ndp_no_intrinsic | direct | one_shot")
        p.add_argument("--env", help="cartpole | pendulum | point_reacher")
        p.add_argument("--workers", type=int, help="evaluation worker processes")
        p.add_argument("--run-dir", help="output directory")

    p_train = sub.add_parser("train", help="run the evolution loop")
    add_common(p_train)
    p_train.add_argument("--resume", action="store_true",
                         help="continue from the run directory's checkpoint")

    p_eval = sub.add_parser("eval", help="evaluate a stored best genome")
    add_common(p_eval)
    p_eval.add_argument("--checkpoint", help="checkpoint path "
                        "(default: <run-dir>/checkpoint.bin)")
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--eval-seed", type=int, default=0,
                        help="seed for the evaluation episodes")

    p_trace = sub.add_parser("trace", help="write per-step growth snapshots")
    add_common(p_trace)
    p_trace.add_argument("--checkpoint", help="checkpoint with the genome to grow")

    p_div = sub.add_parser("diversity",
                           help="paired inhibition on/off training runs")
    add_common(p_div)
    return parser


def _overrides(args) -> dict:
    return {
        "master_seed": args.seed,
        "encoding": args.encoding,
        "env": args.env,
        "workers": args.workers,
        "run_dir": getattr(args, "run_dir", None),
    }


def main(argv=None) -> int:
    from . import runner  # deferred so --help stays fast

    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config, _overrides(args))
        if args.command == "train":
            summary = runner.train(config, resume=args.resume)
            print(f"finished at generation {summary['generation']}: "
                  f"best fitness {summary['best_fitness']:.3f} "
                  f"(checkpoint {summary['checkpoint']})")
        elif args.command == "eval":
            mean, std = runner.eval_checkpoint(config, args.episodes,
                                               args.eval_seed, args.checkpoint)
            print(f"return over {args.episodes} episodes: {mean:.3f} +- {std:.3f}")
        elif args.command == "trace":
            paths = runner.run_trace(config, config.master_seed, args.checkpoint)
            print(f"wrote {len(paths)} snapshots to {paths[0].parent}")
        elif args.command == "diversity":
            out = runner.run_diversity(config)
            for label, summary in out.items():
                steps = summary["growth_diversity"]
                print(f"{label}: final-step diversity {steps[-1]:.6g} "
                      f"(step 0: {steps[0]:.6g})")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (CheckpointError, ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
