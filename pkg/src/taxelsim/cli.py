"""Command-line entry point: ``taxelsim {simulate,calibrate,bench-tactile,validate}``.

Results go to stdout as JSON; logs go to stderr. Exit codes: 0 success, 1 a
failed check or invalid input, 2 a configuration error, 3 a poisoned state.
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from taxelsim.calibration import build_calibration_map, read_samples_csv, save_calibration
from taxelsim.configuration import Configuration, EpisodeConfig, resolve_episode_config
from taxelsim.errors import ConfigError, TaxelSimError
from taxelsim.kinematics import fk_arrays, load_hand_model
from taxelsim.oracles import validate_scene
from taxelsim.policies import POLICIES
from taxelsim.runner import run_batch, summarize
from taxelsim.tactile import sense_arrays
from taxelsim.utils import SCHEMA_VERSION, format_summary, write_json, write_trace

logger = logging.getLogger(__name__)


def _emit(data: dict) -> None:
    sys.stdout.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    sys.stdout.flush()


def _load_config(source: Optional[str], steps: Optional[int]) -> EpisodeConfig:
    config = resolve_episode_config(source)
    if steps is not None:
        if steps < 1:
            raise ConfigError("steps", "must be >= 1")
        config = replace(config, max_steps=steps)
    return config


def cmd_simulate(args: argparse.Namespace, configurable: Configuration) -> int:
    if args.envs < 1:
        raise ConfigError("envs", "must be >= 1")
    config = _load_config(args.config, args.steps)
    traces = run_batch(config, args.seed, args.envs, args.policy, threads=args.threads, configurable=configurable)
    summary = summarize(traces)
    if args.out:
        out = Path(args.out)
        for trace in traces:
            write_trace(trace, out, configurable.trace_precision)
        write_json(summary, out / "summary.json")
        logger.info(f"[simulate] Wrote {len(traces)} traces to {out}")
    if args.policy == "external-stdin":
        # stdout carries the action protocol
        logger.info("[simulate]\n" + format_summary(summary))
    else:
        _emit(summary)
    return 0


def cmd_calibrate(args: argparse.Namespace, configurable: Configuration) -> int:
    samples = read_samples_csv(args.csv)
    calibration = build_calibration_map(samples, shared=args.shared, intercept=args.intercept)
    if args.out:
        save_calibration(calibration, args.out)
        logger.info(f"[calibrate] Wrote {args.out}")
    _emit(calibration.to_dict())
    return 0


def bench_tactile(config: EpisodeConfig, n_envs: int, n_steps: int, seed: int = 0, hand_model: Optional[str] = None) -> dict:
    """Time batched taxel sensing over random hand configurations.

    Only the sensing pass is timed; forward kinematics runs outside the clock.
    """
    if n_envs < 1 or n_steps < 1:
        raise ConfigError("envs" if n_envs < 1 else "steps", "must be >= 1")
    model = load_hand_model(config.hand_model or hand_model)
    rng = np.random.default_rng(seed)
    rotations = np.broadcast_to(np.eye(3), (n_envs, 3, 3))
    translations = np.broadcast_to(np.asarray(config.object.initial_position, dtype=float), (n_envs, 3))
    elapsed = 0.0
    active = 0
    for _ in range(n_steps):
        q = rng.uniform(model.lower_limits, model.upper_limits, size=(n_envs, model.dof))
        frames = fk_arrays(model, q)
        start = time.perf_counter()
        sense = sense_arrays(
            frames.taxel_positions, frames.tip_translations, config.object.shape, rotations, translations, config.material
        )
        elapsed += time.perf_counter() - start
        active += int(np.sum(sense.active_count))
    total = n_envs * n_steps * model.n_taxels
    return {
        "schema_version": SCHEMA_VERSION,
        "shape": config.object.shape.variant,
        "n_envs": n_envs,
        "n_steps": n_steps,
        "taxels_per_step": model.n_taxels,
        "total_queries": total,
        "active_taxels": active,
        "seconds": elapsed,
        "queries_per_second": total / elapsed if elapsed > 0 else None,
    }


def cmd_bench_tactile(args: argparse.Namespace, configurable: Configuration) -> int:
    config = _load_config(args.config, None)
    report = bench_tactile(config, args.envs, args.steps or 100, args.seed, configurable.hand_model)
    logger.info(f"[bench-tactile] {report['total_queries']} queries in {report['seconds']:.3f} s")
    _emit(report)
    return 0


def cmd_validate(args: argparse.Namespace, configurable: Configuration) -> int:
    if args.config is None:
        raise ConfigError("config", "validate needs a scene file")
    report = validate_scene(args.config)
    if args.out:
        write_json(report, args.out)
    _emit(report)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taxelsim", description="Tactile hand simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run seeded episodes and write traces")
    simulate.add_argument("--config", default=None, help="episode config JSON, or 'grasp' / 'rotate'")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--envs", type=int, default=1)
    simulate.add_argument("--steps", type=int, default=None, help="override max_steps")
    simulate.add_argument("--policy", choices=POLICIES, default="zero")
    simulate.add_argument("--threads", type=int, default=None, help="worker threads (default TAXELSIM_THREADS)")
    simulate.add_argument("--out", default=None, help="directory for traces and summary.json")
    simulate.set_defaults(func=cmd_simulate)

    calibrate = sub.add_parser("calibrate", help="fit the current/torque to force maps")
    calibrate.add_argument("--csv", required=True, help="columns joint_id, drive_signal, contact_force, domain")
    calibrate.add_argument("--shared", action="store_true", help="one map for all joints")
    calibrate.add_argument("--intercept", action="store_true", help="fit F = a*s + b instead of F = a*s")
    calibrate.add_argument("--out", default=None, help="calibration JSON to write")
    calibrate.set_defaults(func=cmd_calibrate)

    bench = sub.add_parser("bench-tactile", help="measure taxel queries per second")
    bench.add_argument("--config", default=None)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--envs", type=int, default=64)
    bench.add_argument("--steps", type=int, default=100)
    bench.set_defaults(func=cmd_bench_tactile)

    validate = sub.add_parser("validate", help="check contact math against the brute-force oracle")
    validate.add_argument("--config", default=None, help="scene JSON")
    validate.add_argument("--out", default=None, help="report JSON to write")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configurable = Configuration.from_runnable_config()
    logging.basicConfig(
        stream=sys.stderr,
        level=configurable.log_level.upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args, configurable)
    except TaxelSimError as e:
        logger.error(f"[{args.command} error] {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
