"""Command-line entry point: run, stability, and landscape commands.

Exit codes: 0 a valid solution was found (or the export succeeded), 1
configuration error, 2 oracle failure, 3 clean run with no solution.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import artifacts
from .config import RunConfig, build_run_plan
from .errors import ConfigError, LatentOptError, OracleError
from .landscape import (PROJECTION_CONVENTION, evaluate_grid, principal_grid,
                        project_trajectory, random_grid)
from .seeding import derive_seed, rng_stream
from .solver import run_with_restarts

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ORACLE = 2
EXIT_NO_SOLUTION = 3


def _closing(suite):
    class _Ctx:
        def __enter__(self):
            return suite

        def __exit__(self, *exc):
            if hasattr(suite, "close"):
                suite.close()
            return False

    return _Ctx()


def _run_one(plan, suite, z0, **overrides):
    kwargs = dict(plan.solver_kwargs)
    kwargs.update(overrides)
    restarts = kwargs.pop("restarts")
    return run_with_restarts(plan.objective, suite, z0, restarts=restarts, **kwargs)


def cmd_run(plan):
    out = artifacts.ensure_out_dir(plan.out_dir)
    t0 = time.perf_counter()
    with _closing(plan.suite) as suite:
        result = _run_one(plan, suite, plan.z0)
        counts = suite.snapshot_query_counts() if suite is not None else {}
    wall = time.perf_counter() - t0

    latents_files = {}
    if plan.dump_latents:
        for res in result.restarts:
            if not res.trajectory:
                continue
            name = f"latents_r{res.restart}.bin"
            artifacts.dump_latents(os.path.join(out, name), res.trajectory)
            latents_files[str(res.restart)] = name
    artifacts.write_trajectory_csv(
        os.path.join(out, "trajectory.csv"), result.restarts,
        plan.objective.property_names, plan.objective.similarity_names,
        plan.config_hash, plan.seed)
    artifacts.write_solutions_json(
        os.path.join(out, "solutions.json"), result, plan.z0,
        plan.config_hash, plan.seed, latents_files)
    artifacts.write_metadata(
        os.path.join(out, "run_meta.json"), plan.config_hash, plan.seed,
        counts, result.n_loss_evaluations, wall,
        extra={"projection_convention": PROJECTION_CONVENTION,
               "alignment_log_base": "natural"})

    aborts = [r.aborted for r in result.restarts if r.aborted]
    if result.success:
        best = result.solutions.best
        print(f"solution found: sequence={best.sequence!r} score={best.score:.6g} "
              f"loss={best.loss:.6g} (restart {best.restart}, iteration {best.iteration})")
        return EXIT_OK
    if any("oracle failure" in a for a in aborts):
        print(f"oracle failure: {aborts[0]}", file=sys.stderr)
        return EXIT_ORACLE
    print("no valid solution found")
    return EXIT_NO_SOLUTION


def _stability_start(plan, start_index, **overrides):
    suite = plan.suite_factory()
    with _closing(suite):
        seed = derive_seed(plan.seed, "start", start_index)
        return _run_one(plan, suite, plan.z0, seed=seed, **overrides)


def _map_starts(plan, n_starts, jobs, **overrides):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_stability_start, plan, i, **overrides)
                       for i in range(n_starts)]
            return [f.result() for f in futures]
    return [_stability_start(plan, i, **overrides) for i in range(n_starts)]


def cmd_stability(plan, jobs=1):
    if hasattr(plan.suite, "close"):
        plan.suite.close()  # each start gets its own suite from the factory
    restarts_list = plan.stability.get("restarts_list")
    q_list = plan.stability.get("q_list")
    if not restarts_list and not q_list:
        raise ConfigError("[stability] needs restarts_list and/or q_list")
    n_starts = plan.stability["starts"]
    out = artifacts.ensure_out_dir(plan.out_dir)
    rows = []

    if restarts_list:
        max_restarts = max(restarts_list)
        results = _map_starts(plan, n_starts, jobs, restarts=max_restarts)
        first_success = []
        for result in results:
            flags = result.success_flags
            first_success.append(flags.index(True) if True in flags else None)
        for k in restarts_list:
            successes = sum(1 for f in first_success if f is not None and f < k)
            rows.append((f"restarts={k}", n_starts, successes))

    if q_list:
        for q in q_list:
            results = _map_starts(plan, n_starts, jobs, n_queries=q)
            successes = sum(1 for r in results if r.success)
            rows.append((f"Q={q}", n_starts, successes))

    path = os.path.join(out, "stability.csv")
    artifacts.write_stability_csv(path, rows, plan.config_hash, plan.seed)
    for setting, starts, successes in rows:
        print(f"{setting}: {successes}/{starts} = {successes / starts:.3f}")
    return EXIT_OK


def cmd_landscape(plan, solutions_path):
    payload = artifacts.load_solutions(solutions_path)
    z0 = np.asarray(payload["z0"], dtype=np.float64)
    best = payload.get("best")
    if not best or best.get("latent") is None:
        raise ConfigError(f"{solutions_path} has no solution point to anchor the grid")
    z_star = np.asarray(best["latent"], dtype=np.float64)

    ls = plan.landscape
    rng = rng_stream(plan.seed, "landscape")
    if ls["mode"] == "principal":
        grid = principal_grid(
            z0, z_star,
            x_range=ls["x_range"] or (-0.5, 1.5),
            y_range=ls["y_range"] or (-2.0, 2.0),
            resolution=ls["resolution"], rng=rng)
    else:
        grid = random_grid(
            z0,
            x_range=ls["x_range"] or (-1.6, 1.6),
            y_range=ls["y_range"] or (-1.6, 1.6),
            resolution=ls["resolution"], rng=rng)

    out = artifacts.ensure_out_dir(plan.out_dir)
    with _closing(plan.suite) as suite:
        rows = evaluate_grid(grid, plan.objective, suite)
    artifacts.write_grid_csv(
        os.path.join(out, "grid.csv"), rows,
        plan.objective.similarity_names, plan.objective.property_names,
        plan.config_hash, plan.seed)

    latents_name = payload.get("latents_files", {}).get(str(best["restart"]))
    if latents_name is None:
        raise ConfigError(
            "solutions file has no dumped latents for the best restart; "
            "rerun with dump_latents = true")
    latents_path = os.path.join(os.path.dirname(os.path.abspath(solutions_path)),
                                latents_name)
    latents = artifacts.load_latents(latents_path, z0.size)
    points = project_trajectory(list(latents), grid)
    artifacts.write_projection_csv(
        os.path.join(out, "projection.csv"), points, plan.config_hash, plan.seed)
    print(f"wrote {len(rows)} grid cells and {len(points)} projected iterates to {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latentopt",
        description="Query-based black-box optimization over a latent sequence space.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("run", "run one optimization from a config file"),
            ("stability", "sweep restarts and/or query counts, writing a success-curve CSV"),
            ("landscape", "export a 2-D landscape grid and projected trajectory")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the run config file")
        p.add_argument("--seed", type=int, default=None, help="override [solver] seed")
        p.add_argument("--out-dir", default=None, help="override [output] dir")
        p.add_argument("--oracle-cmd", default=None,
                       help="override the oracle with a worker command line")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for stability starts")
        if name == "landscape":
            p.add_argument("solutions", help="solutions.json from a previous run")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config)
        if args.seed is not None:
            cfg.set("solver", "seed", args.seed)
        if args.out_dir is not None:
            cfg.set("output", "dir", args.out_dir)
        if args.oracle_cmd is not None:
            cfg.set("oracle", "command", args.oracle_cmd)
            cfg.drop("oracle", "testbed")
        plan = build_run_plan(cfg)
        if args.command == "run":
            return cmd_run(plan)
        if args.command == "stability":
            return cmd_stability(plan, jobs=max(1, args.jobs))
        return cmd_landscape(plan, args.solutions)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleError as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except LatentOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
