"""Readers and writers for run artifacts.

Every artifact embeds the config hash and seed (CSVs in a leading comment
line, JSON as top-level fields). Floats in CSVs are formatted with 17
significant digits so byte-identical reruns are byte-identical files.
"""

import json
import os

import numpy as np

from .errors import ConfigError

FLOAT_FMT = ".17g"


def _fmt(value):
    return format(float(value), FLOAT_FMT)


def _stamp(config_hash, seed):
    return f"# config_hash={config_hash} seed={seed}\n"


def write_trajectory_csv(path, restart_results, property_names, similarity_names,
                         config_hash, seed):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_stamp(config_hash, seed))
        names = list(property_names) + list(similarity_names)
        fh.write(",".join(["restart", "iter", "loss", "valid"] + names) + "\n")
        for res in restart_results:
            for rec in res.trajectory:
                row = [str(rec.restart), str(rec.iteration), _fmt(rec.loss),
                       str(int(rec.valid))]
                row += [_fmt(rec.properties[n]) for n in property_names]
                row += [_fmt(rec.similarities[n]) for n in similarity_names]
                fh.write(",".join(row) + "\n")


def candidate_to_json(candidate):
    return {
        "restart": candidate.restart,
        "iteration": candidate.iteration,
        "latent": None if candidate.latent is None else [float(v) for v in candidate.latent],
        "sequence": candidate.sequence,
        "properties": candidate.properties,
        "similarities": candidate.similarities,
        "loss": candidate.loss,
        "score": candidate.score,
        "valid": candidate.valid,
    }


def write_solutions_json(path, result, z0, config_hash, seed, latents_files=None):
    payload = {
        "config_hash": config_hash,
        "seed": seed,
        "z0": [float(v) for v in z0],
        "success": result.success,
        "best": (candidate_to_json(result.solutions.best)
                 if result.solutions.best is not None else None),
        "candidates": [candidate_to_json(c) for c in result.solutions.candidates],
        "latents_files": latents_files or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_solutions(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read solutions file {path}: {exc}") from None


def write_metadata(path, config_hash, seed, query_counts, n_loss_evaluations,
                   wall_time_s, extra=None):
    payload = {
        "config_hash": config_hash,
        "seed": seed,
        "query_counts": query_counts,
        "n_loss_evaluations": n_loss_evaluations,
        "wall_time_s": wall_time_s,
    }
    payload.update(extra or {})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dump_latents(path, trajectory):
    """Iterate latents as little-endian float64, row-major [T x d]."""
    rows = np.asarray([rec.latent for rec in trajectory], dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(rows.tobytes())


def load_latents(path, dim):
    raw = np.frombuffer(open(path, "rb").read(), dtype="<f8")
    if dim < 1 or raw.size % dim:
        raise ConfigError(f"latents file {path} does not fit dimension {dim}")
    return raw.reshape(-1, dim)


def write_grid_csv(path, rows, similarity_names, property_names, config_hash, seed):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_stamp(config_hash, seed))
        names = list(similarity_names) + list(property_names)
        fh.write(",".join(["x", "y"] + names + ["valid"]) + "\n")
        for row in rows:
            out = [_fmt(row["x"]), _fmt(row["y"])]
            out += [_fmt(row["similarities"][n]) for n in similarity_names]
            out += [_fmt(row["properties"][n]) for n in property_names]
            out.append(str(int(row["valid"])))
            fh.write(",".join(out) + "\n")


def write_projection_csv(path, points, config_hash, seed):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_stamp(config_hash, seed))
        fh.write("iter,x,y\n")
        for i, (x, y) in enumerate(points):
            fh.write(f"{i},{_fmt(x)},{_fmt(y)}\n")


def write_stability_csv(path, rows, config_hash, seed):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_stamp(config_hash, seed))
        fh.write("setting,starts,successes,rate\n")
        for setting, starts, successes in rows:
            rate = successes / starts if starts else 0.0
            fh.write(f"{setting},{starts},{successes},{_fmt(rate)}\n")


def ensure_out_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
