"""Stdio oracle worker speaking the newline-delimited JSON protocol.

Serves a codebook testbed suite so subprocess-oracle clients can be
exercised end to end: one JSON request per line on stdin, one JSON reply
per line on stdout (``{"id", "values": [...]}`` or ``{"id", "error"}``).
Replies are written in request order; the client must not rely on that.
"""

import argparse
import json
import sys

import numpy as np

from .errors import LatentOptError
from .testbed import make_codebook_suite


def handle(suite, msg):
    op = msg["op"]
    inputs = msg["inputs"]
    if op == "decode":
        return suite.decode_batch([np.asarray(z, dtype=np.float64) for z in inputs])
    if op == "property":
        return suite.eval_property_batch(msg["name"], inputs)
    if op == "similarity":
        return suite.eval_similarity_batch(msg["name"], inputs, msg.get("refs", ()))
    raise LatentOptError(f"unknown op {op!r}")


def serve(suite, stdin=None, stdout=None):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            rid = msg["id"]
        except (json.JSONDecodeError, KeyError, TypeError):
            stdout.write(json.dumps({"id": -1, "error": "malformed request"}) + "\n")
            stdout.flush()
            continue
        try:
            reply = {"id": rid, "values": handle(suite, msg)}
        except Exception as exc:  # reply with an error; the worker must survive
            reply = {"id": rid, "error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Serve a codebook testbed oracle over stdio JSON lines.")
    parser.add_argument("--alphabet", default="ACGT")
    parser.add_argument("--length", type=int, default=6)
    parser.add_argument("--properties", default="",
                        help="comma-separated property names, e.g. frac_A,count_AB")
    parser.add_argument("--similarities", default="",
                        help="comma-separated similarity names, e.g. align_sim")
    args = parser.parse_args(argv)
    suite = make_codebook_suite(
        alphabet=args.alphabet,
        length=args.length,
        property_names=[n for n in args.properties.split(",") if n],
        similarity_names=[n for n in args.similarities.split(",") if n],
    )
    serve(suite)


if __name__ == "__main__":
    main()
