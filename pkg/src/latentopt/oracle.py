"""Query-counted access to black-box decoders and sequence evaluators.

Every decode / property / similarity evaluation increments exactly one
counter (unless served from the optional cache), so query budgets can be
audited exactly. Two implementations are provided: an in-process suite
wrapping plain callables, and a client that talks to an external worker
process over newline-delimited JSON.
"""

import json
import math
import subprocess
import threading

import numpy as np

from .errors import ConfigError, OracleError
from .validation import as_latent


class OracleBase:
    """Shared counting, caching and batching logic for oracle suites.

    Subclasses implement ``_decode_many`` / ``_property_many`` /
    ``_similarity_many`` for cache misses only; results are reassembled in
    input order so downstream reductions stay deterministic.
    """

    def __init__(self, dim, property_names, similarity_names, cache=False):
        self.dim = int(dim)
        if self.dim < 1:
            raise ConfigError(f"latent dimension must be >= 1, got {dim}")
        self._property_names = tuple(property_names)
        self._similarity_names = tuple(similarity_names)
        self.cache_enabled = bool(cache)
        self._lock = threading.Lock()
        self._counts = {"decode": 0}
        for name in self._property_names:
            self._counts[f"property:{name}"] = 0
        for name in self._similarity_names:
            self._counts[f"similarity:{name}"] = 0
        self._decode_cache = {}
        self._value_cache = {}

    def __deepcopy__(self, memo):
        # An oracle suite is a handle on a (possibly external) service with
        # live counters; copies share it rather than duplicating state.
        return self

    # -- registry ----------------------------------------------------------

    @property
    def property_names(self):
        return self._property_names

    @property
    def similarity_names(self):
        return self._similarity_names

    def has_encoder(self):
        return False

    def encode(self, x):
        raise ConfigError("this oracle suite provides no encoder")

    def _check_property(self, name):
        if name not in self._property_names:
            raise ConfigError(f"unknown property oracle {name!r}")

    def _check_similarity(self, name):
        if name not in self._similarity_names:
            raise ConfigError(f"unknown similarity oracle {name!r}")

    # -- counters ----------------------------------------------------------

    def _count(self, key, n=1):
        with self._lock:
            self._counts[key] = self._counts.get(key, 0) + n

    def snapshot_query_counts(self):
        """Exact per-oracle evaluation counts since the last reset."""
        with self._lock:
            return dict(self._counts)

    def reset_query_counts(self):
        with self._lock:
            for key in self._counts:
                self._counts[key] = 0

    # -- evaluation --------------------------------------------------------

    def decode(self, z):
        return self.decode_batch([z])[0]

    def decode_batch(self, zs):
        zs = [as_latent(z, self.dim) for z in zs]
        results = [None] * len(zs)
        misses, miss_keys = [], []
        for i, z in enumerate(zs):
            key = z.tobytes()
            if self.cache_enabled and key in self._decode_cache:
                results[i] = self._decode_cache[key]
            elif self.cache_enabled and key in miss_keys:
                results[i] = ("pending", miss_keys.index(key))
            else:
                misses.append((i, z))
                miss_keys.append(key)
        if misses:
            decoded = self._decode_many([z for _, z in misses])
            self._count("decode", len(misses))
            for (i, z), seq in zip(misses, decoded):
                if not isinstance(seq, str) or not seq:
                    raise OracleError("decoder returned an empty or non-string value",
                                      payload=seq)
                results[i] = seq
                if self.cache_enabled:
                    with self._lock:
                        self._decode_cache[z.tobytes()] = seq
        for i, r in enumerate(results):
            if isinstance(r, tuple) and r and r[0] == "pending":
                results[i] = results[misses[r[1]][0]]
        return results

    def eval_property(self, name, x):
        return self.eval_property_batch(name, [x])[0]

    def eval_property_batch(self, name, xs):
        self._check_property(name)
        return self._values_batch(("property", name), xs, (),
                                  lambda seqs: self._property_many(name, seqs))

    def eval_similarity(self, name, x, refs):
        return self.eval_similarity_batch(name, [x], refs)[0]

    def eval_similarity_batch(self, name, xs, refs):
        self._check_similarity(name)
        refs = tuple(refs)
        if not refs:
            raise ConfigError("reference set must be nonempty")
        return self._values_batch(("similarity", name), xs, refs,
                                  lambda seqs: self._similarity_many(name, seqs, refs))

    def _values_batch(self, kind, xs, refs, evaluate):
        results = [None] * len(xs)
        misses, miss_keys = [], []
        for i, x in enumerate(xs):
            key = kind + (x,) + refs
            if self.cache_enabled and key in self._value_cache:
                results[i] = self._value_cache[key]
            elif self.cache_enabled and key in miss_keys:
                results[i] = ("pending", miss_keys.index(key))
            else:
                misses.append((i, x))
                miss_keys.append(key)
        if misses:
            values = evaluate([x for _, x in misses])
            self._count(":".join(kind), len(misses))
            for (i, x), value in zip(misses, values):
                value = float(value)
                if not math.isfinite(value):
                    raise OracleError(
                        f"{kind[0]} oracle {kind[1]!r} returned non-finite value "
                        f"for {x!r}", payload=value)
                results[i] = value
                if self.cache_enabled:
                    with self._lock:
                        self._value_cache[kind + (x,) + refs] = value
        for i, r in enumerate(results):
            if isinstance(r, tuple) and r and r[0] == "pending":
                results[i] = results[misses[r[1]][0]]
        return results

    # -- hooks ---------------------------------------------------------------

    def _decode_many(self, zs):
        raise NotImplementedError

    def _property_many(self, name, xs):
        raise NotImplementedError

    def _similarity_many(self, name, xs, refs):
        raise NotImplementedError


class OracleSuite(OracleBase):
    """In-process oracle suite over plain Python callables.

    ``decoder`` maps a latent vector to a sequence string; ``properties``
    maps names to ``f(sequence) -> float``; ``similarities`` maps names to
    ``g(sequence, refs) -> float``. An optional ``encoder`` (sequence ->
    latent) enables starting runs from a sequence.
    """

    def __init__(self, dim, decoder, properties=None, similarities=None,
                 encoder=None, alphabet=None, cache=False):
        properties = dict(properties or {})
        similarities = dict(similarities or {})
        super().__init__(dim, properties.keys(), similarities.keys(), cache=cache)
        self._decoder = decoder
        self._properties = properties
        self._similarities = similarities
        self._encoder = encoder
        self.alphabet = alphabet

    def has_encoder(self):
        return self._encoder is not None

    def encode(self, x):
        if self._encoder is None:
            raise ConfigError("this oracle suite provides no encoder")
        return as_latent(self._encoder(x), self.dim, name="encoded latent")

    def _decode_many(self, zs):
        return [self._decoder(z) for z in zs]

    def _property_many(self, name, xs):
        fn = self._properties[name]
        return [fn(x) for x in xs]

    def _similarity_many(self, name, xs, refs):
        fn = self._similarities[name]
        return [fn(x, refs) for x in xs]


class SubprocessOracle(OracleBase):
    """Client for an external oracle worker speaking JSON lines on stdio.

    Requests are single JSON objects per line::

        {"id": <u64>, "op": "decode"|"property"|"similarity",
         "name": <string>, "inputs": [<string or float-array>, ...],
         "refs": [<string>, ...]}

    Replies carry ``{"id", "values": [...]}`` on success or ``{"id",
    "error": <string>}`` on failure. Replies may arrive out of order and
    are matched back to requests by id. Writes to the child are serialized;
    large batches are split into chunked requests that are pipelined before
    any reply is collected.
    """

    CHUNK = 256

    def __init__(self, command, dim, property_names=(), similarity_names=(),
                 cache=False):
        super().__init__(dim, property_names, similarity_names, cache=cache)
        self.command = command
        self._next_id = 0
        self._io_lock = threading.Lock()
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def _child_failure(self, detail):
        stderr_tail = ""
        try:
            if self._proc.poll() is not None:
                stderr_tail = self._proc.stderr.read()[-2000:]
        except Exception:
            pass
        return OracleError(f"oracle worker failed: {detail}", payload=stderr_tail or detail)

    def _roundtrip(self, requests):
        """Send pipelined requests, collect replies by id, return in order."""
        with self._io_lock:
            try:
                for req in requests:
                    self._proc.stdin.write(json.dumps(req) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise self._child_failure(f"write failed ({exc})") from None
            pending = {req["id"]: None for req in requests}
            replies = {}
            while len(replies) < len(pending):
                line = self._proc.stdout.readline()
                if line == "":
                    raise self._child_failure("child closed its output stream")
                try:
                    msg = json.loads(line)
                    reply_id = msg["id"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise OracleError("malformed oracle reply", payload=line) from None
                if reply_id not in pending:
                    raise OracleError(f"reply id {reply_id} matches no request",
                                      payload=line)
                replies[reply_id] = (msg, line)
        out = []
        for req in requests:
            msg, line = replies[req["id"]]
            if "error" in msg:
                raise OracleError(f"oracle worker error: {msg['error']}", payload=line)
            if "values" not in msg or len(msg["values"]) != len(req["inputs"]):
                raise OracleError("oracle reply has wrong shape", payload=line)
            out.append(msg["values"])
        return out

    def _request(self, op, name, inputs, refs):
        with self._lock:
            self._next_id += 1
            rid = self._next_id
        return {"id": rid, "op": op, "name": name,
                "inputs": inputs, "refs": list(refs)}

    def _chunked(self, op, name, inputs, refs):
        requests = [
            self._request(op, name, inputs[i:i + self.CHUNK], refs)
            for i in range(0, len(inputs), self.CHUNK)
        ]
        out = []
        for values in self._roundtrip(requests):
            out.extend(values)
        return out

    def _decode_many(self, zs):
        return self._chunked("decode", "", [list(map(float, z)) for z in zs], ())

    def _property_many(self, name, xs):
        return self._chunked("property", name, list(xs), ())

    def _similarity_many(self, name, xs, refs):
        return self._chunked("similarity", name, list(xs), refs)
