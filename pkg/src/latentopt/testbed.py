"""Synthetic, fully verifiable optimization problems.

The codebook decoder discretizes a latent vector into a sequence by
per-block argmax, mimicking the way a real sequence decoder quantizes its
latent space while staying cheap enough to enumerate exhaustively. Smooth
linear/quadratic problems with analytic gradients verify the estimator and
the optimizers, and ``brute_force_best`` provides the ground-truth optimum
for small constrained tasks.
"""

import itertools
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .metrics import (AlignmentParams, Fingerprint, alignment_similarity,
                      normalized_similarity, tanimoto)
from .objective import Evaluation
from .oracle import OracleSuite
from .solver import Candidate
from .validation import as_latent, check_sequence

MAX_BRUTE_FORCE_SPACE = 65536


class CodebookDecoder:
    """Deterministic discretizing decoder over a fixed alphabet.

    The latent space has one block of ``k = len(alphabet)`` coordinates per
    sequence position; symbol j of the output is the argmax of block j,
    ties resolved to the lowest alphabet index. ``encode`` embeds a
    sequence as its scaled one-hot vector, an exact right inverse of
    ``decode``.
    """

    def __init__(self, alphabet="ACGT", length=6, scale=1.0):
        if len(set(alphabet)) != len(alphabet) or not alphabet:
            raise ConfigError(f"alphabet must be nonempty unique symbols: {alphabet!r}")
        if length < 1:
            raise ConfigError(f"sequence length must be >= 1, got {length}")
        self.alphabet = alphabet
        self.length = int(length)
        self.k = len(alphabet)
        self.dim = self.length * self.k
        self.scale = float(scale)

    def decode(self, z):
        z = as_latent(z, self.dim)
        blocks = z.reshape(self.length, self.k)
        picks = np.argmax(blocks, axis=1)  # first maximum = lowest alphabet index
        return "".join(self.alphabet[j] for j in picks)

    def encode(self, x):
        check_sequence(x, self.alphabet)
        if len(x) != self.length:
            raise ConfigError(f"sequence length {len(x)} != declared {self.length}")
        z = np.zeros((self.length, self.k))
        for i, c in enumerate(x):
            z[i, self.alphabet.index(c)] = self.scale
        return z.reshape(-1)


# -- toy property scorers ----------------------------------------------------

def frac_of_symbol(symbol):
    """Fraction of positions equal to ``symbol``; range [0, 1]."""

    def score(x):
        return x.count(symbol) / len(x) if x else 0.0

    return score


def window_count(pattern):
    """Number of (overlapping) occurrences of ``pattern``; empty pattern -> 0."""

    def score(x):
        if not pattern:
            return 0.0
        return float(sum(1 for i in range(len(x) - len(pattern) + 1)
                         if x[i:i + len(pattern)] == pattern))

    return score


def weighted_sum(table):
    """Sum of per-symbol weights; symbols absent from the table weigh 0."""

    def score(x):
        return float(sum(table.get(c, 0.0) for c in x))

    return score


def property_from_name(name):
    """Resolve a config-file property name to a scorer.

    Recognized patterns: ``frac_<symbol>`` and ``count_<pattern>``.
    """
    if name.startswith("frac_") and len(name) == 6:
        return frac_of_symbol(name[5:])
    if name.startswith("count_") and len(name) > 6:
        return window_count(name[6:])
    raise ConfigError(f"unknown testbed property {name!r}")


# -- toy similarity evaluators ------------------------------------------------

def toy_fingerprint(x, width=2048, max_gram=3):
    """Hash 1..max_gram substrings into a fixed-width bit fingerprint.

    CRC32-based so fingerprints are stable across processes and runs.
    """
    bits = set()
    for n in range(1, max_gram + 1):
        for i in range(len(x) - n + 1):
            gram = x[i:i + n].encode()
            bits.add(zlib.crc32(gram) % width)
    return Fingerprint.from_on_bits(bits, width)


def similarity_from_name(name, params: AlignmentParams = None):
    """Resolve a config-file similarity name to an evaluator over a ref set.

    Set-valued reference similarity reduces by the maximum over references
    (the most similar reference wins). Recognized names: ``align_sim``,
    ``align_sim_norm``, ``tanimoto``.
    """
    params = params or AlignmentParams()
    if name == "align_sim":
        return lambda x, refs: max(alignment_similarity(x, r, params) for r in refs)
    if name == "align_sim_norm":
        return lambda x, refs: max(normalized_similarity(x, r, params) for r in refs)
    if name == "tanimoto":
        return lambda x, refs: max(
            tanimoto(toy_fingerprint(x), toy_fingerprint(r)) for r in refs)
    raise ConfigError(f"unknown testbed similarity {name!r}")


def make_codebook_suite(alphabet="ACGT", length=6, property_names=(),
                        similarity_names=(), cache=False, scale=1.0):
    """Build an in-process oracle suite around a codebook decoder."""
    decoder = CodebookDecoder(alphabet=alphabet, length=length, scale=scale)
    suite = OracleSuite(
        dim=decoder.dim,
        decoder=decoder.decode,
        properties={n: property_from_name(n) for n in property_names},
        similarities={n: similarity_from_name(n) for n in similarity_names},
        encoder=decoder.encode,
        alphabet=alphabet,
        cache=cache,
    )
    suite.sequence_length = decoder.length
    return suite


# -- smooth reference problems -------------------------------------------------

@dataclass(frozen=True)
class LinearProblem:
    """loss(z) = a . z with constant gradient a."""

    a: np.ndarray

    def loss_and_grad(self, z):
        a = np.asarray(self.a, dtype=np.float64)
        return float(a @ z), a.copy()


@dataclass(frozen=True)
class QuadraticProblem:
    """loss(z) = ||z - target||^2 with gradient 2 (z - target)."""

    target: np.ndarray

    def loss_and_grad(self, z):
        delta = np.asarray(z, dtype=np.float64) - np.asarray(self.target)
        return float(delta @ delta), 2.0 * delta


def smooth_loss_and_grad(problem, z):
    """Loss value and analytic gradient of a smooth reference problem."""
    return problem.loss_and_grad(np.asarray(z, dtype=np.float64))


class SmoothObjective:
    """Adapter running a smooth latent-space problem through the solver.

    The objective's loss is the problem's loss; the molecular score is its
    negation, so the selected best is the lowest-loss iterate. An iterate
    is valid once its loss reaches ``success_loss`` (never, if None).
    """

    property_names = ()
    similarity_names = ()
    refs = ()

    def __init__(self, problem, success_loss=None):
        self.problem = problem
        self.success_loss = success_loss

    def check_resolvable(self, suite):
        pass

    def evaluate_batch(self, zs, suite=None):
        out = []
        for z in zs:
            value, _ = self.problem.loss_and_grad(z)
            valid = self.success_loss is not None and value <= self.success_loss
            out.append(Evaluation(sequence=None, properties={}, similarities={},
                                  constraint_loss=0.0, score=-value, valid=valid))
        return out

    def evaluate(self, z, suite=None):
        return self.evaluate_batch([z], suite)[0]

    def loss(self, z, suite=None):
        return self.evaluate(z, suite).loss


def brute_force_best(objective, suite, max_space=MAX_BRUTE_FORCE_SPACE):
    """Exhaustively enumerate the decoder's codomain and return the optimum.

    Applies the same scoring and validity rules as the solver; among valid
    sequences the maximal molecular score wins, ties resolved by
    enumeration order (lexicographic in alphabet indices). Returns None
    when no sequence satisfies the constraints.
    """
    alphabet = getattr(suite, "alphabet", None)
    length = getattr(suite, "sequence_length", None)
    if not alphabet or not length:
        raise ConfigError("brute force needs a suite with alphabet and length")
    if len(alphabet) ** length > max_space:
        raise ConfigError(
            f"search space {len(alphabet)}^{length} exceeds bound {max_space}")
    best = None
    best_eval = None
    for symbols in itertools.product(alphabet, repeat=length):
        x = "".join(symbols)
        ev = objective.evaluate_sequence(x, suite)
        if ev.valid and (best_eval is None or ev.score > best_eval.score):
            best, best_eval = x, ev
    if best is None:
        return None
    latent = suite.encode(best) if suite.has_encoder() else None
    return Candidate(
        restart=-1, iteration=-1, latent=latent, sequence=best,
        properties=best_eval.properties, similarities=best_eval.similarities,
        loss=best_eval.loss, score=best_eval.score, valid=True,
    )
