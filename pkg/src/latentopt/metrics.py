"""Sequence similarity metrics.

Two families are implemented exactly:

* Tanimoto similarity (intersection over union) of fixed-width bit
  fingerprints.
* Global alignment with affine gap costs under a symmetric substitution
  matrix, plus the log-scaled and self-normalized similarity scores built
  on top of it.
"""

import math
from dataclasses import dataclass, field
from hashlib import sha256
from importlib import resources

from .errors import ConfigError, DomainError

# Pinned digest of the shipped substitution-matrix data file.
BLOSUM62_SHA256 = "8a9dceb0f694e650d94eb5c94084d5827b4b8a0b98a675a8b1de19dd823b1ef3"

NEG_INF = float("-inf")


@dataclass(frozen=True)
class Fingerprint:
    """Fixed-width bit vector stored as an integer bitset (bit i = position i)."""

    width: int
    bits: int = 0

    def __post_init__(self):
        if self.width <= 0:
            raise ConfigError(f"fingerprint width must be positive, got {self.width}")
        if self.bits < 0 or self.bits >> self.width:
            raise ConfigError("fingerprint bits fall outside the declared width")

    @classmethod
    def from_on_bits(cls, indices, width):
        bits = 0
        for i in indices:
            if not 0 <= i < width:
                raise ConfigError(f"bit index {i} outside width {width}")
            bits |= 1 << i
        return cls(width=width, bits=bits)

    def on_bits(self):
        return [i for i in range(self.width) if (self.bits >> i) & 1]

    def popcount(self):
        return self.bits.bit_count()


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """Intersection-over-union of two equal-width fingerprints, in [0, 1].

    Two all-zero fingerprints have an empty union; the 0/0 case is defined
    as 0.
    """
    if a.width != b.width:
        raise ConfigError(f"fingerprint widths differ: {a.width} vs {b.width}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 0.0
    return (a.bits & b.bits).bit_count() / union


def parse_substitution_matrix(text: str) -> dict:
    """Parse a whitespace-separated substitution table into a pair-keyed dict.

    Accepts a header row of single-letter residue names followed by one
    labeled row per residue, either full square or upper-triangular
    (each row starting at the diagonal). Asymmetric square tables are
    rejected.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows:
        raise ConfigError("substitution matrix file is empty")

    _, header = rows[0]
    letters = header
    if any(len(c) != 1 for c in letters):
        raise ConfigError("matrix header must contain single-letter residue names")
    if len(set(letters)) != len(letters):
        raise ConfigError("duplicate residue letters in matrix header")
    n = len(letters)
    if len(rows) - 1 != n:
        raise ConfigError(f"expected {n} matrix rows, found {len(rows) - 1}")

    table = {}

    def put(a, b, value):
        if (a, b) in table and table[(a, b)] != value:
            raise ConfigError(f"asymmetric matrix entry for pair ({a}, {b})")
        table[(a, b)] = value
        table[(b, a)] = value

    for i, (lineno, fields) in enumerate(rows[1:]):
        label, values = fields[0], fields[1:]
        if label != letters[i]:
            raise ConfigError(
                f"line {lineno}: row label {label!r} does not match header order"
            )
        if len(values) == n:
            offset = 0
        elif len(values) == n - i:
            offset = i  # upper-triangular row starts at the diagonal
        else:
            raise ConfigError(f"line {lineno}: wrong number of entries ({len(values)})")
        for k, v in enumerate(values):
            try:
                score = int(v)
            except ValueError:
                raise ConfigError(f"line {lineno}: non-integer entry {v!r}") from None
            put(label, letters[offset + k], score)

    for a in letters:
        for b in letters:
            if (a, b) not in table:
                raise ConfigError(f"matrix is missing entry for pair ({a}, {b})")
    return table


def load_blosum62() -> dict:
    """Load the shipped BLOSUM62 table, verifying its pinned checksum."""
    data = resources.files("latentopt.data").joinpath("blosum62.txt").read_bytes()
    digest = sha256(data).hexdigest()
    if digest != BLOSUM62_SHA256:
        raise ConfigError(f"blosum62.txt checksum mismatch: {digest}")
    return parse_substitution_matrix(data.decode())


@dataclass(frozen=True)
class AlignmentParams:
    """Scoring parameters for global alignment.

    The first symbol of a gap costs ``gap_open``; each additional symbol in
    the same gap run costs ``gap_extend``. End gaps are penalized.
    """

    matrix: dict = field(default_factory=load_blosum62)
    gap_open: float = -10.0
    gap_extend: float = -1.0

    def __post_init__(self):
        if not self.gap_open <= self.gap_extend <= 0:
            raise ConfigError(
                f"require gap_open <= gap_extend <= 0, got "
                f"{self.gap_open}/{self.gap_extend}"
            )

    def score(self, a, b):
        try:
            return self.matrix[(a, b)]
        except KeyError:
            raise ConfigError(f"symbol pair ({a}, {b}) absent from matrix") from None


def global_alignment_score(x: str, x0: str, params: AlignmentParams = None) -> float:
    """Maximal global-alignment score of ``x`` against ``x0`` under affine gaps.

    Three-state dynamic program: per cell, the best alignment ending in a
    substitution, a gap consuming ``x``, or a gap consuming ``x0``.
    Adjacent gaps in opposite sequences each pay their own opening cost.
    """
    if params is None:
        params = AlignmentParams()
    open_, ext = params.gap_open, params.gap_extend
    n, m = len(x), len(x0)
    if n == 0 and m == 0:
        return 0.0
    # sub[i][j]: last column pairs x[i-1] with x0[j-1]
    # gx[i][j]:  last column consumes x[i-1] against a gap
    # gy[i][j]:  last column consumes x0[j-1] against a gap
    sub = [[NEG_INF] * (m + 1) for _ in range(n + 1)]
    gx = [[NEG_INF] * (m + 1) for _ in range(n + 1)]
    gy = [[NEG_INF] * (m + 1) for _ in range(n + 1)]
    sub[0][0] = 0.0
    for i in range(1, n + 1):
        gx[i][0] = open_ + (i - 1) * ext
    for j in range(1, m + 1):
        gy[0][j] = open_ + (j - 1) * ext
    for i in range(1, n + 1):
        xi = x[i - 1]
        row_s, row_x, row_y = sub[i], gx[i], gy[i]
        prev_s, prev_x, prev_y = sub[i - 1], gx[i - 1], gy[i - 1]
        for j in range(1, m + 1):
            s = params.score(xi, x0[j - 1])
            row_s[j] = s + max(prev_s[j - 1], prev_x[j - 1], prev_y[j - 1])
            row_x[j] = max(prev_s[j] + open_, prev_x[j] + ext, prev_y[j] + open_)
            row_y[j] = max(row_s[j - 1] + open_, row_y[j - 1] + ext, row_x[j - 1] + open_)
    return max(sub[n][m], gx[n][m], gy[n][m])


def alignment_similarity(
    x: str, x0: str, params: AlignmentParams = None, log_base: float = None
) -> float:
    """Alignment score scaled by the log of the reference length.

    ``log_base`` defaults to the natural logarithm; the reference must have
    length >= 2 so the scale factor is positive.
    """
    if len(x0) < 2:
        raise DomainError(f"reference length must be >= 2, got {len(x0)}")
    scale = math.log(len(x0)) if log_base is None else math.log(len(x0), log_base)
    return global_alignment_score(x, x0, params) / scale


def normalized_similarity(x: str, x0: str, params: AlignmentParams = None) -> float:
    """Alignment similarity rescaled so the reference's self-similarity is 1."""
    self_sim = alignment_similarity(x0, x0, params)
    if self_sim <= 0:
        raise DomainError("reference self-similarity must be positive")
    return alignment_similarity(x, x0, params) / self_sim
