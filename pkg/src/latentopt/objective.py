"""Objective assembly: hinge-constrained losses over oracle evaluations.

Two scalarizations are supported, selected by ``mode``:

* ``property_constrained`` — every property must clear its threshold
  (hinge penalty when it does not) while a positively weighted sum of
  similarity scores is maximized.
* ``similarity_constrained`` — every similarity must clear its threshold
  while a positively weighted sum of property scores is maximized.

In both modes the loss to be minimized is ``constraint_loss - score`` and
a sequence is valid exactly when every active constraint holds (boundary
equality counts as satisfied).
"""

import math
from dataclasses import dataclass

from .errors import ConfigError, DomainError

PROPERTY_CONSTRAINED = "property_constrained"
SIMILARITY_CONSTRAINED = "similarity_constrained"
MODES = (PROPERTY_CONSTRAINED, SIMILARITY_CONSTRAINED)

AT_LEAST = "at-least"
AT_MOST = "at-most"


def hinge(value: float, threshold: float, direction: str = AT_LEAST) -> float:
    """Constraint violation penalty; 0 exactly when the constraint holds."""
    if not (math.isfinite(value) and math.isfinite(threshold)):
        raise DomainError(f"hinge requires finite inputs, got {value}, {threshold}")
    if direction == AT_LEAST:
        return max(threshold - value, 0.0)
    if direction == AT_MOST:
        return max(value - threshold, 0.0)
    raise ConfigError(f"unknown constraint direction {direction!r}")


@dataclass(frozen=True)
class PropertyConstraint:
    """Require ``value >= threshold`` (or ``<=`` with direction 'at-most')."""

    name: str
    threshold: float
    direction: str = AT_LEAST

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ConfigError(f"constraint threshold must be finite: {self.name}")
        if self.direction not in (AT_LEAST, AT_MOST):
            raise ConfigError(f"unknown constraint direction {self.direction!r}")

    def violation(self, value):
        return hinge(value, self.threshold, self.direction)

    def satisfied(self, value):
        if self.direction == AT_LEAST:
            return value >= self.threshold
        return value <= self.threshold


@dataclass(frozen=True)
class SimilarityConstraint:
    """Require a similarity score of at least ``threshold``."""

    name: str
    threshold: float

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ConfigError(f"constraint threshold must be finite: {self.name}")

    def violation(self, value):
        return hinge(value, self.threshold, AT_LEAST)

    def satisfied(self, value):
        return value >= self.threshold


@dataclass(frozen=True)
class ScoreTerm:
    """Positively weighted score contribution to be maximized."""

    name: str
    coefficient: float

    def __post_init__(self):
        if not (math.isfinite(self.coefficient) and self.coefficient > 0):
            raise ConfigError(
                f"score coefficient must be positive: {self.name}={self.coefficient}"
            )


@dataclass
class Evaluation:
    """One decoded-and-scored point: raw oracle values plus the assembled loss."""

    sequence: str
    properties: dict
    similarities: dict
    constraint_loss: float
    score: float
    valid: bool

    @property
    def loss(self):
        return self.constraint_loss - self.score


class Objective:
    """A mode, its constraints, its score terms, and the reference set."""

    def __init__(self, mode, constraints, score_terms, refs):
        if mode not in MODES:
            raise ConfigError(f"unknown objective mode {mode!r}")
        constraints = tuple(constraints)
        score_terms = tuple(score_terms)
        if not constraints:
            raise ConfigError("objective needs at least one constraint")
        if not score_terms:
            raise ConfigError("objective needs at least one score term")
        want = PropertyConstraint if mode == PROPERTY_CONSTRAINED else SimilarityConstraint
        for c in constraints:
            if not isinstance(c, want):
                raise ConfigError(
                    f"{mode} objectives take {want.__name__} constraints, got {c!r}"
                )
        for term in score_terms:
            if not isinstance(term, ScoreTerm):
                raise ConfigError(f"score terms must be ScoreTerm, got {term!r}")
        refs = tuple(refs)
        if not refs or not all(isinstance(r, str) and r for r in refs):
            raise ConfigError("reference set must be a nonempty list of sequences")
        self.mode = mode
        self.constraints = constraints
        self.score_terms = score_terms
        self.refs = refs

    @property
    def property_names(self):
        if self.mode == PROPERTY_CONSTRAINED:
            names = [c.name for c in self.constraints]
        else:
            names = [t.name for t in self.score_terms]
        return tuple(dict.fromkeys(names))

    @property
    def similarity_names(self):
        if self.mode == PROPERTY_CONSTRAINED:
            names = [t.name for t in self.score_terms]
        else:
            names = [c.name for c in self.constraints]
        return tuple(dict.fromkeys(names))

    def check_resolvable(self, suite):
        """Fail fast if any referenced oracle name is missing from the suite."""
        for name in self.property_names:
            if name not in suite.property_names:
                raise ConfigError(f"property oracle {name!r} not provided by suite")
        for name in self.similarity_names:
            if name not in suite.similarity_names:
                raise ConfigError(f"similarity oracle {name!r} not provided by suite")

    # -- evaluation ---------------------------------------------------------

    def evaluate_batch(self, zs, suite):
        """Decode each latent once and assemble one Evaluation per input."""
        seqs = suite.decode_batch(zs)
        return self._assemble_batch(seqs, suite)

    def evaluate(self, z, suite):
        return self.evaluate_batch([z], suite)[0]

    def evaluate_sequence(self, x, suite):
        """Score an existing sequence without touching the decoder."""
        return self._assemble_batch([x], suite)[0]

    def loss(self, z, suite):
        return self.evaluate(z, suite).loss

    def is_valid(self, x, suite):
        """True when every active constraint holds for sequence ``x``."""
        return self.evaluate_sequence(x, suite).valid

    def _assemble_batch(self, seqs, suite):
        prop_values = {
            name: suite.eval_property_batch(name, seqs)
            for name in self.property_names
        }
        sim_values = {
            name: suite.eval_similarity_batch(name, seqs, self.refs)
            for name in self.similarity_names
        }
        out = []
        for i, seq in enumerate(seqs):
            props = {name: prop_values[name][i] for name in self.property_names}
            sims = {name: sim_values[name][i] for name in self.similarity_names}
            out.append(self._assemble(seq, props, sims))
        return out

    def _assemble(self, seq, props, sims):
        if self.mode == PROPERTY_CONSTRAINED:
            constrained, scored = props, sims
        else:
            constrained, scored = sims, props
        constraint_loss = 0.0
        valid = True
        for c in self.constraints:
            constraint_loss += c.violation(constrained[c.name])
            valid = valid and c.satisfied(constrained[c.name])
        score = self.molecular_score(props, sims)
        return Evaluation(
            sequence=seq,
            properties=props,
            similarities=sims,
            constraint_loss=constraint_loss,
            score=score,
            valid=valid,
        )

    def molecular_score(self, properties, similarities):
        """The weighted score that ``select_best`` maximizes."""
        scored = similarities if self.mode == PROPERTY_CONSTRAINED else properties
        return sum(t.coefficient * scored[t.name] for t in self.score_terms)
