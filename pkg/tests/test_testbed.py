import json
import math
from pathlib import Path

import numpy as np
import pytest

from latentopt.errors import ConfigError
from latentopt.gradient import EstimatorConfig, estimate_gradient, sample_directions
from latentopt.metrics import tanimoto
from latentopt.objective import Objective, PropertyConstraint, ScoreTerm
from latentopt.seeding import rng_stream
from latentopt.testbed import (CodebookDecoder, LinearProblem, QuadraticProblem,
                               SmoothObjective, brute_force_best, frac_of_symbol,
                               make_codebook_suite, property_from_name,
                               similarity_from_name, smooth_loss_and_grad,
                               toy_fingerprint, weighted_sum, window_count)
from reference import central_difference_gradient

FIXTURES = Path(__file__).parent / "fixtures"


# -- codebook decoder -----------------------------------------------------------

def test_decode_one_hot_exact():
    dec = CodebookDecoder("ACGT", 4)
    assert dec.decode(dec.encode("GATC")) == "GATC"


def test_decode_all_zero_is_first_letter():
    dec = CodebookDecoder("ACGT", 5)
    assert dec.decode(np.zeros(20)) == "AAAAA"


def test_decode_tie_breaks_to_lowest_index():
    dec = CodebookDecoder("ACGT", 1)
    assert dec.decode(np.array([1.0, 1.0, 1.0, 1.0])) == "A"
    assert dec.decode(np.array([0.0, 2.0, 2.0, 0.0])) == "C"


def test_decode_stable_under_argmax_preserving_perturbation():
    dec = CodebookDecoder("ACGT", 3)
    z = dec.encode("CGT")
    bumped = z + 0.2  # shifts every coordinate equally within blocks
    assert dec.decode(bumped) == "CGT"
    nudged = z.copy()
    nudged[1] += 0.4  # still below the selected coordinate
    assert dec.decode(z) == dec.decode(nudged)


def test_decode_is_surjective_small():
    dec = CodebookDecoder("AC", 2)
    decoded = {dec.decode(dec.encode(s)) for s in ("AA", "AC", "CA", "CC")}
    assert decoded == {"AA", "AC", "CA", "CC"}


def test_encoder_validates():
    dec = CodebookDecoder("ACGT", 3)
    with pytest.raises(ConfigError):
        dec.encode("AC")  # wrong length
    with pytest.raises(ConfigError):
        dec.encode("AXG")  # symbol outside alphabet
    with pytest.raises(ConfigError):
        dec.decode(np.zeros(11))


# -- toy properties --------------------------------------------------------------

def test_frac_of_symbol_examples():
    assert frac_of_symbol("A")("AABA") == 0.75
    assert frac_of_symbol("A")("AAAA") == 1.0
    assert frac_of_symbol("A")("BCBC") == 0.0


def test_window_count_examples():
    assert window_count("AB")("ABAB") == 2.0
    assert window_count("AA")("AAA") == 2.0  # overlapping occurrences count
    assert window_count("")("ABAB") == 0.0


def test_weighted_sum_table():
    score = weighted_sum({"A": 1.0, "B": -0.5})
    assert score("AAB") == pytest.approx(1.5)
    assert score("CCC") == 0.0  # symbols outside the table weigh zero


def test_property_name_resolution():
    assert property_from_name("frac_G")("GG") == 1.0
    assert property_from_name("count_GT")("GTGT") == 2.0
    with pytest.raises(ConfigError):
        property_from_name("entropy")
    with pytest.raises(ConfigError):
        similarity_from_name("levenshtein")


def test_toy_fingerprint_deterministic_and_tanimoto_self():
    a = toy_fingerprint("ACGTAC")
    b = toy_fingerprint("ACGTAC")
    assert a.bits == b.bits
    assert tanimoto(a, b) == 1.0
    assert tanimoto(a, toy_fingerprint("TTTTTT")) < 1.0


def test_similarity_over_reference_set_takes_maximum():
    sim = similarity_from_name("align_sim")
    single = sim("ACGTAC", ("ACGTAC",))
    multi = sim("ACGTAC", ("TTTTTT", "ACGTAC"))
    assert multi == single


# -- smooth problems --------------------------------------------------------------

def test_quadratic_at_target():
    prob = QuadraticProblem(target=np.ones(4))
    loss, grad = smooth_loss_and_grad(prob, np.ones(4))
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_quadratic_unit_offset():
    target = np.zeros(3)
    prob = QuadraticProblem(target=target)
    z = np.array([1.0, 0.0, 0.0])
    loss, grad = smooth_loss_and_grad(prob, z)
    assert loss == 1.0
    assert grad == pytest.approx([2.0, 0.0, 0.0])


def test_linear_gradient_constant():
    a = np.array([1.0, -2.0, 0.5])
    prob = LinearProblem(a=a)
    for z in (np.zeros(3), np.ones(3), np.array([3.0, -1.0, 2.0])):
        _, grad = smooth_loss_and_grad(prob, z)
        assert grad == pytest.approx(a)


def test_analytic_gradients_match_finite_differences():
    rng = rng_stream(1, "testbed")
    for prob in (QuadraticProblem(target=rng.standard_normal(6)),
                 LinearProblem(a=rng.standard_normal(6))):
        z = rng.standard_normal(6)
        _, grad = smooth_loss_and_grad(prob, z)
        fd = central_difference_gradient(lambda v: prob.loss_and_grad(v)[0], z)
        assert grad == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_smooth_objective_validity_threshold():
    obj = SmoothObjective(QuadraticProblem(target=np.zeros(2)), success_loss=0.5)
    assert obj.evaluate(np.array([0.1, 0.1])).valid
    assert not obj.evaluate(np.array([1.0, 1.0])).valid
    never = SmoothObjective(QuadraticProblem(target=np.zeros(2)))
    assert not never.evaluate(np.array([0.0, 0.0])).valid


# -- brute force ------------------------------------------------------------------

def test_brute_force_returns_start_when_already_optimal():
    suite = make_codebook_suite("ACGT", 4, ("frac_A",), ("align_sim",))
    obj = Objective("property_constrained",
                    [PropertyConstraint("frac_A", 0.25)],
                    [ScoreTerm("align_sim", 1.0)], refs=("ACGT",))
    best = brute_force_best(obj, suite)
    assert best.sequence == "ACGT"  # the reference itself is feasible and maximal
    assert best.similarities["align_sim"] == pytest.approx(
        suite.eval_similarity("align_sim", "ACGT", ("ACGT",)))


def test_brute_force_infeasible_returns_none():
    suite = make_codebook_suite("ACGT", 3, ("frac_A",), ("align_sim",))
    obj = Objective("property_constrained",
                    [PropertyConstraint("frac_A", 2.0)],  # impossible: frac <= 1
                    [ScoreTerm("align_sim", 1.0)], refs=("AAA",))
    assert brute_force_best(obj, suite) is None


def test_brute_force_space_bound():
    suite = make_codebook_suite("ACGT", 9, ("frac_A",), ("align_sim",))
    obj = Objective("property_constrained", [PropertyConstraint("frac_A", 0.5)],
                    [ScoreTerm("align_sim", 1.0)], refs=("A" * 9,))
    with pytest.raises(ConfigError, match="exceeds"):
        brute_force_best(obj, suite)  # 4^9 > 65536


def test_brute_force_matches_frozen_fixture(codebook_suite, codebook_objective):
    fixture = json.loads((FIXTURES / "brute_force_m6k4.json").read_text())
    best = brute_force_best(codebook_objective, codebook_suite)
    assert best.sequence == fixture["best_sequence"]
    assert best.score == pytest.approx(fixture["best_score"], rel=1e-12)
    assert best.score == pytest.approx(
        fixture["best_alignment_raw"] / math.log(6) * 0.01, rel=1e-12)


# -- boundary behaviour of the estimator on the discrete decoder --------------------

def test_estimator_sees_signal_near_block_boundary(codebook_suite, codebook_objective):
    z = codebook_suite.encode("TTTTTT")
    z[0] = 0.95  # almost ties block 0 between A and T
    cfg = EstimatorConfig(n_queries=20, beta=1.0, dim=codebook_suite.dim)
    nonzero = False
    for seed in range(5):
        dirs = sample_directions(codebook_suite.dim, 20, rng_stream(seed, "boundary"))
        grad = estimate_gradient(
            lambda zz: codebook_objective.evaluate(zz, codebook_suite).loss,
            z, cfg, dirs)
        nonzero = nonzero or np.any(grad != 0.0)
    assert nonzero
