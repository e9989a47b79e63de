import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from latentopt.metrics import AlignmentParams
from latentopt.objective import Objective, PropertyConstraint, ScoreTerm
from latentopt.testbed import make_codebook_suite


@pytest.fixture(scope="session")
def align_params():
    return AlignmentParams()


@pytest.fixture()
def codebook_suite():
    return make_codebook_suite(
        alphabet="ACGT", length=6,
        property_names=("frac_A",), similarity_names=("align_sim",))


@pytest.fixture()
def codebook_objective():
    return Objective(
        mode="property_constrained",
        constraints=[PropertyConstraint("frac_A", 0.5)],
        score_terms=[ScoreTerm("align_sim", 0.01)],
        refs=["TTTTTT"],
    )
