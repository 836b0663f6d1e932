import numpy as np
import pytest

from mwetag import crf
from mwetag.corpus import parse_dimsum
from mwetag.synth import synthetic_corpus

TWO_TOKEN_FIXTURE = "1\tby\tby\tADP\tB\t0\n2\tand\tand\tCONJ\tI\t1\n\n"


@pytest.fixture
def two_token_corpus():
    return parse_dimsum(TWO_TOKEN_FIXTURE, split_name="fixture")


@pytest.fixture
def small_corpus():
    return synthetic_corpus(10, 80, seed=3, split_name="small", id_prefix="sm")


def random_crf_instance(rng, T, L=3):
    emissions = rng.normal(size=(T, L))
    params = crf.CrfParams(
        transitions=rng.normal(size=(L, L)),
        start=rng.normal(size=L),
        end=rng.normal(size=L),
    )
    return emissions, params
