import numpy as np
import pytest

from smero.laurent import TruncatedLaurentSeries
from smero.local import LocalOperatorData


def admissible_u(r, rng, degree=None, scale=0.5):
    """r(r+1)/y^2 plus a random regular part with the odd degrees below 2r removed."""
    degree = 2 * r + 4 if degree is None else degree
    terms = {-2: r * (r + 1)}
    for k in range(degree + 1):
        if k % 2 == 1 and k < 2 * r:
            continue
        terms[k] = scale * rng.normal()
    return terms


def local_op(terms, max_degree=None):
    max_degree = max(terms) if max_degree is None else max_degree
    return LocalOperatorData.from_terms(terms, center=0.0, max_degree=max_degree)


def series(terms, max_degree=None):
    max_degree = max(terms) if max_degree is None else max_degree
    return TruncatedLaurentSeries.from_dict(terms, center=0.0, max_degree=max_degree)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
