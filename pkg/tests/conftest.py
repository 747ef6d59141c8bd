import math
import os
import sys
from itertools import combinations_with_replacement

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dice_enterprise.ladder import Ladder, ensure_connected_fine  # noqa: E402

TOY = "sqrt(2)*p^3/((sqrt(2)-5)*p^3+11*p^2-9*p+3)"


def tri6_ladder():
    s2 = math.sqrt(2)
    terms = [(s2, (3, 0, 0)), (1, (2, 0, 1)), (0.25, (1, 2, 0)),
             (2, (1, 1, 1)), (0.5, (1, 0, 2)), (0.75, (0, 2, 1))]
    return Ladder.from_terms(terms)


def uni_ladder(R):
    k = len(R) - 1
    return Ladder.from_terms([(r, (k - i, i)) for i, r in enumerate(R)])


def random_ladder(rng, m=None, max_deg=4):
    """A random fine connected ladder: a full simplex of monomials with random coefficients."""
    m = int(rng.integers(1, 4)) if m is None else m
    d = int(rng.integers(1, max_deg + 1))
    terms = []
    for combo in combinations_with_replacement(range(m + 1), d):
        if rng.random() < 0.7 or not terms:
            e = tuple(np.bincount(combo, minlength=m + 1).tolist())
            terms.append((float(rng.uniform(0.1, 5)), e))
    return ensure_connected_fine(Ladder.from_terms(terms, m=m))


@pytest.fixture
def tri6():
    return tri6_ladder()
