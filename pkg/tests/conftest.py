import os
import random

import pytest
from hypothesis import settings

from moddiq.groebner import Ideal
from moddiq.idealops import intersect, intersect_all
from moddiq.polycore import GREVLEX, Ring

# fixed example sequence so every run explores the same cases
settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

HERE = os.path.dirname(__file__)
DATA = os.path.join(HERE, "data")


def worked_example():
    """I = (x) & (x^3, y) & (x + 1) and J = (x, y) & (x + 1) in Q[x, y]."""
    R = Ring(("x", "y"), GREVLEX, 0)
    x, y = R.gens()
    I = intersect_all([Ideal(R, [x]), Ideal(R, [x**3, y]), Ideal(R, [x + 1])])
    J = intersect(Ideal(R, [x, y]), Ideal(R, [x + 1]))
    return R, I, J


def random_poly(ring, rng, max_deg=3, max_terms=4, max_coef=9):
    f = ring.zero()
    n = ring.nvars
    for _ in range(rng.randint(1, max_terms)):
        exps = [0] * n
        for _ in range(rng.randint(0, max_deg)):
            exps[rng.randrange(n)] += 1
        c = rng.randint(-max_coef, max_coef) or 1
        f = f + ring.from_dict({tuple(exps): c})
    return f if f.terms else ring.one()


def random_ideal(ring, rng, max_gens=4, **kw):
    return Ideal(ring, [random_poly(ring, rng, **kw) for _ in range(rng.randint(1, max_gens))])


@pytest.fixture
def worked():
    return worked_example()


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture
def xy():
    R = Ring(("x", "y"), GREVLEX, 0)
    return (R,) + tuple(R.gens())


@pytest.fixture
def xyz():
    R = Ring(("x", "y", "z"), GREVLEX, 0)
    return (R,) + tuple(R.gens())
