import random
from functools import reduce

import pytest

from moddiq.decomp import (
    associated_primes_fp,
    canonical_mis,
    factor_fp,
    factor_poly,
    factor_univariate_fp,
    group_by_mis,
    intermediate_decomposition,
    radical_candidate,
    radical_fp,
    rational_primes,
    vdim_over,
)
from moddiq.errors import UnitIdeal
from moddiq.groebner import Ideal
from moddiq.idealops import intersect_all
from moddiq.modular import ModularRunConfig
from moddiq.polycore import GREVLEX, Ring


def evaluate(f, a, p):
    return sum(int(c) * pow(a, e[0], p) for e, c in f.sorted_terms()) % p


def root_multiplicities(f, p):
    """Roots of f over F_p with multiplicities, by repeated synthetic division."""
    coeffs = [0] * (f.total_degree() + 1)
    for e, c in f.sorted_terms():
        coeffs[e[0]] = int(c)
    out = {}
    for a in range(p):
        cs = coeffs[:]
        k = 0
        while len(cs) > 1:
            # divide by (x - a), low-to-high coefficients
            q = [0] * (len(cs) - 1)
            acc = 0
            for i in range(len(cs) - 1, 0, -1):
                acc = (acc * a + cs[i]) % p
                q[i - 1] = acc
            rem = (acc * a + cs[0]) % p
            if rem:
                break
            k += 1
            cs = q
        if k:
            out[a] = k
    return out


@pytest.mark.parametrize("p", [2, 3, 5, 7, 13])
def test_univariate_factorization_against_root_enumeration(p):
    rng = random.Random(p)
    R = Ring(("x",), GREVLEX, p)
    (x,) = R.gens()
    for _ in range(40):
        deg = rng.randint(1, 8)
        f = R.from_dict({(i,): rng.randrange(p) for i in range(deg)})
        f = f + x**deg
        facs = factor_univariate_fp(f)
        prod = reduce(lambda a, b: a * b, [g**e for g, e in facs], R.one())
        assert prod == f.monic()
        linear = {(-int(g.terms.get(0, 0))) % p: e for g, e in facs if g.total_degree() == 1}
        assert linear == root_multiplicities(f, p)
        for g, _ in facs:
            if 2 <= g.total_degree() <= 3:
                assert all(evaluate(g, a, p) for a in range(p))


def test_sum_of_squares_splits_only_when_p_is_1_mod_4():
    x5 = Ring(("x",), GREVLEX, 5).gen("x")
    assert len(factor_univariate_fp(x5**2 + 1)) == 2
    x3 = Ring(("x",), GREVLEX, 3).gen("x")
    assert len(factor_univariate_fp(x3**2 + 1)) == 1


def test_multivariate_factoring():
    R = Ring(("x", "y"), GREVLEX, 101)
    x, y = R.gens()
    facs = factor_fp((x - y) ** 2 * (x + y))
    assert sorted(e for _, e in facs) == [1, 2]
    Q = Ring(("x", "y"), GREVLEX, 0)
    x, y = Q.gens()
    assert len(factor_poly(x**2 - 2 * y**2)) == 1
    assert len(factor_poly(x**2 - 4 * y**2)) == 2
    with pytest.raises(ValueError):
        factor_fp(x)


def test_vdim_over_parameters(xy):
    R, x, y = xy
    assert vdim_over(Ideal(R, [x**2 - y]), ["y"]) == 2
    assert vdim_over(Ideal(R, [x**3, y**2]), []) == 6


def test_associated_primes_fp_embedded():
    R = Ring(("x", "y"), GREVLEX, 32003)
    x, y = R.gens()
    res = associated_primes_fp(Ideal(R, [x**2, x * y]))
    assert res.complete
    assert [P.gb().polys for P in res.primes] == [Ideal(R, [x]).gb().polys, Ideal(R, [x, y]).gb().polys]
    assert radical_fp(Ideal(R, [x**2, x * y])) == Ideal(R, [x])
    with pytest.raises(UnitIdeal):
        associated_primes_fp(Ideal(R, [R.one()]))


def test_associated_primes_fp_splitting():
    R = Ring(("x", "y", "z"), GREVLEX, 32003)
    x, y, z = R.gens()
    res = associated_primes_fp(Ideal(R, [x * y * z, x**2 - y * z**2]))
    assert set(res.primes) == {Ideal(R, [x, y]), Ideal(R, [x, z])}
    groups = group_by_mis(res)
    assert set(groups) == {("z",), ("y",)}
    assert canonical_mis(Ideal(R, [x, y])) == ("z",)


def test_rational_primes(xy):
    R, x, y = xy
    J = Ideal(R, [(x**2 + 1) * (x - 2), y - x])
    primes = rational_primes(J, [])
    assert set(primes) == {Ideal(R, [x**2 + 1, y - x]), Ideal(R, [x - 2, y - 2])}


def test_radical_candidate(xy):
    R, x, y = xy
    I = Ideal(R, [x**3, x**2 * y**2])
    assert radical_candidate(I) == Ideal(R, [x])


def test_intermediate_decomposition_worked(worked):
    R, I, J = worked
    x, y = R.gens()
    d = intermediate_decomposition(I)
    assert d.certified_cover
    assert set(d.groups) == {("y",), ()}
    g = d.groups[("y",)]
    assert g.basis.polys == Ideal(R, [x**2 + x]).gb().polys
    assert g.radical and g.ass_subset
    assert intersect_all([c.component for c in d.all_components()]) == I
    rep = d.report()
    assert rep["cover_verified"] and len(rep["groups"]) == 2
    assert {tuple(c) for c in rep["groups"][0]["prime_components"]} == {("x",), ("x + 1",)}


@pytest.mark.parametrize("residue", [1, 3])
def test_intermediate_decomposition_is_not_fooled_by_splitting_primes(residue):
    R = Ring(("x",), GREVLEX, 0)
    (x,) = R.gens()
    I = Ideal(R, [(x**2 + 1) * (x + 1)])
    cfg = ModularRunConfig(prime_filter=lambda p: p % 4 == residue)
    d = intermediate_decomposition(I, cfg)
    assert all(p % 4 == residue for p in d.primes_used)
    assert d.certified_cover
    comps = {c.component for c in d.all_components()}
    assert comps == {Ideal(R, [x**2 + 1]), Ideal(R, [x + 1])}


def test_intermediate_decomposition_rejects_unit(xy):
    R, x, y = xy
    with pytest.raises(UnitIdeal):
        intermediate_decomposition(Ideal(R, [x, x + 1]))
