import io
import json
import random

import pytest
from gmpy2 import mpq

from conftest import random_ideal
from moddiq.errors import ModularFailure, NotPermissible, PrimeExhaustion
from moddiq.groebner import GroebnerBasis, Ideal, buchberger, is_reduced_gb
from moddiq.idealops import contains, product, quotient, saturate
from moddiq.modular import (
    LUCKY,
    PERMISSIBLE,
    WEAK,
    LiftCandidate,
    ModularRunConfig,
    PrimePool,
    PrimeRecord,
    QuotientTask,
    choose_primes,
    classify_prime,
    crt_lift,
    crt_pair,
    delete_unlucky,
    dehomogenize,
    homogenize,
    jsonl_logger,
    mod_quotient,
    mod_saturate,
    modular_gb,
    ptest,
    rational_gb,
    rational_reconstruct,
    reconstruct,
)
from moddiq.polycore import GREVLEX, LEX, Ring


def fp_basis(polys, p):
    return buchberger(polys)


# -- primes -------------------------------------------------------------------------


def test_prime_pool_is_deterministic_and_in_range():
    cfg = ModularRunConfig(primes=8, seed=42)
    a = PrimePool(cfg).take(8)
    b = PrimePool(cfg).take(8)
    assert a == b
    assert len(set(a)) == 8
    assert all((1 << 30) <= p < (1 << 31) for p in a)
    assert PrimePool(ModularRunConfig(seed=43)).take(8) != a


def test_choose_primes_excludes_denominators():
    R = Ring(("x",), GREVLEX, 0)
    (x,) = R.gens()
    f = x - R.const(mpq(5, 6))
    recs = choose_primes(ModularRunConfig(primes=6, prime_bits=6), [[f]], [True])
    ps = [r.p for r in recs]
    assert len(set(ps)) == 6
    assert all(PERMISSIBLE in r.classification for r in recs)
    # 5/6 has denominator 6: among 2-bit primes nothing survives
    g = x - R.const(mpq(5, 6))
    pool = PrimePool(ModularRunConfig(prime_bits=2))
    with pytest.raises(PrimeExhaustion):
        choose_primes(ModularRunConfig(primes=1, prime_bits=2), [[g]], [True], pool)


def test_config_validation():
    with pytest.raises(ValueError):
        ModularRunConfig(primes=0)
    with pytest.raises(ValueError):
        ModularRunConfig(verify="ptest")


def test_classify_prime():
    R = Ring(("x", "y", "z"), GREVLEX, 0)
    x, y, z = R.gens()
    assert WEAK not in classify_prime(2, [x - R.const(mpq(3, 2))]).classification
    assert WEAK not in classify_prime(3, [x + R.const(mpq(1, 3))]).classification
    F = buchberger([x**2 - y, x * y - z, y**2 - x * z])
    assert is_reduced_gb(F.polys)
    for p in (5, 7, 11, 101, 32003):
        assert classify_prime(p, F).classification == {WEAK, PERMISSIBLE, LUCKY}


def test_effective_luckiness_fails_when_basis_degenerates():
    R = Ring(("x", "y"), GREVLEX, 0)
    x, y = R.gens()
    # x*y - 1, y^2 - x/7 ... the image mod 7 drops a term and stops being a basis
    F = buchberger([x**2 - 7 * y, x * y - 1])
    bad = [p for p in (2, 3, 5, 7, 11, 13) if not classify_prime(p, F).effectively_lucky]
    assert 7 in bad


def test_delete_unlucky_majority_and_ties():
    A, B = ((1, 0),), ((0, 1),)
    recs = [PrimeRecord(p, signature=s) for p, s in zip((2, 3, 5, 7), (A, A, A, B))]
    assert [r.p for r in delete_unlucky(recs)] == [2, 3, 5]
    tie = [PrimeRecord(p, signature=s) for p, s in zip((2, 3, 5, 7), (A, A, B, B))]
    assert {r.signature for r in delete_unlucky(tie)} == {min(A, B)}
    same = [PrimeRecord(p, signature=A) for p in (2, 3)]
    assert delete_unlucky(same) == same
    assert delete_unlucky([]) == []


# -- CRT and reconstruction ------------------------------------------------------------


def test_crt_pair():
    assert crt_pair(1, 3, 2, 5) == (7, 15)


def test_crt_lift_two_primes_reconstructs_two_thirds():
    recs = []
    for p in (97, 101):
        Rp = Ring(("x",), GREVLEX, p)
        (x,) = Rp.gens()
        c = 2 * pow(3, -1, p) % p
        recs.append(PrimeRecord(p, frozenset({LUCKY}), GroebnerBasis((x + c,), Rp)))
    # 2/3 is 33 mod 97 and 68 mod 101
    assert recs[0].result.polys[0] == recs[0].result.ring.gen("x") + 33
    assert recs[1].result.polys[0] == recs[1].result.ring.gen("x") + 68
    cand = crt_lift(recs)
    assert cand.modulus == 9797
    const = [c for m, c in cand.residue_basis[0].items() if m == 0][0]
    assert const % 97 == 33 and const % 101 == 68
    assert reconstruct(cand)
    R = Ring(("x",), GREVLEX, 0)
    assert cand.rational_basis == [R.gen("x") + R.const(mpq(2, 3))]


def test_crt_single_prime_is_identity():
    Rp = Ring(("x",), GREVLEX, 13)
    (x,) = Rp.gens()
    cand = crt_lift([PrimeRecord(13, result=GroebnerBasis((x + 5,), Rp))])
    assert cand.modulus == 13
    assert sorted(cand.residue_basis[0].values()) == [1, 5]


def test_crt_missing_monomial_counts_as_zero():
    recs = []
    for p, c in ((97, 0), (101, 1)):
        Rp = Ring(("x", "y"), GREVLEX, p)
        x, y = Rp.gens()
        recs.append(PrimeRecord(p, result=GroebnerBasis((x + c * y,), Rp)))
    cand = crt_lift(recs)
    coeffs = sorted(cand.residue_basis[0].values())
    # y-coefficient is 0 mod 97 and 1 mod 101
    assert any(v % 97 == 0 and v % 101 == 1 for v in coeffs)


def test_crt_rejects_mixed_signatures():
    Rp, Rq = Ring(("x", "y"), GREVLEX, 5), Ring(("x", "y"), GREVLEX, 7)
    recs = [PrimeRecord(5, result=GroebnerBasis((Rp.gen("x"),), Rp)),
            PrimeRecord(7, result=GroebnerBasis((Rq.gen("y"),), Rq))]
    with pytest.raises(RuntimeError):
        crt_lift(recs)


def euclid_oracle(c, m):
    """Brute force over small denominators: the unique a/b with |a|,|b| <= sqrt(m/2)."""
    import math

    bound = math.isqrt(m // 2)
    for b in range(1, bound + 1):
        a = c * b % m
        if a > m // 2:
            a -= m
        if abs(a) <= bound and math.gcd(a, b) == 1:
            return mpq(a, b)
    return None


def test_rational_reconstruct_examples():
    assert rational_reconstruct(33, 97) == mpq(2, 3)
    assert rational_reconstruct(48, 97) == mpq(-1, 2)
    assert rational_reconstruct(1, 1009) == 1
    assert rational_reconstruct(0, 1009) == 0
    with pytest.raises(ValueError):
        rational_reconstruct(1, 1)


def test_rational_reconstruct_matches_brute_force():
    for m in (97, 101, 1009, 9797):
        for c in range(0, m, max(1, m // 200)):
            assert rational_reconstruct(c, m) == euclid_oracle(c, m), (c, m)


# -- p-test -----------------------------------------------------------------------------


def _candidate(basis):
    cand = LiftCandidate(basis[0].ring, 1, [], (), list(basis))
    cand.advance("reconstructed")
    return cand


def test_ptest_accepts_correct_and_rejects_fault(xy):
    R, x, y = xy
    I = Ideal(R, [x**2 * y, x * y**2 + x])
    J = Ideal(R, [x])
    H = quotient(I, J).gb()
    task = QuotientTask(I.gb().polys, J.gens, R)
    for p in (1000003, 1000033, 1000037):
        assert ptest(_candidate(H.polys), p, task)
    # perturb one coefficient by +1
    g0 = H.polys[-1]
    bad = list(H.polys[:-1]) + [g0 + 1]
    assert not ptest(_candidate(bad), 1000003, task)


def test_ptest_skips_non_permissible_prime(xy):
    R, x, y = xy
    H = [x + R.const(mpq(1, 7))]
    task = lambda p: None
    with pytest.raises(NotPermissible):
        ptest(_candidate(H), 7, task)


def test_lift_candidate_status_is_monotone():
    cand = LiftCandidate(Ring(("x",), GREVLEX, 0), 1, [])
    cand.advance("reconstructed")
    with pytest.raises(ValueError):
        cand.advance("certified")
    cand.advance("ptest_passed")
    cand.advance("certified")
    with pytest.raises(ValueError):
        cand.advance("reconstructed")


# -- modular operations -------------------------------------------------------------------


def test_mod_quotient_trivial_cases(xy):
    R, x, y = xy
    res = mod_quotient(Ideal(R, [x**2]), Ideal(R, [x]))
    assert res.basis == Ideal(R, [x]).gb() and res.certified
    I = Ideal(R, [x**2 + y, x * y - 3])
    assert mod_quotient(I, Ideal(R, [R.one()])).basis == I.gb()


def test_mod_saturate_trivial_cases(xy):
    R, x, y = xy
    res = mod_saturate(Ideal(R, [x**2 * y]), Ideal(R, [x]))
    assert res.basis == Ideal(R, [y]).gb() and res.exponent == 2 and res.certified
    I = Ideal(R, [x**2 + y])
    res = mod_saturate(I, Ideal(R, [R.one()]))
    assert res.basis == I.gb() and res.exponent == 0


def test_mod_quotient_with_rational_coefficients(xy):
    R, x, y = xy
    I = Ideal(R, [(3 * x - 2) * (x * y - R.const(mpq(5, 7))), (3 * x - 2) * (y**2 + 11)])
    J = Ideal(R, [3 * x - 2])
    res = mod_quotient(I, J)
    assert res.certified
    assert res.basis == quotient(I, J).gb()
    assert contains(Ideal.from_gb(res.basis), I)
    assert contains(I, product(Ideal.from_gb(res.basis), J))


def test_mod_quotient_random_against_direct():
    rng = random.Random(2024)
    R = Ring(("x", "y", "z"), GREVLEX, 0)
    for _ in range(6):
        I = random_ideal(R, rng, max_gens=3, max_deg=3)
        J = random_ideal(R, rng, max_gens=2, max_deg=2)
        res = mod_quotient(I, J)
        assert res.certified
        assert res.basis == quotient(I, J).gb()


def test_mod_quotient_under_lex(xy):
    R, x, y = xy
    L = R.with_order(LEX)
    x, y = L.gens()
    I = Ideal(L, [x**2 * y - y, x * y**2])
    J = Ideal(L, [y])
    res = mod_quotient(I, J)
    assert res.basis == quotient(I, J).gb()


def test_ptest_only_verification(xy):
    R, x, y = xy
    I = Ideal(R, [x**3 * y, x * y**2])
    res = mod_quotient(I, Ideal(R, [x]), ModularRunConfig(verify="ptest_only"))
    assert res.basis == quotient(I, Ideal(R, [x])).gb()
    assert not res.certified


def test_modular_failure_carries_diagnostics(xy):
    R, x, y = xy
    I = Ideal(R, [x**2 - R.const(mpq(123456789, 987654321)) * y, x * y - 1])
    # a single 4-bit prime per round cannot carry these coefficients
    cfg = ModularRunConfig(primes=1, prime_bits=5, max_rounds=1, input_gb="direct")
    with pytest.raises(ModularFailure) as e:
        mod_quotient(I, Ideal(R, [x]), cfg)
    assert e.value.diagnostics


def test_determinism_and_run_log(xy):
    R, x, y = xy
    I = Ideal(R, [x**2 * y + 3 * x, x * y**2 - 5])
    buf1, buf2 = io.StringIO(), io.StringIO()
    r1 = mod_quotient(I, Ideal(R, [x]), ModularRunConfig(seed=9, log=jsonl_logger(buf1)))
    r2 = mod_quotient(Ideal(R, I.gens), Ideal(R, [x]), ModularRunConfig(seed=9, log=jsonl_logger(buf2)))
    assert r1.basis == r2.basis and r1.primes_used == r2.primes_used
    lines = [json.loads(s) for s in buf1.getvalue().splitlines()]
    assert lines and {"prime", "class", "sig", "micros", "stage"} <= set(lines[0])
    strip = lambda s: [{k: v for k, v in json.loads(t).items() if k != "micros"} for t in s.splitlines()]
    assert strip(buf1.getvalue()) == strip(buf2.getvalue())


def test_parallel_jobs_give_the_same_answer(xy):
    R, x, y = xy
    I = Ideal(R, [x**2 * y + 3 * x, x * y**2 - 5])
    a = mod_quotient(I, Ideal(R, [x]), ModularRunConfig(seed=1))
    b = mod_quotient(Ideal(R, I.gens), Ideal(R, [x]), ModularRunConfig(seed=1, jobs=2))
    assert a.basis == b.basis and a.primes_used == b.primes_used


# -- modular input bases ---------------------------------------------------------------------


def test_homogenize_round_trip(xy):
    R, x, y = xy
    Rh = Ring(("x", "y", "h"), GREVLEX, 0)
    f = x**3 + 2 * x * y - 7
    F = homogenize(f, Rh)
    assert all(sum(e) == 3 for e, _ in F.sorted_terms())
    assert dehomogenize(F, R) == f


def test_modular_gb_is_certified_and_correct(xyz):
    R, x, y, z = xyz
    I = Ideal(R, [3 * x**2 * y + 5 * z - 1, x * y * z - R.const(mpq(2, 3)), y**3 + x - 4])
    res = modular_gb(I)
    assert res.certified
    assert res.basis == buchberger(I.gens)


def test_rational_gb_caches_certified_basis(xy):
    R, x, y = xy
    I = Ideal(R, [x**2 + y, x * y - 2])
    gb, ok = rational_gb(I)
    assert ok and I.has_gb() and gb == buchberger(I.gens)
    L = Ideal(R.with_order(LEX), [R.with_order(LEX).convert(g) for g in I.gens])
    gb, ok = rational_gb(L)
    assert ok and gb == buchberger(L.gens)
