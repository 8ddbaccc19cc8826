"""Double ideal quotients and the divisor / component criteria built on them.

For a prime P, P is associated to I exactly when P contains (I:(I:P)); for a
radical J the same containment says every prime of J is associated to I.
The modular tests decide these conditions prime by prime and certify
over Q only as much as each one-sided conclusion needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import deadline
from .errors import HypothesisViolated, ModularFailure, PrimeExhaustion
from .groebner import GroebnerBasis, Ideal, normal_form, top_mis
from .idealops import (
    contains,
    hull_unmixed,
    ideal_power,
    ideal_sum,
    intersect,
    quotient,
    radical_membership,
    saturate,
)
from .modular import (
    LUCKY,
    ModularResult,
    ModularRunConfig,
    PrimePool,
    PrimeRecord,
    QuotientTask,
    SaturationTask,
    _emit,
    contained_in,
    crt_lift,
    delete_unlucky,
    image,
    is_effectively_lucky,
    matches_image,
    mod_quotient,
    mod_saturate,
    primetest_for,
    rational_gb,
    reconstruct,
    signature_of,
)
from .polycore import coeff_norm

VARIANTS = ("plain", "inner_sat", "outer_sat", "both_sat")

ASSOCIATED = "associated"
NOT_ASSOCIATED = "not_associated"
INCONCLUSIVE = "inconclusive"


@dataclass
class DivisorVerdict:
    verdict: str
    witness: object = None
    reason: str = ""
    primes: list = field(default_factory=list)
    rounds: int = 0

    def __bool__(self):
        raise TypeError("use .verdict; a verdict has three values")


@dataclass
class ComponentResult:
    component: Ideal
    kind: str
    exponent_used: int | None = None
    certified: bool = False


def diq(I: Ideal, J: Ideal) -> Ideal:
    """``(I : (I : J))``."""
    return quotient(I, quotient(I, J))


def diq_sat_variant(I: Ideal, J: Ideal, variant: str = "plain") -> Ideal:
    """Double quotient with optional saturation in the inner and/or outer step.

    ``inner_sat``: (I:(I:J^inf)); ``outer_sat``: (I:(I:J)^inf);
    ``both_sat``: (I:(I:J^inf)^inf).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    inner = saturate(I, J)[0] if variant in ("inner_sat", "both_sat") else quotient(I, J)
    if variant in ("outer_sat", "both_sat"):
        return saturate(I, inner)[0]
    return quotient(I, inner)


def mod_diq(I: Ideal, J: Ideal, cfg: ModularRunConfig | None = None,
            variant: str = "plain") -> ModularResult:
    """Modular double quotient in two certified stages.

    Stage 1 lifts H = (I:J) (or (I:J^inf)).  Stage 2 only uses primes that are
    effectively lucky for H and at which the F_p inner quotient reproduces
    the image of H, then lifts (I:H) (or (I:H^inf)) and certifies it by
    product containment.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    cfg = cfg or ModularRunConfig()
    ring = I.ring
    F, _ = rational_gb(I, cfg)
    G = [g for g in J.gens if g.terms]
    inner_sat = variant in ("inner_sat", "both_sat")
    outer_sat = variant in ("outer_sat", "both_sat")
    if inner_sat:
        stage1 = mod_saturate(I, J, cfg, stage="diq.stage1")
        guard_task = SaturationTask(F.polys, G, ring)
    else:
        stage1 = mod_quotient(I, J, cfg, stage="diq.stage1")
        guard_task = QuotientTask(F.polys, G, ring)
    H = stage1.basis
    Hideal = Ideal.from_gb(H)
    guard = (guard_task, H.polys, inner_sat)
    if outer_sat:
        stage2 = mod_saturate(I, Hideal, cfg, stage="diq.stage2", extra_lucky=[H], guard=guard)
    else:
        stage2 = mod_quotient(I, Hideal, cfg, stage="diq.stage2", extra_lucky=[H], guard=guard)
    stage2.stage_info = {"stage1": stage1, "inner": H}
    stage2.certified = stage1.certified and stage2.certified
    return stage2


def is_prime_divisor_direct(I: Ideal, P: Ideal) -> bool:
    """For a prime ``P``: ``P`` is associated to ``I`` iff ``P`` contains ``(I:(I:P))``."""
    return contains(P, diq(I, P))


def _check_radical(J: Ideal) -> None:
    from .decomp import radical_candidate

    R = radical_candidate(J)
    G = J.gb().polys
    for h in R.gens:
        if normal_form(h, G).terms and radical_membership(h, J):
            raise HypothesisViolated(f"ideal is not radical: {h} lies in its radical but not in it")


def ass_subset_check(I: Ideal, J: Ideal, assume_radical: bool = False) -> bool:
    """For radical ``J``: every associated prime of ``J`` is associated to ``I``
    iff ``J`` contains ``(I:(I:J))``.

    Without ``assume_radical`` the radical of ``J`` is recomputed modularly;
    an element of the radical outside ``J`` raises HypothesisViolated.
    """
    if not assume_radical:
        _check_radical(J)
    return contains(J, diq(I, J))


# -- modular associated / non-associated tests -----------------------------------


def _fp_diq(F, G, ring, p):
    rp = ring.with_modulus(p)
    Ip = Ideal(rp, image(F, p))
    Gp = Ideal(rp, image(G, p))
    Qp = quotient(Ip, Gp)
    return Qp.gb(), quotient(Ip, Qp).gb(), Gp.gb()


def associated_test_modular(I: Ideal, P: Ideal, cfg: ModularRunConfig | None = None) -> DivisorVerdict:
    """One-sided modular test for ``P`` (a prime) being associated to ``I``.

    Keeps primes whose F_p double quotient equals the image of ``P`` until
    their product exceeds twice the coefficient norm of ``P``'s basis, then
    needs one kept prime at which the certified basis of ``(I:P)`` is
    effectively lucky and matches the F_p quotient.  No CRT lift is needed:
    the candidate is ``P`` itself.
    """
    cfg = cfg or ModularRunConfig()
    ring = I.ring
    F, f_ok = rational_gb(I, cfg)
    Gb, g_ok = rational_gb(P, cfg)
    suffix = "" if f_ok and g_ok else "_uncertified_input"
    if Gb.is_unit():
        return DivisorVerdict(NOT_ASSOCIATED, None, "unit_ideal")
    if F.is_unit():
        return DivisorVerdict(NOT_ASSOCIATED, None, "unit_ideal")
    G = list(Gb.polys)
    bound = 2 * coeff_norm(G)
    pool = PrimePool(cfg, "asstest")
    ok_F = primetest_for(F)
    admissible = lambda p: ok_F(p) and is_effectively_lucky(p, Gb)
    kept: list[tuple[int, GroebnerBasis]] = []
    product = 1
    n = cfg.primes
    used = []
    rounds = 0
    try:
        for rounds in range(1, cfg.max_rounds + 1):
            deadline.check()
            batch = pool.take(n, admissible)
            n *= 2
            agreed = 0
            for p in batch:
                used.append(p)
                Qp, Dp, Gp = _fp_diq(F.polys, G, ring, p)
                rec = PrimeRecord(p, frozenset({LUCKY}), Dp, signature_of(Dp))
                if Dp != Gp:
                    _emit(cfg, "asstest", rec, "discarded")
                    continue
                _emit(cfg, "asstest", rec)
                agreed += 1
                kept.append((p, Qp))
                product *= p
            if agreed == 0:
                return DivisorVerdict(INCONCLUSIVE, None, "primes_disagree", used, rounds)
            if product > bound:
                break
        else:
            return DivisorVerdict(INCONCLUSIVE, None, "prime_budget", used, rounds)
    except PrimeExhaustion:
        return DivisorVerdict(INCONCLUSIVE, None, "prime_exhaustion", used, rounds)
    try:
        H = mod_quotient(I, P, cfg, stage="asstest.quotient").basis
    except ModularFailure:
        return DivisorVerdict(INCONCLUSIVE, None, "quotient_failed", used, rounds)
    for p, Qp in kept:
        if is_effectively_lucky(p, H) and tuple(image(H.polys, p)) == Qp.polys:
            return DivisorVerdict(ASSOCIATED, Gb, "conditions_verified" + suffix, [q for q, _ in kept], rounds)
    return DivisorVerdict(INCONCLUSIVE, None, "no_lucky_prime_for_quotient", used, rounds)


def non_associated_test(I: Ideal, P: Ideal, cfg: ModularRunConfig | None = None) -> DivisorVerdict:
    """One-sided modular test for ``P`` (a prime) *not* being associated to ``I``.

    Primes whose F_p double quotient equals the image of ``P`` carry no
    information and are dropped.  The rest are lifted to a candidate K; the
    verdict needs K inside (I:(I:P)) (checked as K*H inside I with H the
    certified (I:P)) and K not inside P.
    """
    cfg = cfg or ModularRunConfig()
    ring = I.ring
    F, f_ok = rational_gb(I, cfg)
    Gb, g_ok = rational_gb(P, cfg)
    suffix = "" if f_ok and g_ok else "_uncertified_input"
    if F.is_unit() or Gb.is_unit():
        return DivisorVerdict(NOT_ASSOCIATED, None, "unit_ideal")
    G = list(Gb.polys)
    pool = PrimePool(cfg, "nonasstest")
    ok_F = primetest_for(F)
    admissible = lambda p: ok_F(p) and is_effectively_lucky(p, Gb)
    records: list[PrimeRecord] = []
    used = []
    n = cfg.primes
    H = None
    rounds = 0
    try:
        for rounds in range(1, cfg.max_rounds + 1):
            deadline.check()
            batch = pool.take(n, admissible)
            n *= 2
            for p in batch:
                used.append(p)
                _, Dp, Gp = _fp_diq(F.polys, G, ring, p)
                rec = PrimeRecord(p, frozenset({LUCKY}), Dp, signature_of(Dp))
                if Dp == Gp:
                    _emit(cfg, "nonasstest", rec, "discarded")
                    continue
                _emit(cfg, "nonasstest", rec)
                records.append(rec)
            if not records:
                return DivisorVerdict(INCONCLUSIVE, None, "all_primes_agree", used, rounds)
            lucky = delete_unlucky(records)
            cand = crt_lift(lucky)
            if not reconstruct(cand):
                continue
            K = cand.rational_basis
            if not any(matches_image(K, r) for r in lucky):
                continue
            if all(not normal_form(k, G).terms for k in K):
                continue
            if H is None:
                H = mod_quotient(I, P, cfg, stage="nonasstest.quotient").basis
            if contained_in((k * h for k in K for h in H.polys), F):
                return DivisorVerdict(NOT_ASSOCIATED, GroebnerBasis(tuple(K), ring),
                                      "conditions_verified" + suffix, [r.p for r in lucky], rounds)
    except (PrimeExhaustion, ModularFailure) as e:
        return DivisorVerdict(INCONCLUSIVE, None, type(e).__name__, used, rounds)
    return DivisorVerdict(INCONCLUSIVE, None, "prime_budget", used, rounds)


# -- primary components ---------------------------------------------------------------


def is_primary_component(I: Ideal, J: Ideal, L: Ideal) -> bool:
    """With ``J`` radical and ``sqrt(L) = J``: is ``(I:J^inf) & L`` the intersection
    of ``I`` with a choice of primary components for the primes of ``J``?

    Tests ``(I:(I:Z)^inf) = Z`` for ``Z = (I:J^inf) & L``.
    Raises HypothesisViolated when ``sqrt(L) != J`` or ``L`` contains ``(I:J^inf)``.
    """
    Jg = J.gb().polys
    if any(normal_form(g, Jg).terms for g in L.gens):
        raise HypothesisViolated("L is not contained in J")
    if not all(radical_membership(g, L) for g in J.gens):
        raise HypothesisViolated("J is not contained in the radical of L")
    S, _ = saturate(I, J)
    if contains(L, S):
        raise HypothesisViolated("L contains (I : J^inf)")
    Z = intersect(S, L)
    lhs, _ = saturate(I, quotient(I, Z))
    return lhs == Z


def _common_mis(J: Ideal) -> tuple[str, ...]:
    return top_mis(J)


def isolated_component(I: Ideal, J: Ideal, U=None) -> ComponentResult:
    """Intersection of the isolated primary components of ``I`` whose primes make up ``J``.

    ``U`` is an independent set shared by the primes of ``J`` (default: the
    smallest maximal-size one of ``J``).
    """
    U = tuple(U) if U is not None else _common_mis(J)
    Q = hull_unmixed(diq_sat_variant(I, J, "both_sat"), U)
    try:
        ok = is_primary_component(I, J, Q)
    except HypothesisViolated:
        ok = False
    return ComponentResult(Q, "isolated", None, ok)


def component_from_power(I: Ideal, J: Ideal, certify: bool = True, cap: int = 64,
                         U=None) -> ComponentResult:
    """Primary components for the primes of ``J`` as ``hull(I + J^m)``, with
    ``m`` doubling until the component criterion accepts."""
    U = tuple(U) if U is not None else _common_mis(J)
    m = 1
    while m <= cap:
        deadline.check()
        L = hull_unmixed(ideal_sum(I, ideal_power(J, m)), U)
        if not certify:
            return ComponentResult(L, "hull_power", m, False)
        try:
            if is_primary_component(I, J, L):
                return ComponentResult(L, "hull_power", m, True)
        except HypothesisViolated:
            pass
        m *= 2
    raise HypothesisViolated(f"no certified component with exponent up to {cap}")
