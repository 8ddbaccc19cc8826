"""Associated primes over F_p and the intermediate decomposition over Q.

Over F_p the associated primes are found by the usual splitting: pick a
maximal independent set U, decompose the zero-dimensional extension over
K(U) by factoring eliminants of linear forms, contract back, and recurse
on ``I + h^s`` where ``h`` collects the K[U]-leading coefficients.  Every
candidate is then kept only if it passes the double-quotient criterion.

Over Q, the F_p primes are grouped by independent set, each group's
intersection is lifted by CRT, and each lift gives one component.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import flint
from gmpy2 import mpq

from . import deadline
from .diq import ComponentResult, ass_subset_check, component_from_power, isolated_component
from .errors import InvalidMIS, ModularFailure, PrimeExhaustion, RadicalUnavailable, UnitIdeal
from .groebner import (
    GroebnerBasis,
    Ideal,
    dimension,
    eliminate,
    elimination_ring,
    fresh_name,
    independent_sets,
    is_reduced_gb,
)
from .idealops import (
    contains,
    contraction_factors,
    hull_unmixed,
    intersect_all,
    quotient_by_element,
    radical_membership,
)
from .modular import (
    ModularRunConfig,
    PrimePool,
    PrimeRecord,
    _emit,
    crt_lift,
    delete_unlucky,
    image,
    matches_image,
    modular_loop,
    primetest_for,
    rational_gb,
    reconstruct,
    signature_of,
)
from .polycore import MonomialOrder, Poly, Ring

DEPTH_CAP = 8
SPLIT_TRIES = 6


# -- factorization over F_p ------------------------------------------------------


def _to_flint(f: Poly):
    ring = f.ring
    if ring.modulus:
        ctx = flint.nmod_mpoly_ctx.get(tuple(ring.names), modulus=ring.modulus)
        return ctx.from_dict({ring.unpack(m): int(c) for m, c in f.terms.items()})
    ctx = flint.fmpq_mpoly_ctx.get(tuple(ring.names))
    return ctx.from_dict({ring.unpack(m): flint.fmpq(int(c.numerator), int(c.denominator))
                          for m, c in f.terms.items()})


def _from_flint(g, ring: Ring) -> Poly:
    if ring.modulus:
        return ring.from_dict({tuple(e): int(c) for e, c in g.to_dict().items()})
    return ring.from_dict({tuple(e): mpq(int(c.p), int(c.q)) for e, c in g.to_dict().items()})


def factor_poly(f: Poly) -> list[tuple[Poly, int]]:
    """Irreducible factors over the coefficient field (F_p or Q), monic, with multiplicities."""
    ring = f.ring
    if not f.terms:
        raise ValueError("cannot factor zero")
    if f.is_constant():
        return []
    _, facs = _to_flint(f).factor()
    out = [(_from_flint(g, ring).monic(), int(e)) for g, e in facs]
    out.sort(key=lambda t: (t[0].LM, str(t[0])))
    return out


def factor_fp(f: Poly) -> list[tuple[Poly, int]]:
    """Irreducible factors of a nonzero polynomial over F_p, monic, with multiplicities."""
    if not f.ring.modulus:
        raise ValueError("factor_fp needs a polynomial over F_p")
    return factor_poly(f)


def factor_univariate_fp(f: Poly) -> list[tuple[Poly, int]]:
    """Complete factorization of a univariate polynomial over F_p."""
    if len(f.variables()) > 1:
        raise ValueError(f"{f} is not univariate")
    ring = f.ring
    if not f.terms:
        raise ValueError("cannot factor zero")
    if f.is_constant():
        return []
    (var,) = f.variables()
    coeffs = [0] * (f.degree_in(var) + 1)
    for m, c in f.terms.items():
        coeffs[ring.unpack(m)[var]] = int(c)
    _, facs = flint.nmod_poly(coeffs, ring.modulus).factor()
    out = []
    n = ring.nvars
    for g, e in facs:
        d = {}
        for k, c in enumerate(g.coeffs()):
            if int(c):
                exps = [0] * n
                exps[var] = k
                d[tuple(exps)] = int(c)
        out.append((ring.from_dict(d).monic(), int(e)))
    out.sort(key=lambda t: (t[0].LM, str(t[0])))
    return out


# -- zero-dimensional splitting over K(U) ------------------------------------------


def _count_standard(leads: list[tuple[int, ...]], n: int) -> int:
    """Number of monomials in ``n`` variables outside the monomial ideal."""
    if n == 0:
        return 0 if any(True for _ in leads) else 1
    if any(not any(e) for e in leads):
        return 0
    bounds = []
    for i in range(n):
        pure = [e[i] for e in leads if e[i] and not any(e[j] for j in range(n) if j != i)]
        if not pure:
            raise ValueError("ideal is not zero-dimensional over the parameter field")
        bounds.append(min(pure))
    count = 0
    stack = [(0, ())]
    while stack:
        i, pre = stack.pop()
        if i == n:
            count += 1
            continue
        for k in range(bounds[i]):
            mono = pre + (k,)
            # prune: a partial monomial already divisible by a lead restricted to its variables
            if any(all(e[j] <= mono[j] for j in range(i + 1)) and not any(e[j] for j in range(i + 1, n))
                   for e in leads):
                break
            stack.append((i + 1, mono))
    return count


def _block_ring(ring: Ring, V: Sequence[str], U: Sequence[str]) -> Ring:
    order = MonomialOrder.block_of(("grevlex", len(V)), ("grevlex", len(U)))
    return Ring(tuple(V) + tuple(U), order, ring.modulus)


def vdim_over(I: Ideal, U: Sequence[str]) -> int:
    """Dimension of ``K(U)[V]/I K(U)[V]`` as a ``K(U)``-vector space."""
    ring = I.ring
    V = [v for v in ring.names if v not in U]
    br = _block_ring(ring, V, [u for u in ring.names if u in U])
    gb = Ideal(br, [br.convert(g) for g in I.gens]).gb()
    nv = len(V)
    leads = [br.unpack(g.LM)[:nv] for g in gb.polys]
    return _count_standard(leads, nv)


def _eliminant(J: Ideal, form: Poly, U: Sequence[str]) -> tuple[Poly, Ring, str]:
    """Generator of the contraction of ``J K(U)[V]`` to ``K[U][T]`` for ``T = form``."""
    ring = J.ring
    T = fresh_name(ring.names, "T")
    V = [v for v in ring.names if v not in U]
    keep = [u for u in ring.names if u in U] + [T]
    er = elimination_ring(Ring(tuple(ring.names) + (T,), ring.order, ring.modulus), V, keep)
    gens = [er.convert(g) for g in J.gens] + [er.gen(T) - er.convert(form)]
    E = eliminate(Ideal(er, gens), V)
    polys = [g for g in E.gb().polys if g.degree_in(T) > 0]
    if not polys:
        raise InvalidMIS("eliminant vanishes: the set is not independent")
    g = min(polys, key=lambda q: (q.degree_in(T), q.LM))
    return g, g.ring, T


def _substitute_form(f: Poly, T: str, form: Poly, ring: Ring) -> Poly:
    """Replace ``T`` by ``form`` in ``f``; the other variables are mapped by name."""
    out = ring.zero()
    src = f.ring
    ti = src.index[T]
    powers = {0: ring.one()}
    for m, c in f.terms.items():
        e = src.unpack(m)
        k = e[ti]
        if k not in powers:
            powers[k] = form ** k
        mono = {}
        exps = [0] * ring.nvars
        for i, name in enumerate(src.names):
            if i != ti and e[i]:
                exps[ring.index[name]] = e[i]
        mono[tuple(exps)] = c
        out = out + ring.from_dict(mono) * powers[k]
    return out


def _squarefree_in(f: Poly, var: str) -> Poly:
    """Product of the distinct irreducible factors of ``f`` involving ``var``."""
    idx = f.ring.index[var]
    parts = [g for g, _ in factor_poly(f) if g.degree_in(idx) > 0]
    return reduce(lambda a, b: a * b, parts, f.ring.one())


def _radical_zero_dim(J: Ideal, U: Sequence[str]) -> Ideal:
    """Radical of an ideal zero-dimensional over K(U), saturated back to K[X]."""
    ring = J.ring
    V = [v for v in ring.names if v not in U]
    extra = []
    for v in V:
        g, er, T = _eliminant(J, ring.gen(v), U)
        sq = _squarefree_in(g, T)
        extra.append(_substitute_form(sq, T, ring.gen(v), ring))
    return hull_unmixed(Ideal(ring, list(J.gens) + extra), U)


def _linear_forms(V: Sequence[str], ring: Ring, rng: random.Random):
    # single variables first (sparse), then random combinations
    for v in reversed(V):
        yield ring.gen(v)
    while True:
        form = ring.zero()
        for v in V:
            form = form + ring.gen(v) * rng.randrange(1, 100)
        yield form


def _primes_over(J: Ideal, U: Sequence[str], rng: random.Random, depth: int = 0) -> list[Ideal]:
    """Primes of an ideal that is zero-dimensional over K(U) and saturated
    with respect to K[U], returned as ideals of K[X]."""
    deadline.check()
    if J.is_unit():
        return []
    if depth > 4 * DEPTH_CAP:
        raise RadicalUnavailable("splitting did not terminate")
    ring = J.ring
    V = [v for v in ring.names if v not in U]
    if not V:
        return [J]
    forms = _linear_forms(V, ring, rng)
    for _ in range(len(V) + SPLIT_TRIES):
        form = next(forms)
        g, er, T = _eliminant(J, form, U)
        facs = [q for q, _ in factor_poly(g) if q.degree_in(er.index[T]) > 0]
        if len(facs) > 1:
            out = []
            for q in facs:
                piece = Ideal(ring, list(J.gens) + [_substitute_form(q, T, form, ring)])
                try:
                    piece = hull_unmixed(piece, U)
                except InvalidMIS:
                    continue
                out.extend(_primes_over(piece, U, rng, depth + 1))
            return out
        (q,) = facs
        P = _radical_zero_dim(Ideal(ring, list(J.gens) + [_substitute_form(q, T, form, ring)]), U)
        if vdim_over(P, U) == q.degree_in(er.index[T]):
            return [P]
        # the form does not separate the points; try another one
    raise RadicalUnavailable("no separating linear form found")


# -- associated primes over F_p ----------------------------------------------------------


@dataclass
class FpAssResult:
    primes: list
    mis: dict
    complete: bool


class _Incomplete(Exception):
    pass


def canonical_mis(P: Ideal) -> tuple[str, ...]:
    """Lexicographically smallest maximal-size independent set of a prime."""
    sets = independent_sets(P.gb())
    dim = max(len(s) for s in sets)
    best = min(s for s in sets if len(s) == dim)
    return tuple(P.ring.names[i] for i in best)


def _saturation_index(I: Ideal, h: Poly) -> int:
    cur = Ideal.from_gb(I.gb())
    s = 0
    while True:
        deadline.check()
        nxt = quotient_by_element(cur, h)
        if nxt.gb() == cur.gb():
            return s
        cur = nxt
        s += 1


def _split_candidates(I: Ideal, rng: random.Random, depth: int, embedded: bool, cap: int) -> list[Ideal]:
    if I.is_unit():
        return []
    if depth > cap:
        raise _Incomplete()
    from .groebner import top_mis

    U = top_mis(I)
    hs = contraction_factors(I, U)
    J = hull_unmixed(I, U) if hs else Ideal.from_gb(I.gb())
    cands = _primes_over(J, U, rng)
    if hs:
        h = reduce(lambda a, b: a * b, hs)
        s = _saturation_index(I, h) if embedded else 1
        rest = Ideal(I.ring, list(I.gens) + [h ** max(s, 1)])
        cands += _split_candidates(rest, rng, depth + 1, embedded, cap)
    return cands


def _dedupe(ideals: list[Ideal]) -> list[Ideal]:
    out = []
    for P in ideals:
        if not any(P == Q for Q in out):
            out.append(Ideal.from_gb(P.gb()))
    out.sort(key=lambda P: (-dimension(P), [str(g) for g in P.gb().polys]))
    return out


def _minimal_only(primes: list[Ideal]) -> list[Ideal]:
    return [P for P in primes if not any(Q is not P and contains(P, Q) and not P == Q for Q in primes)]


def associated_primes_fp(Ip: Ideal, depth_cap: int | None = None, seed: int = 0) -> FpAssResult:
    """Associated primes of an ideal over F_p, embedded ones included.

    Candidates from the splitting recursion are filtered with the criterion
    ``P contains (I:(I:P))``.  When the recursion exceeds the depth cap only
    the minimal primes are returned and ``complete`` is False.
    """
    if not Ip.ring.modulus:
        raise ValueError("associated_primes_fp works over F_p")
    if Ip.is_unit():
        raise UnitIdeal("the unit ideal has no associated primes")
    cap = DEPTH_CAP if depth_cap is None else depth_cap
    rng = random.Random(seed)
    try:
        cands = _dedupe(_split_candidates(Ip, rng, 0, True, cap))
        complete = True
    except _Incomplete:
        # minimal primes only: the recursion on I + h always terminates
        cands = _minimal_only(_dedupe(_split_candidates(Ip, rng, 0, False, 10 * cap + 10)))
        complete = False
    from .diq import is_prime_divisor_direct

    primes = [P for P in cands if is_prime_divisor_direct(Ip, P)] if complete else cands
    return FpAssResult(primes, {i: canonical_mis(P) for i, P in enumerate(primes)}, complete)


def radical_fp(Ip: Ideal) -> Ideal:
    """Radical over F_p as the intersection of the associated primes."""
    res = associated_primes_fp(Ip)
    if not res.complete:
        raise RadicalUnavailable("associated primes incomplete (depth cap reached)")
    return Ideal.from_gb(intersect_all(res.primes).gb())


def group_by_mis(res: FpAssResult) -> dict:
    """Partition the primes by their canonical independent set."""
    groups: dict = {}
    for i, P in enumerate(res.primes):
        groups.setdefault(res.mis[i], []).append(P)
    return dict(sorted(groups.items(), key=lambda kv: (-len(kv[0]), kv[0])))


# -- lifting over Q ------------------------------------------------------------------


class RadicalTask:
    def __init__(self, F, ring):
        self.F = list(F)
        self.ring = ring

    def __call__(self, p: int):
        rp = self.ring.with_modulus(p)
        try:
            return radical_fp(Ideal(rp, image(self.F, p))).gb()
        except RadicalUnavailable:
            return None


class GroupTask:
    """Per-prime intersections of the associated primes grouped by independent set."""

    def __init__(self, F, ring):
        self.F = list(F)
        self.ring = ring

    def __call__(self, p: int):
        rp = self.ring.with_modulus(p)
        res = associated_primes_fp(Ideal(rp, image(self.F, p)))
        if not res.complete:
            return None
        return {U: (intersect_all(group).gb(), len(group)) for U, group in group_by_mis(res).items()}


def _degree_bound(polys: Sequence[Poly]) -> int:
    return max((g.total_degree() for g in polys), default=0)


def _decomp_admissible(F: GroebnerBasis):
    base = primetest_for(F)
    bound = 2 * max(_degree_bound(F.polys), 1)
    return lambda p: p > bound and base(p)


def radical_candidate(J: Ideal, cfg: ModularRunConfig | None = None) -> Ideal:
    """Radical of ``J`` over Q lifted from F_p radicals.

    Accepted when the image at a lucky prime is the F_p radical and every
    lifted element lies in the radical of ``J``.
    """
    cfg = cfg or ModularRunConfig()
    ring = J.ring
    F, _ = rational_gb(J, cfg)
    if F.is_unit():
        return Ideal.unit(ring)

    def certify(H, lucky):
        if not any(matches_image(H, r) for r in lucky):
            return False
        return all(radical_membership(h, J) for h in H)

    H, _, _, _ = modular_loop(RadicalTask(F.polys, ring), _decomp_admissible(F), certify, cfg, "radical")
    return Ideal.from_gb(GroebnerBasis(tuple(H), ring))


@dataclass
class GroupLift:
    U: tuple
    basis: GroebnerBasis
    modular_primes: list
    radical: bool
    ass_subset: bool
    single_prime: bool


@dataclass
class IntermediateDecomposition:
    components: dict
    certified_cover: bool
    groups: dict = field(default_factory=dict)
    primes_used: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    ring: Ring | None = None
    input_basis: GroebnerBasis | None = None
    prime_components: dict = field(default_factory=dict)

    def all_components(self) -> list:
        """Components with top-dimensional groups split into their primes over Q."""
        out = []
        for U, comp in self.components.items():
            out.extend(self.prime_components.get(U) or [comp])
        return out

    def report(self) -> dict:
        gens = [str(g) for g in self.input_basis.polys] if self.input_basis is not None else []
        h = hashlib.sha256(json.dumps([str(self.ring), gens]).encode()).hexdigest()
        groups = []
        for U, g in self.groups.items():
            comp = self.components.get(U)
            groups.append({
                "U": list(U),
                "modular_primes": g.modular_primes,
                "lifted_basis": [str(f) for f in g.basis.polys],
                "component_basis": [str(f) for f in comp.component.gb().polys] if comp else None,
                "prime_components": [[str(f) for f in c.component.gb().polys]
                                     for c in self.prime_components.get(U, [])],
                "certification": {
                    "radical": g.radical,
                    "ass_subset": g.ass_subset,
                    "primary": bool(comp and comp.certified),
                    "single_prime": g.single_prime,
                },
            })
        return {"input_hash": h, "primes_used": list(self.primes_used), "groups": groups,
                "cover_verified": self.certified_cover}


def rational_primes(J: Ideal, U: Sequence[str], seed: int = 0) -> list[Ideal]:
    """Primes over Q of a radical ideal all of whose primes have independent set ``U``."""
    if J.ring.modulus:
        raise ValueError("rational_primes works over Q")
    return _dedupe(_primes_over(Ideal.from_gb(J.gb()), tuple(U), random.Random(seed)))


def lift_radical_group(I: Ideal, U: tuple, lucky: Sequence[PrimeRecord]) -> GroupLift | None:
    """CRT-lift one group intersection and run the radical and Ass-subset checks.

    Returns None when reconstruction or the image check fails.
    """
    key = lambda res: res[U][0]
    cand = crt_lift(lucky, key)
    if not reconstruct(cand):
        return None
    H = cand.rational_basis
    if not any(matches_image(H, r, key=key) for r in lucky):
        return None
    ring = I.ring
    gb = GroebnerBasis(tuple(H), ring)
    # the image is an intersection of F_p primes, hence radical; a lift that is
    # itself a reduced basis over Q with that image is radical as well
    self_gb = is_reduced_gb(H)
    J = Ideal.from_gb(gb)
    radical = self_gb and contains(J, I)
    ass = radical and ass_subset_check(I, J, assume_radical=True)
    ref = lucky[0]
    single = ref.result[U][1] == 1 and self_gb
    mprimes = [[str(f) for f in ref.result[U][0].polys]]
    return GroupLift(U, gb, mprimes, radical, ass, single)


def intermediate_decomposition(I: Ideal, cfg: ModularRunConfig | None = None) -> IntermediateDecomposition:
    """Intersection of components indexed by independent sets.

    Each group of F_p associated primes sharing an independent set U is
    lifted to a radical ideal J over Q; the component is the isolated part
    of I over J when |U| is the dimension of I, otherwise hull(I + J^m) for
    a certified exponent m.  The cover is verified by recomputing the
    intersection.
    """
    cfg = cfg or ModularRunConfig()
    ring = I.ring
    F, f_ok = rational_gb(I, cfg)
    if F.is_unit():
        raise UnitIdeal("the unit ideal has no decomposition")
    I = Ideal.from_gb(F)
    task = GroupTask(F.polys, ring)
    admissible = _decomp_admissible(F)
    pool = PrimePool(cfg, "idecomp")
    records: list[PrimeRecord] = []
    n = cfg.primes
    lifts = None
    diagnostics: dict = {}
    try:
        for rnd in range(1, cfg.max_rounds + 1):
            deadline.check()
            for p in pool.take(n, admissible):
                res = task(p)
                rec = PrimeRecord(p, frozenset(), res, signature_of(res) if res is not None else ())
                _emit(cfg, "idecomp", rec, "rejected" if res is None else "effectively_lucky")
                if res is not None:
                    records.append(rec)
            n *= 2
            lucky = delete_unlucky(records)
            if not lucky:
                diagnostics["reason"] = "no complete F_p decomposition"
                continue
            attempt = {}
            for U in lucky[0].result:
                g = lift_radical_group(I, U, lucky)
                if g is None or not (g.radical and g.ass_subset):
                    attempt = None
                    diagnostics["reason"] = f"group {list(U)} failed to lift or certify"
                    break
                attempt[U] = g
            if attempt is not None:
                lifts = attempt
                diagnostics["rounds"] = rnd
                break
    except (PrimeExhaustion, ModularFailure) as e:
        diagnostics["reason"] = str(e)
    used = sorted(pool.used)
    if lifts is None:
        return IntermediateDecomposition({}, False, {}, used, diagnostics, ring, F)
    dim = dimension(I)
    components = {}
    refined = {}
    for U, g in lifts.items():
        J = Ideal.from_gb(g.basis)
        if len(U) == dim:
            comp = isolated_component(I, J, U=U)
            # primes that split over F_p but not over Q are merged back here
            try:
                primes = rational_primes(J, U, cfg.seed)
            except (RadicalUnavailable, InvalidMIS) as e:
                diagnostics[f"split {list(U)}"] = str(e)
                primes = [J]
            if len(primes) > 1:
                refined[U] = [isolated_component(I, P, U=U) for P in primes]
        else:
            try:
                comp = component_from_power(I, J, certify=True, U=U)
            except Exception as e:  # noqa: BLE001 - report and leave the cover uncertified
                diagnostics[f"component {list(U)}"] = str(e)
                continue
        components[U] = comp
    result = IntermediateDecomposition(components, False, lifts, [r.p for r in lucky], diagnostics, ring, F,
                                       refined)
    if len(components) == len(lifts):
        parts = result.all_components()
        cover = all(c.certified for c in parts) and intersect_all([c.component for c in parts]) == I
        result.certified_cover = cover and f_ok
    return result
