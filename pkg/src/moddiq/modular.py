"""Modular computation of ideal operations over Q.

Every operation follows the same loop: compute the operation over F_p for a
batch of random word-sized primes, vote out primes whose result has a
minority leading-monomial signature, combine the survivors coefficient-wise
by CRT, rationally reconstruct, screen the candidate at a fresh prime, and
finally certify it over Q.  On failure the prime set is enlarged and the
loop repeats, keeping the results already computed.
"""
from __future__ import annotations

import hashlib
import json
import random
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import gmpy2
from gmpy2 import mpq

from . import deadline
from .errors import ModularFailure, NotPermissible, NotWeakPermissible, PrimeExhaustion
from .groebner import GroebnerBasis, Ideal, buchberger, is_reduced_gb, normal_form
from .idealops import power_bracket, quotient, saturate
from .polycore import Poly, Ring, is_permissible, is_weak_permissible, reduce_mod_p

# the modulus must exceed this multiple of the coefficient norm
NORM_FACTOR = 2

WEAK = "weak_permissible"
PERMISSIBLE = "permissible"
LUCKY = "effectively_lucky"

_STATUS = ("unreconstructed", "reconstructed", "ptest_passed", "certified")


@dataclass
class ModularRunConfig:
    primes: int = 4
    prime_bits: int = 31
    seed: int = 0
    max_rounds: int = 6
    verify: str = "full"  # "full" or "ptest_only"
    jobs: int = 1
    input_gb: str = "auto"  # "auto" (modular when possible) or "direct"
    log: Callable[[dict], None] | None = None
    prime_filter: Callable[[int], bool] | None = None
    sat_escalation_cap: int = 16

    def __post_init__(self):
        if self.primes < 1:
            raise ValueError("prime count must be >= 1")
        if self.verify not in ("full", "ptest_only"):
            raise ValueError(f"verify must be 'full' or 'ptest_only', not {self.verify!r}")
        if self.input_gb not in ("auto", "direct"):
            raise ValueError(f"input_gb must be 'auto' or 'direct', not {self.input_gb!r}")
        if self.prime_bits < 2:
            raise ValueError("prime_bits must be at least 2")


@dataclass
class PrimeRecord:
    p: int
    classification: frozenset = frozenset()
    result: Any = None
    signature: tuple = ()
    micros: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def effectively_lucky(self) -> bool:
        return LUCKY in self.classification


@dataclass
class LiftCandidate:
    ring: Ring
    modulus: int
    residue_basis: list
    primes: tuple = ()
    rational_basis: list | None = None
    status: str = "unreconstructed"

    def advance(self, status: str) -> None:
        if _STATUS.index(status) < _STATUS.index(self.status):
            raise ValueError(f"status cannot go back from {self.status} to {status}")
        if status == "certified" and self.status != "ptest_passed":
            raise ValueError("a candidate is certified only after passing the p-test")
        self.status = status


@dataclass
class ModularResult:
    basis: GroebnerBasis
    certified: bool
    primes_used: list
    rounds: int
    exponent: int | None = None
    stage_info: dict = field(default_factory=dict)


# -- primes --------------------------------------------------------------------


class PrimePool:
    """Deterministic stream of distinct random primes of a fixed bit size."""

    def __init__(self, cfg: ModularRunConfig, salt: str = ""):
        self.bits = cfg.prime_bits
        self.lo = 1 << (cfg.prime_bits - 1)
        self.hi = 1 << cfg.prime_bits
        self.rng = random.Random(f"{cfg.seed}:{salt}")
        self.filter = cfg.prime_filter
        self.used: set[int] = set()

    def next(self, accept: Callable[[int], bool] | None = None, max_tries: int = 2000) -> int:
        for _ in range(max_tries):
            c = self.rng.randrange(self.lo, self.hi)
            p = int(gmpy2.next_prime(c - 1))
            if p >= self.hi:
                p = int(gmpy2.next_prime(self.lo - 1))
            if p in self.used:
                continue
            if self.filter is not None and not self.filter(p):
                continue
            self.used.add(p)
            if accept is None or accept(p):
                return p
        raise PrimeExhaustion(f"no usable {self.bits}-bit prime found after {max_tries} draws")

    def take(self, k: int, accept: Callable[[int], bool] | None = None) -> list[int]:
        return [self.next(accept) for _ in range(k)]


def choose_primes(cfg: ModularRunConfig, inputs: Sequence, gb_flags: Sequence[bool] | None = None,
                  pool: PrimePool | None = None) -> list[PrimeRecord]:
    """``cfg.primes`` primes weakly permissible for every input set and
    permissible for the sets flagged as Groebner bases."""
    inputs = [list(s) for s in inputs]
    gb_flags = list(gb_flags) if gb_flags is not None else [False] * len(inputs)
    pool = pool or PrimePool(cfg)

    def ok(p):
        for polys, is_gb in zip(inputs, gb_flags):
            if not is_weak_permissible(p, polys):
                return False
            if is_gb and not is_permissible(p, polys):
                return False
        return True

    out = []
    for p in pool.take(cfg.primes, ok):
        cls = {WEAK}
        if all(is_permissible(p, polys) for polys, f in zip(inputs, gb_flags) if f):
            cls.add(PERMISSIBLE)
        out.append(PrimeRecord(p, frozenset(cls)))
    return out


def image(G: Iterable[Poly], p: int) -> list[Poly]:
    return [reduce_mod_p(g, p) for g in G]


def classify_prime(p: int, F: GroebnerBasis | Sequence[Poly]) -> PrimeRecord:
    """Weak permissibility, permissibility and effective luckiness of ``p``
    for a reduced Groebner basis ``F`` over Q."""
    polys = list(F)
    cls = set()
    if not is_weak_permissible(p, polys):
        return PrimeRecord(p, frozenset())
    cls.add(WEAK)
    if not is_permissible(p, polys):
        return PrimeRecord(p, frozenset(cls))
    cls.add(PERMISSIBLE)
    img = image(polys, p)
    if not polys:
        cls.add(LUCKY)
    elif all(g.terms for g in img) and is_reduced_gb([g.monic() for g in img]):
        cls.add(LUCKY)
    return PrimeRecord(p, frozenset(cls))


def is_effectively_lucky(p: int, F: GroebnerBasis | Sequence[Poly]) -> bool:
    return classify_prime(p, F).effectively_lucky


def signature_of(result: Any) -> tuple:
    if isinstance(result, GroebnerBasis):
        return result.signature()
    if isinstance(result, dict):
        return tuple(sorted((k, signature_of(v)) for k, v in result.items()))
    if isinstance(result, (tuple, list)):
        return tuple(signature_of(v) for v in result)
    return (result,)


def signature_hash(sig: tuple) -> str:
    return hashlib.sha1(repr(sig).encode()).hexdigest()[:16]


def delete_unlucky(records: Sequence[PrimeRecord]) -> list[PrimeRecord]:
    """Keep the largest group of records sharing a signature.

    Ties go to the lexicographically smallest signature.  Order is preserved.
    """
    if not records:
        return []
    counts = Counter(r.signature for r in records)
    best = max(counts.values())
    winner = min(s for s, c in counts.items() if c == best)
    return [r for r in records if r.signature == winner]


# -- CRT and rational reconstruction -------------------------------------------


def crt_pair(r1: int, m1: int, r2: int, m2: int) -> tuple[int, int]:
    """Combine ``x = r1 mod m1`` and ``x = r2 mod m2`` for coprime moduli."""
    t = (r2 - r1) * pow(m1, -1, m2) % m2
    return r1 + m1 * t, m1 * m2


def crt_lift(records: Sequence[PrimeRecord], key: Callable[[Any], GroebnerBasis] | None = None) -> LiftCandidate:
    """Coefficient-wise CRT of the per-prime bases (missing monomial = residue 0)."""
    if not records:
        raise ValueError("nothing to lift")
    get = key or (lambda r: r)
    bases = [get(r.result) for r in records]
    sig = bases[0].signature()
    for b in bases[1:]:
        if b.signature() != sig:
            raise RuntimeError("internal error: lifting bases with different leading monomials")
    ring_p = bases[0].ring
    n = len(bases[0].polys)
    modulus = 1
    residues: list[dict] = [dict() for _ in range(n)]
    for rec, b in zip(records, bases):
        p = rec.p
        for k in range(n):
            acc = residues[k]
            terms = b.polys[k].terms
            for m in set(acc) | set(terms):
                r1 = acc.get(m, 0)
                r2 = terms.get(m, 0)
                acc[m], _ = crt_pair(r1, modulus, r2, p)
        modulus *= p
    for acc in residues:
        for m in list(acc):
            acc[m] %= modulus
            if not acc[m]:
                del acc[m]
    return LiftCandidate(ring_p.with_modulus(0), modulus, residues, tuple(r.p for r in records))


def rational_reconstruct(c: int, m: int):
    """Return ``a/b`` with ``a = b*c mod m`` and ``|a|, |b| <= sqrt(m/2)``, or None."""
    if m < 2:
        raise ValueError("modulus must be >= 2")
    c %= m
    bound = gmpy2.isqrt(m // 2)
    r0, r1 = m, c
    t0, t1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        t0, t1 = t1, t0 - q * t1
    if t1 == 0 or abs(t1) > bound:
        return None
    if gmpy2.gcd(r1, t1) != 1 or gmpy2.gcd(t1, m) != 1:
        return None
    if t1 < 0:
        r1, t1 = -r1, -t1
    return mpq(int(r1), int(t1))


def reconstruct(cand: LiftCandidate) -> bool:
    """Fill ``cand.rational_basis``; False if some coefficient has no reconstruction."""
    ring = cand.ring
    out = []
    for acc in cand.residue_basis:
        terms = {}
        for mon, c in acc.items():
            q = rational_reconstruct(c, cand.modulus)
            if q is None:
                return False
            terms[mon] = q
        out.append(Poly(ring, terms))
    cand.rational_basis = out
    cand.advance("reconstructed")
    return True


def ptest(cand: LiftCandidate, p: int, compute: Callable[[int], GroebnerBasis]) -> bool:
    """Recompute at an unused prime and compare with the candidate's image.

    Raises NotPermissible when ``p`` cannot be used for the candidate.
    """
    if cand.rational_basis is None:
        raise ValueError("candidate not reconstructed")
    if not is_permissible(p, cand.rational_basis):
        raise NotPermissible(p, "denominator or leading coefficient vanishes")
    img = GroebnerBasis(tuple(image(cand.rational_basis, p)), cand.ring.with_modulus(p))
    got = compute(p)
    if got is None:
        raise NotPermissible(p, "operation rejected the prime")
    return got == img


def matches_image(H: Sequence[Poly], rec: PrimeRecord, key=None) -> bool:
    """Final test at one prime: ``p`` permissible for ``H`` and the image
    of ``H`` equals the stored reduced basis at ``p``."""
    base = (key or (lambda r: r))(rec.result)
    if not is_permissible(rec.p, H):
        return False
    return tuple(image(H, rec.p)) == base.polys


# -- the generic loop ------------------------------------------------------------


def _emit(cfg: ModularRunConfig, stage: str, rec: PrimeRecord, status: str | None = None) -> None:
    if cfg.log is None:
        return
    cls = status or (max(rec.classification, key=[WEAK, PERMISSIBLE, LUCKY].index)
                     if rec.classification else "rejected")
    cfg.log({"prime": rec.p, "class": cls, "sig": signature_hash(rec.signature),
             "micros": rec.micros, "stage": stage})


def _run_tasks(task, primes: list[int], jobs: int) -> list:
    if jobs > 1 and len(primes) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(primes))) as ex:
            return list(ex.map(task, primes))
    return [task(p) for p in primes]


def _timed(task, p):
    t0 = time.perf_counter()
    out = task(p)
    return out, int((time.perf_counter() - t0) * 1e6)


class _TimedTask:
    def __init__(self, task):
        self.task = task

    def __call__(self, p):
        return _timed(self.task, p)


def modular_loop(task, admissible: Callable[[int], bool], certify: Callable[[list, list], bool],
                 cfg: ModularRunConfig, stage: str, key=None, salt: str = "",
                 pool: PrimePool | None = None):
    """Shared lift loop: per-prime work, CRT, reconstruction, p-test, final test.

    ``task(p)`` returns the F_p result (a GroebnerBasis, or a structure whose
    basis ``key`` extracts) or None to reject ``p``.  ``certify(H, lucky)``
    runs the final test on the reconstructed basis ``H``.
    Returns ``(H, lucky_records, rounds, certified)``.
    """
    pool = pool or PrimePool(cfg, salt or stage)
    key = key or (lambda r: r)
    records: list[PrimeRecord] = []
    n = cfg.primes
    last_reason = "no rounds run"
    timed = _TimedTask(task)
    for rnd in range(1, cfg.max_rounds + 1):
        deadline.check()
        batch = pool.take(n, admissible)
        for p, (res, micros) in zip(batch, _run_tasks(timed, batch, cfg.jobs)):
            rec = PrimeRecord(p, frozenset({WEAK, PERMISSIBLE, LUCKY}), res,
                              signature_of(res) if res is not None else (), micros)
            if res is None:
                _emit(cfg, stage, rec, "rejected")
                continue
            _emit(cfg, stage, rec)
            records.append(rec)
        n *= 2
        lucky = delete_unlucky(records)
        if not lucky:
            last_reason = "all primes rejected"
            continue
        cand = crt_lift(lucky, key)
        if not reconstruct(cand):
            last_reason = "rational reconstruction failed"
            continue
        H = cand.rational_basis
        passed = None
        for _ in range(8):
            q = pool.next(admissible)
            try:
                passed = ptest(cand, q, lambda pp: (lambda r: None if r is None else key(r))(task(pp)))
                break
            except NotPermissible:
                continue
        if not passed:
            last_reason = "p-test failed"
            continue
        cand.advance("ptest_passed")
        if cfg.verify == "ptest_only":
            return H, lucky, rnd, False
        if certify(H, lucky):
            cand.advance("certified")
            return H, lucky, rnd, True
        last_reason = "final test failed"
    raise ModularFailure(f"{stage}: no certified result after {cfg.max_rounds} rounds ({last_reason})",
                         {"stage": stage, "reason": last_reason, "primes": [r.p for r in records]})


# -- operations ---------------------------------------------------------------------


def rational_gb(I: Ideal, cfg: ModularRunConfig | None = None, stage: str = "input.gb") -> tuple[GroebnerBasis, bool]:
    """Reduced Groebner basis of ``I`` over Q and whether it is certified.

    Grevlex ideals go through :func:`modular_gb` unless ``cfg.input_gb`` is
    "direct"; a certified basis is cached on the ideal.
    """
    if I.ring.modulus:
        raise ValueError("expected an ideal over QQ")
    if I.has_gb():
        return I.gb(), True
    if cfg is None or cfg.input_gb == "direct" or I.ring.order.kind != "grevlex":
        return I.gb(), True
    cached = getattr(I, "_uncertified_gb", None)
    if cached is not None:
        return cached, False
    res = modular_gb(I, cfg, stage)
    if res.certified:
        I.set_gb(res.basis)
    else:
        I._uncertified_gb = res.basis
    return res.basis, res.certified


def _fp_ideal(polys: Sequence[Poly], p: int) -> Ideal:
    img = image(polys, p)
    ring = img[0].ring if img else None
    return ring, img


class QuotientTask:
    """``(I_p(F) : I_p(G))`` at a prime."""

    def __init__(self, F: Sequence[Poly], G: Sequence[Poly], ring: Ring):
        self.F = list(F)
        self.G = list(G)
        self.ring = ring

    def __call__(self, p: int) -> GroebnerBasis:
        rp = self.ring.with_modulus(p)
        Ip = Ideal(rp, image(self.F, p))
        Jp = Ideal(rp, image(self.G, p))
        return quotient(Ip, Jp).gb()


class SaturationTask:
    """``(I_p(F) : I_p(G)^inf)`` with its stabilization index."""

    def __init__(self, F, G, ring):
        self.F = list(F)
        self.G = list(G)
        self.ring = ring

    def __call__(self, p: int):
        rp = self.ring.with_modulus(p)
        Q, m = saturate(Ideal(rp, image(self.F, p)), Ideal(rp, image(self.G, p)))
        return (Q.gb(), m)


class GuardedTask:
    """Run ``task`` only where ``guard`` reproduces the image of ``expected``.

    Used to enforce hypotheses of the form "the F_p computation equals the
    reduction of the rational result" at each prime.
    """

    def __init__(self, task, guard, expected: Sequence[Poly], sat: bool = False):
        self.task = task
        self.guard = guard
        self.expected = list(expected)
        self.sat = sat

    def __call__(self, p: int):
        got = self.guard(p)
        if self.sat:
            got = got[0]
        if got.polys != tuple(image(self.expected, p)):
            return None
        return self.task(p)


def primetest_for(F: GroebnerBasis, weak: Sequence[Sequence[Poly]] = ()) -> Callable[[int], bool]:
    """Primes weakly permissible for every set in ``weak`` and effectively lucky for ``F``."""
    weak = [list(w) for w in weak]

    def ok(p: int) -> bool:
        if not all(is_weak_permissible(p, w) for w in weak):
            return False
        return is_effectively_lucky(p, F)

    return ok


def contained_in(polys: Iterable[Poly], F: GroebnerBasis) -> bool:
    G = F.polys
    for h in polys:
        deadline.check()
        if normal_form(h, G).terms:
            return False
    return True


def mod_quotient(I: Ideal, J: Ideal, cfg: ModularRunConfig | None = None, stage: str = "quotient",
                 extra_lucky: Sequence[GroebnerBasis] = (), guard=None) -> ModularResult:
    """Certified ``(I : J)`` over Q by modular computation."""
    cfg = cfg or ModularRunConfig()
    ring = I.ring
    F, f_ok = rational_gb(I, cfg)
    G = [g for g in J.gens if g.terms]
    if not G:
        return ModularResult(GroebnerBasis((ring.one(),), ring), True, [], 0)
    if F.is_unit():
        return ModularResult(F, f_ok, [], 0)
    base_ok = primetest_for(F, [G])

    def admissible(p):
        return base_ok(p) and all(is_effectively_lucky(p, E) for E in extra_lucky)

    task = QuotientTask(F.polys, G, ring)
    if guard is not None:
        task = GuardedTask(task, *guard)

    def certify(H, lucky):
        if not any(matches_image(H, r) for r in lucky):
            return False
        return contained_in((h * g for h in H for g in G), F)

    H, lucky, rounds, ok = modular_loop(task, admissible, certify, cfg, stage)
    gb = GroebnerBasis(tuple(H), ring)
    return ModularResult(gb, ok and f_ok, [r.p for r in lucky], rounds)


def mod_saturate(I: Ideal, J: Ideal, cfg: ModularRunConfig | None = None,
                 stage: str = "saturate", extra_lucky: Sequence[GroebnerBasis] = (),
                 guard=None) -> ModularResult:
    """Certified ``(I : J^inf)`` over Q and the majority stabilization index."""
    cfg = cfg or ModularRunConfig()
    ring = I.ring
    F, f_ok = rational_gb(I, cfg)
    G = [g for g in J.gens if g.terms]
    if not G:
        return ModularResult(GroebnerBasis((ring.one(),), ring), True, [], 0, exponent=1)
    if F.is_unit():
        return ModularResult(F, f_ok, [], 0, exponent=0)
    base_ok = primetest_for(F, [G])

    def admissible(p):
        return base_ok(p) and all(is_effectively_lucky(p, E) for E in extra_lucky)

    task = SaturationTask(F.polys, G, ring)
    if guard is not None:
        task = GuardedTask(task, *guard)
    state = {}

    def certify(H, lucky):
        if not any(matches_image(H, r, key=lambda res: res[0]) for r in lucky):
            return False
        m = Counter(r.result[1] for r in lucky).most_common(1)[0][0]
        state["m"] = m
        if m == 0:
            return contained_in(H, F)
        k = 1
        while k <= cfg.sat_escalation_cap:
            if contained_in((h * g for h in H for g in power_bracket(G, m * k)), F):
                return True
            k *= 2
        return False

    H, lucky, rounds, ok = modular_loop(task, admissible, certify, cfg, stage, key=lambda res: res[0])
    m = state.get("m")
    if m is None:
        m = Counter(r.result[1] for r in lucky).most_common(1)[0][0]
    return ModularResult(GroebnerBasis(tuple(H), ring), ok and f_ok, [r.p for r in lucky], rounds, exponent=m)


def jsonl_logger(stream) -> Callable[[dict], None]:
    """Run-log sink writing one JSON object per line."""

    def log(record: dict) -> None:
        stream.write(json.dumps(record, sort_keys=True) + "\n")

    return log


# -- modular Groebner bases ---------------------------------------------------------


def homogenize(f: Poly, ring_h: Ring) -> Poly:
    """Homogenize with the last variable of ``ring_h``."""
    d = f.total_degree()
    out = {}
    for m, c in f.terms.items():
        e = f.ring.unpack(m)
        out[e + (d - sum(e),)] = c
    return ring_h.from_dict(out)


def dehomogenize(f: Poly, ring: Ring) -> Poly:
    out = {}
    for m, c in f.terms.items():
        e = f.ring.unpack(m)[:-1]
        out[e] = out.get(e, 0) + c
    return ring.from_dict(out)


def interreduce(G: Sequence[Poly], ring: Ring) -> GroebnerBasis:
    """Reduced Groebner basis from a Groebner basis."""
    G = sorted((g.monic() for g in G if g.terms), key=lambda g: g.LM)
    minimal = []
    for g in G:
        if not any(ring.divides(h.LM, g.LM) for h in minimal):
            minimal.append(g)
    out = []
    for i, g in enumerate(minimal):
        others = minimal[:i] + minimal[i + 1:]
        out.append(_tail_reduce(g, others))
    return GroebnerBasis(tuple(sorted(out, key=lambda g: g.LM, reverse=True)), ring)


def _tail_reduce(g: Poly, others: Sequence[Poly]) -> Poly:
    lead = Poly(g.ring, {g.LM: g.LC})
    return lead + normal_form(g - lead, others)


class HomogeneousGBTask:
    def __init__(self, gens, ring_h):
        self.gens = list(gens)
        self.ring_h = ring_h

    def __call__(self, p: int) -> GroebnerBasis:
        rp = self.ring_h.with_modulus(p)
        return buchberger(image(self.gens, p), rp)


def modular_gb(I: Ideal, cfg: ModularRunConfig | None = None, stage: str = "gb") -> ModularResult:
    """Reduced Groebner basis over Q of a grevlex ideal through homogenization.

    The homogenized basis is lifted from F_p images and accepted when it is a
    Groebner basis over Q, contains the homogenized generators, and has the
    leading monomials of the F_p basis at a prime where the generators
    reduce without loss.  For homogeneous ideals the F_p ideal then has the
    same Hilbert function as the lifted one, so the two ideals coincide.
    Dehomogenizing a grevlex basis with the homogenizing variable last gives a
    Groebner basis of the original ideal.
    """
    cfg = cfg or ModularRunConfig()
    ring = I.ring
    if ring.modulus or ring.order.kind != "grevlex":
        raise ValueError("modular_gb needs a grevlex ring over QQ")
    gens = [g for g in I.gens if g.terms]
    if not gens:
        return ModularResult(GroebnerBasis((), ring), True, [], 0)
    if any(g.is_constant() for g in gens):
        return ModularResult(GroebnerBasis((ring.one(),), ring), True, [], 0)
    h = fresh_variable(ring.names)
    ring_h = Ring(tuple(ring.names) + (h,), ring.order, 0)
    gens_h = [homogenize(g, ring_h) for g in gens]
    task = HomogeneousGBTask(gens_h, ring_h)
    admissible = lambda p: is_weak_permissible(p, gens_h)

    def certify(H, lucky):
        if not any(matches_image(H, r) for r in lucky):
            return False
        if not is_reduced_gb(H, ring_h):
            return False
        return contained_in(gens_h, GroebnerBasis(tuple(H), ring_h))

    H, lucky, rounds, ok = modular_loop(task, admissible, certify, cfg, stage)
    gb = interreduce([dehomogenize(g, ring) for g in H], ring)
    return ModularResult(gb, ok, [r.p for r in lucky], rounds)


def fresh_variable(names: Sequence[str]) -> str:
    from .groebner import fresh_name

    return fresh_name(names, "h")
