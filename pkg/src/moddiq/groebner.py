"""Buchberger's algorithm, normal forms, elimination and dimension.

The inner loops work on raw ``{packed monomial: coefficient}`` dicts; the
public functions take and return :class:`~moddiq.polycore.Poly` objects.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import deadline
from .errors import DomainMismatch, UnitIdeal
from .polycore import MonomialOrder, Poly, Ring

MAX_MIS_VARS = 16


# -- raw kernels ----------------------------------------------------------------


def _monic_raw(f: dict, p: int) -> dict:
    lm = max(f)
    lc = f[lm]
    if lc == 1:
        return f
    if p:
        inv = pow(lc, -1, p)
        return {m: c * inv % p for m, c in f.items()}
    inv = 1 / lc
    return {m: c * inv for m, c in f.items()}


def _reduce_raw(f: dict, lms: list, tails: list, guard: int, p: int, full: bool = True) -> dict:
    """Normal form of ``f`` modulo monic polynomials given as (lm, tail) lists.

    Reduces by the first divisor in list order.  Over F_p coefficients are
    reduced lazily: only the term currently inspected is taken mod p.
    """
    f = dict(f)
    r = {}
    get = f.get
    while f:
        m = max(f)
        c = f.pop(m)
        if p:
            c %= p
        if not c:
            continue
        mg = m | guard
        for k, lm in enumerate(lms):
            if (mg - lm) & guard == guard:
                break
        else:
            r[m] = c
            if not full:
                if p:
                    for mm, cc in f.items():
                        cc %= p
                        if cc:
                            r[mm] = cc
                else:
                    for mm, cc in f.items():
                        if cc:
                            r[mm] = cc
                return r
            continue
        shift = m - lm
        for gm, gc in tails[k]:
            t = gm + shift
            f[t] = get(t, 0) - c * gc
    return r


def _split(f: dict):
    lm = max(f)
    return lm, [(m, c) for m, c in f.items() if m != lm]


def _spoly_raw(lcm: int, lm1: int, t1: list, lm2: int, t2: list, p: int) -> dict:
    s1 = lcm - lm1
    s2 = lcm - lm2
    h = {}
    get = h.get
    for m, c in t1:
        h[m + s1] = c
    for m, c in t2:
        t = m + s2
        h[t] = get(t, 0) - c
    if p:
        return {m: c % p for m, c in h.items() if c % p}
    return {m: c for m, c in h.items() if c}


class _Basis:
    """Working state of one Buchberger run."""

    def __init__(self, ring: Ring, strategy: str):
        self.ring = ring
        self.p = ring.modulus
        self.guard = ring.guard
        self.strategy = strategy
        self.polys: list[dict] = []
        self.lms: list[int] = []
        self.tails: list[list] = []
        self.sugar: list[int] = []
        self.active: set[int] = set()
        self.pairs: set[tuple[int, int]] = set()
        self._lcm_cache: dict = {}
        self._red = None

    def lcm(self, a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        v = self._lcm_cache.get(key)
        if v is None:
            v = self.ring.mono_lcm(a, b)
            self.ring.check_overflow(v)
            self._lcm_cache[key] = v
        return v

    def divides(self, a: int, b: int) -> bool:
        g = self.guard
        return ((b | g) - a) & g == g

    def reducers(self):
        if self._red is None:
            ids = sorted(self.active)
            self._red = ([self.lms[i] for i in ids], [self.tails[i] for i in ids])
        return self._red

    def reduce(self, f: dict) -> dict:
        lms, tails = self.reducers()
        return _reduce_raw(f, lms, tails, self.guard, self.p)

    def add(self, h: dict, sugar: int) -> None:
        h = _monic_raw(h, self.p)
        g = self.ring.guard
        for m in h:
            if m & g:
                self.ring.check_overflow(m)
        i = len(self.polys)
        lm, tail = _split(h)
        self.polys.append(h)
        self.lms.append(lm)
        self.tails.append(tail)
        self.sugar.append(sugar)
        self._update(i)
        self._red = None

    def _update(self, ih: int) -> None:
        # Gebauer-Moeller installation of new pairs
        lms = self.lms
        mh = lms[ih]
        g = self.guard
        mlcm = self.ring.mono_lcm
        C = sorted(self.active)
        L = {j: mlcm(mh, lms[j]) for j in C}

        def div(a, b):
            return ((b | g) - a) & g == g

        D = []
        for k, ig in enumerate(C):
            l_hg = L[ig]
            if mh + lms[ig] == l_hg:
                D.append(ig)
                continue
            if any(div(L[j], l_hg) for j in C[k + 1:]):
                continue
            if any(div(L[j], l_hg) for j in D):
                continue
            D.append(ig)
        E = [ig for ig in D if mh + lms[ig] != L[ig]]
        new_pairs = set()
        lcm = self.lcm
        for i1, i2 in self.pairs:
            l12 = lcm(lms[i1], lms[i2])
            if not div(mh, l12):
                new_pairs.add((i1, i2))
                continue
            l1 = L[i1] if i1 in L else mlcm(lms[i1], mh)
            l2 = L[i2] if i2 in L else mlcm(lms[i2], mh)
            if l1 == l12 or l2 == l12:
                new_pairs.add((i1, i2))
        for ig in E:
            new_pairs.add((ig, ih) if ig < ih else (ih, ig))
        self.pairs = new_pairs
        self.active = {ig for ig in self.active if not div(mh, lms[ig])}
        self.active.add(ih)

    def pair_key(self, pr):
        i, j = pr
        l = self.lcm(self.lms[i], self.lms[j])
        if self.strategy == "normal":
            return (l, i, j)
        deg = self.ring.mono_degree
        dl = deg(l)
        s = max(self.sugar[i] + dl - deg(self.lms[i]), self.sugar[j] + dl - deg(self.lms[j]))
        return (s, l, i, j)

    def run(self) -> None:
        while self.pairs:
            deadline.check()
            pr = min(self.pairs, key=self.pair_key)
            self.pairs.discard(pr)
            i, j = pr
            l = self.lcm(self.lms[i], self.lms[j])
            s = _spoly_raw(l, self.lms[i], self.tails[i], self.lms[j], self.tails[j], self.p)
            if not s:
                continue
            h = self.reduce(s)
            if h:
                key = self.pair_key(pr)
                self.add(h, key[0] if self.strategy != "normal" else self.ring.mono_degree(max(h)))

    def reduced_basis(self) -> list[dict]:
        ids = sorted(self.active, key=lambda i: self.lms[i])
        # minimal basis: drop elements whose LM is divisible by another's
        keep = []
        for i in ids:
            if not any(j != i and self.divides(self.lms[j], self.lms[i]) and
                       (self.lms[j] != self.lms[i] or j < i) for j in ids):
                keep.append(i)
        lms = [self.lms[i] for i in keep]
        out = []
        # one pass suffices: the set of leading monomials never changes
        for k, i in enumerate(keep):
            others_l = lms[:k] + lms[k + 1:]
            others_t = [self.tails[j] for j in keep[:k] + keep[k + 1:]]
            tail = dict(self.tails[i])
            red = _reduce_raw(tail, others_l, others_t, self.guard, self.p) if tail else {}
            red[lms[k]] = self.polys[i][lms[k]]
            out.append(red)
        out.sort(key=max, reverse=True)
        return out


def groebner_raw(polys: Iterable[dict], ring: Ring, strategy: str = "normal") -> list[dict]:
    """Reduced Groebner basis of raw dict polynomials in ``ring``."""
    B = _Basis(ring, strategy)
    inputs = [f for f in polys if f]
    inputs.sort(key=lambda f: max(f))
    deg = ring.mono_degree
    for f in inputs:
        deadline.check()
        h = B.reduce(f)
        if h:
            if max(h) == 0:
                return [{0: ring.coerce(1)}]
            B.add(h, max(deg(m) for m in h))
    B.run()
    basis = B.reduced_basis()
    if any(max(g) == 0 for g in basis):
        return [{0: ring.coerce(1)}]
    return basis


# -- public API ------------------------------------------------------------------------


@dataclass(frozen=True)
class GroebnerBasis:
    """A Groebner basis; ``ring`` carries the monomial order."""

    polys: tuple
    ring: Ring
    reduced: bool = True

    def __post_init__(self):
        # reduced bases are unique as sets; fix the order so equality is set equality
        if self.reduced and len(self.polys) > 1:
            object.__setattr__(self, "polys", tuple(sorted(self.polys, key=lambda g: g.LM, reverse=True)))

    @property
    def order(self) -> MonomialOrder:
        return self.ring.order

    def __iter__(self):
        return iter(self.polys)

    def __len__(self):
        return len(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    def is_unit(self) -> bool:
        return len(self.polys) == 1 and self.polys[0].is_constant()

    def is_zero(self) -> bool:
        return not self.polys

    def leading_monomials(self) -> list[tuple[int, ...]]:
        return [g.lm_exponents() for g in self.polys]

    def signature(self) -> tuple:
        return tuple(self.leading_monomials())

    def __eq__(self, other):
        if not isinstance(other, GroebnerBasis):
            return NotImplemented
        return self.ring is other.ring and self.polys == other.polys

    def __hash__(self):
        return hash((self.ring.names, self.ring.modulus, self.polys))

    def __str__(self):
        return "[" + ", ".join(str(g) for g in self.polys) + "]"


def _same_ring(polys: Sequence[Poly], ring: Ring | None = None) -> Ring:
    rings = {f.ring for f in polys}
    if ring is not None:
        rings.add(ring)
    if len(rings) > 1:
        raise DomainMismatch(f"polynomials from different rings: {rings}")
    if not rings:
        raise ValueError("cannot infer ring from an empty list")
    return rings.pop()


def buchberger(gens: Sequence[Poly], ring: Ring | None = None, strategy: str = "normal") -> GroebnerBasis:
    """Reduced Groebner basis of the ideal generated by ``gens``.

    ``ring`` is needed only when ``gens`` is empty.
    """
    gens = list(gens)
    ring = _same_ring(gens, ring) if gens or ring is None else ring
    raw = groebner_raw([g.terms for g in gens], ring, strategy)
    return GroebnerBasis(tuple(Poly(ring, g) for g in raw), ring, True)


def normal_form(f: Poly, G: Sequence[Poly]) -> Poly:
    """Fully reduced remainder of ``f`` by ``G`` (first divisor in list order)."""
    G = [g for g in G if g.terms]
    _same_ring([f, *G])
    p = f.ring.modulus
    lms, tails = [], []
    for g in G:
        g = g.monic()
        lm, tail = _split(g.terms)
        lms.append(lm)
        tails.append(tail)
    return Poly(f.ring, _reduce_raw(f.terms, lms, tails, f.ring.guard, p))


def divide(f: Poly, g: Poly) -> tuple[Poly, Poly]:
    """Division with remainder by a single polynomial: ``f = q*g + r``."""
    _same_ring([f, g])
    if not g.terms:
        raise ZeroDivisionError("division by the zero polynomial")
    ring = f.ring
    p = ring.modulus
    guard = ring.guard
    glm = g.LM
    ginv = pow(g.LC, -1, p) if p else 1 / g.LC
    gtail = [(m, c) for m, c in g.terms.items() if m != glm]
    rem = dict(f.terms)
    q, r = {}, {}
    get = rem.get
    while rem:
        m = max(rem)
        c = rem.pop(m)
        if p:
            c %= p
        if not c:
            continue
        if ((m | guard) - glm) & guard != guard:
            r[m] = c
            continue
        a = c * ginv % p if p else c * ginv
        s = m - glm
        q[s] = a
        for gm, gc in gtail:
            t = gm + s
            rem[t] = get(t, 0) - a * gc
    if p:
        r = {m: c % p for m, c in r.items() if c % p}
    return Poly(ring, q), Poly(ring, r)


def divide_exact(f: Poly, g: Poly) -> Poly:
    q, r = divide(f, g)
    if r.terms:
        raise ArithmeticError(f"{g} does not divide {f}")
    return q


def is_reduced_gb(G: Sequence[Poly], ring: Ring | None = None) -> bool:
    """True iff ``G`` is a reduced Groebner basis (monic, inter-reduced, all S-polys -> 0)."""
    G = [g for g in G]
    if not G:
        return True
    if any(not g.terms for g in G):
        return False
    ring = _same_ring(G, ring)
    p = ring.modulus
    guard = ring.guard
    if any(g.LC != 1 for g in G):
        return False
    lms = [g.LM for g in G]
    if len(set(lms)) != len(lms):
        return False
    for i, g in enumerate(G):
        for m in g.terms:
            for j, l in enumerate(lms):
                if j != i and ((m | guard) - l) & guard == guard:
                    return False
    tails = [_split(g.terms)[1] for g in G]
    for i, j in _critical_pairs(lms, ring):
        deadline.check()
        l = ring.mono_lcm(lms[i], lms[j])
        s = _spoly_raw(l, lms[i], tails[i], lms[j], tails[j], p)
        if s and _reduce_raw(s, lms, tails, guard, p, full=False):
            return False
    return True


def _critical_pairs(lms: Sequence[int], ring: Ring) -> list[tuple[int, int]]:
    """Pairs left after Gebauer-Moeller pruning when the basis is built up in
    increasing LM order.  ``G`` is a Groebner basis iff these S-polys reduce to 0."""
    B = _Basis(ring, "normal")
    idx = sorted(range(len(lms)), key=lambda i: lms[i])
    for i in idx:
        B.lms.append(lms[i])
        B._update(len(B.lms) - 1)
    return sorted((idx[a], idx[b]) for a, b in B.pairs)


class Ideal:
    """Generators in a ring plus a cached reduced Groebner basis."""

    def __init__(self, ring: Ring, gens: Iterable[Poly] = ()):
        gens = list(gens)
        for g in gens:
            if g.ring is not ring:
                raise DomainMismatch(f"generator {g} not in {ring}")
        seen = set()
        uniq = []
        for g in gens:
            if g.terms and g not in seen:
                seen.add(g)
                uniq.append(g)
        self.ring = ring
        self.gens = tuple(uniq)
        self._gb: GroebnerBasis | None = None
        self._lock = threading.Lock()

    @classmethod
    def from_gb(cls, gb: GroebnerBasis) -> "Ideal":
        I = cls(gb.ring, gb.polys)
        I._gb = gb
        return I

    @classmethod
    def unit(cls, ring: Ring) -> "Ideal":
        return cls.from_gb(GroebnerBasis((ring.one(),), ring))

    @classmethod
    def zero(cls, ring: Ring) -> "Ideal":
        return cls.from_gb(GroebnerBasis((), ring))

    def gb(self) -> GroebnerBasis:
        gb = self._gb
        if gb is None:
            gb = buchberger(self.gens, self.ring)
            with self._lock:
                if self._gb is None:
                    self._gb = gb
                gb = self._gb
        return gb

    def set_gb(self, gb: GroebnerBasis) -> None:
        """Install a reduced basis computed elsewhere (must generate this ideal)."""
        if gb.ring is not self.ring:
            raise DomainMismatch("basis lives in another ring")
        with self._lock:
            self._gb = gb

    def has_gb(self) -> bool:
        return self._gb is not None

    def is_unit(self) -> bool:
        return self.gb().is_unit()

    def is_zero(self) -> bool:
        return not self.gens

    def reduce(self, f: Poly) -> Poly:
        return normal_form(f, self.gb().polys)

    def __contains__(self, f: Poly) -> bool:
        return not self.reduce(f).terms

    def __eq__(self, other):
        if not isinstance(other, Ideal):
            return NotImplemented
        return self.ring is other.ring and self.gb() == other.gb()

    def __hash__(self):
        return hash(self.gb())

    def __add__(self, other: "Ideal") -> "Ideal":
        return Ideal(self.ring, self.gens + other.gens)

    def in_ring(self, ring: Ring) -> "Ideal":
        if ring is self.ring:
            return self
        return Ideal(ring, [ring.convert(g) for g in self.gens])

    def __repr__(self):
        return f"Ideal({', '.join(str(g) for g in self.gens)})"


def fresh_name(names: Sequence[str], base: str = "t") -> str:
    if base not in names:
        return base
    for k in itertools.count(1):
        cand = f"{base}{k}"
        if cand not in names:
            return cand


def elimination_ring(ring: Ring, drop: Sequence[str], keep: Sequence[str]) -> Ring:
    """Ring with ``drop`` variables in a leading grevlex block."""
    sub = ring.order.restrict(len(keep)).kind
    order = MonomialOrder.block_of(("grevlex", len(drop)), (sub, len(keep)))
    return Ring(tuple(drop) + tuple(keep), order, ring.modulus)


def eliminate(I: Ideal, drop: Iterable[str]) -> Ideal:
    """Generators of ``I`` intersected with the subring without ``drop``.

    The result lives in the ring on the remaining variables, with the
    restriction of the active order; its reduced basis is pre-cached.
    """
    ring = I.ring
    drop = [v for v in ring.names if v in set(drop)]
    keep = [v for v in ring.names if v not in drop]
    sub = Ring(keep, ring.order.restrict(len(keep)), ring.modulus)
    if not drop:
        return Ideal.from_gb(I.gb()) if ring is sub else Ideal(sub, I.gens)
    er = elimination_ring(ring, drop, keep)
    gb = buchberger([er.convert(g) for g in I.gens], er)
    nd = len(drop)
    out = []
    for g in gb.polys:
        if all(not any(er.unpack(m)[:nd]) for m in g.terms):
            out.append(sub.convert(g))
    out.sort(key=lambda f: f.LM, reverse=True)
    return Ideal.from_gb(GroebnerBasis(tuple(out), sub))


def _support_mask(exps: Sequence[int]) -> int:
    mask = 0
    for i, e in enumerate(exps):
        if e:
            mask |= 1 << i
    return mask


def independent_sets(gb: GroebnerBasis) -> list[tuple[int, ...]]:
    """All inclusion-maximal independent variable index sets of the LT ideal."""
    ring = gb.ring
    n = ring.nvars
    if n > MAX_MIS_VARS:
        raise ValueError(f"independent-set enumeration capped at {MAX_MIS_VARS} variables")
    supports = [_support_mask(e) for e in gb.leading_monomials()]
    if any(s == 0 for s in supports):
        raise UnitIdeal("1 is in the ideal")
    indep = [mask for mask in range(1 << n) if all(s & ~mask for s in supports)]
    indep_set = set(indep)
    maximal = []
    for mask in indep:
        if all((mask | (1 << i)) not in indep_set for i in range(n) if not mask >> i & 1):
            maximal.append(tuple(i for i in range(n) if mask >> i & 1))
    maximal.sort()
    return maximal


def dimension_and_mis(I: Ideal) -> tuple[int, list[tuple[str, ...]]]:
    """Krull dimension and the maximal independent sets of the leading-term ideal."""
    gb = I.gb()
    sets = independent_sets(gb)
    names = I.ring.names
    dim = max(len(s) for s in sets)
    return dim, [tuple(names[i] for i in s) for s in sets]


def dimension(I: Ideal) -> int:
    return dimension_and_mis(I)[0]


def top_mis(I: Ideal) -> tuple[str, ...]:
    """Lexicographically smallest independent set of maximal size."""
    sets = independent_sets(I.gb())
    dim = max(len(s) for s in sets)
    best = min(s for s in sets if len(s) == dim)
    return tuple(I.ring.names[i] for i in best)
