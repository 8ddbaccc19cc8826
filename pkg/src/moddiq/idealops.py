"""Direct ideal operations over a single coefficient domain.

Quotients are built from intersections and single-generator divisions;
saturation iterates the quotient so the stabilization index is known.
"""
from __future__ import annotations

import heapq
from typing import Iterable, Sequence

from . import deadline
from .errors import DomainMismatch, InvalidMIS
from .groebner import (
    GroebnerBasis,
    _reduce_raw,
    _split,
    Ideal,
    buchberger,
    divide_exact,
    eliminate,
    elimination_ring,
    fresh_name,
    normal_form,
)
from .polycore import MonomialOrder, Poly, Ring


def _check_pair(I: Ideal, J: Ideal) -> Ring:
    if I.ring is not J.ring:
        raise DomainMismatch(f"ideals live in different rings: {I.ring} vs {J.ring}")
    return I.ring


def _extended(ring: Ring, extra: str) -> Ring:
    """``ring`` with one new variable placed first, in its own block."""
    return elimination_ring(ring, [extra], list(ring.names))


def intersect(I: Ideal, J: Ideal) -> Ideal:
    """``I`` intersected with ``J`` via ``t*I + (1-t)*J`` and eliminating ``t``."""
    ring = _check_pair(I, J)
    if I.is_zero() or J.is_zero():
        return Ideal.zero(ring)
    if I.has_gb() and I.is_unit():
        return J
    if J.has_gb() and J.is_unit():
        return I
    t = fresh_name(ring.names)
    er = _extended(ring, t)
    tv = er.gen(t)
    gens = [tv * er.convert(f) for f in I.gens] + [(1 - tv) * er.convert(g) for g in J.gens]
    out = eliminate(Ideal(er, gens), [t])
    return Ideal.from_gb(GroebnerBasis(tuple(ring.convert(g) for g in out.gb().polys), ring))


def intersect_all(ideals: Sequence[Ideal]) -> Ideal:
    ideals = list(ideals)
    if not ideals:
        raise ValueError("empty intersection")
    acc = ideals[0]
    for J in ideals[1:]:
        acc = intersect(acc, J)
    return acc


def is_zero_dimensional(G: GroebnerBasis) -> bool:
    """Every variable has a pure power among the leading monomials (unit ideal excluded)."""
    if G.is_unit() or G.is_zero():
        return False
    ring = G.ring
    pure = set()
    for g in G.polys:
        e = ring.unpack(g.LM)
        nz = [i for i, v in enumerate(e) if v]
        if len(nz) == 1:
            pure.add(nz[0])
    return len(pure) == ring.nvars


def quotient_zero_dim(I: Ideal, gens: Sequence[Poly]) -> Ideal:
    """``(I : <gens>)`` for zero-dimensional ``I`` by linear algebra in ``K[X]/I``.

    The quotient is the kernel of ``f -> (f*g_1, ..., f*g_k) mod I``.  Monomials
    are visited in increasing order; each one either extends the staircase or,
    when its image is a combination of staircase images, gives the basis
    element with that leading monomial.  The result is the reduced basis.
    """
    ring = I.ring
    G = I.gb()
    p = ring.modulus
    guard = ring.guard
    lms = [g.LM for g in G.polys]
    tails = [_split(g.terms)[1] for g in G.polys]
    one = ring.coerce(1)

    def nf(f):
        return _reduce_raw(f, lms, tails, guard, p)

    def axpy(a: dict, c, b: dict) -> None:
        # a -= c*b
        for k, v in b.items():
            w = a.get(k, 0) - c * v
            if p:
                w %= p
            if w:
                a[k] = w
            else:
                a.pop(k, None)

    n = ring.nvars
    xs = [ring.pack(tuple(int(i == j) for j in range(n))) for i in range(n)]
    gens = [g for g in gens if g.terms]
    images = {0: [nf(dict(g.terms)) for g in gens]}
    pred: dict = {}
    rows: list = []  # (pivot, vector, combination)
    leads: list[int] = []
    out: list[dict] = []
    heap = [0]
    queued = {0}
    while heap:
        deadline.check()
        m = heapq.heappop(heap)
        if any(((m | guard) - l) & guard == guard for l in leads):
            continue
        if m not in images:
            src, x = pred[m]
            images[m] = [nf({t + x: c for t, c in r.items()}) for r in images[src]]
        vec = {(i, t): c for i, r in enumerate(images[m]) for t, c in r.items()}
        combo = {m: one}
        for piv, rv, rc in rows:
            c = vec.get(piv)
            if c:
                axpy(vec, c, rv)
                axpy(combo, c, rc)
        if not vec:
            if m == 0:
                return Ideal.unit(ring)
            leads.append(m)
            out.append(combo)
            continue
        piv = max(vec)
        c = vec[piv]
        if c != 1:
            inv = pow(c, -1, p) if p else 1 / c
            vec = {k: (v * inv % p if p else v * inv) for k, v in vec.items()}
            combo = {k: (v * inv % p if p else v * inv) for k, v in combo.items()}
        rows.append((piv, vec, combo))
        for x in xs:
            t = m + x
            if t not in queued:
                ring.check_overflow(t)
                queued.add(t)
                pred[t] = (m, x)
                heapq.heappush(heap, t)
    out.sort(key=max, reverse=True)
    return Ideal.from_gb(GroebnerBasis(tuple(Poly(ring, f) for f in out), ring))


def quotient_by_element(I: Ideal, g: Poly) -> Ideal:
    """``(I : g)`` as ``(I intersected with <g>) / g``."""
    ring = I.ring
    if not g.terms:
        return Ideal.unit(ring)
    if not normal_form(g, I.gb().polys).terms:
        return Ideal.unit(ring)
    if is_zero_dimensional(I.gb()):
        return quotient_zero_dim(I, [g])
    meet = intersect(I, Ideal(ring, [g]))
    return Ideal.from_gb(buchberger([divide_exact(h, g) for h in meet.gb().polys], ring))


def quotient(I: Ideal, J: Ideal) -> Ideal:
    """Ideal quotient ``(I : J)``; the zero ideal ``J`` gives the unit ideal."""
    ring = _check_pair(I, J)
    gens = [g for g in J.gens if g.terms]
    if not gens:
        return Ideal.unit(ring)
    if is_zero_dimensional(I.gb()):
        return quotient_zero_dim(I, gens)
    parts = []
    for g in gens:
        deadline.check()
        q = quotient_by_element(I, g)
        if not q.is_unit():
            parts.append(q)
    if not parts:
        return Ideal.unit(ring)
    return intersect_all(parts)


def saturate(I: Ideal, J: Ideal, max_steps: int | None = None) -> tuple[Ideal, int]:
    """``(I : J^inf)`` and the smallest ``m`` with ``(I : J^m) = (I : J^inf)``."""
    _check_pair(I, J)
    current = Ideal.from_gb(I.gb())
    k = 0
    while True:
        deadline.check()
        nxt = quotient(current, J)
        if nxt.gb() == current.gb():
            return current, k
        current = nxt
        k += 1
        if max_steps is not None and k > max_steps:
            raise RuntimeError(f"saturation did not stabilize within {max_steps} steps")


def saturate_element(I: Ideal, f: Poly) -> Ideal:
    """``(I : f^inf)`` in one elimination: ``(I + <1 - t*f>)`` intersected with ``K[X]``."""
    ring = I.ring
    if f.is_constant():
        return I if f.terms else Ideal.unit(ring)
    t = fresh_name(ring.names)
    er = _extended(ring, t)
    gens = [er.convert(g) for g in I.gens] + [1 - er.gen(t) * er.convert(f)]
    out = eliminate(Ideal(er, gens), [t])
    return Ideal.from_gb(GroebnerBasis(tuple(ring.convert(g) for g in out.gb().polys), ring))


def power_bracket(G: Sequence[Poly], m: int) -> list[Poly]:
    """Elementwise ``m``-th powers."""
    if m < 1:
        raise ValueError(f"power_bracket needs m >= 1, got {m}")
    return [g ** m for g in G]


def contains(I: Ideal, J: Ideal) -> bool:
    """True iff ``J`` is contained in ``I``."""
    _check_pair(I, J)
    G = I.gb().polys
    return all(not normal_form(g, G).terms for g in J.gens)


def product(I: Ideal, J: Ideal) -> Ideal:
    _check_pair(I, J)
    return Ideal(I.ring, [f * g for f in I.gens for g in J.gens])


def ideal_power(J: Ideal, m: int) -> Ideal:
    if m < 1:
        raise ValueError("power must be positive")
    acc = J
    for _ in range(m - 1):
        acc = Ideal(J.ring, buchberger(product(acc, J).gens, J.ring).polys)
    return acc


def radical_membership(f: Poly, I: Ideal) -> bool:
    """Rabinowitsch: ``f`` is in the radical iff ``1`` is in ``I + <1 - y*f>``."""
    ring = I.ring
    if f.ring is not ring:
        raise DomainMismatch("polynomial and ideal in different rings")
    if not f.terms:
        return True
    y = fresh_name(ring.names, "y")
    er = _extended(ring, y)
    gens = [er.convert(g) for g in I.gens] + [1 - er.gen(y) * er.convert(f)]
    return Ideal(er, gens).is_unit()


def contains_radical(I: Ideal, J: Ideal) -> bool:
    """True iff every generator of ``J`` lies in the radical of ``I``."""
    return all(radical_membership(g, I) for g in J.gens)


def _leading_coefficient_in(g: Poly, ring: Ring, nv: int) -> Poly:
    """Coefficient (a polynomial in the trailing variables) of the leading
    power product in the first ``nv`` variables."""
    lead = ring.unpack(g.LM)[:nv]
    out = {}
    for m, c in g.terms.items():
        e = ring.unpack(m)
        if e[:nv] == lead:
            out[(0,) * nv + e[nv:]] = c
    return ring.from_dict(out)


def contraction_factors(I: Ideal, U: Sequence[str]) -> list[Poly]:
    """Distinct non-constant ``K[U]``-leading coefficients of the basis of ``I``
    under a block order with the other variables first.

    Raises InvalidMIS if ``I`` meets ``K[U]`` nontrivially.
    """
    ring = I.ring
    U = [v for v in ring.names if v in set(U)]
    V = [v for v in ring.names if v not in U]
    order = MonomialOrder.block_of(("grevlex", len(V)), ("grevlex", len(U)))
    br = Ring(tuple(V) + tuple(U), order, ring.modulus)
    gb = buchberger([br.convert(g) for g in I.gens], br)
    nv = len(V)
    factors = []
    seen = set()
    for g in gb.polys:
        if not any(br.unpack(g.LM)[:nv]):
            raise InvalidMIS(f"{tuple(U)} is not independent modulo the ideal")
        h = _leading_coefficient_in(g, br, nv).monic()
        if h.is_constant():
            continue
        h = ring.convert(h)
        if h not in seen:
            seen.add(h)
            factors.append(h)
    return factors


def hull_unmixed(I: Ideal, U: Sequence[str]) -> Ideal:
    """Contraction of ``I`` extended to ``K(U)[X \\ U]``: removes every component
    whose prime meets ``K[U]``, i.e. all components of lower dimension when
    ``U`` is a common maximal independent set of the top-dimensional primes."""
    current = I
    for h in contraction_factors(I, U):
        current = saturate_element(current, h)
    return Ideal.from_gb(current.gb())


def ideal_sum(*ideals: Ideal) -> Ideal:
    ring = ideals[0].ring
    gens = []
    for J in ideals:
        if J.ring is not ring:
            raise DomainMismatch("ideals live in different rings")
        gens.extend(J.gens)
    return Ideal(ring, gens)


def ideal_of(ring: Ring, polys: Iterable[Poly]) -> Ideal:
    return Ideal(ring, list(polys))
