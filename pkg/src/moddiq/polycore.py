"""Sparse multivariate polynomials over Q and F_p.

Monomials are stored packed into a single Python ``int``.  The packing is
chosen per ring so that

* integer comparison of two packed monomials is the monomial order,
* multiplication of monomials is integer addition,
* divisibility is a single guard-bit test.

Every order we support (lex, grevlex and block products of the two) is given
by non-negative linear forms in the exponents.  Each form gets a fixed-width
field, most significant first; the raw exponents are appended as low fields
unless the order fields already are the raw exponents (pure lex).  Each field
has a top guard bit that is always zero in a valid monomial.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import gmpy2
from gmpy2 import mpq

from .errors import DomainMismatch, ExponentOverflow, NotWeakPermissible

FIELD_BITS = 16
MAX_EXPONENT = (1 << (FIELD_BITS - 1)) - 1
_FIELD_MASK = (1 << FIELD_BITS) - 1

LT, EQ, GT = -1, 0, 1


# -- monomial orders ---------------------------------------------------------

_KINDS = ("lex", "grevlex")


@dataclass(frozen=True)
class MonomialOrder:
    """A monomial order: ``lex``, ``grevlex`` or ``block``.

    A block order is an ordered tuple of ``(kind, size)`` pairs; variables are
    split into consecutive blocks, compared block by block.
    """

    kind: str
    blocks: tuple = ()

    def __post_init__(self):
        if self.kind == "block":
            if not self.blocks:
                raise ValueError("block order needs at least one block")
            for kind, size in self.blocks:
                if kind not in _KINDS or size < 0:
                    raise ValueError(f"bad block {(kind, size)!r}")
        elif self.kind not in _KINDS:
            raise ValueError(f"unknown monomial order {self.kind!r}")

    @classmethod
    def block_of(cls, *blocks) -> "MonomialOrder":
        blocks = tuple((k, int(n)) for k, n in blocks if int(n) > 0)
        if len(blocks) == 1:
            return cls(blocks[0][0])
        return cls("block", blocks)

    def linear_forms(self, n: int) -> list[tuple[int, ...]]:
        """Index sets whose exponent sums, compared lexicographically, give the order."""
        if self.kind == "block":
            if sum(s for _, s in self.blocks) != n:
                raise ValueError(f"block sizes {self.blocks} do not cover {n} variables")
            forms = []
            off = 0
            for kind, size in self.blocks:
                forms.extend(tuple(i + off for i in f) for f in _simple_forms(kind, size))
                off += size
            return forms
        return _simple_forms(self.kind, n)

    def key(self, exps: Sequence[int]) -> tuple[int, ...]:
        return tuple(sum(exps[i] for i in f) for f in self.linear_forms(len(exps)))

    def restrict(self, n: int) -> "MonomialOrder":
        """Order to use on a sub-ring with ``n`` variables (blocks collapse to grevlex)."""
        return self if self.kind != "block" else MonomialOrder("grevlex")

    def __str__(self):
        if self.kind != "block":
            return self.kind
        return "block(" + ", ".join(f"{k}:{s}" for k, s in self.blocks) + ")"


def _simple_forms(kind: str, n: int) -> list[tuple[int, ...]]:
    if kind == "lex":
        return [(i,) for i in range(n)]
    # grevlex: total degree, then degree without the last variable, ...
    return [tuple(range(k)) for k in range(n, 0, -1)]


LEX = MonomialOrder("lex")
GREVLEX = MonomialOrder("grevlex")


def compare(m1: Sequence[int], m2: Sequence[int], order: MonomialOrder) -> int:
    """Compare two exponent vectors; returns LT, EQ or GT."""
    if len(m1) != len(m2):
        raise ValueError(f"arity mismatch: {len(m1)} vs {len(m2)}")
    if any(e < 0 for e in m1) or any(e < 0 for e in m2):
        raise ValueError("negative exponent")
    k1, k2 = order.key(m1), order.key(m2)
    return (k1 > k2) - (k1 < k2)


# -- rings -------------------------------------------------------------------

_ring_cache: dict = {}
_ring_lock = threading.Lock()


class Ring:
    """Variables, coefficient domain and active monomial order.

    ``modulus == 0`` means the rationals, otherwise the prime field F_p.
    Rings are interned: equal parameters give the same object.
    """

    def __new__(cls, names, order: MonomialOrder = GREVLEX, modulus: int = 0):
        names = tuple(names)
        if isinstance(order, str):
            order = MonomialOrder(order)
        key = (names, order, int(modulus))
        with _ring_lock:
            ring = _ring_cache.get(key)
            if ring is None:
                ring = super().__new__(cls)
                ring._init(names, order, int(modulus))
                _ring_cache[key] = ring
        return ring

    def __reduce__(self):
        return (Ring, (self.names, self.order, self.modulus))

    def _init(self, names, order, modulus):
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable names in {names}")
        if modulus < 0 or modulus == 1:
            raise ValueError(f"bad modulus {modulus}")
        self.names = names
        self.nvars = n = len(names)
        self.order = order
        self.modulus = modulus
        self.index = {v: i for i, v in enumerate(names)}
        forms = order.linear_forms(n)
        raw = [(i,) for i in range(n)]
        if forms == raw:
            self._raw_offset = 0
            fields = forms
        else:
            self._raw_offset = len(forms)
            fields = forms + raw
        self._fields = fields
        nf = len(fields)
        self._nfields = nf
        self.guard = sum(1 << (FIELD_BITS * k + FIELD_BITS - 1) for k in range(nf))
        # shift of raw exponent i inside the packed int
        self._raw_shift = [FIELD_BITS * (nf - 1 - (self._raw_offset + i)) for i in range(n)]
        # contribution of a unit exponent in variable i
        self._var_unit = []
        for i in range(n):
            u = 0
            for k, f in enumerate(fields):
                if i in f:
                    u |= 1 << (FIELD_BITS * (nf - 1 - k))
            self._var_unit.append(u)
        self._unpack_cache: dict[int, tuple[int, ...]] = {}

    # domain
    @property
    def is_qq(self) -> bool:
        return self.modulus == 0

    @property
    def domain(self) -> str:
        return "QQ" if self.modulus == 0 else f"GF({self.modulus})"

    def with_modulus(self, p: int) -> "Ring":
        return Ring(self.names, self.order, p)

    def with_order(self, order: MonomialOrder) -> "Ring":
        return Ring(self.names, order, self.modulus)

    def coerce(self, c):
        if self.modulus:
            if isinstance(c, (Fraction,)) or type(c).__name__ == "mpq":
                num, den = int(c.numerator), int(c.denominator)
                if den % self.modulus == 0:
                    raise NotWeakPermissible(self.modulus, c)
                return num * pow(den, -1, self.modulus) % self.modulus
            return int(c) % self.modulus
        return mpq(c)

    # monomials
    def pack(self, exps: Sequence[int]) -> int:
        if len(exps) != self.nvars:
            raise ValueError(f"arity mismatch: {len(exps)} exponents for {self.nvars} variables")
        m = 0
        for f in self._fields:
            v = 0
            for i in f:
                v += exps[i]
            if v > MAX_EXPONENT or v < 0:
                raise ExponentOverflow(f"exponent field {v} outside [0, {MAX_EXPONENT}]")
            m = (m << FIELD_BITS) | v
        return m

    def unpack(self, m: int) -> tuple[int, ...]:
        e = self._unpack_cache.get(m)
        if e is None:
            e = tuple((m >> s) & _FIELD_MASK for s in self._raw_shift)
            if len(self._unpack_cache) > 1 << 20:
                self._unpack_cache.clear()
            self._unpack_cache[m] = e
        return e

    def divides(self, a: int, b: int) -> bool:
        g = self.guard
        return ((b | g) - a) & g == g

    def mono_lcm(self, a: int, b: int) -> int:
        return self.pack([max(x, y) for x, y in zip(self.unpack(a), self.unpack(b))])

    def mono_degree(self, m: int) -> int:
        return sum(self.unpack(m))

    def check_overflow(self, m: int) -> None:
        if m & self.guard:
            raise ExponentOverflow("exponent overflow in monomial product")

    # elements
    def zero(self) -> "Poly":
        return Poly(self, {})

    def one(self) -> "Poly":
        return Poly(self, {0: self.coerce(1)})

    def const(self, c) -> "Poly":
        c = self.coerce(c)
        return Poly(self, {0: c} if c else {})

    def gen(self, name) -> "Poly":
        i = self.index[name] if isinstance(name, str) else int(name)
        return Poly(self, {self._var_unit[i]: self.coerce(1)})

    def gens(self) -> list["Poly"]:
        return [self.gen(i) for i in range(self.nvars)]

    def from_dict(self, d: Mapping[Sequence[int], object]) -> "Poly":
        """Build from ``{exponent tuple: coefficient}``."""
        terms: dict[int, object] = {}
        for e, c in d.items():
            c = self.coerce(c)
            if not c:
                continue
            m = self.pack(tuple(e))
            s = terms.get(m, 0) + c
            if self.modulus:
                s %= self.modulus
            if s:
                terms[m] = s
            else:
                terms.pop(m, None)
        return Poly(self, terms)

    def convert(self, f: "Poly") -> "Poly":
        """Re-express ``f`` (same domain) in this ring, matching variables by name."""
        src = f.ring
        if src is self:
            return f
        if src.modulus != self.modulus:
            raise DomainMismatch(f"cannot convert {src.domain} polynomial into {self.domain}")
        idx = []
        for i, v in enumerate(src.names):
            idx.append(self.index.get(v, -1))
        n = self.nvars
        terms = {}
        for m, c in f.terms.items():
            e = src.unpack(m)
            out = [0] * n
            for i, x in enumerate(e):
                if x:
                    j = idx[i]
                    if j < 0:
                        raise DomainMismatch(f"variable {src.names[i]} not in target ring {self.names}")
                    out[j] = x
            terms[self.pack(out)] = c
        return Poly(self, terms)

    def __repr__(self):
        return f"Ring({','.join(self.names)}; {self.order}; {self.domain})"


# -- polynomials ---------------------------------------------------------------


class Poly:
    """Immutable sparse polynomial.  ``terms`` maps packed monomial -> coefficient.

    Coefficients are canonical: ``mpq`` over Q, ``int`` in ``[0, p)`` over F_p,
    never zero.
    """

    __slots__ = ("ring", "terms", "_hash")

    def __init__(self, ring: Ring, terms: dict):
        self.ring = ring
        self.terms = terms
        self._hash = None

    # structure
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    @property
    def LM(self) -> int:
        return max(self.terms)

    @property
    def LC(self):
        return self.terms[max(self.terms)]

    def lm_exponents(self) -> tuple[int, ...]:
        return self.ring.unpack(self.LM)

    def sorted_terms(self) -> list[tuple[tuple[int, ...], object]]:
        """``(exponents, coefficient)`` pairs, strictly descending in the ring order."""
        u = self.ring.unpack
        return [(u(m), self.terms[m]) for m in sorted(self.terms, reverse=True)]

    def total_degree(self) -> int:
        if not self.terms:
            return -1  # sentinel for the zero polynomial
        return max(self.ring.mono_degree(m) for m in self.terms)

    def degree_in(self, var) -> int:
        i = self.ring.index[var] if isinstance(var, str) else var
        if not self.terms:
            return -1
        return max(self.ring.unpack(m)[i] for m in self.terms)

    def variables(self) -> set[int]:
        used = set()
        for m in self.terms:
            for i, e in enumerate(self.ring.unpack(m)):
                if e:
                    used.add(i)
        return used

    def is_constant(self) -> bool:
        return all(m == 0 for m in self.terms)

    def coefficients(self):
        return self.terms.values()

    # arithmetic
    def _check(self, other: "Poly"):
        if other.ring is not self.ring:
            raise DomainMismatch(f"ring mismatch: {self.ring} vs {other.ring}")

    def _lift(self, other):
        if isinstance(other, Poly):
            self._check(other)
            return other
        return self.ring.const(other)

    def __add__(self, other):
        other = self._lift(other)
        p = self.ring.modulus
        t = dict(self.terms)
        for m, c in other.terms.items():
            s = t.get(m, 0) + c
            if p:
                s %= p
            if s:
                t[m] = s
            else:
                t.pop(m, None)
        return Poly(self.ring, t)

    __radd__ = __add__

    def __neg__(self):
        p = self.ring.modulus
        if p:
            return Poly(self.ring, {m: p - c for m, c in self.terms.items()})
        return Poly(self.ring, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, c) -> "Poly":
        c = self.ring.coerce(c)
        if not c:
            return self.ring.zero()
        p = self.ring.modulus
        if p:
            return Poly(self.ring, {m: v * c % p for m, v in self.terms.items()})
        return Poly(self.ring, {m: v * c for m, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        self._check(other)
        p = self.ring.modulus
        t: dict[int, object] = {}
        get = t.get
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = m1 + m2
                t[m] = get(m, 0) + c1 * c2
        g = self.ring.guard
        out = {}
        for m, c in t.items():
            if m & g:
                raise ExponentOverflow("exponent overflow in polynomial product")
            if p:
                c %= p
            if c:
                out[m] = c
        return Poly(self.ring, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        result = self.ring.one()
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def mul_monomial(self, m: int, c=1) -> "Poly":
        c = self.ring.coerce(c)
        p = self.ring.modulus
        g = self.ring.guard
        out = {}
        for k, v in self.terms.items():
            km = k + m
            if km & g:
                raise ExponentOverflow("exponent overflow")
            out[km] = v * c % p if p else v * c
        return Poly(self.ring, out)

    def monic(self) -> "Poly":
        if not self.terms:
            return self
        lc = self.LC
        if lc == 1:
            return self
        p = self.ring.modulus
        if p:
            inv = pow(int(lc), -1, p)
            return Poly(self.ring, {m: c * inv % p for m, c in self.terms.items()})
        inv = 1 / lc
        return Poly(self.ring, {m: c * inv for m, c in self.terms.items()})

    # comparison
    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.ring is other.ring and self.terms == other.terms
        if not self.terms:
            return other == 0
        try:
            return self == self.ring.const(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ring.names, self.ring.modulus, frozenset(self.terms.items())))
        return self._hash

    def __str__(self):
        return format_poly(self)

    def __repr__(self):
        return f"Poly({format_poly(self)!s}, {self.ring!r})"


def format_coefficient(c) -> str:
    if type(c) is int:
        return str(c)
    num, den = int(c.numerator), int(c.denominator)
    return str(num) if den == 1 else f"{num}/{den}"


def format_poly(f: Poly) -> str:
    """Canonical text form, terms descending: ``x^2*y + 3/2*x - 1``."""
    if not f.terms:
        return "0"
    names = f.ring.names
    parts = []
    for exps, c in f.sorted_terms():
        powers = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, exps) if e]
        neg = c < 0 if f.ring.modulus == 0 else False
        a = -c if neg else c
        cs = format_coefficient(a)
        if not powers:
            body = cs
        elif cs == "1":
            body = "*".join(powers)
        else:
            body = cs + "*" + "*".join(powers)
        if not parts:
            parts.append("-" + body if neg else body)
        else:
            parts.append(("- " if neg else "+ ") + body)
    return " ".join(parts)


# -- maps between Q and F_p --------------------------------------------------------


def reduce_mod_p(f: Poly, p: int, ring: Ring | None = None) -> Poly:
    """Coefficient-wise image of a rational polynomial in F_p.

    Raises NotWeakPermissible when ``p`` divides a denominator.
    """
    if f.ring.modulus:
        raise DomainMismatch("reduce_mod_p expects a polynomial over QQ")
    target = ring or f.ring.with_modulus(p)
    out = {}
    for m, c in f.terms.items():
        num, den = int(c.numerator), int(c.denominator)
        if den % p == 0:
            raise NotWeakPermissible(p, f)
        v = num % p
        if v:
            if den != 1:
                v = v * pow(den, -1, p) % p
            out[m] = v
    return Poly(target, out)


def is_weak_permissible(p: int, polys: Iterable[Poly]) -> bool:
    for f in polys:
        for c in f.terms.values():
            if int(c.denominator) % p == 0:
                return False
    return True


def is_permissible(p: int, polys: Iterable[Poly]) -> bool:
    """Weakly permissible and no leading coefficient vanishes mod p."""
    polys = list(polys)
    if not is_weak_permissible(p, polys):
        return False
    return all(int(f.LC.numerator) % p for f in polys if f.terms)


def coeff_norm(G: Iterable[Poly]) -> int:
    """max(a^2 + b^2) over all coefficients a/b of all elements; 0 for no terms."""
    best = 0
    for f in G:
        for c in f.terms.values():
            a, b = int(c.numerator), int(c.denominator)
            best = max(best, a * a + b * b)
    return best


def lift_symmetric(c: int, p: int) -> int:
    return c - p if c > p // 2 else c


def is_probable_prime(n: int) -> bool:
    return bool(gmpy2.is_prime(n, 30))


def isqrt(n: int) -> int:
    return math.isqrt(n)
