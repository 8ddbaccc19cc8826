"""Reader and writer for the plain-text ideal file format.

    # comment
    ring: x, y
    order: grevlex            # or lex, or block(grevlex:1, lex:1)
    ideal I:
      x^2*y + 3/2*x - 1
      y^3 - 2x

Each indented (or simply following) line of an ideal block is one
generator.  Coefficients may precede a power product with or without ``*``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from gmpy2 import mpq

from .errors import ParseError
from .polycore import MonomialOrder, Poly, Ring, format_poly

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT = re.compile(r"[0-9]+")


@dataclass
class IdealFile:
    ring: Ring
    ideals: dict = field(default_factory=dict)  # name -> list of Poly

    def ideal(self, name: str):
        from .groebner import Ideal

        if name not in self.ideals:
            raise KeyError(f"no ideal named {name!r}; have {sorted(self.ideals)}")
        return Ideal(self.ring, self.ideals[name])


class _Cursor:
    def __init__(self, text: str, line: int, col0: int = 1):
        self.text = text
        self.pos = 0
        self.line = line
        self.col0 = col0

    def error(self, msg: str, at: int | None = None) -> ParseError:
        return ParseError(msg, self.line, self.col0 + (self.pos if at is None else at))

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def match(self, rx: re.Pattern):
        self.skip_ws()
        m = rx.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return m.group(0)
        return None

    def at_end(self) -> bool:
        return self.peek() == ""


def _parse_coef(cur: _Cursor):
    start = cur.pos
    num = cur.match(_INT)
    if num is None:
        return None
    if cur.peek() == "/":
        cur.pos += 1
        den = cur.match(_INT)
        if den is None:
            raise cur.error("expected a denominator after '/'")
        if int(den) == 0:
            raise cur.error("zero denominator", start)
        return mpq(int(num), int(den))
    return mpq(int(num))


def _parse_power(cur: _Cursor, ring: Ring, exps: list) -> None:
    start = cur.pos
    cur.skip_ws()
    start = cur.pos
    name = cur.match(_IDENT)
    if name is None:
        raise cur.error("expected a variable")
    if name not in ring.index:
        raise cur.error(f"unknown variable {name!r}", start)
    e = 1
    if cur.eat("^"):
        if cur.peek() == "-":
            raise cur.error("negative exponent")
        k = cur.match(_INT)
        if k is None:
            raise cur.error("expected a non-negative integer exponent")
        e = int(k)
    exps[ring.index[name]] += e


def _parse_term(cur: _Cursor, ring: Ring):
    exps = [0] * ring.nvars
    coef = _parse_coef(cur)
    if coef is None:
        coef = mpq(1)
        _parse_power(cur, ring, exps)
    else:
        if cur.peek() == "*":
            cur.pos += 1
            _parse_power(cur, ring, exps)
        elif _IDENT.match(cur.text, cur.pos):
            _parse_power(cur, ring, exps)
        else:
            return coef, tuple(exps)
    while cur.peek() == "*":
        cur.pos += 1
        _parse_power(cur, ring, exps)
    return coef, tuple(exps)


def parse_poly(text: str, ring: Ring, line: int = 1, col0: int = 1) -> Poly:
    """Parse one polynomial in ``ring``."""
    cur = _Cursor(text, line, col0)
    if cur.at_end():
        raise cur.error("empty polynomial")
    terms: dict = {}
    sign = 1
    if cur.eat("-"):
        sign = -1
    else:
        cur.eat("+")
    while True:
        if cur.at_end():
            raise cur.error("expected a term")
        c, e = _parse_term(cur, ring)
        terms[e] = terms.get(e, 0) + sign * c
        if cur.at_end():
            break
        if cur.eat("+"):
            sign = 1
        elif cur.eat("-"):
            sign = -1
        else:
            raise cur.error(f"unexpected {cur.peek()!r}")
    try:
        return ring.from_dict(terms)
    except Exception as e:  # overflow of packed exponents
        raise ParseError(str(e), line) from e


def parse_order(text: str, line: int = 1) -> MonomialOrder:
    t = text.strip()
    if t in ("lex", "grevlex"):
        return MonomialOrder(t)
    m = re.fullmatch(r"block\((.*)\)", t)
    if not m:
        raise ParseError(f"unknown order {t!r} (expected lex, grevlex or block(...))", line)
    blocks = []
    for part in m.group(1).split(","):
        bm = re.fullmatch(r"\s*(lex|grevlex)\s*:\s*([0-9]+)\s*", part)
        if not bm:
            raise ParseError(f"bad block {part.strip()!r} (expected kind:size)", line)
        blocks.append((bm.group(1), int(bm.group(2))))
    return MonomialOrder("block", tuple(blocks))


def parse_ideal_file(text: str) -> IdealFile:
    """Parse a whole ideal file; errors carry line and column."""
    lines = text.splitlines()
    names = None
    order = None
    ring = None
    ideals: dict = {}
    current = None
    for no, raw in enumerate(lines, 1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        stripped = body.strip()
        col = len(body) - len(body.lstrip()) + 1
        if names is None:
            m = re.fullmatch(r"ring:\s*(.*)", stripped)
            if not m:
                raise ParseError("file must start with 'ring:'", no, col)
            names = [v.strip() for v in m.group(1).split(",")]
            for v in names:
                if not _IDENT.fullmatch(v):
                    raise ParseError(f"bad variable name {v!r}", no, col)
            if len(set(names)) != len(names):
                raise ParseError("duplicate variable name", no, col)
            continue
        if order is None:
            m = re.fullmatch(r"order:\s*(.*)", stripped)
            if not m:
                raise ParseError("expected 'order:' after the ring line", no, col)
            order = parse_order(m.group(1), no)
            try:
                ring = Ring(tuple(names), order, 0)
            except ValueError as e:
                raise ParseError(str(e), no, col) from e
            continue
        m = re.fullmatch(r"ideal\s+([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.*)", stripped)
        if m:
            current = m.group(1)
            if current in ideals:
                raise ParseError(f"ideal {current!r} defined twice", no, col)
            ideals[current] = []
            if m.group(2):
                raise ParseError("generators go on the following lines", no, col)
            continue
        if current is None:
            raise ParseError("polynomial outside an ideal block", no, col)
        ideals[current].append(parse_poly(body.strip(), ring, no, col))
    if names is None:
        raise ParseError("missing 'ring:' line", 1)
    if order is None:
        raise ParseError("missing 'order:' line", len(lines) or 1)
    if not ideals:
        raise ParseError("no ideal declared", len(lines) or 1)
    for name, gens in ideals.items():
        if not gens:
            raise ParseError(f"ideal {name!r} has no generators")
    return IdealFile(ring, ideals)


def format_ideal_file(f: IdealFile) -> str:
    out = [f"ring: {', '.join(f.ring.names)}", f"order: {f.ring.order}"]
    for name, gens in f.ideals.items():
        out.append(f"ideal {name}:")
        out.extend("  " + format_poly(g) for g in gens)
    return "\n".join(out) + "\n"
