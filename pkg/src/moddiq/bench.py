"""Direct-vs-modular timing harness.

Each case runs the direct operation and its modular counterpart under the
same wall-clock budget, on fresh ideal objects so no Groebner basis is
shared between the two paths.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

from . import deadline
from .diq import diq, mod_diq
from .errors import DeadlineExceeded, ModdiqError
from .groebner import Ideal
from .idealops import product, quotient, saturate
from .modular import ModularRunConfig, mod_quotient, mod_saturate
from .parser import parse_poly
from .polycore import GREVLEX, Ring

XYZ = Ring(("x", "y", "z"), GREVLEX, 0)

# generators of the coefficient-growth family, in x, y, z
I1_GENS = [
    "8*x^2*y^2 + 5*x*y^3 + 3*x^3*z + x^2*y*z",
    "x^5 + 2*y^3*z^2 + 13*y^2*z^3 + 5*y*z^4",
    "8*x^3 + 12*y^3 + x*z^2 + 3",
    "7*x^2*y^4 + 18*x*y^3*z^2 + y^3*z^3",
]
I2_GENS = [
    "2*x*y^4*z^2 + x^3*y^2*z - x^2*y^3*z + 2*x*y*z^2 + 7*y^3 + 7",
    "2*x^2*y^4*z + x^2*y*z^2 - x*y^2*z^2 + 2*x^2*y*z - 12*x + 12*y",
    "2*y^5*z + x^2*y^2*z - x*y^3*z - x*y^3 + y^4 + 2*y^2*z",
    "3*x*y^4*z^3 + x^2*y^2*z - x*y^3*z + 4*y^3*z^2 + 3*x*y*z^3 + 4*z^2 - x + y",
]
I3_GENS = [
    "5*x^3*y^2*z + 3*y^3*x^2*z + 7*x*y^2*z^2",
    "3*x*y^2*z^2 + x^5 + 11*y^2*z^2",
    "4*x*y*z + 7*x^3 + 12*y^3 + 1",
    "3*x^3 - 4*y^3 + y*z^2",
]
P1_GENS = [
    "-15*x5 + 16*x6^3 - 60*x6^2 + 225*x6 - 4",
    "2*x5^2 - 7*x5 + 2*x6^2 - 7*x6 + 28",
    "4*x6*x5 - x5 - x6 + 4",
    "4*x1 + x5 + x6",
    "4*x2 + x5 + x6",
    "4*x3 + x5 + x6",
    "4*x4 + x5 + x6",
]


def family(name: str, ring: Ring = XYZ) -> Ideal:
    gens = {"I1": I1_GENS, "I2": I2_GENS, "I3": I3_GENS}[name]
    return Ideal(ring, [parse_poly(g, ring) for g in gens])


def cyclic_ring(n: int) -> Ring:
    return Ring(tuple(f"x{i}" for i in range(1, n + 1)), GREVLEX, 0)


def cyclic(n: int) -> Ideal:
    """The cyclic n-roots ideal."""
    ring = cyclic_ring(n)
    xs = ring.gens()
    gens = []
    for k in range(1, n):
        f = ring.zero()
        for i in range(n):
            t = ring.one()
            for j in range(k):
                t = t * xs[(i + j) % n]
            f = f + t
        gens.append(f)
    prod = ring.one()
    for v in xs:
        prod = prod * v
    gens.append(prod - 1)
    return Ideal(ring, gens)


def cyclic6_prime() -> Ideal:
    ring = cyclic_ring(6)
    return Ideal(ring, [parse_poly(g, ring) for g in P1_GENS])


def _monomials(ring: Ring, *texts: str) -> Ideal:
    return Ideal(ring, [parse_poly(t, ring) for t in texts])


# -- cases ----------------------------------------------------------------------


@dataclass
class BenchCase:
    name: str
    op: str  # quotient | sat | diq
    build: Callable[[], tuple]  # -> (I, J), fresh objects each call
    timeout: float = 120.0
    optional: bool = False


@dataclass
class BenchRow:
    case: str
    op: str
    direct_time: float | None
    modular_time: float | None
    equal_results: str
    direct_status: str = "ok"
    modular_status: str = "ok"
    certified: bool | None = None
    notes: dict = field(default_factory=dict)


def builtin_cases() -> list[BenchCase]:
    def i3_quot():
        I3 = family("I3")
        return product(I3, _monomials(XYZ, "x^2", "x*y")), _monomials(XYZ, "x", "y")

    def i1sq_quot():
        I1 = family("I1")
        return product(I1, I1), family("I1")

    def i3_sat():
        I3 = family("I3")
        return product(I3, _monomials(XYZ, "x^3", "x*y")), _monomials(XYZ, "x", "y")

    def i3_diq():
        I3 = family("I3")
        return product(I3, _monomials(XYZ, "x^2", "x*y")), _monomials(XYZ, "x", "y")

    def cyc6():
        return cyclic(6), cyclic6_prime()

    return [
        BenchCase("(I3*<x^2,xy>):<x,y>", "quotient", i3_quot, 120.0),
        BenchCase("(I1^2):I1", "quotient", i1sq_quot, 300.0),
        BenchCase("(I3*<x^3,xy>):<x,y>^inf", "sat", i3_sat, 120.0),
        BenchCase("(I3*<x^2,xy>):((I3*<x^2,xy>):<x,y>)", "diq", i3_diq, 120.0),
        BenchCase("cyclic(6):P1", "quotient", cyc6, 300.0, optional=True),
    ]


_DIRECT = {
    "quotient": lambda I, J: quotient(I, J).gb(),
    "sat": lambda I, J: saturate(I, J)[0].gb(),
    "diq": lambda I, J: diq(I, J).gb(),
}

_MODULAR = {
    "quotient": lambda I, J, cfg: mod_quotient(I, J, cfg),
    "sat": lambda I, J, cfg: mod_saturate(I, J, cfg),
    "diq": lambda I, J, cfg: mod_diq(I, J, cfg),
}


def _timed(fn, timeout: float):
    t0 = time.perf_counter()
    try:
        with deadline.budget(timeout):
            out = fn()
        return out, time.perf_counter() - t0, "ok"
    except DeadlineExceeded:
        return None, None, "timeout"
    except ModdiqError as e:
        return None, None, f"error: {type(e).__name__}"


def run_case(case: BenchCase, cfg: ModularRunConfig | None = None, timeout: float | None = None,
             skip_direct: bool = False) -> BenchRow:
    cfg = cfg or ModularRunConfig()
    limit = timeout if timeout is not None else case.timeout
    I, J = case.build()
    mres, mt, mstat = _timed(lambda: _MODULAR[case.op](I, J, cfg), limit)
    if skip_direct:
        dres, dt, dstat = None, None, "skipped"
    else:
        I, J = case.build()
        dres, dt, dstat = _timed(lambda: _DIRECT[case.op](I, J), limit)
    if dres is not None and mres is not None:
        equal = "yes" if dres == mres.basis else "no"
    else:
        equal = "n-a"
    return BenchRow(case.name, case.op, dt, mt, equal, dstat, mstat,
                    mres.certified if mres is not None else None)


def run_bench(cases: list[BenchCase], cfg: ModularRunConfig | None = None,
              timeout: float | None = None, include_optional: bool = False) -> list[BenchRow]:
    return [run_case(c, cfg, timeout) for c in cases if include_optional or not c.optional]


def _fmt_time(t, status):
    if t is None:
        return "TIMEOUT" if status == "timeout" else status.upper()
    return f"{t:.2f}"


def render_table(rows: list[BenchRow]) -> str:
    head = ("case", "op", "direct_time", "modular_time", "equal_results")
    body = [(r.case, r.op, _fmt_time(r.direct_time, r.direct_status),
             _fmt_time(r.modular_time, r.modular_status), r.equal_results) for r in rows]
    widths = [max(len(str(x)) for x in col) for col in zip(head, *body)] if body else [len(h) for h in head]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(head, widths))]
    lines += ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)) for row in body]
    return "\n".join(lines) + "\n"


def render_tsv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(["case", "op", "direct_time", "modular_time", "equal_results", "certified"])
    for r in rows:
        w.writerow([r.case, r.op, _fmt_time(r.direct_time, r.direct_status),
                    _fmt_time(r.modular_time, r.modular_status), r.equal_results, r.certified])
    return buf.getvalue()


def render_json(rows: list[BenchRow]) -> str:
    return json.dumps([asdict(r) for r in rows], sort_keys=True, indent=2) + "\n"


def render_figure(rows: list[BenchRow], path: str, timeout: float | None = None) -> None:
    """Grouped bar chart of direct vs modular wall time; timeouts drawn hatched at the budget."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(max(4, 1.6 * len(rows) + 2), 3.6))
    xs = range(len(rows))
    cap = timeout or max([r.direct_time or 0 for r in rows] + [r.modular_time or 0 for r in rows] + [1])
    for k, (attr, stat, label, off) in enumerate((("direct_time", "direct_status", "direct", -0.2),
                                                   ("modular_time", "modular_status", "modular", 0.2))):
        vals, hatch = [], []
        for r in rows:
            t = getattr(r, attr)
            vals.append(t if t is not None else cap)
            hatch.append(t is None)
        bars = ax.bar([x + off for x in xs], vals, width=0.4, label=label)
        for b, h in zip(bars, hatch):
            if h:
                b.set_hatch("//")
                b.set_alpha(0.5)
    ax.set_xticks(list(xs))
    ax.set_xticklabels([r.case for r in rows], rotation=20, ha="right", fontsize=7)
    ax.set_ylabel("wall time (s)")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(rows: list[BenchRow], out_dir: str, timeout: float | None = None) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = {"tsv": os.path.join(out_dir, "bench.tsv"), "json": os.path.join(out_dir, "bench.json"),
             "png": os.path.join(out_dir, "bench.png")}
    with open(paths["tsv"], "w") as f:
        f.write(render_tsv(rows))
    with open(paths["json"], "w") as f:
        f.write(render_json(rows))
    if rows:
        render_figure(rows, paths["png"], timeout)
    else:
        paths.pop("png")
    return paths


def parse_suite(text: str, ideal_file) -> list[BenchCase]:
    """Suite lines: ``name op I J [timeout] [optional]``; ``#`` starts a comment."""
    cases = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 4:
            raise ValueError(f"suite line {no}: expected 'name op I J [timeout] [optional]'")
        name, op, a, b = parts[:4]
        if op not in _DIRECT:
            raise ValueError(f"suite line {no}: unknown op {op!r}")
        for ref in (a, b):
            if ref not in ideal_file.ideals:
                raise ValueError(f"suite line {no}: unknown ideal {ref!r}")
        timeout = float(parts[4]) if len(parts) > 4 else 120.0
        optional = len(parts) > 5 and parts[5] == "optional"
        cases.append(BenchCase(name, op, lambda a=a, b=b: (ideal_file.ideal(a), ideal_file.ideal(b)),
                               timeout, optional))
    return cases
