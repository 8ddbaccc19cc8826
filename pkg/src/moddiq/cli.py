"""Command line front end.

Exit codes: 0 success, 2 parse or usage error, 3 modular failure or an
inconclusive verdict, 4 timeout.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import deadline
from .errors import (
    DeadlineExceeded,
    ModdiqError,
    ModularFailure,
    PrimeExhaustion,
    RadicalUnavailable,
)
from .groebner import Ideal
from .parser import parse_ideal_file, parse_order

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILED = 3
EXIT_TIMEOUT = 4

BINARY = ("quotient", "modquotient", "sat", "modsat", "diq", "moddiq", "asstest", "nonasstest")
UNARY = ("gb", "idecomp")
HELP = {
    "gb": "reduced Groebner basis",
    "idecomp": "intermediate primary decomposition grouped by independent set",
    "quotient": "ideal quotient I:J, computed directly",
    "modquotient": "ideal quotient I:J, lifted from prime images and certified",
    "sat": "saturation I:J^inf and its exponent, computed directly",
    "modsat": "saturation I:J^inf, lifted and certified",
    "diq": "double ideal quotient I:(I:J), computed directly",
    "moddiq": "double ideal quotient, lifted and certified",
    "asstest": "modular test that the prime J is associated to I",
    "nonasstest": "modular test that the prime J is not associated to I",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", metavar="FILE", help="ideal file")
    common.add_argument("--ideal", metavar="NAME", help="name of the main ideal in the file")
    common.add_argument("--by", metavar="NAME", help="second ideal (divisor, candidate prime)")
    common.add_argument("--order", metavar="ORD", help="override the file's monomial order")
    common.add_argument("--primes", type=int, default=4, metavar="N", help="primes in the first round")
    common.add_argument("--prime-bits", type=int, default=31, metavar="B")
    common.add_argument("--seed", type=int, default=None, metavar="S",
                        help="prime-stream seed (default: $MODDIQ_SEED or 0)")
    common.add_argument("--verify", choices=("ptest", "full"), default="full")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--timeout", type=float, default=None, metavar="SECS")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes for per-prime work")
    common.add_argument("--log", metavar="FILE", help="append the per-prime run log as JSON lines")

    ap = _Parser(prog="moddiq", description="Modular ideal quotients, saturations and double quotients.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in UNARY + BINARY:
        sp = sub.add_parser(name, parents=[common], help=HELP[name])
        if name == "gb":
            sp.add_argument("--modular", action="store_true", help="lift the basis from prime images")
        if name in ("diq", "moddiq"):
            sp.add_argument("--variant", choices=("plain", "inner_sat", "outer_sat", "both_sat"),
                            default="plain")
    bp = sub.add_parser("bench", parents=[common], help="time direct against modular paths")
    bp.add_argument("--suite", metavar="FILE", help="suite file (default: the built-in cases)")
    bp.add_argument("--out", metavar="DIR", default="bench_out", help="directory for TSV, JSON and PNG")
    bp.add_argument("--include-slow", action="store_true", help="also run cases marked optional")
    return ap


def _config(args, log):
    from .modular import ModularRunConfig

    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("MODDIQ_SEED", "0"))
    return ModularRunConfig(primes=args.primes, prime_bits=args.prime_bits, seed=seed,
                            verify="ptest_only" if args.verify == "ptest" else "full",
                            jobs=args.jobs, log=log)


def _load(args, need_by: bool):
    if not args.input:
        raise _UsageError("--input is required")
    if not args.ideal:
        raise _UsageError("--ideal is required")
    if need_by and not args.by:
        raise _UsageError(f"{args.command} needs --by")
    with open(args.input, encoding="utf-8") as f:
        data = parse_ideal_file(f.read())
    ring = data.ring
    if args.order:
        ring = ring.with_order(parse_order(args.order))
    out = []
    for name in (args.ideal, args.by) if need_by else (args.ideal,):
        if name not in data.ideals:
            raise _UsageError(f"no ideal named {name!r} in {args.input}")
        out.append(Ideal(ring, [ring.convert(g) for g in data.ideals[name]]))
    return out


def _basis_lines(gb) -> list[str]:
    return [str(g) for g in gb.polys]


def _run(args, cfg) -> tuple[dict, int]:
    from . import diq as D
    from .decomp import intermediate_decomposition
    from .idealops import quotient, saturate
    from .modular import mod_quotient, mod_saturate, modular_gb

    cmd = args.command
    ideals = _load(args, cmd in BINARY)
    I = ideals[0]
    J = ideals[1] if len(ideals) > 1 else None
    out = {"certified": True, "primes_used": [], "rounds": 0}
    code = EXIT_OK
    if cmd == "gb":
        if args.modular:
            res = modular_gb(I, cfg)
            out.update(result_basis=_basis_lines(res.basis), certified=res.certified,
                       primes_used=res.primes_used, rounds=res.rounds)
        else:
            out["result_basis"] = _basis_lines(I.gb())
    elif cmd == "quotient":
        out["result_basis"] = _basis_lines(quotient(I, J).gb())
    elif cmd == "sat":
        S, m = saturate(I, J)
        out.update(result_basis=_basis_lines(S.gb()), exponent=m)
    elif cmd == "diq":
        out["result_basis"] = _basis_lines(D.diq_sat_variant(I, J, args.variant).gb())
    elif cmd in ("modquotient", "modsat", "moddiq"):
        if cmd == "modquotient":
            res = mod_quotient(I, J, cfg)
        elif cmd == "modsat":
            res = mod_saturate(I, J, cfg)
        else:
            res = D.mod_diq(I, J, cfg, args.variant)
        out.update(result_basis=_basis_lines(res.basis), certified=res.certified,
                   primes_used=res.primes_used, rounds=res.rounds)
        if cmd == "modsat":
            out["exponent"] = res.exponent
    elif cmd in ("asstest", "nonasstest"):
        fn = D.associated_test_modular if cmd == "asstest" else D.non_associated_test
        v = fn(I, J, cfg)
        out.update(result_basis=_basis_lines(v.witness) if v.witness is not None else [],
                   certified=v.verdict != D.INCONCLUSIVE, primes_used=v.primes, rounds=v.rounds,
                   verdict=v.verdict, reason=v.reason)
        if v.verdict == D.INCONCLUSIVE:
            code = EXIT_FAILED
    elif cmd == "idecomp":
        d = intermediate_decomposition(I, cfg)
        comps = d.all_components()
        out.update(result_basis=[_basis_lines(c.component.gb()) for c in comps],
                   certified=d.certified_cover, primes_used=d.primes_used,
                   rounds=d.diagnostics.get("rounds", 0), report=d.report())
        if not d.certified_cover:
            out["reason"] = d.diagnostics.get("reason", "cover not verified")
            code = EXIT_FAILED
    return out, code


def _human(cmd: str, out: dict) -> str:
    lines = []
    if "verdict" in out:
        lines.append(f"verdict: {out['verdict']} ({out['reason']})")
    if cmd == "idecomp":
        lines.append(f"cover verified: {'yes' if out['certified'] else 'no'}")
        for k, comp in enumerate(out["result_basis"], 1):
            lines.append(f"component {k}:")
            lines.extend("  " + g for g in comp)
    else:
        lines.append(f"certified: {'yes' if out['certified'] else 'no'}")
        if "exponent" in out and out["exponent"] is not None:
            lines.append(f"exponent: {out['exponent']}")
        lines.extend(out["result_basis"])
    if out["primes_used"]:
        lines.append(f"primes used: {len(out['primes_used'])}, rounds: {out['rounds']}")
    return "\n".join(lines) + "\n"


def _bench(args, cfg, stdout) -> int:
    from . import bench

    if args.suite:
        if not args.input:
            raise _UsageError("--suite needs --input for the ideals it names")
        with open(args.input, encoding="utf-8") as f:
            data = parse_ideal_file(f.read())
        with open(args.suite, encoding="utf-8") as f:
            try:
                cases = bench.parse_suite(f.read(), data)
            except ValueError as e:
                raise _UsageError(str(e)) from e
    else:
        cases = bench.builtin_cases()
    rows = bench.run_bench(cases, cfg, args.timeout, include_optional=args.include_slow)
    paths = bench.write_report(rows, args.out, args.timeout)
    if args.json:
        stdout.write(bench.render_json(rows))
    else:
        stdout.write(bench.render_table(rows))
        stdout.write("".join(f"wrote {p}\n" for p in paths.values()))
    return EXIT_OK


def run_command(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    logf = None
    try:
        try:
            args = ap.parse_args(argv)
        except SystemExit as e:  # --help
            return int(e.code or 0)
        log = None
        if args.log:
            from .modular import jsonl_logger

            logf = open(args.log, "a", encoding="utf-8")
            log = jsonl_logger(logf)
        try:
            cfg = _config(args, log)
        except ValueError as e:
            raise _UsageError(str(e)) from e
        if args.command == "bench":
            return _bench(args, cfg, stdout)
        t0 = time.perf_counter()
        with deadline.budget(args.timeout):
            out, code = _run(args, cfg)
        out["wall_micros"] = int((time.perf_counter() - t0) * 1e6)
        if args.json:
            stdout.write(json.dumps(out, sort_keys=True) + "\n")
        else:
            stdout.write(_human(args.command, out))
        return code
    except _UsageError as e:
        stderr.write(f"moddiq: usage error: {e}\n")
        return EXIT_USAGE
    except DeadlineExceeded:
        stderr.write("moddiq: timeout\n")
        return EXIT_TIMEOUT
    except OSError as e:
        stderr.write(f"moddiq: {e}\n")
        return EXIT_USAGE
    except (ModularFailure, PrimeExhaustion, RadicalUnavailable) as e:
        stderr.write(f"moddiq: {type(e).__name__}: {e}\n")
        return EXIT_FAILED
    except (ModdiqError, ValueError) as e:  # parse errors and invalid input (unit ideal, violated hypothesis, ...)
        stderr.write(f"moddiq: {type(e).__name__}: {e}\n")
        return EXIT_USAGE
    finally:
        if logf is not None:
            logf.close()


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
