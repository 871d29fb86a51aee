"""Command-line entry point: ``hresolvent <subcommand> [flags]``.

Exit codes: 0 all checks pass, 1 a verdict or consistency check failed,
2 usage or configuration error, 3 numerical-accuracy failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import constants as C
from .discrete import SolverError
from .fields import builtin_family
from .quadrature import PRESETS, Quadrature, QuadratureAccuracyError

SCHEMA_VERSION = 1

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def parse_dims(text: str) -> list:
    """'2..6' -> [2, 3, 4, 5, 6]; '2,4' -> [2, 4]."""
    out = []
    for part in text.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)\.\.(\d+)", part)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if lo > hi:
                raise argparse.ArgumentTypeError(f"empty range {part!r}")
            out.extend(range(lo, hi + 1))
        elif part.isdigit():
            out.append(int(part))
        else:
            raise argparse.ArgumentTypeError(f"bad dimension list {text!r}")
    return out


def parse_lambda(text: str) -> complex:
    """'1+0.5i', '-2', '3i', '1-2j' -> complex."""
    s = text.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad spectral parameter {text!r}") from None


def parse_positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("delta must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=parse_dims, default=None,
                        help="dimensions, e.g. 2, 2,3 or 2..6")
    common.add_argument("--delta", type=parse_positive, action="append", default=None,
                        help="cone opening (repeatable)")
    common.add_argument("--lambda", dest="lams", type=parse_lambda, action="append",
                        default=None, help="spectral parameter 'a+bi' (repeatable)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--quad", choices=sorted(PRESETS), default="standard")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--format", choices=("json", "csv", "both"), default="both")

    p = argparse.ArgumentParser(prog="hresolvent",
                                description="Hardy and resolvent checks on the Heisenberg group")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[common],
                   help="kappa_d, delta_*, K_d(delta) and perturbed constants")
    sub.add_parser("table", parents=[common], help="(delta_*, kappa_d) table")
    h = sub.add_parser("hardy", parents=[common], help="Hardy quotient suite")
    h.add_argument("--members", type=int, default=100)
    h.add_argument("--no-probe", action="store_true")
    r = sub.add_parser("resolvent", parents=[common], help="resolvent verdict suite")
    r.add_argument("--members", type=int, default=20)
    pc = sub.add_parser("potential-check", parents=[common],
                        help="potential bounds, decisions and perturbed suite")
    pc.add_argument("--potential", action="append", default=None,
                    help="JSON spec, path to a JSON file, or one of "
                         "zero, power+, power-, gaussian (repeatable)")
    pc.add_argument("--members", type=int, default=20)
    pc.add_argument("--suite", action="store_true",
                    help="also run the perturbed verdict suite")
    i = sub.add_parser("identities", parents=[common], help="multiplier identity residuals")
    i.add_argument("--members", type=int, default=20)
    for sp in (sub.choices["constants"],):
        sp.add_argument("--b", type=float, default=None)
        sp.add_argument("--b1", type=float, default=None)
        sp.add_argument("--b2", type=float, default=None)
    return p


# --------------------------------------------------------------------------
# report writing
# --------------------------------------------------------------------------

def _clean(x):
    """JSON-safe copy: non-finite floats become strings, tuples lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _display(rec: dict) -> dict:
    """Rounded copies of the numeric fields, for humans."""
    return {k: float(f"{v:.6g}") for k, v in rec.items()
            if isinstance(v, float) and math.isfinite(v)}


def with_display(records) -> list:
    out = []
    for r in records:
        r = dict(r)
        r["display"] = _display(r)
        out.append(r)
    return out


def report(command: str, config: dict, results) -> dict:
    """Versioned report; the only run-dependent field is header.timestamp."""
    return {"header": {"timestamp": datetime.now(timezone.utc).isoformat()},
            "schema_version": SCHEMA_VERSION, "command": command,
            "config": _clean(config), "results": _clean(results)}


def body(rep: dict) -> str:
    """Report serialized without its header (deterministic for a config)."""
    return json.dumps({k: v for k, v in rep.items() if k != "header"}, indent=2,
                      sort_keys=True)


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _emit(args, name: str, rep: dict, csv_text: str = None, csv_name: str = None):
    if args.out is None:
        return
    if args.format in ("json", "both"):
        _write(args.out, name, json.dumps(rep, indent=2, sort_keys=True) + "\n")
    if csv_text is not None and args.format in ("csv", "both"):
        _write(args.out, csv_name, csv_text)


def _verdict_csv(records) -> str:
    buf = io.StringIO()
    cols = ["inequality", "member", "lam1", "lam2", "delta", "cone", "lhs", "rhs",
            "margin", "quad_error", "passed"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        lam = r.get("lam") or [None, None]
        w.writerow([r.get("inequality"), r.get("member"), lam[0], lam[1], r.get("delta"),
                    r.get("cone"), repr(r["lhs"]), repr(r["rhs"]), repr(r["margin"]),
                    repr(r["quad_error"]), r["passed"]])
    return buf.getvalue()


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _dims(args, default, minimum=2):
    ds = args.d or default
    for d in ds:
        if d < minimum:
            raise UsageError(f"--d {d}: this subcommand needs d >= {minimum}")
    return ds


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "format")}
    if cfg.get("lams") is not None:
        cfg["lams"] = [[z.real, z.imag] for z in cfg["lams"]]
    return cfg


def cmd_constants(args) -> int:
    ds = _dims(args, [2])
    rows, extra = [], []
    ok = True
    for d in ds:
        try:
            rep = C.kappa_d(d)
        except C.ConsistencyError as e:
            ok = False
            rep = C.kappa_d(d, check=False)
            print(f"d={d}: {e}", file=sys.stderr)
        rows.append(rep)
        print(f"d={d}  delta_*={rep.delta_star:.6g}  kappa_d={rep.kappa_d:.6g}")
        entry = {"report": rep.to_dict(), "K_d": {}}
        for delta in args.delta or ():
            K = C.K_d(d, delta)
            entry["K_d"][repr(delta)] = K
            print(f"      K_{d}({delta:g}) = {K:.6g}")
            if any(v is not None for v in (args.b, args.b1, args.b2)):
                pc = C.PerturbedConstants.compute(d, delta, args.b or 0.0, args.b1 or 0.0,
                                                  args.b2 or 0.0)
                entry.setdefault("perturbed", []).append(pc.to_dict())
        extra.append(entry)
    _emit(args, "constants.json", report("constants", _config(args), extra),
          C.table_csv(rows), "constants.csv")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_table(args) -> int:
    ds = _dims(args, list(range(2, 7)))
    rows = C.table(ds)
    text = C.table_csv(rows)
    sys.stdout.write(text)
    _emit(args, "table.json", report("table", _config(args),
                                     [{"d": r.d, "delta_star": r.delta_star,
                                       "kappa_d": r.kappa_d} for r in rows]),
          text, "constants.csv")
    return EXIT_OK


def cmd_hardy(args) -> int:
    from .hardy import SPECS, hardy_suite, sharpness_probe

    ds = _dims(args, [2, 3], minimum=1)
    records, probes = [], []
    for d in ds:
        q = Quadrature.from_preset(d, args.quad)
        family = builtin_family(d, args.seed, args.members)
        records += [dict(r.to_record(), d=d) for r in hardy_suite(d, family, q)]
        if not args.no_probe:
            for name, spec in SPECS.items():
                if d >= spec.min_dim:
                    probes.append(sharpness_probe(name, d, q=q).to_dict())
    ok = all(r["passed"] for r in records)
    failed = sum(not r["passed"] for r in records)
    print(f"hardy: {len(records)} quotients, {failed} failed")
    for p in probes:
        print(f"  probe {p['spec']} d={p['d']}: best {p['best']:.6g} of {p['constant']:.6g}")
    _emit(args, "verdicts.json", report("hardy", _config(args),
                                        {"verdicts": with_display(records),
                                         "probes": probes}))
    return EXIT_OK if ok else EXIT_FAIL


def _suite_records(rep) -> list:
    return with_display([v.to_dict() for v in rep.verdicts + rep.chains])


def cmd_resolvent(args) -> int:
    from .resolvent import resolvent_suite

    ds = _dims(args, [2])
    results, ok = [], True
    for d in ds:
        q = Quadrature.from_preset(d, args.quad)
        rep = resolvent_suite(d, n_members=args.members, lams=args.lams, deltas=args.delta,
                              q=q, seed=args.seed, identities=False)
        ok &= rep.passed
        recs = _suite_records(rep)
        print(f"resolvent d={d}: {len(recs)} verdicts, "
              f"{sum(not r['passed'] for r in recs)} failed")
        results.append({"d": d, "meta": rep.meta, "verdicts": recs,
                        "parabolas": rep.parabolas, "koranyi_probe": rep.probes})
    _emit(args, "verdicts.json", report("resolvent", _config(args), results),
          _verdict_csv([r for x in results for r in x["verdicts"]]), "verdicts.csv")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_identities(args) -> int:
    from .resolvent import AS_WRITTEN, resolvent_suite

    ds = _dims(args, [2])
    results, ok = [], True
    for d in ds:
        q = Quadrature.from_preset(d, args.quad)
        # the lam/delta grid only affects which verdicts run; identities
        # depend on lam alone
        rep = resolvent_suite(d, n_members=args.members, lams=args.lams, deltas=[1.0],
                              q=q, seed=args.seed)
        ok &= rep.identities_passed
        table = rep.identity_table()
        for name, e in table.items():
            note = "  (as written)" if name in AS_WRITTEN else ""
            print(f"d={d} {name:16s} {e['count']:4d} checks  {e['failed']:4d} failed  "
                  f"max rel {e['max_relative']:.2e}{note}")
        results.append({"d": d, "summary": table,
                        "corrected_identities_passed": rep.corrected_identities_passed,
                        "identities": with_display([r.to_dict() for r in rep.identities])})
    _emit(args, "identities.json", report("identities", _config(args), results))
    return EXIT_OK if ok else EXIT_FAIL


def _load_potential(text: str):
    from .potentials import Potential, acceptance_potentials

    named = acceptance_potentials()
    if text in named:
        return text, named[text]
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    try:
        return text, Potential.from_json(text)
    except (ValueError, KeyError, TypeError) as e:
        raise UsageError(f"bad potential spec {text!r}: {e}") from None


def cmd_potential(args) -> int:
    from .potentials import acceptance_potentials, bound_weighted, check_thm_V1, check_thm_V2
    from .resolvent import resolvent_suite

    ds = _dims(args, [2])
    specs = args.potential or list(acceptance_potentials())
    results, ok = [], True
    for d in ds:
        q = Quadrature.from_preset(d, args.quad)
        for text in specs:
            name, V = _load_potential(text)
            bounds = bound_weighted(V, d, builtin_family(d, args.seed, args.members),
                                    Quadrature.from_preset(d, "fast"))
            ok &= bounds.sound()
            v1, v2 = check_thm_V1(bounds), check_thm_V2(bounds)
            entry = {"d": d, "potential": name, "bounds": bounds.to_dict(),
                     "sound": bounds.sound(), "V1": v1.to_dict(), "V2": v2.to_dict()}
            b = bounds.b.upper if bounds.b.certified else None
            print(f"d={d} {name}: b={bounds.b.upper:.6g} b1={bounds.b1.upper:.6g} "
                  f"b2={bounds.b2.upper:.6g} b3={bounds.b3.upper:.6g}  "
                  f"V1 {'met' if v1.hypothesis_met else 'not met'}, "
                  f"V2 {'met' if v2.hypothesis_met else 'not met'}")
            if args.suite:
                real_nonneg = all(t.coef.imag == 0 and t.coef.real >= 0 for t in V.terms)
                kw = dict(n_members=args.members, lams=args.lams, deltas=args.delta, q=q,
                          seed=args.seed, V=V, identities=False,
                          b1=bounds.b1.upper, b2=bounds.b2.upper)
                if real_nonneg and b is not None:
                    kw["b"] = b
                rep = resolvent_suite(d, **kw)
                ok &= rep.verdicts_passed
                entry["verdicts"] = _suite_records(rep)
                print(f"    suite: {len(entry['verdicts'])} verdicts, "
                      f"{sum(not r['passed'] for r in entry['verdicts'])} failed")
            results.append(entry)
    _emit(args, "verdicts.json", report("potential-check", _config(args), results))
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"constants": cmd_constants, "table": cmd_table, "hardy": cmd_hardy,
            "resolvent": cmd_resolvent, "identities": cmd_identities,
            "potential-check": cmd_potential}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, C.DomainError, C.DegenerateInputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureAccuracyError, SolverError) as e:
        print(f"numerical accuracy failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
