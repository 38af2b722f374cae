"""kobhahn command line.

Exit codes: 0 pass, 1 verification failure, 2 input error, 3 degenerate
input, 4 no construction for this pair of domains.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .counterexample import (DifferenceSurface, certify, intersection_persistence,
                             transversality_check)
from .coverings import parse_domain
from .holo import ExprSyntaxError, RegionError, constant_value, is_constant, parse
from .injectivize import DegenerateJet, DiscPair, injectivize, verify_injectivity
from .metrics import NOT_EQUAL, classify_product
from .verify import SUITES, Check, run_suite

REPORT_SCHEMA = 1

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_DEGENERATE, EXIT_CASE = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _clean(x):
    """Plain JSON types; complex numbers become [re, im]."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(np.real(x))), _clean(float(np.imag(x)))]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _report(command, inputs, outputs, checks):
    return {
        "schema_version": REPORT_SCHEMA,
        "command": command,
        "inputs": inputs,
        "outputs": outputs,
        "residuals": {c.name: c.value for c in checks},
        "tolerances": {c.name: [c.kind, c.bound] for c in checks},
        "failed": [c.name for c in checks if not c.passed],
        "verdict": "pass" if all(c.passed for c in checks) else "fail",
    }


def _domain(text):
    try:
        return parse_domain(text)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None


def cmd_classify(args):
    d1, d2 = _domain(args.d1), _domain(args.d2)
    v = classify_product(d1, d2)
    out = {"case": v.case, "equal": v.equal, "witness": v.witness}
    return _report("classify", {"d1": d1.descriptor, "d2": d2.descriptor}, out, [])


def cmd_injectivize(args):
    if not 0 < args.theta < 1:
        raise CliError(EXIT_INPUT, f"theta must lie in (0, 1), got {args.theta}")
    try:
        with open(args.spec) as fh:
            spec = json.load(fh)
        f = DiscPair.from_json(spec)
    except (OSError, json.JSONDecodeError, ExprSyntaxError, RegionError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"bad disc specification: {exc}") from None
    try:
        r = injectivize(f, args.theta)
    except DegenerateJet as exc:
        raise CliError(EXIT_DEGENERATE, str(exc)) from None
    except ValueError as exc:
        raise CliError(EXIT_CASE, str(exc)) from None
    rep = verify_injectivity(r.g, 10_000, args.seed, r.injective_components)
    checks = [
        Check("jet_value", r.residuals["value"], 1e-10),
        Check("jet_derivative", r.residuals["derivative"], 1e-10),
        Check("collisions", len(rep.collisions), 0.5),
        Check("min_separation_ratio", rep.min_separation_ratio, 0.0, "min"),
    ]
    if "min_abs_g1" in r.params:
        checks.append(Check("min_abs_g1", r.params["min_abs_g1"], 0.0, "min"))
    if "max_offset" in r.params:
        checks.append(Check("containment_offset", r.params["max_offset"], r.params["d"]))
    for c, w in rep.windings.items():
        checks.append(Check(f"winding_errors_comp{c}", sum(x != 1 for x in w), 0.5))
    out = dict(r.to_json(), verifier=rep.to_json())
    return _report("injectivize", {"spec": spec, "theta": args.theta, "seed": args.seed}, out, checks)


def _parse_a(text):
    try:
        e = parse(text)
    except ExprSyntaxError as exc:
        raise CliError(EXIT_INPUT, f"--a: {exc}") from None
    if not is_constant(e):
        raise CliError(EXIT_INPUT, "--a must be a complex literal")
    a = complex(constant_value(e))
    if not abs(a) < 1:
        raise CliError(EXIT_INPUT, "--a must lie in the unit disc")
    return a


def cmd_counterexample(args):
    d1, d2 = _domain(args.d1), _domain(args.d2)
    v = classify_product(d1, d2)
    if v.case != NOT_EQUAL:
        raise CliError(EXIT_CASE, f"no counterexample exists: {v.case} ({v.witness})")
    a = _parse_a(args.a) if args.a is not None else None
    try:
        cert = certify(d1, d2, a)
    except ValueError as exc:
        raise CliError(EXIT_INPUT, str(exc)) from None
    rt = cert.residual_table
    s1, s2 = DifferenceSurface.of(cert)
    jac = transversality_check(s1, s2, cert.q)
    runs = [intersection_persistence(s1, s2, cert.q, dl, cert.det_value) for dl in (1e-3, 1e-2)]
    checks = [
        Check("covering_equality_1", rt["covering_equality_1"], 1e-9),
        Check("covering_equality_2", rt["covering_equality_2"], 1e-9),
        Check("abs_det", abs(cert.det_value), 1e-6, "min"),
        Check("det_direct_vs_simplified", cert.det_relative_gap, 1e-9),
        Check("transversality_sign", abs(jac + cert.det_value) / abs(cert.det_value), 1e-9),
        Check("persistence_residual", max(r.residual for r in runs), 1e-10),
    ]
    if rt.get("involution") is not None:
        checks.append(Check("involution", rt["involution"], 1e-10))
    out = {
        "certificate": cert.to_json(),
        "jacobian": jac,
        "persistence": [r.to_json() for r in runs],
    }
    if a is not None and cert.a is None:
        out["note"] = "a is unused on the direct branch"
    inputs = {"d1": d1.descriptor, "d2": d2.descriptor, "a": args.a}
    return _report("counterexample", inputs, out, checks)


def cmd_verify(args):
    checks = run_suite(args.suite, args.seed)
    return _report("verify", {"suite": args.suite, "seed": args.seed}, {"n_checks": len(checks)}, checks)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="also write the JSON report to this path")
    common.add_argument("--seed", type=int, default=0, help="seed for all sampling (default 0)")
    common.add_argument("--json", action="store_true", help="print JSON instead of a table")

    p = argparse.ArgumentParser(prog="kobhahn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", parents=[common], help="does h equal kappa on D1 x D2?")
    c.add_argument("--d1", required=True)
    c.add_argument("--d2", required=True)
    c.set_defaults(func=cmd_classify)

    i = sub.add_parser("injectivize", parents=[common], help="injective disc with a prescribed 1-jet")
    i.add_argument("spec", help="disc-pair JSON: {comp1, comp2, target1, target2}")
    i.add_argument("--theta", type=float, default=0.5)
    i.set_defaults(func=cmd_injectivize)

    x = sub.add_parser("counterexample", parents=[common], help="certificate that h != kappa")
    x.add_argument("--d1", required=True)
    x.add_argument("--d2", required=True)
    x.add_argument("--a", help="base point for the reduced branch, e.g. 0.0+0.5i")
    x.set_defaults(func=cmd_counterexample)

    v = sub.add_parser("verify", parents=[common], help="run invariant suites")
    v.add_argument("--suite", default="all", choices=[*SUITES, "all"])
    v.set_defaults(func=cmd_verify)
    return p


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def _table(report):
    lines = [f"{report['command']}: {report['verdict']}"]
    if report["command"] == "classify":
        o = report["outputs"]
        lines.append(f"  {o['case']}  (equal: {o['equal']})  {o['witness']}")
    rows = [(n, _fmt(v), f"{'<' if k == 'max' else '>'} {b:g}", "fail" if n in report["failed"] else "ok")
            for (n, v), (k, b) in zip(report["residuals"].items(), report["tolerances"].values())]
    if rows:
        w = [max(len(r[i]) for r in rows) for i in range(3)]
        for r in rows:
            lines.append(f"  {r[0]:<{w[0]}}  {r[1]:>{w[1]}}  {r[2]:<{w[2]}}  {r[3]}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = _clean(args.func(args))
    except CliError as exc:
        print(f"kobhahn: error: {exc}", file=sys.stderr)
        return exc.code
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text if args.json else _table(report))
    return EXIT_PASS if report["verdict"] == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
