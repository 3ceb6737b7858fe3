"""Command-line front end.

Subcommands: validate, classify, loading, impedance, crosscheck.  Reports go
to stdout, diagnostics to stderr.  Exit codes: 0 success/pass, 1 error,
2 domain-level rejection (irrelevant topology, failed cross-check verdict,
validation violations).

Output format is ``table`` unless overridden by the FEEDBACK_LENS_FORMAT
environment variable; an explicit --format flag wins over both.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import crosscheck, mna, sfg
from .feedback import (
    AmplifierParams,
    UnclassifiableTopology,
    Validity,
    classify_topology,
    loading_of_circuit,
)
from .netlist import GROUND, NetlistError, Resistor, Vccs, Vcvs, parse_netlist_file, validate
from .smallsignal import InvalidMacroParams, LinearCircuit, linearize

FORMAT_ENV = "FEEDBACK_LENS_FORMAT"

_PARAM_ALIASES = {
    "k": "K",
    "rout": "r_out",
    "r1": "R1",
    "r2": "R2",
    "gm": "g_m",
    "rpi": "r_pi",
    "ro": "r_o",
    "re": "R_E",
    "rs": "R_S",
    "rin": "R_in",
}


def _resolve_format(args) -> str:
    if args.format:
        return args.format
    env = os.environ.get(FORMAT_ENV, "").strip().lower()
    if env in ("table", "json"):
        return env
    return "table"


def _load_valid_circuit(path: str):
    circuit = parse_netlist_file(path)
    report = validate(circuit)
    if not report.ok:
        for violation in report.violations:
            print(f"{path}: {violation.message}", file=sys.stderr)
        raise SystemExit(1)
    return circuit


def cmd_validate(args) -> int:
    circuit = parse_netlist_file(args.netlist)
    report = validate(circuit)
    fmt = _resolve_format(args)
    if fmt == "json":
        payload = {
            "valid": report.ok,
            "violations": [
                {"code": v.code, "subject": v.subject, "message": v.message}
                for v in report.violations
            ],
        }
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        if report.ok:
            print("valid")
        else:
            for violation in report.violations:
                print(f"{args.netlist}: {violation.message}")
    return 0 if report.ok else 2


def cmd_classify(args) -> int:
    circuit = _load_valid_circuit(args.netlist)
    topo = classify_topology(circuit)
    fmt = _resolve_format(args)
    if fmt == "json":
        payload = {
            "input_mix": topo.input_mix.value,
            "output_sense": topo.output_sense.value,
            "validity": topo.validity.value,
        }
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(f"{topo.label} ({topo.validity.value})")
    return 0 if topo.validity is Validity.VALID else 2


def cmd_loading(args) -> int:
    circuit = _load_valid_circuit(args.netlist)
    loading = loading_of_circuit(circuit)
    fmt = _resolve_format(args)
    if fmt == "json":
        payload = crosscheck.json_safe(
            {"R_if": loading.R_if, "R_of": loading.R_of, "f": loading.f}
        )
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(f"R_if  {loading.R_if:.9e} Ω")
        print(f"R_of  {loading.R_of:.9e} Ω")
        print(f"f     {loading.f:.9e}")
    return 0


def _recognize_case(lc: LinearCircuit, port) -> tuple[int, AmplifierParams] | None:
    """Match the linearized circuit against one of the two measurement
    patterns and recover its parameters; None when it is anything else."""
    vccs = [e for e in lc.elements if isinstance(e, Vccs)]
    vcvs = [e for e in lc.elements if isinstance(e, Vcvs)]
    resistors = [e for e in lc.elements if isinstance(e, Resistor)]
    if len(vccs) != 1 or len(lc.elements) != len(vccs) + len(vcvs) + len(resistors):
        return None
    gm_src = vccs[0]
    c, e, b = gm_src.n1, gm_src.n2, gm_src.cp
    if gm_src.cn != e:
        return None

    def resistor_between(n1, n2):
        found = [r for r in resistors if {r.n1, r.n2} == {n1, n2}]
        return found[0] if len(found) == 1 else None

    ro = resistor_between(c, e)
    if ro is None:
        return None

    for case, (sense_top, ctrl) in ((1, (e, (GROUND, e))), (2, (c, (c, GROUND)))):
        gain_srcs = [x for x in vcvs if (x.cp, x.cn) == ctrl and x.n2 == GROUND]
        if len(gain_srcs) != 1 or gain_srcs[0].gain <= 0:
            continue
        op = gain_srcs[0]
        rout = resistor_between(op.n1, b)
        r1 = resistor_between(sense_top, GROUND)
        if rout is None or r1 is None or r1 is ro:
            continue
        if case == 1:
            rpi = resistor_between(b, e)
            extra_vcvs = [x for x in vcvs if x is not op]
        else:
            buffers = [
                x for x in vcvs
                if x is not op and x.gain == 1.0 and (x.cp, x.cn) == (e, GROUND) and x.n2 == GROUND
            ]
            if len(buffers) != 1:
                continue
            rpi = resistor_between(b, buffers[0].n1)
            extra_vcvs = [x for x in vcvs if x is not op and x is not buffers[0]]
        if rpi is None or extra_vcvs:
            continue
        expected_port = (c, GROUND) if case == 1 else (e, GROUND)
        if tuple(port) != expected_port:
            continue
        named = {r.name for r in (ro, rout, r1, rpi)}
        rin = [r for r in resistors if r.name not in named]
        if len(rin) > 1 or (rin and {rin[0].n1, rin[0].n2} != {sense_top, GROUND}):
            continue
        params = AmplifierParams(
            K=op.gain,
            r_out=rout.ohms,
            R1=r1.ohms,
            g_m=gm_src.gm,
            r_pi=rpi.ohms,
            r_o=ro.ohms,
            R_in=rin[0].ohms if rin else math.inf,
        )
        return case, params
    return None


def cmd_impedance(args) -> int:
    circuit = _load_valid_circuit(args.netlist)
    lc = linearize(circuit)
    port = (args.port[0], args.port[1])
    for node in port:
        if node not in lc.nodes:
            print(f"error: unknown node {node!r}", file=sys.stderr)
            return 1
    values = {"mna": mna.driving_point_impedance(lc, port)}
    if args.all_engines:
        values["mason"] = crosscheck.mason_driving_point_impedance(lc, port)
        matched = _recognize_case(lc, port)
        if matched is not None:
            case, params = matched
            values["closed_form"] = crosscheck.closed_rx(case, params)
            values["exact_formula"] = crosscheck.exact_rx(case, params)
    fmt = _resolve_format(args)
    if fmt == "json":
        print(json.dumps(crosscheck.json_safe(values), sort_keys=True, indent=2))
    elif args.all_engines:
        for engine in ("mna", "mason", "closed_form", "exact_formula"):
            if engine in values:
                print(f"{engine:<14}{values[engine]:.6e} Ω")
    else:
        print(f"{values['mna']:.6e} Ω")
    return 0


def _parse_overrides(pairs: list[str]) -> dict[str, float]:
    from .netlist import parse_value

    overrides = {}
    valid = {f for f in AmplifierParams.__dataclass_fields__}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--set expects name=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        field = _PARAM_ALIASES.get(key.lower(), key)
        if field not in valid:
            raise ValueError(f"unknown parameter {key!r}")
        overrides[field] = parse_value(raw)
    return overrides


def cmd_crosscheck(args) -> int:
    overrides = _parse_overrides(args.set or [])
    params = AmplifierParams.typical(**overrides)
    band = None
    if args.paper_defaults and not overrides:
        band = crosscheck.CLOSED_FORM_ERROR_BANDS[args.case]
    config = crosscheck.CrossCheckConfig(
        engine_rtol=args.engine_rtol, closed_error_band=band
    )

    if args.sweep:
        axis, _, raw = args.sweep.partition("=")
        if not raw:
            raise ValueError("--sweep expects axis=v1,v2,...")
        from .netlist import parse_value

        field = _PARAM_ALIASES.get(axis.lower(), axis)
        grid = [parse_value(v) for v in raw.split(",") if v]
        reports = crosscheck.sweep(args.case, params, field, grid, config)
    else:
        reports = [crosscheck.run_case(args.case, params, config)]

    fmt = _resolve_format(args)
    if fmt == "json":
        payload = [crosscheck.report_to_dict(r) for r in reports]
        print(json.dumps(payload[0] if len(payload) == 1 else payload,
                         sort_keys=True, indent=2))
    else:
        print("\n".join(crosscheck.report_table(r) for r in reports), end="")
    return 0 if all(r.passed for r in reports) else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedback-lens",
        description="Small-signal feedback circuit analysis with cross-checked engines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--format", choices=("table", "json"), default=None,
                       help="output format (default: $FEEDBACK_LENS_FORMAT or table)")

    p = sub.add_parser("validate", help="parse a netlist and report violations")
    p.add_argument("netlist")
    add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("classify", help="classify the annotated feedback topology")
    p.add_argument("netlist")
    add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("loading", help="loading of the feedback network on the amplifier")
    p.add_argument("netlist")
    add_common(p)
    p.set_defaults(func=cmd_loading)

    p = sub.add_parser("impedance", help="driving-point impedance at a port")
    p.add_argument("netlist")
    p.add_argument("--port", nargs=2, metavar=("N+", "N-"), required=True)
    p.add_argument("--all-engines", action="store_true",
                   help="also report the flow-graph value and, when the circuit "
                        "matches a supported case pattern, the closed forms")
    add_common(p)
    p.set_defaults(func=cmd_impedance)

    p = sub.add_parser("crosscheck", help="compare all engines on one output-series case")
    p.add_argument("--case", type=int, choices=(1, 2), required=True)
    p.add_argument("--paper-defaults", action="store_true",
                   help="use the typical textbook parameter set and judge the "
                        "closed form against its documented error level")
    p.add_argument("--set", action="append", metavar="NAME=VALUE",
                   help="override one parameter (repeatable)")
    p.add_argument("--sweep", metavar="AXIS=V1,V2,...",
                   help="run once per grid value of one parameter")
    p.add_argument("--engine-rtol", type=float, default=1e-6,
                   help="pairwise tolerance for the exact engines")
    add_common(p)
    p.set_defaults(func=cmd_crosscheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for domain rejection
        return 1 if exc.code else 0
    netlist = getattr(args, "netlist", "<input>")
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except NetlistError as exc:
        print(exc.format(netlist), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UnclassifiableTopology, InvalidMacroParams, mna.SingularMatrix,
            mna.UnknownSource, sfg.LimitExceeded, sfg.ZeroDeterminant,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
