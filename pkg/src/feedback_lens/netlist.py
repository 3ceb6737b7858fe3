"""Netlist front end: parse, validate and serialize circuit descriptions.

Grammar (one statement per line, ``*`` starts a comment line, blank lines
ignored, ``.end`` optional):

    R<name> n+ n- <ohms>                    resistor
    V<name> n+ n- <volts>                   independent voltage source
    I<name> n+ n- <amps>                    independent current source
                                            (current flows n+ -> n- through
                                            the source)
    E<name> n+ n- nc+ nc- <gain>            voltage-controlled voltage source
                                            v(n+,n-) = gain * v(nc+,nc-)
    G<name> n+ n- nc+ nc- <siemens>         voltage-controlled current source
                                            (gm * v(nc+,nc-) flows n+ -> n-
                                            through the source)
    Q<name> base collector emitter gm=<S> rpi=<ohms> ro=<ohms>
                                            bipolar device, hybrid-pi params
    X<name> plus minus out K=<gain> rout=<ohms> [rin=<ohms>]
                                            op-amp: gain K, output resistance
                                            rout, optional differential input
                                            resistance rin (absent = infinite)

    .title <text>                           circuit title
    .input n+ n-                            amplifier input port
    .output n+ n-                           amplifier output port
    .feedback <elem> [<elem> ...]           elements forming the feedback network

Node names are arbitrary identifiers; ``0`` is ground.  Values accept the
case-sensitive engineering suffixes k (1e3), M (1e6), m (1e-3), u (1e-6)
and are stored in SI base units as doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class NetlistError(Exception):
    """Base for netlist problems; carries a 1-based source line number."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(message)
        self.line = line

    def format(self, filename: str = "<netlist>") -> str:
        return f"{filename}:{self.line}: {self}"


class NetlistSyntaxError(NetlistError):
    pass


class DuplicateName(NetlistError):
    pass


class UnknownElementKind(NetlistError):
    pass


GROUND = "0"

_SUFFIXES = {"k": 1e3, "M": 1e6, "m": 1e-3, "u": 1e-6}


def parse_value(token: str, line: int = 0) -> float:
    """Parse a numeric value, allowing a trailing engineering suffix."""
    text = token
    scale = 1.0
    if text and text[-1] in _SUFFIXES:
        scale = _SUFFIXES[text[-1]]
        text = text[:-1]
    try:
        value = float(text)
    except ValueError:
        raise NetlistSyntaxError(f"bad numeric value {token!r}", line) from None
    if not math.isfinite(value):
        raise NetlistSyntaxError(f"non-finite value {token!r}", line)
    return value * scale


def format_value(value: float) -> str:
    return repr(float(value))


@dataclass(frozen=True)
class Resistor:
    name: str
    n1: str
    n2: str
    ohms: float

    @property
    def terminals(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class VSource:
    name: str
    n1: str
    n2: str
    volts: float

    @property
    def terminals(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class ISource:
    """Independent current source; `amps` flows n1 -> n2 through the source."""

    name: str
    n1: str
    n2: str
    amps: float

    @property
    def terminals(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class Vcvs:
    name: str
    n1: str
    n2: str
    cp: str
    cn: str
    gain: float

    @property
    def terminals(self) -> tuple[str, ...]:
        return (self.n1, self.n2, self.cp, self.cn)


@dataclass(frozen=True)
class Vccs:
    """gm * v(cp, cn) flows n1 -> n2 through the source."""

    name: str
    n1: str
    n2: str
    cp: str
    cn: str
    gm: float

    @property
    def terminals(self) -> tuple[str, ...]:
        return (self.n1, self.n2, self.cp, self.cn)


@dataclass(frozen=True)
class BjtPi:
    """Bipolar device described by its hybrid-pi small-signal parameters."""

    name: str
    base: str
    collector: str
    emitter: str
    gm: float
    rpi: float
    ro: float

    @property
    def beta(self) -> float:
        return self.gm * self.rpi

    @property
    def terminals(self) -> tuple[str, ...]:
        return (self.base, self.collector, self.emitter)


@dataclass(frozen=True)
class OpAmp:
    """Finite-gain op-amp: output gain*(v(plus)-v(minus)) behind rout.

    rin, when given, is a differential input resistance between plus and
    minus; None models an infinite input resistance.
    """

    name: str
    plus: str
    minus: str
    out: str
    gain: float
    rout: float
    rin: float | None = None

    @property
    def terminals(self) -> tuple[str, ...]:
        return (self.plus, self.minus, self.out)


Element = Resistor | VSource | ISource | Vcvs | Vccs | BjtPi | OpAmp

MACRO_KINDS = (BjtPi, OpAmp)
PRIMITIVE_KINDS = (Resistor, VSource, ISource, Vcvs, Vccs)


@dataclass(frozen=True)
class PortAnnotations:
    input_port: tuple[str, str] | None = None
    output_port: tuple[str, str] | None = None
    feedback_elements: frozenset[str] = frozenset()

    def forward_elements(self, circuit: "Circuit") -> tuple[str, ...]:
        return tuple(
            e.name for e in circuit.elements if e.name not in self.feedback_elements
        )


@dataclass(frozen=True)
class Circuit:
    title: str
    nodes: frozenset[str]
    elements: tuple[Element, ...]
    annotations: PortAnnotations = PortAnnotations()

    def element(self, name: str) -> Element:
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self) -> frozenset[str]:
        return frozenset(e.name for e in self.elements)


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


def _split_params(tokens: list[str], line: int) -> dict[str, float]:
    params = {}
    for tok in tokens:
        if "=" not in tok:
            raise NetlistSyntaxError(f"expected key=value, got {tok!r}", line)
        key, _, raw = tok.partition("=")
        params[key] = parse_value(raw, line)
    return params


def _parse_element(tokens: list[str], line: int) -> Element:
    name = tokens[0]
    kind = name[0]
    args = tokens[1:]
    if kind == "R":
        if len(args) != 3:
            raise NetlistSyntaxError("resistor needs 2 nodes and a value", line)
        return Resistor(name, args[0], args[1], parse_value(args[2], line))
    if kind == "V":
        if len(args) != 3:
            raise NetlistSyntaxError("voltage source needs 2 nodes and a value", line)
        return VSource(name, args[0], args[1], parse_value(args[2], line))
    if kind == "I":
        if len(args) != 3:
            raise NetlistSyntaxError("current source needs 2 nodes and a value", line)
        return ISource(name, args[0], args[1], parse_value(args[2], line))
    if kind == "E":
        if len(args) != 5:
            raise NetlistSyntaxError(
                "controlled voltage source needs 4 nodes and a gain", line
            )
        return Vcvs(name, args[0], args[1], args[2], args[3], parse_value(args[4], line))
    if kind == "G":
        if len(args) != 5:
            raise NetlistSyntaxError(
                "controlled current source needs 4 nodes and a transconductance", line
            )
        return Vccs(name, args[0], args[1], args[2], args[3], parse_value(args[4], line))
    if kind == "Q":
        if len(args) != 6:
            raise NetlistSyntaxError(
                "bipolar device needs base collector emitter gm= rpi= ro=", line
            )
        params = _split_params(args[3:], line)
        missing = {"gm", "rpi", "ro"} - params.keys()
        if missing:
            raise NetlistSyntaxError(f"missing parameters {sorted(missing)}", line)
        extra = params.keys() - {"gm", "rpi", "ro"}
        if extra:
            raise NetlistSyntaxError(f"unknown parameters {sorted(extra)}", line)
        return BjtPi(name, args[0], args[1], args[2], params["gm"], params["rpi"], params["ro"])
    if kind == "X":
        if len(args) not in (5, 6):
            raise NetlistSyntaxError(
                "op-amp needs plus minus out K= rout= [rin=]", line
            )
        params = _split_params(args[3:], line)
        missing = {"K", "rout"} - params.keys()
        if missing:
            raise NetlistSyntaxError(f"missing parameters {sorted(missing)}", line)
        extra = params.keys() - {"K", "rout", "rin"}
        if extra:
            raise NetlistSyntaxError(f"unknown parameters {sorted(extra)}", line)
        return OpAmp(
            name, args[0], args[1], args[2],
            params["K"], params["rout"], params.get("rin"),
        )
    raise UnknownElementKind(f"unknown element kind {name!r}", line)


def parse_netlist(text: str) -> Circuit:
    """Parse a netlist into a Circuit.

    Raises NetlistSyntaxError / DuplicateName / UnknownElementKind with the
    offending 1-based line number attached.
    """
    title = ""
    elements: list[Element] = []
    seen: dict[str, int] = {}
    input_port = output_port = None
    feedback: frozenset[str] = frozenset()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        tokens = stripped.split()
        head = tokens[0]
        if head.startswith("."):
            directive = head.lower()
            if directive == ".title":
                title = stripped.split(None, 1)[1] if len(tokens) > 1 else ""
            elif directive == ".input":
                if len(tokens) != 3:
                    raise NetlistSyntaxError(".input needs two nodes", lineno)
                input_port = (tokens[1], tokens[2])
            elif directive == ".output":
                if len(tokens) != 3:
                    raise NetlistSyntaxError(".output needs two nodes", lineno)
                output_port = (tokens[1], tokens[2])
            elif directive == ".feedback":
                if len(tokens) < 2:
                    raise NetlistSyntaxError(".feedback needs element names", lineno)
                feedback = frozenset(tokens[1:])
            elif directive == ".end":
                break
            else:
                raise NetlistSyntaxError(f"unknown directive {head!r}", lineno)
            continue
        element = _parse_element(tokens, lineno)
        if element.name in seen:
            raise DuplicateName(
                f"element {element.name!r} already defined on line {seen[element.name]}",
                lineno,
            )
        seen[element.name] = lineno
        elements.append(element)

    nodes = {GROUND} if elements else set()
    for e in elements:
        nodes.update(e.terminals)
    annotations = PortAnnotations(input_port, output_port, feedback)
    return Circuit(title, frozenset(nodes), tuple(elements), annotations)


def parse_netlist_file(path: str) -> Circuit:
    with open(path, encoding="utf-8") as handle:
        return parse_netlist(handle.read())


def serialize(circuit: Circuit) -> str:
    """Render the canonical netlist text; parse(serialize(c)) == c."""
    lines = []
    if circuit.title:
        lines.append(f".title {circuit.title}")
    for e in circuit.elements:
        if isinstance(e, Resistor):
            lines.append(f"{e.name} {e.n1} {e.n2} {format_value(e.ohms)}")
        elif isinstance(e, VSource):
            lines.append(f"{e.name} {e.n1} {e.n2} {format_value(e.volts)}")
        elif isinstance(e, ISource):
            lines.append(f"{e.name} {e.n1} {e.n2} {format_value(e.amps)}")
        elif isinstance(e, Vcvs):
            lines.append(
                f"{e.name} {e.n1} {e.n2} {e.cp} {e.cn} {format_value(e.gain)}"
            )
        elif isinstance(e, Vccs):
            lines.append(f"{e.name} {e.n1} {e.n2} {e.cp} {e.cn} {format_value(e.gm)}")
        elif isinstance(e, BjtPi):
            lines.append(
                f"{e.name} {e.base} {e.collector} {e.emitter} "
                f"gm={format_value(e.gm)} rpi={format_value(e.rpi)} ro={format_value(e.ro)}"
            )
        elif isinstance(e, OpAmp):
            line = (
                f"{e.name} {e.plus} {e.minus} {e.out} "
                f"K={format_value(e.gain)} rout={format_value(e.rout)}"
            )
            if e.rin is not None:
                line += f" rin={format_value(e.rin)}"
            lines.append(line)
    ann = circuit.annotations
    if ann.input_port:
        lines.append(f".input {ann.input_port[0]} {ann.input_port[1]}")
    if ann.output_port:
        lines.append(f".output {ann.output_port[0]} {ann.output_port[1]}")
    if ann.feedback_elements:
        lines.append(".feedback " + " ".join(sorted(ann.feedback_elements)))
    return "\n".join(lines) + "\n"


def _positive_value_violations(e: Element) -> list[Violation]:
    out = []

    def check(label: str, value: float, positive: bool):
        if positive and not value > 0:
            out.append(
                Violation("nonpositive-value", e.name, f"{e.name}: {label} must be > 0")
            )
        elif not math.isfinite(value):
            out.append(
                Violation("nonfinite-value", e.name, f"{e.name}: {label} must be finite")
            )

    if isinstance(e, Resistor):
        check("resistance", e.ohms, True)
    elif isinstance(e, Vccs):
        check("transconductance", e.gm, True)
    elif isinstance(e, Vcvs):
        check("gain", e.gain, False)
    elif isinstance(e, BjtPi):
        check("gm", e.gm, True)
        check("rpi", e.rpi, True)
        check("ro", e.ro, True)
    elif isinstance(e, OpAmp):
        check("K", e.gain, True)
        check("rout", e.rout, True)
        if e.rin is not None:
            check("rin", e.rin, True)
    return out


def validate(circuit: Circuit) -> ValidationReport:
    """Collect all invariant violations; an empty report means valid.

    Checks ground presence, connectivity of every node to ground through
    element terminals, value positivity/finiteness, and port annotations.
    """
    violations: list[Violation] = []

    if GROUND not in circuit.nodes:
        violations.append(Violation("no-ground", GROUND, "node 0 (ground) missing"))
    elif not any(GROUND in e.terminals for e in circuit.elements):
        violations.append(
            Violation("no-ground", GROUND, "no element terminal touches ground")
        )
    else:
        reachable = {GROUND}
        frontier = [GROUND]
        adjacency: dict[str, set[str]] = {}
        for e in circuit.elements:
            for t in e.terminals:
                adjacency.setdefault(t, set()).update(e.terminals)
        while frontier:
            node = frontier.pop()
            for nbr in adjacency.get(node, ()):
                if nbr not in reachable:
                    reachable.add(nbr)
                    frontier.append(nbr)
        for node in sorted(circuit.nodes - reachable):
            violations.append(
                Violation("floating-node", node, f"node {node!r} unreachable from ground")
            )

    for e in circuit.elements:
        violations.extend(_positive_value_violations(e))

    names = circuit.names()
    ann = circuit.annotations
    for missing in sorted(ann.feedback_elements - names):
        violations.append(
            Violation(
                "unknown-feedback-element",
                missing,
                f".feedback names unknown element {missing!r}",
            )
        )
    for label, port in (("input", ann.input_port), ("output", ann.output_port)):
        if port is None:
            continue
        for node in port:
            if node not in circuit.nodes:
                violations.append(
                    Violation(
                        "unknown-port-node", node, f".{label} names unknown node {node!r}"
                    )
                )
    if ann.input_port and ann.output_port and set(ann.input_port) == set(ann.output_port):
        violations.append(
            Violation("ports-equal", "", "input and output ports are the same node pair")
        )

    return ValidationReport(tuple(violations))
