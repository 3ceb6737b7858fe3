"""Feedback topology classification, loading extraction and closed-form
output impedance of the two output-series cases.

Case numbering used throughout the package:

* case 1 - output taken at the collector, output current sensed through a
  resistor in the emitter branch, sensed voltage compared at the op-amp
  input.
* case 2 - output taken at the emitter, output current sensed through a
  resistor in the collector branch.

Closed forms are evaluated exactly as printed in the source derivations,
including their approximations; their quality is judged against the exact
formulas and the nodal/flow-graph engines, never patched.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from . import mna
from .netlist import (
    GROUND,
    BjtPi,
    Circuit,
    ISource,
    OpAmp,
    Resistor,
    Vccs,
    Vcvs,
    VSource,
)
from .smallsignal import LinearCircuit, linearize, restrict


class UnclassifiableTopology(Exception):
    """The feedback port relations match none of the catalogued patterns;
    usually an annotation mistake."""


class Mixing(enum.Enum):
    SERIES = "series"
    SHUNT = "shunt"


class Validity(enum.Enum):
    VALID = "valid"
    IRRELEVANT = "irrelevant"


@dataclass(frozen=True)
class FeedbackTopology:
    input_mix: Mixing
    output_sense: Mixing
    validity: Validity

    @property
    def label(self) -> str:
        return f"{self.input_mix.value}-{self.output_sense.value}"


@dataclass(frozen=True)
class LoadingModel:
    R_if: float
    R_of: float
    f: float


# Dominance ratio a >> b is taken to mean a >= ratio * b.
DOMINANCE_RATIO = 100.0


@dataclass(frozen=True)
class AmplifierParams:
    """Operating-point parameters of the output stage and its driver.

    K and r_out describe the driving op-amp (gain and output resistance),
    R1 the current-sense resistor, R2 the load on the output node, g_m /
    r_pi / r_o the transistor small-signal model (beta = g_m * r_pi), R_E
    and R_S optional degeneration and source resistances, R_in the op-amp
    differential input resistance (infinite when absent).
    """

    K: float
    r_out: float
    R1: float
    g_m: float
    r_pi: float
    r_o: float
    R2: float = math.inf
    R_E: float = 0.0
    R_S: float = 0.0
    R_in: float = math.inf

    def __post_init__(self):
        for label in ("r_out", "R1", "g_m", "r_pi", "r_o"):
            value = getattr(self, label)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{label} must be positive and finite")
        for label in ("R2", "R_in"):
            if not getattr(self, label) > 0:
                raise ValueError(f"{label} must be positive (inf allowed)")
        for label in ("R_E", "R_S"):
            if getattr(self, label) < 0:
                raise ValueError(f"{label} must be >= 0")
        if not (math.isfinite(self.K) and self.K >= 0):
            raise ValueError("K must be finite and >= 0")

    @property
    def beta(self) -> float:
        return self.g_m * self.r_pi

    @classmethod
    def typical(cls, **overrides) -> "AmplifierParams":
        """Typical textbook operating point: beta=100, K=1000,
        r_out=500k, R1=1k, r_pi=2.5k, r_o=100k."""
        base = dict(K=1000.0, r_out=500e3, R1=1e3, g_m=0.04, r_pi=2.5e3, r_o=100e3)
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class FeedbackAnalysis:
    topology: FeedbackTopology
    loading: LoadingModel
    one_plus_af: float
    R_bf: float
    R_X: float
    R_out: float


# --------------------------------------------------------------------------
# Topology classification
# --------------------------------------------------------------------------

def _comparison_terminals(e) -> tuple[str, ...]:
    """Terminals where a signal can enter a difference-forming input."""
    if isinstance(e, OpAmp):
        return (e.plus, e.minus)
    if isinstance(e, BjtPi):
        return (e.base, e.emitter)
    if isinstance(e, (Vcvs, Vccs)):
        return (e.cp, e.cn)
    return ()


def _drive_terminals(e) -> tuple[str, ...]:
    """Terminals that only deliver output (collector/drain-like); feeding
    the feedback signal back into one of these forms no input difference."""
    if isinstance(e, OpAmp):
        return (e.out,)
    if isinstance(e, BjtPi):
        return (e.collector,)
    if isinstance(e, (Vcvs, Vccs)):
        return (e.n1, e.n2)
    return ()


def _conduction_terminals(e) -> tuple[str, ...]:
    """Terminals of the path that carries the element's output current."""
    if isinstance(e, BjtPi):
        return (e.collector, e.emitter)
    if isinstance(e, OpAmp):
        return (e.out,)
    if isinstance(e, (Vcvs, Vccs)):
        return (e.n1, e.n2)
    return ()


@dataclass(frozen=True)
class _Classification:
    topology: FeedbackTopology
    mix_node: str | None  # feedback attachment on the input side
    sense_node: str | None  # feedback attachment on the output side


def _require_annotations(circuit: Circuit):
    ann = circuit.annotations
    if ann.input_port is None or ann.output_port is None:
        raise UnclassifiableTopology("input and output ports must be annotated")
    if not ann.feedback_elements:
        raise UnclassifiableTopology("no feedback elements annotated")
    missing = ann.feedback_elements - circuit.names()
    if missing:
        raise UnclassifiableTopology(f"unknown feedback elements {sorted(missing)}")


def _classify(circuit: Circuit) -> _Classification:
    _require_annotations(circuit)
    ann = circuit.annotations
    i_plus, i_minus = ann.input_port
    o_plus, o_minus = ann.output_port

    fb_nodes: set[str] = set()
    for name in ann.feedback_elements:
        fb_nodes.update(circuit.element(name).terminals)
    forward = [e for e in circuit.elements if e.name not in ann.feedback_elements]

    # Output side: voltage sensed at the output node itself, or current
    # sensed in series with the conduction path of the device driving it.
    sense_node: str | None = None
    if o_plus in fb_nodes:
        output_sense = Mixing.SHUNT
        sense_node = o_plus
    else:
        hits: set[str] = set()
        for e in forward:
            conduction = _conduction_terminals(e)
            if o_plus in conduction:
                hits.update((set(conduction) & fb_nodes) - {o_plus, GROUND})
        if hits:
            output_sense = Mixing.SERIES
            sense_node = sorted(hits)[0]
        else:
            raise UnclassifiableTopology(
                "feedback network is not connected to the output port or its branch"
            )

    # Input side: current summed at the input node, voltage compared through
    # a difference-forming terminal, or (excluded) returned into a pure
    # drive terminal such as a collector.
    validity = Validity.VALID
    mix_node: str | None = None
    if i_plus in fb_nodes:
        input_mix = Mixing.SHUNT
        mix_node = i_plus
    else:
        comparison: set[str] = set()
        drive: set[str] = set()
        for e in forward:
            terms = _comparison_terminals(e)
            if i_plus in terms:
                comparison.update(terms)
                drive.update(_drive_terminals(e))
        if not comparison:
            raise UnclassifiableTopology(
                "no difference-forming device found at the input port"
            )
        candidates = fb_nodes - {i_plus, i_minus, o_plus, o_minus, GROUND}
        series_hits = sorted(candidates & (comparison - {i_plus}))
        drive_hits = sorted(candidates & drive)
        if series_hits:
            input_mix = Mixing.SERIES
            mix_node = series_hits[0]
        elif drive_hits:
            input_mix = Mixing.SERIES
            mix_node = drive_hits[0]
            validity = Validity.IRRELEVANT
        else:
            raise UnclassifiableTopology(
                "feedback network does not reach the input comparison"
            )

    topo = FeedbackTopology(input_mix, output_sense, validity)
    return _Classification(topo, mix_node, sense_node)


def classify_topology(circuit: Circuit) -> FeedbackTopology:
    """Classify the annotated feedback connection as series/shunt at each
    port; feedback returned into a collector-like drive terminal is flagged
    Irrelevant."""
    return _classify(circuit).topology


def feedback_ports(circuit: Circuit) -> tuple[tuple[str, str], tuple[str, str]]:
    """Node pairs through which the feedback network faces the input side
    and the output side of the amplifier."""
    ann = circuit.annotations
    cls = _classify(circuit)
    i_minus = ann.input_port[1]
    o_minus = ann.output_port[1]
    input_side = (cls.mix_node, i_minus if cls.mix_node != i_minus else GROUND)
    output_side = (cls.sense_node, o_minus if cls.sense_node != o_minus else GROUND)
    return input_side, output_side


# --------------------------------------------------------------------------
# Loading extraction (measured on the isolated feedback network)
# --------------------------------------------------------------------------

def _with_elements(fb: LinearCircuit, extra) -> LinearCircuit:
    nodes = set(fb.nodes) | {GROUND}
    for e in extra:
        nodes.update(e.terminals)
    return LinearCircuit(frozenset(nodes), fb.elements + tuple(extra), fb.provenance)


def loading_effect(
    fb: LinearCircuit,
    topo: FeedbackTopology,
    input_port: tuple[str, str],
    output_port: tuple[str, str],
) -> LoadingModel:
    """Loading the feedback network presents to the forward amplifier.

    The opposite port is shorted when its mixing is shunt and left open when
    series; f is measured by exciting the sensed output quantity with a unit
    source and reading the quantity delivered to the input side.
    """
    for e in fb.elements:
        if not isinstance(e, Resistor):
            raise ValueError("feedback network must be purely resistive")

    def dpi(port, shorted):
        probe = fb
        if shorted is not None:
            probe = _with_elements(fb, [VSource("__short", shorted[0], shorted[1], 0.0)])
        return mna.driving_point_impedance(probe, port)

    r_if = dpi(input_port, output_port if topo.output_sense is Mixing.SHUNT else None)
    r_of = dpi(output_port, input_port if topo.input_mix is Mixing.SHUNT else None)

    # Excitation of the sensed quantity: unit current into the output-side
    # high node for series sensing, unit voltage across the port for shunt.
    if topo.output_sense is Mixing.SERIES:
        excitation = ISource("__excite", output_port[1], output_port[0], 1.0)
    else:
        excitation = VSource("__excite", output_port[0], output_port[1], 1.0)

    if topo.input_mix is Mixing.SHUNT:
        short = VSource("__mix_short", input_port[0], input_port[1], 0.0)
        probe = _with_elements(fb, [excitation, short])
        solution = mna.solve_circuit(probe)
        f = -solution.branch_currents["__mix_short"]
    else:
        probe = _with_elements(fb, [excitation])
        solution = mna.solve_circuit(probe)
        f = solution.across(input_port)

    return LoadingModel(R_if=r_if, R_of=r_of, f=f)


def loading_of_circuit(circuit: Circuit) -> LoadingModel:
    """Classify, isolate the feedback network and measure its loading."""
    cls = _classify(circuit)
    input_side, output_side = feedback_ports(circuit)
    fb = restrict(linearize(circuit), circuit.annotations.feedback_elements)
    return loading_effect(fb, cls.topology, input_side, output_side)


# --------------------------------------------------------------------------
# Closed forms (evaluated exactly as printed)
# --------------------------------------------------------------------------

def branch_current_openloop(p: AmplifierParams) -> float:
    """Open-loop output-branch current per volt of input, case 1."""
    return p.K / (p.R1 + (p.r_out + p.r_pi) / (p.beta + 1.0))


def one_plus_af_case1(p: AmplifierParams) -> float:
    branch = (p.r_out + p.r_pi) / (p.beta + 1.0)
    return (p.R1 * (p.K + 1.0) + branch) / (p.R1 + branch)


def one_plus_af_case2(p: AmplifierParams) -> float:
    return 1.0 + p.K * p.R1 / (p.R2 + (p.r_out + p.r_pi) / p.beta)


def branch_resistance_feedback(p: AmplifierParams, case: int) -> float:
    """Output-branch resistance boosted by the loop gain (R_bf)."""
    if case == 1:
        return (p.R1 + (p.r_out + p.r_pi) / (p.beta + 1.0)) * one_plus_af_case1(p)
    if case == 2:
        return (p.R2 + (p.r_out + p.r_pi) / p.beta) * one_plus_af_case2(p)
    raise ValueError("case must be 1 or 2")


def rx_from_branch_case2(p: AmplifierParams) -> float:
    """R_X recovered as R_bf - R2 (case 2); requires a finite R2."""
    if math.isinf(p.R2):
        raise ValueError("R2 must be finite to subtract it from R_bf")
    return branch_resistance_feedback(p, 2) - p.R2


def degeneration_rx(r_o: float, g_m: float, beta: float, R_E: float, R_S: float) -> float:
    """Output resistance of a degenerated stage seen at the collector."""
    num = 1.0 + g_m * R_E + g_m * R_S / beta
    den = 1.0 + g_m * R_E / beta + g_m * R_S / beta
    return r_o * num / den


def rx_case1_via_degeneration(p: AmplifierParams) -> float:
    """Case-1 R_X with the boosted branch substituted for the emitter
    degeneration; kept distinct because the printed closed form below is
    not algebraically equal to this substitution."""
    return degeneration_rx(p.r_o, p.g_m, p.beta, branch_resistance_feedback(p, 1), p.r_out)


def closed_form_rx_case1(p: AmplifierParams) -> float:
    """Approximate case-1 R_X (collector output, emitter-sensed)."""
    core = p.R1 * (p.K + 1.0) * (p.beta + 1.0)
    num = core + 2.0 * p.r_out + 2.0 * p.r_pi
    den = (core + p.r_out * (p.beta + 1.0) + p.r_pi * (p.beta + 1.0)) / p.beta
    return p.r_o * num / den


def simplified_rx_case1(p: AmplifierParams) -> float:
    """Further simplification of the case-1 closed form; meaningful only
    when simplification_holds_case1 is true."""
    t = p.R1 * p.g_m * (p.K + 1.0)
    return p.r_o * (1.0 + t) / (1.0 + t / p.beta)


def simplification_holds_case1(p: AmplifierParams, ratio: float = DOMINANCE_RATIO) -> bool:
    """Validity predicate of the simplified case-1 form:
    R1 (beta+1)(K+1) must dominate r_out (beta+1) + r_pi."""
    return p.R1 * (p.beta + 1.0) * (p.K + 1.0) >= ratio * (
        p.r_out * (p.beta + 1.0) + p.r_pi
    )


def exact_rx_case1(p: AmplifierParams) -> float:
    """Exact case-1 R_X (matches the nodal solution of the case-1 model)."""
    u = (p.K + 1.0) / (p.r_out + p.r_pi)
    return (p.r_o * (1.0 + p.R1 * (p.beta + 1.0) * u) + p.R1) / (1.0 + p.R1 * u)


def closed_form_rx_case2(p: AmplifierParams) -> float:
    """Approximate case-2 R_X (emitter output, collector-sensed)."""
    return (p.R1 * p.K * p.beta + p.r_out + p.r_pi) / p.beta


def exact_rx_case2(p: AmplifierParams) -> float:
    """Exact case-2 R_X (matches the nodal solution of the case-2 model)."""
    s = p.r_out + p.r_pi
    return (p.r_o * p.R1 * p.K * p.beta + p.r_o * s + p.R1 * s) / (p.r_o * p.beta + s)


def output_resistance(R_X: float, R2: float) -> float:
    """Overall output resistance R_X parallel R2; infinities allowed."""
    if math.isinf(R_X):
        return R2
    if math.isinf(R2):
        return R_X
    return R_X * R2 / (R_X + R2)


def analyze_case(p: AmplifierParams, case: int) -> FeedbackAnalysis:
    """Closed-loop summary of one output-series case: both cases are
    series-series, loaded by the single sense resistor R1."""
    if case not in (1, 2):
        raise ValueError("case must be 1 or 2")
    topo = FeedbackTopology(Mixing.SERIES, Mixing.SERIES, Validity.VALID)
    loading = LoadingModel(R_if=p.R1, R_of=p.R1, f=p.R1)
    one_plus_af = one_plus_af_case1(p) if case == 1 else one_plus_af_case2(p)
    r_bf = branch_resistance_feedback(p, case) if case == 1 or math.isfinite(p.R2) else math.inf
    r_x = exact_rx_case1(p) if case == 1 else exact_rx_case2(p)
    return FeedbackAnalysis(
        topology=topo,
        loading=loading,
        one_plus_af=one_plus_af,
        R_bf=r_bf,
        R_X=r_x,
        R_out=output_resistance(r_x, p.R2),
    )
