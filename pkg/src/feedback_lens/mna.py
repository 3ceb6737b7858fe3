"""Modified nodal analysis: assemble and solve linear circuit equations.

One KCL row per non-ground node plus one auxiliary current unknown per
voltage-defined branch (independent or controlled voltage source).  Systems
here are tens of unknowns at most, so the solver is a dense LU with scaled
partial pivoting and a single iterative-refinement step.

Stamping and factorization run in numpy's extended precision (80-bit on
x86): summing conductances into a node diagonal absorbs the low bits of the
smallest one, and recovering a branch current through the node then loses
eps * (g_max/g_min) relative accuracy, which double precision cannot keep
below 1e-12 over the supported six-decade component range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .netlist import GROUND, ISource, Resistor, Vccs, Vcvs, VSource
from .smallsignal import LinearCircuit, Primitive


class SingularMatrix(Exception):
    """The system has no unique solution: floating sub-circuit or
    contradictory voltage sources."""


class UnknownSource(Exception):
    pass


# Residual target for ||Ax - b||_inf relative to ||b||_inf.
RESIDUAL_RTOL = 1e-9

# Scaled pivot below this is treated as a structurally singular system.
_PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class MnaSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    index: dict[str, int]
    nodes: tuple[str, ...]
    branches: tuple[str, ...]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Solution:
    node_voltages: dict[str, float]
    branch_currents: dict[str, float]

    def voltage(self, node: str) -> float:
        if node == GROUND:
            return 0.0
        return self.node_voltages[node]

    def across(self, port: tuple[str, str]) -> float:
        return self.voltage(port[0]) - self.voltage(port[1])


def assemble(lc: LinearCircuit) -> MnaSystem:
    """Stamp the standard MNA matrix for a linearized circuit."""
    nodes = tuple(sorted(lc.nodes - {GROUND}))
    node_row = {n: i for i, n in enumerate(nodes)}
    branches = tuple(e.name for e in lc.elements if isinstance(e, (VSource, Vcvs)))
    branch_row = {name: len(nodes) + i for i, name in enumerate(branches)}

    dim = len(nodes) + len(branches)
    a = np.zeros((dim, dim), dtype=np.longdouble)
    b = np.zeros(dim, dtype=np.longdouble)

    def row(node: str) -> int | None:
        return None if node == GROUND else node_row[node]

    def stamp(i: int | None, j: int | None, value: float):
        if i is not None and j is not None:
            a[i, j] += value

    one = np.longdouble(1.0)
    for e in lc.elements:
        if isinstance(e, Resistor):
            g = one / np.longdouble(e.ohms)
            p, n = row(e.n1), row(e.n2)
            stamp(p, p, g)
            stamp(n, n, g)
            stamp(p, n, -g)
            stamp(n, p, -g)
        elif isinstance(e, ISource):
            # e.amps flows n1 -> n2 through the source.
            p, n = row(e.n1), row(e.n2)
            if p is not None:
                b[p] -= e.amps
            if n is not None:
                b[n] += e.amps
        elif isinstance(e, Vccs):
            p, n = row(e.n1), row(e.n2)
            cp, cn = row(e.cp), row(e.cn)
            stamp(p, cp, e.gm)
            stamp(p, cn, -e.gm)
            stamp(n, cp, -e.gm)
            stamp(n, cn, e.gm)
        elif isinstance(e, (VSource, Vcvs)):
            k = branch_row[e.name]
            p, n = row(e.n1), row(e.n2)
            # Branch current flows n1 -> n2 through the source.
            stamp(p, k, 1.0)
            stamp(n, k, -1.0)
            stamp(k, p, 1.0)
            stamp(k, n, -1.0)
            if isinstance(e, VSource):
                b[k] = e.volts
            else:
                cp, cn = row(e.cp), row(e.cn)
                stamp(k, cp, -e.gain)
                stamp(k, cn, e.gain)
        else:
            raise TypeError(f"cannot stamp element {e!r}")

    index = {f"V({n})": i for n, i in node_row.items()}
    index.update({f"I({name})": i for name, i in branch_row.items()})
    return MnaSystem(a, b, index, nodes, branches)


def _lu_factor(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """In-place LU with implicit row scaling; raises SingularMatrix when the
    best available scaled pivot is numerically zero."""
    n = a.shape[0]
    lu = a.copy()
    perm = np.arange(n)
    scale = np.max(np.abs(lu), axis=1)
    if np.any(scale == 0.0):
        raise SingularMatrix("zero row in system matrix")
    for k in range(n):
        ratios = np.abs(lu[k:, k]) / scale[k:]
        p = k + int(np.argmax(ratios))
        if ratios[p - k] < _PIVOT_RTOL:
            raise SingularMatrix("pivot vanished during elimination")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            scale[[k, p]] = scale[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def _lu_solve(lu: np.ndarray, perm: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = lu.shape[0]
    x = b[perm].copy()
    for k in range(1, n):
        x[k] -= lu[k, :k] @ x[:k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x


def solve(system: MnaSystem) -> Solution:
    """Dense LU solve with one refinement pass when the residual misses
    ``RESIDUAL_RTOL``."""
    if system.dimension == 0:
        return Solution({}, {})
    a, b = system.matrix, system.rhs
    lu, perm = _lu_factor(a)
    x = _lu_solve(lu, perm, b)
    b_norm = np.max(np.abs(b)) if b.size else 0.0
    residual = np.max(np.abs(a @ x - b))
    if residual > RESIDUAL_RTOL * max(b_norm, 1e-300):
        x = x + _lu_solve(lu, perm, b - a @ x)

    voltages = {n: float(x[system.index[f"V({n})"]]) for n in system.nodes}
    currents = {name: float(x[system.index[f"I({name})"]]) for name in system.branches}
    return Solution(voltages, currents)


def solve_circuit(lc: LinearCircuit) -> Solution:
    return solve(assemble(lc))


def zero_independent_sources(lc: LinearCircuit) -> LinearCircuit:
    """Voltage sources become shorts (value 0), current sources open."""
    elements: list[Primitive] = []
    for e in lc.elements:
        if isinstance(e, VSource):
            elements.append(replace(e, volts=0.0))
        elif isinstance(e, ISource):
            continue
        else:
            elements.append(e)
    nodes = {GROUND}
    for e in elements:
        nodes.update(e.terminals)
    return LinearCircuit(frozenset(nodes), tuple(elements), dict(lc.provenance))


_TEST_SOURCE = "__dpi_test"


def driving_point_impedance(lc: LinearCircuit, port: tuple[str, str]) -> float:
    """Impedance seen into ``port`` with all independent sources zeroed.

    A unit test voltage is applied across the port and the delivered current
    measured; an open port reports ``math.inf``.
    """
    zeroed = zero_independent_sources(lc)
    test = VSource(_TEST_SOURCE, port[0], port[1], 1.0)
    probed = LinearCircuit(
        zeroed.nodes | {port[0], port[1], GROUND},
        zeroed.elements + (test,),
        zeroed.provenance,
    )
    solution = solve(assemble(probed))
    delivered = -solution.branch_currents[_TEST_SOURCE]
    if delivered == 0.0:
        return math.inf
    return 1.0 / delivered


def transfer(lc: LinearCircuit, source: str, observe: tuple[str, str]) -> float:
    """Voltage across ``observe`` per unit value of the named independent
    source, all other independent sources zeroed."""
    target = None
    for e in lc.elements:
        if e.name == source:
            target = e
            break
    if not isinstance(target, (VSource, ISource)):
        raise UnknownSource(f"{source!r} is not an independent source")

    elements: list[Primitive] = []
    for e in lc.elements:
        if e.name == source:
            if isinstance(e, VSource):
                elements.append(replace(e, volts=1.0))
            else:
                elements.append(replace(e, amps=1.0))
        elif isinstance(e, VSource):
            elements.append(replace(e, volts=0.0))
        elif isinstance(e, ISource):
            continue
        else:
            elements.append(e)
    probed = LinearCircuit(lc.nodes, tuple(elements), dict(lc.provenance))
    solution = solve(assemble(probed))
    return solution.across(observe)
