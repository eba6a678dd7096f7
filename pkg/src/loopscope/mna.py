"""Complex modified nodal analysis: Y(w) x = b for a flat netlist.

Unknowns are the non-ground node voltages followed by branch currents.
Branch rows exist for voltage-defined elements (independent V sources,
VCVS, CCVS) and for inductors, which are stamped in branch form

    V_a - V_b - jwL * I_L = 0

so the w -> 0 limit stays finite.  The stamp pattern depends only on
topology and element values, never on frequency; assembly fills a dense
complex matrix for one angular frequency at a time.

A small conductance (gmin) from every node to ground keeps nearly
floating nodes solvable, matching common simulator practice.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .netlist import ElementKind, Netlist

GMIN_DEFAULT = 1e-12

_RESIDUAL_RTOL = 1e-9


class MnaError(Exception):
    pass


class UnknownNode(MnaError):
    pass


class SingularSystem(MnaError):
    """Singular (or numerically hopeless) system; names the unknown whose
    pivot vanished so floating nodes and source loops are identifiable."""

    def __init__(self, label: str, omega: float | None = None):
        self.label = label
        self.omega = omega
        msg = f"singular MNA system at unknown {label!r}"
        if omega is not None:
            msg += f" (omega={omega:g} rad/s)"
        super().__init__(msg)

    def with_omega(self, omega: float) -> "SingularSystem":
        return SingularSystem(self.label, omega)


@dataclass(frozen=True)
class _Stamp:
    row: int
    col: int
    weight: float
    jomega: bool  # True: contributes jw*weight, False: contributes weight


@dataclass(frozen=True)
class _SourceTerm:
    row: int
    value: float  # AC magnitude contribution, phase 0


@dataclass
class MnaPattern:
    """Frequency-independent stamp pattern for one elaborated netlist."""

    n_nodes: int
    dim: int
    node_rows: dict[str, int]        # lowercased node name -> matrix row
    branch_map: dict[str, int]       # lowercased element name -> branch row
    labels: list[str]                # per unknown: node name or "I(elem)"
    stamps: list[_Stamp] = field(default_factory=list)
    source_terms: list[_SourceTerm] = field(default_factory=list)

    def row_of_node(self, node: str) -> int:
        try:
            return self.node_rows[node.lower()]
        except KeyError:
            raise UnknownNode(f"unknown node {node!r}") from None


@dataclass(frozen=True)
class InjectionSpec:
    """Right-hand-side selector: either a unit-style current injected into
    one node (all independent sources zeroed), or the netlist's own AC
    source values."""

    node: str | None = None
    current: float = 1.0

    @classmethod
    def at_node(cls, node: str, current: float = 1.0) -> "InjectionSpec":
        return cls(node=node, current=current)

    @classmethod
    def source_drive(cls) -> "InjectionSpec":
        return cls(node=None)

    @property
    def is_node_injection(self) -> bool:
        return self.node is not None


@dataclass
class ComplexSolution:
    x: np.ndarray
    omega: float | None = None
    residual: float = 0.0


def build_pattern(net: Netlist) -> MnaPattern:
    """Build the MNA stamp pattern; requires an elaborated netlist."""
    if not net.is_flat:
        raise MnaError("netlist must be elaborated before building an MNA pattern")

    node_rows = {net.nodes.name_of(i).lower(): i - 1 for i in range(1, len(net.nodes))}
    n_nodes = len(node_rows)
    labels = [net.nodes.name_of(i) for i in range(1, len(net.nodes))]

    branch_map: dict[str, int] = {}
    for elem in net.elements:
        if elem.kind in (ElementKind.VSOURCE, ElementKind.VCVS,
                         ElementKind.CCVS, ElementKind.INDUCTOR):
            branch_map[elem.name.lower()] = n_nodes + len(branch_map)
            labels.append(f"I({elem.name})")

    pattern = MnaPattern(n_nodes=n_nodes, dim=n_nodes + len(branch_map),
                         node_rows=node_rows, branch_map=branch_map, labels=labels)

    def row(node_name: str) -> int:
        return -1 if node_name == "0" else node_rows[node_name.lower()]

    def put(r: int, c: int, w: float, jomega: bool = False):
        if r >= 0 and c >= 0:
            pattern.stamps.append(_Stamp(r, c, w, jomega))

    for elem in net.elements:
        a = row(elem.nodes[0])
        b = row(elem.nodes[1])
        kind = elem.kind
        val = float(elem.value)

        if kind is ElementKind.RESISTOR:
            g = 1.0 / val
            put(a, a, g); put(b, b, g); put(a, b, -g); put(b, a, -g)
        elif kind is ElementKind.CAPACITOR:
            put(a, a, val, True); put(b, b, val, True)
            put(a, b, -val, True); put(b, a, -val, True)
        elif kind is ElementKind.INDUCTOR:
            k = branch_map[elem.name.lower()]
            put(a, k, 1.0); put(b, k, -1.0)
            put(k, a, 1.0); put(k, b, -1.0)
            put(k, k, -val, True)
        elif kind is ElementKind.VSOURCE:
            k = branch_map[elem.name.lower()]
            put(a, k, 1.0); put(b, k, -1.0)
            put(k, a, 1.0); put(k, b, -1.0)
            pattern.source_terms.append(_SourceTerm(k, elem.ac_magnitude))
        elif kind is ElementKind.ISOURCE:
            # Positive current flows from the first node through the source
            # to the second.
            if a >= 0:
                pattern.source_terms.append(_SourceTerm(a, -elem.ac_magnitude))
            if b >= 0:
                pattern.source_terms.append(_SourceTerm(b, elem.ac_magnitude))
        elif kind is ElementKind.VCVS:
            k = branch_map[elem.name.lower()]
            c = row(elem.nodes[2])
            d = row(elem.nodes[3])
            put(a, k, 1.0); put(b, k, -1.0)
            put(k, a, 1.0); put(k, b, -1.0)
            put(k, c, -val); put(k, d, val)
        elif kind is ElementKind.VCCS:
            c = row(elem.nodes[2])
            d = row(elem.nodes[3])
            put(a, c, val); put(a, d, -val)
            put(b, c, -val); put(b, d, val)
        elif kind is ElementKind.CCCS:
            kc = _control_branch(branch_map, elem.control_element, elem.name)
            put(a, kc, val); put(b, kc, -val)
        elif kind is ElementKind.CCVS:
            k = branch_map[elem.name.lower()]
            kc = _control_branch(branch_map, elem.control_element, elem.name)
            put(a, k, 1.0); put(b, k, -1.0)
            put(k, a, 1.0); put(k, b, -1.0)
            put(k, kc, -val)
    return pattern


def _control_branch(branch_map: dict[str, int], ctrl: str | None, owner: str) -> int:
    if ctrl is None or ctrl.lower() not in branch_map:
        raise MnaError(f"element {owner!r} controlled by unknown source {ctrl!r}")
    return branch_map[ctrl.lower()]


def assemble(pattern: MnaPattern, omega: float, injection: InjectionSpec,
             gmin: float = GMIN_DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Fill Y(omega) and b for one frequency.

    Node-injection runs force every independent source to zero AC value
    first (V sources become shorts, I sources open), then place the
    injected current on the node row with the into-the-node sign.
    """
    if omega <= 0:
        raise MnaError("omega must be > 0")
    Y = np.zeros((pattern.dim, pattern.dim), dtype=np.complex128)
    b = np.zeros(pattern.dim, dtype=np.complex128)
    jw = 1j * omega
    for st in pattern.stamps:
        Y[st.row, st.col] += jw * st.weight if st.jomega else st.weight
    if gmin:
        idx = np.arange(pattern.n_nodes)
        Y[idx, idx] += gmin
    if injection.is_node_injection:
        b[pattern.row_of_node(injection.node)] += injection.current
    else:
        for term in pattern.source_terms:
            b[term.row] += term.value
    return Y, b


def solve(Y: np.ndarray, b: np.ndarray, labels: list[str] | None = None,
          omega: float | None = None) -> ComplexSolution:
    """Dense LU solve with partial pivoting and a residual guarantee of
    ||Yx - b||_inf <= 1e-9 ||b||_inf (one refinement step if needed)."""
    dim = Y.shape[0]
    if Y.shape != (dim, dim) or b.shape != (dim,):
        raise MnaError("shape mismatch between Y and b")

    def label(i: int) -> str:
        return labels[i] if labels and i < len(labels) else f"unknown #{i}"

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(Y)
    diag = np.abs(np.diagonal(lu))
    tiny = np.finfo(np.float64).tiny
    bad = np.flatnonzero(diag < tiny)
    if bad.size:
        raise SingularSystem(label(int(bad[0])), omega)

    x = scipy.linalg.lu_solve((lu, piv), b)
    bnorm = float(np.max(np.abs(b))) if dim else 0.0
    resid = b - Y @ x
    rnorm = float(np.max(np.abs(resid))) if dim else 0.0
    if bnorm and rnorm > _RESIDUAL_RTOL * bnorm:
        x = x + scipy.linalg.lu_solve((lu, piv), resid)
        resid = b - Y @ x
        rnorm = float(np.max(np.abs(resid)))
    if not np.all(np.isfinite(x)) or (bnorm and rnorm > _RESIDUAL_RTOL * bnorm):
        worst = int(np.argmax(np.abs(resid)))
        raise SingularSystem(label(worst), omega)
    return ComplexSolution(x=x, omega=omega, residual=rnorm)
