"""SPICE-subset netlist parser and elaborator for linear small-signal circuits.

Supported element cards (one per logical line, ``+`` continues a line,
``*`` starts a comment line):

    Rname  a b  value            resistor (ohm)
    Cname  a b  value            capacitor (farad)
    Lname  a b  value            inductor (henry)
    Vname  a b  [dc] [AC [mag]]  independent voltage source
    Iname  a b  [dc] [AC [mag]]  independent current source
    Ename  a b c d  gain         VCVS, drives (a,b), senses (c,d)
    Gname  a b c d  gm           VCCS, drives (a,b), senses (c,d)
    Fname  a b  Vctrl  gain      CCCS, controlled by current through Vctrl
    Hname  a b  Vctrl  rtrans    CCVS, controlled by current through Vctrl
    Xname  n1 n2 ... subname     subcircuit instance

Directives: ``.param NAME=VALUE``, ``.subckt NAME pins... / .ends``,
``.end``.  Other dot-directives are skipped with a warning so netlists
exported from other simulators still load.

Values take standard magnitude suffixes (t g meg k m u n p f, case
insensitive) plus optional trailing unit letters after a suffix
(``2.2uF``, ``1kOhm``).  A value may also be a parameter reference,
written ``{name}`` or as a bare identifier, resolved at elaboration.

Names are case-insensitive.  Node ``0`` is ground; ``gnd`` is accepted
as an alias.  Elaboration flattens subcircuit instances using dot-joined
paths: node ``net5`` inside instance ``X1`` becomes ``X1.net5`` and
element ``R1`` becomes ``X1.R1``.  The element kind of a flattened name
is read from the first letter of its last dot segment, so a flat netlist
re-parses to the same circuit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class NetlistError(Exception):
    """Base class for netlist parsing/elaboration failures."""


class MalformedNumber(NetlistError):
    pass


class NetlistSyntaxError(NetlistError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateElement(NetlistSyntaxError):
    pass


class UnknownElementPrefix(NetlistSyntaxError):
    pass


class UnknownSubcircuit(NetlistError):
    pass


class RecursiveSubcircuit(NetlistError):
    pass


class UnresolvedParam(NetlistError):
    pass


class ElementKind(Enum):
    RESISTOR = "R"
    CAPACITOR = "C"
    INDUCTOR = "L"
    VSOURCE = "V"
    ISOURCE = "I"
    VCVS = "E"
    VCCS = "G"
    CCCS = "F"
    CCVS = "H"

    @property
    def prefix(self) -> str:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "ElementKind":
        # Flattened names like "X1.R1" carry the kind on the last segment.
        letter = name.rsplit(".", 1)[-1][:1].upper()
        try:
            return cls(letter)
        except ValueError:
            raise UnknownElementPrefix(f"unknown element prefix {letter!r} in {name!r}") from None


# Elements whose terminals constrain each other's voltages; used for the
# floating-node check.  Current-source terminals (I, G, F outputs and all
# sense pairs) do not tie a node down.
_CONDUCTIVE_KINDS = frozenset({
    ElementKind.RESISTOR, ElementKind.CAPACITOR, ElementKind.INDUCTOR,
    ElementKind.VSOURCE, ElementKind.VCVS, ElementKind.CCVS,
})

_SUFFIXES = {
    "t": 1e12, "g": 1e9, "meg": 1e6, "k": 1e3,
    "m": 1e-3, "u": 1e-6, "n": 1e-9, "p": 1e-12, "f": 1e-15,
}

_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*$")


def parse_value(token: str) -> float:
    """Parse a SPICE numeric token like ``4.7k``, ``3meg`` or ``2.2uF``.

    Trailing unit letters are ignored only after a recognized magnitude
    suffix; anything else after the numeral is an error.
    """
    m = _NUMBER_RE.match(token)
    if m is None:
        raise MalformedNumber(f"not a number: {token!r}")
    value = float(m.group(0))
    rest = token[m.end():]
    if not rest:
        return value
    lower = rest.lower()
    if lower.startswith("meg"):
        mult, tail = 1e6, rest[3:]
    elif lower[0] in _SUFFIXES:
        mult, tail = _SUFFIXES[lower[0]], rest[1:]
    else:
        raise MalformedNumber(f"unrecognized suffix {rest!r} in {token!r}")
    if tail and not tail.isalpha():
        raise MalformedNumber(f"trailing garbage {tail!r} in {token!r}")
    return value * mult


def _parse_value_or_ref(token: str, line: int) -> float | str:
    """A value token is either a number or a parameter reference."""
    if token.startswith("{") and token.endswith("}") and len(token) > 2:
        return token[1:-1].lower()
    try:
        return parse_value(token)
    except MalformedNumber:
        if _IDENT_RE.match(token):
            return token.lower()
        raise NetlistSyntaxError(f"bad value token {token!r}", line) from None


@dataclass
class Element:
    name: str
    kind: ElementKind
    nodes: list[str]
    value: float | str          # str until parameters are resolved
    ac_magnitude: float = 0.0   # independent sources only
    control_element: str | None = None  # CCCS/CCVS: name of sensed V source


@dataclass
class Instance:
    name: str
    nodes: list[str]
    subckt: str
    line: int = 0


@dataclass
class Subcircuit:
    name: str
    pins: list[str]
    elements: list[Element] = field(default_factory=list)
    instances: list[Instance] = field(default_factory=list)


class NodeTable:
    """Bijective node-name <-> dense-index map; ground '0' is index 0."""

    def __init__(self):
        self._index: dict[str, int] = {"0": 0}
        self._names: list[str] = ["0"]

    def add(self, name: str) -> int:
        key = name.lower()
        idx = self._index.get(key)
        if idx is None:
            idx = len(self._names)
            self._index[key] = idx
            self._names.append(name)
        return idx

    def index_of(self, name: str) -> int:
        try:
            return self._index[name.lower()]
        except KeyError:
            raise KeyError(f"unknown node {name!r}") from None

    def name_of(self, index: int) -> str:
        return self._names[index]

    def __contains__(self, name: str) -> bool:
        return name.lower() in self._index

    def __len__(self) -> int:
        return len(self._names)

    def names(self) -> list[str]:
        return list(self._names)

    def non_ground(self) -> list[str]:
        return self._names[1:]

    def __eq__(self, other) -> bool:
        return isinstance(other, NodeTable) and self._names == other._names

    def __repr__(self) -> str:
        return f"NodeTable({self._names!r})"


@dataclass
class Netlist:
    title: str
    elements: list[Element] = field(default_factory=list)
    instances: list[Instance] = field(default_factory=list)
    params: dict[str, float | str] = field(default_factory=dict)
    subcircuits: dict[str, Subcircuit] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.nodes = self._build_node_table()

    def _build_node_table(self) -> NodeTable:
        table = NodeTable()
        for elem in self.elements:
            for node in elem.nodes:
                table.add(node)
        for inst in self.instances:
            for node in inst.nodes:
                table.add(node)
        return table

    @property
    def is_flat(self) -> bool:
        return not self.instances and not self.subcircuits

    def element(self, name: str) -> Element:
        key = name.lower()
        for elem in self.elements:
            if elem.name.lower() == key:
                return elem
        raise KeyError(f"unknown element {name!r}")


def _normalize_node(token: str) -> str:
    return "0" if token.lower() in ("0", "gnd") else token


class _Lines:
    """Logical-line iterator: strips comments, merges continuations."""

    def __init__(self, source: str):
        self.logical: list[tuple[int, str]] = []
        physical = source.splitlines()
        if not physical:
            raise NetlistSyntaxError("empty netlist source")
        self.title = physical[0].strip()
        for lineno, raw in enumerate(physical[1:], start=2):
            stripped = raw.strip()
            if not stripped or stripped.startswith("*"):
                continue
            if stripped.startswith("+"):
                if not self.logical:
                    raise NetlistSyntaxError("continuation with nothing to continue", lineno)
                prev_no, prev = self.logical[-1]
                self.logical[-1] = (prev_no, prev + " " + stripped[1:].strip())
            else:
                self.logical.append((lineno, stripped))


_PARAM_ASSIGN_RE = re.compile(r"([A-Za-z_][A-Za-z_0-9]*)\s*=\s*(\S+)")


def parse(source: str) -> Netlist:
    """Parse netlist text.  The result may still contain subcircuit
    definitions, instances and unresolved parameter references; run
    :func:`elaborate` to obtain a flat circuit."""
    lines = _Lines(source)
    net = Netlist(title=lines.title)
    seen: dict[str, int] = {}
    subckt: Subcircuit | None = None
    sub_seen: dict[str, int] = {}

    for lineno, text in lines.logical:
        tokens = text.split()
        word = tokens[0].lower()

        if word.startswith("."):
            if word == ".end":
                break
            if word == ".param":
                for name, val in _PARAM_ASSIGN_RE.findall(text[len(".param"):]):
                    net.params[name.lower()] = _parse_value_or_ref(val, lineno)
                if not _PARAM_ASSIGN_RE.search(text[len(".param"):]):
                    raise NetlistSyntaxError("empty .param directive", lineno)
                continue
            if word == ".subckt":
                if subckt is not None:
                    raise NetlistSyntaxError("nested .subckt definitions are not supported", lineno)
                if len(tokens) < 3:
                    raise NetlistSyntaxError(".subckt needs a name and at least one pin", lineno)
                subckt = Subcircuit(name=tokens[1], pins=[_normalize_node(t) for t in tokens[2:]])
                sub_seen = {}
                continue
            if word == ".ends":
                if subckt is None:
                    raise NetlistSyntaxError(".ends without .subckt", lineno)
                net.subcircuits[subckt.name.lower()] = subckt
                subckt = None
                continue
            net.warnings.append(f"line {lineno}: ignored directive {tokens[0]!r}")
            continue

        scope_seen = sub_seen if subckt is not None else seen
        name = tokens[0]
        key = name.lower()
        if key in scope_seen:
            raise DuplicateElement(
                f"element {name!r} already defined on line {scope_seen[key]}", lineno)
        scope_seen[key] = lineno

        if key[0] == "x" and "." not in key:
            if len(tokens) < 3:
                raise NetlistSyntaxError("instance needs nodes and a subcircuit name", lineno)
            inst = Instance(name=name, nodes=[_normalize_node(t) for t in tokens[1:-1]],
                            subckt=tokens[-1], line=lineno)
            (subckt.instances if subckt is not None else net.instances).append(inst)
            continue

        elem = _parse_element(name, tokens, lineno)
        (subckt.elements if subckt is not None else net.elements).append(elem)

    if subckt is not None:
        raise NetlistSyntaxError(f".subckt {subckt.name!r} is missing its .ends")
    net.nodes = net._build_node_table()
    return net


def _parse_element(name: str, tokens: list[str], lineno: int) -> Element:
    try:
        kind = ElementKind.from_name(name)
    except UnknownElementPrefix as exc:
        raise UnknownElementPrefix(str(exc), lineno) from None

    if kind in (ElementKind.VCVS, ElementKind.VCCS):
        if len(tokens) != 6:
            raise NetlistSyntaxError(
                f"{kind.prefix}-element needs 4 nodes and a gain", lineno)
        nodes = [_normalize_node(t) for t in tokens[1:5]]
        value = _parse_value_or_ref(tokens[5], lineno)
        return Element(name, kind, nodes, value)

    if kind in (ElementKind.CCCS, ElementKind.CCVS):
        if len(tokens) != 5:
            raise NetlistSyntaxError(
                f"{kind.prefix}-element needs 2 nodes, a controlling V source and a gain", lineno)
        nodes = [_normalize_node(t) for t in tokens[1:3]]
        value = _parse_value_or_ref(tokens[4], lineno)
        return Element(name, kind, nodes, value, control_element=tokens[3])

    if len(tokens) < 3:
        raise NetlistSyntaxError("element needs two nodes", lineno)
    nodes = [_normalize_node(t) for t in tokens[1:3]]
    rest = tokens[3:]

    if kind in (ElementKind.VSOURCE, ElementKind.ISOURCE):
        value: float | str = 0.0
        ac = 0.0
        i = 0
        while i < len(rest):
            tok = rest[i].lower()
            if tok == "ac":
                if i + 1 < len(rest):
                    ac = parse_value(rest[i + 1])
                    i += 2
                else:
                    ac = 1.0
                    i += 1
            elif tok == "dc":
                if i + 1 >= len(rest):
                    raise NetlistSyntaxError("DC keyword needs a value", lineno)
                value = _parse_value_or_ref(rest[i + 1], lineno)
                i += 2
            elif i == 0:
                value = _parse_value_or_ref(rest[i], lineno)
                i += 1
            else:
                raise NetlistSyntaxError(f"unexpected token {rest[i]!r}", lineno)
        if ac < 0:
            raise NetlistSyntaxError("AC magnitude must be >= 0", lineno)
        return Element(name, kind, nodes, value, ac_magnitude=ac)

    if len(rest) != 1:
        raise NetlistSyntaxError(f"{kind.prefix}-element needs exactly one value", lineno)
    value = _parse_value_or_ref(rest[0], lineno)
    if isinstance(value, float) and value <= 0:
        raise NetlistSyntaxError(
            f"{kind.prefix}-element value must be strictly positive", lineno)
    return Element(name, kind, nodes, value)


def _resolve_params(params: dict[str, float | str]) -> dict[str, float]:
    resolved: dict[str, float] = {k: v for k, v in params.items() if isinstance(v, float)}
    pending = {k: v for k, v in params.items() if isinstance(v, str)}
    while pending:
        progressed = False
        for key in list(pending):
            ref = pending[key]
            if ref in resolved:
                resolved[key] = resolved[ref]
                del pending[key]
                progressed = True
        if not progressed:
            names = ", ".join(sorted(pending))
            raise UnresolvedParam(f"cannot resolve parameter(s): {names}")
    return resolved


def _resolve_value(elem: Element, params: dict[str, float]) -> float:
    if isinstance(elem.value, float):
        return elem.value
    try:
        return params[elem.value]
    except KeyError:
        raise UnresolvedParam(
            f"element {elem.name!r} references undefined parameter {elem.value!r}") from None


def elaborate(net: Netlist) -> Netlist:
    """Flatten subcircuit instances, substitute parameters and build the
    dense node table.  Idempotent on already-flat netlists."""
    params = _resolve_params(net.params)
    flat_elements: list[Element] = []

    def expand_scope(elements: list[Element], instances: list[Instance],
                     prefix: str, pin_map: dict[str, str], stack: tuple[str, ...]):
        def map_node(node: str) -> str:
            if node == "0":
                return "0"
            mapped = pin_map.get(node.lower())
            if mapped is not None:
                return mapped
            return prefix + node

        for elem in elements:
            value = _resolve_value(elem, params)
            if elem.kind in (ElementKind.RESISTOR, ElementKind.CAPACITOR,
                             ElementKind.INDUCTOR) and value <= 0:
                raise NetlistSyntaxError(
                    f"element {prefix + elem.name!r} value must be strictly positive")
            ctrl = elem.control_element
            flat_elements.append(Element(
                name=prefix + elem.name,
                kind=elem.kind,
                nodes=[map_node(n) for n in elem.nodes],
                value=value,
                ac_magnitude=elem.ac_magnitude,
                control_element=prefix + ctrl if ctrl else None,
            ))
        for inst in instances:
            key = inst.subckt.lower()
            if key not in net.subcircuits:
                raise UnknownSubcircuit(f"instance {prefix + inst.name!r} references "
                                        f"undefined subcircuit {inst.subckt!r}")
            if key in stack:
                raise RecursiveSubcircuit(
                    f"subcircuit {inst.subckt!r} instantiates itself "
                    f"(via {prefix + inst.name!r})")
            sub = net.subcircuits[key]
            if len(inst.nodes) != len(sub.pins):
                raise NetlistSyntaxError(
                    f"instance {prefix + inst.name!r} has {len(inst.nodes)} nodes, "
                    f"subcircuit {sub.name!r} has {len(sub.pins)} pins", inst.line)
            inner_pins = {pin.lower(): map_node(n)
                          for pin, n in zip(sub.pins, inst.nodes)}
            expand_scope(sub.elements, sub.instances,
                         prefix + inst.name + ".", inner_pins, stack + (key,))

    expand_scope(net.elements, net.instances, "", {}, ())

    seen: set[str] = set()
    for elem in flat_elements:
        key = elem.name.lower()
        if key in seen:
            raise DuplicateElement(
                f"flattened element name {elem.name!r} collides with an existing element")
        seen.add(key)

    flat = Netlist(title=net.title, elements=flat_elements,
                   params=params, warnings=list(net.warnings))
    _validate_controls(flat)
    flat.warnings.extend(_floating_node_warnings(flat))
    return flat


def _validate_controls(net: Netlist):
    vsources = {e.name.lower() for e in net.elements if e.kind is ElementKind.VSOURCE}
    for elem in net.elements:
        if elem.kind in (ElementKind.CCCS, ElementKind.CCVS):
            if elem.control_element is None or elem.control_element.lower() not in vsources:
                raise NetlistSyntaxError(
                    f"element {elem.name!r} needs an existing V-source as control, "
                    f"got {elem.control_element!r}")


def _floating_node_warnings(net: Netlist) -> list[str]:
    """Non-ground nodes must reach ground through voltage-constraining
    elements; anything else only stays solvable thanks to gmin."""
    adjacency: dict[int, set[int]] = {}
    for elem in net.elements:
        if elem.kind not in _CONDUCTIVE_KINDS:
            continue
        a = net.nodes.index_of(elem.nodes[0])
        b = net.nodes.index_of(elem.nodes[1])
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)
    reached = {0}
    frontier = [0]
    while frontier:
        here = frontier.pop()
        for nxt in adjacency.get(here, ()):
            if nxt not in reached:
                reached.add(nxt)
                frontier.append(nxt)
    return [f"node {net.nodes.name_of(i)!r} has no conductive path to ground"
            for i in range(1, len(net.nodes)) if i not in reached]


def render(net: Netlist) -> str:
    """Canonical flat-netlist text; re-parsing reproduces the elements."""
    if not net.is_flat:
        raise ValueError("render() expects an elaborated netlist")
    lines = [net.title]
    for elem in net.elements:
        if isinstance(elem.value, str):
            raise ValueError(f"element {elem.name!r} still has an unresolved value")
        parts = [elem.name, *elem.nodes]
        if elem.kind in (ElementKind.CCCS, ElementKind.CCVS):
            parts.append(elem.control_element or "?")
        parts.append(repr(float(elem.value)))
        if elem.kind in (ElementKind.VSOURCE, ElementKind.ISOURCE):
            parts.extend(["AC", repr(elem.ac_magnitude)])
        lines.append(" ".join(parts))
    lines.append(".end")
    return "\n".join(lines) + "\n"
