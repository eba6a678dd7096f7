"""Per-node AC current-injection frequency sweeps on a log-spaced grid.

Each run zeroes every independent source, injects a 1 A current into one
node across the whole grid and records |V| and phase at that node.  With
a 1 A stimulus the magnitude equals the driving-point impedance, and the
stimulus level cancels out of the downstream log-derivative analysis
anyway.  All-nodes mode repeats this for every non-ground node; per-node
failures are collected instead of aborting the audit.
"""

from __future__ import annotations

import fnmatch
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mna import GMIN_DEFAULT, InjectionSpec, MnaPattern, SingularSystem, assemble, build_pattern, solve
from .netlist import Netlist

#: Lower clamp applied to |V| before logs; clamped points are flagged and
#: never become peak candidates.
MAGNITUDE_FLOOR = 1e-300

#: A node voltage below this fraction of the solution's largest entry is
#: solver rounding residue, not signal (ideal-source-driven nodes come
#: back as ~1e-13 of scale noise); such points are clamped and flagged so
#: the log-curvature analysis never differentiates numerical noise.
NOISE_FLOOR_REL = 1e-11


class BadRange(Exception):
    pass


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Uniform-in-log frequency grid, endpoints included."""

    f_start: float
    f_stop: float
    points_per_decade: int
    freqs: np.ndarray
    log_step: float  # uniform spacing of ln(f), == ln(10)/ppd for whole decades

    def __len__(self) -> int:
        return len(self.freqs)

    def __eq__(self, other) -> bool:
        return (isinstance(other, FrequencyGrid)
                and self.f_start == other.f_start
                and self.f_stop == other.f_stop
                and self.points_per_decade == other.points_per_decade
                and np.array_equal(self.freqs, other.freqs))

    def __hash__(self):
        return hash((self.f_start, self.f_stop, self.points_per_decade, len(self.freqs)))


def make_grid(f_start: float = 1.0, f_stop: float = 1e10,
              points_per_decade: int = 100) -> FrequencyGrid:
    """Build a log grid with ``round(ppd*log10(f_stop/f_start)) + 1`` points."""
    if not (0 < f_start < f_stop):
        raise BadRange(f"need 0 < f_start < f_stop, got {f_start!r}, {f_stop!r}")
    if points_per_decade < 10:
        raise BadRange(f"points_per_decade must be >= 10, got {points_per_decade!r}")
    decades = math.log10(f_stop / f_start)
    n = int(round(points_per_decade * decades)) + 1
    if n < 2:
        raise BadRange("frequency range too narrow for this grid density")
    lnf = np.linspace(math.log(f_start), math.log(f_stop), n)
    freqs = np.exp(lnf)
    freqs[0] = f_start
    freqs[-1] = f_stop
    return FrequencyGrid(f_start=f_start, f_stop=f_stop,
                         points_per_decade=points_per_decade,
                         freqs=freqs, log_step=float(lnf[1] - lnf[0]))


@dataclass
class NodeResponse:
    node: str
    grid: FrequencyGrid
    magnitude: np.ndarray        # |V| in volts (== ohms at 1 A), floor applied
    phase: np.ndarray            # radians, kept for diagnostics
    clamped: np.ndarray          # bool, True where the floor kicked in


def inject_node(net: Netlist, pattern: MnaPattern, node: str, grid: FrequencyGrid,
                current: float = 1.0, gmin: float = GMIN_DEFAULT) -> NodeResponse:
    """Sweep one node: assemble and solve at every grid frequency with the
    AC current injected into ``node`` and all sources zeroed."""
    row = pattern.row_of_node(node)
    injection = InjectionSpec.at_node(node, current)
    n = len(grid)
    magnitude = np.empty(n)
    phase = np.empty(n)
    clamped = np.zeros(n, dtype=bool)
    for i in range(n):
        omega = 2.0 * math.pi * grid.freqs[i]
        Y, b = assemble(pattern, omega, injection, gmin=gmin)
        try:
            sol = solve(Y, b, labels=pattern.labels, omega=omega)
        except SingularSystem as exc:
            raise exc.with_omega(omega) from None
        v = sol.x[row]
        magnitude[i] = abs(v)
        phase[i] = np.angle(v)
        if magnitude[i] <= NOISE_FLOOR_REL * float(np.max(np.abs(sol.x))):
            clamped[i] = True
    clamped |= magnitude < MAGNITUDE_FLOOR
    magnitude[clamped] = MAGNITUDE_FLOOR
    return NodeResponse(node=node, grid=grid, magnitude=magnitude,
                        phase=phase, clamped=clamped)


@dataclass
class AllNodesSweep:
    """Result of an all-nodes run: responses in node-table order plus a
    map of nodes whose solve failed (excluded from analysis)."""

    responses: list[NodeResponse] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)


def sweep_all_nodes(net: Netlist, grid: FrequencyGrid,
                    node_filter: str | None = None,
                    current: float = 1.0, gmin: float = GMIN_DEFAULT,
                    jobs: int | None = None) -> AllNodesSweep:
    """Inject at every non-ground node (optionally glob-filtered).

    Node order follows the netlist node table regardless of `jobs`; the
    per-node solves share only immutable state, so results do not depend
    on scheduling.
    """
    pattern = build_pattern(net)
    targets = [n for n in net.nodes.non_ground()
               if node_filter is None
               or fnmatch.fnmatchcase(n.lower(), node_filter.lower())]

    def run_one(node: str):
        return inject_node(net, pattern, node, grid, current=current, gmin=gmin)

    result = AllNodesSweep()
    if jobs is not None and jobs > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [(node, pool.submit(run_one, node)) for node in targets]
            outcomes = [(node, fut) for node, fut in futures]
    else:
        outcomes = [(node, _Immediate(run_one, node)) for node in targets]

    for node, fut in outcomes:
        try:
            result.responses.append(fut.result())
        except SingularSystem as exc:
            result.errors[node] = str(exc)
    return result


class _Immediate:
    """Future-shaped wrapper for the serial path."""

    def __init__(self, fn, *args):
        self._fn = fn
        self._args = args

    def result(self):
        return self._fn(*self._args)
