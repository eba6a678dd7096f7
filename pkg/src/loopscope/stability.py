"""Stability-plot computation and peak grading.

The stability plot P is the second derivative of log magnitude with
respect to log angular frequency.  Straight-line segments of the Bode
magnitude (flat regions, integrator slopes, far real-pole skirts)
differentiate away, while an underdamped pole pair leaves a negative
spike at its natural frequency whose depth encodes the damping ratio:

    P(wn) = -1 / zeta**2

and a complex zero pair leaves the mirror-image positive spike.  The
damping ratio recovered from a negative peak maps to estimated phase
margin and step overshoot through the classic second-order table.

Implementation notes: the response is sampled on a uniform log grid, so
P is one central second difference of ln|V| (exact for any quadratic in
log-log coordinates, which is why pure slopes vanish identically).  An
underdamped pole also carries small positive side lobes (about a tenth
of the peak depth); a detected extremum that is both opposite in sign
and much smaller than a close neighbour is discarded as such a lobe
rather than reported as a separate resonance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum, IntEnum

import numpy as np

from .sweep import FrequencyGrid, NodeResponse

PEAK_FLOOR_DEFAULT = 0.1
DOUBLET_GAP_DEFAULT = 0.05
#: Cross-sign dominance suppression: drop an extremum when an opposite one
#: within LOBE_WINDOW (natural-log frequency units) is LOBE_RATIO times larger.
LOBE_WINDOW = 1.0
LOBE_RATIO = 4.0

SEVERITY_THRESHOLDS_DEFAULT = (0.3, 0.5)


class GridTooShort(Exception):
    pass


class NonNegativeIndex(Exception):
    pass


class PeakKind(Enum):
    COMPLEX_POLE = "complex-pole"
    COMPLEX_ZERO = "complex-zero"


class PeakFlag(Enum):
    END_OF_RANGE = "end-of-range"
    POLE_ZERO_DOUBLET = "pole-zero-doublet"
    CLAMPED_DATA = "clamped-data"


class Severity(IntEnum):
    """Ordered worst-first so min() picks the worst grade."""

    UNSTABLE_RISK = 0
    MARGINAL = 1
    ACCEPTABLE = 2
    NON_OSCILLATORY = 3

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


@dataclass
class StabilityCurve:
    node: str
    log_freq: np.ndarray   # ln(omega) at interior grid points
    p: np.ndarray
    clamped: np.ndarray    # True where the difference stencil touched clamped data
    grid: FrequencyGrid


@dataclass
class Peak:
    node: str
    kind: PeakKind
    natural_freq: float            # Hz
    p_value: float
    zeta: float | None = None      # poles only
    phase_margin_deg: float | None = None  # None above the table's 70 deg limit
    overshoot_pct: float | None = None
    severity: Severity | None = None       # None when flagged ungradable
    flags: frozenset[PeakFlag] = frozenset()
    sample_index: int = -1         # index into the curve arrays

    @property
    def gradable(self) -> bool:
        return (self.kind is PeakKind.COMPLEX_POLE
                and PeakFlag.END_OF_RANGE not in self.flags
                and PeakFlag.CLAMPED_DATA not in self.flags)


@dataclass(frozen=True)
class DampingRow:
    zeta: float
    overshoot_pct: float
    phase_margin_deg: float | None
    max_magnitude: float | None
    performance_index: float


#: Second-order system characteristics versus damping ratio.
DAMPING_TABLE: tuple[DampingRow, ...] = (
    DampingRow(1.0, 0.0, None, None, -1.0),
    DampingRow(0.9, 0.0, None, None, -1.2),
    DampingRow(0.8, 2.0, None, None, -1.6),
    DampingRow(0.7, 5.0, 70.0, 1.01, -2.0),
    DampingRow(0.6, 10.0, 60.0, 1.04, -2.8),
    DampingRow(0.5, 16.0, 50.0, 1.15, -4.0),
    DampingRow(0.4, 25.0, 40.0, 1.4, -6.3),
    DampingRow(0.3, 37.0, 30.0, 1.8, -11.0),
    DampingRow(0.2, 53.0, 20.0, 2.6, -25.0),
    DampingRow(0.1, 73.0, 10.0, 5.0, -100.0),
    DampingRow(0.0, 100.0, 0.0, math.inf, -math.inf),
)

_ZETAS = np.array([row.zeta for row in reversed(DAMPING_TABLE)])
_OVERSHOOTS = np.array([row.overshoot_pct for row in reversed(DAMPING_TABLE)])
# Phase margin is tabulated only up to zeta = 0.7 (10..70 degrees).
_PM_ZETAS = _ZETAS[_ZETAS <= 0.7]
_PM_DEGS = np.array([row.phase_margin_deg for row in reversed(DAMPING_TABLE)
                     if row.phase_margin_deg is not None])


@dataclass(frozen=True)
class DampingFigures:
    phase_margin_deg: float | None
    overshoot_pct: float
    severity: Severity


def stability_curve(resp: NodeResponse) -> StabilityCurve:
    """Central second difference of ln(magnitude) over the log grid.

    The magnitude is normalized by its maximum first, which makes the
    curve exactly invariant under power-of-two rescaling of the data and
    keeps the logs well conditioned.
    """
    n = len(resp.grid)
    if n < 3:
        raise GridTooShort(f"need at least 3 grid points, got {n}")
    mag = resp.magnitude / np.max(resp.magnitude)
    logm = np.log(mag)
    h = resp.grid.log_step
    p = (logm[2:] - 2.0 * logm[1:-1] + logm[:-2]) / (h * h)
    clamped_in = resp.clamped
    clamped = clamped_in[2:] | clamped_in[1:-1] | clamped_in[:-2]
    log_freq = np.log(2.0 * math.pi * resp.grid.freqs[1:-1])
    return StabilityCurve(node=resp.node, log_freq=log_freq, p=p,
                          clamped=clamped, grid=resp.grid)


def zeta_from_index(p_value: float) -> float:
    """Invert P = -1/zeta**2 for a negative pole-peak value."""
    if p_value >= 0:
        raise NonNegativeIndex(f"pole peak value must be negative, got {p_value!r}")
    return 1.0 / math.sqrt(-p_value)


def damping_lookup(zeta: float,
                  thresholds: tuple[float, float] = SEVERITY_THRESHOLDS_DEFAULT,
                  ) -> DampingFigures:
    """Estimated phase margin, overshoot and a severity grade for a
    damping ratio, by piecewise-linear interpolation of the table."""
    if zeta <= 0:
        raise NonNegativeIndex(f"zeta must be positive, got {zeta!r}")
    risk_below, marginal_below = thresholds
    if zeta >= 1.0:
        severity = Severity.NON_OSCILLATORY
    elif zeta >= marginal_below:
        severity = Severity.ACCEPTABLE
    elif zeta >= risk_below:
        severity = Severity.MARGINAL
    else:
        severity = Severity.UNSTABLE_RISK
    pm = float(np.interp(zeta, _PM_ZETAS, _PM_DEGS)) if zeta <= 0.7 else None
    overshoot = float(np.interp(zeta, _ZETAS, _OVERSHOOTS)) if zeta <= 1.0 else 0.0
    return DampingFigures(phase_margin_deg=pm, overshoot_pct=overshoot, severity=severity)


def refine_peak(curve: StabilityCurve, index: int) -> tuple[float, float]:
    """Sub-grid extremum estimate: vertex of the parabola through the
    sample and its two neighbours, in (ln w, P) coordinates.  Falls back
    to the raw sample at the curve ends or for collinear samples."""
    x = curve.log_freq
    p = curve.p
    raw = (math.exp(x[index]) / (2.0 * math.pi), float(p[index]))
    if index <= 0 or index >= len(p) - 1:
        return raw
    a, b, c = float(p[index - 1]), float(p[index]), float(p[index + 1])
    curv = a - 2.0 * b + c
    if curv == 0.0:
        return raw
    delta = 0.5 * (a - c) / curv
    h = float(x[index + 1] - x[index])
    x_vertex = float(x[index]) + delta * h
    p_vertex = b - 0.25 * (a - c) * delta
    return math.exp(x_vertex) / (2.0 * math.pi), p_vertex


def detect_peaks(curve: StabilityCurve, floor: float = PEAK_FLOOR_DEFAULT,
                 doublet_gap: float = DOUBLET_GAP_DEFAULT,
                 lobe_window: float = LOBE_WINDOW,
                 lobe_ratio: float = LOBE_RATIO) -> list[Peak]:
    """Find pole/zero candidates in a stability curve.

    Strict local minima below ``-floor`` become complex-pole candidates
    and strict local maxima above ``+floor`` complex-zero candidates.
    Curve-end extrema are flagged end-of-range.  A pole and zero whose
    refined frequencies agree within the doublet gap are flagged as a
    pole-zero doublet; unflagged extrema that are dwarfed (by
    ``lobe_ratio``) by an opposite extremum within ``lobe_window`` of
    log frequency are dropped as side lobes of that larger feature.
    Peaks sitting on clamped data are flagged and left ungraded.
    """
    p = curve.p
    n = len(p)
    if n == 0:
        return []
    found: list[Peak] = []

    def add(i: int, kind: PeakKind, end_of_range: bool):
        if curve.clamped[i]:
            # Curvature computed from floor-clamped samples is meaningless;
            # such points never become candidates.
            return
        flags = set()
        if end_of_range:
            flags.add(PeakFlag.END_OF_RANGE)
        if (i > 0 and curve.clamped[i - 1]) or (i < n - 1 and curve.clamped[i + 1]):
            flags.add(PeakFlag.CLAMPED_DATA)
        if flags:
            freq, value = math.exp(curve.log_freq[i]) / (2.0 * math.pi), float(p[i])
        else:
            freq, value = refine_peak(curve, i)
        zeta = None
        if kind is PeakKind.COMPLEX_POLE and value < 0:
            zeta = zeta_from_index(value)
        found.append(Peak(node=curve.node, kind=kind, natural_freq=freq,
                          p_value=value, zeta=zeta, flags=frozenset(flags),
                          sample_index=i))

    for i in range(1, n - 1):
        if p[i] < -floor and p[i] < p[i - 1] and p[i] < p[i + 1]:
            add(i, PeakKind.COMPLEX_POLE, False)
        elif p[i] > floor and p[i] > p[i - 1] and p[i] > p[i + 1]:
            add(i, PeakKind.COMPLEX_ZERO, False)
    if n >= 2:
        if p[0] < -floor and p[0] < p[1]:
            add(0, PeakKind.COMPLEX_POLE, True)
        elif p[0] > floor and p[0] > p[1]:
            add(0, PeakKind.COMPLEX_ZERO, True)
        if p[n - 1] < -floor and p[n - 1] < p[n - 2]:
            add(n - 1, PeakKind.COMPLEX_POLE, True)
        elif p[n - 1] > floor and p[n - 1] > p[n - 2]:
            add(n - 1, PeakKind.COMPLEX_ZERO, True)

    # Doublet flagging: a close opposite pair is a joint feature.
    gap = math.log1p(doublet_gap)
    doublet: set[int] = set()
    for i, a in enumerate(found):
        for j in range(i + 1, len(found)):
            b = found[j]
            if a.kind is b.kind:
                continue
            if abs(math.log(a.natural_freq / b.natural_freq)) <= gap:
                doublet.add(i)
                doublet.add(j)
    for i in sorted(doublet):
        found[i] = replace(found[i],
                           flags=found[i].flags | {PeakFlag.POLE_ZERO_DOUBLET})

    # Side-lobe suppression (single simultaneous pass over the raw set).
    kept: list[Peak] = []
    for i, a in enumerate(found):
        if i in doublet:
            kept.append(a)
            continue
        dominated = any(
            b.kind is not a.kind
            and abs(math.log(a.natural_freq / b.natural_freq)) <= lobe_window
            and abs(b.p_value) >= lobe_ratio * abs(a.p_value)
            for j, b in enumerate(found) if j != i)
        if not dominated:
            kept.append(a)
    kept.sort(key=lambda pk: pk.sample_index)
    return kept


def grade_peak(peak: Peak,
               thresholds: tuple[float, float] = SEVERITY_THRESHOLDS_DEFAULT) -> Peak:
    """Attach phase margin, overshoot and severity to a pole peak.
    End-of-range and clamped peaks stay ungraded per the special-case
    reporting rules; zero peaks carry no damping figure at all."""
    if peak.kind is not PeakKind.COMPLEX_POLE or peak.zeta is None:
        return peak
    if not peak.gradable:
        return peak
    r = damping_lookup(peak.zeta, thresholds=thresholds)
    return replace(peak, phase_margin_deg=r.phase_margin_deg,
                   overshoot_pct=r.overshoot_pct, severity=r.severity)


def analyze_response(resp: NodeResponse, floor: float = PEAK_FLOOR_DEFAULT,
                     doublet_gap: float = DOUBLET_GAP_DEFAULT,
                     thresholds: tuple[float, float] = SEVERITY_THRESHOLDS_DEFAULT,
                     ) -> tuple[StabilityCurve, list[Peak]]:
    """Full per-node pipeline: curve, detection, refinement, grading."""
    curve = stability_curve(resp)
    peaks = [grade_peak(pk, thresholds=thresholds)
             for pk in detect_peaks(curve, floor=floor, doublet_gap=doublet_gap)]
    return curve, peaks
