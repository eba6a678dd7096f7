"""Stability-plot, peak-detection and grading tests.

Synthetic magnitude data comes straight from closed-form transfer
functions; where the continuum value matters, a dense independent
numerical differentiation oracle cross-checks the production path.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopscope.mna import build_pattern
from loopscope.netlist import elaborate, parse
from loopscope.stability import (
    DAMPING_TABLE,
    GridTooShort,
    NonNegativeIndex,
    Peak,
    PeakFlag,
    PeakKind,
    Severity,
    analyze_response,
    detect_peaks,
    refine_peak,
    stability_curve,
    damping_lookup,
    zeta_from_index,
)
from loopscope.sweep import FrequencyGrid, NodeResponse, inject_node, make_grid

import circuits


def synthetic(grid, magnitude, node="syn"):
    magnitude = np.asarray(magnitude, dtype=float)
    clamped = magnitude < 1e-300
    return NodeResponse(node=node, grid=grid,
                        magnitude=np.maximum(magnitude, 1e-300),
                        phase=np.zeros_like(magnitude), clamped=clamped)


def second_order_magnitude(freqs, fn, zeta):
    """|1 / (s^2 + 2 s zeta + 1)| with s normalized to the pole pair."""
    u = freqs / fn
    return 1.0 / np.sqrt((1.0 - u**2) ** 2 + (2.0 * zeta * u) ** 2)


# ---------------------------------------------------------------------------
# stability_curve basics
# ---------------------------------------------------------------------------

def test_flat_magnitude_gives_zero_curve():
    grid = make_grid(1.0, 1e4, 25)
    curve = stability_curve(synthetic(grid, np.full(len(grid), 123.0)))
    assert np.all(curve.p == 0.0)
    assert len(curve.p) == len(grid) - 2


def test_one_over_omega_gives_zero_curve():
    grid = make_grid(1.0, 1e4, 25)
    curve = stability_curve(synthetic(grid, 42.0 / grid.freqs))
    assert np.max(np.abs(curve.p)) < 1e-9


def test_single_real_pole_minimum():
    # d2/dx2 of -0.5*ln(1+u^2) in x = ln(w) has minimum -0.5 exactly at
    # the pole; cross-check the production curve against a dense numeric
    # differentiation oracle.
    fp = 250.0
    grid = make_grid(1.0, 100e3, 100)
    mag = 1.0 / np.sqrt(1.0 + (grid.freqs / fp) ** 2)
    curve = stability_curve(synthetic(grid, mag))
    i = int(np.argmin(curve.p))
    f_at_min = math.exp(curve.log_freq[i]) / (2 * math.pi)
    assert curve.p[i] == pytest.approx(-0.5, abs=5e-4)
    assert f_at_min == pytest.approx(fp, rel=0.02)

    x = np.linspace(math.log(fp) - 2, math.log(fp) + 2, 20001)
    lm = -0.5 * np.log1p((np.exp(x) / fp) ** 2)
    oracle = np.gradient(np.gradient(lm, x), x)
    assert oracle.min() == pytest.approx(-0.5, abs=1e-4)


@pytest.mark.parametrize("zeta", [0.1, 0.2, 0.3, 0.5])
def test_performance_index_closure_on_synthetic_data(zeta):
    # Curve value at the grid point nearest the natural frequency equals
    # -1/zeta^2 within discretization error at 200 points/decade.
    fn = 1e3
    grid = make_grid(10.0, 1e5, 200)
    resp = synthetic(grid, second_order_magnitude(grid.freqs, fn, zeta))
    curve = stability_curve(resp)
    i = int(np.argmin(np.abs(grid.freqs[1:-1] - fn)))
    assert curve.p[i] == pytest.approx(-1.0 / zeta**2, rel=0.02)


def test_pole_zero_duality_negates_curve():
    fn = 1e3
    grid = make_grid(10.0, 1e5, 100)
    mag = second_order_magnitude(grid.freqs, fn, 0.25)
    p_pole = stability_curve(synthetic(grid, mag)).p
    p_zero = stability_curve(synthetic(grid, 1.0 / mag)).p
    assert np.max(np.abs(p_pole + p_zero)) <= 1e-9


def test_scale_invariance_power_of_two_is_bitwise():
    grid = make_grid(10.0, 1e5, 60)
    mag = second_order_magnitude(grid.freqs, 1e3, 0.3)
    base = stability_curve(synthetic(grid, mag)).p
    scaled = stability_curve(synthetic(grid, mag * 2.0**40)).p
    assert np.array_equal(base, scaled)


@given(alpha=st.floats(min_value=1e-6, max_value=1e6,
                       allow_nan=False, allow_infinity=False))
@settings(max_examples=30, deadline=None)
def test_scale_invariance_general(alpha):
    grid = make_grid(10.0, 1e5, 40)
    mag = second_order_magnitude(grid.freqs, 1e3, 0.4)
    base = stability_curve(synthetic(grid, mag)).p
    scaled = stability_curve(synthetic(grid, mag * alpha)).p
    assert np.max(np.abs(base - scaled)) <= 1e-9


@given(data=st.data())
@settings(max_examples=40, deadline=None)
def test_products_of_real_factors_stay_bounded(data):
    # Real poles/zeros at least half a decade apart: the curve never
    # leaves [-1.05, 1.05] at 100 points/decade.  (Coincident factors can
    # exceed this: k stacked poles reach -k/2, see the double-pole test.)
    n_factors = data.draw(st.integers(min_value=1, max_value=5))
    slots = np.arange(n_factors) * 0.5  # half-decade spacing in log10(f)
    offset = data.draw(st.floats(min_value=1.0, max_value=2.0))
    signs = data.draw(st.lists(st.booleans(), min_size=n_factors, max_size=n_factors))
    grid = make_grid(1.0, 1e6, 100)
    logm = np.zeros(len(grid))
    for slot, is_zero in zip(slots, signs):
        fb = 10.0 ** (offset + slot)
        term = -0.5 * np.log1p((grid.freqs / fb) ** 2)
        logm += -term if is_zero else term
    curve = stability_curve(synthetic(grid, np.exp(logm)))
    assert np.all(curve.p >= -1.05)
    assert np.all(curve.p <= 1.05)


def test_coincident_double_real_pole_reaches_minus_one():
    fp = 1e3
    grid = make_grid(10.0, 1e5, 100)
    mag = 1.0 / (1.0 + (grid.freqs / fp) ** 2)  # two identical poles
    curve = stability_curve(synthetic(grid, mag))
    assert curve.p.min() == pytest.approx(-1.0, abs=5e-4)
    assert curve.p.min() >= -1.05


def test_grid_too_short():
    freqs = np.array([1.0, 10.0])
    tiny = FrequencyGrid(f_start=1.0, f_stop=10.0, points_per_decade=10,
                         freqs=freqs, log_step=math.log(10.0))
    with pytest.raises(GridTooShort):
        stability_curve(synthetic(tiny, np.ones(2)))


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------

def test_flat_curve_detects_nothing():
    grid = make_grid(1.0, 1e4, 25)
    curve = stability_curve(synthetic(grid, np.full(len(grid), 5.0)))
    assert detect_peaks(curve) == []


def test_single_real_pole_detected_as_wide_pole():
    fp = 250.0
    grid = make_grid(1.0, 100e3, 100)
    mag = 1.0 / np.sqrt(1.0 + (grid.freqs / fp) ** 2)
    curve = stability_curve(synthetic(grid, mag))
    peaks = detect_peaks(curve)
    assert len(peaks) == 1
    (pk,) = peaks
    assert pk.kind is PeakKind.COMPLEX_POLE
    assert pk.p_value == pytest.approx(-0.5, abs=0.01)
    assert pk.zeta == pytest.approx(math.sqrt(2.0), rel=0.02)
    assert damping_lookup(pk.zeta).severity is Severity.NON_OSCILLATORY


def test_underdamped_pole_yields_one_pole_and_no_zero():
    # The pole's own positive side lobes (about a tenth of the dip) must
    # be suppressed, not reported as complex zeros.
    net = elaborate(parse(circuits.passive_rlc_loop(0.2)))
    grid = make_grid(50.0, 500e3, 100)
    resp = inject_node(net, build_pattern(net), "n2", grid)
    curve, peaks = analyze_response(resp)
    assert [pk.kind for pk in peaks] == [PeakKind.COMPLEX_POLE]
    assert peaks[0].p_value == pytest.approx(-25.0, rel=0.03)
    # the raw curve really does contain positive lobes above the floor
    assert curve.p.max() > 0.1


def test_genuine_doublet_is_flagged_and_kept():
    # A sharp pole and a comparable sharp zero 2% apart: the visible
    # extrema land within the doublet gap and both survive, flagged.
    # (Superposition pushes the apparent extrema slightly apart, so the
    # underlying roots sit closer than the 5% flagging tolerance.)
    fn = 1e3
    grid = make_grid(10.0, 1e5, 200)
    mag = (second_order_magnitude(grid.freqs, fn, 0.05)
           / second_order_magnitude(grid.freqs, fn * 1.02, 0.05))
    curve = stability_curve(synthetic(grid, mag))
    peaks = detect_peaks(curve)
    kinds = {pk.kind for pk in peaks}
    assert kinds == {PeakKind.COMPLEX_POLE, PeakKind.COMPLEX_ZERO}
    assert all(PeakFlag.POLE_ZERO_DOUBLET in pk.flags for pk in peaks)


def test_end_of_range_pole_flagged_and_ungraded():
    # Resonance just above the sweep: the boundary sample is a running
    # minimum and must come back flagged, with no severity grade.
    fn = 5032.9
    grid = make_grid(50.0, 4600.0, 200)
    net = elaborate(parse(circuits.sensed_rlc_loop(0.2)))
    resp = inject_node(net, build_pattern(net), "out", grid)
    _, peaks = analyze_response(resp)
    poles = [pk for pk in peaks if pk.kind is PeakKind.COMPLEX_POLE]
    assert poles, "expected a boundary pole candidate"
    for pk in poles:
        assert PeakFlag.END_OF_RANGE in pk.flags
        assert pk.severity is None
        assert not pk.gradable
    assert all(pk.natural_freq < fn for pk in poles)


def test_clamped_samples_never_become_candidates():
    grid = make_grid(1.0, 1e4, 25)
    mag = np.full(len(grid), 3.0)
    mag[10] = 0.0  # exact null -> floor clamp
    resp = synthetic(grid, mag)
    assert resp.clamped[10]
    curve = stability_curve(resp)
    peaks = detect_peaks(curve)
    # The huge fake curvature around the clamped point is ignored.
    assert all(not curve.clamped[pk.sample_index] for pk in peaks)
    assert peaks == []


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------

def _tiny_curve(p_values):
    n = len(p_values) + 2
    freqs = np.exp(np.linspace(0.0, (n - 1) * 0.1, n))
    grid = FrequencyGrid(f_start=freqs[0], f_stop=freqs[-1],
                         points_per_decade=10, freqs=freqs, log_step=0.1)
    from loopscope.stability import StabilityCurve
    return StabilityCurve(node="t", log_freq=np.log(2 * math.pi * freqs[1:-1]),
                          p=np.asarray(p_values, dtype=float),
                          clamped=np.zeros(len(p_values), dtype=bool), grid=grid)


def test_refine_symmetric_samples():
    curve = _tiny_curve([-9.0, -10.0, -9.0])
    freq, value = refine_peak(curve, 1)
    assert value == pytest.approx(-10.0)
    assert freq == pytest.approx(math.exp(curve.log_freq[1]) / (2 * math.pi), rel=1e-12)


def test_refine_collinear_falls_back_to_sample():
    curve = _tiny_curve([-1.0, -2.0, -3.0])
    freq, value = refine_peak(curve, 1)
    assert value == -2.0
    assert freq == pytest.approx(math.exp(curve.log_freq[1]) / (2 * math.pi), rel=1e-12)


def test_refined_frequency_accuracy_at_100_ppd():
    net = elaborate(parse(circuits.passive_rlc_loop(0.2)))
    grid = make_grid(50.0, 500e3, 100)
    resp = inject_node(net, build_pattern(net), "n2", grid)
    _, peaks = analyze_response(resp)
    (pole,) = [pk for pk in peaks if pk.kind is PeakKind.COMPLEX_POLE]
    assert pole.natural_freq == pytest.approx(circuits.F_NATURAL, rel=0.005)


# ---------------------------------------------------------------------------
# zeta and the lookup table
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("index,zeta", [(-1.0, 1.0), (-4.0, 0.5),
                                        (-25.0, 0.2), (-100.0, 0.1)])
def test_zeta_from_index_exact_rows(index, zeta):
    assert zeta_from_index(index) == zeta


def test_zeta_from_index_rejects_nonnegative():
    with pytest.raises(NonNegativeIndex):
        zeta_from_index(0.0)
    with pytest.raises(NonNegativeIndex):
        zeta_from_index(2.0)


@given(zeta=st.floats(min_value=1e-3, max_value=10.0,
                      allow_nan=False, allow_infinity=False))
def test_zeta_round_trip(zeta):
    assert zeta_from_index(-1.0 / zeta**2) == pytest.approx(zeta, rel=1e-14)


def test_damping_lookup_tabulated_rows_exact():
    assert damping_lookup(0.5).phase_margin_deg == 50.0
    assert damping_lookup(0.5).overshoot_pct == 16.0
    assert damping_lookup(0.2).phase_margin_deg == 20.0
    assert damping_lookup(0.2).overshoot_pct == 53.0
    assert damping_lookup(0.1).phase_margin_deg == 10.0
    assert damping_lookup(0.1).overshoot_pct == 73.0


def test_damping_lookup_interpolates_between_rows():
    r = damping_lookup(0.45)
    assert r.phase_margin_deg == pytest.approx(45.0)
    assert r.overshoot_pct == pytest.approx(20.5)


def test_damping_lookup_beyond_seventy_degrees():
    r = damping_lookup(0.8)
    assert r.phase_margin_deg is None
    assert r.overshoot_pct == pytest.approx(2.0)
    assert damping_lookup(1.5).overshoot_pct == 0.0


@pytest.mark.parametrize("zeta,severity", [
    (0.05, Severity.UNSTABLE_RISK),
    (0.29, Severity.UNSTABLE_RISK),
    (0.3, Severity.MARGINAL),
    (0.49, Severity.MARGINAL),
    (0.5, Severity.ACCEPTABLE),
    (0.99, Severity.ACCEPTABLE),
    (1.0, Severity.NON_OSCILLATORY),
    (1.41, Severity.NON_OSCILLATORY),
])
def test_severity_thresholds(zeta, severity):
    assert damping_lookup(zeta).severity is severity


def test_severity_thresholds_configurable():
    assert damping_lookup(0.35, thresholds=(0.4, 0.6)).severity is Severity.UNSTABLE_RISK


def test_damping_table_has_eleven_rows_ending_at_zero():
    assert len(DAMPING_TABLE) == 11
    assert DAMPING_TABLE[0].zeta == 1.0 and DAMPING_TABLE[0].performance_index == -1.0
    assert DAMPING_TABLE[-1].zeta == 0.0 and DAMPING_TABLE[-1].performance_index == -math.inf
