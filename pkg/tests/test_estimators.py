import math

import numpy as np
import pytest
from scipy.special import ndtr, owens_t

from gffperc.estimators import (
    boundary_connection_curve,
    curve_host_box,
    curve_scales,
    differential_inequality_report,
    estimate_critical_height,
    estimate_event,
    estimate_events_shared,
    estimate_influence,
    fit_decay,
    wilson_interval,
)
from gffperc.events import (
    AllOfEvent,
    ConnectedEvent,
    CrossingEvent,
    OriginToRingEvent,
    SiteEvent,
    TrueEvent,
    parse_event,
)
from gffperc.field import build_green
from gffperc.lattice import HORIZONTAL, VERTICAL, Rect, build_box

TWO_SITE_KILLED = frozenset({(1, 2), (2, 2)})
SIGMA = math.sqrt(16 / 15)
RHO = 0.25


def two_site_green():
    return build_green(build_box(4), killed=TWO_SITE_KILLED)


def both_above_probability(h: float) -> float:
    """Closed form for P(phi_u >= h, phi_v >= h) on the two-site interior."""
    a = h / SIGMA
    c = math.sqrt((1 - RHO) / (1 + RHO))
    return 1.0 - ndtr(a) - 2.0 * owens_t(a, c)


def test_wilson_all_successes():
    lo, hi = wilson_interval(100, 100)
    assert hi == 1.0
    assert lo == pytest.approx(0.963006, abs=1e-6)


def test_wilson_half():
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.404, abs=5e-4)
    assert hi == pytest.approx(0.596, abs=5e-4)


def test_wilson_ordering_and_bounds():
    for k, m in ((0, 10), (3, 10), (10, 10), (1, 1)):
        lo, hi = wilson_interval(k, m)
        assert 0.0 <= lo <= k / m <= hi <= 1.0


def test_wilson_validation():
    with pytest.raises(ValueError):
        wilson_interval(1, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 3)


def test_forced_open_crossing():
    box = build_box(3)
    event = parse_event("crossing:vertical", box)
    est = estimate_event(box, -1e6, event, 100, master_seed=7)
    assert est.p_hat == 1.0
    assert est.successes == 100
    assert est.ci_lo == pytest.approx(0.963006, abs=1e-6)


def test_estimates_are_deterministic():
    box = build_box(5)
    event = CrossingEvent(Rect(1, 3, 1, 3), VERTICAL)
    a = estimate_event(box, 0.3, event, 400, master_seed=11)
    b = estimate_event(box, 0.3, event, 400, master_seed=11)
    assert a == b
    c = estimate_event(box, 0.3, event, 400, master_seed=12)
    assert c.successes != a.successes or c.seed != a.seed


def test_estimate_validation():
    box = build_box(5)
    with pytest.raises(ValueError):
        estimate_event(box, 0.0, TrueEvent(), 0, master_seed=1)
    with pytest.raises(ValueError):
        estimate_event(box, 0.0, CrossingEvent(Rect(0, 9, 0, 2), VERTICAL),
                       10, master_seed=1)
    with pytest.raises(ValueError):
        estimate_event(box, 0.0, ConnectedEvent((0, 0), (9, 9)), 10, master_seed=1)


def test_shared_replicas_are_exactly_monotone():
    box = build_box(8)
    events = [
        CrossingEvent(Rect(1, 6, 1, 6), VERTICAL),
        ConnectedEvent((1, 1), (6, 6)),
        SiteEvent((4, 4)),
        OriginToRingEvent(2),
    ]
    h_list = [-1.5, -0.5, 0.0, 0.5, 1.5]
    rows = estimate_events_shared(box, h_list, events, 600, master_seed=3)
    for ei in range(len(events)):
        successes = [rows[hi][ei].successes for hi in range(len(h_list))]
        assert successes == sorted(successes, reverse=True)


def test_two_site_orthant_probability():
    green = two_site_green()
    u, v = green.vertices
    event = AllOfEvent((SiteEvent(u), SiteEvent(v)))
    M = 200_000
    est = estimate_event(green.box, 0.0, event, M, master_seed=5, green=green)
    truth = both_above_probability(0.0)
    assert truth == pytest.approx(0.2902, abs=1e-4)
    assert est.ci_lo <= truth <= est.ci_hi
    se = math.sqrt(truth * (1 - truth) / M)
    assert abs(est.p_hat - truth) <= 4 * se


def test_curve_extremes():
    low = boundary_connection_curve(-1e6, [4, 6, 8], 50, master_seed=2)
    assert all(est.p_hat == 1.0 for _, est in low)
    high = boundary_connection_curve(1e6, [4, 6, 8], 50, master_seed=2)
    assert all(est.p_hat == 0.0 for _, est in high)


def test_curve_nesting_is_exact():
    curve = boundary_connection_curve(0.0, [4, 6, 8, 10], 2000, master_seed=9)
    successes = [est.successes for _, est in curve]
    assert successes == sorted(successes, reverse=True)
    assert [n for n, _ in curve] == [4, 6, 8, 10]


def test_curve_host_box_is_odd():
    assert curve_host_box([8, 12, 32]).n == 33
    assert curve_host_box([9]).n == 9
    with pytest.raises(ValueError):
        boundary_connection_curve(0.0, [], 10, master_seed=1)
    with pytest.raises(ValueError):
        boundary_connection_curve(0.0, [2], 10, master_seed=1)


def test_curve_scales_at_32():
    assert curve_scales(32) == [8, 12, 16, 24, 32]


def test_fit_decay_recovers_synthetic_rate():
    points = [(n, math.exp(-0.3 * n)) for n in (5, 10, 15, 20, 30)]
    fit = fit_decay(points)
    assert fit.rate == pytest.approx(0.3, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-10)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert not fit.degenerate


def test_fit_decay_constant_flagged_degenerate():
    fit = fit_decay([(n, 0.5) for n in (5, 10, 15)])
    assert fit.rate == 0.0
    assert fit.r2 == 0.0
    assert fit.degenerate


def test_fit_decay_needs_three_positive_points():
    with pytest.raises(ValueError):
        fit_decay([(5, 0.5), (10, 0.0), (15, 0.0)])


def test_fit_decay_skips_zero_estimates():
    points = [(n, math.exp(-0.2 * n)) for n in (4, 8, 12)] + [(40, 0.0)]
    fit = fit_decay(points)
    assert fit.rate == pytest.approx(0.2, abs=1e-10)
    assert len(fit.points) == 3


def test_critical_bracket_shrinks_to_tolerance():
    est = estimate_critical_height("crossing", 3, 300, 0.5, master_seed=21)
    assert est.one_sided is None
    assert est.h_hi - est.h_lo <= 0.5
    assert -8.0 <= est.h_lo < est.h_hi <= 8.0
    # bisection metric history: both ends plus one evaluation per halving
    assert len(est.history) == 2 + math.ceil(math.log2(16 / 0.5))


def test_critical_bisection_step_count():
    est = estimate_critical_height("crossing", 3, 50, 0.25, master_seed=2)
    if est.one_sided is None:
        assert len(est.history) - 2 == 6  # 16 / 2^6 = 0.25


def test_critical_one_sided_brackets():
    high = estimate_critical_height("crossing", 3, 100, 0.5, master_seed=4,
                                    bracket=(-30.0, -20.0))
    assert high.one_sided == "high"
    assert high.h_lo == -20.0 and math.isinf(high.h_hi)
    low = estimate_critical_height("crossing", 3, 100, 0.5, master_seed=4,
                                   bracket=(20.0, 30.0))
    assert low.one_sided == "low"
    assert low.h_hi == 20.0 and math.isinf(-low.h_lo)


def test_critical_decay_criterion_runs():
    est = estimate_critical_height("decay", 12, 400, 1.0, master_seed=6)
    assert est.criterion == "decay"
    assert est.h_lo < est.h_hi


def test_critical_validation():
    with pytest.raises(ValueError):
        estimate_critical_height("crossing", 3, 10, 0.0, master_seed=1)
    with pytest.raises(ValueError):
        estimate_critical_height("nope", 3, 10, 0.5, master_seed=1)
    with pytest.raises(ValueError):
        estimate_critical_height("crossing", 3, 10, 0.5, master_seed=1,
                                 bracket=(2.0, 2.0))


def test_influence_of_event_on_itself_is_one():
    green = two_site_green()
    x = green.vertices[0]
    est = estimate_influence(green.box, 0.0, SiteEvent(x), x, 2000,
                             master_seed=8, green=green)
    assert est.i_hat == 1.0
    assert est.n_above + est.n_below == 2000
    assert not est.undefined


def test_influence_of_constant_event_is_zero():
    green = two_site_green()
    x = green.vertices[0]
    est = estimate_influence(green.box, 0.0, TrueEvent(), x, 2000,
                             master_seed=8, green=green)
    assert est.i_hat == 0.0


def test_influence_positive_correlation_matches_conditional_orthant():
    green = two_site_green()
    u, v = green.vertices
    M = 200_000
    est = estimate_influence(green.box, 0.0, SiteEvent(v), u, M,
                             master_seed=10, green=green)
    p_both = both_above_probability(0.0)
    truth = p_both / 0.5 - (0.5 - p_both) / 0.5
    assert truth > 0
    assert abs(est.i_hat - truth) <= 4 * est.se
    assert est.i_hat > 0


def test_influence_undefined_branch_flagged():
    green = two_site_green()
    x = green.vertices[0]
    est = estimate_influence(green.box, -1e6, SiteEvent(x), x, 500,
                             master_seed=1, green=green)
    assert est.undefined
    assert math.isnan(est.i_hat)
    assert est.n_below == 0


def test_differential_report_matches_orthant_derivative():
    green = two_site_green()
    u, v = green.vertices
    event = AllOfEvent((SiteEvent(u), SiteEvent(v)))
    h, dh, M = 0.0, 0.05, 150_000
    report = differential_inequality_report(green.box, event, h, dh, M,
                                            master_seed=13, green=green)
    oracle = (both_above_probability(h + dh) -
              both_above_probability(h - dh)) / (2 * dh)
    assert oracle < 0
    assert abs(report.derivative - oracle) <= 3 * report.derivative_se
    assert "sign-convention-discrepancy" in report.flags
    assert report.p_mid == pytest.approx(both_above_probability(0.0), abs=0.01)

    # worst-case influence: event requires the site itself to be open
    truth_influence = both_above_probability(0.0) / 0.5
    assert report.influence_max == pytest.approx(truth_influence, abs=0.01)
    assert report.log_term is not None
    assert report.implied_constant is not None
    assert report.implied_constant_flipped == -report.implied_constant


def test_differential_pathwise_sign():
    # increasing event: central difference can never be positive on CRN
    box = build_box(6)
    event = CrossingEvent(Rect(1, 4, 1, 4), VERTICAL)
    report = differential_inequality_report(box, event, 0.0, 0.1, 2000,
                                            master_seed=3)
    assert report.derivative <= 0
    assert report.p_minus >= report.p_mid >= report.p_plus


def test_differential_validation():
    box = build_box(5)
    with pytest.raises(ValueError):
        differential_inequality_report(box, TrueEvent(), 0.0, 0.0, 10,
                                       master_seed=1)
