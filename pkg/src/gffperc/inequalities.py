"""Numeric checkers for correlation inequalities and coupling bounds.

Each checker runs a seeded Monte Carlo experiment, evaluates both sides of
an inequality, and emits a machine-readable CheckReport.  Margins are
oriented so that margin >= 0 means the inequality holds; "violated" is only
declared beyond three standard errors.  Whenever an inequality compares the
same events at two heights, both sides share replicas (common random
numbers), so pathwise-monotone comparisons are exact.

Unspecified constants are never asserted: checkers either solve for the
implied constant or test sign/monotonicity claims only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import DecayFit, fit_decay, scan_counts
from .events import (
    AllOfEvent,
    CrossingEvent,
    DualConnectedEvent,
    Event,
    OriginToRingEvent,
    default_ring_radius,
)
from .field import build_green
from .lattice import HORIZONTAL, VERTICAL, BoxLattice, build_box, crossing_geometry
from .rng import StreamKey, derive

__all__ = [
    "CheckReport",
    "check_fkg",
    "check_height_shift_bound",
    "check_coupling_bound",
    "check_dual_decay",
]

HOLDS = "holds"
VIOLATED_WITHIN_NOISE = "violated-within-noise"
VIOLATED = "violated"


@dataclass(frozen=True)
class CheckReport:
    """One inequality check: margin = rhs - lhs after orientation, so
    margin >= 0 means the inequality holds."""

    name: str
    lhs: float
    rhs: float
    margin: float
    se: float
    verdict: str
    seed: int
    params: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()


def _verdict(margin: float, se: float) -> str:
    if margin >= 0.0:
        return HOLDS
    if margin < -3.0 * se:
        return VIOLATED
    return VIOLATED_WITHIN_NOISE


def check_fkg(box: BoxLattice, h: float, A: Event, B: Event, M: int,
              master_seed: int, green=None) -> CheckReport:
    """Positive correlation P(A and B) >= P(A) P(B) for increasing events.

    Only catalogued increasing events are accepted; for anything else the
    sign is not certified and the comparison would be meaningless.
    """
    if not (A.increasing and B.increasing):
        raise ValueError("FKG check needs two increasing events")
    if green is None:
        green = build_green(box)
    counts = scan_counts(green, [h], [A, B, AllOfEvent((A, B))], M,
                         StreamKey(master_seed))
    pa, pb, pab = (counts[0] / M).tolist()
    lhs = pa * pb
    rhs = pab
    margin = rhs - lhs
    # delta method on the multinomial of (1_A, 1_B, 1_AB), shared replicas
    g = np.array([-pb, -pa, 1.0])
    cov = np.array([
        [pa * (1 - pa), pab - pa * pb, pab * (1 - pa)],
        [pab - pa * pb, pb * (1 - pb), pab * (1 - pb)],
        [pab * (1 - pa), pab * (1 - pb), pab * (1 - pab)],
    ]) / M
    se = float(math.sqrt(max(g @ cov @ g, 0.0)))
    return CheckReport(
        "fkg", lhs, rhs, margin, se, _verdict(margin, se), master_seed,
        params={"h": h, "n": box.n, "M": M, "A": A.label(), "B": B.label(),
                "p_a": pa, "p_b": pb, "p_ab": pab},
    )


def check_height_shift_bound(n: int, N: int, h1: float, h2: float, M: int,
                             master_seed: int) -> CheckReport:
    """Easy-crossing probability at height h2 against the exponential bound
    exp(-(h1-h2) (N/n) (1 - p)^(2N/n)).

    The statement's precondition (N >= n) and its proof's side condition
    (N/n < 1/2) exclude each other, so the report records which regime the
    inputs sit in instead of asserting the bound.
    """
    if h1 < h2:
        raise ValueError("need h1 >= h2")
    if n < 1 or N < 1:
        raise ValueError("scales must be >= 1")
    box, rect = crossing_geometry(n)
    green = build_green(box)
    event = CrossingEvent(rect, VERTICAL)
    counts = scan_counts(green, [h2], [event], M, StreamKey(master_seed))
    p = counts[0, 0] / M
    a = (h1 - h2) * (N / n)
    b = 2.0 * N / n
    rhs = math.exp(-a * (1.0 - p) ** b)
    margin = rhs - p
    se_p = math.sqrt(p * (1 - p) / M)
    if p < 1.0:
        drhs = rhs * a * b * (1.0 - p) ** (b - 1.0)
    else:
        drhs = 0.0
    se = abs(drhs - 1.0) * se_p
    flags = []
    if N < n:
        flags.append("statement-precondition-violated")
    if N / n >= 0.5:
        flags.append("proof-side-condition-violated")
    return CheckReport(
        "height-shift", p, rhs, margin, se, _verdict(margin, se), master_seed,
        params={"n": n, "N": N, "h1": h1, "h2": h2, "M": M,
                "N_over_n": N / n, "p_hat": p},
        flags=tuple(flags),
    )


def check_coupling_bound(n: int, h0: float, h1: float, M: int,
                         master_seed: int) -> CheckReport:
    """Hard-crossing coupling product against a power of the origin-to-frame
    connection probability.

    The exponent constant is unspecified, so the checker solves for the
    implied constant c* that makes the bound tight; the bound holds for some
    positive constant iff c* > 0.  The margin is c* itself.
    """
    if not h0 < h1:
        raise ValueError("need h0 < h1")
    flags = []
    if not (h0 < h1 < 0):
        flags.append("outside-stated-height-range")
    root = StreamKey(master_seed)
    box, rect = crossing_geometry(n)
    green = build_green(box)
    hc = CrossingEvent(rect, HORIZONTAL)
    counts = scan_counts(green, [h0, h1], [hc], M, derive(root, 0))
    pa = counts[0, 0] / M  # P_{h0}[HC], shared replicas with
    pb = counts[1, 0] / M  # P_{h1}[HC]
    base_box = build_box(n)
    base_green = build_green(base_box)
    ring = OriginToRingEvent(default_ring_radius(n))
    base_counts = scan_counts(base_green, [h1], [ring], M, derive(root, 1))
    pc = base_counts[0, 0] / M  # origin-to-frame proxy for the max over sites

    lhs = pa * (1.0 - pb)
    params = {"n": n, "h0": h0, "h1": h1, "M": M,
              "p_hc_h0": pa, "p_hc_h1": pb, "p_base": pc}
    if lhs <= 0.0:
        flags.append("lhs-zero")
        return CheckReport("coupling", lhs, pc, math.inf, 0.0, HOLDS,
                           master_seed, params=params, flags=tuple(flags))
    if pc >= 1.0:
        flags.append("base-degenerate-one")
        return CheckReport("coupling", lhs, pc, math.inf, 0.0, HOLDS,
                           master_seed, params=params, flags=tuple(flags))
    if pc <= 0.0:
        flags.append("base-degenerate-zero")
        verdict = HOLDS if lhs == 0.0 else VIOLATED_WITHIN_NOISE
        return CheckReport("coupling", lhs, pc, math.nan, math.nan, verdict,
                           master_seed, params=params, flags=tuple(flags))

    D = (h1 - h0) * math.log(pc)
    c_star = math.log(lhs) / D
    # delta method; HC estimates share replicas (nested), base is independent
    va = pa * (1 - pa) / M
    vb = pb * (1 - pb) / M
    vc = pc * (1 - pc) / M
    cab = pb * (1 - pa) / M
    da = 1.0 / (pa * D)
    db = -1.0 / ((1.0 - pb) * D)
    dc = -c_star / (pc * math.log(pc))
    var = da * da * va + db * db * vb + 2 * da * db * cab + dc * dc * vc
    se = math.sqrt(max(var, 0.0))
    params["c_star"] = c_star
    verdict = HOLDS if c_star > 0 else _verdict(c_star, se)
    return CheckReport("coupling", lhs, pc, c_star, se, verdict, master_seed,
                       params=params, flags=tuple(flags))


def check_dual_decay(h: float, distances, n: int, M: int, master_seed: int
                     ) -> tuple[CheckReport, DecayFit | None]:
    """Exponential decay of star-connectivity in the closed set.

    Estimates P_h[origin star-connected to origin + (d, 0)] for each
    distance d, fits -log p against d, and holds iff the fitted rate is
    positive with r2 > 0.9.
    """
    distances = sorted(set(int(d) for d in distances))
    if not distances or distances[0] < 1:
        raise ValueError("need positive distances")
    flags = []
    if h >= 0:
        flags.append("outside-stated-height-range")
    box = build_box(n)
    ox, oy = box.origin
    if ox + distances[-1] >= box.n:
        raise ValueError(f"distance {distances[-1]} leaves box of side {n}")
    events = [DualConnectedEvent(box.origin, (ox + d, oy)) for d in distances]
    green = build_green(box)
    counts = scan_counts(green, [h], events, M, StreamKey(master_seed))
    probs = (counts[0] / M).tolist()
    params = {"h": h, "n": n, "M": M,
              "distances": distances, "p_hat": probs}
    if all(p == 0.0 for p in probs):
        flags.append("holds-vacuously")
        report = CheckReport("dual-decay", 0.0, 0.0, 0.0, 0.0, HOLDS,
                             master_seed, params=params, flags=tuple(flags))
        return report, None
    try:
        fit = fit_decay(list(zip(distances, probs)))
    except ValueError:
        flags.append("too-few-positive-points")
        report = CheckReport("dual-decay", math.nan, math.nan, math.nan,
                             math.nan, VIOLATED_WITHIN_NOISE, master_seed,
                             params=params, flags=tuple(flags))
        return report, None
    se = _slope_se(fit, distances, probs, M)
    params.update({"rate": fit.rate, "r2": fit.r2})
    if fit.rate > 0 and fit.r2 > 0.9:
        verdict = HOLDS
    elif fit.rate < -3 * se:
        verdict = VIOLATED
    else:
        verdict = VIOLATED_WITHIN_NOISE
    report = CheckReport("dual-decay", 0.0, fit.rate, fit.rate, se, verdict,
                         master_seed, params=params, flags=tuple(flags))
    return report, fit


def _slope_se(fit: DecayFit, distances, probs, M: int) -> float:
    """Propagated standard error of the fitted slope from binomial noise."""
    pts = [(d, p) for d, p in zip(distances, probs) if p > 0]
    x = np.array([d for d, _ in pts], dtype=float)
    p = np.array([pv for _, pv in pts])
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        return math.inf
    w = (x - x.mean()) / sxx         # slope = sum w_i * y_i
    var_y = (1 - p) / (p * M)        # var of -log(p_hat), delta method
    return float(math.sqrt(np.sum(w * w * var_y)))
