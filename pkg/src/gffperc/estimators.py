"""Seeded Monte Carlo estimation: event probabilities, decay fits, influence,
critical-height brackets, and the finite-difference inequality report.

Replicas are embarrassingly parallel by construction: replica i draws from
the substream (master_seed, i), so estimates are bit-reproducible and
independent of batching.  Sweeps over several heights reuse the same
replicas (common random numbers), which makes height monotonicity exact
pathwise, not just statistical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import CrossingEvent, Event, OriginToRingEvent
from .field import GreenOperator, build_green, sample_batch
from .lattice import VERTICAL, BoxLattice, build_box, crossing_geometry
from .levelset import LevelSet
from .rng import StreamKey

__all__ = [
    "Estimate",
    "DecayFit",
    "CriticalEstimate",
    "InfluenceEstimate",
    "DifferentialReport",
    "wilson_interval",
    "estimate_event",
    "estimate_events_shared",
    "boundary_connection_curve",
    "fit_decay",
    "estimate_critical_height",
    "estimate_influence",
    "differential_inequality_report",
    "curve_scales",
]

WILSON_Z = 1.96

# floats per sampling batch (~32 MB); batching never changes results
_BATCH_SCALARS = 2 ** 22


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval; stable at probabilities near 0 and 1."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    # the score interval always contains p; keep that true under roundoff
    return max(0.0, min(center - half, p)), min(1.0, max(center + half, p))


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo point estimate with a 95% Wilson interval."""

    event: str
    h: float
    n: int
    M: int
    successes: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    seed: int


def _make_estimate(event_label: str, h: float, n: int, M: int, successes: int,
                   seed: int) -> Estimate:
    lo, hi = wilson_interval(successes, M)
    return Estimate(event_label, float(h), n, M, int(successes),
                    successes / M, lo, hi, seed)


def _batch_rows(dim: int) -> int:
    return max(1, min(4096, _BATCH_SCALARS // max(dim, 1)))


def iter_sample_batches(green: GreenOperator, key: StreamKey, M: int):
    """Yield (start, Phi) sample blocks; replica start+r is row r of Phi."""
    rows = _batch_rows(green.dim)
    start = 0
    while start < M:
        b = min(rows, M - start)
        yield start, sample_batch(green, key, b, start=start)
        start += b


def _levelset_grids(green: GreenOperator):
    coords = np.asarray(green.vertices)
    return green.box.n, coords[:, 0], coords[:, 1]


def scan_counts(green: GreenOperator, h_list, events, M: int,
                key: StreamKey) -> np.ndarray:
    """Success counts, shape (len(h_list), len(events)), on shared replicas."""
    for ev in events:
        ev.validate(green.box)
    h_list = list(h_list)
    counts = np.zeros((len(h_list), len(events)), dtype=np.int64)
    n, xs, ys = _levelset_grids(green)
    for start, Phi in iter_sample_batches(green, key, M):
        for row in Phi:
            for hi, h in enumerate(h_list):
                grid = np.full((n, n), 0.0 >= h, dtype=bool)
                grid[xs, ys] = row >= h
                ls = LevelSet(green.box, h, grid)
                for ei, ev in enumerate(events):
                    if ev.evaluate(ls):
                        counts[hi, ei] += 1
    return counts


def estimate_event(box: BoxLattice, h: float, event: Event, M: int,
                   master_seed: int, green: GreenOperator | None = None) -> Estimate:
    """Estimate P_h[event] from M independent replicas."""
    if M < 1:
        raise ValueError("M must be >= 1")
    event.validate(box)
    if green is None:
        green = build_green(box)
    counts = scan_counts(green, [h], [event], M, StreamKey(master_seed))
    return _make_estimate(event.label(), h, box.n, M, int(counts[0, 0]), master_seed)


def estimate_events_shared(box: BoxLattice, h_list, events, M: int,
                           master_seed: int,
                           green: GreenOperator | None = None) -> list[list[Estimate]]:
    """Estimates for every (h, event) pair on one shared replica set.

    Sharing makes comparisons across heights exact: for an increasing event
    and h1 <= h2 the success indicators are pathwise nested.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if green is None:
        green = build_green(box)
    counts = scan_counts(green, h_list, events, M, StreamKey(master_seed))
    return [
        [
            _make_estimate(ev.label(), h, box.n, M, int(counts[hi, ei]), master_seed)
            for ei, ev in enumerate(events)
        ]
        for hi, h in enumerate(h_list)
    ]


def curve_host_box(n_list) -> BoxLattice:
    """Host box for nested origin-to-ring events: odd side >= max scale."""
    top = max(n_list)
    return build_box(top + 1 if top % 2 == 0 else top)


def boundary_connection_curve(h: float, n_list, M: int, master_seed: int,
                              green: GreenOperator | None = None
                              ) -> list[tuple[int, Estimate]]:
    """P_h[origin connected to the ring adjacent to the frame of the side-n
    sub-box], for each n, on shared replicas of one host box.

    The rings are nested, so on shared replicas the estimates are weakly
    decreasing in n, exactly.
    """
    n_list = sorted(set(int(n) for n in n_list))
    if not n_list:
        raise ValueError("empty scale list")
    if min(n_list) < 3:
        raise ValueError("scales must be >= 3")
    box = curve_host_box(n_list) if green is None else green.box
    events = [OriginToRingEvent(max(n // 2 - 1, 0)) for n in n_list]
    if green is None:
        green = build_green(box)
    counts = scan_counts(green, [h], events, M, StreamKey(master_seed))
    return [
        (n, _make_estimate(ev.label(), h, n, M, int(counts[0, ei]), master_seed))
        for ei, (n, ev) in enumerate(zip(n_list, events))
    ]


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of -log(p) against the scale."""

    rate: float       # decay constant per lattice unit
    intercept: float
    r2: float
    points: tuple[tuple[float, float], ...]  # (scale, p_hat) actually used
    degenerate: bool = False


def fit_decay(curve) -> DecayFit:
    """Fit -log(p_hat) = rate * n + intercept over points with p_hat > 0."""
    points = []
    for n, est in curve:
        p = est.p_hat if isinstance(est, Estimate) else float(est)
        if p > 0.0:
            points.append((float(n), p))
    if len(points) < 3:
        raise ValueError(f"need >= 3 points with positive estimates, have {len(points)}")
    x = np.array([n for n, _ in points])
    y = -np.log(np.array([p for _, p in points]))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-30:
        return DecayFit(0.0, float(y.mean()), 0.0, tuple(points), degenerate=True)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return DecayFit(float(slope), float(intercept), r2, tuple(points))


def curve_scales(n: int) -> list[int]:
    """Decreasing sub-scales used by the decay-rate criterion at scale n."""
    return sorted({max(4, n // 4), max(4, 3 * n // 8), max(4, n // 2),
                   max(4, 3 * n // 4), n})


@dataclass(frozen=True)
class CriticalEstimate:
    """Bisection bracket for a critical height under a named criterion."""

    criterion: str
    h_lo: float
    h_hi: float
    n: int
    M: int
    tol: float
    seed: int
    one_sided: str | None = None  # "low"/"high" when the bracket never flips
    history: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.h_lo > self.h_hi:
            raise ValueError("bracket inverted")


def estimate_critical_height(criterion: str, n: int, M: int, tol: float,
                             master_seed: int, bracket: tuple[float, float] = (-8.0, 8.0),
                             decay_eps: float = 0.02) -> CriticalEstimate:
    """Bisection bracket for the height where `criterion` flips.

    criterion "crossing": easy-direction crossing probability of the 2:1
    rectangle at scale n stays >= 1/2 (large-cluster proxy).
    criterion "decay": fitted decay rate of the origin-to-ring curve at
    sub-scales of n stays <= decay_eps (no-exponential-decay proxy).

    Both predicates hold at very negative heights and fail at very positive
    ones; every height is evaluated with the same master seed, so the
    crossing predicate is exactly monotone (common random numbers).
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo >= hi:
        raise ValueError("empty bracket")
    history: list[tuple[float, float]] = []

    if criterion == "crossing":
        box, rect = crossing_geometry(n)
        green = build_green(box)
        event = CrossingEvent(rect, VERTICAL)

        def predicate(h: float) -> bool:
            counts = scan_counts(green, [h], [event], M, StreamKey(master_seed))
            p = counts[0, 0] / M
            history.append((h, p))
            return p >= 0.5

    elif criterion == "decay":
        scales = curve_scales(n)
        green = build_green(curve_host_box(scales))

        def predicate(h: float) -> bool:
            curve = boundary_connection_curve(h, scales, M, master_seed, green=green)
            try:
                fit = fit_decay(curve)
                rate = fit.rate
            except ValueError:
                rate = math.inf  # all-zero curve: decay too fast to resolve
            history.append((h, rate))
            return rate <= decay_eps

    else:
        raise ValueError(f"unknown criterion {criterion!r}")

    if not predicate(lo):
        return CriticalEstimate(criterion, -math.inf, lo, n, M, tol, master_seed,
                                one_sided="low", history=tuple(history))
    if predicate(hi):
        return CriticalEstimate(criterion, hi, math.inf, n, M, tol, master_seed,
                                one_sided="high", history=tuple(history))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return CriticalEstimate(criterion, lo, hi, n, M, tol, master_seed,
                            history=tuple(history))


@dataclass(frozen=True)
class InfluenceEstimate:
    """Single-site conditional discrepancy P(A | site open) - P(A | site closed)."""

    x: tuple[int, int]
    event: str
    h: float
    i_hat: float
    n_above: int
    n_below: int
    k_above: int
    k_below: int
    se: float
    undefined: bool = False


def estimate_influence(box: BoxLattice, h: float, event: Event, x, M: int,
                       master_seed: int,
                       green: GreenOperator | None = None) -> InfluenceEstimate:
    """Influence of the site x on the event, by rejection-splitting.

    Unconditional replicas are split on the sign of phi_x - h; each branch
    average is an unbiased conditional estimate.  A branch with zero samples
    leaves the estimate undefined (flagged).
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    event.validate(box)
    if green is None:
        green = build_green(box)
    if tuple(x) not in green.index:
        raise ValueError(f"site {x} is not a live interior vertex")
    xi = green.index[tuple(x)]
    n, xs, ys = _levelset_grids(green)
    n1 = n0 = k1 = k0 = 0
    for _, Phi in iter_sample_batches(green, StreamKey(master_seed), M):
        above = Phi[:, xi] >= h
        for r, row in enumerate(Phi):
            grid = np.full((n, n), 0.0 >= h, dtype=bool)
            grid[xs, ys] = row >= h
            hit = event.evaluate(LevelSet(green.box, h, grid))
            if above[r]:
                n1 += 1
                k1 += hit
            else:
                n0 += 1
                k0 += hit
    if n1 == 0 or n0 == 0:
        return InfluenceEstimate(tuple(x), event.label(), h, math.nan,
                                 n1, n0, k1, k0, math.nan, undefined=True)
    p1, p0 = k1 / n1, k0 / n0
    se = math.sqrt(p1 * (1 - p1) / n1 + p0 * (1 - p0) / n0)
    return InfluenceEstimate(tuple(x), event.label(), h, p1 - p0, n1, n0, k1, k0, se)


@dataclass(frozen=True)
class DifferentialReport:
    """Finite-difference check of the height derivative against the
    probability-times-log-influence form.

    The level-set convention (open <=> phi >= h) makes increasing-event
    probabilities fall as h rises, so the measured derivative is <= 0 while
    the inequality as stated bounds it below by a positive quantity; both
    orientations of the implied constant are reported and the discrepancy is
    flagged rather than resolved.
    """

    event: str
    h: float
    dh: float
    p_minus: float
    p_mid: float
    p_plus: float
    derivative: float
    derivative_se: float
    influence_max: float
    influence_argmax: tuple[int, int] | None
    log_term: float | None
    rhs: float | None
    implied_constant: float | None
    implied_constant_flipped: float | None
    M: int
    seed: int
    flags: tuple[str, ...] = ()


def differential_inequality_report(box: BoxLattice, event: Event, h: float,
                                   dh: float, M: int, master_seed: int,
                                   green: GreenOperator | None = None) -> DifferentialReport:
    """Central finite difference of P_h[event] on common random numbers,
    with the worst-case (maximal) single-site influence at the mid height."""
    if dh <= 0:
        raise ValueError("dh must be > 0")
    if M < 1:
        raise ValueError("M must be >= 1")
    event.validate(box)
    if green is None:
        green = build_green(box)
    n, xs, ys = _levelset_grids(green)
    d = green.dim
    h_list = (h - dh, h, h + dh)
    counts = np.zeros(3, dtype=np.int64)
    diff_sum = 0
    diff_sq = 0
    site_n1 = np.zeros(d, dtype=np.int64)
    site_k1 = np.zeros(d, dtype=np.int64)
    for _, Phi in iter_sample_batches(green, StreamKey(master_seed), M):
        sites_open = Phi >= h
        hits = np.zeros((Phi.shape[0], 3), dtype=bool)
        for r, row in enumerate(Phi):
            for hi, hv in enumerate(h_list):
                grid = np.full((n, n), 0.0 >= hv, dtype=bool)
                grid[xs, ys] = row >= hv
                hits[r, hi] = event.evaluate(LevelSet(green.box, hv, grid))
        counts += hits.sum(axis=0)
        delta = hits[:, 2].astype(np.int64) - hits[:, 0].astype(np.int64)
        diff_sum += int(delta.sum())
        diff_sq += int((delta * delta).sum())
        site_n1 += sites_open.sum(axis=0)
        site_k1 += hits[:, 1].astype(np.int64) @ sites_open.astype(np.int64)
    p_minus, p_mid, p_plus = (counts / M).tolist()
    derivative = (p_plus - p_minus) / (2 * dh)
    var_delta = diff_sq / M - (diff_sum / M) ** 2
    derivative_se = math.sqrt(max(var_delta, 0.0) / M) / (2 * dh)

    flags: list[str] = []
    site_n0 = M - site_n1
    usable = (site_n1 > 0) & (site_n0 > 0)
    if not np.any(usable):
        flags.append("influence-undefined")
        inf_max, argmax = math.nan, None
    else:
        k1 = site_k1[usable]
        n1 = site_n1[usable]
        k0 = counts[1] - k1
        n0 = site_n0[usable]
        infl = k1 / n1 - k0 / n0
        j = int(np.argmax(infl))
        inf_max = float(infl[j])
        argmax = tuple(np.asarray(green.vertices)[usable][j].tolist())

    log_term = rhs = implied = implied_flipped = None
    if argmax is None or inf_max <= 0.0 or inf_max >= 2.0:
        flags.append("log-term-undefined")
    else:
        log_term = math.log(1.0 / (2.0 * inf_max))
        rhs = p_mid * (1.0 - p_mid) * log_term
        if rhs == 0.0:
            flags.append("rhs-degenerate")
        else:
            implied = derivative / rhs
            implied_flipped = -derivative / rhs
    if event.increasing and derivative < 0:
        flags.append("sign-convention-discrepancy")
    return DifferentialReport(event.label(), h, dh, p_minus, p_mid, p_plus,
                              derivative, derivative_se, inf_max, argmax,
                              log_term, rhs, implied, implied_flipped, M,
                              master_seed, tuple(flags))
