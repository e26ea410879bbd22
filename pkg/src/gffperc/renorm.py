"""Deterministic evaluation of the multi-scale recursions and scale-function
bounds used by the crossing-probability arguments.  No randomness here.

Easy mode runs the square-root/height-shift recursion forward from a free
parameter delta0:

    delta_{k+1} = delta_k^2,  n_{k+1} = n_k / delta_k^2,  h_{k+1} = h_k - delta_k

and is carried in exact rational arithmetic so the telescoping identities
hold exactly, not just to roundoff.  Hard mode halves the scale and closes
half of the remaining height gap per step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

from .inequalities import CheckReport, HOLDS, VIOLATED

__all__ = [
    "RenormSequences",
    "BetaTrajectory",
    "easy_sequences",
    "hard_sequences",
    "check_product_bound",
    "log_log_ratio",
    "max_supported_crossings",
    "crossing_bound_iteration",
]


class ScaleWarning(UserWarning):
    """Scale fell below the lattice spacing."""


@dataclass(frozen=True)
class RenormSequences:
    """Scale/height/contraction sequences for one mode, indices 0..K."""

    mode: str  # "easy" | "hard"
    deltas: tuple[float, ...]
    scales: tuple[float, ...]
    heights: tuple[float, ...]
    sum_deltas: float = math.nan
    squared_products: tuple[float, ...] = ()  # prod_{i<=k} delta_i^2
    # exact mirrors (easy mode only); empty tuples in hard mode
    deltas_exact: tuple[Fraction, ...] = ()
    scales_exact: tuple[Fraction, ...] = ()
    squared_products_exact: tuple[Fraction, ...] = ()

    @property
    def K(self) -> int:
        return len(self.scales) - 1


def easy_sequences(delta0: float, n0: float, h0: float, K: int) -> RenormSequences:
    """Forward contraction recursion from delta0 in (0, 1), exact rationals."""
    if not 0.0 < delta0 < 1.0:
        raise ValueError("delta0 must lie in (0, 1)")
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if K < 0:
        raise ValueError("K must be >= 0")
    d = Fraction(delta0)
    n = Fraction(n0)
    h = Fraction(h0)
    deltas = [d]
    scales = [n]
    heights = [h]
    products = [d * d]
    for _ in range(K):
        n = n / (d * d)
        h = h - d
        d = d * d
        deltas.append(d)
        scales.append(n)
        heights.append(h)
        products.append(products[-1] * d * d)
    return RenormSequences(
        mode="easy",
        deltas=tuple(float(v) for v in deltas),
        scales=tuple(float(v) for v in scales),
        heights=tuple(float(v) for v in heights),
        sum_deltas=float(sum(deltas)),
        squared_products=tuple(float(v) for v in products),
        deltas_exact=tuple(deltas),
        scales_exact=tuple(scales),
        squared_products_exact=tuple(products),
    )


def hard_sequences(n0: float, h0: float, h: float, K: int) -> RenormSequences:
    """Scale halving with heights h_k = h + (h0 - h) 2^-k decreasing to h."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if not h0 > h:
        raise ValueError("need h0 > h")
    if K < 0:
        raise ValueError("K must be >= 0")
    gap = h0 - h
    scales = tuple(n0 * 2.0 ** -k for k in range(K + 1))
    # scaling by 2^-k is exact, so h_K - h == gap * 2^-K exactly
    heights = tuple(h + gap * 2.0 ** -k for k in range(K + 1))
    if scales[-1] < 1.0:
        warnings.warn(f"scale {scales[-1]} fell below the lattice spacing",
                      ScaleWarning, stacklevel=2)
    return RenormSequences(mode="hard", deltas=(), scales=scales, heights=heights)


def check_product_bound(seq: RenormSequences, k: int) -> CheckReport:
    """Exact check of prod_{i<=k} delta_i^2 <= 2 n_0 / n_{k+1} (easy mode).

    The recursion telescopes to equality with n_0 / n_{k+1}, so the bound
    holds with a factor-2 slack; both sides are evaluated as exact rationals.
    """
    if seq.mode != "easy":
        raise ValueError("product bound applies to easy-mode sequences")
    if not 0 <= k <= seq.K:
        raise ValueError(f"k must be in 0..{seq.K}")
    lhs = seq.squared_products_exact[k]
    if k + 1 <= seq.K:
        n_next = seq.scales_exact[k + 1]
    else:
        n_next = seq.scales_exact[k] / (seq.deltas_exact[k] ** 2)
    rhs = 2 * seq.scales_exact[0] / n_next
    margin = rhs - lhs
    verdict = HOLDS if margin >= 0 else VIOLATED
    return CheckReport(
        "product-bound", float(lhs), float(rhs), float(margin), 0.0, verdict,
        seed=0, params={"k": k, "delta0": seq.deltas[0],
                        "exact_ratio": float(lhs / rhs)},
    )


def log_log_ratio(x: float) -> float | None:
    """log(-1/x) / log(log(-1/x)) for x < 0; -inf sentinel for x >= 0.

    Returns None (the undefined flag) where the inner logs are nonpositive,
    i.e. outside x in (-1/e, 0); a silently sign-flipped value there would
    corrupt any bound built on top.
    """
    if x >= 0.0:
        return -math.inf
    u = -1.0 / x
    if u <= 1.0:
        return None
    level = math.log(u)
    denom = math.log(level)
    if denom <= 0.0:
        return None
    return level / denom


def max_supported_crossings(p: float, c0: float, c1: float) -> int:
    """Largest integer I >= 1 with I^2 <= c0 * p^(1 - c1/I); 0 if none."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if c0 <= 0 or c1 <= 0:
        raise ValueError("constants must be positive")
    if p == 0.0:
        return 0
    best = 0
    i = 1
    # LHS grows and RHS falls with I, so stop at the first failure
    while i * i <= c0 * p ** (1.0 - c1 / i):
        best = i
        i += 1
    return best


@dataclass(frozen=True)
class BetaTrajectory:
    """Iterates of the doubly-exponential crossing-bound map."""

    values: tuple[float, ...]
    halted_at: int | None      # step whose map input left the valid domain
    monotone_decreasing: bool
    collapsed_toward_zero: bool  # final value below 1e-6 without halting


def crossing_bound_iteration(beta0: float, h2: float, h1: float, delta: float,
                             c_outer: float, c_inner: float, K: int) -> BetaTrajectory:
    """Iterate beta_{k+1} = exp(-c_outer * 2 * (h2-h1) * delta *
    exp(c_inner * f(-beta_k))) with f = log_log_ratio and scale ratio 2.

    The scale function is finite only on negative arguments, so the current
    crossing bound is negated before applying it; betas at or above 1/e sit
    outside the valid domain and halt the iteration with a flag.  Constants
    are caller inputs; nothing here fixes them.
    """
    if not 0.0 < beta0 < 1.0:
        raise ValueError("beta0 must lie in (0, 1)")
    if delta <= 0 or c_outer <= 0 or c_inner <= 0:
        raise ValueError("constants must be positive")
    if h2 < h1:
        raise ValueError("need h2 >= h1")
    if K < 0:
        raise ValueError("K must be >= 0")
    values = [float(beta0)]
    halted_at = None
    for k in range(K):
        f_val = log_log_ratio(-values[-1])
        if f_val is None:
            halted_at = k
            break
        rate = c_outer * 2.0 * (h2 - h1) * delta * math.exp(c_inner * f_val)
        values.append(math.exp(-rate))
        if values[-1] == 0.0:
            break  # underflowed to the absorbing point of the map
    monotone = all(b <= a for a, b in zip(values, values[1:]))
    collapsed = halted_at is None and values[-1] < 1e-6
    return BetaTrajectory(tuple(values), halted_at, monotone, collapsed)
