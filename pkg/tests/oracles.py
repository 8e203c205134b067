"""Independent oracles used by the tests.

Deliberately coded without reference to the package internals: series
formulas, brute-force sums, and a trade-by-trade cash ledger.
"""

from __future__ import annotations

import math

import numpy as np


def corridor_stay_probability(half_width: float, horizon: float = 1.0, terms: int = 400) -> float:
    """P(sup_{[0,T]} |B_t| < a) for standard Brownian motion.

    Classical eigenfunction series:
    (4/pi) * sum over odd k of ((-1)^((k-1)/2) / k) * exp(-k^2 pi^2 T / (8 a^2)).
    """
    a = half_width
    total = 0.0
    for k in range(1, 2 * terms, 2):
        sign = -1.0 if ((k - 1) // 2) % 2 else 1.0
        total += (4.0 / math.pi) * (sign / k) * math.exp(-(k * k) * math.pi**2 * horizon / (8.0 * a * a))
    return total


def fbm_covariance(s: float, t: float, hurst: float) -> float:
    """Closed-form fractional Brownian covariance."""
    h2 = 2.0 * hurst
    return 0.5 * (s**h2 + t**h2 - abs(t - s) ** h2)


def cash_ledger_terminal(
    times: np.ndarray,
    prices: np.ndarray,
    breakpoints: np.ndarray,
    holdings: np.ndarray,
    rate: float,
) -> float:
    """Trade-by-trade cash-and-inventory bookkeeping, liquidated at the end.

    Buying/selling d units at price p moves cash by -p*d and costs rate*p*|d|;
    final liquidation sells the inventory at the last price with the same
    proportional charge.
    """
    cash = 0.0
    inventory = 0.0
    for when, target in zip(breakpoints, holdings):
        k = int(np.flatnonzero(times == when)[0])
        price = prices[k]
        trade = target - inventory
        cash -= price * trade + rate * price * abs(trade)
        inventory = target
    last = prices[-1]
    cash += last * inventory - rate * last * abs(inventory)
    return cash


def brute_force_total_variation(holdings: np.ndarray) -> float:
    """Sum of absolute jump sizes starting from a flat position."""
    previous = 0.0
    total = 0.0
    for h in holdings:
        total += abs(h - previous)
        previous = h
    return total
