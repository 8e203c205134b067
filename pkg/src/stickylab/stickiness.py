"""Monte Carlo estimation of the stickiness probability and consistency
checks across its equivalent characterizations.

A path counts as a success when, from the stop time, it stays strictly
inside the epsilon-tube of its stopped value over the whole window (grid
points only, so the discrete estimate upper-bounds staying probabilities).
"Positive probability" is undecidable from finite samples; the convention
used everywhere: verdict POSITIVE iff at least one success and the Wilson
lower bound is positive, verdict ZERO iff no successes, in which case the
one-sided upper bound is reported alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.stats import norm

from .errors import InvalidArgumentError
from .pathgen import Array, Ensemble
from .stopping import (
    EventDescriptor,
    StoppingRule,
    StopResult,
    WholeSpace,
    evaluate_event,
    evaluate_rule,
)

__all__ = [
    "StickinessQuery",
    "StickinessEstimate",
    "CrossCheckReport",
    "wilson_ci",
    "zero_success_upper_bound",
    "estimate_stickiness",
    "survival_ladder",
    "cross_check_characterizations",
]

Characterization = Literal["def-a", "prop-b", "prop-c"]


@dataclass(frozen=True)
class StickinessQuery:
    """The (tau, T, epsilon, A) tuple plus the characterization to count by."""

    tau: StoppingRule
    horizon: float
    epsilon: float
    event: EventDescriptor = WholeSpace()
    characterization: Characterization = "def-a"
    # prop-c hitting threshold; defaults to epsilon so the three forms count
    # events on the same scale (the restart survives iff sup <= delta)
    delta: float | None = None
    ladder: tuple[float, ...] | None = None  # prop-c horizons; defaults to (horizon,)
    confidence: float = 0.95

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0.0):
            raise InvalidArgumentError("epsilon must be positive")
        if not (np.isfinite(self.horizon) and self.horizon > 0.0):
            raise InvalidArgumentError("horizon must be positive")
        if not (0.0 < self.confidence < 1.0):
            raise InvalidArgumentError("confidence must lie in (0, 1)")
        if self.characterization not in ("def-a", "prop-b", "prop-c"):
            raise InvalidArgumentError(f"unknown characterization {self.characterization!r}")
        if self.characterization == "prop-c":
            if self.delta is not None and self.delta <= 0.0:
                raise InvalidArgumentError("prop-c delta must be positive")
            if self.ladder is not None:
                steps = np.asarray(self.ladder, dtype=np.float64)
                if steps.size == 0 or np.any(np.diff(steps) <= 0.0):
                    raise InvalidArgumentError("ladder must be strictly increasing")


@dataclass(frozen=True)
class StickinessEstimate:
    p_hat: float
    successes: int
    n: int
    ci_low: float
    ci_high: float
    confidence: float
    verdict: str  # POSITIVE | ZERO | INCONCLUSIVE
    zero_upper: float | None  # one-sided upper bound, reported when successes = 0
    query: StickinessQuery


@dataclass(frozen=True)
class CrossCheckReport:
    def_a: StickinessEstimate
    prop_b: StickinessEstimate
    prop_c: StickinessEstimate
    agree: bool

    @property
    def verdicts(self) -> dict[str, str]:
        return {
            "def-a": self.def_a.verdict,
            "prop-b": self.prop_b.verdict,
            "prop-c": self.prop_c.verdict,
        }


# ------------------------------ intervals ------------------------------ #


def wilson_ci(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Two-sided Wilson score interval for a binomial proportion."""
    if n < 1 or successes < 0 or successes > n:
        raise InvalidArgumentError(f"invalid counts: {successes} successes of {n}")
    if not (0.0 < level < 1.0):
        raise InvalidArgumentError("confidence level must lie in (0, 1)")
    z = float(norm.ppf(0.5 + level / 2.0))
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == n else min(1.0, center + half)
    return (low, high)


def zero_success_upper_bound(n: int, level: float = 0.95) -> float:
    """One-sided Wilson upper bound on p when no successes were observed."""
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    z = float(norm.ppf(level))
    return z * z / (n + z * z)


def _verdict(successes: int, ci_low: float) -> str:
    if successes == 0:
        return "ZERO"
    return "POSITIVE" if ci_low > 0.0 else "INCONCLUSIVE"


# ------------------------------ per-path counting ------------------------------ #


def _window_sup(x: Array, start: int, end: int) -> float:
    # max |x_t - x_start| over grid indices start..end inclusive
    return float(np.max(np.abs(x[start : end + 1] - x[start])))


def _capped_stop(query: StickinessQuery, path, end_index: int) -> StopResult:
    # tau wedge T: a bounded surrogate used by the (b) and (c) forms
    stop = evaluate_rule(query.tau, path)
    if stop.stopped and stop.index <= end_index:
        return stop
    return StopResult.at(path.grid.times[end_index], end_index)


def _success(query: StickinessQuery, path, end_index: int) -> bool:
    if query.characterization == "def-a":
        stop = evaluate_rule(query.tau, path)
        if not (stop.stopped and stop.time < query.horizon):
            return False
        if not evaluate_event(query.event, path, stop):
            return False
        return _window_sup(path.values, stop.index, end_index) < query.epsilon
    if query.characterization == "prop-b":
        stop = _capped_stop(query, path, end_index)
        if not evaluate_event(query.event, path, stop):
            return False
        return _window_sup(path.values, stop.index, end_index) < query.epsilon
    # prop-c: the restart time from the capped stop survives the top horizon
    delta = query.delta if query.delta is not None else query.epsilon
    top = query.ladder[-1] if query.ladder else query.horizon
    top_index = path.grid.last_index_at_or_before(top)
    stop = _capped_stop(query, path, end_index)
    if not evaluate_event(query.event, path, stop):
        return False
    seg = np.abs(path.values[stop.index : top_index + 1] - path.values[stop.index])
    return not (seg > delta).any()  # alive at the top of the ladder


def estimate_stickiness(ensemble: Ensemble, query: StickinessQuery) -> StickinessEstimate:
    """Count per-path successes for the query and wrap them in a Wilson CI.

    Deterministic given the ensemble: indicators are reduced in path order.
    """
    horizon = ensemble.grid.horizon
    if query.horizon > horizon * (1.0 + 1e-12):
        raise InvalidArgumentError(
            f"query horizon {query.horizon} exceeds grid horizon {horizon}"
        )
    if query.characterization == "prop-c" and query.ladder:
        if query.ladder[-1] > horizon * (1.0 + 1e-12):
            raise InvalidArgumentError("ladder horizons exceed the grid span")
    end_index = ensemble.grid.last_index_at_or_before(query.horizon)
    successes = 0
    for i in range(ensemble.n_paths):
        if _success(query, ensemble.path(i), end_index):
            successes += 1
    n = ensemble.n_paths
    low, high = wilson_ci(successes, n, query.confidence)
    return StickinessEstimate(
        p_hat=successes / n,
        successes=successes,
        n=n,
        ci_low=low,
        ci_high=high,
        confidence=query.confidence,
        verdict=_verdict(successes, low),
        zero_upper=zero_success_upper_bound(n, query.confidence) if successes == 0 else None,
        query=query,
    )


def survival_ladder(
    ensemble: Ensemble,
    tau0: StoppingRule,
    delta: float,
    horizons,
) -> Array:
    """Fraction of paths whose restart time ``inf{t >= tau0 : |X_t - X_tau0| > delta}``
    exceeds each horizon; nonincreasing in the horizon by construction.

    Paths whose restart never triggers within the grid survive every horizon.
    """
    horizons = np.asarray(horizons, dtype=np.float64)
    if horizons.size == 0:
        raise InvalidArgumentError("horizon ladder must be nonempty")
    if np.any(np.diff(horizons) <= 0.0):
        raise InvalidArgumentError("horizon ladder must be strictly increasing")
    if horizons[-1] > ensemble.grid.horizon * (1.0 + 1e-12):
        raise InvalidArgumentError("ladder horizons exceed the grid span")
    if delta <= 0.0:
        raise InvalidArgumentError("delta must be positive")

    survivors = np.zeros(horizons.size, dtype=np.int64)
    for i in range(ensemble.n_paths):
        path = ensemble.path(i)
        stop = evaluate_rule(tau0, path)
        if not stop.stopped:
            survivors += 1
            continue
        seg = np.abs(path.values[stop.index :] - path.values[stop.index])
        exceeded = seg > delta
        if not exceeded.any():
            survivors += 1
            continue
        t1 = path.grid.times[stop.index + int(np.argmax(exceeded))]
        survivors += t1 > horizons
    return survivors / ensemble.n_paths


def cross_check_characterizations(
    ensemble: Ensemble, query: StickinessQuery
) -> CrossCheckReport:
    """Run all three characterizations on the same ensemble and compare
    positivity verdicts; disagreement is reported, never reconciled."""
    est_a = estimate_stickiness(ensemble, replace(query, characterization="def-a"))
    est_b = estimate_stickiness(ensemble, replace(query, characterization="prop-b"))
    est_c = estimate_stickiness(ensemble, replace(query, characterization="prop-c"))
    verdicts = {est_a.verdict, est_b.verdict, est_c.verdict}
    return CrossCheckReport(est_a, est_b, est_c, agree=len(verdicts) == 1)
