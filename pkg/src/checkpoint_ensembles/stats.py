"""One-sample t-test and test-set bootstrap.

The Student-t tail probabilities come from a self-contained regularized
incomplete beta function (modified Lentz continued fraction, absolute
tolerance well below 1e-10), so results are reproducible and checkable
against tabulated quantiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class TTestResult:
    mean_diff: float
    ci_low: float
    ci_high: float
    t_stat: float
    p_value: float
    dof: int

    def to_dict(self) -> dict:
        return {
            "mean_diff": self.mean_diff,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "t_stat": self.t_stat,
            "p_value": self.p_value,
            "dof": self.dof,
        }


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    replicates: np.ndarray
    mean: float
    stddev: float
    redraws: int


class ZeroVarianceError(ValueError):
    """All differences are identical; the t statistic is undefined."""


_BETACF_MAX_ITER = 400
_BETACF_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, dof: int) -> float:
    """P(|T| >= |t|) for a Student-t variable with dof degrees of freedom."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if t == 0.0:
        return 1.0
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


def t_cdf(t: float, dof: int) -> float:
    p = t_two_sided_p(t, dof)
    return 1.0 - 0.5 * p if t >= 0 else 0.5 * p


def t_critical(confidence: float, dof: int) -> float:
    """Two-sided critical value: |T| exceeds it with probability 1-confidence."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    alpha = 1.0 - confidence
    lo, hi = 0.0, 1.0
    while t_two_sided_p(hi, dof) > alpha:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("critical value search diverged")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_two_sided_p(mid, dof) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def t_test_one_sample(diffs, confidence: float = 0.95) -> TTestResult:
    """Two-sided one-sample t-test of mean(diffs) against zero."""
    d = np.asarray(diffs, dtype=np.float64)
    if d.ndim != 1 or d.shape[0] < 2:
        raise ValueError("need at least two differences")
    n = d.shape[0]
    mean = float(d.mean())
    var = float(d.var(ddof=1))
    if var == 0.0:
        raise ZeroVarianceError("zero variance in differences")
    se = math.sqrt(var / n)
    t = mean / se
    dof = n - 1
    p = t_two_sided_p(t, dof)
    tc = t_critical(confidence, dof)
    return TTestResult(
        mean_diff=mean,
        ci_low=mean - tc * se,
        ci_high=mean + tc * se,
        t_stat=t,
        p_value=p,
        dof=dof,
    )


class BootstrapError(RuntimeError):
    """The metric was undefined on more than half of the attempted resamples."""


_MAX_REDRAWS_PER_REPLICATE = 50


def bootstrap_metric(
    scores,
    labels,
    metric: Callable[[np.ndarray, np.ndarray], float],
    B: int = 50,
    seed: int = 0,
) -> BootstrapResult:
    """B metric values on with-replacement resamples of (score, label) pairs.

    Each replicate draws its indices from an RNG seeded by (seed, replicate,
    attempt), so results do not depend on evaluation order.  Resamples on
    which the metric raises ValueError (e.g. a single-class draw for PR-AUC)
    are redrawn; the total redraw count is reported.
    """
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    if scores.shape[0] < 1 or scores.shape[0] != labels.shape[0]:
        raise ValueError("scores and labels must be non-empty and equal length")
    if B < 2:
        raise ValueError("B must be >= 2")
    n = scores.shape[0]
    replicates = np.empty(B)
    attempts = 0
    failures = 0
    for i in range(B):
        for attempt in range(_MAX_REDRAWS_PER_REPLICATE + 1):
            attempts += 1
            rng = np.random.default_rng([seed, i, attempt])
            idx = rng.integers(0, n, size=n)
            try:
                replicates[i] = float(metric(scores[idx], labels[idx]))
                break
            except ValueError:
                failures += 1
        else:
            raise BootstrapError(
                f"metric undefined on {failures}/{attempts} attempted resamples"
            )
    if failures > attempts / 2:
        raise BootstrapError(
            f"metric undefined on {failures}/{attempts} attempted resamples"
        )
    return BootstrapResult(
        replicates=replicates,
        mean=float(replicates.mean()),
        stddev=float(replicates.std(ddof=1)),
        redraws=failures,
    )
