"""McNemar and Welch tests plus the tail probabilities they need."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_model import DataError, FeatureMatrix

_BETACF_MAX_ITER = 500
_BETACF_EPS = 1e-16
_TINY = 1e-300


def chi2_sf_1df(x: float) -> float:
    """Upper tail of the chi-square distribution with one degree of freedom."""
    if not x >= 0:
        raise ValueError(f"chi-square statistic must be >= 0, got {x}")
    return math.erfc(math.sqrt(x / 2.0))


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
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
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a: float, b: float, x: float, one_minus_x: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b).

    `one_minus_x` may be passed when 1 - x is known more accurately than by
    subtraction.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    y = 1.0 - x if one_minus_x is None else one_minus_x
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log(y)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with `df` degrees of freedom."""
    if not df > 0:
        raise ValueError(f"degrees of freedom must be > 0, got {df}")
    if math.isnan(t):
        raise ValueError("t is NaN")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    t2 = t * t
    denom = df + t2
    # P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    tail = 0.5 * betainc_reg(df / 2.0, 0.5, df / denom, t2 / denom)
    return tail if t >= 0 else 1.0 - tail


@dataclass(frozen=True)
class McNemarResult:
    chi2: float
    p: float
    b: int
    c: int
    concordant: int


def mcnemar(a_correct, b_correct) -> McNemarResult:
    """Continuity-corrected McNemar test on paired correctness vectors.

    b counts rows where A is right and B wrong, c the reverse.
    """
    a = np.asarray(a_correct, dtype=bool)
    bb = np.asarray(b_correct, dtype=bool)
    if a.shape != bb.shape or a.ndim != 1 or a.size < 1:
        raise ValueError("need two equal-length, nonempty correctness vectors")
    b = int(np.sum(a & ~bb))
    c = int(np.sum(~a & bb))
    if b + c == 0:
        return McNemarResult(0.0, 1.0, b, c, a.size)
    num = max(abs(b - c) - 1, 0)
    chi2 = num * num / (b + c)
    return McNemarResult(chi2, chi2_sf_1df(chi2), b, c, a.size - b - c)


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p_two_tail: float
    degenerate: bool = False


def welch_t(x, y) -> WelchResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise ValueError("each sample needs at least 2 observations")
    mx, my = x.mean(), y.mean()
    vx = 0.0 if x.max() == x.min() else x.var(ddof=1)
    vy = 0.0 if y.max() == y.min() else y.var(ddof=1)
    ax, ay = vx / nx, vy / ny
    se2 = ax + ay
    if se2 == 0.0:
        if mx == my:
            return WelchResult(0.0, float(nx + ny - 2), 1.0, degenerate=True)
        return WelchResult(math.copysign(math.inf, mx - my), float(nx + ny - 2), 0.0, degenerate=True)
    t = (mx - my) / math.sqrt(se2)
    df = se2 * se2 / (ax * ax / (nx - 1) + ay * ay / (ny - 1))
    p = min(1.0, 2.0 * student_t_sf(abs(t), df))
    return WelchResult(float(t), float(df), float(p))


@dataclass(frozen=True)
class RankedColumn:
    column: str
    welch: WelchResult
    rank: int


def rank_transferable_features(source: FeatureMatrix, target: FeatureMatrix) -> list[RankedColumn]:
    """Columns ordered from most to least similar cross-domain distribution.

    Similarity is the two-tailed Welch p-value (largest first); ties keep
    column order.
    """
    if source.column_names != target.column_names:
        raise DataError("source and target must share the same columns")
    results = [welch_t(source.X[:, j], target.X[:, j]) for j in range(len(source.column_names))]
    order = sorted(range(len(results)), key=lambda j: -results[j].p_two_tail)
    return [RankedColumn(source.column_names[j], results[j], r) for r, j in enumerate(order, start=1)]
