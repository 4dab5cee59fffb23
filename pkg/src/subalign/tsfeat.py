"""Fixed-length time-series attributes for variable-length frame series.

Each series is summarized by 12 attributes:

* ``mean`` and ``std`` (population),
* aggregated autocorrelation over lags ``1..min(40, n-1)`` with the
  aggregators mean, median, variance and std,
* change-quantile means for the corridors (0.0, 0.4), (0.2, 0.6), (0.4, 0.8),
  each with signed and absolute differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data_model import (
    COLUMN_SEP,
    DataError,
    FeatureMatrix,
    FeatureSchema,
    FrameSeries,
    Manifest,
    load_frame_csv,
)

MAX_LAG = 40
CORRIDORS = ((0.0, 0.4), (0.2, 0.6), (0.4, 0.8))


def _is_constant(x: np.ndarray) -> bool:
    return x.max() == x.min()


def autocorrelations(x: np.ndarray, max_lag: int = MAX_LAG) -> np.ndarray:
    """Normalized autocorrelation for lags 1..min(max_lag, n-1).

    Returns an empty array when no lag is available or the series is constant.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    n_lags = min(max_lag, n - 1)
    if n_lags < 1 or _is_constant(x):
        return np.empty(0)
    xc = x - x.mean()
    var = np.mean(xc * xc)
    if var == 0.0:
        return np.empty(0)
    return np.array([np.dot(xc[: n - lag], xc[lag:]) / ((n - lag) * var) for lag in range(1, n_lags + 1)])


def _agg_autocorr(agg: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    def attr(x):
        ac = autocorrelations(x)
        return float(agg(ac)) if ac.size else 0.0

    return attr


def _order_stat_bounds(xs: np.ndarray, q: float) -> tuple[float, float]:
    """Smallest data value >= Q(q) and largest data value <= Q(q).

    Q is the linear-interpolation ("type 7") quantile. Comparing frames with
    these data values instead of the interpolated Q keeps the corridor
    membership exact under shifts and positive scaling.
    """
    h = (len(xs) - 1) * q
    # (n-1)*0.4 etc. may land a hair off an integer
    if abs(h - round(h)) < 1e-9:
        h = float(round(h))
    j = int(np.floor(h))
    if h > j and xs[j] < xs[j + 1]:
        return xs[j + 1], xs[j]
    return xs[j], xs[j]


def corridor_mask(x: np.ndarray, q_lo: float, q_hi: float) -> np.ndarray:
    """Frames whose value lies within [Q(q_lo), Q(q_hi)]."""
    xs = np.sort(x)
    lo, _ = _order_stat_bounds(xs, q_lo)
    _, hi = _order_stat_bounds(xs, q_hi)
    return (x >= lo) & (x <= hi)


def change_quantile(x: np.ndarray, q_lo: float, q_hi: float, absolute: bool) -> float:
    """Mean change between consecutive frames that both lie in the corridor."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return 0.0
    inside = corridor_mask(x, q_lo, q_hi)
    both = inside[:-1] & inside[1:]
    if not both.any():
        return 0.0
    d = np.diff(x)[both]
    if absolute:
        d = np.abs(d)
    return float(d.mean())


def _mean(x):
    return float(np.mean(x))


def _std(x):
    return 0.0 if _is_constant(x) else float(np.std(x))


def _change_quantile_attr(q_lo, q_hi, absolute):
    return lambda x: change_quantile(x, q_lo, q_hi, absolute)


@dataclass(frozen=True)
class AttributeSet:
    names: tuple[str, ...]
    functions: tuple[Callable[[np.ndarray], float], ...]

    def __post_init__(self):
        if len(self.names) != len(self.functions):
            raise ValueError("names and functions differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("attribute names must be unique")
        for n in self.names:
            if COLUMN_SEP in n:
                raise ValueError(f"attribute name {n!r} may not contain {COLUMN_SEP!r}")

    def __len__(self):
        return len(self.names)


def _default_attributes() -> AttributeSet:
    names = ["mean", "std"]
    funcs = [_mean, _std]
    for agg_name, agg in (("mean", np.mean), ("median", np.median), ("var", np.var), ("std", np.std)):
        names.append(f"agg_autocorr_{agg_name}")
        funcs.append(_agg_autocorr(agg))
    for q_lo, q_hi in CORRIDORS:
        for absolute in (False, True):
            names.append(f"change_quantiles_{q_lo:.1f}_{q_hi:.1f}_{'abs' if absolute else 'signed'}")
            funcs.append(_change_quantile_attr(q_lo, q_hi, absolute))
    return AttributeSet(tuple(names), tuple(funcs))


DEFAULT_ATTRIBUTES = _default_attributes()


def featurize_series(s: FrameSeries | np.ndarray, attrs: AttributeSet = DEFAULT_ATTRIBUTES) -> np.ndarray:
    values = s.values if isinstance(s, FrameSeries) else np.asarray(s, dtype=float)
    if len(values) < 1:
        raise DataError("cannot featurize an empty series")
    return np.array([f(values) for f in attrs.functions])


def column_names(feature_names: Sequence[str], attrs: AttributeSet = DEFAULT_ATTRIBUTES) -> tuple[str, ...]:
    return tuple(f"{f}{COLUMN_SEP}{a}" for f in feature_names for a in attrs.names)


def featurize_dataset(
    manifest: Manifest,
    schema: FeatureSchema,
    attrs: AttributeSet = DEFAULT_ATTRIBUTES,
    domain_tag: str = "source",
) -> FeatureMatrix:
    """Featurize every video in manifest order into one row per video."""
    if len(manifest) == 0:
        raise DataError("manifest has no entries")
    rows = []
    for entry in manifest.entries:
        try:
            series = load_frame_csv(entry.path, schema, entry.video_id)
        except (OSError, DataError) as e:
            raise DataError(f"video {entry.video_id}: {e}") from e
        rows.append(np.concatenate([featurize_series(s, attrs) for s in series]))
    labels = [e.label for e in manifest.entries]
    if all(lab is None for lab in labels):
        labels = None
    elif any(lab is None for lab in labels):
        raise DataError("manifest mixes labeled and unlabeled videos")
    return FeatureMatrix(
        tuple(e.video_id for e in manifest.entries),
        column_names(schema.names, attrs),
        np.vstack(rows),
        tuple(labels) if labels else None,
        domain_tag,
    )
