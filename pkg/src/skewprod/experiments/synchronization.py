"""Decay of fiber distances between orbits driven by the same word."""

from __future__ import annotations

import numpy as np

from .. import _kernels as K
from ..interval_maps import MapFamily, logit
from ..lyapunov import Regime
from ._common import WORDS, ExperimentRecord, check_regime, fan_out, stream_id, word_symbols

FIT_WINDOW = (1e-12, 1e-3)


def synchronization_experiment(family: MapFamily, pair_count: int, x_pairs, horizon: int, stride: int = 100,
                               seed: int = 0, workers: int | None = None) -> ExperimentRecord:
    """Median and 90th percentile of |f^n_w(x) - f^n_w(y)| over ``pair_count`` words per pair.

    Rows are (pair index, x0, y0, step, median, p90).  ``horizon`` should be a
    multiple of ``stride``.
    """
    check_regime(family, [Regime.SYNCHRONIZATION])
    if horizon % stride:
        raise ValueError("horizon must be a multiple of stride")
    codes, params, lengths = family.program
    pairs = [tuple(map(float, p)) for p in x_pairs]

    def one(i):
        syms = word_symbols(family.probabilities, horizon, seed, WORDS, i)
        return [K.pair_distance(codes, params, lengths, syms, logit(x), logit(y), stride) for x, y in pairs]

    per_word = fan_out(one, pair_count, workers)
    steps = np.arange(0, horizon + 1, stride)
    rows = []
    summary = {}
    for k, (x, y) in enumerate(pairs):
        d = np.stack([w[k] for w in per_word])
        med = np.median(d, axis=0)
        p90 = np.quantile(d, 0.9, axis=0)
        rows.extend((k, x, y, int(s), float(m), float(q)) for s, m, q in zip(steps, med, p90))
        slope, npts = decay_slope(steps, med)
        summary[f"pair{k}"] = {"final_median": float(med[-1]), "final_p90": float(p90[-1]),
                               "log_median_slope": slope, "fit_points": npts}
    return ExperimentRecord(
        "sync",
        {"pair_count": pair_count, "x_pairs": [list(p) for p in pairs], "horizon": horizon, "stride": stride},
        ("pair", "x0", "y0", "step", "median_distance", "p90_distance"),
        rows,
        {"seed": seed, "streams": {"words": [stream_id(WORDS, 0), stream_id(WORDS, pair_count - 1)]}},
        summary,
    )


def decay_slope(steps, medians, window=FIT_WINDOW):
    """Least-squares slope of ln(median) against step where the median lies inside ``window``.

    Distances become exactly zero once two orbits share a floating-point
    value, so only the resolved range is fitted.
    """
    steps = np.asarray(steps, dtype=float)
    med = np.asarray(medians, dtype=float)
    mask = (med > window[0]) & (med < window[1])
    if mask.sum() < 2:
        return float("nan"), int(mask.sum())
    slope = np.polyfit(steps[mask], np.log(med[mask]), 1)[0]
    return float(slope), int(mask.sum())
