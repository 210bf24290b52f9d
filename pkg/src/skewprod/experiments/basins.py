"""Basin membership at a finite horizon, intermingled-basin scans and the separating graph."""

from __future__ import annotations

import itertools
from enum import Enum

import numpy as np

from .. import _kernels as K
from ..engine import _symbols, to_logit
from ..interval_maps import MapFamily, logit
from ..lyapunov import Regime
from ..symbols import CylinderSpec, uniforms
from ._common import POINTS, WORDS, ExperimentRecord, check_regime, fan_out, stream_id, word_symbols

TAIL_FRACTION = 0.1


class Basin(str, Enum):
    TO_ZERO = "ToZero"
    TO_ONE = "ToOne"
    UNDECIDED = "Undecided"


_OUTCOMES = (Basin.TO_ZERO, Basin.TO_ONE, Basin.UNDECIDED)


def _tail_start(horizon):
    return horizon - int(horizon * TAIL_FRACTION)


def basin_classify(family: MapFamily, word, x0: float, horizon: int, delta: float) -> Basin:
    """ToZero if the orbit stays in [0, delta) over the last 10% of the horizon, ToOne if in (1 - delta, 1]."""
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must be in (0, 1/2)")
    syms = _symbols(word, horizon)
    codes, params, lengths = family.program
    code = K.basin_outcome(codes, params, lengths, syms, to_logit(x0, "plain"),
                           logit(delta), logit(1.0 - delta), _tail_start(horizon))
    return _OUTCOMES[code]


def intermingled_scan(family: MapFamily, cylinder_length: int, subdivisions: int, samples_per_cell: int,
                      horizon: int, delta: float, seed: int = 0, workers: int | None = None) -> ExperimentRecord:
    """Basin fractions on every cell (cylinder of the given length) x (subinterval).

    Each sample draws a word conditioned on the cylinder and a uniform x0 in
    the subinterval, from streams indexed by the global sample number.
    """
    check_regime(family, [Regime.INTERMINGLED_BASINS])
    ell, J, S = int(cylinder_length), int(subdivisions), int(samples_per_cell)
    cylinders = list(itertools.product((1, 2), repeat=ell))
    codes, params, lengths = family.program
    lo, hi, tail = logit(delta), logit(1.0 - delta), _tail_start(horizon)

    def cell(c):
        cyl_index, j = divmod(c, J)
        spec = CylinderSpec.prefix(cylinders[cyl_index])
        u = uniforms(seed, stream_id(POINTS, c), S)
        xs = (j + u) / J
        counts = np.zeros(3, np.int64)
        for s in range(S):
            syms = spec.impose(word_symbols(family.probabilities, horizon, seed, WORDS, c * S + s))
            counts[K.basin_outcome(codes, params, lengths, syms, logit(xs[s]), lo, hi, tail)] += 1
        return counts

    counts = fan_out(cell, len(cylinders) * J, workers)
    rows = []
    for c, cnt in enumerate(counts):
        cyl_index, j = divmod(c, J)
        word_tag = "".join(map(str, cylinders[cyl_index])) or "-"
        fz, fo, fu = (cnt / S).tolist()
        rows.append((word_tag, j / J, (j + 1) / J, int(cnt[0]), int(cnt[1]), int(cnt[2]), fz, fo, fu))
    total = np.sum(counts, axis=0)
    headline = min(min(r[6], r[7]) for r in rows)
    return ExperimentRecord(
        "basin-scan",
        {"cylinder_length": ell, "subdivisions": J, "samples_per_cell": S, "horizon": horizon, "delta": delta},
        ("cylinder", "x_left", "x_right", "to_zero", "to_one", "undecided",
         "frac_to_zero", "frac_to_one", "frac_undecided"),
        rows,
        {"seed": seed, "streams": {"words": [stream_id(WORDS, 0), stream_id(WORDS, len(rows) * S - 1)],
                                   "points": [stream_id(POINTS, 0), stream_id(POINTS, len(rows) - 1)]}},
        {"min_basin_fraction": headline, "undecided_fraction": float(total[2] / total.sum()),
         "to_zero_fraction": float(total[0] / total.sum()), "to_one_fraction": float(total[1] / total.sum())},
    )


def invariant_graph_estimate(family: MapFamily, word, tolerance: float = 1e-10, horizon: int | None = None) -> float:
    """Threshold x where f^horizon_w(x) crosses 1/2, by bisection in x.

    Points below the threshold end below 1/2 (fiber maps are increasing).
    """
    syms = _symbols(word, horizon)
    codes, params, lengths = family.program
    lo, hi = 0.0, 1.0
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if K.final_value(codes, params, lengths, syms, logit(mid)) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def graph_equivariance(family: MapFamily, words: int, horizon: int, tolerance: float = 1e-10,
                       seed: int = 0, workers: int | None = None) -> ExperimentRecord:
    """Compare xi(shifted word) with f_{w0}(xi(word)) on independent words."""
    f = family.maps

    def one(i):
        syms = word_symbols(family.probabilities, horizon + 1, seed, WORDS, i)
        a = invariant_graph_estimate(family, syms[:horizon], tolerance)
        b = invariant_graph_estimate(family, syms[1:horizon + 1], tolerance)
        image = f[syms[0] - 1].eval(a)
        return (i, int(syms[0]), a, b, image, abs(b - image))

    rows = fan_out(one, words, workers)
    resid = max(r[5] for r in rows)
    return ExperimentRecord(
        "graph",
        {"words": words, "horizon": horizon, "tolerance": tolerance},
        ("word_index", "first_symbol", "xi", "xi_shifted", "image", "residual"),
        rows,
        {"seed": seed, "streams": {"words": [stream_id(WORDS, 0), stream_id(WORDS, words - 1)]}},
        {"max_residual": resid, "residual_over_tolerance": resid / tolerance},
    )
