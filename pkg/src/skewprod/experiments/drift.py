"""Forward convergence to the attracting endpoint in the drift regime."""

from __future__ import annotations

import numpy as np

from .. import _kernels as K
from ..engine import to_logit
from ..interval_maps import MapFamily, logit
from ..lyapunov import Regime
from ._common import WORDS, ExperimentRecord, check_regime, fan_out, stream_id, word_symbols


def drift_experiment(family: MapFamily, x0: float, samples: int, horizon: int, delta: float,
                     seed: int = 0, workers: int | None = None) -> ExperimentRecord:
    """Fractions of f^horizon_w(x0) above 1 - delta and below delta over independent words."""
    check_regime(family, [Regime.DRIFT_TO_ONE, Regime.DRIFT_TO_ZERO])
    codes, params, lengths = family.program
    y0 = to_logit(x0, "plain")

    def one(i):
        syms = word_symbols(family.probabilities, horizon, seed, WORDS, i)
        return K.final_value(codes, params, lengths, syms, y0)

    ys = np.array(fan_out(one, samples, workers))
    above = float(np.mean(ys > logit(1.0 - delta)))
    below = float(np.mean(ys < logit(delta)))
    return ExperimentRecord(
        "drift",
        {"x0": x0, "samples": samples, "horizon": horizon, "delta": delta},
        ("samples", "horizon", "delta", "fraction_above", "fraction_below"),
        [(samples, horizon, delta, above, below)],
        {"seed": seed, "streams": {"words": [stream_id(WORDS, 0), stream_id(WORDS, samples - 1)]}},
        {"fraction_above": above, "fraction_below": below},
    )
