"""On-off intermittency diagnostics: occupation, excursions, CLT, pullback vs forward.

Orbits run in logit coordinates, where the neutral endpoint 0 sits at
y = -inf and no amount of time near it underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .. import _kernels as K
from ..engine import _symbols, to_logit
from ..interval_maps import MapFamily, log_expit, logit
from ..lyapunov import Regime, classify_regime
from ._common import FUTURE, PAST, WORDS, ExperimentRecord, check_regime, fan_out, stream_id, word_symbols

BETA = 0.05


def _below(beta):
    # x < beta  <=>  y < logit(beta); the kernels test closed intervals
    return -np.inf, float(np.nextafter(logit(beta), -np.inf))


def _middle(beta):
    return logit(beta), logit(1.0 - beta)


def _indicator_bounds(family, beta, indicator):
    if indicator is None:
        indicator = "middle" if classify_regime(family).regime is Regime.DOUBLE_NEUTRAL else "below"
    if indicator == "below":
        return indicator, _below(beta)
    if indicator == "middle":
        return indicator, _middle(beta)
    raise ValueError(f"unknown indicator {indicator!r}")


def occupation_fraction(family: MapFamily, word, x0: float, horizon: int, beta: float = BETA,
                        checkpoints=None, indicator: str | None = None) -> ExperimentRecord:
    """Running fraction of steps 0..n-1 spent in the indicator set, at each checkpoint n.

    The set is [0, beta) by default and [beta, 1 - beta] for double-neutral
    families.
    """
    checkpoints = np.array(sorted(checkpoints if checkpoints is not None else [horizon]), dtype=np.int64)
    if checkpoints.size and (checkpoints[-1] > horizon or checkpoints[0] < 1):
        raise ValueError("checkpoints must lie in [1, horizon]")
    indicator, (lo, hi) = _indicator_bounds(family, beta, indicator)
    syms = _symbols(word, horizon)
    codes, params, lengths = family.program
    counts = K.occupation_counts(codes, params, lengths, syms, to_logit(x0, "plain"), checkpoints, lo, hi)
    rows = [(int(n), int(c), c / n) for n, c in zip(checkpoints, counts)]
    return ExperimentRecord(
        "onoff",
        {"x0": x0, "horizon": horizon, "beta": beta, "indicator": indicator, "checkpoints": checkpoints.tolist()},
        ("n", "count", "fraction"),
        rows,
    )


def pooled_occupation(family: MapFamily, orbits: int, x0: float, horizon: int, beta: float = BETA, checkpoints=None,
                      indicator: str | None = None, seed: int = 0, workers: int | None = None) -> ExperimentRecord:
    """Occupation fractions averaged over independent words, with per-orbit spread."""
    checkpoints = sorted(checkpoints if checkpoints is not None else [horizon])

    def one(i):
        syms = word_symbols(family.probabilities, horizon, seed, WORDS, i)
        return occupation_fraction(family, syms, x0, horizon, beta, checkpoints, indicator)

    recs = fan_out(one, orbits, workers)
    frac = np.array([r.column("fraction") for r in recs])
    rows = [(int(n), float(frac[:, k].mean()), float(frac[:, k].min()), float(frac[:, k].max()))
            for k, n in enumerate(checkpoints)]
    means = [r[1] for r in rows]
    return ExperimentRecord(
        "onoff",
        {**recs[0].parameters, "orbits": orbits},
        ("n", "mean_fraction", "min_fraction", "max_fraction"),
        rows,
        {"seed": seed, "streams": {"words": [stream_id(WORDS, 0), stream_id(WORDS, orbits - 1)]}},
        {"strictly_increasing": bool(np.all(np.diff(means) > 0)), "final_mean_fraction": means[-1]},
    )


@dataclass
class ExcursionStats:
    """Run-length decomposition of a logit orbit at threshold K.

    ``eta`` are runs with y <= K ("off"), ``xi`` runs with y > K ("on").  The
    last run is cut by the horizon; ``truncated_side`` names its kind.
    """

    eta: np.ndarray
    xi: np.ndarray
    durations: np.ndarray
    sides: np.ndarray
    horizon: int
    truncated: bool = True

    @property
    def truncated_side(self) -> str:
        return "xi" if self.sides[-1] else "eta"

    def summary(self) -> dict:
        out = {}
        for name, d in (("eta", self.eta), ("xi", self.xi)):
            out[name] = {
                "count": int(d.size),
                "mean": float(d.mean()) if d.size else float("nan"),
                "max": int(d.max()) if d.size else 0,
            }
        return out

    def eta_survival(self):
        """Empirical P(eta >= t) at the distinct observed durations, for log-log plots."""
        t = np.sort(self.eta)
        uniq, first = np.unique(t, return_index=True)
        return uniq, 1.0 - first / t.size


def excursion_statistics(family: MapFamily, word, x0: float, horizon: int, K_threshold: float | None = None) -> ExcursionStats:
    """Maximal runs of y_i <= K and y_i > K over steps i = 0..horizon-1."""
    if K_threshold is None:
        K_threshold = logit(BETA)
    if not math.isfinite(K_threshold):
        raise ValueError("K must be finite")
    syms = _symbols(word, horizon)
    codes, params, lengths = family.program
    durations, sides = K.run_lengths(codes, params, lengths, syms, to_logit(x0, "plain"), K_threshold)
    return ExcursionStats(durations[sides == 0], durations[sides == 1], durations, sides, horizon)


def _truncate(stats: ExcursionStats, H: int) -> ExcursionStats:
    """The decomposition of the same orbit at the shorter horizon H."""
    cum = np.cumsum(stats.durations)
    keep = (cum - stats.durations) < H
    d = np.minimum(stats.durations[keep], H - (cum - stats.durations)[keep])
    s = stats.sides[keep]
    return ExcursionStats(d[s == 0], d[s == 1], d, s, H)


def excursion_trend(family: MapFamily, orbits: int, x0: float, horizons, K_threshold: float | None = None,
                    seed: int = 0, workers: int | None = None) -> ExperimentRecord:
    """Pooled mean run lengths of eta and xi at increasing horizons of the same orbits.

    Means pool every run, including the one cut by the horizon, so at each
    horizon mean = (time on that side) / (number of runs on that side).
    """
    horizons = sorted(int(h) for h in horizons)
    if K_threshold is None:
        K_threshold = logit(BETA)

    def one(i):
        syms = word_symbols(family.probabilities, horizons[-1], seed, WORDS, i)
        full = excursion_statistics(family, syms, x0, horizons[-1], K_threshold)
        return [_truncate(full, H) for H in horizons]

    per_orbit = fan_out(one, orbits, workers)
    rows = []
    for k, H in enumerate(horizons):
        eta = [s[k].eta for s in per_orbit]
        xi = [s[k].xi for s in per_orbit]
        ne, nx = sum(e.size for e in eta), sum(x.size for x in xi)
        te, tx = sum(int(e.sum()) for e in eta), sum(int(x.sum()) for x in xi)
        rows.append((H, ne, te / ne if ne else float("nan"), max(int(e.max()) if e.size else 0 for e in eta),
                     nx, tx / nx if nx else float("nan"), max(int(x.max()) if x.size else 0 for x in xi)))
    eta_growth = rows[-1][2] / rows[0][2] - 1.0
    xi_change = rows[-1][5] / rows[0][5] - 1.0
    return ExperimentRecord(
        "excursions",
        {"orbits": orbits, "x0": x0, "horizons": horizons, "K": K_threshold},
        ("horizon", "eta_count", "eta_mean", "eta_max", "xi_count", "xi_mean", "xi_max"),
        rows,
        {"seed": seed, "streams": {"words": [stream_id(WORDS, 0), stream_id(WORDS, orbits - 1)]}},
        {"eta_mean_growth": eta_growth, "xi_mean_change": xi_change},
    )


def excursion_windows(family: MapFamily, orbits: int, x0: float, horizon: int, window: int, beta: float = BETA,
                      start: int = 0, seed: int = 0, workers: int | None = None) -> ExperimentRecord:
    """For each orbit and each consecutive window of steps, whether it visits [beta, 1]."""
    codes, params, lengths = family.program
    y_beta = logit(beta)

    def one(i):
        syms = word_symbols(family.probabilities, horizon, seed, WORDS, i)
        return K.window_maxima(codes, params, lengths, syms, to_logit(x0, "plain"), start, window)

    maxima = fan_out(one, orbits, workers)
    rows = []
    for i, m in enumerate(maxima):
        for j, v in enumerate(m):
            rows.append((i, start + j * window, start + (j + 1) * window, float(log_expit(v)), int(v >= y_beta)))
    hits = np.array([r[4] for r in rows])
    per_window = hits.reshape(orbits, -1)
    return ExperimentRecord(
        "excursion-windows",
        {"orbits": orbits, "x0": x0, "horizon": horizon, "window": window, "beta": beta, "start": start},
        ("orbit", "window_start", "window_end", "max_log_x", "visits_beta"),
        rows,
        {"seed": seed, "streams": {"words": [stream_id(WORDS, 0), stream_id(WORDS, orbits - 1)]}},
        {"fraction_windows_visited": float(hits.mean()),
         "fraction_orbits_all_windows": float(per_window.all(axis=1).mean()),
         "visited_by_window": per_window.mean(axis=0).tolist()},
    )


def half_normal_cdf(a: float) -> float:
    """int_0^a 2 exp(-t^2 / 2) / sqrt(2 pi) dt = erf(a / sqrt 2)."""
    return float(special.erf(a / math.sqrt(2.0))) if a > 0 else 0.0


def half_normal_cdf_quad(a: float) -> float:
    val, _ = integrate.quad(lambda t: 2.0 * math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi), 0.0, a,
                            epsabs=1e-13, epsrel=1e-13)
    return val


def clt_experiment(family: MapFamily, x0: float, n: int, samples: int, a_grid, seed: int = 0,
                   workers: int | None = None) -> ExperimentRecord:
    """Empirical P(f^n_w(x0) >= exp(-a sqrt n)) against the half-normal distribution function."""
    check_regime(family, [Regime.ONOFF_AT_ZERO])
    codes, params, lengths = family.program
    y0 = to_logit(x0, "plain")

    def one(i):
        syms = word_symbols(family.probabilities, n, seed, WORDS, i)
        return log_expit(K.final_value(codes, params, lengths, syms, y0))

    logs = np.array(fan_out(one, samples, workers))
    rows = []
    for a in a_grid:
        emp = float(np.mean(logs >= -a * math.sqrt(n)))
        th = half_normal_cdf(a)
        rows.append((float(a), emp, th, emp - th))
    sup = max(abs(r[3]) for r in rows)
    return ExperimentRecord(
        "clt",
        {"x0": x0, "n": n, "samples": samples, "a_grid": [float(a) for a in a_grid]},
        ("a", "empirical", "theoretical", "difference"),
        rows,
        {"seed": seed, "streams": {"words": [stream_id(WORDS, 0), stream_id(WORDS, samples - 1)]}},
        {"sup_difference": sup},
    )


def pullback_vs_forward(family: MapFamily, x0: float, n_grid, words_per_n: int, beta: float = BETA,
                        window: int = 0, seed: int = 0, workers: int | None = None) -> ExperimentRecord:
    """Pullback images f^n over fresh pasts against forward images f^n over fresh futures.

    With ``window > 0`` each forward orbit is continued for ``window`` more
    steps and the row reports the fraction that reach [beta, 1] in that span.
    """
    check_regime(family, [Regime.ONOFF_AT_ZERO])
    codes, params, lengths = family.program
    y0 = to_logit(x0, "plain")
    y_beta = logit(beta)
    n_grid = [int(n) for n in n_grid]

    def one(idx):
        k, i = divmod(idx, words_per_n)
        n = n_grid[k]
        index = k * words_per_n + i
        past = word_symbols(family.probabilities, n, seed, PAST, index)
        pull = K.final_value(codes, params, lengths, past, y0)
        fut = word_symbols(family.probabilities, n + window, seed, FUTURE, index)
        fwd = K.final_value(codes, params, lengths, fut[:n], y0)
        hit = True
        if window:
            hit = bool(K.window_maxima(codes, params, lengths, fut[n:], fwd, 0, window)[0] >= y_beta)
        return pull, fwd, hit

    out = fan_out(one, len(n_grid) * words_per_n, workers)
    rows = []
    for k, n in enumerate(n_grid):
        chunk = out[k * words_per_n:(k + 1) * words_per_n]
        pull = np.array([c[0] for c in chunk])
        fwd = np.array([c[1] for c in chunk])
        hits = np.array([c[2] for c in chunk])
        rows.append((n, float(np.exp(log_expit(np.median(pull)))), float(np.median(log_expit(pull))),
                     float(np.exp(log_expit(np.median(fwd)))), float(np.mean(fwd < y_beta)),
                     float(np.mean(hits)) if window else float("nan")))
    return ExperimentRecord(
        "pullback",
        {"x0": x0, "n_grid": n_grid, "words_per_n": words_per_n, "beta": beta, "window": window},
        ("n", "pullback_median", "pullback_median_log", "forward_median", "forward_below_beta",
         "forward_exceed_beta_in_window"),
        rows,
        {"seed": seed, "streams": {"past": [stream_id(PAST, 0), stream_id(PAST, len(out) - 1)],
                                   "future": [stream_id(FUTURE, 0), stream_id(FUTURE, len(out) - 1)]}},
        {"top_pullback_median": rows[-1][1], "top_forward_exceed": rows[-1][5]},
    )
