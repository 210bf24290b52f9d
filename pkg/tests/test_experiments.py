import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewprod.engine import forward_orbit
from skewprod.experiments import (
    Basin,
    ExperimentRecord,
    RegimeMismatchWarning,
    basin_classify,
    clt_experiment,
    decay_slope,
    drift_experiment,
    excursion_statistics,
    excursion_trend,
    excursion_windows,
    graph_equivariance,
    half_normal_cdf,
    half_normal_cdf_quad,
    intermingled_scan,
    invariant_graph_estimate,
    occupation_fraction,
    pooled_occupation,
    pullback_vs_forward,
    synchronization_experiment,
)
from skewprod.interval_maps import drift_family, inverse_kan_family, kan_family, mirror_family, onoff_family, symmetric_walk
from skewprod.symbols import sample_word

KAN = kan_family()
ONOFF = onoff_family()


# -- basins -------------------------------------------------------------------


def test_basin_trivial_examples():
    delta = 1e-3
    assert basin_classify(KAN, [1] * 2000, delta / 2, 2000, delta) is Basin.TO_ZERO
    assert basin_classify(KAN, [2] * 2000, 1 - delta / 2, 2000, delta) is Basin.TO_ONE
    assert basin_classify(KAN, sample_word((0.5, 0.5), 50, 1), 1.0, 50, delta) is Basin.TO_ONE
    assert basin_classify(KAN, sample_word((0.5, 0.5), 50, 1), 0.0, 50, delta) is Basin.TO_ZERO
    with pytest.raises(ValueError):
        basin_classify(KAN, [1], 0.3, 1, 0.5)


def test_basin_monotone_coupling():
    word = sample_word((0.5, 0.5), 400, 17)
    xs = np.linspace(0, 1, 201)
    labels = [basin_classify(KAN, word, x, 400, 1e-3) for x in xs]
    rank = {Basin.TO_ZERO: 0, Basin.UNDECIDED: 1, Basin.TO_ONE: 2}
    r = [rank[b] for b in labels]
    assert r == sorted(r)


def test_undecided_fraction_small():
    rng_word = [sample_word((0.5, 0.5), 10_000, 5, i) for i in range(300)]
    xs = np.random.default_rng(0).random(300)
    und = sum(basin_classify(KAN, w, x, 10_000, 1e-3) is Basin.UNDECIDED for w, x in zip(rng_word, xs))
    assert und / 300 < 0.05


def test_scan_aggregation_identity():
    rec = intermingled_scan(KAN, 0, 1, 40, 2000, 1e-3, seed=3)
    assert len(rec.rows) == 1
    row = rec.rows[0]
    assert row[0] == "-" and row[1] == 0.0 and row[2] == 1.0
    assert row[3] + row[4] + row[5] == 40
    assert rec.summary["to_zero_fraction"] == row[6]


def test_scan_cells_and_drift_heuristic():
    rec = intermingled_scan(KAN, 2, 4, 30, 2000, 1e-3, seed=1)
    assert len(rec.rows) == 16
    for r in rec.rows:
        assert r[3] + r[4] + r[5] == 30
        assert all(0 <= f <= 1 for f in r[6:9])
    first = next(r for r in rec.rows if r[0] == "11" and r[1] == 0.0)
    assert first[6] > first[7]


def test_scan_warns_on_regime_mismatch():
    with pytest.warns(RegimeMismatchWarning):
        intermingled_scan(inverse_kan_family(), 0, 1, 2, 10, 1e-3)


def test_graph_examples():
    assert invariant_graph_estimate(KAN, [2] * 200, 1e-10) < 1e-6
    assert invariant_graph_estimate(KAN, [1] * 200, 1e-10) > 1 - 1e-6


def test_graph_equivariance_small():
    rec = graph_equivariance(KAN, 10, 2000, 1e-10, seed=2)
    assert rec.summary["max_residual"] <= 10 * 1e-10


# -- synchronization ----------------------------------------------------------


def test_sync_equal_points():
    rec = synchronization_experiment(inverse_kan_family(), 5, [(0.3, 0.3)], 100, stride=10)
    assert np.all(rec.column("median_distance") == 0.0)
    assert np.all(rec.column("p90_distance") == 0.0)


def test_sync_rows_and_decay():
    rec = synchronization_experiment(inverse_kan_family(), 50, [(0.1, 0.9)], 2000, stride=100, seed=4)
    assert rec.column("step").tolist() == list(range(0, 2001, 100))
    med = rec.column("median_distance")
    assert med[0] == pytest.approx(0.8)
    assert med[-1] < med[0] * 1e-2


def test_sync_stride_check():
    with pytest.raises(ValueError):
        synchronization_experiment(inverse_kan_family(), 2, [(0.1, 0.9)], 105, stride=10)


def test_decay_slope_on_exact_exponential():
    steps = np.arange(0, 1000, 10)
    slope, npts = decay_slope(steps, np.exp(-0.05 * steps))
    assert slope == pytest.approx(-0.05, rel=1e-10)
    assert npts == np.sum((np.exp(-0.05 * steps) >= 1e-12) & (np.exp(-0.05 * steps) <= 1e-3))


# -- intermittency ------------------------------------------------------------


def test_occupation_horizon_one():
    rec = occupation_fraction(ONOFF, [1], 0.01, 1, checkpoints=[1])
    assert rec.rows == [(1, 1, 1.0)]
    rec = occupation_fraction(ONOFF, [1], 0.5, 1, checkpoints=[1])
    assert rec.rows == [(1, 0, 0.0)]


def test_occupation_matches_direct_count():
    w = sample_word((0.5, 0.5), 3000, 8)
    rec = occupation_fraction(ONOFF, w, 0.3, 3000, checkpoints=[10, 500, 3000])
    xs = forward_orbit(ONOFF, w, 0.3, 2999).values
    below = np.array(xs) < 0.05
    assert rec.column("count").tolist() == [int(below[:10].sum()), int(below[:500].sum()), int(below.sum())]


def test_occupation_walk_uses_middle_indicator():
    rec = occupation_fraction(symmetric_walk(), [1, 2] * 5, 0.5, 10)
    assert rec.parameters["indicator"] == "middle"
    assert rec.rows[-1][2] == 1.0


def test_pooled_occupation_columns():
    rec = pooled_occupation(ONOFF, 4, 0.5, 5000, checkpoints=[100, 5000], seed=2)
    for r in rec.rows:
        assert 0 <= r[2] <= r[1] <= r[3] <= 1


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), horizon=st.integers(1, 3000), x0=st.floats(0.001, 0.999))
def test_excursions_partition_horizon(seed, horizon, x0):
    w = sample_word((0.5, 0.5), horizon, seed)
    st_ = excursion_statistics(ONOFF, w, x0, horizon)
    assert int(st_.durations.sum()) == horizon
    assert np.all(st_.durations >= 1)
    assert np.all(st_.sides[1:] != st_.sides[:-1])
    assert st_.eta.size + st_.xi.size == st_.durations.size


def test_excursion_forced_below():
    st_ = excursion_statistics(ONOFF, [1] * 500, 0.01, 500)
    assert st_.eta.tolist() == [500] and st_.xi.size == 0
    assert st_.truncated and st_.truncated_side == "eta"
    with pytest.raises(ValueError):
        excursion_statistics(ONOFF, [1], 0.5, 1, K_threshold=math.inf)


def test_excursion_trend_shorter_horizon_is_prefix():
    rec = excursion_trend(ONOFF, 3, 0.5, [2000, 4000], seed=6)
    w = sample_word(ONOFF.probabilities, 4000, 6, rec.provenance["streams"]["words"][0])
    short = excursion_statistics(ONOFF, w.symbols[:2000], 0.5, 2000)
    assert short.durations.sum() == 2000
    assert rec.rows[0][0] == 2000


def test_excursion_windows_shape():
    rec = excursion_windows(ONOFF, 3, 0.5, 3000, 1000, seed=1)
    assert len(rec.rows) == 9
    assert 0 <= rec.summary["fraction_windows_visited"] <= 1


def test_half_normal_cdf():
    assert half_normal_cdf(1.0) == pytest.approx(0.682689, abs=1e-6)
    assert half_normal_cdf(8.0) == pytest.approx(1.0, abs=1e-12)
    for a in (0.25, 0.5, 1.0, 2.0, 3.0):
        assert half_normal_cdf(a) == pytest.approx(half_normal_cdf_quad(a), abs=1e-10)


def test_clt_columns_form_cdf():
    rec = clt_experiment(ONOFF, 0.5, 500, 200, np.linspace(0.25, 3, 12), seed=3)
    th, emp = rec.column("theoretical"), rec.column("empirical")
    assert np.all(np.diff(th) >= 0) and np.all(np.diff(emp) >= 0)
    assert np.all((emp >= 0) & (emp <= 1))


def test_pullback_vs_forward_zero_steps():
    rec = pullback_vs_forward(ONOFF, 0.3, [0], 4)
    assert rec.rows[0][1] == pytest.approx(0.3, rel=1e-14)
    assert rec.rows[0][3] == pytest.approx(0.3, rel=1e-14)


def test_pullback_median_falls():
    rec = pullback_vs_forward(ONOFF, 0.5, [100, 3000], 40, seed=1)
    med = rec.column("pullback_median")
    assert med[1] < med[0]


# -- drift --------------------------------------------------------------------


def test_drift_examples():
    rec = drift_experiment(drift_family(), 1.0, 10, 100, 1e-6)
    assert rec.summary["fraction_above"] == 1.0
    rec = drift_experiment(drift_family(), 0.5, 50, 5000, 1e-6, seed=2)
    assert rec.summary["fraction_above"] > 0.9
    mirrored = drift_experiment(mirror_family(drift_family()), 0.5, 50, 5000, 1e-6, seed=2)
    assert mirrored.summary["fraction_below"] == rec.summary["fraction_above"]


# -- determinism --------------------------------------------------------------


@pytest.mark.parametrize("runner", [
    lambda w: intermingled_scan(KAN, 1, 2, 5, 500, 1e-3, seed=1, workers=w),
    lambda w: synchronization_experiment(inverse_kan_family(), 6, [(0.1, 0.9)], 200, stride=50, workers=w),
    lambda w: pooled_occupation(ONOFF, 5, 0.5, 800, checkpoints=[80, 800], workers=w),
    lambda w: excursion_trend(ONOFF, 5, 0.5, [400, 800], workers=w),
    lambda w: clt_experiment(ONOFF, 0.5, 300, 30, [0.5, 1.0], workers=w),
    lambda w: pullback_vs_forward(ONOFF, 0.5, [10, 50], 5, window=100, workers=w),
    lambda w: drift_experiment(drift_family(), 0.5, 10, 300, 1e-6, workers=w),
])
def test_rows_independent_of_workers(runner):
    a, b, c = runner(1), runner(3), runner(1)
    assert a.rows == b.rows == c.rows


def test_record_csv_and_manifest(tmp_path):
    rec = ExperimentRecord("demo", {"n": 1}, ("a", "b"), [(1, 0.5)], {"seed": 0})
    rec.to_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines() == ["a,b", "1,0.5"]
    assert rec.manifest()["row_count"] == 1
    with pytest.raises(ValueError):
        ExperimentRecord("empty", {}, ("a",), []).to_csv(tmp_path / "e.csv")
