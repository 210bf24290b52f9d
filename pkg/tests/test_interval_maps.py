import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewprod.interval_maps import (
    G1,
    G2,
    Direction,
    DomainError,
    MapFamily,
    compose,
    damped_moebius,
    expit,
    kan_family,
    logistic_perturb,
    logit,
    mirror,
    moebius,
    onoff_family,
    validate_family,
)

E = math.e
KAN_F1 = logistic_perturb(0.5, Direction.DOWN)
IDENTITY = logistic_perturb(0.0, Direction.UP)

ALL_MAPS = [
    G1,
    G2,
    KAN_F1,
    logistic_perturb(0.5, "up"),
    KAN_F1.inverse(),
    logistic_perturb(0.5, "up").inverse(),
    onoff_family().f_down,
    onoff_family().f_up,
    onoff_family().f_up.inverse(),
    compose(G1, logistic_perturb(0.3, "up"), damped_moebius(0.5, 0.2)),
    compose(KAN_F1, G2).inverse(),
]


def test_eval_examples():
    assert G2.eval(0.0) == 0.0
    assert G2.eval(0.5) == pytest.approx(E / (1 + E), rel=1e-15)
    assert KAN_F1.eval(0.5) == 0.375


def test_endpoints_fixed_exactly():
    for m in ALL_MAPS:
        assert m.eval(0.0) == 0.0
        assert m.eval(1.0) == pytest.approx(1.0, abs=1e-15)


def test_derivative_examples():
    assert G1.derivative(0.0) == pytest.approx(1 / E, rel=1e-15)
    assert G2.derivative(1.0) == pytest.approx(1 / E, rel=1e-15)
    assert KAN_F1.derivative(0.0) == 0.5


def test_second_derivative_examples():
    # f''(0) = -2ab for a x / (1 + b x) with b = a - 1
    assert G1.second_derivative_at_zero() == pytest.approx(-2 * (1 / E) * (1 / E - 1), rel=1e-14)
    assert G2.second_derivative_at_zero() == pytest.approx(-2 * E * (E - 1), rel=1e-14)
    assert IDENTITY.second_derivative_at_zero() == 0.0


@pytest.mark.parametrize("m", ALL_MAPS, ids=repr)
@pytest.mark.parametrize("endpoint", [0, 1])
def test_second_derivative_matches_finite_differences(m, endpoint):
    h = 1e-4
    x = np.array([0.0, h, 2 * h]) if endpoint == 0 else np.array([1 - 2 * h, 1 - h, 1.0])
    d = m.derivative(x)
    fd = (d[2] - d[0]) / (2 * h) if endpoint == 0 else (d[2] - d[0]) / (2 * h)
    # one-sided: use the second-order forward/backward formula
    if endpoint == 0:
        fd = (-3 * d[0] + 4 * d[1] - d[2]) / (2 * h)
    else:
        fd = (3 * d[2] - 4 * d[1] + d[0]) / (2 * h)
    assert m.second_derivative_at(endpoint) == pytest.approx(fd, rel=1e-5, abs=1e-6)


@pytest.mark.parametrize("m", ALL_MAPS, ids=repr)
def test_log_derivative_at_endpoints(m):
    for e in (0, 1):
        assert math.exp(m.log_derivative_at(e)) == pytest.approx(float(m.derivative(float(e))), rel=1e-12)


def test_inverse_examples():
    assert KAN_F1.inverse_eval(0.375) == pytest.approx(0.5, abs=1e-15)
    assert G2.inverse_eval(E / (1 + E)) == pytest.approx(0.5, abs=1e-15)
    for m in ALL_MAPS:
        assert m.inverse_eval(0.0) == 0.0


def test_kan_inverse_matches_printed_closed_forms():
    r = 0.5
    x = np.linspace(0, 1, 101)
    f1_inv = (1 - r - np.sqrt((1 - r) ** 2 + 4 * r * x)) / (-2 * r)
    f2_inv = (1 + r - np.sqrt((1 + r) ** 2 - 4 * r * x)) / (2 * r)
    np.testing.assert_allclose(KAN_F1.inverse_eval(x), f1_inv, atol=1e-15)
    np.testing.assert_allclose(logistic_perturb(r, "up").inverse_eval(x), f2_inv, atol=1e-15)


@pytest.mark.parametrize("m", ALL_MAPS, ids=repr)
def test_round_trip_inverse(m):
    x = np.linspace(0, 1, 1002)[1:-1]
    assert np.max(np.abs(m.inverse_eval(m.eval(x)) - x)) <= 1e-12


@pytest.mark.parametrize("m", ALL_MAPS, ids=repr)
def test_coordinate_consistency(m):
    x = np.linspace(1e-6, 1 - 1e-6, 1000)
    fx = m.eval(x)
    assert np.max(np.abs(m.eval_logit(logit(x)) - logit(fx))) <= 1e-10
    assert np.max(np.abs(m.eval_log(np.log(x)) - np.log(fx))) <= 1e-10


@pytest.mark.parametrize("m", ALL_MAPS, ids=repr)
def test_derivative_vs_central_differences(m):
    x = np.linspace(0.01, 0.99, 100)
    h = 1e-6
    fd = (m.eval(x + h) - m.eval(x - h)) / (2 * h)
    np.testing.assert_allclose(m.derivative(x), fd, rtol=1e-5)


@pytest.mark.parametrize("m", ALL_MAPS, ids=repr)
def test_log_derivative_in_logit_coordinates(m):
    x = np.linspace(0.001, 0.999, 200)
    np.testing.assert_allclose(np.exp(m.log_derivative_logit(logit(x))), m.derivative(x), rtol=1e-12)


def test_moebius_conjugacy_is_exact():
    y = np.linspace(-700, 700, 20001)
    assert np.array_equal(G2.eval_logit(y), y + 1)
    assert np.array_equal(G1.eval_logit(y), y - 1)
    assert G1.eval_logit(0.0) == -1.0


def test_eval_log_examples():
    assert G2.eval_log(math.log(0.5)) == pytest.approx(math.log(E / (1 + E)), rel=1e-14)
    assert G1.eval_log(-500.0) == pytest.approx(-501.0, abs=1e-9)
    u = np.linspace(-600, 0, 50)
    np.testing.assert_allclose(IDENTITY.eval_log(u), u, rtol=1e-14)


def test_eval_log_deep_boundary():
    # damped map near 0: ln f(e^u) = s + u + O(e^u)
    m = onoff_family().f_up
    assert m.eval_log(-700.0) == pytest.approx(1.0 - 700.0, abs=1e-12)


def test_kan_logit_linearizes_near_one():
    assert KAN_F1.eval_logit(40.0) == pytest.approx(40.0 - math.log(1.5), abs=1e-10)


def test_domain_error():
    with pytest.raises(DomainError):
        G1.eval(1.1)
    with pytest.raises(DomainError):
        G1.derivative(-0.5)
    G1.eval(1.0 + 1e-13)  # inside slack


def test_validate_family_examples():
    assert validate_family(MapFamily(G1, G2), 1000).ok
    rep = validate_family(MapFamily(G2, G1), 1000)
    assert not rep.ok
    assert {v.condition for v in rep.violations} == {"direction"}
    assert "direction mismatch" in rep.summary()
    rep = validate_family(kan_family(1.5), 1000)
    bad = [v for v in rep.violations if v.map_label == "f1" and v.condition == "increasing"]
    assert bad and bad[0].x < 0.25
    assert "f1 not increasing" in rep.summary()


def test_validate_family_requires_two_points():
    with pytest.raises(ValueError):
        validate_family(MapFamily(G1, G2), 1)


def test_probabilities_validated():
    with pytest.raises(ValueError):
        MapFamily(G1, G2, (0.0, 1.0))
    with pytest.raises(ValueError):
        MapFamily(G1, G2, (0.5, 0.6))


@pytest.mark.parametrize("m", ALL_MAPS, ids=repr)
def test_direction_on_dense_sample(m):
    x = np.linspace(0, 1, 1002)[1:-1]
    fx = m.eval(x)
    if m.direction is Direction.DOWN:
        assert np.all(fx < x)
    else:
        assert np.all(fx > x)


def test_mirror_conjugates():
    x = np.linspace(0, 1, 101)
    for m in (G1, KAN_F1, KAN_F1.inverse()):
        np.testing.assert_allclose(mirror(m).eval(x), 1 - m.eval(1 - x), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    s=st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3),
    k=st.floats(0, 0.9),
    y=st.floats(-700, 700),
)
def test_damped_logit_round_trip(s, k, y):
    m = damped_moebius(s, k)
    assert m.inverse_eval_logit(m.eval_logit(y)) == pytest.approx(y, abs=1e-9 * max(1.0, abs(y)))


@settings(max_examples=60, deadline=None)
@given(c=st.floats(-0.99, 0.99), y=st.floats(-700, 700))
def test_logistic_logit_round_trip(c, y):
    m = logistic_perturb(abs(c), "up" if c > 0 else "down")
    assert m.inverse_eval_logit(m.eval_logit(y)) == pytest.approx(y, abs=1e-10 * max(1.0, abs(y)))


@settings(max_examples=60, deadline=None)
@given(x=st.floats(0, 1), y=st.floats(0, 1))
def test_maps_are_strictly_increasing(x, y):
    for m in ALL_MAPS:
        if x < y:
            assert m.eval(x) <= m.eval(y)


def test_expit_logit_inverse():
    x = np.array([1e-300, 1e-10, 0.3, 0.5, 1 - 1e-10])
    np.testing.assert_allclose(expit(logit(x)), x, rtol=1e-12)
