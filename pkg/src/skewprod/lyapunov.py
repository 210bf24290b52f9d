"""Boundary and empirical Lyapunov exponents, regime classification, minimality test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .engine import _symbols, to_logit
from .interval_maps import MapFamily

DEFAULT_ZERO_TOL = 1e-12


class Regime(str, Enum):
    INTERMINGLED_BASINS = "IntermingledBasins"
    SYNCHRONIZATION = "Synchronization"
    ONOFF_AT_ZERO = "OnOffAtZero"
    ONOFF_AT_ONE = "OnOffAtOne"
    DOUBLE_NEUTRAL = "DoubleNeutral"
    DRIFT_TO_ONE = "DriftToOne"
    DRIFT_TO_ZERO = "DriftToZero"

    def mirrored(self) -> Regime:
        return _MIRROR.get(self, self)


_MIRROR = {
    Regime.ONOFF_AT_ZERO: Regime.ONOFF_AT_ONE,
    Regime.ONOFF_AT_ONE: Regime.ONOFF_AT_ZERO,
    Regime.DRIFT_TO_ONE: Regime.DRIFT_TO_ZERO,
    Regime.DRIFT_TO_ZERO: Regime.DRIFT_TO_ONE,
}


def boundary_exponent(family: MapFamily, endpoint: int) -> float:
    """p1 ln f1'(e) + p2 ln f2'(e) from exact endpoint derivatives."""
    (p1, p2), (l1, l2) = family.probabilities, _endpoint_logders(family, endpoint)
    return math.fsum((p1 * l1, p2 * l2))


def _endpoint_logders(family, endpoint):
    return family.f_down.log_derivative_at(endpoint), family.f_up.log_derivative_at(endpoint)


def is_structural_zero(family: MapFamily, endpoint: int) -> bool:
    """Reciprocal endpoint derivatives with equal weights (or both neutral)."""
    l1, l2 = _endpoint_logders(family, endpoint)
    p1, p2 = family.probabilities
    return (l1 == 0.0 and l2 == 0.0) or (p1 == p2 and l1 == -l2)


def empirical_fiber_exponent(family: MapFamily, word, x0: float, n: int, with_sd: bool = False):
    """Birkhoff average (1/n) sum ln f'_{w_i}(x_i) along the orbit of x0.

    With ``with_sd`` also returns the sample standard deviation of the summands.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    syms = _symbols(word, n)
    codes, params, lengths = family.program
    s, s2 = K.exponent_sum(codes, params, lengths, syms, to_logit(x0, "plain"))
    mean = s / n
    if not with_sd:
        return mean
    var = max(s2 / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var)


def _sign(value, exact_zero, tol):
    if exact_zero or abs(value) <= tol:
        return 0
    return 1 if value > 0 else -1


def regime_from_signs(s0: int, s1: int) -> Regime:
    if s0 < 0 and s1 < 0:
        return Regime.INTERMINGLED_BASINS
    if s0 > 0 and s1 > 0:
        return Regime.SYNCHRONIZATION
    if s0 == 0 and s1 > 0:
        return Regime.ONOFF_AT_ZERO
    if s0 > 0 and s1 == 0:
        return Regime.ONOFF_AT_ONE
    if s0 == 0 and s1 == 0:
        return Regime.DOUBLE_NEUTRAL
    if s0 >= 0 and s1 < 0:
        return Regime.DRIFT_TO_ONE
    return Regime.DRIFT_TO_ZERO


@dataclass
class MinimalityResult:
    verdict: str  # "SufficientConditionHolds" or "Inconclusive"
    clause: str
    Q: int
    tau: float
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == "SufficientConditionHolds"

    def to_dict(self):
        return asdict(self)


@dataclass
class RegimeReport:
    L0: float
    L1: float
    regime: Regime
    zero_tolerance: float
    exact_zero: tuple = (False, False)
    minimality: MinimalityResult | None = None

    def to_dict(self):
        out = {
            "L0": self.L0,
            "L1": self.L1,
            "regime": self.regime.value,
            "zero_tolerance": self.zero_tolerance,
        }
        if self.minimality is not None:
            m = self.minimality
            out["minimality"] = {"verdict": m.verdict, "clause": m.clause, "Q": m.Q, "tau": m.tau}
        return out


def classify_regime(family: MapFamily, zero_tolerance: float = DEFAULT_ZERO_TOL, minimality: bool = False,
                    Q: int = 10**6, tau: float = 1e-9) -> RegimeReport:
    if zero_tolerance < 0:
        raise ValueError("zero_tolerance must be >= 0")
    L0, L1 = boundary_exponent(family, 0), boundary_exponent(family, 1)
    z0, z1 = is_structural_zero(family, 0), is_structural_zero(family, 1)
    if z0:
        L0 = 0.0
    if z1:
        L1 = 0.0
    regime = regime_from_signs(_sign(L0, z0, zero_tolerance), _sign(L1, z1, zero_tolerance))
    report = RegimeReport(L0, L1, regime, zero_tolerance, (z0, z1))
    if minimality:
        report.minimality = minimality_check(family, Q, tau)
    return report


def rational_residual(rho: float, Q: int) -> tuple[float, int, int]:
    """min over 1 <= q <= Q of |q rho - p|, with the minimizing (p, q).

    The minimum is attained at a continued-fraction convergent of rho, so
    only convergents are scanned.  rho is taken as the exact binary value.
    """
    x = Fraction(rho)
    h_prev, h = 0, 1
    k_prev, k = 1, 0
    best = (math.inf, 0, 1)
    a_frac = x
    while True:
        a = math.floor(a_frac)
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
        if k > Q:
            break
        r = abs(float(k * x - h))
        if r < best[0]:
            best = (r, h, k)
        rem = a_frac - a
        if rem == 0:
            break
        a_frac = 1 / rem
    return best


# second-derivative ratios carry a few ulps of rounding; never compare tighter
RATIO_RTOL = 1e-12


def _endpoint_data(family, endpoint):
    """Multipliers and second derivatives in the chart where the endpoint is 0."""
    out = []
    for m in family.maps:
        d = m.derivative_at(endpoint)
        s2 = m.second_derivative_at(endpoint)
        out.append((d, s2 if endpoint == 0 else -s2))
    return out


def _check_endpoint(family, endpoint, Q, tau):
    (d1, s1), (d2, s2) = _endpoint_data(family, endpoint)
    if d1 < 1.0 < d2:
        (lam, sl), (mu, sm) = (d1, s1), (d2, s2)
    elif d2 < 1.0 < d1:
        (lam, sl), (mu, sm) = (d2, s2), (d1, s1)
    else:
        return None, {"endpoint": endpoint, "precondition": "failed", "multipliers": [d1, d2]}
    rho = math.log(lam) / math.log(mu)
    resid, p, q = rational_residual(rho, Q)
    info = {
        "endpoint": endpoint,
        "lambda": lam,
        "mu": mu,
        "log_ratio": rho,
        "rational_residual": resid,
        "best_p": p,
        "best_q": q,
    }
    if resid > tau:
        return "irrational", info
    r_lam = sl / (lam * lam - lam)
    r_mu = sm / (mu * mu - mu)
    info.update(ratio_lambda=r_lam, ratio_mu=r_mu)
    if abs(r_lam - r_mu) > max(tau, RATIO_RTOL) * max(1.0, abs(r_lam), abs(r_mu)):
        return "second-derivative", info
    return None, info


def minimality_check(family: MapFamily, rational_denominator_bound: int = 10**6, tolerance: float = 1e-9) -> MinimalityResult:
    """Sufficient conditions for minimality on (0, 1), tested at 0 and then at 1.

    At an endpoint with multipliers lambda < 1 < mu the condition holds if
    ln lambda / ln mu has no integer relation q rho ~ p with q <= Q within
    ``tolerance``, or else if f''/(d^2 - d) differs between the two maps.
    """
    Q, tau = int(rational_denominator_bound), float(tolerance)
    details = {}
    for endpoint in (0, 1):
        clause, info = _check_endpoint(family, endpoint, Q, tau)
        details[f"endpoint{endpoint}"] = info
        if clause is not None:
            return MinimalityResult("SufficientConditionHolds", f"{clause}@{endpoint}", Q, tau, details)
    if all(d.get("precondition") == "failed" for d in details.values()):
        return MinimalityResult("Inconclusive", "precondition failed", Q, tau, details)
    return MinimalityResult("Inconclusive", "rationally dependent with equal second-derivative ratios", Q, tau, details)
