"""Boundary-fixing increasing diffeomorphisms of [0, 1] and their calculus.

Every map fixes 0 and 1.  Four primitive kinds are provided:

``moebius``         x -> a x / (1 + (a - 1) x), stored by ``log_multiplier = ln a``;
                    in logit coordinates it is the translation y -> y + ln a.
``logistic``        x -> x + c x (1 - x) with signed coefficient ``coef = c``.
``damped_moebius``  x -> moebius(x) * (1 - k x (1 - x)), ``damping = k``.
``composite``       finite composition, components applied first-to-last.

``inverse`` wraps any map.  Plain evaluation uses closed forms where they
exist; ``eval_log`` and ``eval_logit`` run through the compiled logit programs
in :mod:`skewprod._kernels` and stay accurate arbitrarily close to 0 and 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _kernels as K

DOMAIN_SLACK = 1e-12


class DomainError(ValueError):
    """Argument outside the unit interval."""


class UnsupportedFamilyError(ValueError):
    pass


class Direction(str, Enum):
    DOWN = "down"
    UP = "up"


def _as_unit(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < -DOMAIN_SLACK) or np.any(arr > 1 + DOMAIN_SLACK):
        raise DomainError(f"argument outside [0, 1]: {x!r}")
    return np.clip(arr, 0.0, 1.0)


def _ret(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def logit(x):
    """ln(x / (1 - x)), with logit(0) = -inf and logit(1) = +inf."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(x) - np.log1p(-x)
    return float(out) if out.ndim == 0 else out


def expit(y):
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 0, 1.0 / (1.0 + np.exp(-np.abs(y))), np.exp(-np.abs(y)) / (1.0 + np.exp(-np.abs(y))))
    return float(out) if out.ndim == 0 else out


def expit_complement(y):
    """1 - expit(y) without cancellation."""
    return expit(-np.asarray(y, dtype=float))


@dataclass(frozen=True)
class IntervalMap:
    kind: str
    params: tuple = ()
    components: tuple = ()
    name: str = field(default="", compare=False)

    # -- lowering -------------------------------------------------------------

    def program(self) -> list[tuple[int, float, float]]:
        """Primitive operations applied first-to-last."""
        if self.kind == "moebius":
            return [(K.MOEBIUS, self.params[0], 0.0)]
        if self.kind == "logistic":
            return [(K.LOGISTIC, self.params[0], 0.0)]
        if self.kind == "damped_moebius":
            return [(K.DAMPED, self.params[0], self.params[1])]
        if self.kind == "composite":
            return [op for m in self.components for op in m.program()]
        if self.kind == "inverse":
            out = []
            for code, p0, p1 in reversed(self.components[0].program()):
                if code == K.MOEBIUS:
                    out.append((K.MOEBIUS, -p0, 0.0))
                else:
                    out.append((int(K._INVERSE_CODE[code]), p0, p1))
            return out
        raise UnsupportedFamilyError(self.kind)

    @cached_property
    def _compiled(self):
        return compile_programs([self])

    def inverse(self) -> IntervalMap:
        if self.kind == "moebius":
            return moebius(-self.params[0])
        if self.kind == "inverse":
            return self.components[0]
        if self.kind == "composite":
            return IntervalMap("composite", components=tuple(m.inverse() for m in reversed(self.components)))
        return IntervalMap("inverse", components=(self,))

    # -- plain coordinates ----------------------------------------------------

    def eval(self, x):
        """f(x) by closed form (numeric inversion only for inverses of damped maps)."""
        xv = _as_unit(x)
        return _ret(self._eval(xv), x)

    def _eval(self, x):
        xc = 1.0 - x
        if self.kind == "moebius":
            a = math.exp(self.params[0])
            return a * x / (xc + a * x)
        if self.kind == "logistic":
            return x + self.params[0] * x * xc
        if self.kind == "damped_moebius":
            a = math.exp(self.params[0])
            return a * x / (xc + a * x) * (1.0 - self.params[1] * x * xc)
        if self.kind == "composite":
            for m in self.components:
                x = m._eval(x)
            return x
        if self.kind == "inverse":
            return self.components[0]._inverse(x)
        raise UnsupportedFamilyError(self.kind)

    def inverse_eval(self, y):
        """The unique x with f(x) = y."""
        yv = _as_unit(y)
        return _ret(self._inverse(yv), y)

    def _inverse(self, y):
        if self.kind == "moebius":
            return moebius(-self.params[0])._eval(y)
        if self.kind == "logistic":
            c = self.params[0]
            yc = 1.0 - y
            disc = np.where(y < 0.5, (1 + c) ** 2 - 4 * c * y, (1 - c) ** 2 + 4 * c * yc)
            return 2.0 * y / ((1 + c) + np.sqrt(disc))
        if self.kind == "composite":
            for m in reversed(self.components):
                y = m._inverse(y)
            return y
        if self.kind == "inverse":
            return self.components[0]._eval(y)
        return _bracketed_inverse(self, y)

    def derivative(self, x):
        xv = _as_unit(x)
        return _ret(self._derivative(xv), x)

    def _derivative(self, x):
        xc = 1.0 - x
        if self.kind == "moebius":
            a = math.exp(self.params[0])
            return a / (xc + a * x) ** 2
        if self.kind == "logistic":
            return 1.0 + self.params[0] * (xc - x)
        if self.kind == "damped_moebius":
            a, k = math.exp(self.params[0]), self.params[1]
            den = xc + a * x
            g = a * x / den
            return a / den**2 * (1.0 - k * x * xc) - g * k * (xc - x)
        if self.kind == "composite":
            d = np.ones_like(x)
            for m in self.components:
                d = d * m._derivative(x)
                x = m._eval(x)
            return d
        if self.kind == "inverse":
            inner = self.components[0]
            return 1.0 / inner._derivative(inner._inverse(x))
        raise UnsupportedFamilyError(self.kind)

    # -- endpoint calculus ----------------------------------------------------

    def log_derivative_at(self, endpoint: int) -> float:
        """ln f'(e) at e in {0, 1} from closed forms."""
        _check_endpoint(endpoint)
        if self.kind == "moebius":
            return self.params[0] if endpoint == 0 else -self.params[0]
        if self.kind == "logistic":
            c = self.params[0]
            return math.log1p(c) if endpoint == 0 else math.log1p(-c)
        if self.kind == "damped_moebius":
            s, k = self.params
            return s if endpoint == 0 else math.log(math.exp(-s) + k)
        if self.kind == "composite":
            return math.fsum(m.log_derivative_at(endpoint) for m in self.components)
        if self.kind == "inverse":
            return -self.components[0].log_derivative_at(endpoint)
        raise UnsupportedFamilyError(self.kind)

    def derivative_at(self, endpoint: int) -> float:
        return math.exp(self.log_derivative_at(endpoint))

    def second_derivative_at(self, endpoint: int) -> float:
        """Exact f''(e) at a fixed endpoint e in {0, 1}."""
        _check_endpoint(endpoint)
        if self.kind == "moebius":
            a = math.exp(self.params[0])
            return -2 * a * (a - 1) if endpoint == 0 else -2 * (a - 1) / a**2
        if self.kind == "logistic":
            return -2.0 * self.params[0]
        if self.kind == "damped_moebius":
            s, k = self.params
            a = math.exp(s)
            if endpoint == 0:
                return -2 * a * (a - 1) - 2 * a * k
            return -2 * (a - 1) / a**2 + 2 * k / a + 2 * k
        if self.kind == "composite":
            d1, d2 = 1.0, 0.0
            for m in self.components:
                g1 = m.derivative_at(endpoint)
                g2 = m.second_derivative_at(endpoint)
                d1, d2 = g1 * d1, g2 * d1 * d1 + g1 * d2
            return d2
        if self.kind == "inverse":
            inner = self.components[0]
            return -inner.second_derivative_at(endpoint) / inner.derivative_at(endpoint) ** 3
        raise UnsupportedFamilyError(self.kind)

    def second_derivative_at_zero(self) -> float:
        return self.second_derivative_at(0)

    # -- boundary-safe coordinates -------------------------------------------

    def eval_logit(self, y):
        """ln(f(x) / (1 - f(x))) as a function of y = ln(x / (1 - x))."""
        codes, params, lengths = self._compiled
        arr = np.atleast_1d(np.asarray(y, dtype=float))
        out = K.map_logit_array(codes, params, lengths, 0, arr, False)
        return float(out[0]) if np.ndim(y) == 0 else out

    def inverse_eval_logit(self, y):
        codes, params, lengths = self._compiled
        arr = np.atleast_1d(np.asarray(y, dtype=float))
        out = K.map_logit_array(codes, params, lengths, 0, arr, True)
        return float(out[0]) if np.ndim(y) == 0 else out

    def eval_log(self, u):
        """ln f(e^u) for u <= 0, without underflow."""
        arr = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(arr > DOMAIN_SLACK):
            raise DomainError(f"log coordinate must be <= 0: {u!r}")
        arr = np.minimum(arr, 0.0)
        with np.errstate(divide="ignore"):
            y = arr - np.log(-np.expm1(arr))
        out = log_expit(self.eval_logit(y))
        return float(out[0]) if np.ndim(u) == 0 else out

    def log_derivative_logit(self, y):
        """ln f'(x) at the point with logit y."""
        codes, params, lengths = self._compiled
        arr = np.atleast_1d(np.asarray(y, dtype=float))
        out = K.map_logder_array(codes, params, lengths, 0, arr)
        return float(out[0]) if np.ndim(y) == 0 else out

    # -- descriptors ----------------------------------------------------------

    @property
    def direction(self) -> Direction:
        """Side of the diagonal, read off at x = 1/2."""
        return Direction.DOWN if self.eval_logit(0.0) < 0.0 else Direction.UP

    def to_expr(self) -> str:
        if self.kind == "moebius":
            return f"moebius(log_multiplier={self.params[0]!r})"
        if self.kind == "logistic":
            return f"logistic(coef={self.params[0]!r})"
        if self.kind == "damped_moebius":
            return f"damped_moebius(log_multiplier={self.params[0]!r}, damping={self.params[1]!r})"
        if self.kind == "composite":
            return "compose(" + ", ".join(m.to_expr() for m in self.components) + ")"
        if self.kind == "inverse":
            return f"inverse({self.components[0].to_expr()})"
        raise UnsupportedFamilyError(self.kind)

    def __repr__(self):
        return self.name or self.to_expr()


def log_expit(y):
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 0, -np.log1p(np.exp(-np.abs(y))), y - np.log1p(np.exp(-np.abs(y))))
    return float(out) if out.ndim == 0 else out


def _check_endpoint(endpoint):
    if endpoint not in (0, 1):
        raise ValueError(f"endpoint must be 0 or 1, got {endpoint!r}")


def _bracketed_inverse(m: IntervalMap, y, tol=1e-14, maxiter=200):
    """Monotone bisection bracket with Newton polish, vectorized."""
    y = np.asarray(y, dtype=float)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    x = y.copy()
    for _ in range(maxiter):
        fx = m._eval(x) - y
        lo = np.where(fx <= 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = fx / m._derivative(x)
        x_new = x - step
        bad = ~np.isfinite(x_new) | (x_new <= lo) | (x_new >= hi)
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)
        done = np.abs(x_new - x) <= tol
        x = x_new
        if np.all(done | (hi - lo <= tol)):
            break
    x = np.where(y == 0.0, 0.0, np.where(y == 1.0, 1.0, x))
    return x


# -- constructors ---------------------------------------------------------------


def moebius(log_multiplier: float, name: str = "") -> IntervalMap:
    return IntervalMap("moebius", (float(log_multiplier),), name=name)


def logistic_perturb(r: float, direction: Direction | str, name: str = "") -> IntervalMap:
    """x -/+ r x (1 - x); ``Direction.DOWN`` gives the minus sign."""
    direction = Direction(direction)
    c = -float(r) if direction is Direction.DOWN else float(r)
    return IntervalMap("logistic", (c,), name=name)


def damped_moebius(log_multiplier: float, damping: float, name: str = "") -> IntervalMap:
    return IntervalMap("damped_moebius", (float(log_multiplier), float(damping)), name=name)


def compose(*maps: IntervalMap, name: str = "") -> IntervalMap:
    """Composite applying ``maps[0]`` first."""
    return IntervalMap("composite", components=tuple(maps), name=name)


def compile_programs(maps: Sequence[IntervalMap]):
    progs = [m.program() for m in maps]
    width = max(1, max(len(p) for p in progs))
    codes = np.zeros((len(maps), width), np.int64)
    params = np.zeros((len(maps), width, 2), np.float64)
    lengths = np.array([len(p) for p in progs], np.int64)
    for i, prog in enumerate(progs):
        for j, (code, p0, p1) in enumerate(prog):
            codes[i, j] = code
            params[i, j] = (p0, p1)
    return codes, params, lengths


# -- families -------------------------------------------------------------------


@dataclass(frozen=True)
class MapFamily:
    """Ordered pair (f_down, f_up) with selection probabilities (p1, p2)."""

    f_down: IntervalMap
    f_up: IntervalMap
    probabilities: tuple = (0.5, 0.5)

    def __post_init__(self):
        p1, p2 = (float(p) for p in self.probabilities)
        if not (0.0 < p1 < 1.0 and 0.0 < p2 < 1.0):
            raise ValueError(f"probabilities must lie in (0, 1), got {self.probabilities}")
        if abs(p1 + p2 - 1.0) > 1e-15:
            raise ValueError(f"probabilities must sum to 1, got {self.probabilities}")
        object.__setattr__(self, "probabilities", (p1, p2))

    @classmethod
    def from_p1(cls, f_down, f_up, p1=0.5):
        return cls(f_down, f_up, (p1, 1.0 - p1))

    @property
    def maps(self):
        return (self.f_down, self.f_up)

    @cached_property
    def program(self):
        return compile_programs(self.maps)

    def map_for(self, symbol: int) -> IntervalMap:
        return self.maps[symbol - 1]

    def validate(self, grid_size: int = 1000) -> ValidationReport:
        return validate_family(self, grid_size)

    def with_probabilities(self, p1: float) -> MapFamily:
        return MapFamily(self.f_down, self.f_up, (p1, 1.0 - p1))


@dataclass(frozen=True)
class Violation:
    condition: str
    map_label: str
    x: float
    message: str


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "pass"
        return "; ".join(v.message for v in self.violations)


def validate_family(family: MapFamily, grid_size: int = 1000) -> ValidationReport:
    """Check boundary fixing, sides of the diagonal and monotonicity on a grid.

    Returns the list of violated conditions with a witnessing x, never raises.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    grid = np.linspace(0.0, 1.0, grid_size)
    interior = grid[1:-1]
    violations = []
    expected = {"f1": Direction.DOWN, "f2": Direction.UP}
    for label, m in zip(("f1", "f2"), family.maps):
        f0, f1 = m._eval(np.array([0.0, 1.0]))
        if f0 != 0.0 or abs(f1 - 1.0) > 1e-15:
            bad = 0.0 if f0 != 0.0 else 1.0
            violations.append(Violation("boundary", label, bad, f"{label} does not fix {bad:g}"))
        d = m._derivative(grid)
        vals = m._eval(grid)
        nonpos = np.flatnonzero(~(d > 0))
        nonmono = np.flatnonzero(~(np.diff(vals) > 0))
        if nonpos.size or nonmono.size:
            idx = nonpos[0] if nonpos.size else nonmono[0]
            violations.append(Violation("increasing", label, float(grid[idx]), f"{label} not increasing"))
        if interior.size:
            fi = m._eval(interior)
            if expected[label] is Direction.DOWN:
                wrong = np.flatnonzero(~(fi < interior))
            else:
                wrong = np.flatnonzero(~(fi > interior))
            if wrong.size:
                x = float(interior[wrong[0]])
                violations.append(
                    Violation("direction", label, x, f"{label} direction mismatch: expected {expected[label].value}")
                )
    return ValidationReport(violations)


# -- catalog --------------------------------------------------------------------

G1 = moebius(-1.0, name="g1")
G2 = moebius(1.0, name="g2")


def symmetric_walk(p1: float = 0.5) -> MapFamily:
    """Moebius maps conjugate to y -> y -/+ 1."""
    return MapFamily.from_p1(G1, G2, p1)


def kan_family(r: float = 0.5, p1: float = 0.5) -> MapFamily:
    """x -/+ r x (1 - x); both boundary exponents are negative for 0 < r < 1."""
    return MapFamily.from_p1(
        logistic_perturb(r, Direction.DOWN, name=f"kan_f1(r={r})"),
        logistic_perturb(r, Direction.UP, name=f"kan_f2(r={r})"),
        p1,
    )


def inverse_kan_family(r: float = 0.5, p1: float = 0.5) -> MapFamily:
    """Inverses of the Kan maps; f2^{-1} lies below the diagonal, f1^{-1} above."""
    kan = kan_family(r)
    return MapFamily.from_p1(kan.f_up.inverse(), kan.f_down.inverse(), p1)


def onoff_family(damping: float = 0.3, p1: float = 0.5) -> MapFamily:
    """g_i(x) (1 - damping x (1 - x)): neutral at 0, repelling at 1."""
    return MapFamily.from_p1(
        damped_moebius(-1.0, damping, name=f"onoff_f1(k={damping})"),
        damped_moebius(1.0, damping, name=f"onoff_f2(k={damping})"),
        p1,
    )


def drift_family(r_down: float = 0.2, r_up: float = 0.5, p1: float = 0.5) -> MapFamily:
    """Logistic pair with r_up > r_down: L(0) > 0 and L(1) < 0 at p1 = 1/2."""
    return MapFamily.from_p1(
        logistic_perturb(r_down, Direction.DOWN), logistic_perturb(r_up, Direction.UP), p1
    )


def mirror(m: IntervalMap) -> IntervalMap:
    """x -> 1 - f(1 - x), for families supported by closed forms."""
    if m.kind == "moebius":
        return moebius(-m.params[0])
    if m.kind == "logistic":
        return IntervalMap("logistic", (-m.params[0],))
    if m.kind == "composite":
        return compose(*(mirror(c) for c in m.components))
    if m.kind == "inverse":
        return mirror(m.components[0]).inverse()
    raise UnsupportedFamilyError(f"no closed-form mirror for {m.kind}")


def mirror_family(family: MapFamily) -> MapFamily:
    """Conjugate by x -> 1 - x; the mirrored f_up becomes the new f_down."""
    p1, p2 = family.probabilities
    return MapFamily(mirror(family.f_up), mirror(family.f_down), (p2, p1))
