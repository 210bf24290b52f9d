"""Forward, pullback and inverse iteration of the fiber maps.

Conventions: a forward word ``w`` applies ``w[0]`` first.  A past word
stores ``w_{-n}, ..., w_{-1}`` oldest-first, so the pullback composition is
the forward composition over the past word, and the inverse orbit applies
inverses starting from the newest symbol ``w_{-1}``.

Long runs iterate in logit coordinates; ``Coordinate.PLAIN`` forward orbits
use direct closed-form evaluation and are meant for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels as K
from .interval_maps import MapFamily, log_expit, expit, logit
from .io import write_csv
from .symbols import SymbolWord


class Coordinate(str, Enum):
    PLAIN = "plain"
    LOG = "log"
    LOGIT = "logit"


class WordTooShortError(ValueError):
    pass


def to_logit(value, coordinate) -> float:
    coordinate = Coordinate(coordinate)
    if coordinate is Coordinate.LOGIT:
        return float(value)
    if coordinate is Coordinate.LOG:
        if value > 0:
            raise ValueError("log coordinate must be <= 0")
        if value == 0.0:
            return np.inf
        return float(value - np.log(-np.expm1(value)))
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"plain coordinate outside [0, 1]: {value!r}")
    return logit(float(value))


def from_logit(y, coordinate):
    coordinate = Coordinate(coordinate)
    if coordinate is Coordinate.LOGIT:
        return y
    if coordinate is Coordinate.LOG:
        return log_expit(y)
    return expit(y)


@dataclass(frozen=True)
class Orbit:
    coordinate: Coordinate
    steps: np.ndarray
    values: np.ndarray

    def __len__(self):
        return self.steps.size

    @property
    def last(self) -> float:
        return float(self.values[-1])

    def rows(self):
        return zip(self.steps.tolist(), self.values.tolist())

    def to_csv(self, path):
        c = self.coordinate.value
        return write_csv(path, ("step", "value", "coordinate"), ((s, v, c) for s, v in self.rows()))


def _symbols(word, n=None):
    arr = word.symbols if isinstance(word, SymbolWord) else np.asarray(word, dtype=np.int8)
    if n is not None:
        if arr.size < n:
            raise WordTooShortError(f"word of length {arr.size} shorter than n={n}")
        arr = arr[:n]
    return np.ascontiguousarray(arr, dtype=np.int8)


def forward_orbit(family: MapFamily, word, x0: float, n: int, coordinate="plain", stride: int = 1) -> Orbit:
    """Samples of f^k_w(x0) at k = 0, stride, 2 stride, ... and k = n.

    ``x0`` is given in ``coordinate``.
    """
    coordinate = Coordinate(coordinate)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    syms = _symbols(word, n)
    if coordinate is Coordinate.PLAIN:
        return _plain_orbit(family, syms, float(x0), n, stride)
    codes, params, lengths = family.program
    steps, ys = K.orbit(codes, params, lengths, syms, to_logit(x0, coordinate), n, stride)
    return Orbit(coordinate, steps, np.asarray(from_logit(ys, coordinate), dtype=float))


def _plain_orbit(family, syms, x0, n, stride):
    if not 0.0 <= x0 <= 1.0:
        raise ValueError(f"x0 outside [0, 1]: {x0!r}")
    steps, values = [0], [x0]
    x = np.array(x0)
    maps = family.maps
    for i in range(n):
        x = maps[syms[i] - 1]._eval(x)
        if (i + 1) % stride == 0 or i + 1 == n:
            steps.append(i + 1)
            values.append(float(x))
    return Orbit(Coordinate.PLAIN, np.array(steps, dtype=np.int64), np.array(values))


def forward_point(family: MapFamily, word, x0: float, coordinate="plain") -> float:
    """f^n_w(x0) with n = len(word)."""
    syms = _symbols(word)
    codes, params, lengths = family.program
    y = K.final_value(codes, params, lengths, syms, to_logit(x0, coordinate))
    return float(from_logit(y, coordinate))


def pullback_point(family: MapFamily, past_word, x0: float, coordinate="plain") -> float:
    """f^n over the past: apply ``past[0]`` (oldest) first and ``past[-1]`` last."""
    return forward_point(family, past_word, x0, coordinate)


def inverse_orbit(family: MapFamily, past_word, y0: float, coordinate="plain") -> Orbit:
    """k-th sample is the preimage of y0 under the newest k maps of the past."""
    coordinate = Coordinate(coordinate)
    syms = _symbols(past_word)
    codes, params, lengths = family.program
    ys = K.inverse_orbit(codes, params, lengths, syms, to_logit(y0, coordinate))
    steps = np.arange(syms.size + 1, dtype=np.int64)
    return Orbit(coordinate, steps, np.asarray(from_logit(ys, coordinate), dtype=float))
