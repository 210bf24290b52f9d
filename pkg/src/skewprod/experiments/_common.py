"""Records, stream allocation and worker fan-out shared by the drivers."""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..io import write_csv
from ..lyapunov import Regime, classify_regime
from ..symbols import sample_word

WORKERS_ENV = "SKEWPROD_WORKERS"

# stream tags; the low 40 bits hold the sample index
WORDS, POINTS, PAST, FUTURE, EXTRA = 0, 1, 2, 3, 4


def stream_id(tag: int, index: int) -> int:
    return (tag << 40) | index


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def fan_out(fn: Callable[[int], object], count: int, workers: int | None = None) -> list:
    """[fn(0), ..., fn(count - 1)] in index order, computed on a thread pool.

    The kernels release the GIL; results depend only on the index.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def word_symbols(probabilities, length, seed, tag, index) -> np.ndarray:
    return sample_word(probabilities, length, seed, stream_id(tag, index)).symbols


class RegimeMismatchWarning(UserWarning):
    pass


def check_regime(family, expected: Sequence[Regime], strict: bool = False) -> Regime:
    regime = classify_regime(family).regime
    if regime not in expected:
        msg = f"family is in regime {regime.value}, expected one of {[r.value for r in expected]}"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, RegimeMismatchWarning, stacklevel=3)
    return regime


@dataclass
class ExperimentRecord:
    experiment: str
    parameters: dict
    columns: tuple
    rows: list
    provenance: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def to_csv(self, path):
        if not self.rows:
            raise ValueError(f"record {self.experiment!r} has no rows")
        return write_csv(path, self.columns, self.rows)

    def manifest(self) -> dict:
        return {
            "experiment": self.experiment,
            "parameters": self.parameters,
            "provenance": self.provenance,
            "summary": self.summary,
            "columns": list(self.columns),
            "row_count": len(self.rows),
        }
