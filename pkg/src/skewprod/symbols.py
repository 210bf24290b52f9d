"""Bernoulli symbol words with regenerable provenance.

Words are drawn from numpy's Philox counter-based generator keyed by
``(seed, stream)``.  Raw 64-bit output number ``offset + i`` decides symbol
``i``: the top 53 bits form a uniform u in [0, 1) and the symbol is 1 when
u < p1.  Any window of any stream can therefore be regenerated directly
from ``(seed, stream, offset)`` without replaying earlier draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SYMBOL_DTYPE = np.int8
_MASK64 = (1 << 64) - 1


def _check_probabilities(probabilities):
    p1, p2 = (float(p) for p in probabilities)
    if not (0.0 < p1 < 1.0 and 0.0 < p2 < 1.0) or abs(p1 + p2 - 1.0) > 1e-15:
        raise ValueError(f"invalid probabilities {probabilities!r}")
    return p1, p2


def raw_stream(seed: int, stream: int, offset: int, length: int) -> np.ndarray:
    """Raw uint64 outputs ``offset .. offset + length - 1`` of stream ``(seed, stream)``."""
    if offset < 0 or length < 0:
        raise ValueError("offset and length must be non-negative")
    bitgen = np.random.Philox(key=[int(seed) & _MASK64, int(stream) & _MASK64], counter=0)
    # one counter step yields four 64-bit words
    bitgen.advance(offset // 4)
    if offset % 4:
        bitgen.random_raw(offset % 4)
    return bitgen.random_raw(length)


def _symbols_from_raw(raw: np.ndarray, p1: float) -> np.ndarray:
    u = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    out = np.where(u < p1, 1, 2).astype(SYMBOL_DTYPE)
    return out


@dataclass(frozen=True, eq=False)
class SymbolWord:
    """Finite window of a symbol sequence over {1, 2}.

    ``seed`` is None for words given explicitly rather than sampled.
    """

    symbols: np.ndarray
    seed: int | None = None
    stream: int = 0
    offset: int = 0
    probabilities: tuple = field(default=(0.5, 0.5))

    def __post_init__(self):
        arr = np.array(self.symbols, dtype=SYMBOL_DTYPE).reshape(-1)
        if arr.size and not np.all((arr == 1) | (arr == 2)):
            raise ValueError("symbols must be 1 or 2")
        arr.flags.writeable = False
        object.__setattr__(self, "symbols", arr)

    @classmethod
    def from_symbols(cls, symbols: Iterable[int]) -> SymbolWord:
        return cls(np.fromiter(symbols, dtype=SYMBOL_DTYPE))

    def __len__(self):
        return self.symbols.size

    def __getitem__(self, i):
        return self.symbols[i]

    def __eq__(self, other):
        if not isinstance(other, SymbolWord):
            return NotImplemented
        return np.array_equal(self.symbols, other.symbols) and self.provenance == other.provenance

    def __hash__(self):
        return hash((self.symbols.tobytes(), self.provenance))

    @property
    def provenance(self):
        return (self.seed, self.stream, self.offset)

    def regenerate(self) -> SymbolWord:
        if self.seed is None:
            raise ValueError("word has no sampling provenance")
        return sample_word(self.probabilities, len(self), self.seed, self.stream, self.offset)

    def shift(self, k: int) -> SymbolWord:
        return shift(self, k)

    def to_list(self) -> list[int]:
        return self.symbols.tolist()


def sample_word(probabilities, length: int, seed: int, stream: int = 0, offset: int = 0) -> SymbolWord:
    """i.i.d. symbols with P(1) = p1, determined by (seed, stream, offset)."""
    p1, p2 = _check_probabilities(probabilities)
    if length < 0:
        raise ValueError("length must be non-negative")
    raw = raw_stream(seed, stream, offset, length)
    return SymbolWord(_symbols_from_raw(raw, p1), int(seed), int(stream), int(offset), (p1, p2))


def shift(word: SymbolWord, k: int) -> SymbolWord:
    """Left shift by k: the result starts at ``word[k]``."""
    if k < 0 or k > len(word):
        raise IndexError(f"shift {k} out of range for word of length {len(word)}")
    return SymbolWord(word.symbols[k:], word.seed, word.stream, word.offset + k, word.probabilities)


@dataclass(frozen=True)
class CylinderSpec:
    """Constraints ``word[position] == symbol``."""

    constraints: tuple = ()

    def __post_init__(self):
        cons = tuple((int(p), int(s)) for p, s in self.constraints)
        positions = [p for p, _ in cons]
        if len(set(positions)) != len(positions):
            raise ValueError("cylinder positions must be distinct")
        if any(p < 0 for p in positions) or any(s not in (1, 2) for _, s in cons):
            raise ValueError("invalid cylinder constraint")
        object.__setattr__(self, "constraints", tuple(sorted(cons)))

    @classmethod
    def prefix(cls, symbols: Sequence[int]) -> CylinderSpec:
        return cls(tuple(enumerate(symbols)))

    @property
    def length(self) -> int:
        return max((p for p, _ in self.constraints), default=-1) + 1

    def contains(self, word: SymbolWord) -> bool:
        return all(p < len(word) and word.symbols[p] == s for p, s in self.constraints)

    def impose(self, symbols: np.ndarray) -> np.ndarray:
        """Copy of ``symbols`` with the constrained positions overwritten."""
        out = np.array(symbols, dtype=SYMBOL_DTYPE)
        for p, s in self.constraints:
            out[p] = s
        return out


def cylinder_probability(spec: CylinderSpec, probabilities) -> float:
    p = _check_probabilities(probabilities)
    prob = 1.0
    for _, s in spec.constraints:
        prob *= p[s - 1]
    return prob


def sample_in_cylinder(spec: CylinderSpec, probabilities, length: int, seed: int, stream: int = 0) -> SymbolWord:
    """Draw from the Bernoulli measure conditioned on the cylinder.

    Coordinates are independent, so conditioning only fixes the constrained
    positions; the free positions keep their sampled values.
    """
    if length < spec.length:
        raise ValueError("word shorter than cylinder")
    w = sample_word(probabilities, length, seed, stream)
    return SymbolWord(spec.impose(w.symbols), w.seed, w.stream, w.offset, w.probabilities)


def uniforms(seed: int, stream: int, length: int, offset: int = 0) -> np.ndarray:
    """Uniform doubles in [0, 1) from the same raw stream layout as symbols."""
    return (raw_stream(seed, stream, offset, length) >> np.uint64(11)).astype(np.float64) * 2.0**-53
