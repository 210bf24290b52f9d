"""Binned probability measures on [0, 1] and the transfer-operator toolkit.

A :class:`BinnedMeasure` is ``atom0`` at 0, ``B`` uniform interior bins and
``atom1`` at 1, flattened as the cell vector ``[atom0, bins..., atom1]``.
Mass inside a bin is treated as uniformly spread.  Push-forward under an
increasing map ``f`` fixing 0 and 1 is then exact at bin edges: the new
mass below edge ``e`` equals the old mass below ``f^{-1}(e)``, and every
linear operator here is a sparse column-stochastic matrix on cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import rel_entr

from . import _kernels as K
from .engine import _symbols
from .interval_maps import IntervalMap, MapFamily, expit, logit
from .io import write_csv

DEFAULT_BINS = 4096


@dataclass(frozen=True, eq=False)
class BinnedMeasure:
    atom0: float
    bins: np.ndarray
    atom1: float

    def __post_init__(self):
        b = np.array(self.bins, dtype=float).reshape(-1)
        if b.size < 1:
            raise ValueError("need at least one bin")
        b.flags.writeable = False
        object.__setattr__(self, "bins", b)
        object.__setattr__(self, "atom0", float(self.atom0))
        object.__setattr__(self, "atom1", float(self.atom1))

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_vector(cls, v) -> BinnedMeasure:
        v = np.asarray(v, dtype=float)
        return cls(v[0], v[1:-1], v[-1])

    @classmethod
    def delta0(cls, B: int = DEFAULT_BINS) -> BinnedMeasure:
        return cls(1.0, np.zeros(B), 0.0)

    @classmethod
    def delta1(cls, B: int = DEFAULT_BINS) -> BinnedMeasure:
        return cls(0.0, np.zeros(B), 1.0)

    @classmethod
    def lebesgue(cls, B: int = DEFAULT_BINS) -> BinnedMeasure:
        return cls(0.0, np.full(B, 1.0 / B), 0.0)

    @classmethod
    def from_cdf(cls, cdf, B: int = DEFAULT_BINS, atom0: float = 0.0, atom1: float = 0.0) -> BinnedMeasure:
        """Interior part with distribution function ``cdf`` scaled to the leftover mass."""
        F = np.asarray(cdf(edges(B)), dtype=float)
        w = np.diff(F)
        w = w / w.sum() * (1.0 - atom0 - atom1)
        return cls(atom0, w, atom1)

    # -- accessors ------------------------------------------------------------

    @property
    def B(self) -> int:
        return self.bins.size

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(([self.atom0], self.bins, [self.atom1]))

    @property
    def edges(self) -> np.ndarray:
        return edges(self.B)

    @property
    def total(self) -> float:
        return math.fsum(self.vector)

    def density(self) -> np.ndarray:
        return self.bins * self.B

    def mass_below(self, x: float) -> float:
        """m([0, x)) with uniform mass inside bins (x > 0 includes atom0)."""
        if x <= 0.0:
            return 0.0
        return self.atom0 + float(_interior_cdf(self.bins, np.array([min(x, 1.0)]))[0]) + (self.atom1 if x > 1.0 else 0.0)

    def mass_above(self, x: float) -> float:
        """m((x, 1])."""
        return self.total - self.mass_below(x) - (0.0 if x > 0.0 else self.atom0)

    def interior_mass(self, margin_bins: int = 0) -> float:
        """Mass off both atoms and off ``margin_bins`` boundary bins at each end."""
        b = self.bins[margin_bins:self.B - margin_bins] if margin_bins else self.bins
        return math.fsum(b)

    def mixture(self, other: BinnedMeasure, s: float) -> BinnedMeasure:
        """s * self + (1 - s) * other."""
        return BinnedMeasure.from_vector(s * self.vector + (1.0 - s) * other.vector)

    def mean(self) -> float:
        mids = (self.edges[:-1] + self.edges[1:]) / 2
        return float(self.atom1 + self.bins @ mids)

    def to_rows(self):
        e = self.edges
        yield ("atom0", 0.0, 0.0, self.atom0)
        for k in range(self.B):
            yield (f"bin_{k}", float(e[k]), float(e[k + 1]), float(self.bins[k]))
        yield ("atom1", 1.0, 1.0, self.atom1)

    def to_csv(self, path):
        return write_csv(path, ("cell_kind", "left", "right", "mass"), self.to_rows())


def edges(B: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, B + 1)


def _interior_cdf(bins, z):
    B = bins.size
    cum = np.concatenate(([0.0], np.cumsum(bins)))
    k = np.clip(np.floor(z * B).astype(np.int64), 0, B - 1)
    frac = z * B - k
    return cum[k] + frac * bins[k]


def _overlap_matrix(z: np.ndarray, B: int) -> sparse.csr_matrix:
    """Interior block: new bin j receives old mass on [z_j, z_{j+1}] (uniform within old bins).

    ``z`` is the nondecreasing array of edge preimages, ``z[0] = 0``, ``z[B] = 1``
    for a boundary-fixing map (clipped values are allowed for noisy maps).
    """
    e = edges(B)
    pts = np.union1d(z, e)
    left, right = pts[:-1], pts[1:]
    keep = right > left
    left, right = left[keep], right[keep]
    mid = 0.5 * (left + right)
    rows = np.searchsorted(z, mid, side="right") - 1
    cols = np.minimum((mid * B).astype(np.int64), B - 1)
    vals = (right - left) * B
    ok = (rows >= 0) & (rows < B) & (mid > z[0]) & (mid < z[-1])
    return sparse.csr_matrix((vals[ok], (rows[ok], cols[ok])), shape=(B, B))


def _preimage_edges(m: IntervalMap, B: int) -> np.ndarray:
    ys = logit(edges(B))
    return expit(m.inverse_eval_logit(ys))


def map_matrix(m: IntervalMap, B: int) -> sparse.csr_matrix:
    """Cell matrix of the push-forward under ``m`` (atoms fixed)."""
    inner = _overlap_matrix(_preimage_edges(m, B), B)
    return sparse.block_diag(([[1.0]], inner, [[1.0]]), format="csr")


@lru_cache(maxsize=16)
def transfer_matrix(family: MapFamily, B: int) -> sparse.csr_matrix:
    p1, p2 = family.probabilities
    return (p1 * map_matrix(family.f_down, B) + p2 * map_matrix(family.f_up, B)).tocsr()


def pushforward(m: BinnedMeasure, f: IntervalMap) -> BinnedMeasure:
    return BinnedMeasure.from_vector(map_matrix(f, m.B) @ m.vector)


def transfer(m: BinnedMeasure, family: MapFamily) -> BinnedMeasure:
    """p1 f1_* m + p2 f2_* m."""
    return BinnedMeasure.from_vector(transfer_matrix(family, m.B) @ m.vector)


# -- distances ----------------------------------------------------------------


def total_variation(m1: BinnedMeasure, m2: BinnedMeasure) -> float:
    return 0.5 * float(np.abs(m1.vector - m2.vector).sum())


def _tv_vec(d):
    return 0.5 * float(np.abs(d).sum())


def _bl_vec(d, B):
    """sup of sum g_k d_k over |g| <= 1, |g_k - g_{k+1}| <= gap_k (cells at 0, midpoints, 1)."""
    pos = np.concatenate(([0.0], (edges(B)[:-1] + edges(B)[1:]) / 2, [1.0]))
    n = pos.size
    gaps = np.diff(pos)
    D = sparse.diags([np.ones(n - 1), -np.ones(n - 1)], [0, 1], shape=(n - 1, n))
    A = sparse.vstack([D, -D]).tocsr()
    b = np.concatenate([gaps, gaps])
    res = linprog(-d, A_ub=A, b_ub=b, bounds=[(-1.0, 1.0)] * n, method="highs")
    return float(-res.fun)


def bounded_lipschitz(m1: BinnedMeasure, m2: BinnedMeasure) -> float:
    return _bl_vec(m1.vector - m2.vector, m1.B)


METRICS = {"tv": _tv_vec, "bl": None}


def _distance(d, B, metric):
    if metric == "tv":
        return _tv_vec(d)
    if metric == "bl":
        return _bl_vec(d, B)
    raise ValueError(f"unknown metric {metric!r}")


def krylov_bogolyubov(m0: BinnedMeasure, family: MapFamily, iterations: int, residual_metric: str = "tv",
                      record_every: int = 1):
    """Cesaro average of T^r m0 over r < iterations, with residual history.

    The residual after n terms is d(T mbar_n, mbar_n); since
    T mbar_n - mbar_n = (T^n m0 - m0) / n it costs one extra subtraction.
    Returns ``(mbar, steps, residuals)``.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    T = transfer_matrix(family, m0.B)
    v0 = m0.vector
    v = v0.copy()
    acc = np.zeros_like(v0)
    steps, res = [], []
    for n in range(1, iterations + 1):
        acc += v
        v = T @ v
        if n % record_every == 0 or n == iterations:
            steps.append(n)
            res.append(_distance((v - v0) / n, m0.B, residual_metric))
    mbar = BinnedMeasure.from_vector(acc / iterations)
    return mbar, np.array(steps), np.array(res)


# -- cone ---------------------------------------------------------------------


@dataclass(frozen=True)
class ConeParams:
    """Tail cone m([0, x)) <= c x^alpha and m((1 - x, 1]) <= c x^alpha for x <= q."""

    c: float
    alpha: float
    q: float
    delta: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0 and 0.0 < self.q < 1.0 and self.c > 0.0):
            raise ValueError("need c > 0, 0 < alpha < 1, 0 < q < 1")
        if not self.c * self.q**self.alpha > 1.0:
            raise ValueError("cone requires c q^alpha > 1")


@dataclass(frozen=True)
class ConeResult:
    inside: bool
    x: float | None = None
    side: str | None = None

    def __bool__(self):
        return self.inside


def cone_check(m: BinnedMeasure, cone: ConeParams, rtol: float = 1e-12) -> ConeResult:
    """Test both tail bounds at every bin edge x <= q.

    A boundary atom violates the bound for all x below (atom/c)^(1/alpha);
    that point is reported when it comes before the first failing edge.
    """
    B = m.B
    e = edges(B)
    xs = e[1:][e[1:] <= cone.q]
    if xs.size == 0:
        return ConeResult(True)
    k = np.arange(1, xs.size + 1)
    left = m.atom0 + np.cumsum(m.bins)[k - 1]
    right = m.atom1 + np.cumsum(m.bins[::-1])[k - 1]
    bound = cone.c * xs**cone.alpha * (1 + rtol)
    candidates = []
    for side, atom, tail in (("left", m.atom0, left), ("right", m.atom1, right)):
        bad = np.flatnonzero(tail > bound)
        if atom > 0.0:
            x_atom = 0.5 * min((atom / cone.c) ** (1.0 / cone.alpha), xs[0])
            candidates.append((x_atom, side))
        elif bad.size:
            candidates.append((float(xs[bad[0]]), side))
    if not candidates:
        return ConeResult(True)
    x, side = min(candidates)
    return ConeResult(False, x, side)


def _fineq_ok(m: IntervalMap, endpoint: int, rho_shift: float, xs: np.ndarray) -> bool:
    """f^{-1} moves points near the endpoint by at most the factor 1 / rho_shift."""
    if endpoint == 0:
        pre = expit(m.inverse_eval_logit(logit(xs)))
    else:
        pre = expit(-m.inverse_eval_logit(-logit(xs)))  # distance of f^{-1}(1 - x) from 1
    return bool(np.all(pre <= xs / rho_shift * (1 + 1e-12)))


def find_cone_params(family: MapFamily, B: int = DEFAULT_BINS,
                     alphas=tuple(np.round(np.arange(0.05, 1.0, 0.05), 2)),
                     deltas=(0.0, 0.01, 0.02, 0.05, 0.1),
                     qs=(0.2, 0.1, 0.05, 0.02, 0.01)) -> ConeParams:
    """Search for (alpha, delta, q) with sum p_i (rho_i - delta)^(-alpha) < 1 at both ends.

    Here rho_i = f_i'(e); the bound ``dist(f_i^{-1}(x), e) <= dist(x, e) / (rho_i - delta)``
    is checked on all bin edges within q of each endpoint.  ``c`` is set to
    1.05 q^(-alpha).  Raises ValueError when no grid point is admissible.
    """
    p = family.probabilities
    e = edges(B)
    for q in qs:
        xs = e[1:][e[1:] <= q]
        for alpha in alphas:
            for delta in deltas:
                ok = True
                for endpoint in (0, 1):
                    rho = [m.derivative_at(endpoint) for m in family.maps]
                    if min(rho) - delta <= 0:
                        ok = False
                        break
                    if sum(pi * (r - delta) ** -alpha for pi, r in zip(p, rho)) >= 1.0:
                        ok = False
                        break
                    if not all(_fineq_ok(m, endpoint, r - delta, xs) for m, r in zip(family.maps, rho)):
                        ok = False
                        break
                if ok:
                    return ConeParams(float(1.05 * q**-alpha), float(alpha), float(q), float(delta))
    raise ValueError("no admissible cone parameters on the search grid")


# -- noisy operator -------------------------------------------------------------


@lru_cache(maxsize=8)
def noisy_transfer_matrix(family: MapFamily, B: int, epsilon: float, quadrature_nodes: int = 32) -> sparse.csr_matrix:
    """Cell matrix of sum_i p_i int_0^1 (f_{i,z})_* dz with f_{i,z} = (1 - eps) f_i + z eps.

    The z-integral uses the midpoint rule.  Atoms land on interior points and
    are deposited in the containing bin.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must be in (0, 1)")
    if quadrature_nodes < 2:
        raise ValueError("quadrature_nodes must be >= 2")
    e = edges(B)
    zetas = (np.arange(quadrature_nodes) + 0.5) / quadrature_nodes
    total = sparse.csr_matrix((B + 2, B + 2))
    for p, m in zip(family.probabilities, family.maps):
        for z in zetas:
            w = p / quadrature_nodes
            t = np.clip((e - z * epsilon) / (1.0 - epsilon), 0.0, 1.0)
            pre = expit(m.inverse_eval_logit(logit(t)))
            inner = _overlap_matrix(pre, B)
            # atom images z eps and 1 - eps + z eps
            b0 = min(int(z * epsilon * B), B - 1)
            b1 = min(int((1.0 - epsilon + z * epsilon) * B), B - 1)
            block = sparse.lil_matrix((B + 2, B + 2))
            block[1:-1, 1:-1] = inner
            block[1 + b0, 0] += 1.0
            block[1 + b1, B + 1] += 1.0
            total = total + w * block.tocsr()
    return total.tocsr()


def noisy_transfer(m: BinnedMeasure, family: MapFamily, epsilon: float, quadrature_nodes: int = 32) -> BinnedMeasure:
    T = noisy_transfer_matrix(family, m.B, float(epsilon), int(quadrature_nodes))
    return BinnedMeasure.from_vector(T @ m.vector)


# -- functionals ----------------------------------------------------------------


def lyapunov_vs_measure(family: MapFamily, m: BinnedMeasure) -> float:
    """sum_i p_i int ln f_i' dm with bin midpoints and exact atom terms."""
    e = m.edges
    ymid = logit((e[:-1] + e[1:]) / 2)
    total = 0.0
    for p, f in zip(family.probabilities, family.maps):
        interior = float(m.bins @ f.log_derivative_logit(ymid))
        total += p * (m.atom0 * f.log_derivative_at(0) + interior + m.atom1 * f.log_derivative_at(1))
    return total


def relative_entropy(m1: BinnedMeasure, m2: BinnedMeasure) -> float:
    """Discrete Kullback-Leibler divergence over the cells (atom0, bins, atom1)."""
    if m1.B != m2.B:
        raise ValueError("measures live on different grids")
    return float(np.sum(rel_entr(m1.vector, m2.vector)))


def pullback_pushforward(m: BinnedMeasure, family: MapFamily, past_word) -> BinnedMeasure:
    """Push-forward of m under the pullback composition over ``past_word``.

    Edge preimages are computed through the whole composition at once, so
    the within-bin uniformity is applied a single time.
    """
    syms = _symbols(past_word)
    if syms.size == 0:
        return m
    codes, params, lengths = family.program
    ys = K.inverse_chain_array(codes, params, lengths, syms, logit(m.edges))
    inner = _overlap_matrix(expit(ys), m.B)
    return BinnedMeasure(m.atom0, inner @ m.bins, m.atom1)
