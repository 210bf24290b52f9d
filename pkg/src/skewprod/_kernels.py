"""Compiled inner loops for fiber iteration in logit coordinates.

A map is lowered to a *program*: a short sequence of primitive operations,
each a ``(code, p0, p1)`` triple applied first-to-last.  A family is two such
programs stacked in ``codes[2, L]``, ``params[2, L, 2]``, ``lengths[2]``;
symbol ``s`` in {1, 2} selects row ``s - 1``.

All state is carried as the logit ``y = ln(x / (1 - x))``.  Each primitive
reports its logit increment from the pair ``(x, 1 - x)``, both computed
without cancellation, so iterates within 1e-300 of either endpoint keep full
relative precision.  ``y = -inf`` and ``y = +inf`` encode the fixed endpoints.
"""

import math

import numpy as np
from numba import njit

MOEBIUS = 0  # x -> a x / (1 + (a - 1) x),  p0 = ln a
LOGISTIC = 1  # x -> x + c x (1 - x),        p0 = c
DAMPED = 2  # moebius(x) * (1 - k x (1 - x)), p0 = ln a, p1 = k
INV_LOGISTIC = 3  # inverse of LOGISTIC
INV_DAMPED = 4  # inverse of DAMPED

_INVERSE_CODE = np.array([MOEBIUS, INV_LOGISTIC, INV_DAMPED, LOGISTIC, DAMPED])


@njit(cache=True, nogil=True)
def expit_pair(y):
    """Return (x, 1 - x) for logit y without cancellation."""
    if y >= 0.0:
        e = math.exp(-y)
        return 1.0 / (1.0 + e), e / (1.0 + e)
    e = math.exp(y)
    return e / (1.0 + e), 1.0 / (1.0 + e)


@njit(cache=True, nogil=True)
def log_expit(y):
    """ln x for logit y."""
    if y >= 0.0:
        return -math.log1p(math.exp(-y))
    return y - math.log1p(math.exp(y))


@njit(cache=True, nogil=True)
def _inv_logistic_pair(c, x, xc):
    # roots of c z^2 - (1 + c) z + x = 0 in the two stable forms
    if x < 0.5:
        disc = (1.0 + c) * (1.0 + c) - 4.0 * c * x
    else:
        disc = (1.0 - c) * (1.0 - c) + 4.0 * c * xc
    r = math.sqrt(disc)
    d0 = (1.0 + c) + r
    d1 = (1.0 - c) + r
    return d0, d1


@njit(cache=True, nogil=True)
def _damped_correction(s, k, x, xc):
    a = math.exp(s)
    return math.log1p(-k * x * xc) - math.log1p(a * k * x * x)


@njit(cache=True, nogil=True)
def _damped_correction_slope(s, k, x, xc):
    a = math.exp(s)
    u = x * xc
    return -k * u * (xc - x) / (1.0 - k * u) - 2.0 * a * k * x * x * xc / (1.0 + a * k * x * x)


@njit(cache=True, nogil=True)
def _inv_damped(s, k, y):
    """Logit of z with DAMPED(z) = x, where y = logit(x)."""
    if not math.isfinite(y):
        return y
    a = math.exp(s)
    # the correction lies in [ln(1 - k/4) - ln(1 + a k), 0]
    lo = y - s
    hi = y - s - math.log1p(-0.25 * k) + math.log1p(a * k)
    t = 0.5 * (lo + hi)
    for _ in range(100):
        x, xc = expit_pair(t)
        g = t + s + _damped_correction(s, k, x, xc) - y
        if g > 0.0:
            hi = t
        else:
            lo = t
        slope = 1.0 + _damped_correction_slope(s, k, x, xc)
        step = g / slope
        t_new = t - step
        if t_new <= lo or t_new >= hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 1e-15 * max(1.0, abs(t)) or hi - lo <= 1e-15 * max(1.0, abs(t)):
            return t_new
        t = t_new
    return t


@njit(cache=True, nogil=True)
def prim_apply(code, p0, p1, y):
    """Apply one primitive to logit y."""
    if code == MOEBIUS:
        return y + p0
    if code == INV_DAMPED:
        return _inv_damped(p0, p1, y)
    if not math.isfinite(y):
        return y
    x, xc = expit_pair(y)
    if code == LOGISTIC:
        return y + math.log1p(p0 * xc) - math.log1p(-p0 * x)
    if code == DAMPED:
        return y + p0 + _damped_correction(p0, p1, x, xc)
    # INV_LOGISTIC
    d0, d1 = _inv_logistic_pair(p0, x, xc)
    return y + math.log(d1 / d0)


@njit(cache=True, nogil=True)
def _damped_logder(s, k, x, xc):
    a = math.exp(s)
    den = xc + a * x
    g = a * x / den
    dg = a / (den * den)
    return math.log(dg * (1.0 - k * x * xc) - g * k * (xc - x))


@njit(cache=True, nogil=True)
def prim_logder(code, p0, p1, y):
    """ln f'(x) of one primitive at the point with logit y."""
    x, xc = expit_pair(y)
    if code == MOEBIUS:
        a = math.exp(p0)
        return p0 - 2.0 * math.log(xc + a * x)
    if code == LOGISTIC:
        return math.log1p(p0 * (xc - x))
    if code == DAMPED:
        return _damped_logder(p0, p1, x, xc)
    if code == INV_LOGISTIC:
        d0, d1 = _inv_logistic_pair(p0, x, xc)
        z = 2.0 * x / d0
        zc = 2.0 * xc / d1
        return -math.log1p(p0 * (zc - z))
    # INV_DAMPED
    t = _inv_damped(p0, p1, y)
    z, zc = expit_pair(t)
    return -_damped_logder(p0, p1, z, zc)


@njit(cache=True, nogil=True)
def map_logit(codes, params, lengths, row, y):
    for j in range(lengths[row]):
        y = prim_apply(codes[row, j], params[row, j, 0], params[row, j, 1], y)
    return y


@njit(cache=True, nogil=True)
def map_inverse_logit(codes, params, lengths, row, y):
    for j in range(lengths[row] - 1, -1, -1):
        code = codes[row, j]
        p0 = params[row, j, 0]
        if code == MOEBIUS:
            y = y - p0
        elif code == LOGISTIC:
            y = prim_apply(INV_LOGISTIC, p0, 0.0, y)
        elif code == INV_LOGISTIC:
            y = prim_apply(LOGISTIC, p0, 0.0, y)
        elif code == DAMPED:
            y = prim_apply(INV_DAMPED, p0, params[row, j, 1], y)
        else:
            y = prim_apply(DAMPED, p0, params[row, j, 1], y)
    return y


@njit(cache=True, nogil=True)
def map_logder(codes, params, lengths, row, y):
    total = 0.0
    for j in range(lengths[row]):
        total += prim_logder(codes[row, j], params[row, j, 0], params[row, j, 1], y)
        y = prim_apply(codes[row, j], params[row, j, 0], params[row, j, 1], y)
    return total


@njit(cache=True, nogil=True)
def map_logit_array(codes, params, lengths, row, ys, inverse):
    out = np.empty_like(ys)
    for i in range(ys.size):
        if inverse:
            out[i] = map_inverse_logit(codes, params, lengths, row, ys[i])
        else:
            out[i] = map_logit(codes, params, lengths, row, ys[i])
    return out


@njit(cache=True, nogil=True)
def map_logder_array(codes, params, lengths, row, ys):
    out = np.empty_like(ys)
    for i in range(ys.size):
        out[i] = map_logder(codes, params, lengths, row, ys[i])
    return out


@njit(cache=True, nogil=True)
def orbit(codes, params, lengths, symbols, y0, n, stride):
    """Logit samples at steps 0, stride, 2 stride, ... plus step n."""
    m = n // stride + 1
    if n % stride:
        m += 1
    steps = np.empty(m, np.int64)
    values = np.empty(m, np.float64)
    steps[0] = 0
    values[0] = y0
    y = y0
    k = 1
    for i in range(n):
        y = map_logit(codes, params, lengths, symbols[i] - 1, y)
        if (i + 1) % stride == 0 or i + 1 == n:
            steps[k] = i + 1
            values[k] = y
            k += 1
    return steps, values


@njit(cache=True, nogil=True)
def final_value(codes, params, lengths, symbols, y0):
    y = y0
    for i in range(symbols.size):
        y = map_logit(codes, params, lengths, symbols[i] - 1, y)
    return y


@njit(cache=True, nogil=True)
def inverse_orbit(codes, params, lengths, past, y0):
    """Logits of f^{-k}(y0), k = 0..n, applying inverses newest-past-first."""
    n = past.size
    out = np.empty(n + 1, np.float64)
    out[0] = y0
    y = y0
    for k in range(1, n + 1):
        y = map_inverse_logit(codes, params, lengths, past[n - k] - 1, y)
        out[k] = y
    return out


@njit(cache=True, nogil=True)
def inverse_chain_array(codes, params, lengths, past, ys):
    """Apply (f^n over past)^{-1} to every entry of ys."""
    out = ys.copy()
    n = past.size
    for i in range(out.size):
        y = out[i]
        for k in range(n - 1, -1, -1):
            y = map_inverse_logit(codes, params, lengths, past[k] - 1, y)
        out[i] = y
    return out


@njit(cache=True, nogil=True)
def exponent_sum(codes, params, lengths, symbols, y0):
    """Sum of ln f'_{w_i}(x_i) and the sum of squares along the orbit."""
    y = y0
    s = 0.0
    s2 = 0.0
    for i in range(symbols.size):
        row = symbols[i] - 1
        d = map_logder(codes, params, lengths, row, y)
        s += d
        s2 += d * d
        y = map_logit(codes, params, lengths, row, y)
    return s, s2


@njit(cache=True, nogil=True)
def basin_outcome(codes, params, lengths, symbols, y0, lo, hi, tail_start):
    """0: stays below lo on the tail window, 1: stays above hi, 2: undecided."""
    y = y0
    below = True
    above = True
    n = symbols.size
    if tail_start == 0:
        below = y < lo
        above = y > hi
    for i in range(n):
        y = map_logit(codes, params, lengths, symbols[i] - 1, y)
        if i + 1 >= tail_start:
            if y >= lo:
                below = False
            if y <= hi:
                above = False
            if not below and not above:
                return 2
    if below:
        return 0
    if above:
        return 1
    return 2


@njit(cache=True, nogil=True)
def pair_distance(codes, params, lengths, symbols, ya, yb, stride):
    """|x_n - x'_n| in plain coordinates at steps 0, stride, ..., n."""
    n = symbols.size
    m = n // stride + 1
    out = np.empty(m, np.float64)
    xa, _ = expit_pair(ya)
    xb, _ = expit_pair(yb)
    out[0] = abs(xa - xb)
    k = 1
    for i in range(n):
        row = symbols[i] - 1
        ya = map_logit(codes, params, lengths, row, ya)
        yb = map_logit(codes, params, lengths, row, yb)
        if (i + 1) % stride == 0:
            xa, xac = expit_pair(ya)
            xb, xbc = expit_pair(yb)
            # subtract on the side where both values are small
            if xa < 0.5:
                out[k] = abs(xa - xb)
            else:
                out[k] = abs(xbc - xac)
            k += 1
    return out


@njit(cache=True, nogil=True)
def occupation_counts(codes, params, lengths, symbols, y0, checkpoints, lo, hi):
    """Number of i < n with lo <= y_i <= hi, for each checkpoint n (sorted)."""
    out = np.zeros(checkpoints.size, np.int64)
    count = 0
    y = y0
    c = 0
    while c < checkpoints.size and checkpoints[c] == 0:
        c += 1
    for i in range(symbols.size):
        if lo <= y <= hi:
            count += 1
        # count now covers indices 0..i
        while c < checkpoints.size and checkpoints[c] == i + 1:
            out[c] = count
            c += 1
        if c == checkpoints.size:
            break
        y = map_logit(codes, params, lengths, symbols[i] - 1, y)
    return out


@njit(cache=True, nogil=True)
def run_lengths(codes, params, lengths, symbols, y0, threshold):
    """Maximal runs of y_i <= threshold / > threshold over i = 0..n-1.

    Returns run durations and a flag per run (1 for the ``> threshold`` side).
    """
    n = symbols.size
    cap = 1024
    durations = np.empty(cap, np.int64)
    sides = np.empty(cap, np.int8)
    k = 0
    y = y0
    side = 1 if y > threshold else 0
    start = 0
    for i in range(1, n):
        y = map_logit(codes, params, lengths, symbols[i - 1] - 1, y)
        s = 1 if y > threshold else 0
        if s != side:
            if k == cap:
                cap *= 2
                durations = np.concatenate((durations, np.empty(cap - k, np.int64)))
                sides = np.concatenate((sides, np.empty(cap - k, np.int8)))
            durations[k] = i - start
            sides[k] = side
            k += 1
            side = s
            start = i
    if k == cap:
        durations = np.concatenate((durations, np.empty(1, np.int64)))
        sides = np.concatenate((sides, np.empty(1, np.int8)))
    durations[k] = n - start
    sides[k] = side
    k += 1
    return durations[:k], sides[:k]


@njit(cache=True, nogil=True)
def window_maxima(codes, params, lengths, symbols, y0, start, window):
    """Maximum logit over consecutive windows of steps, beginning at step ``start``.

    Window j covers steps start + j*window + 1 .. start + (j+1)*window.
    """
    n = symbols.size
    m = (n - start) // window
    out = np.full(m, -np.inf)
    y = y0
    for i in range(n):
        y = map_logit(codes, params, lengths, symbols[i] - 1, y)
        step = i + 1
        if step > start:
            j = (step - start - 1) // window
            if j < m and y > out[j]:
                out[j] = y
    return out
