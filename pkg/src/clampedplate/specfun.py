"""Special functions for the clamped disk.

Bessel functions of the first kind ``J_m`` and modified Bessel functions
``I_m`` of integer order for real non-negative arguments, the unit-ball
volume, and bracketed root finding for the clamped-disk characteristic
equation ``J_m(k) I_m'(k) - J_m'(k) I_m(k) = 0``.

Everything is vectorised over ``m`` and ``x`` with numpy broadcasting.
Scalars in give scalars out.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

__all__ = [
    "MAX_ORDER",
    "SERIES_CUTOFF_J",
    "SERIES_CUTOFF_I",
    "I_OVERFLOW_GUARD",
    "BesselUnderflowWarning",
    "BesselRangeError",
    "BracketError",
    "unit_ball_volume",
    "bessel_j",
    "bessel_j_prime",
    "bessel_i",
    "bessel_i_prime",
    "bessel_i_ratio",
    "bessel_i_logderiv",
    "bessel_j_zeros",
    "clamped_disk_char",
    "clamped_disk_roots",
    "clamped_disk_roots_below",
]

MAX_ORDER = 200
# the J series cancels badly as x grows; Miller is accurate down to small x
SERIES_CUTOFF_J = 2.0
SERIES_CUTOFF_I = 12.0
I_OVERFLOW_GUARD = 700.0
ROOT_TOL = 1e-12

_BIG = 1e250
_LGAMMA = np.array([math.lgamma(k + 1.0) for k in range(MAX_ORDER + 3)])


class BesselUnderflowWarning(RuntimeWarning):
    """A Bessel value underflowed to exactly zero."""


class BesselRangeError(ValueError):
    """Argument outside the supported range."""


class BracketError(RuntimeError):
    """A root bracket did not contain a sign change."""

    def __init__(self, message, interval):
        super().__init__(f"{message}: interval {interval}")
        self.interval = interval


def unit_ball_volume(n):
    """Volume of the unit ball in R^n, ``pi^(n/2) / Gamma(n/2 + 1)``."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"dimension must be an integer >= 1, got {n!r}")
    n = int(n)
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def _prepare(m, x):
    m_arr = np.asarray(m)
    x_arr = np.asarray(x, dtype=float)
    scalar = m_arr.ndim == 0 and x_arr.ndim == 0
    if not np.all(np.equal(np.mod(m_arr, 1), 0)):
        raise ValueError("order must be an integer")
    m_arr, x_arr = np.broadcast_arrays(m_arr.astype(np.int64), x_arr)
    if np.any(m_arr < 0) or np.any(m_arr > MAX_ORDER):
        raise ValueError(f"order must lie in [0, {MAX_ORDER}]")
    if not np.all(np.isfinite(x_arr)):
        raise ValueError("argument must be finite")
    return m_arr.ravel(), x_arr.ravel(), m_arr.shape, scalar


def _finish(values, shape, scalar):
    values = values.reshape(shape)
    return float(values) if scalar else values


def _series(m, x, sign):
    """Power series for J (sign=-1) or I (sign=+1) at orders m and m+1."""
    out = np.zeros((2, x.size))
    pos = x > 0
    half = x[pos] / 2.0
    q = half * half
    for row, order in enumerate((m[pos], m[pos] + 1)):
        term = np.exp(order * np.log(half) - _LGAMMA[order])
        total = term.copy()
        for j in range(1, 200):
            term = sign * term * q / (j * (j + order))
            total += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[row, pos] = total
    zero = ~pos
    out[0, zero] = np.where(m[zero] == 0, 1.0, 0.0)
    return out


def _miller(m, x, modified):
    """Normalised backward recurrence returning orders m and m+1.

    For J the normalisation is ``J_0 + 2 sum J_2k = 1``; for I it is
    ``I_0 + 2 sum I_k = exp(x)``.
    """
    xmax = float(x.max())
    mtop = int(m.max()) + 1
    if modified:
        start = mtop + int(10.0 * math.sqrt(xmax)) + 30
    else:
        start = int(max(mtop, xmax) + 15.0 * xmax ** (1.0 / 3.0)) + 40
    start += start % 2
    # J_{k-1} = (2k/x) J_k - J_{k+1};  I_{k-1} = (2k/x) I_k + I_{k+1}
    sgn = -1.0 if modified else 1.0

    nxt = np.zeros_like(x)
    cur = np.full_like(x, 1e-30)
    norm = np.zeros_like(x)
    out = np.zeros((2, x.size))
    for k in range(start, 0, -1):
        out[0] = np.where(m == k, cur, out[0])
        out[1] = np.where(m + 1 == k, cur, out[1])
        if modified:
            norm += 2.0 * cur
        elif k % 2 == 0:
            norm += 2.0 * cur
        prev = (2.0 * k / x) * cur - sgn * nxt
        nxt, cur = cur, prev
        big = np.abs(cur) > _BIG
        if np.any(big):
            scale = np.where(big, 1.0 / _BIG, 1.0)
            cur = cur * scale
            nxt = nxt * scale
            norm = norm * scale
            out *= scale
    out[0] = np.where(m == 0, cur, out[0])
    norm += cur
    if modified:
        # I grows like exp(x); divide in log space to avoid overflow of exp(x)
        factor = np.exp(x - np.log(np.abs(norm)))
        return out * factor
    return out / norm


def _pair(m, x, modified):
    sign = 1.0 if modified else -1.0
    ax = np.abs(x)
    out = np.empty((2, x.size))
    small = ax <= (SERIES_CUTOFF_I if modified else SERIES_CUTOFF_J)
    if np.any(small):
        out[:, small] = _series(m[small], ax[small], sign)
    if np.any(~small):
        out[:, ~small] = _miller(m[~small], ax[~small], modified)
    if not modified:
        neg = x < 0
        out[0, neg] *= np.where(m[neg] % 2 == 0, 1.0, -1.0)
        out[1, neg] *= np.where(m[neg] % 2 == 0, -1.0, 1.0)
    return out


def _warn_underflow(m, values, x):
    # J_m has no zeros on (0, m], so an exact 0 there is an underflow, not a root
    if np.any((values == 0.0) & (x != 0.0) & (np.abs(x) < m)):
        warnings.warn(
            "Bessel value underflowed to zero (order far above argument)",
            BesselUnderflowWarning,
            stacklevel=3,
        )


def bessel_j(m, x):
    """Bessel function of the first kind ``J_m(x)`` for integer ``m``.

    Power series for ``|x| <= 2``, normalised Miller backward recurrence
    beyond. Values that underflow come back as ``0.0`` with a
    :class:`BesselUnderflowWarning`.
    """
    m, x, shape, scalar = _prepare(m, x)
    values = _pair(m, x, modified=False)[0]
    _warn_underflow(m, values, x)
    return _finish(values, shape, scalar)


def bessel_j_prime(m, x):
    """Derivative ``J_m'(x)``."""
    m, x, shape, scalar = _prepare(m, x)
    jm, jm1 = _pair(m, x, modified=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(x != 0, m / np.where(x != 0, x, 1.0) * jm, 0.0) - jm1
    # J_1'(0) = 1/2; every other order m >= 2 has J_m'(0) = 0
    d = np.where((x == 0) & (m == 1), 0.5, d)
    return _finish(d, shape, scalar)


def _check_i_range(x):
    if np.any(np.abs(x) > I_OVERFLOW_GUARD):
        raise BesselRangeError(f"|x| must not exceed {I_OVERFLOW_GUARD} for I_m")


def bessel_i(m, x):
    """Modified Bessel function ``I_m(x)`` for integer ``m`` and ``|x| <= 700``."""
    m, x, shape, scalar = _prepare(m, x)
    _check_i_range(x)
    values = _pair(m, np.abs(x), modified=True)[0]
    values = np.where((x < 0) & (m % 2 == 1), -values, values)
    _warn_underflow(m, values, x)
    return _finish(values, shape, scalar)


def bessel_i_prime(m, x):
    """Derivative ``I_m'(x)`` for ``x >= 0``."""
    m, x, shape, scalar = _prepare(m, x)
    _check_i_range(x)
    if np.any(x < 0):
        raise ValueError("bessel_i_prime requires x >= 0")
    im, im1 = _pair(m, x, modified=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(x > 0, m / np.where(x > 0, x, 1.0) * im, 0.0) + im1
    d = np.where((x == 0) & (m == 1), 0.5, d)
    return _finish(d, shape, scalar)


def _i_ratio(m, x):
    top = int(m.max()) + int(2.0 * float(x.max())) + 60
    r = np.zeros_like(x)
    out = np.zeros_like(x)
    for k in range(top, -1, -1):
        # r holds I_{k+2}/I_{k+1}; update to I_{k+1}/I_k
        r = x / (2.0 * (k + 1) + x * r)
        out = np.where(m == k, r, out)
    return out


def bessel_i_ratio(m, x):
    """Ratio ``I_{m+1}(x) / I_m(x)`` by backward continued fraction, ``x > 0``.

    Never forms ``I_m`` itself, so it is safe for any ``x > 0``.
    """
    m, x, shape, scalar = _prepare(m, x)
    if np.any(x <= 0):
        raise ValueError("bessel_i_ratio requires x > 0")
    return _finish(_i_ratio(m, x), shape, scalar)


def bessel_i_logderiv(m, x):
    """Logarithmic derivative ``I_m'(x) / I_m(x) = m/x + I_{m+1}/I_m``, ``x > 0``."""
    m, x, shape, scalar = _prepare(m, x)
    if np.any(x <= 0):
        raise ValueError("bessel_i_logderiv requires x > 0")
    return _finish(m / x + _i_ratio(m, x), shape, scalar)


def clamped_disk_char(m, k):
    """Clamped-disk characteristic function divided by ``I_m(k)``.

    Returns ``J_m(k) I_m'(k)/I_m(k) - J_m'(k)``, which has the sign of
    ``J_m I_m' - J_m' I_m`` and does not overflow for large ``k``.
    """
    m, k, shape, scalar = _prepare(m, k)
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    values = _char(m, k)
    return _finish(values, shape, scalar)


def _char(m, k):
    jm, jm1 = _pair(m, k, modified=False)
    jprime = m / k * jm - jm1
    return jm * (m / k + _i_ratio(m, k)) - jprime


def _bisect(fn, m, lo, hi, tol):
    """Vectorised bisection of ``fn(m, x)`` on brackets ``[lo, hi]``."""
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    flo = fn(m, lo)
    fhi = fn(m, hi)
    bad = np.sign(flo) * np.sign(fhi) > 0
    if np.any(bad):
        i = int(np.argmax(bad))
        raise BracketError(
            f"no sign change for order {int(m[i])}", (float(lo[i]), float(hi[i]))
        )
    exact_lo = flo == 0
    exact_hi = fhi == 0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        done = (hi - lo <= tol) | (mid <= lo) | (mid >= hi)
        if np.all(done):
            break
        fmid = fn(m, mid)
        left = np.sign(fmid) == np.sign(flo)
        lo = np.where(done, lo, np.where(left, mid, lo))
        flo = np.where(done, flo, np.where(left, fmid, flo))
        hi = np.where(done | left, hi, mid)
    root = 0.5 * (lo + hi)
    root = np.where(exact_lo, lo, np.where(exact_hi, hi, root))
    return root


def _j_values(m, x):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BesselUnderflowWarning)
        return _pair(m, x, modified=False)[0]


def _j_zeros_below(orders, xmax, step=0.5):
    """All positive zeros of J_m below ``xmax`` for every order in ``orders``.

    Returns a dict ``m -> ascending array``. Consecutive zeros of J_m are
    more than 2 apart, so a scan at ``step`` cannot skip a pair.
    """
    ms, xs = [], []
    for m in orders:
        start = max(float(m), 0.5)
        if start >= xmax:
            continue
        grid = np.arange(start, xmax + step, step)
        ms.append(np.full(grid.size, m, dtype=np.int64))
        xs.append(grid)
    result = {int(m): np.empty(0) for m in orders}
    if not ms:
        return result
    m_all = np.concatenate(ms)
    x_all = np.concatenate(xs)
    f = _j_values(m_all, x_all)
    same = m_all[1:] == m_all[:-1]
    change = same & (np.sign(f[1:]) * np.sign(f[:-1]) < 0)
    idx = np.nonzero(change)[0]
    if idx.size == 0:
        return result
    roots = _bisect(_j_values, m_all[idx], x_all[idx], x_all[idx + 1], 1e-14)
    for m in np.unique(m_all[idx]):
        sel = m_all[idx] == m
        result[int(m)] = roots[sel]
    return result


def bessel_j_zeros(m, count):
    """First ``count`` positive zeros of ``J_m``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    xmax = m + math.pi * (count + 2) + 10.0
    while True:
        zeros = _j_zeros_below([m], xmax)[int(m)]
        if zeros.size >= count:
            return zeros[:count]
        xmax *= 1.5


def clamped_disk_roots_below(kmax, orders=None):
    """Every clamped-disk root ``k < kmax`` for the given orders.

    Each root of order ``m`` lies strictly between two consecutive zeros of
    ``J_m``; no root precedes the first zero. Returns ``m -> ascending array``.
    Orders default to every ``m`` whose first ``J_m`` zero can lie below
    ``kmax`` (``j_{m,1} > m``).
    """
    if orders is None:
        orders = range(0, min(int(math.ceil(kmax)), MAX_ORDER) + 1)
    orders = list(orders)
    # one extra zero past kmax closes the last bracket
    zeros = _j_zeros_below(orders, kmax + 2.0 * math.pi)
    ms, lo, hi = [], [], []
    for m in orders:
        z = zeros[int(m)]
        for a, b in zip(z[:-1], z[1:]):
            if a < kmax:
                ms.append(m)
                lo.append(a)
                hi.append(b)
    result = {int(m): np.empty(0) for m in orders}
    if not ms:
        return result
    m_arr = np.array(ms, dtype=np.int64)
    roots = _bisect(_char, m_arr, np.array(lo), np.array(hi), ROOT_TOL)
    for m in np.unique(m_arr):
        r = roots[m_arr == m]
        result[int(m)] = r[r < kmax]
    return result


def clamped_disk_roots(m, count):
    """First ``count`` positive roots of ``J_m I_m' - J_m' I_m`` for one order.

    Roots are refined by bisection to ``|dk| <= 1e-12``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0 <= m <= MAX_ORDER:
        raise ValueError(f"order must lie in [0, {MAX_ORDER}]")
    kmax = m + math.pi * (count + 2) + 10.0
    while True:
        roots = clamped_disk_roots_below(kmax, [m])[int(m)]
        if roots.size >= count:
            return [float(r) for r in roots[:count]]
        kmax *= 1.5
