r"""Modified Bessel functions of integer order and the kernels built on them.

Small arguments (:math:`x \le 2`) use the classical power series

.. math::
    K_0(x) = -\left(\ln\tfrac{x}{2} + \gamma\right) I_0(x)
             + \sum_{m\ge 1} \frac{(x/2)^{2m}}{(m!)^2} H_m ,

with :math:`H_m` the harmonic numbers, and the analogous series for
:math:`K_1`.  Larger arguments use the integral
:math:`K_\nu(x)=\int_0^\infty e^{-x\cosh t}\cosh(\nu t)\,dt`; the substitution
:math:`s = x(\cosh t - 1)` turns it into a generalised Laguerre integral with
weight :math:`s^{-1/2}e^{-s}` and an integrand analytic for :math:`s>-2x`,
which a fixed Gauss rule resolves to machine precision.  Higher orders of
:math:`K_n` follow from the upward recurrence, which is stable for :math:`K`.

All functions accept scalars or arrays and return the matching shape.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import roots_genlaguerre

from .errors import DomainError, InvalidInputError

__all__ = [
    "EULER_GAMMA",
    "bessel_i",
    "bessel_k",
    "bessel_k0",
    "bessel_k1",
    "bessel_i0",
    "bessel_i1",
    "bessel_product",
    "kernel_h",
    "k0_shifted",
    "H_SMALL_CONSTANT",
]

EULER_GAMMA = 0.57721566490153286061

# Series/quadrature seam; both branches agree to ~1e-15 relative here.
_SEAM = 2.0
_N_SERIES = 22
_N_LAGUERRE = 48

# H(z) - (ln z^2 - 1)/4 -> (gamma - ln 2)/2 as z -> 0.
H_SMALL_CONSTANT = 0.5 * (EULER_GAMMA - math.log(2.0))

FloatArray = NDArray[np.float64]


def _harmonic(m: int) -> float:
    return sum(1.0 / k for k in range(1, m + 1))


@lru_cache(maxsize=None)
def _series_tables() -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    m = np.arange(_N_SERIES)
    fact = np.array([math.factorial(k) for k in m], dtype=float)
    c0 = 1.0 / fact**2                                  # (x/2)^{2m} / (m!)^2
    c1 = 1.0 / (fact * fact * (m + 1))                  # 1 / (m!(m+1)!)
    harm = np.array([_harmonic(k) for k in m])
    # psi(m+1) + psi(m+2) = H_m + H_{m+1} - 2 gamma
    psisum = harm + np.array([_harmonic(k + 1) for k in m]) - 2.0 * EULER_GAMMA
    return c0, c1, harm, psisum


@lru_cache(maxsize=None)
def _laguerre() -> tuple[FloatArray, FloatArray]:
    s, w = roots_genlaguerre(_N_LAGUERRE, -0.5)
    return s, w


def _as_array(x: ArrayLike) -> tuple[FloatArray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("argument contains non-finite values")
    return arr, arr.ndim == 0


def _out(arr: FloatArray, scalar: bool):
    return float(arr) if scalar else arr


def _poly_in_q(coef: FloatArray, q: FloatArray) -> FloatArray:
    # Horner in q = x^2/4
    acc = np.zeros_like(q)
    for c in coef[::-1]:
        acc = acc * q + c
    return acc


def _k01_small(x: FloatArray) -> tuple[FloatArray, FloatArray]:
    c0, c1, harm, psisum = _series_tables()
    q = 0.25 * x * x
    lg = np.log(0.5 * x)
    i0 = _poly_in_q(c0, q)
    k0 = -(lg + EULER_GAMMA) * i0 + _poly_in_q(c0 * harm, q)
    half = 0.5 * x
    k1 = 1.0 / x + half * (lg * _poly_in_q(c1, q) - 0.5 * _poly_in_q(c1 * psisum, q))
    return k0, k1


def _k01_large(x: FloatArray, scaled: bool = False) -> tuple[FloatArray, FloatArray]:
    s, w = _laguerre()
    xx = x[..., None]
    f0 = 1.0 / np.sqrt(1.0 + s / (2.0 * xx))
    k0 = (f0 * w).sum(axis=-1)
    k1 = (f0 * (1.0 + s / xx) * w).sum(axis=-1)
    pref = 1.0 / np.sqrt(2.0 * x)
    if not scaled:
        pref = pref * np.exp(-x)
    return k0 * pref, k1 * pref


def _k01(x: FloatArray) -> tuple[FloatArray, FloatArray]:
    """K0 and K1 for x > 0 (no checks)."""
    k0 = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x <= _SEAM
    if small.any():
        k0[small], k1[small] = _k01_small(x[small])
    big = ~small
    if big.any():
        k0[big], k1[big] = _k01_large(x[big])
    return k0, k1


def _check_positive(x: FloatArray, what: str) -> None:
    if np.any(x <= 0.0):
        raise DomainError(f"{what} requires x > 0")


def _check_order(n) -> int:
    if int(n) != n or n < 0:
        raise InvalidInputError(f"Bessel order must be a non-negative integer, got {n!r}")
    return int(n)


def bessel_k0(x: ArrayLike):
    """Modified Bessel function of the second kind, order 0."""
    arr, scalar = _as_array(x)
    arr = np.atleast_1d(arr)
    _check_positive(arr, "K_0")
    return _out(_k01(arr)[0].reshape(np.shape(x)), scalar)


def bessel_k1(x: ArrayLike):
    """Modified Bessel function of the second kind, order 1."""
    arr, scalar = _as_array(x)
    arr = np.atleast_1d(arr)
    _check_positive(arr, "K_1")
    return _out(_k01(arr)[1].reshape(np.shape(x)), scalar)


def bessel_k(n: int, x: ArrayLike):
    """:math:`K_n(x)` for integer ``n >= 0`` and ``x > 0``.

    Relative accuracy is better than 1e-12 on ``1e-8 <= x <= 50``.
    """
    n = _check_order(n)
    arr, scalar = _as_array(x)
    shape = arr.shape
    arr = np.atleast_1d(arr).ravel()
    _check_positive(arr, "K_n")
    k0, k1 = _k01(arr)
    if n == 0:
        res = k0
    else:
        km, k = k0, k1
        for j in range(1, n):
            km, k = k, km + (2.0 * j / arr) * k
        res = k
    return _out(res.reshape(shape), scalar)


def _log_i_series(n: int, x: FloatArray) -> FloatArray:
    """log I_n(x) for x > 0 from the all-positive power series."""
    q = 0.25 * x * x
    nterms = int(40 + 1.2 * float(np.max(x, initial=0.0)))
    term = np.ones_like(x)
    acc = np.ones_like(x)
    for m in range(1, nterms):
        term = term * q / (m * (n + m))
        acc = acc + term
    return n * np.log(0.5 * x) - math.lgamma(n + 1) + np.log(acc)


def bessel_i(n: int, x: ArrayLike):
    """:math:`I_n(x)` for integer ``n >= 0`` and ``x >= 0``.

    The defining series has only positive terms, so it is summed directly;
    relative error stays below 1e-13 up to ``x = 50``.
    """
    n = _check_order(n)
    arr, scalar = _as_array(x)
    if np.any(arr < 0.0):
        raise DomainError("I_n is evaluated for x >= 0 only")
    out = np.zeros(arr.shape)
    flat = np.atleast_1d(arr)
    res = np.atleast_1d(out)
    pos = flat > 0
    if pos.any():
        res[pos] = np.exp(_log_i_series(n, flat[pos]))
    if n == 0:
        res[~pos] = 1.0
    return _out(res.reshape(arr.shape), scalar)


def bessel_i0(x: ArrayLike):
    return bessel_i(0, x)


def bessel_i1(x: ArrayLike):
    return bessel_i(1, x)


def bessel_product(n: int, x: ArrayLike):
    """:math:`I_n(x) K_n(x)`, evaluated in log space.

    Working with logarithms and the ratio recurrence
    :math:`K_{j+1}/K_j = K_{j-1}/K_j + 2j/x` keeps the product finite even
    where :math:`K_n` alone would overflow (large ``n`` at tiny ``x``).
    ``x = 0`` returns the limit :math:`1/(2n)` for ``n >= 1``.
    """
    n = _check_order(n)
    arr, scalar = _as_array(x)
    flat = np.atleast_1d(arr).ravel()
    if np.any(flat < 0.0):
        raise DomainError("I_n K_n requires x >= 0")
    res = np.empty_like(flat)
    # below 1e-150 the relative correction to 1/(2n) is under 1e-300, and
    # the ratio recurrence would overflow
    zero = (flat < 1e-150) if n > 0 else (flat == 0.0)
    if zero.any():
        if n == 0:
            raise DomainError("I_0 K_0 diverges at x = 0")
        res[zero] = 1.0 / (2.0 * n)
    pos = ~zero
    if pos.any():
        xp = flat[pos]
        k0, k1 = _k01(xp)
        if n == 0:
            logk = np.log(k0)
        else:
            logk = np.log(k1)
            ratio = k1 / k0
            for j in range(1, n):
                ratio = 1.0 / ratio + 2.0 * j / xp
                logk = logk + np.log(ratio)
        res[pos] = np.exp(_log_i_series(n, xp) + logk)
    return _out(res.reshape(arr.shape), scalar)


def kernel_h(z: ArrayLike):
    r"""Contour kernel :math:`H(z) = (z K_1(z) - 1)/z^2`.

    For ``z <= 2`` the cancellation in the numerator is removed analytically:

    .. math::
        H(z) = \tfrac12 \sum_{m\ge0} \frac{(z/2)^{2m}}{m!(m+1)!}
               \left[\ln\tfrac z2 - \tfrac12\psi(m+1) - \tfrac12\psi(m+2)\right],

    whose leading term is :math:`\tfrac14(\ln z^2 - 1) + (\gamma-\ln2)/2`.
    ``H(0)`` is ``-inf`` (logarithmic limit).
    """
    arr, scalar = _as_array(z)
    flat = np.atleast_1d(arr).ravel()
    if np.any(flat < 0.0):
        raise DomainError("H(z) is defined for z >= 0")
    res = h_unchecked(flat)
    return _out(res.reshape(arr.shape), scalar)


def h_unchecked(z: FloatArray) -> FloatArray:
    """:func:`kernel_h` without validation, for hot loops (1-d or n-d arrays)."""
    res = np.empty_like(z)
    small = z <= _SEAM
    if small.any():
        c0, c1, harm, psisum = _series_tables()
        zs = z[small]
        with np.errstate(divide="ignore"):
            lg = np.log(0.5 * zs)
        q = 0.25 * zs * zs
        res[small] = 0.5 * (lg * _poly_in_q(c1, q) - 0.5 * _poly_in_q(c1 * psisum, q))
    big = ~small
    if big.any():
        zb = z[big]
        _, k1 = _k01_large(zb)
        res[big] = (zb * k1 - 1.0) / (zb * zb)
    return res


def k0_unchecked(x: FloatArray) -> FloatArray:
    """K0 without validation (x > 0 assumed), any array shape."""
    return _k01(x.ravel())[0].reshape(x.shape)


def i0_small_ratio(z: FloatArray) -> tuple[FloatArray, FloatArray]:
    """``I0(z)`` and ``I1(z)/z`` for arrays, by series (valid for all z used here)."""
    q = 0.25 * z * z
    qmax = float(np.max(q, initial=0.0))
    nterms, term = 1, 1.0
    while term > 1e-17 or nterms < 2:
        term *= qmax / (nterms * nterms)
        nterms += 1
    t0 = np.ones_like(z)
    t1 = np.full_like(z, 0.5)
    s0 = t0.copy()
    s1 = t1.copy()
    for m in range(1, nterms):
        t0 = t0 * q / (m * m)
        t1 = t1 * q / (m * (m + 1))
        s0 += t0
        s1 += t1
    return s0, s1


def k0_shifted(eps: float, x: ArrayLike):
    r""":math:`K_0^\varepsilon(x) = K_0(|\varepsilon| x) + \ln(|\varepsilon|/2)`.

    Adding :math:`\ln(|\varepsilon|/2)` strips the divergent part of the
    logarithm, so the kernel stays bounded as :math:`\varepsilon \to 0`.
    Note the small-:math:`\varepsilon` limit is :math:`-\ln x - \gamma`.
    """
    if not math.isfinite(eps) or eps == 0.0:
        raise InvalidInputError("k0_shifted needs a finite, non-zero eps")
    arr, scalar = _as_array(x)
    flat = np.atleast_1d(arr).ravel()
    _check_positive(flat, "K_0^eps")
    e = abs(eps)
    z = e * flat
    res = np.empty_like(flat)
    small = z <= _SEAM
    if small.any():
        # series form: avoids cancelling two large logarithms
        c0, _, harm, _ = _series_tables()
        zs = z[small]
        q = 0.25 * zs * zs
        i0 = _poly_in_q(c0, q)
        res[small] = (
            -(np.log(flat[small]) + EULER_GAMMA) * i0
            - math.log(0.5 * e) * (i0 - 1.0)
            + _poly_in_q(c0 * harm, q)
        )
    big = ~small
    if big.any():
        res[big] = _k01_large(z[big])[0] + math.log(0.5 * e)
    return _out(res.reshape(arr.shape), scalar)


def _terms_for(qmax: float, tol: float = 1e-17) -> int:
    """Series length so that q^M / (M!)^2 drops below ``tol``."""
    term, m = 1.0, 0
    while m < _N_SERIES - 1:
        m += 1
        term *= qmax / (m * m)
        if term < tol:
            break
    return m + 1


def pair_kernels(z: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """``K0(z), I0(z), H(z), I1(z)/z`` for an array of strictly positive ``z``.

    Shared series evaluation for the boundary-integral matrices; the series
    length adapts to the largest small argument.
    """
    c0, c1, harm, psisum = _series_tables()
    k0 = np.empty_like(z)
    hh = np.empty_like(z)
    i0, i1z = i0_small_ratio(z)
    small = z <= _SEAM
    if small.all():
        zs = z
    else:
        zs = z[small]
    if zs.size:
        q = 0.25 * zs * zs
        M = _terms_for(float(q.max()))
        lg = np.log(0.5 * zs)
        i0s = _poly_in_q(c0[:M], q)
        k0s = -(lg + EULER_GAMMA) * i0s + _poly_in_q((c0 * harm)[:M], q)
        hs = 0.5 * (lg * _poly_in_q(c1[:M], q) - 0.5 * _poly_in_q((c1 * psisum)[:M], q))
        if small.all():
            k0, hh = k0s, hs
        else:
            k0[small], hh[small] = k0s, hs
    if not small.all():
        zb = z[~small]
        kb0, kb1 = _k01_large(zb)
        k0[~small] = kb0
        hh[~small] = (zb * kb1 - 1.0) / (zb * zb)
    return k0, i0, hh, i1z
