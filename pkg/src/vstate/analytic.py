"""Closed-form results: dispersion relation, Kirchhoff ellipses, Love points
and the local model of the branch splitting near the fourth Love point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from .contour import BoundaryCurve
from ._fmt import g17
from .errors import DomainError, InvalidInputError
from .specfun import bessel_product

__all__ = [
    "DispersionSet",
    "EllipseParams",
    "SplitPredictor",
    "omega_m",
    "dispersion_set",
    "dispersion_to_csv",
    "love_point",
    "kirchhoff_boundary",
    "ellipse_multiplier",
    "ellipse_kernel_mode",
    "split_coefficients",
    "split_predictor",
    "split_table",
    "disc_multiplier",
    "Q4",
]

Q4 = math.sqrt(math.sqrt(2.0) - 1.0)


def _check_int(name: str, value, lo: int) -> int:
    if isinstance(value, bool) or int(value) != value or value < lo:
        raise InvalidInputError(f"{name} must be an integer >= {lo}")
    return int(value)


def omega_m(eps: float, m: int) -> float:
    """Angular velocity ``I1K1(|eps|) - ImKm(|eps|)`` at which the m-fold branch
    leaves the circle; ``(m-1)/(2m)`` at ``eps = 0``."""
    m = _check_int("m", m, 1)
    e = abs(float(eps))
    if not math.isfinite(e):
        raise InvalidInputError("eps must be finite")
    if m == 1:
        return 0.0
    return float(bessel_product(1, e) - bessel_product(m, e))


@dataclass(frozen=True)
class DispersionSet:
    """``Omega_m(eps)`` for ``m = 1..m_max`` and its limit ``I1K1(eps)``."""

    eps: float
    values: NDArray[np.float64]
    limit: float

    @property
    def m(self) -> NDArray[np.int64]:
        return np.arange(1, len(self.values) + 1)


def dispersion_set(eps: float, m_max: int) -> DispersionSet:
    m_max = _check_int("m_max", m_max, 2)
    vals = np.array([omega_m(eps, m) for m in range(1, m_max + 1)])
    limit = float(bessel_product(1, abs(eps)))
    if not (np.all(np.diff(vals) > 0) and np.all(vals < limit)):
        raise DomainError("dispersion values lost monotonicity (precision exhausted)")
    return DispersionSet(abs(float(eps)), vals, limit)


def dispersion_to_csv(ds: DispersionSet) -> str:
    lines = ["m,omega_m"] + [f"{m},{g17(v)}" for m, v in zip(ds.m, ds.values)]
    return "\n".join(lines) + "\n"


def _love_residual(q: float, m: int) -> float:
    return 1.0 + q**m - 0.5 * m * (1.0 - q * q)


def love_point(m: int) -> float:
    """Root in ``[0, 1)`` of ``1 + Q^m - (1 - Q^2) m / 2``."""
    m = _check_int("m", m, 3)
    # f(0) = 1 - m/2 < 0 and f(1) = 2 > 0; the root is simple
    q = brentq(_love_residual, 0.0, 1.0, args=(m,), xtol=1e-16, rtol=1e-15, maxiter=200)
    for _ in range(2):
        f = _love_residual(q, m)
        df = m * q ** (m - 1) + m * q
        q -= f / df
    return float(q)


@dataclass(frozen=True)
class EllipseParams:
    """Kirchhoff ellipse ``w + Q conj(w)`` and its rotation rate."""

    Q: float

    def __post_init__(self):
        if not 0.0 <= self.Q < 1.0:
            raise InvalidInputError("Q must lie in [0, 1)")

    @property
    def omega(self) -> float:
        return 0.25 * (1.0 - self.Q**2)


def kirchhoff_boundary(Q: float, n: int, *, rescale: bool = False, fold: int = 2) -> BoundaryCurve:
    """Ellipse ``w + Q conj(w)`` sampled at uniform ``arg w``.

    The conformal angle is already the travel-time coordinate of the rotating
    ellipse, so no redistribution is needed.  With ``rescale=True`` the curve
    is scaled from area ``pi (1 - Q^2)`` to area ``pi``.
    """
    EllipseParams(Q)
    if n < 8 or n % fold:
        raise InvalidInputError("n must be >= 8 and a multiple of fold")
    t = 2.0 * np.pi * np.arange(n) / n
    pts = np.column_stack([(1.0 + Q) * np.cos(t), (1.0 - Q) * np.sin(t)])
    if rescale:
        pts = pts / math.sqrt(1.0 - Q * Q)
    return BoundaryCurve(pts, fold)


def ellipse_multiplier(Q: float, n: int) -> float:
    """Factor of the ellipse linearisation acting on mode ``n``.

    ``1/2 (1+Q)^2`` for ``n = 1``, ``2 Q^2`` for ``n = 2`` and
    ``1 + Q^n - (1 - Q^2) n / 2`` otherwise.
    """
    n = _check_int("n", n, 1)
    if n == 1:
        return 0.5 * (1.0 + Q) ** 2
    if n == 2:
        return 2.0 * Q * Q
    return _love_residual(Q, n)


def ellipse_kernel_mode(Q: float, m: int, n_nodes: int) -> NDArray[np.complex128]:
    """Samples of ``v_m(w) = w^(m+1) / (1 - Q w^2)`` at ``n_nodes`` points of the unit circle."""
    EllipseParams(Q)
    _check_int("m", m, 3)
    w = np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)
    return w ** (m + 1) / (1.0 - Q * w * w)


@dataclass(frozen=True)
class SplitPredictor:
    """Coefficients of the reduced equation near ``Q4``.

    The branches satisfy ``c_t X^2 = a eps^2 + b_t QQ^2`` with
    ``X = s - d QQ`` and ``QQ = Q - Q4``.
    """

    a: float
    b: float
    c: float

    @property
    def c_t(self) -> float:
        return -self.c

    @property
    def b_t(self) -> float:
        return -self.b**2 / (4.0 * self.c)

    @property
    def d(self) -> float:
        return -self.b / (2.0 * self.c)

    def branches(self, eps: float, Q) -> tuple:
        if eps == 0:
            raise InvalidInputError("eps = 0: the two curves merge, no split to predict")
        qq = np.asarray(Q, dtype=float) - Q4
        x = np.sqrt((self.a / self.c_t) * eps * eps + (self.b_t / self.c_t) * qq * qq)
        return x, -x, x + self.d * qq, -x + self.d * qq


def split_coefficients() -> SplitPredictor:
    q = Q4
    q2 = q * q
    a = q2 * (q2 * q2 - 4.0 * q2 + 3.0) / 48.0
    b = 4.0 * q * (q2 + 1.0)
    c = -q2 * (3.0 * q2**3 + q2 * q2 - 5.0 * q2 + 5.0) / (q2 - 1.0) ** 2
    return SplitPredictor(a, b, c)


def split_predictor(eps: float, Q: float) -> tuple[float, float]:
    """Reduced coordinates ``X+ , X-`` of the two split branches."""
    xp, xm, _, _ = split_coefficients().branches(eps, Q)
    return float(xp), float(xm)


def split_table(eps: float, qs) -> str:
    """CSV of the split predictor with its coefficients in a comment header."""
    sp = split_coefficients()
    xp, xm, sp_, sm_ = sp.branches(eps, qs)
    lines = [
        f"# a={g17(sp.a)} b={g17(sp.b)} c={g17(sp.c)} eps={g17(eps)}",
        "Q,x_plus,x_minus,s_plus,s_minus",
    ]
    for row in zip(np.asarray(qs, float), xp, xm, sp_, sm_):
        lines.append(",".join(g17(v) for v in row))
    return "\n".join(lines) + "\n"


def disc_multiplier(eps: float, omega: float, j: int) -> float:
    """``j (Omega_j(eps) - omega)``, the circle linearisation on mode ``j``."""
    j = _check_int("j", j, 1)
    return j * (omega_m(eps, j) - omega)
