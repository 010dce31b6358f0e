"""Independent reference computations shared by the tests."""

import warnings

import numpy as np
from scipy import integrate, special


def nicholson(n: int, x: float) -> float:
    """I_n K_n(x) = (2 (-1)^n / pi) int_0^{pi/2} K_0(2 x cos t) cos(2 n t) dt."""
    f = lambda t: special.k0(2 * x * np.cos(t)) * np.cos(2 * n * t)
    # at large x the integrand is tiny and quad hits its roundoff floor
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        v, _ = integrate.quad(f, 0.0, np.pi / 2, limit=400, epsabs=0, epsrel=1e-13)
    return 2 * (-1) ** n / np.pi * v
