r"""Newton iteration for rotating equilibria of a single uniform patch.

Each iteration linearises ``psi - Omega |x|^2 / 2 = C`` about the current
boundary under the normal perturbation

.. math::  x = \bar x + \hat\eta(\vartheta)\,(\bar y_\vartheta, -\bar x_\vartheta)/|\bar x_\vartheta|^2,

with ``eta = sum_j a_j cos(j m theta)``, and projects onto ``cos(i m theta)``.
The result is the symmetric system ``A a - B Omega_hat = C`` (optionally
bordered by the linearised impulse constraint), solved densely.
"""

from __future__ import annotations

import json
import warnings
import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .contour import (
    BoundaryCurve,
    Diagnostics,
    PerturbationCoeffs,
    angular_impulse,
    apply_normal_perturbation,
    area,
    filter_high_modes,
    resample_equal_traveltime,
    symmetrize,
)
from .errors import (
    AssemblyError,
    BifurcationPointError,
    GeometryError,
    InvalidConfigError,
    InvalidInputError,
    NonConvergenceError,
)
from .field import FieldContext, boundary_operators, corotating_residual, corotating_velocity, excess_energy

__all__ = [
    "FixedOmega",
    "FixedJ",
    "Control",
    "SolverConfig",
    "LinearSystem",
    "EquilibriumState",
    "assemble",
    "newton_step",
    "solve_state",
    "diagnose",
    "BIFURCATION_CONDITION",
]

FloatArray = NDArray[np.float64]

BIFURCATION_CONDITION = 1e10
TRUNCATION_FRACTION = 0.08


@dataclass(frozen=True)
class FixedOmega:
    """Hold the rotation rate fixed."""

    omega: float

    name = "omega"


@dataclass(frozen=True)
class FixedJ:
    """Hold the angular impulse fixed and solve for the rotation rate."""

    J: float

    name = "J"


Control = Union[FixedOmega, FixedJ]


def max_truncation(n: int, m: int) -> int:
    return max(1, math.ceil(TRUNCATION_FRACTION * n / m))


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters of one equilibrium solve.

    Parameters
    ----------
    nodes_per_fold
        Boundary nodes per symmetry sector; the curve carries ``m`` times this.
    N
        Fourier truncation of the perturbation.  Capped at
        ``ceil(0.08 n / m)`` where the highest modes are still resolved.
    tol
        Convergence threshold on the maximum node displacement of one step.
    max_iters
        Iteration budget before :class:`NonConvergenceError`.
    control
        Optional default control used when :func:`solve_state` gets none.
    """

    nodes_per_fold: int = 400
    N: int = 32
    tol: float = 1e-7
    max_iters: int = 50
    control: Control | None = None
    condition_limit: float = BIFURCATION_CONDITION

    def __post_init__(self):
        if self.nodes_per_fold < 8:
            raise InvalidConfigError("nodes_per_fold must be at least 8")
        if self.N < 1:
            raise InvalidConfigError("N must be positive")
        if not self.tol > 0:
            raise InvalidConfigError("tol must be positive")
        if self.max_iters < 1:
            raise InvalidConfigError("max_iters must be positive")
        if self.N > max_truncation(self.nodes_per_fold, 1):
            raise InvalidConfigError(
                f"N={self.N} exceeds the resolvable truncation "
                f"{max_truncation(self.nodes_per_fold, 1)} for {self.nodes_per_fold} nodes per fold"
            )

    def truncation(self, n: int, m: int) -> int:
        return min(self.N, max_truncation(n, m))


@dataclass(frozen=True)
class LinearSystem:
    """Galerkin system for the modes ``j = 1..N``.

    ``A`` is symmetric, ``B`` couples the rotation correction, ``C`` is the
    projected residual and ``j_rhs = (J - J_bar)/2 pi``.  ``a0`` is the
    area-restoring mean mode; its coupling has already been moved to the
    right-hand sides ``C`` and ``j_rhs``.
    """

    A: FloatArray
    B: FloatArray
    C: FloatArray
    j_rhs: float
    a0: float
    m: int

    @property
    def N(self) -> int:
        return self.A.shape[0]

    def bordered(self) -> tuple[FloatArray, FloatArray]:
        """Symmetric ``(N+1)``-square matrix and RHS for ``(a, -Omega_hat)``."""
        N = self.N
        M = np.zeros((N + 1, N + 1))
        M[:N, :N] = self.A
        M[:N, N] = self.B
        M[N, :N] = self.B
        return M, np.append(self.C, self.j_rhs)


def _basis(curve: BoundaryCurve, N: int) -> FloatArray:
    j = np.arange(N + 1)[:, None]
    return np.cos(j * curve.fold * curve.theta[None, :])


def _normal_rate(curve: BoundaryCurve, ctx: FieldContext, omega: float) -> FloatArray:
    # (u~ . x_theta)/|x_theta|^2, the local particle frequency; equals
    # Omega_p at an equilibrium in travel-time coordinates
    u = corotating_velocity(curve, ctx, omega)
    return np.einsum("ij,ij->i", u, curve.d1) / curve.speed**2


def assemble(
    curve: BoundaryCurve,
    ctx: FieldContext,
    omega_bar: float,
    control: Control | None = None,
    *,
    N: int = 32,
    target_area: float = np.pi,
) -> LinearSystem:
    """Assemble the projected linear system about ``curve``.

    The diagonal factor uses the local rate ``(u~ . x_theta)/|x_theta|^2``,
    which is ``Omega_p`` on travel-time nodes at equilibrium and keeps the
    step an exact Newton step when node redistribution lags the iteration.
    """
    n, m = curve.n, curve.fold
    N = min(N, max_truncation(n, m))
    ops = boundary_operators(curve, ctx)
    if not np.all(np.isfinite(ops.k0)):
        raise AssemblyError("non-finite kernel values; coincident nodes?")
    sigma = _normal_rate(curve, ctx, omega_bar)
    phi = _basis(curve, N)
    w = 2.0 / n            # (1/pi) * (2 pi / n)
    G = w * (phi * sigma) @ phi.T - w * ctx.q_norm * (phi @ ops.k0 @ phi.T)
    G = 0.5 * (G + G.T)
    r2 = curve.x**2 + curve.y**2
    Bfull = (phi @ r2) / n
    res = corotating_residual(curve, ctx, omega_bar)
    Cfull = -w * (phi @ res.r)
    a0 = (target_area - area(curve)) / (2.0 * np.pi)
    if isinstance(control, FixedJ):
        j_rhs = (control.J - angular_impulse(curve)) / (2.0 * np.pi) - Bfull[0] * a0
    else:
        j_rhs = 0.0
    A = G[1:, 1:]
    C = Cfull[1:] - G[1:, 0] * a0
    sys = LinearSystem(A=A, B=Bfull[1:], C=C, j_rhs=float(j_rhs), a0=float(a0), m=m)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(sys.B)) and np.all(np.isfinite(C))):
        raise AssemblyError("linear system contains non-finite entries")
    return sys


def newton_step(
    curve: BoundaryCurve,
    ctx: FieldContext,
    omega_bar: float,
    control: Control,
    config: SolverConfig = SolverConfig(),
) -> tuple[PerturbationCoeffs, float]:
    """One Newton correction: coefficients ``a_0..a_N`` and ``Omega_hat``."""
    sys = assemble(curve, ctx, omega_bar, control, N=config.truncation(curve.n, curve.fold))
    if isinstance(control, FixedJ):
        M, rhs = sys.bordered()
    else:
        M, rhs = sys.A, sys.C
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > config.condition_limit:
        raise BifurcationPointError(
            f"linearised operator is singular (condition {cond:.3g})", cond
        )
    sol = scipy.linalg.solve(M, rhs, assume_a="sym")
    if isinstance(control, FixedJ):
        a, omega_hat = sol[:-1], -float(sol[-1])
    else:
        a, omega_hat = sol, 0.0
    return PerturbationCoeffs(np.concatenate([[sys.a0], a]), curve.fold), omega_hat


@dataclass(frozen=True)
class EquilibriumState:
    """A converged rotating equilibrium."""

    curve: BoundaryCurve
    omega: float
    eps: float
    diagnostics: Diagnostics
    iterations: int = 0
    residual_norm: float = 0.0
    history: tuple = field(default=(), repr=False, compare=False)

    @property
    def fold(self) -> int:
        return self.curve.fold

    @property
    def ctx(self) -> FieldContext:
        return FieldContext(self.eps)

    def to_dict(self) -> dict:
        out = {"eps": self.eps, "omega": self.omega}
        out.update(self.curve.to_dict())
        out["diagnostics"] = self.diagnostics.to_dict()
        out["iterations"] = self.iterations
        out["residual"] = self.residual_norm
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "EquilibriumState":
        try:
            curve = BoundaryCurve.from_dict(data)
            d = data["diagnostics"]
            diag = Diagnostics(float(d["area"]), float(d["J"]), float(d["E"]), float(d["omega_p"]))
            return cls(
                curve=curve,
                omega=float(data["omega"]),
                eps=float(data["eps"]),
                diagnostics=diag,
                iterations=int(data.get("iterations", 0)),
                residual_norm=float(data.get("residual", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed state record: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "EquilibriumState":
        return cls.from_dict(json.loads(text))


def diagnose(curve: BoundaryCurve, ctx: FieldContext, omega: float) -> tuple[BoundaryCurve, Diagnostics]:
    """Redistribute ``curve`` in travel time and compute its diagnostics."""
    speeds = np.linalg.norm(corotating_velocity(curve, ctx, omega), axis=1)
    tt, omega_p = resample_equal_traveltime(curve, speeds)
    tt = symmetrize(tt)
    a = area(tt)
    warn = abs(a - np.pi) > 0.01 * np.pi
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        e = excess_energy(tt, ctx)
    return tt, Diagnostics(a, angular_impulse(tt), e, omega_p, area_warning=warn)


def solve_state(
    initial: BoundaryCurve,
    ctx: FieldContext,
    omega0: float,
    control: Control | None = None,
    config: SolverConfig = SolverConfig(),
) -> EquilibriumState:
    """Iterate Newton corrections from ``initial`` to an equilibrium.

    Each pass builds the boundary operators, solves for the correction,
    perturbs the boundary, redistributes the nodes in travel time (using the
    speeds of the pre-update curve) and re-imposes the symmetry.  Converged
    when the largest normal node displacement falls below ``config.tol``.

    Raises
    ------
    NonConvergenceError
        After ``config.max_iters`` passes; ``last`` holds the final curve.
    GeometryError
        If a correction makes the boundary self-intersect.
    StagnationError
        If the co-rotating speed nearly vanishes somewhere on the boundary.
    """
    if control is None:
        control = config.control if config.control is not None else FixedOmega(omega0)
    omega = control.omega if isinstance(control, FixedOmega) else float(omega0)
    if not np.isfinite(omega):
        raise InvalidInputError("omega must be finite")
    curve = initial
    history = []
    disp = np.inf
    for it in range(1, config.max_iters + 1):
        coeffs, omega_hat = newton_step(curve, ctx, omega, control, config)
        eta = coeffs.eta(curve.theta)
        disp = float(np.max(np.abs(eta) / curve.speed))
        history.append(disp)
        if not np.isfinite(disp) or disp > 0.5:
            raise NonConvergenceError("Newton correction diverged", disp, curve)
        speeds = np.linalg.norm(corotating_velocity(curve, ctx, omega), axis=1)
        moved = apply_normal_perturbation(curve, eta)
        omega += omega_hat
        moved, _ = resample_equal_traveltime(moved, speeds)
        curve = filter_high_modes(symmetrize(moved))
        if disp < config.tol and abs(omega_hat) < config.tol:
            break
    else:
        raise NonConvergenceError(
            f"no convergence in {config.max_iters} iterations (last step {disp:.3g})", disp, curve
        )
    final, diag = diagnose(curve, ctx, omega)
    return EquilibriumState(
        curve=final,
        omega=float(omega),
        eps=ctx.eps,
        diagnostics=diag,
        iterations=it,
        residual_norm=disp,
        history=tuple(history),
    )


def with_omega(state: EquilibriumState, omega: float) -> EquilibriumState:
    return replace(state, omega=omega)
