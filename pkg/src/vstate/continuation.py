"""Tracing families of equilibria.

A branch is followed by stepping one control (rotation rate or angular
impulse) and re-solving from a secant predictor.  Turning points are
negotiated by switching to the other control when the active one stops
converging, and the step adapts to the local difficulty.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._fmt import g17
from .analytic import omega_m
from .contour import NORMAL_BAND, BoundaryCurve, apply_normal_perturbation, circle, corner_metric, symmetrize
from .equilibrium import EquilibriumState, FixedJ, FixedOmega, SolverConfig, solve_state
from .errors import (
    BifurcationPointError,
    GeometryError,
    InvalidConfigError,
    InvalidInputError,
    NonConvergenceError,
    PartialResultError,
    SeedingError,
    StagnationError,
)
from .field import FieldContext

__all__ = [
    "ContinuationConfig",
    "Branch",
    "StepRecord",
    "trace_branch",
    "seed_from_bifurcation",
    "jump_epsilon",
    "detect_limiting",
    "branch_to_csv",
    "write_branch",
]

log = logging.getLogger(__name__)

SOLVE_FAILURES = (NonConvergenceError, GeometryError, StagnationError, BifurcationPointError)


@dataclass(frozen=True)
class ContinuationConfig:
    """Stepping and termination parameters for branch tracing.

    ``step_omega`` and ``step_j`` are the initial step sizes; steps double
    after ``grow_after`` consecutive successes up to ``max_factor`` times the
    initial value and halve on failure down to ``min_factor`` times it.
    """

    step_omega: float = 1e-3
    step_j: float = 1e-3
    max_steps: int = 400
    omega_p_floor: float = 1e-3
    corner_ceiling: float = 0.5
    solver: SolverConfig = field(default_factory=SolverConfig)
    initial_control: str = "J"
    max_factor: float = 64.0
    min_factor: float = 1.0 / 256.0
    grow_after: int = 5
    predictor_tolerance: float = 0.3

    def __post_init__(self):
        if not (self.step_omega > 0 and self.step_j > 0):
            raise InvalidConfigError("continuation steps must be positive")
        if not (self.omega_p_floor > 0 and self.corner_ceiling > 0):
            raise InvalidConfigError("floors and ceilings must be positive")
        if self.max_steps < 1:
            raise InvalidConfigError("max_steps must be positive")
        if self.initial_control not in ("omega", "J"):
            raise InvalidConfigError("initial_control must be 'omega' or 'J'")
        if not (0 < self.min_factor <= 1 <= self.max_factor):
            raise InvalidConfigError("need min_factor <= 1 <= max_factor")

    def base_step(self, control: str) -> float:
        return self.step_omega if control == "omega" else self.step_j


@dataclass(frozen=True)
class StepRecord:
    control: str
    step: float
    converged: bool
    note: str = ""


@dataclass
class Branch:
    """Ordered equilibria along one family plus the stepping log."""

    states: list[EquilibriumState]
    control_log: list[StepRecord]
    termination: str = "MaxSteps"
    reason: str = ""

    @property
    def omega(self) -> np.ndarray:
        return np.array([s.omega for s in self.states])

    @property
    def omega_p(self) -> np.ndarray:
        return np.array([s.diagnostics.omega_p for s in self.states])

    @property
    def J(self) -> np.ndarray:
        return np.array([s.diagnostics.J for s in self.states])

    @property
    def last(self) -> EquilibriumState:
        return self.states[-1]


def detect_limiting(state: EquilibriumState, config: ContinuationConfig) -> tuple[bool, str]:
    """Flag states at the end of a branch (slow particles or a forming corner)."""
    wp = state.diagnostics.omega_p
    if wp < config.omega_p_floor:
        return True, f"omega_p {wp:.3g} below floor {config.omega_p_floor:.3g}"
    cm = corner_metric(state.curve)
    if cm > config.corner_ceiling:
        return True, f"corner metric {cm:.3g} above ceiling {config.corner_ceiling:.3g}"
    return False, ""


def _control_value(state: EquilibriumState, control: str) -> float:
    return state.omega if control == "omega" else state.diagnostics.J


def _predict(states: list[EquilibriumState], control: str, target: float) -> tuple[BoundaryCurve, float]:
    cur = states[-1]
    if len(states) < 2:
        return cur.curve, cur.omega
    prev = states[-2]
    dc = _control_value(cur, control) - _control_value(prev, control)
    if dc == 0 or cur.curve.n != prev.curve.n:
        return cur.curve, cur.omega
    t = (target - _control_value(cur, control)) / dc
    # extrapolate only the resolved band: modes the Newton update never
    # corrects would otherwise grow geometrically along the branch
    n = cur.curve.n
    dz = np.fft.fft((cur.curve.x - prev.curve.x) + 1j * (cur.curve.y - prev.curve.y))
    k = np.abs(np.fft.fftfreq(n, 1.0 / n))
    dz = np.fft.ifft(np.where(k <= NORMAL_BAND * n, dz, 0.0))
    nodes = cur.curve.nodes + t * np.column_stack([dz.real, dz.imag])
    omega = cur.omega + t * (cur.omega - prev.omega)
    return symmetrize(cur.curve.with_nodes(nodes)), omega


def _gap(a: BoundaryCurve, b: BoundaryCurve) -> float:
    return float(np.max(np.linalg.norm(a.nodes - b.nodes, axis=1)))


def trace_branch(seed: EquilibriumState, direction: int, config: ContinuationConfig = ContinuationConfig(), *, history: list[EquilibriumState] | None = None) -> Branch:
    """Follow the family through ``seed``.

    ``direction`` is the sign of the first step of the initial control.
    ``history`` may supply earlier states (oldest first) to prime the
    secant predictor and the switching direction.
    """
    if direction not in (1, -1):
        raise InvalidInputError("direction must be +1 or -1")
    if not seed.residual_norm <= config.solver.tol or seed.iterations < 1:
        raise InvalidInputError("seed state is not converged")
    ctx = FieldContext(seed.eps)
    states = list(history or []) + [seed]
    n_hist = len(states) - 1
    logrec: list[StepRecord] = []
    control = config.initial_control
    sign = {control: direction}
    factor = {"omega": 1.0, "J": 1.0}
    streak = 0

    def secant_sign(c: str) -> int:
        if len(states) >= 2:
            d = _control_value(states[-1], c) - _control_value(states[-2], c)
            return 1 if d >= 0 else -1
        return sign.get(c, direction)

    def sign_of(c: str) -> int:
        return sign[c] if c in sign else secant_sign(c)

    def attempt(c: str) -> EquilibriumState | str:
        step = config.base_step(c) * factor[c]
        cur = states[-1]
        target = _control_value(cur, c) + sign_of(c) * step
        guess, om_guess = _predict(states, c, target)
        ctrl = FixedOmega(target) if c == "omega" else FixedJ(target)
        try:
            new = solve_state(guess, ctx, om_guess, ctrl, config.solver)
        except SOLVE_FAILURES as exc:
            return type(exc).__name__
        # converging far from the predictor means a jump to another part of the family
        limit = config.predictor_tolerance * max(_gap(guess, cur.curve), 1e-6) + 1e-6
        if len(states) >= 2 and _gap(new.curve, guess) > limit:
            return "jump"
        return new

    termination, reason = "MaxSteps", ""
    steps_done = 0
    while steps_done < config.max_steps:
        out = attempt(control)
        if isinstance(out, str):
            logrec.append(StepRecord(control, config.base_step(control) * factor[control], False, out))
            other = "J" if control == "omega" else "omega"
            sign[other] = secant_sign(other)
            out2 = attempt(other)
            if isinstance(out2, str):
                logrec.append(StepRecord(other, config.base_step(other) * factor[other], False, out2))
                streak = 0
                factor[control] *= 0.5
                factor[other] *= 0.5
                if factor[control] < config.min_factor and factor[other] < config.min_factor:
                    if "Stagnation" in out or "Stagnation" in out2:
                        termination, reason = "LimitingState", "stagnation point on the boundary"
                    else:
                        termination, reason = "FoldExhausted", f"both controls failed ({out}, {out2})"
                    break
                continue
            control, out = other, out2
            log.info("switched control to %s at step %d", control, steps_done)
            streak = 0
        states.append(out)
        steps_done += 1
        sign[control] = secant_sign(control)
        note = ""
        inactive = "J" if control == "omega" else "omega"
        if len(states) >= 3:
            d1 = _control_value(states[-1], inactive) - _control_value(states[-2], inactive)
            d0 = _control_value(states[-2], inactive) - _control_value(states[-3], inactive)
            # changes at roundoff level (e.g. J along the circle) are not folds
            noise = 1e-9 * max(1.0, abs(_control_value(states[-1], inactive)))
            if d1 * d0 < 0 and min(abs(d1), abs(d0)) > noise:
                note = f"fold in {inactive}"
        logrec.append(StepRecord(control, config.base_step(control) * factor[control], True, note))
        log.debug(
            "step %d %s omega=%.6f J=%.6f omega_p=%.5f iters=%d %s",
            steps_done, control, out.omega, out.diagnostics.J, out.diagnostics.omega_p, out.iterations, note,
        )
        streak += 1
        if streak >= config.grow_after:
            factor[control] = min(2.0 * factor[control], config.max_factor)
            streak = 0
        hit, why = detect_limiting(out, config)
        if hit:
            termination, reason = "LimitingState", why
            break
    return Branch(states=states[n_hist:], control_log=logrec, termination=termination, reason=reason)


def seed_from_bifurcation(
    eps: float,
    m: int,
    amplitude: float = 1e-2,
    side: int = 1,
    config: ContinuationConfig | SolverConfig = ContinuationConfig(),
) -> EquilibriumState:
    """Nontrivial m-fold equilibrium close to the circle at ``Omega_m(eps)``.

    The circle is deformed by ``amplitude cos(m theta)``; ``side`` flips the
    sign of the initial rotation-rate offset ``amplitude^2``.  The state is
    solved at the impulse of the deformed circle, which the circle itself
    cannot match, so the solve lands on the bifurcating family.
    """
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise InvalidInputError("m must be a positive integer")
    if m == 1:
        raise InvalidInputError("m = 1 is a translation of the circle, not a new family")
    if side not in (1, -1):
        raise InvalidInputError("side must be +1 or -1")
    if not 0 < abs(amplitude) <= 0.1:
        raise InvalidInputError("amplitude must be small and nonzero")
    solver = config.solver if isinstance(config, ContinuationConfig) else config
    n = m * solver.nodes_per_fold
    base = circle(n, m)
    bumped = apply_normal_perturbation(base, amplitude * np.cos(m * base.theta))
    from .contour import angular_impulse, area

    scale = np.sqrt(np.pi / area(bumped))
    bumped = bumped.with_nodes(bumped.nodes * scale)
    J = angular_impulse(bumped)
    om0 = omega_m(eps, m) - side * amplitude**2
    state = solve_state(bumped, FieldContext(eps), om0, FixedJ(J), solver)
    dev = float(np.max(np.abs(np.hypot(state.curve.x, state.curve.y) - 1.0)))
    if dev < 0.1 * abs(amplitude):
        raise SeedingError("seed fell back onto the circle: increase amplitude or adjust the rotation offset")
    return state


def jump_epsilon(
    state: EquilibriumState,
    eps_target: float,
    steps: int = 10,
    config: ContinuationConfig | SolverConfig = ContinuationConfig(),
    *,
    path: list | None = None,
) -> EquilibriumState:
    """Carry ``state`` to ``eps_target`` at fixed angular impulse.

    eps is varied linearly over ``steps`` sub-steps; each sub-step is
    re-solved with the rotation rate free.  Intermediate states are appended
    to ``path`` when a list is given.
    """
    if steps < 1:
        raise InvalidInputError("steps must be positive")
    if not np.isfinite(eps_target):
        raise InvalidInputError("eps_target must be finite")
    solver = config.solver if isinstance(config, ContinuationConfig) else config
    J = state.diagnostics.J
    cur = state
    if abs(eps_target) == state.eps:
        return state
    for e in np.linspace(state.eps, abs(eps_target), steps + 1)[1:]:
        try:
            cur = solve_state(cur.curve, FieldContext(e), cur.omega, FixedJ(J), solver)
            if path is not None:
                path.append(cur)
        except SOLVE_FAILURES as exc:
            raise PartialResultError(
                f"eps jump stopped at eps={cur.eps:.6g}: {exc}", last_good=cur, eps_reached=cur.eps
            ) from exc
    return cur


def branch_to_csv(branch: Branch) -> str:
    lines = ["step,omega,pi_over_2J,energy_16_over_pi,omega_p,control,converged"]
    ctrls = ["seed"] + [r.control for r in branch.control_log if r.converged]
    for k, s in enumerate(branch.states):
        d = s.diagnostics
        c = ctrls[k] if k < len(ctrls) else ""
        lines.append(f"{k},{g17(s.omega)},{g17(d.pi_over_2J)},{g17(d.energy_16_over_pi)},{g17(d.omega_p)},{c},true")
    return "\n".join(lines) + "\n"


def write_branch(branch: Branch, out_dir: str | Path, stem: str = "branch") -> dict:
    """Write the branch CSV, one JSON file per state and the sidecar index."""
    out = Path(out_dir)
    (out / "states").mkdir(parents=True, exist_ok=True)
    files = []
    for k, s in enumerate(branch.states):
        p = out / "states" / f"{stem}_{k:04d}.json"
        p.write_text(s.to_json())
        files.append(str(p.relative_to(out)))
    (out / f"{stem}.csv").write_text(branch_to_csv(branch))
    index = {
        "csv": f"{stem}.csv",
        "states": files,
        "termination": branch.termination,
        "reason": branch.reason,
        "control_log": [asdict(r) for r in branch.control_log],
    }
    (out / f"{stem}.index.json").write_text(json.dumps(index, indent=1))
    return index
