"""Command-line interface: batch computation and plot-ready data files.

Every command writes its outputs plus a ``manifest.json`` describing the run
into its output directory.  Option values are merged as
flags > ``--config`` file (``key = value`` lines) > built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from ._fmt import g17
from .analytic import (
    Q4,
    DispersionSet,
    dispersion_set,
    dispersion_to_csv,
    kirchhoff_boundary,
    love_point,
    omega_m,
    split_table,
)
from .contour import angular_impulse, circle
from .continuation import ContinuationConfig, jump_epsilon, seed_from_bifurcation, trace_branch, write_branch
from .equilibrium import EquilibriumState, FixedJ, FixedOmega, SolverConfig, solve_state
from .errors import (
    BifurcationPointError,
    DomainError,
    GeometryError,
    InvalidConfigError,
    InvalidInputError,
    NonConvergenceError,
    PartialResultError,
    SeedingError,
    StagnationError,
)
from .field import FieldContext, GridSpec, corotating_grid, grid_to_csv

__all__ = ["main", "build_parser", "load_state", "validate_state", "RunManifest", "EXIT_CODES"]

log = logging.getLogger("vstate")

EXIT_OK, EXIT_OTHER, EXIT_NONCONVERGENCE, EXIT_GEOMETRY, EXIT_REGIME = 0, 1, 2, 3, 4

EXIT_CODES: tuple[tuple[tuple[type, ...], int], ...] = (
    ((NonConvergenceError, BifurcationPointError, SeedingError, PartialResultError), EXIT_NONCONVERGENCE),
    ((GeometryError, StagnationError), EXIT_GEOMETRY),
    ((DomainError, InvalidInputError), EXIT_REGIME),
)

MANIFEST_NAME = "manifest.json"


class RegimeError(InvalidInputError):
    """Parameters outside the regime a command supports."""


# -- options ------------------------------------------------------------------


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _direction(text) -> int:
    v = int(text)
    if v not in (-1, 1):
        raise ValueError("direction must be +1 or -1")
    return v


def _q_range(text) -> tuple[float, float, int]:
    parts = [p for p in str(text).replace(":", ",").split(",") if p.strip()]
    if len(parts) != 3:
        raise ValueError("q-range is 'lo,hi,count'")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1 or not lo <= hi:
        raise ValueError("q-range needs lo <= hi and count >= 1")
    return lo, hi, count


@dataclass(frozen=True)
class Option:
    name: str
    type: Callable[[Any], Any]
    default: Any
    help: str
    flag: bool = False

    @property
    def cli(self) -> str:
        return "--" + self.name.replace("_", "-")


SOLVER_OPTIONS = (
    Option("nodes_per_fold", int, 400, "boundary nodes per fold"),
    Option("N", int, 32, "number of Fourier modes in the Newton update"),
    Option("tol", float, 1e-7, "Newton tolerance on the displacement"),
    Option("max_iters", int, 50, "Newton iteration cap"),
)

TRACE_OPTIONS = (
    Option("direction", _direction, 1, "+1 or -1: initial sense of the control parameter"),
    Option("control", str, "J", "initial control parameter, 'J' or 'omega'"),
    Option("step_omega", float, 1e-3, "initial rotation-rate step"),
    Option("step_j", float, 1e-3, "initial angular-impulse step"),
    Option("max_steps", int, 400, "step cap"),
    Option("omega_p_floor", float, 1e-3, "terminate when the particle rate falls below this"),
    Option("corner_ceiling", float, 0.5, "terminate when the corner metric exceeds this"),
    Option("max_factor", float, 64.0, "largest step as a multiple of the initial step"),
    Option("min_factor", float, 1.0 / 256.0, "smallest step as a multiple of the initial step"),
    Option("predictor_tolerance", float, 0.3, "relative predictor gap that rejects a step"),
)

COMMANDS: dict[str, tuple[str, tuple[Option, ...]]] = {
    "dispersion": (
        "tabulate the bifurcation rates Omega_m(eps)",
        (
            Option("eps", float, 0.0, "inverse deformation length"),
            Option("m_max", int, 10, "largest fold"),
            Option("out", str, "dispersion/dispersion.csv", "output CSV"),
        ),
    ),
    "solve": (
        "solve one equilibrium from a state file or a seed",
        (
            Option("from_state", str, None, "start from this state file"),
            Option("eps", float, None, "inverse deformation length (defaults to the state's, or 0)"),
            Option("fold", int, 2, "symmetry fold of a seeded state"),
            Option("omega", float, None, "hold the rotation rate at this value"),
            Option("impulse", float, None, "hold the angular impulse at this value"),
            Option("seed_bifurcation", _bool, False, "seed from the bifurcation off the circle", flag=True),
            Option("amplitude", float, 1e-2, "seed perturbation amplitude"),
            Option("side", int, 1, "sign of the seed's rotation offset"),
            Option("ellipse", float, None, "seed from the Kirchhoff ellipse of this aspect parameter"),
            Option("out", str, "solve/state.json", "output state file"),
        )
        + SOLVER_OPTIONS,
    ),
    "trace": (
        "continue a branch from a seed state",
        (
            Option("seed", str, None, "seed state file"),
            Option("out", str, "trace", "output directory"),
            Option("stem", str, "branch", "file stem of the branch outputs"),
        )
        + TRACE_OPTIONS
        + SOLVER_OPTIONS,
    ),
    "jump": (
        "carry a state to another eps at fixed angular impulse",
        (
            Option("state", str, None, "input state file"),
            Option("eps_target", float, None, "target eps"),
            Option("steps", int, 10, "number of eps sub-steps"),
            Option("out", str, "jump/state.json", "output state file"),
        )
        + SOLVER_OPTIONS,
    ),
    "render": (
        "write boundary and co-rotating streamfunction CSVs",
        (
            Option("state", str, None, "input state file"),
            Option("out", str, "render", "output directory"),
            Option("nx", int, 101, "grid points in x"),
            Option("ny", int, 101, "grid points in y"),
            Option("extent", float, 1.5, "half-width of the grid relative to the patch radius"),
        ),
    ),
    "predict-split": (
        "tabulate the split-branch predictor near Q4",
        (
            Option("eps", float, 0.1, "inverse deformation length (nonzero)"),
            Option("q_range", _q_range, (Q4 - 0.1, Q4 + 0.1, 41), "'lo,hi,count' in Q"),
            Option("out", str, "split/split.csv", "output CSV"),
        ),
    ),
    "love": (
        "print the Love points Q_m",
        (
            Option("m_max", int, 10, "largest fold"),
            Option("out", str, None, "optional output CSV"),
        ),
    ),
}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def merge_options(command: str, args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, config-file values and explicit flags."""
    options = COMMANDS[command][1]
    merged = {o.name: o.default for o in options}
    if args.config:
        known = {o.name: o for o in options}
        for key, value in read_config_file(args.config).items():
            if key not in known:
                raise InvalidConfigError(f"unknown config key {key!r} for {command}")
            try:
                merged[key] = known[key].type(value)
            except ValueError as exc:
                raise InvalidConfigError(f"config key {key!r}: {exc}") from exc
    for o in options:
        v = getattr(args, o.name)
        if v is not None:
            merged[o.name] = v
    return merged


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vstate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log each continuation step")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (help_text, options) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key = value file of option defaults")
        for o in options:
            dest = o.name
            if o.flag:
                p.add_argument(o.cli, dest=dest, action="store_const", const=True, default=None, help=o.help)
            elif o.name == "from_state":
                p.add_argument("--from", dest=dest, default=None, help=o.help)
            else:
                p.add_argument(o.cli, dest=dest, type=o.type, default=None, help=o.help)
    return parser


# -- state files --------------------------------------------------------------


def _schema() -> dict:
    return json.loads(resources.files("vstate").joinpath("state.schema.json").read_text())


def validate_state(payload: dict) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``payload`` is a valid state record."""
    import jsonschema

    jsonschema.validate(payload, _schema())


def load_state(path: str | Path) -> EquilibriumState:
    payload = json.loads(Path(path).read_text())
    validate_state(payload)
    return EquilibriumState.from_dict(payload)


def _write_state(state: EquilibriumState, path: Path) -> None:
    payload = state.to_dict()
    validate_state(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload))


def _summary(state: EquilibriumState) -> str:
    d = state.diagnostics
    return (
        f"omega={state.omega:.6f} pi_over_2J={d.pi_over_2J:.6f} "
        f"energy_16_over_pi={d.energy_16_over_pi:.6f} omega_p={d.omega_p:.6f}"
    )


def _solver_config(opts: dict) -> SolverConfig:
    return SolverConfig(
        nodes_per_fold=opts["nodes_per_fold"], N=opts["N"], tol=opts["tol"], max_iters=opts["max_iters"]
    )


# -- manifest -----------------------------------------------------------------


@dataclass
class RunManifest:
    """Record of one command run, written next to its outputs."""

    command: str
    config: dict
    inputs: list[str]
    outputs: list[str]
    version: str = __version__
    duration_s: float = 0.0

    def write(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / MANIFEST_NAME
        path.write_text(json.dumps(asdict(self), indent=1, default=_jsonable))
        return path


def _jsonable(value):
    if isinstance(value, (tuple, np.ndarray)):
        return list(value)
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


# -- commands -----------------------------------------------------------------


def cmd_dispersion(opts: dict) -> tuple[int, list[str], list[str]]:
    out = Path(opts["out"])
    if opts["m_max"] < 1:
        raise InvalidInputError("m_max must be >= 1")
    if opts["m_max"] == 1:
        ds = DispersionSet(abs(opts["eps"]), np.array([omega_m(opts["eps"], 1)]), math.nan)
    else:
        ds = dispersion_set(opts["eps"], opts["m_max"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dispersion_to_csv(ds))
    return EXIT_OK, [], [str(out)]


def cmd_solve(opts: dict) -> tuple[int, list[str], list[str]]:
    solver = _solver_config(opts)
    inputs: list[str] = []
    if opts["omega"] is not None and opts["impulse"] is not None:
        raise InvalidConfigError("give at most one of --omega and --impulse")

    if opts["from_state"]:
        start = load_state(opts["from_state"])
        inputs.append(opts["from_state"])
        eps = start.eps if opts["eps"] is None else abs(opts["eps"])
        curve, omega0 = start.curve, start.omega
        default_control = FixedOmega(start.omega)
    else:
        eps = 0.0 if opts["eps"] is None else abs(opts["eps"])
        fold = opts["fold"]
        if opts["seed_bifurcation"]:
            seeded = seed_from_bifurcation(eps, fold, opts["amplitude"], opts["side"], solver)
            if opts["omega"] is None and opts["impulse"] is None:
                print(_summary(seeded))
                _write_state(seeded, Path(opts["out"]))
                return EXIT_OK, inputs, [opts["out"]]
            curve, omega0 = seeded.curve, seeded.omega
            default_control = FixedJ(seeded.diagnostics.J)
        elif opts["ellipse"] is not None:
            Q = opts["ellipse"]
            curve = kirchhoff_boundary(Q, 2 * solver.nodes_per_fold, rescale=True)
            omega0 = 0.25 * (1.0 - Q * Q)
            default_control = FixedJ(angular_impulse(curve))
        else:
            curve = circle(fold * solver.nodes_per_fold, fold)
            omega0 = 0.0 if opts["omega"] is None else opts["omega"]
            default_control = FixedOmega(omega0)

    if opts["omega"] is not None:
        control = FixedOmega(opts["omega"])
        omega0 = opts["omega"]
    elif opts["impulse"] is not None:
        control = FixedJ(opts["impulse"])
    else:
        control = default_control
    state = solve_state(curve, FieldContext(eps), omega0, control, solver)
    _write_state(state, Path(opts["out"]))
    print(_summary(state))
    log.info("converged in %d iterations", state.iterations)
    return EXIT_OK, inputs, [opts["out"]]


def cmd_trace(opts: dict) -> tuple[int, list[str], list[str]]:
    if not opts["seed"]:
        raise InvalidConfigError("trace needs --seed")
    seed = load_state(opts["seed"])
    config = ContinuationConfig(
        step_omega=opts["step_omega"],
        step_j=opts["step_j"],
        max_steps=opts["max_steps"],
        omega_p_floor=opts["omega_p_floor"],
        corner_ceiling=opts["corner_ceiling"],
        solver=_solver_config(opts),
        initial_control=opts["control"],
        max_factor=opts["max_factor"],
        min_factor=opts["min_factor"],
        predictor_tolerance=opts["predictor_tolerance"],
    )
    branch = trace_branch(seed, opts["direction"], config)
    out = Path(opts["out"])
    index = write_branch(branch, out, opts["stem"])
    print(f"termination: {branch.termination} ({branch.reason})" if branch.reason else f"termination: {branch.termination}")
    print(_summary(branch.last))
    outputs = [str(out / index["csv"]), str(out / f"{opts['stem']}.index.json")]
    outputs += [str(out / p) for p in index["states"]]
    return EXIT_OK, [opts["seed"]], outputs


def _path_log(states: list[EquilibriumState]) -> str:
    lines = ["eps,omega,omega_p"]
    lines += [f"{g17(s.eps)},{g17(s.omega)},{g17(s.diagnostics.omega_p)}" for s in states]
    return "\n".join(lines) + "\n"


def cmd_jump(opts: dict) -> tuple[int, list[str], list[str]]:
    if not opts["state"] or opts["eps_target"] is None:
        raise InvalidConfigError("jump needs --state and --eps-target")
    start = load_state(opts["state"])
    out = Path(opts["out"])
    log_path = out.with_name(out.stem + ".path.csv")
    path = [start]
    code = EXIT_OK
    try:
        final = jump_epsilon(start, opts["eps_target"], opts["steps"], _solver_config(opts), path=path)
    except PartialResultError as exc:
        print(f"partial result: {exc}", file=sys.stderr)
        final, code = exc.last_good, EXIT_NONCONVERGENCE
    _write_state(final, out)
    log_path.write_text(_path_log(path))
    print(_summary(final))
    return code, [opts["state"]], [str(out), str(log_path)]


def cmd_render(opts: dict) -> tuple[int, list[str], list[str]]:
    if not opts["state"]:
        raise InvalidConfigError("render needs --state")
    state = load_state(opts["state"])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    c = state.curve
    boundary = out / "boundary.csv"
    boundary.write_text("x,y\n" + "".join(f"{g17(x)},{g17(y)}\n" for x, y in c.nodes))
    half = opts["extent"] * float(np.max(np.hypot(c.x, c.y)))
    spec = GridSpec(-half, half, -half, half, opts["nx"], opts["ny"])
    values = corotating_grid(c, state.ctx, state.omega, spec)
    grid = out / "grid.csv"
    grid.write_text(grid_to_csv(spec, values))
    return EXIT_OK, [opts["state"]], [str(boundary), str(grid)]


def cmd_predict_split(opts: dict) -> tuple[int, list[str], list[str]]:
    eps = opts["eps"]
    if eps == 0:
        raise RegimeError("Euler case: branches connected")
    lo, hi, count = opts["q_range"]
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(split_table(eps, np.linspace(lo, hi, count)))
    return EXIT_OK, [], [str(out)]


def cmd_love(opts: dict) -> tuple[int, list[str], list[str]]:
    if opts["m_max"] < 3:
        raise InvalidInputError("Love points exist for m >= 3")
    text = "m,Q_m\n" + "".join(f"{m},{g17(love_point(m))}\n" for m in range(3, opts["m_max"] + 1))
    sys.stdout.write(text)
    if opts["out"]:
        out = Path(opts["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        return EXIT_OK, [], [str(out)]
    return EXIT_OK, [], []


HANDLERS = {
    "dispersion": cmd_dispersion,
    "solve": cmd_solve,
    "trace": cmd_trace,
    "jump": cmd_jump,
    "render": cmd_render,
    "predict-split": cmd_predict_split,
    "love": cmd_love,
}


def _manifest_dirs(outputs: list[str], command: str, opts: dict) -> set[Path]:
    if command in ("trace", "render"):
        return {Path(opts["out"])}
    return {Path(p).parent for p in outputs}


def _exit_code(exc: BaseException) -> int:
    for types, code in EXIT_CODES:
        if isinstance(exc, types):
            return code
    return EXIT_OTHER


def _thread_limit():
    value = os.environ.get("VSTATE_THREADS")
    if not value:
        return None
    n = int(value)
    if n < 1:
        raise ValueError("VSTATE_THREADS must be a positive integer")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    t0 = time.perf_counter()
    limiter = None
    try:
        limiter = _thread_limit()
        opts = merge_options(args.command, args)
        code, inputs, outputs = HANDLERS[args.command](opts)
        manifest = RunManifest(args.command, opts, inputs, outputs, duration_s=time.perf_counter() - t0)
        for d in sorted(_manifest_dirs(outputs, args.command, opts)):
            manifest.write(d)
    except NonConvergenceError as exc:
        print(f"error: {exc} (residual {exc.residual:.3e})", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except Exception as exc:  # mapped onto exit codes
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    finally:
        if limiter is not None:
            limiter.restore_original_limits()
    return code

if __name__ == "__main__":
    raise SystemExit(main())
