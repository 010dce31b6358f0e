"""Acceptance criteria 1-12.

Each test records a one-line PASS/FAIL verdict; ``conftest.py`` prints the
collected lines in the terminal summary.  Run on its own with

    python3 -m pytest tests/test_acceptance.py -v

The branch criteria (7, 8, 10) take several minutes each.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import special
from shapely.geometry import LineString

from oracles import nicholson
from vstate.analytic import Q4, kirchhoff_boundary, love_point, omega_m, split_coefficients
from vstate.contour import BoundaryCurve, angular_impulse, apply_normal_perturbation, area, circle
from vstate.continuation import ContinuationConfig, jump_epsilon, seed_from_bifurcation, trace_branch
from vstate.equilibrium import FixedOmega, SolverConfig, diagnose, solve_state
from vstate.field import FieldContext, corotating_residual, corotating_velocity, excess_energy, streamfunction, velocity
from vstate.specfun import bessel_product, k0_shifted

RESULTS: list[str] = []

# validated branch-tracing set-up: 400 nodes per fold, J-stepping
BRANCH = ContinuationConfig(solver=SolverConfig(nodes_per_fold=400), step_j=0.002, max_factor=32, max_steps=400)


@contextmanager
def criterion(number: int, title: str):
    """Record PASS/FAIL for the enclosed checks; failures still propagate."""
    info = {"detail": ""}
    t0 = time.perf_counter()
    try:
        yield info
    except BaseException as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        RESULTS.append(f"criterion {number:2d} FAIL  {title}: {msg} [{time.perf_counter() - t0:.1f} s]")
        raise
    RESULTS.append(f"criterion {number:2d} PASS  {title}: {info['detail']} [{time.perf_counter() - t0:.1f} s]")


def branch_triple(state):
    d = state.diagnostics
    return np.array([state.omega, d.pi_over_2J, d.energy_16_over_pi])


def test_c01_dispersion_exactness():
    with criterion(1, "dispersion exactness") as info:
        t0 = time.perf_counter()
        m = np.arange(1, 51)
        err = max(abs(omega_m(0.0, int(k)) - (k - 1) / (2 * k)) for k in m)
        assert err < 1e-10, f"Euler error {err:.2e}"
        for eps in (0.1, 1.0, 3.5):
            om = np.array([omega_m(eps, int(k)) for k in m])
            assert np.all(np.diff(om) > 0), f"not increasing at eps={eps}"
            assert np.all(om < special.i1(eps) * special.k1(eps)), f"above I1K1 at eps={eps}"
        took = time.perf_counter() - t0
        assert took < 1.0, f"runtime {took:.2f} s"
        info["detail"] = f"max Euler error {err:.1e}, {took * 1e3:.0f} ms"


def test_c02_nicholson_identity():
    with criterion(2, "Nicholson identity") as info:
        t0 = time.perf_counter()
        worst = 0.0
        for n in range(9):
            for x in (0.5, 1.0, 2.0, 4.0):
                ref = nicholson(n, x)
                worst = max(worst, abs(bessel_product(n, x) - ref) / abs(ref))
        took = time.perf_counter() - t0
        assert worst <= 1e-8, f"relative error {worst:.2e}"
        assert took < 1.0, f"runtime {took:.2f} s"
        info["detail"] = f"max rel error {worst:.1e}, {took * 1e3:.0f} ms"


def test_c03_rankine_anchors():
    with criterion(3, "Rankine anchors") as info:
        c = circle(1200, 2)
        ctx = FieldContext(0.0)
        eA, eJ = abs(area(c) - np.pi), abs(angular_impulse(c) - np.pi / 2)
        eE = abs(excess_energy(c, ctx) - np.pi / 16)
        assert eA < 1e-10 and eJ < 1e-10, f"A err {eA:.1e}, J err {eJ:.1e}"
        assert eE < 1e-8, f"E err {eE:.1e}"
        ep = []
        for om, wp in ((1 / 3, 1 / 6), (1 / 4, 1 / 4)):
            _, d = diagnose(c, ctx, om)
            ep.append(abs(d.omega_p - wp))
        assert max(ep) < 1e-6, f"omega_p err {max(ep):.1e}"
        info["detail"] = f"A {eA:.0e}, J {eJ:.0e}, E {eE:.0e}, omega_p {max(ep):.0e}"


def test_c04_kirchhoff_exactness():
    with criterion(4, "Kirchhoff exactness") as info:
        Q = 0.3
        om = (1 - Q * Q) / 4
        ctx = FieldContext(0.0)
        e = kirchhoff_boundary(Q, 800)
        res = corotating_residual(e, ctx, om).max_abs
        assert res < 1e-8, f"residual {res:.1e}"
        # the solver keeps area pi, so restart from the equal-area ellipse
        target = kirchhoff_boundary(Q, 800, rescale=True)
        t = target.theta
        bumped = apply_normal_perturbation(target, 1e-4 * (np.cos(2 * t) + np.cos(4 * t)))
        s = solve_state(bumped, ctx, om, FixedOmega(om), SolverConfig(nodes_per_fold=400, tol=1e-7, max_iters=5))
        assert s.residual_norm < 1e-7
        info["detail"] = f"residual {res:.1e}; reconverged in {s.iterations} iterations (last step {s.residual_norm:.1e})"


def test_c05_love_points():
    with criterion(5, "Love points") as info:
        t0 = time.perf_counter()
        e3 = abs(love_point(3) - 0.5)
        e4 = abs(love_point(4) - math.sqrt(math.sqrt(2) - 1))
        assert e3 < 1e-12 and e4 < 1e-12, f"Q3 err {e3:.1e}, Q4 err {e4:.1e}"
        qs = np.array([love_point(m) for m in range(3, 51)])
        assert np.all(np.diff(qs) > 0), "(Q_m) not increasing"
        took = time.perf_counter() - t0
        assert took < 1.0, f"runtime {took:.2f} s"
        info["detail"] = f"Q3 err {e3:.0e}, Q4 err {e4:.0e}, {took * 1e3:.0f} ms"


def test_c06_linearization_oracle():
    # G = normal co-rotating velocity times |x'|; d/d delta along r = 1 + delta cos(j t)
    # must be j (Omega_j - Omega) sin(j t)
    with criterion(6, "linearization oracle") as info:
        n, h, om = 512, 1e-6, 0.0
        t = 2 * np.pi * np.arange(n) / n
        worst = 0.0
        for eps in (0.0, 0.5):
            ctx = FieldContext(eps)
            for j in (2, 3, 4, 5):
                def G(d):
                    r = 1 + d * np.cos(j * t)
                    c = BoundaryCurve(np.column_stack([r * np.cos(t), r * np.sin(t)]))
                    u = corotating_velocity(c, ctx, om)
                    return u[:, 0] * c.d1[:, 1] - u[:, 1] * c.d1[:, 0]

                dG = (G(h) - G(-h)) / (2 * h)
                coef = 2 * np.mean(dG * np.sin(j * t))
                ref = j * (omega_m(eps, j) - om)
                rel = abs(coef / ref - 1)
                worst = max(worst, rel)
                assert rel < 1e-4, f"eps={eps}, j={j}: {coef} vs {ref}"
        info["detail"] = f"max rel error {worst:.1e}"


@pytest.mark.slow
def test_c07_two_fold_branch_end():
    with criterion(7, "2-fold eps=0.01 branch end point") as info:
        seed = seed_from_bifurcation(0.01, 2, 0.02, 1, BRANCH)
        b = trace_branch(seed, 1, BRANCH)
        start, end = branch_triple(b.states[0]), branch_triple(b.last)
        ds = np.max(np.abs(start - [0.25, 1.0, 1.0]))
        de = np.max(np.abs(end - [0.106827, 0.317246, -0.456852]))
        assert ds < 1e-3, f"start {start} off by {ds:.1e}"
        assert de < 5e-3, f"end {end} off by {de:.1e} ({b.termination})"
        info["detail"] = f"end ({end[0]:.6f}, {end[1]:.6f}, {end[2]:.6f}), off by {de:.1e}, {len(b.states)} states"


@pytest.mark.slow
def test_c08_three_fold_branch_end():
    with criterion(8, "3-fold eps=0 branch end point") as info:
        seed = seed_from_bifurcation(0.0, 3, 0.02, 1, BRANCH)
        b = trace_branch(seed, 1, BRANCH)
        end = branch_triple(b.last)
        de = np.max(np.abs(end - [0.301234, 0.885055, 0.835043]))
        assert de < 5e-3, f"end {end} off by {de:.1e} ({b.termination})"
        info["detail"] = f"end ({end[0]:.6f}, {end[1]:.6f}, {end[2]:.6f}), off by {de:.1e}, {len(b.states)} states"


def test_c09_split_coefficients():
    with criterion(9, "split coefficients") as info:
        s = split_coefficients()
        r2 = math.sqrt(2)
        exact = ((8 * r2 - 11) / 24, 4 * r2 * math.sqrt(r2 - 1), -4.0)
        errs = [abs(v - x) for v, x in zip((s.a, s.b, s.c), exact)]
        assert max(errs) < 1e-12, f"errors {errs}"
        assert s.a > 0 and s.b > 0 and s.c < 0
        assert Q4 == pytest.approx(math.sqrt(r2 - 1), abs=1e-15)
        info["detail"] = f"max error {max(errs):.0e}; a>0, b>0, c<0"


@pytest.mark.slow
def test_c10_branch_separation():
    with criterion(10, "branch separation at eps=0.1") as info:
        cfg = ContinuationConfig(solver=BRANCH.solver, step_j=0.002, max_factor=32, max_steps=150)
        Q = 0.75
        s0 = solve_state(kirchhoff_boundary(Q, 800, rescale=True), FieldContext(0.0), (1 - Q * Q) / 4)
        s1 = jump_epsilon(s0, 0.1, 5, cfg)
        above, below = trace_branch(s1, 1, cfg), trace_branch(s1, -1, cfg)
        sep = np.vstack([
            np.column_stack([below.omega, below.omega_p])[::-1],
            np.column_stack([above.omega, above.omega_p])[1:],
        ])
        primary = trace_branch(seed_from_bifurcation(0.1, 2, 0.02, 1, cfg), 1, cfg)
        prim = np.column_stack([primary.omega, primary.omega_p])
        gap = LineString(prim).distance(LineString(sep))
        assert gap > 0, "branches touch in the (Omega, Omega_p) plane"
        info["detail"] = f"min polyline distance {gap:.4f} ({len(prim)} and {len(sep)} states)"


def test_c11_euler_limit_kernel():
    # the small-eps limit of the shifted kernel is -ln x - gamma, so the
    # literal check below is expected to miss by gamma + ln 2
    with criterion(11, "Euler-limit kernel (literal form)") as info:
        x = np.array([0.1, 0.5, 1.0, 2.0])
        dev = np.abs(k0_shifted(1e-4, x) + np.log(x / 2))
        assert np.max(dev) < 1e-6, f"max |K0^eps + ln(x/2)| = {np.max(dev):.4f}"
        info["detail"] = f"max deviation {np.max(dev):.1e}"


def test_c12_field_self_consistency():
    with criterion(12, "field self-consistency") as info:
        n = 300
        t = 2 * np.pi * np.arange(n) / n
        r = 1 + 0.15 * np.cos(3 * t)
        c = BoundaryCurve(np.column_stack([r * np.cos(t), r * np.sin(t)]), 3)
        rng = np.random.default_rng(12)
        a_in, a_out = rng.uniform(0, 2 * np.pi, (2, 10))
        rad_in, rad_out = rng.uniform(0.0, 0.6, 10), rng.uniform(1.4, 2.5, 10)
        inside = np.column_stack([rad_in * np.cos(a_in), rad_in * np.sin(a_in)])
        outside = np.column_stack([rad_out * np.cos(a_out), rad_out * np.sin(a_out)])
        pts = np.vstack([inside, outside])
        ex, ey = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        worst_v, worst_q = 0.0, 0.0
        for eps in (0.5, 2.0):
            ctx = FieldContext(eps)
            psi = lambda p: streamfunction(c, ctx, p)
            h = 1e-5
            gx = (psi(pts + h * ex) - psi(pts - h * ex)) / (2 * h)
            gy = (psi(pts + h * ey) - psi(pts - h * ey)) / (2 * h)
            v = velocity(c, ctx, pts)
            rel = np.linalg.norm(v - np.column_stack([-gy, gx]), axis=1) / np.linalg.norm(v, axis=1)
            worst_v = max(worst_v, float(rel.max()))
            h = 1e-2
            lap = (psi(pts + h * ex) + psi(pts - h * ex) + psi(pts + h * ey) + psi(pts - h * ey) - 4 * psi(pts)) / h**2
            q = lap - eps * eps * psi(pts)
            target = np.r_[np.ones(10), np.zeros(10)]
            worst_q = max(worst_q, float(np.max(np.abs(q - target))))
        assert worst_v < 1e-4, f"velocity rel error {worst_v:.1e}"
        assert worst_q < 1e-3, f"(Laplacian - eps^2) psi error {worst_q:.1e}"
        info["detail"] = f"velocity rel error {worst_v:.1e}, source error {worst_q:.1e}"
