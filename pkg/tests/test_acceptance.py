"""Acceptance suite.

One test per acceptance criterion, each printing a PASS/FAIL line (run
pytest with ``-s`` to see them inline).  The reference three-vehicle
spiral scenario is simulated once per step size and shared across
criteria.
"""

import math
import time

import numpy as np
import pytest

from auvformation.config import load_scenario
from auvformation.engine import Simulator, compute_metrics, fit_rate, write_csv

RESULTS = []


def record(name: str, ok: bool, detail: str):
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}  ({detail})"
    RESULTS.append(line)
    print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def reference_run():
    scn = load_scenario(None)
    t0 = time.perf_counter()
    log = Simulator(scn).run()
    elapsed = time.perf_counter() - t0
    metrics = compute_metrics(log, u_los=scn.u_los, delta0=scn.delta0, k_xi=scn.k_xi)
    return scn, log, metrics, elapsed


@pytest.fixture(scope="module")
def reference_run_half():
    scn = load_scenario(None, overrides=["dt=0.005"])
    return Simulator(scn).run()


def test_criterion_1_lookahead_bound_reproduction():
    from auvformation.analysis import lookahead_lower_bound

    t0 = time.perf_counter()
    bound = lookahead_lower_bound(0.26, 0.26, 3, max_iota=0.040, max_kappa=0.013)
    # the full condition check with the shipped surrogate and spiral
    from auvformation.analysis import check_conditions
    from auvformation.paths import spiral_path

    scn = load_scenario(None)
    rep = check_conditions(
        scn.path, scn.params, n=3, v_c_max=scn.current.speed, delta0=5.0
    )
    elapsed = time.perf_counter() - t0
    ok = abs(bound - 4.29) < 0.05 and rep.delta0_ok and elapsed < 1.0
    record(
        "1 lookahead bound",
        ok,
        f"bound {bound:.4f} (target 4.29 +- 0.05), scenario scan "
        f"{rep.delta0_lower_bound:.4f}, delta0 = 5 admissible, {elapsed:.2f} s",
    )


def test_criterion_2_spiral_curvature():
    from auvformation.paths import spiral_path

    sp = spiral_path(40.0, 20.0, math.pi / 100.0)
    max_iota = sp.metadata["max_iota"]
    max_kappa = sp.metadata["max_kappa"]
    # iota bound cross-checked by dense sampling (it is exact)
    sampled_iota = sp.curvature_bounds((0.0, 200.0), samples=4001)[1]
    ok = (
        abs(max_iota - 0.0395) < 1e-4
        and abs(max_kappa - 0.0123) < 1e-4
        and abs(sampled_iota - max_iota) < 1e-6
    )
    record(
        "2 spiral curvature",
        ok,
        f"max|iota| {max_iota:.5f} (0.0395), max|kappa| {max_kappa:.5f} (0.0123)",
    )


def test_criterion_3_model_equivalence():
    from conftest import random_current, random_state
    from auvformation.vehicle import (
        GeneralizedForces,
        coriolis,
        dynamics,
        matrix_acceleration,
        rotation_matrix,
    )

    params = load_scenario(None).params
    rng = np.random.default_rng(100)
    worst_dyn = 0.0
    for _ in range(1000):
        s = random_state(rng)
        cur = random_current(rng)
        f = GeneralizedForces(*rng.uniform(-2, 2, 3))
        a = dynamics(params, s, cur, f)
        b = matrix_acceleration(params, s, cur, f)
        worst_dyn = max(worst_dyn, np.abs(a - b).max() / max(1.0, np.abs(b).max()))
    worst_skew = max(
        np.abs((C := coriolis(params, rng.uniform(-3, 3, 5))) + C.T).max()
        for _ in range(300)
    )
    worst_orth = max(
        np.abs(
            (R := rotation_matrix(rng.uniform(-1.5, 1.5), rng.uniform(-3, 3)))
            @ R.T
            - np.eye(3)
        ).max()
        for _ in range(300)
    )
    ok = worst_dyn < 1e-10 and worst_skew < 1e-12 and worst_orth < 1e-12
    record(
        "3 model equivalence",
        ok,
        f"dynamics rel {worst_dyn:.2e} (<1e-10), skew {worst_skew:.2e}, "
        f"orthonormality {worst_orth:.2e} (<1e-12)",
    )


def test_criterion_4_closed_loop_oracle():
    from auvformation.analysis import (
        closed_loop_residuals,
        perturbation_terms,
        sample_regime_state,
        zero_error_state,
    )

    rng = np.random.default_rng(101)
    res = closed_loop_residuals([sample_regime_state(rng) for _ in range(1000)])
    zero_exact = True
    for _ in range(50):
        g_y, g_z = perturbation_terms(zero_error_state(rng))
        zero_exact &= bool(np.all(g_y == 0.0) and np.all(g_z == 0.0))
    ok = res.max() < 1e-9 and zero_exact
    record(
        "4 closed-loop derivation",
        ok,
        f"max residual {res.max():.2e} (<1e-9), zero-state terms exactly 0: "
        f"{zero_exact}",
    )


def test_criterion_5_reference_scenario(reference_run):
    scn, log, metrics, elapsed = reference_run
    final_err = metrics["final_pbp_norm"]
    min_dist = metrics["min_pairwise_distance"]
    colav_ok = metrics["colav_activated"] and metrics["colav_deactivated"]
    rate = metrics.get("sigma2_decay_rate")
    rate_ok = rate is not None and abs(rate - 0.05) <= 0.3 * 0.05
    ok = (
        final_err < 0.5
        and min_dist >= 5.0
        and colav_ok
        and rate_ok
        and elapsed < 60.0
    )
    record(
        "5 reference scenario",
        ok,
        f"|p_b^p|(150) = {final_err:.3f} m (<0.5), min distance {min_dist:.2f} m "
        f"(>=5), colav on/off {colav_ok}, formation rate {rate:.4f} "
        f"(0.05 +- 30%), runtime {elapsed:.1f} s (<60)",
    )


def test_criterion_6_kinematic_clik_decay():
    # velocities perfectly tracked: the formation error must follow
    # exp(-0.05 t) within 5% over two decades
    from auvformation.engine import rk4_step
    from auvformation.guidance import (
        FormationSpec,
        GuidanceState,
        NsbConfig,
        formation_task,
        guidance_step,
    )
    from auvformation.paths import path_error, spiral_path, xi_update

    offsets = np.array([[0.0, 10.0, 5.0], [0.0, -10.0, 5.0], [0.0, 0.0, -10.0]])
    spec = FormationSpec(offsets)
    sp = spiral_path(40.0, 20.0, math.pi / 100.0, origin=(0.0, -40.0, 0.0))
    nsb = NsbConfig(lambda2=0.05, d_colav=1e-6, d_min=1e-7)
    gstate = GuidanceState()
    vels = [np.zeros(3)] * 3

    def rhs(y):
        pos = y[:-1].reshape(3, 3)
        xi = y[-1]
        point = sp.evaluate(xi)
        e_p = path_error(pos.mean(axis=0), point)
        angles = []
        for i in range(3):
            vel = vels[i]
            U = np.linalg.norm(vel)
            gamma = -math.asin(vel[2] / U) if U > 1e-12 else 0.0
            chi = math.atan2(vel[1], vel[0]) if U > 1e-12 else 0.0
            angles.append((U, gamma, chi))
        xi_dot = xi_update(angles, point, float(e_p[0]), 1.0)
        out = guidance_step(
            pos, angles, [(0.0, 0.0)] * 3, point, e_p, xi_dot,
            spec, nsb, 1.0, 5.0, gstate, update_pairs=False,
        )
        for i in range(3):
            vels[i] = out.v_nsb[3 * i : 3 * i + 3]
        return np.concatenate([out.v_nsb, [xi_dot]])

    y = np.concatenate([(-offsets * 0.8 + [0.0, 3.0, 1.0]).reshape(-1), [0.0]])
    dt = 0.02
    e0 = np.linalg.norm(
        formation_task(y[:-1].reshape(3, 3), sp.evaluate(0.0), spec).error
    )
    t_end = 2.0 * math.log(10.0) / 0.05  # two decades
    for _ in range(int(t_end / dt)):
        y = rk4_step(rhs, y, dt)
    e1 = np.linalg.norm(
        formation_task(y[:-1].reshape(3, 3), sp.evaluate(y[-1]), spec).error
    )
    ratio = (e1 / e0) / math.exp(-0.05 * t_end)
    ok = abs(ratio - 1.0) < 0.05
    record(
        "6 kinematic formation decay",
        ok,
        f"decay over two decades within {abs(ratio - 1) * 100:.2f}% of "
        f"exp(-0.05 t) (<5%)",
    )


def test_criterion_7_usges_probe():
    from auvformation.analysis import usges_probe

    results = usges_probe(scales=(1.0, 2.0, 4.0), t_end=100.0)
    rates = [r.rate for r in results]
    all_ok = all(r.converged and r.rate and r.rate > 0 for r in results)
    nominal = 1.0 / 5.0  # u_los / delta0
    small = results[0].rate
    factor_ok = nominal / 2.0 <= small <= nominal * 2.0
    ok = all_ok and factor_ok
    record(
        "7 semi-global convergence",
        ok,
        f"rates {[f'{r:.3f}' for r in rates]} all > 0; small-error rate "
        f"{small:.3f} within factor 2 of {nominal:.2f}",
    )


def test_criterion_8_autopilot_tracking():
    scn = load_scenario(
        None,
        overrides=[
            "vehicles.count=1",
            "formation.offsets=[[0,0,0]]",
            "path.type=line",
            "path.origin=[0,0,0]",
        ],
    )
    sim = Simulator(scn)
    y = sim.initial_vector()
    raw = np.array([[1.0, 0.15, 0.4]])
    steps = int(60.0 / scn.dt)
    t = np.arange(steps) * scn.dt
    u_err = np.zeros(steps)
    th_err = np.zeros(steps)
    ps_err = np.zeros(steps)
    obs_norm = np.zeros(steps)
    for k in range(steps):
        y = sim.step_fixed_commands(y, raw)
        rows, _ = sim._vehicle_view(y)
        u_err[k] = rows[0, 5] - 1.0
        th_err[k] = rows[0, 3] - 0.15
        ps_err[k] = rows[0, 4] - 0.4
        obs_norm[k] = np.linalg.norm(rows[0, 10:31])
    fits = {}
    for name, err in (("surge", u_err), ("pitch", th_err), ("yaw", ps_err)):
        # fit the decay phase: from past the reference-filter ramp to the
        # first time the error reaches its floor
        lo = 0.5
        below = np.where((t >= lo) & (np.abs(err) < 1e-5))[0]
        hi = t[below[0]] if below.size else t[-1]
        sel = (t >= lo) & (t <= hi) & (np.abs(err) > 1e-14)
        rate, r2 = fit_rate(t[sel], np.abs(err)[sel])
        fits[name] = (rate, r2)
    bounded = bool(np.isfinite(obs_norm).all() and obs_norm.max() < 10.0)
    ok = bounded and all(r and r > 0 and r2 > 0.95 for r, r2 in fits.values())
    record(
        "8 autopilot tracking",
        ok,
        "; ".join(
            f"{k}: rate {v[0]:.2f}, R^2 {v[1]:.3f}" for k, v in fits.items()
        )
        + f"; observers bounded: {bounded}",
    )


def test_criterion_9_determinism_and_halving(reference_run, reference_run_half, tmp_path):
    scn, log, _, _ = reference_run
    rerun = Simulator(load_scenario(None)).run()
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(log, a)
    write_csv(rerun, b)
    identical = a.read_bytes() == b.read_bytes()
    half = reference_run_half
    diff = float(
        np.linalg.norm(log.eta[-1][:, 0:3] - half.eta[-1][:, 0:3], axis=1).max()
    )
    ok = identical and diff < 1e-5
    record(
        "9 determinism + discretization",
        ok,
        f"byte-identical rerun: {identical}; halving final-position "
        f"difference {diff:.2e} m (<1e-5)",
    )


def test_zzz_summary():
    print("\n" + "=" * 72)
    for line in RESULTS:
        print(line)
    print("=" * 72)
