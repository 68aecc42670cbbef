"""Command-line front end.

Subcommands:

* ``run``      -- simulate a scenario, write the telemetry CSV and a
                  metrics summary (``--batch`` runs several scenario
                  files on a worker pool);
* ``check``    -- stability-condition report for a scenario (alias:
                  ``report``); exit 0 iff all conditions hold;
* ``verify``   -- numerical oracle suite (model equivalence, projector
                  contracts, closed-loop derivation residuals); exit 0
                  iff every residual is below its threshold;
* ``metrics``  -- recompute run metrics from an existing CSV.

Exit codes: 0 success, 1 failed check/verification, 2 configuration
error, 3 simulation abort (with the failing step in the message).
The machine contract is the exit code plus the CSV schema; stdout is
human-oriented.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import kernels
from .config import ConfigError, Scenario, load_scenario
from .engine import SimulationAbort, Simulator, compute_metrics, format_metrics, write_csv

OUT_DIR_ENV = "AUVFORMATION_OUT_DIR"


def _out_path(arg: str | None, default_name: str) -> Path:
    if arg:
        return Path(arg)
    base = Path(os.environ.get(OUT_DIR_ENV, "."))
    base.mkdir(parents=True, exist_ok=True)
    return base / default_name


def _load(args) -> Scenario:
    overrides = list(args.set or [])
    if getattr(args, "dt", None) is not None:
        overrides.append(f"dt={args.dt}")
    if getattr(args, "t_end", None) is not None:
        overrides.append(f"t_end={args.t_end}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return load_scenario(args.scenario, overrides=overrides)


def _check_report(scn: Scenario, args):
    from .analysis import check_conditions

    ratios = None
    if args.ratio_v is not None or args.ratio_w is not None:
        rv = args.ratio_v if args.ratio_v is not None else args.ratio_w
        rw = args.ratio_w if args.ratio_w is not None else args.ratio_v
        ratios = (rv, rw)
    curvatures = None
    if args.max_kappa is not None or args.max_iota is not None:
        curvatures = (args.max_kappa or 0.0, args.max_iota or 0.0)
    return check_conditions(
        scn.path,
        scn.params,
        n=args.n_vehicles or scn.n,
        v_c_max=scn.current.speed,
        delta0=args.delta0 if args.delta0 is not None else scn.delta0,
        ratios=ratios,
        curvatures=curvatures,
    )


def cmd_run(args) -> int:
    if args.batch:
        return _run_batch(args)
    scn = _load(args)
    _maybe_check_lookahead(scn)
    log = Simulator(scn).run()
    out = _out_path(args.out, f"{scn.name}.csv")
    write_csv(log, out)
    metrics = compute_metrics(log, u_los=scn.u_los, delta0=scn.delta0, k_xi=scn.k_xi)
    side = out.with_suffix(".metrics.json")
    side.write_text(json.dumps(_jsonable(metrics), indent=2) + "\n")
    print(f"wrote {out} ({len(log.t)} rows) and {side}")
    print(format_metrics(metrics))
    return 0


def _run_one(item):
    path, overrides, out_dir = item
    scn = load_scenario(path, overrides=overrides)
    log = Simulator(scn).run()
    out = Path(out_dir) / (Path(path).stem + ".csv")
    write_csv(log, out)
    return str(out)


def _run_batch(args) -> int:
    out_dir = _out_path(args.out, ".") if args.out else Path(
        os.environ.get(OUT_DIR_ENV, ".")
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    items = [(p, list(args.set or []), str(out_dir)) for p in args.batch]
    with ProcessPoolExecutor() as pool:
        for written in pool.map(_run_one, items):
            print(f"wrote {written}")
    return 0


def _maybe_check_lookahead(scn: Scenario) -> None:
    if scn.delta0_check == "off":
        return
    from .analysis import check_conditions

    rep = check_conditions(
        scn.path, scn.params, n=scn.n, v_c_max=scn.current.speed, delta0=scn.delta0
    )
    if rep.delta0_ok:
        return
    msg = (
        f"lookahead delta0 = {scn.delta0:g} is at or below the stability "
        f"bound {rep.delta0_lower_bound:.4g}"
    )
    if scn.delta0_check == "error":
        raise ConfigError(msg)
    print(f"warning: {msg}", file=sys.stderr)


def cmd_check(args) -> int:
    scn = _load(args)
    rep = _check_report(scn, args)
    print(rep.summary())
    out = _out_path(args.out, "stability_report.json") if args.out else None
    if out:
        out.write_text(json.dumps(_jsonable(rep.as_dict()), indent=2) + "\n")
        print(f"wrote {out}")
    return 0 if rep.overall_ok else 1


def cmd_verify(args) -> int:
    from .analysis import (
        closed_loop_residuals,
        perturbation_envelope,
        sample_regime_state,
        zero_error_state,
    )
    from .vehicle import (
        GeneralizedForces,
        OceanCurrent,
        VehicleState,
        coriolis,
        dynamics,
        matrix_acceleration,
        rotation_matrix,
    )

    scn = _load(args)
    rng = np.random.default_rng(scn.seed)
    rows = []

    worst = 0.0
    for _ in range(1000):
        eta = np.concatenate(
            [rng.uniform(-50, 50, 3), [rng.uniform(-1.2, 1.2)],
             [rng.uniform(-math.pi, math.pi)]]
        )
        nu = np.concatenate([rng.uniform(-2, 2, 3), rng.uniform(-0.8, 0.8, 2)])
        st = VehicleState(eta, nu)
        cur = OceanCurrent(rng.uniform(-0.4, 0.4, 3))
        f = GeneralizedForces(*rng.uniform(-2, 2, 3))
        a = dynamics(scn.params, st, cur, f)
        b = matrix_acceleration(scn.params, st, cur, f)
        worst = max(worst, float(np.abs(a - b).max() / max(1.0, np.abs(b).max())))
    rows.append(("component vs matrix dynamics (rel)", worst, 1e-10))

    worst = 0.0
    for _ in range(200):
        R = rotation_matrix(rng.uniform(-1.5, 1.5), rng.uniform(-math.pi, math.pi))
        worst = max(worst, float(np.abs(R @ R.T - np.eye(3)).max()))
    rows.append(("rotation orthonormality", worst, 1e-12))

    worst = 0.0
    for _ in range(200):
        C = coriolis(scn.params, rng.uniform(-3, 3, 5))
        worst = max(worst, float(np.abs(C + C.T).max()))
    rows.append(("coriolis skew-symmetry", worst, 1e-12))

    worst = 0.0
    for _ in range(200):
        J = rng.normal(size=(int(rng.integers(1, 7)), 9))
        Jp = np.linalg.pinv(J, rcond=1e-8)
        worst = max(
            worst,
            float(np.abs(J @ Jp @ J - J).max()),
            float(np.abs((Jp @ J).T - Jp @ J).max()),
        )
    rows.append(("pseudoinverse contracts", worst, 1e-10))

    states = [sample_regime_state(rng) for _ in range(1000)]
    res = closed_loop_residuals(states)
    rows.append(("closed-loop derivation residual", float(res.max()), 1e-9))

    zres = closed_loop_residuals([zero_error_state(rng) for _ in range(50)])
    rows.append(("zero-error residual", float(zres.max()), 1e-12))

    _, env_ok, env_worst = perturbation_envelope(states)
    rows.append(("perturbation envelope (ratio)", env_worst, 1.0))

    ok = True
    print(f"{'oracle':40s} {'residual':>12s} {'threshold':>12s}")
    for name, value, threshold in rows:
        passed = value < threshold or (value <= threshold and name.endswith("(ratio)"))
        ok &= passed
        print(f"{name:40s} {value:12.3e} {threshold:12.0e}  "
              f"{'ok' if passed else 'FAIL'}")
    if not env_ok:
        ok = False
    print(f"kernel backend: {kernels.BACKEND}")
    return 0 if ok else 1


def cmd_metrics(args) -> int:
    from .engine import read_csv

    log = read_csv(args.csv)
    metrics = compute_metrics(log)
    print(format_metrics(metrics))
    if args.out:
        Path(args.out).write_text(json.dumps(_jsonable(metrics), indent=2) + "\n")
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="auvformation",
        description="formation path following for underactuated AUVs",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("--scenario", help="scenario YAML (default: built-in)")
            sp.add_argument(
                "--set", action="append", metavar="KEY=VALUE",
                help="override a scenario entry (repeatable)",
            )
            sp.add_argument("--dt", type=float, help="integrator step override")
            sp.add_argument("--t-end", type=float, dest="t_end")
            sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path")

    sp = sub.add_parser("run", help="simulate and write telemetry CSV")
    common(sp)
    sp.add_argument(
        "--batch", nargs="+", metavar="SCENARIO",
        help="run several scenario files on a worker pool",
    )
    sp.set_defaults(func=cmd_run)

    for name in ("check", "report"):
        sp = sub.add_parser(
            name, help="stability-condition report (exit 0 iff all hold)"
        )
        common(sp)
        sp.add_argument("--ratio-v", type=float, help="override min |Y_v/X_v|")
        sp.add_argument("--ratio-w", type=float, help="override min |Y_w/X_w|")
        sp.add_argument("--max-kappa", type=float, help="override max |kappa|")
        sp.add_argument("--max-iota", type=float, help="override max |iota|")
        sp.add_argument("--n-vehicles", type=int)
        sp.add_argument("--delta0", type=float)
        sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("verify", help="run the numerical oracle suite")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("metrics", help="recompute metrics from a CSV")
    sp.add_argument("csv")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SimulationAbort as exc:
        print(f"simulation abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
