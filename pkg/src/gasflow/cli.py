"""Command-line entry points: run, bench, riemann, verify.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 invariant
or admissibility violation.  Thread count comes from the configuration (or
the GASFLOW_THREADS environment override) and is never auto-detected, so
repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import gas, riemann
from .config import parse_config, serialize_config
from .driver import (RunState, accumulate_pressure_average, error_norms,
                     pressure_coefficient, schlieren, skin_friction,
                     strang_step, vortex_diagnostics, discrete_curl)
from .errors import (AdmissibilityError, ConfigError, GasflowError,
                     InvariantViolationError, SolverError, VacuumError)
from .mesh import write_vtk
from .scenarios import scenario_initial_state

__all__ = ["main", "run_scenario"]


def _set_threads(cfg):
    import numba

    threads = cfg.threads
    env = os.environ.get("GASFLOW_THREADS")
    if env:
        threads = int(env)
    numba.set_num_threads(max(1, threads))
    return threads


def _fmt(x):
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def run_scenario(cfg, collect_field=False):
    """Execute a configured run; returns a summary dict (and artifacts on disk)."""
    threads = _set_threads(cfg)
    setup = scenario_initial_state(cfg.scenario, cfg)
    ctx = setup.context(cfg.solver_tol, cfg.solver_maxit)
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)

    run = RunState(t=0.0, u=setup.u0.copy())
    run.initial_totals = run.totals(ctx.graph.m)
    from .driver import LedgerRecorder

    run.ledger = LedgerRecorder(run.u.shape[1])

    vortex = setup.diag is not None and setup.diag.vortex
    rot0_max = None
    v_inf_vec = None
    if vortex:
        v_inf_vec = setup.extra["v_inf_vec"]
        v0 = run.u[:, 1:3] / run.u[:, 0][:, None]
        rot0_max = float(np.abs(discrete_curl(v0, ctx.graph)).max())

    header = ["step", "t", "tau", "mass", "energy", "ledger_residual"]
    if vortex:
        header += ["delta1", "delta2"]
    rows = []

    def record(tau):
        m = ctx.graph.m
        totals = run.totals(m)
        row = [run.step, float(run.t), float(tau), float(totals[0]),
               float(totals[-1]), float(run.ledger_residual(m))]
        if vortex:
            d1, d2 = vortex_diagnostics(run.u, ctx.graph, v_inf_vec, rot0_max)
            row += [d1, d2]
        rows.append(row)

    def snapshot():
        if cfg.vtk_cadence <= 0:
            return
        if run.step % cfg.vtk_cadence == 0:
            d = ctx.graph.dim
            write_vtk(
                os.path.join(out_dir, f"state_{run.step:06d}.vtk"), setup.mesh,
                point_data={
                    "density": run.u[:, 0],
                    "momentum": run.u[:, 1 : 1 + d],
                    "total_energy": run.u[:, -1],
                    "schlieren": schlieren(run.u, ctx.graph),
                },
            )

    record(0.0)
    snapshot()
    t_start = time.perf_counter()
    max_delta = np.zeros(2) if vortex else None
    while run.t < setup.t_final * (1.0 - 1e-14):
        if cfg.max_steps and run.step >= cfg.max_steps:
            break
        tau = strang_step(run, ctx)
        if tau <= 0.0:
            break
        if cfg.csv_cadence and run.step % cfg.csv_cadence == 0:
            record(tau)
        elif run.t >= setup.t_final * (1.0 - 1e-14):
            record(tau)
        if vortex and rows:
            max_delta = np.maximum(max_delta, rows[-1][-2:])
        snapshot()
    wall = time.perf_counter() - t_start

    _write_rows(os.path.join(out_dir, "timeseries.csv"), header, rows)

    m = ctx.graph.m
    totals = run.totals(m)
    taus = np.asarray(run.tau_history) if run.tau_history else np.zeros(1)
    summary = {
        "scenario": cfg.scenario,
        "threads": threads,
        "steps": run.step,
        "t_final": run.t,
        "mass": float(totals[0]),
        "energy": float(totals[-1]),
        "ledger_residual": float(run.ledger_residual(m)),
        "tau_min": float(taus.min()),
        "tau_max": float(taus.max()),
        "wall_seconds": wall,
        "wall_per_step": wall / max(run.step, 1),
        "hyperbolic_seconds": ctx.timers["hyperbolic"],
        "parabolic_seconds": ctx.timers["parabolic"],
        "max_conservation_residual": ctx.ws.stats["max_conservation_residual"],
        "max_bounds_violation": ctx.ws.stats["max_bounds_violation"],
        "min_rho": ctx.ws.stats["min_rho"],
        "min_eint": ctx.ws.stats["min_eint"],
    }

    if setup.name == "becker" and setup.exact is not None:
        exact = setup.exact(run.t)
        for p, tag in ((1, "err_l1"), (2, "err_l2"), (np.inf, "err_linf")):
            summary[tag] = error_norms(run.u, exact, p, ctx.graph)
    if setup.name == "sod" and setup.exact is not None and run.t > 0:
        exact = setup.exact(run.t)
        rho_err = float((ctx.graph.m * np.abs(run.u[:, 0] - exact[:, 0])).sum())
        summary["rho_l1_error"] = rho_err
    if vortex:
        summary["delta1_final"] = rows[-1][-2]
        summary["delta2_final"] = rows[-1][-1]
        summary["delta1_max"] = float(max_delta[0])
        summary["delta2_max"] = float(max_delta[1])
    if setup.diag is not None and setup.diag.wall_tag and setup.op is not None:
        xs, cf = skin_friction(run.u, setup.mesh, ctx.graph, setup.op,
                               setup.diag.wall_tag, setup.diag, setup.law)
        _write_rows(os.path.join(out_dir, "cf_profile.csv"), ["x", "cf"],
                    [[float(a), float(b)] for a, b in zip(xs, cf)])
        summary["cf_min"] = float(cf.min())
        summary["cf_min_x"] = float(xs[np.argmin(cf)])

    with open(os.path.join(out_dir, "summary.txt"), "w", newline="\n") as fh:
        for key in sorted(summary):
            if key in ("wall_seconds", "wall_per_step", "hyperbolic_seconds",
                       "parabolic_seconds"):
                continue  # timing is not byte-reproducible
            fh.write(f"{key} = {summary[key]}\n")
    if collect_field:
        summary["field"] = run.u
        summary["graph"] = ctx.graph
        summary["setup"] = setup
    return summary


def _cmd_run(args):
    cfg = parse_config(args.config)
    summary = run_scenario(cfg)
    for key in sorted(summary):
        print(f"{key} = {summary[key]}")
    return 0


def _cmd_bench(args):
    cfg = parse_config(args.config)
    thread_list = [int(t) for t in args.threads.split(",")]
    steps = args.steps
    print("threads,nodes,steps,hyperbolic_per_step,parabolic_per_step,total_per_step")
    for nt in thread_list:
        cfg.threads = nt
        cfg.max_steps = steps
        cfg.csv_cadence = 0
        cfg.vtk_cadence = 0
        cfg.output_dir = os.path.join(cfg.output_dir, f"bench_t{nt}")
        summary = run_scenario(cfg)
        nsteps = max(summary["steps"], 1)
        hyp = summary["hyperbolic_seconds"] / nsteps
        par = summary["parabolic_seconds"] / nsteps
        print(f"{nt},{summary['steps']},{nsteps},{hyp:.6f},{par:.6f},{summary['wall_per_step']:.6f}")
        cfg.output_dir = os.path.dirname(cfg.output_dir) or "."
    return 0


def _parse_state(text, law):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 3:
        raise ConfigError("state must be rho,v,p")
    rho, v, p = vals
    return gas.from_primitive(rho, np.array([v]), p, law)


def _cmd_riemann(args):
    law = gas.GasLaw(args.gamma)
    u_l = _parse_state(args.left, law)
    u_r = _parse_state(args.right, law)
    n = np.array([1.0])
    fan = riemann.solve_exact(u_l, u_r, n, law)
    sample = riemann.sample_at_zero(fan, u_l, u_r, n, law)
    rho, v, p = gas.to_primitive(sample, law)
    print("quantity,value")
    print(f"pstar,{_fmt(fan.pstar)}")
    print(f"vstar,{_fmt(fan.vstar)}")
    print(f"left_wave,{fan.left_wave}")
    print(f"right_wave,{fan.right_wave}")
    print(f"left_wave_speed,{_fmt(fan.left_wave_speed)}")
    print(f"right_wave_speed,{_fmt(fan.right_wave_speed)}")
    print(f"max_wavespeed_bound,{_fmt(riemann.max_wavespeed_bound(u_l, u_r, n, law))}")
    print(f"sample_rho,{_fmt(rho)}")
    print(f"sample_v,{_fmt(float(v[0]))}")
    print(f"sample_p,{_fmt(p)}")
    return 0


def _verify_riemann(seed, n_pairs=100000):
    law = gas.GasLaw(1.4)
    rng = np.random.default_rng(seed)
    violations = 0
    worst = 0.0
    checked = 0
    for _ in range(n_pairs):
        r = 10.0 ** rng.uniform(-3, 3, 2)
        p = 10.0 ** rng.uniform(-3, 3, 2)
        v = rng.normal(0.0, 5.0, 2)
        u_l = gas.from_primitive(r[0], v[:1], p[0], law)
        u_r = gas.from_primitive(r[1], v[1:], p[1], law)
        try:
            fan = riemann.solve_exact(u_l, u_r, np.array([1.0]), law)
        except VacuumError:
            continue
        checked += 1
        lam = riemann.max_wavespeed_bound(u_l, u_r, np.array([1.0]), law)
        ex = fan.max_wavespeed
        if lam < ex * (1.0 - 1e-12):
            violations += 1
        if ex > 0:
            worst = max(worst, lam / ex)
    ok = violations == 0 and worst <= 5.0
    print(f"{'PASS' if ok else 'FAIL'} riemann: {checked} pairs, "
          f"{violations} dominance violations, tightness {worst:.3f}")
    return ok


def _verify_graph(seed):
    from . import mesh as MS

    rng = np.random.default_rng(seed)
    ok = True
    for trial in range(3):
        nx, ny = rng.integers(4, 12, 2)
        msh = MS.build_structured_mesh(2, [(0, 1), (0, 1)], (int(nx), int(ny)))
        interior = np.ones(msh.n_nodes, bool)
        interior[np.unique(msh.face_nodes.ravel())] = False
        h = 1.0 / max(int(nx), int(ny))
        msh.coords[interior] += rng.uniform(-0.15 * h, 0.15 * h, (int(interior.sum()), 2))
        g = MS.compute_b_matrix(MS.assemble_graph(msh))
        n = g.n_nodes
        row_of = np.repeat(np.arange(n), np.diff(g.indptr))
        rs = np.zeros((n, 2))
        np.add.at(rs, row_of, g.cij)
        ms = np.zeros(n)
        np.add.at(ms, row_of, g.mij)
        bs = np.zeros(n)
        np.add.at(bs, g.indices, g.bij)
        checks = [
            np.abs(rs).max() < 1e-13,
            np.abs(ms - g.m).max() < 1e-13 * g.m.max(),
            np.abs(bs).max() < 1e-13,
            abs(g.m.sum() - 1.0) < 1e-13,
        ]
        ok = ok and all(checks)
    print(f"{'PASS' if ok else 'FAIL'} graph identities on randomized meshes")
    return ok


def _verify_conservation(seed):
    from .config import ScenarioConfig

    cfg = ScenarioConfig(scenario="slipbox", cells_x=24, cells_y=24,
                         max_steps=25, csv_cadence=0, output_dir="/tmp/gasflow_verify",
                         seed=seed).validate()
    summary = run_scenario(cfg)
    drift = summary["ledger_residual"]
    ok = drift < 1e-11 and summary["max_conservation_residual"] < 1e-11
    print(f"{'PASS' if ok else 'FAIL'} slip-box conservation: ledger {drift:.2e}, "
          f"per-stage {summary['max_conservation_residual']:.2e}")
    return ok


def _cmd_verify(args):
    suites = {
        "riemann": lambda: _verify_riemann(args.seed),
        "graph": lambda: _verify_graph(args.seed),
        "conservation": lambda: _verify_conservation(args.seed),
    }
    if args.suite == "all":
        results = [fn() for fn in suites.values()]
        return 0 if all(results) else 4
    if args.suite not in suites:
        raise ConfigError(f"unknown suite {args.suite!r}; available: {sorted(suites)} or all")
    return 0 if suites[args.suite]() else 4


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gasflow",
        description="Invariant-domain-preserving compressible-flow solver",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured scenario")
    p_run.add_argument("config")
    p_run.set_defaults(fn=_cmd_run)

    p_bench = sub.add_parser("bench", help="kernel timing across thread counts")
    p_bench.add_argument("config")
    p_bench.add_argument("--threads", default="1,2,4,8")
    p_bench.add_argument("--steps", type=int, default=20)
    p_bench.set_defaults(fn=_cmd_bench)

    p_rie = sub.add_parser("riemann", help="print a Riemann fan as CSV")
    p_rie.add_argument("left", help="rho,v,p")
    p_rie.add_argument("right", help="rho,v,p")
    p_rie.add_argument("--gamma", type=float, default=1.4)
    p_rie.set_defaults(fn=_cmd_riemann)

    p_ver = sub.add_parser("verify", help="run a property suite")
    p_ver.add_argument("suite", help="riemann | graph | conservation | all")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(fn=_cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except (InvariantViolationError, AdmissibilityError, VacuumError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4
    except GasflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
