"""Command-line interface: optimize, verify, mesh-info, template."""
from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import bundle, checks, config as config_mod, derivatives, descent, \
    output, problems
from .descent import ConfigError, RunConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapemax",
        description="Shape optimization of max-type tracking costs")
    sub = parser.add_subparsers(dest="command", required=True)

    opt = sub.add_parser("optimize", help="run a descent loop")
    opt.add_argument("--config", help="YAML configuration file")
    opt.add_argument("--cost", choices=["linfty", "l2"],
                     help="override the configured cost")
    opt.add_argument("--metric", choices=["sobolev", "euclidean"],
                     help="override the configured metric")
    opt.add_argument("--max-iters", type=int, help="override max iterations")
    opt.add_argument("--out", help="override the output directory")

    ver = sub.add_parser("verify", help="run numerical verification suites")
    ver.add_argument("--config", help="YAML configuration file")
    ver.add_argument("--suite", action="append", default=None,
                     choices=sorted(config_mod._VERIFY_SUITES),
                     help="suite to run (repeatable; default: configured)")
    ver.add_argument("--out", default="report.csv", help="report CSV path")

    info = sub.add_parser("mesh-info", help="print the mesh quality report")
    info.add_argument("--config", help="YAML configuration file")

    sub.add_parser("template", help="print a default configuration")
    return parser


def _load(args) -> tuple[RunConfig, list]:
    if getattr(args, "config", None):
        cfg, suites = config_mod.load_config(args.config)
    else:
        cfg, suites = RunConfig(), sorted(config_mod._VERIFY_SUITES)
    overrides = {}
    if getattr(args, "cost", None):
        overrides["cost"] = args.cost
    if getattr(args, "metric", None):
        overrides["metric"] = args.metric
    if getattr(args, "max_iters", None):
        overrides["max_iters"] = args.max_iters
    if getattr(args, "out", None) and args.command == "optimize":
        overrides["output_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
        cfg.validate()
    return cfg, suites


def _cmd_optimize(args) -> int:
    cfg, _ = _load(args)
    out_dir = cfg.output_dir or "out"
    cfg = dataclasses.replace(cfg, output_dir=out_dir)
    output.ensure_dir(out_dir)
    runner = descent.run_linfty if cfg.cost == "linfty" else descent.run_l2
    history = runner(cfg)
    output.write_history(history, f"{out_dir}/history.csv")
    final_active = None
    if cfg.cost == "linfty" and history.final_mesh is not None:
        problem = problems.get_problem(cfg.problem)
        law = problems.get_law(cfg.law)
        spec = derivatives.tracking_cost(problem.u_d, problem.grad_u_d)
        from . import pde
        state = pde.solve_state(history.final_mesh, problem.f, law)
        final_active = bundle.select_active(history.final_mesh, state.u, spec,
                                            cfg.n_extra_active)
    output.write_shape(history.final_mesh, final_active,
                       f"{out_dir}/shape_final.csv")
    print(f"terminated: {history.termination} after "
          f"{len(history.records)} iterations; "
          f"J_inf={history.final_J_inf:.6g} J_2={history.final_J_2:.6g}")
    return 0


def _cmd_verify(args) -> int:
    cfg, suites = _load(args)
    if args.suite:
        suites = list(dict.fromkeys(args.suite))
    problem = problems.get_problem(cfg.problem)
    law = problems.get_law(cfg.law)
    spec = derivatives.tracking_cost(problem.u_d, problem.grad_u_d)
    results = []

    if "convergence" in suites:
        report = checks.convergence_study([8, 16, 32, 64], problem.f,
                                          problem.u_d)
        results.append(checks.CheckResult(
            "fem_convergence", "l2_rate", report.l2_rate,
            report.l2_rate >= 1.9))
    if "taylor" in suites:
        from . import pde
        from .geometry import make_square_mesh
        mesh = make_square_mesh(16)
        x_field = checks.smooth_field(mesh, seed=3, amplitude=0.3)
        for cost in ("l2", "j_at_y"):
            kwargs = {}
            if cost == "j_at_y":
                state = pde.solve_state(mesh, problem.f, law)
                vals = derivatives.nodal_cost_values(state.u, spec)
                interior = np.flatnonzero(mesh.node_marker == 0)
                kwargs["y_node"] = int(interior[np.argmax(vals[interior])])
            report = checks.taylor_test(mesh, problem.f, spec, law, cost,
                                        x_field, grad_f=problem.grad_f,
                                        **kwargs)
            results.append(checks.CheckResult(
                f"taylor_{cost}", "fitted_order", report.fitted_order,
                report.fitted_order >= 1.9))
    if "danskin" in suites:
        # off-center disk: far from optimal, well-separated unique argmax
        from .geometry import make_disk_mesh
        mesh = make_disk_mesh((0.53, 0.41), 1.2, 64, 0.15)
        x_field = checks.smooth_field(mesh, seed=5, amplitude=0.3)
        gaps = [checks.danskin_check(mesh, problem.f, spec, law, x_field, t,
                                     grad_f=problem.grad_f)
                for t in (2e-2, 1e-2, 5e-3)]
        decay = gaps[0] / max(gaps[-1], 1e-300)
        results.append(checks.CheckResult(
            "danskin", "decay_over_two_halvings", decay, decay >= 2.0))
    if "reciprocity" in suites:
        from .geometry import make_square_mesh
        mesh = make_square_mesh(12)
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(10):
            y1, y2 = rng.uniform(0.1, 0.9, size=(2, 2))
            worst = max(worst, checks.reciprocity_check(mesh, y1, y2))
        results.append(checks.CheckResult(
            "reciprocity", "max_defect", worst, worst <= 1e-9))
    if "qp" in suites:
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(25):
            n = int(rng.integers(1, 5))
            a = rng.normal(size=(n, n))
            res = bundle.min_norm_point(a @ a.T)
            worst = max(worst, res.kkt_residual)
        results.append(checks.CheckResult(
            "qp_kkt", "max_residual", worst, worst <= 1e-9))

    output.write_report(results, args.out)
    for r in results:
        print(f"{r.name}: {r.metric}={r.value:.6g} "
              f"{'pass' if r.passed else 'FAIL'}")
    return 0 if all(r.passed for r in results) else 1


def _cmd_mesh_info(args) -> int:
    cfg, _ = _load(args)
    mesh = descent.initial_mesh(cfg)
    q = mesh.quality()
    print(f"nodes: {mesh.n_nodes}")
    print(f"triangles: {mesh.n_triangles}")
    print(f"boundary nodes: {len(mesh.boundary_nodes)}")
    print(f"h_max: {mesh.h_max:.6g}")
    print(f"min_area: {q.min_area:.6g}")
    print(f"min_angle_deg: {np.degrees(q.min_angle):.6g}")
    print(f"max_aspect: {q.max_aspect:.6g}")
    print(f"is_valid: {q.is_valid}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "template":
            sys.stdout.write(config_mod.default_template())
            return 0
        if args.command == "optimize":
            return _cmd_optimize(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "mesh-info":
            return _cmd_mesh_info(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
