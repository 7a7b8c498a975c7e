#!/usr/bin/env python3
"""Produce demo histories and shape snapshots for the plotting frontend.

Runs the disk-to-square experiment from an in-basin start (radius 0.9) for
the four series of the comparison figure (max/integral cost x sobolev/
euclidean metric) and writes history CSVs plus three shape snapshots.

Usage: python scripts/make_demo_outputs.py [outdir]   (default: demo/out)
"""
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from shapemax import bundle, derivatives, output, pde, problems
from shapemax.descent import RunConfig, initial_mesh, run_l2, run_linfty


def main() -> int:
    outdir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "demo/out")
    outdir.mkdir(parents=True, exist_ok=True)

    base = dict(mesh_kind="disk", disk_center=(0.5, 0.5), disk_radius=0.9,
                n_boundary=100, target_nodes=700, n_extra_active=40,
                gamma=1e-12, max_iters=400)
    mesh0 = initial_mesh(RunConfig(**base))
    series = [
        ("linfty_sobolev", run_linfty, "sobolev", None),
        ("l2_sobolev", run_l2, "sobolev", None),
        ("linfty_euclidean", run_linfty, "euclidean",
         0.3 * mesh0.h_max * np.sqrt(mesh0.n_nodes)),
        ("l2_euclidean", run_l2, "euclidean",
         0.3 * mesh0.h_max * np.sqrt(mesh0.n_nodes)),
    ]
    for label, runner, metric, t0 in series:
        cfg = RunConfig(**{**base, "metric": metric, "t0": t0})
        hist = runner(cfg)
        output.write_history(hist, str(outdir / f"history_{label}.csv"))
        print(f"{label}: {len(hist.records)} iterations, "
              f"terminated {hist.termination}, final J2 {hist.final_J_2:.3e}")

    # three snapshots of the max-cost sobolev run with active-set overlays
    prob = problems.get_problem("sine_tracking")
    law = problems.get_law("constant")
    spec = derivatives.tracking_cost(prob.u_d, prob.grad_u_d)
    cfg = RunConfig(**{**base, "metric": "sobolev"})
    mesh = initial_mesh(cfg)
    for k, iters in enumerate((0, 10, 40)):
        run_cfg = RunConfig(**{**base, "metric": "sobolev",
                               "max_iters": max(iters, 1)})
        hist = run_linfty(run_cfg) if iters else None
        snap_mesh = hist.final_mesh if hist else mesh
        state = pde.solve_state(snap_mesh, prob.f, law)
        active = bundle.select_active(snap_mesh, state.u, spec,
                                      cfg.n_extra_active)
        output.write_shape(snap_mesh, active,
                           str(outdir / f"shape_{iters:04d}.csv"))
        print(f"shape snapshot at iteration {iters}: "
              f"{len(active)} active nodes")
    return 0


if __name__ == "__main__":
    sys.exit(main())
