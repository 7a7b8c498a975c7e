"""YAML run configuration: template generation, parsing, validation.

Unknown keys are rejected so typos fail loudly; the template documents every
default in place and round-trips to the default RunConfig.
"""
from __future__ import annotations

import math
from dataclasses import fields

import yaml

from .descent import ConfigError, RunConfig

TEMPLATE = """\
# shapemax run configuration (defaults shown)

cost: linfty              # linfty (max cost) | l2 (integral cost)
metric: sobolev           # sobolev (H1 field metric) | euclidean (coefficients)
problem: sine_tracking    # tracking target and source selector
law: constant             # diffusion law: constant | saturating

mesh:
  kind: disk              # disk | square
  disk_center: [0.5, 0.5]
  disk_radius: {radius}   # default: sqrt(6)
  n_boundary: 400         # boundary nodes of the disk polygon
  target_nodes: 5500      # approximate total node count of the disk mesh
  square_n: 16            # subdivisions of the unit square (kind: square)

run:
  n_extra_active: 40      # bundle size beyond the exact maximizers (N2)
  gamma: 1.0e-06          # sufficient-decrease ratio in (0, 1)
  t0: null                # initial step; null -> 0.5 * h_max
  step_mode: backtracking # backtracking | constant
  backtrack_factor: 0.5
  max_backtracks: 30
  max_iters: 2000
  snapshot_every: 0       # 0 disables shape snapshots
  output_dir: null        # directory for history/shape files

verify:
  suites: [convergence, taylor, danskin, reciprocity, qp]
""".format(radius=f"{math.sqrt(6.0):.17g}")

_MESH_KEYS = {"kind": "mesh_kind", "disk_center": "disk_center",
              "disk_radius": "disk_radius", "n_boundary": "n_boundary",
              "target_nodes": "target_nodes", "square_n": "square_n"}
_RUN_KEYS = {"n_extra_active": "n_extra_active", "gamma": "gamma", "t0": "t0",
             "step_mode": "step_mode", "backtrack_factor": "backtrack_factor",
             "max_backtracks": "max_backtracks", "max_iters": "max_iters",
             "snapshot_every": "snapshot_every", "output_dir": "output_dir"}
_TOP_KEYS = {"cost", "metric", "problem", "law", "mesh", "run", "verify"}
_VERIFY_SUITES = {"convergence", "taylor", "danskin", "reciprocity", "qp"}


def default_template() -> str:
    return TEMPLATE


def parse_config(text: str) -> tuple[RunConfig, list]:
    """Parse configuration text into a RunConfig and the verify suite list."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kwargs = {}
    for key in ("cost", "metric", "problem", "law"):
        if key in data:
            kwargs[key] = str(data[key])

    for section, mapping in (("mesh", _MESH_KEYS), ("run", _RUN_KEYS)):
        block = data.get(section, {})
        if block is None:
            block = {}
        if not isinstance(block, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        bad = set(block) - set(mapping)
        if bad:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(bad)}")
        for key, target in mapping.items():
            if key in block:
                kwargs[target] = block[key]

    if "disk_center" in kwargs:
        center = kwargs["disk_center"]
        if not (isinstance(center, (list, tuple)) and len(center) == 2):
            raise ConfigError("disk_center must be a pair [x, y]")
        kwargs["disk_center"] = (float(center[0]), float(center[1]))

    suites = data.get("verify", {}) or {}
    if not isinstance(suites, dict) or set(suites) - {"suites"}:
        raise ConfigError("verify section must contain only 'suites'")
    suite_list = suites.get("suites", sorted(_VERIFY_SUITES))
    bad = set(suite_list) - _VERIFY_SUITES
    if bad:
        raise ConfigError(f"unknown verify suites: {sorted(bad)}")

    defaults = RunConfig()
    coerced = {}
    for f in fields(RunConfig):
        if f.name not in kwargs:
            continue
        value = kwargs[f.name]
        ref = getattr(defaults, f.name)
        if value is None:
            coerced[f.name] = None
        elif isinstance(ref, bool):
            coerced[f.name] = bool(value)
        elif isinstance(ref, int) and not isinstance(value, bool):
            coerced[f.name] = int(value)
        elif isinstance(ref, float) or f.name == "t0":
            coerced[f.name] = float(value)
        else:
            coerced[f.name] = value
    try:
        config = RunConfig(**coerced)
        config.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return config, list(suite_list)


def load_config(path: str) -> tuple[RunConfig, list]:
    with open(path) as fh:
        return parse_config(fh.read())
