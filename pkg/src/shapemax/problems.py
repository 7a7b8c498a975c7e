"""Named problem data: source terms, tracking targets, diffusion laws."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import pde


@dataclass(frozen=True)
class ProblemData:
    """Source f with gradient and tracking target u_d with gradient."""
    name: str
    f: Callable
    grad_f: Callable
    u_d: Callable
    grad_u_d: Callable


def _sine(x):
    x = np.asarray(x, dtype=float)
    return np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])


def _grad_sine(x):
    x = np.asarray(x, dtype=float)
    s1, c1 = np.sin(np.pi * x[..., 0]), np.cos(np.pi * x[..., 0])
    s2, c2 = np.sin(np.pi * x[..., 1]), np.cos(np.pi * x[..., 1])
    return np.pi * np.stack([c1 * s2, s1 * c2], axis=-1)


_SCALE = 2.0 * np.pi ** 2 + 1.0


def sine_tracking() -> ProblemData:
    """Target sin(pi x1) sin(pi x2); the unit square is the exact optimum."""
    return ProblemData(
        name="sine_tracking",
        f=lambda x: _SCALE * _sine(x),
        grad_f=lambda x: _SCALE * _grad_sine(x),
        u_d=_sine,
        grad_u_d=_grad_sine)


PROBLEMS = {"sine_tracking": sine_tracking}
LAWS = {"constant": pde.constant_law, "saturating": pde.saturating_law}


def get_problem(name: str) -> ProblemData:
    if name not in PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; have {sorted(PROBLEMS)}")
    return PROBLEMS[name]()


def get_law(name: str) -> pde.DiffusionLaw:
    if name not in LAWS:
        raise KeyError(f"unknown diffusion law {name!r}; have {sorted(LAWS)}")
    return LAWS[name]()
