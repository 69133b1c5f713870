"""Euler-Maruyama, tamed Euler and the semi-discrete scheme.

All integrators accept single-path or batched increments and loop over time
steps with elementwise array arithmetic, so a path's values do not depend on
which other paths share the batch. Overflow in the explicit schemes is not an
error: non-finite values are carried through to the output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    CONSTANT,
    CUSTOM,
    GEOMETRIC,
    InvalidArgumentError,
    InvalidConfigurationError,
    SchemePath,
    SdeProblem,
    Splitting,
    check_consistency,
    geometric_splitting,
)
from .rng import BrownianIncrements


def constant_exact_step(y_k, alpha, beta, delta, dW):
    """Exact solution of dy = alpha ds + beta dW over one step."""
    return y_k + alpha * delta + beta * dW


def geometric_exact_step(y_k, alpha, beta, delta, dW):
    """Exact solution of dy = alpha y ds + beta y dW over one step."""
    if delta <= 0:
        raise InvalidArgumentError("delta must be > 0")
    return y_k * np.exp((alpha - 0.5 * beta * beta) * delta + beta * dW)


@dataclass(frozen=True)
class ExactStepSolver:
    kind: str
    solve: Callable


STEP_SOLVERS = {
    CONSTANT: ExactStepSolver(CONSTANT, constant_exact_step),
    GEOMETRIC: ExactStepSolver(GEOMETRIC, geometric_exact_step),
}


def _integrate(x0, incs: BrownianIncrements, step) -> np.ndarray:
    # time-major layout keeps each step's slice contiguous
    dW = np.ascontiguousarray(np.moveaxis(incs.dW, -1, 0))
    n = dW.shape[0]
    y = np.empty((n + 1,) + dW.shape[1:])
    y[0] = x0
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for k in range(n):
            y[k + 1] = step(y[k], dW[k])
    return np.ascontiguousarray(np.moveaxis(y, 0, -1))


def _path(values, incs, label) -> SchemePath:
    return SchemePath(incs.grid, values, label, incs.path_index, incs.master_seed)


def euler_path(problem: SdeProblem, incs: BrownianIncrements) -> SchemePath:
    a, b, delta = problem.a, problem.b, incs.grid.delta

    def step(y, dW):
        return y + a(y) * delta + b(y) * dW

    return _path(_integrate(problem.x0, incs, step), incs, "euler")


def tamed_euler_path(problem: SdeProblem, incs: BrownianIncrements) -> SchemePath:
    """Drift-tamed Euler: y + delta*a(y) / (1 + delta*|a(y)|) + b(y) dW."""
    a, b, delta = problem.a, problem.b, incs.grid.delta

    def step(y, dW):
        drift = a(y)
        return y + delta * drift / (1.0 + delta * np.abs(drift)) + b(y) * dW

    return _path(_integrate(problem.x0, incs, step), incs, "tamed")


def _check_solver_matches(problem: SdeProblem, splitting: Splitting) -> None:
    kind = splitting.step_solver
    if kind == CUSTOM:
        if splitting.custom_step is None:
            raise InvalidConfigurationError("custom splitting needs a custom_step solver")
        return
    if splitting.frozen_drift is None or splitting.frozen_diffusion is None:
        raise InvalidConfigurationError(f"{kind} solver needs frozen_drift and frozen_diffusion")

    x0 = problem.x0
    scale = 1.0 + abs(float(problem.a(x0))) + abs(float(problem.b(x0)))
    if not check_consistency(splitting, problem, [x0]) <= 1e-12 * scale:
        raise InvalidConfigurationError("splitting is inconsistent with the problem at x0")

    # probe off the diagonal: the split coefficients must have the shape the
    # solver assumes (independent of x, or linear in x)
    x, y = 1.5 * x0 + 0.25, x0
    alpha, beta = float(splitting.frozen_drift(y)), float(splitting.frozen_diffusion(y))
    if kind == GEOMETRIC:
        expect_f, expect_g = alpha * x, beta * x
    else:
        expect_f, expect_g = alpha, beta
    got_f, got_g = float(splitting.f(x, y)), float(splitting.g(x, y))
    if not (math.isclose(got_f, expect_f, rel_tol=1e-12, abs_tol=1e-300)
            and math.isclose(got_g, expect_g, rel_tol=1e-12, abs_tol=1e-300)):
        raise InvalidConfigurationError(f"split coefficients do not have the form the {kind} solver solves")


def semidiscrete_path(problem: SdeProblem, splitting: Splitting, incs: BrownianIncrements) -> SchemePath:
    """Exact solution of the frozen-coefficient SDE, step by step, at the nodes."""
    _check_solver_matches(problem, splitting)
    delta = incs.grid.delta

    if splitting.step_solver == CUSTOM:
        custom = splitting.custom_step

        def step(y, dW):
            return custom(y, delta, dW)
    else:
        solve = STEP_SOLVERS[splitting.step_solver].solve
        alpha_of, beta_of = splitting.frozen_drift, splitting.frozen_diffusion

        def step(y, dW):
            return solve(y, alpha_of(y), beta_of(y), delta, dW)

    return _path(_integrate(problem.x0, incs, step), incs, "semidiscrete")


def run_scheme(label: str, problem: SdeProblem, incs: BrownianIncrements,
               splitting: Optional[Splitting] = None) -> SchemePath:
    """Dispatch by scheme label; semidiscrete defaults to the geometric splitting."""
    if label == "euler":
        return euler_path(problem, incs)
    if label == "tamed":
        return tamed_euler_path(problem, incs)
    if label == "semidiscrete":
        return semidiscrete_path(problem, splitting or geometric_splitting(problem), incs)
    raise InvalidArgumentError(f"unknown scheme {label!r}")
