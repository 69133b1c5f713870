"""Time grids, scalar SDE problems and coefficient splittings.

A problem is the autonomous scalar Ito equation

    dx = a(x) dt + b(x) dW,   x(0) = x0,   t in [0, T].

A splitting is a pair f(x, y), g(x, y) with f(x, x) = a(x) and g(x, x) = b(x).
The second argument is the frozen (discretized) variable: on each step it is
held at the left-endpoint value while the first argument evolves.

Coefficient callables operate elementwise on floats or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]
Coefficient = Callable[[ArrayLike], ArrayLike]
SplitCoefficient = Callable[[ArrayLike, ArrayLike], ArrayLike]

CONSTANT = "constant-coefficient"
GEOMETRIC = "geometric-linear"
CUSTOM = "custom"
SOLVER_KINDS = (CONSTANT, GEOMETRIC, CUSTOM)

SCHEME_LABELS = ("euler", "tamed", "semidiscrete")


class InvalidArgumentError(ValueError):
    pass


class UnsupportedProblemError(ValueError):
    pass


class InvalidConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] into n steps of width T / n."""

    T: float
    n: int
    delta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", self.T / self.n)

    @property
    def nodes(self) -> np.ndarray:
        # k * delta, never accumulated
        return np.arange(self.n + 1) * self.delta

    def node(self, k: int) -> float:
        return k * self.delta

    def refines(self, other: "TimeGrid") -> bool:
        """True if every node of `other` is a node of this grid."""
        return self.T == other.T and self.n % other.n == 0


def make_grid(T: float, n: int) -> TimeGrid:
    if not (isinstance(T, (int, float)) and math.isfinite(T) and T > 0):
        raise InvalidArgumentError(f"horizon T must be a positive finite number, got {T!r}")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgumentError(f"step count n must be a positive integer, got {n!r}")
    return TimeGrid(float(T), int(n))


def floor_index(grid: TimeGrid, t: float) -> int:
    """Index of the last node t_k with t_k <= t.

    Times within a few ulps of a node snap to that node, so decimal literals
    such as 0.3 on a grid of width 0.1 map to the node they name. t = T maps
    to n.
    """
    # n * delta may exceed T by an ulp; the last node is still in range
    if not (0.0 <= t <= max(grid.T, grid.n * grid.delta)):
        raise InvalidArgumentError(f"t={t!r} outside [0, {grid.T}]")
    ratio = t / grid.delta
    nearest = round(ratio)
    if math.isclose(t, nearest * grid.delta, rel_tol=16 * np.finfo(float).eps):
        k = nearest
    else:
        k = math.floor(ratio)
    return min(max(int(k), 0), grid.n)


@dataclass(frozen=True)
class PowerLinear:
    """Parameters of a(x) = theta*x - c*x**q, b(x) = sigma*x."""

    theta: float
    c: float
    q: int
    sigma: float

    def drift_ratio(self, y):
        """a(y) / y in closed form."""
        return self.theta - self.c * y ** (self.q - 1)

    def diffusion_ratio(self, y):
        """b(y) / y in closed form (constant)."""
        return self.sigma + 0.0 * y

    # a and b are written as ratio * x so that the geometric splitting
    # reproduces them bit for bit on the diagonal.
    def drift(self, x):
        return self.drift_ratio(x) * x

    def diffusion(self, x):
        return self.sigma * x


@dataclass(frozen=True)
class SdeProblem:
    a: Coefficient
    b: Coefficient
    x0: float
    T: float
    family: Optional[PowerLinear] = None

    def exact_solution(self, t, W):
        """Closed-form solution for the linear (c = 0) family members.

        x0 * exp((theta - sigma**2 / 2) t + sigma W_t), evaluated elementwise.
        """
        fam = self.family
        if fam is None or fam.c != 0:
            raise UnsupportedProblemError("closed-form solution needs a power-linear problem with c = 0")
        return self.x0 * np.exp((fam.theta - 0.5 * fam.sigma ** 2) * t + fam.sigma * W)

    def with_sigma(self, sigma: float) -> "SdeProblem":
        fam = self.family
        if fam is None:
            raise UnsupportedProblemError("sigma can only be replaced on power-linear problems")
        return power_linear_problem(fam.theta, fam.c, fam.q, sigma, self.x0, self.T)


def power_linear_problem(theta: float, c: float, q: int, sigma: float, x0: float, T: float) -> SdeProblem:
    """Build dx = (theta*x - c*x**q) dt + sigma*x dW.

    theta=0, c=1, q=3 gives the cubic-drift test equation with multiplicative
    noise of strength sigma.
    """
    if isinstance(q, bool) or int(q) != q or q < 3 or int(q) % 2 == 0:
        raise InvalidArgumentError("q must be odd ≥ 3")
    if c < 0:
        raise InvalidArgumentError("c must be >= 0")
    if not (math.isfinite(T) and T > 0):
        raise InvalidArgumentError("T must be > 0")
    fam = PowerLinear(float(theta), float(c), int(q), float(sigma))
    return SdeProblem(a=fam.drift, b=fam.diffusion, x0=float(x0), T=float(T), family=fam)


@dataclass(frozen=True)
class Splitting:
    """Split coefficients plus what the exact step solver needs.

    For the constant-coefficient and geometric-linear kinds, `frozen_drift`
    and `frozen_diffusion` map the frozen value y_k to the step constants
    (alpha, beta). A custom kind supplies `custom_step(y_k, delta, dW)`.
    """

    f: SplitCoefficient
    g: SplitCoefficient
    step_solver: str
    frozen_drift: Optional[Coefficient] = None
    frozen_diffusion: Optional[Coefficient] = None
    custom_step: Optional[Callable[[np.ndarray, float, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.step_solver not in SOLVER_KINDS:
            raise InvalidArgumentError(f"unknown step solver kind {self.step_solver!r}")


def geometric_splitting(problem: SdeProblem) -> Splitting:
    """f(x, y) = (a(y)/y) x, g(x, y) = (b(y)/y) x with closed-form ratios."""
    fam = problem.family
    if fam is None:
        raise UnsupportedProblemError("geometric splitting needs closed-form coefficient ratios (power-linear family)")
    return Splitting(
        f=lambda x, y: fam.drift_ratio(y) * x,
        g=lambda x, y: fam.diffusion_ratio(y) * x,
        step_solver=GEOMETRIC,
        frozen_drift=fam.drift_ratio,
        frozen_diffusion=fam.diffusion_ratio,
    )


def euler_splitting(problem: SdeProblem) -> Splitting:
    a, b = problem.a, problem.b
    return Splitting(
        f=lambda x, y: a(y),
        g=lambda x, y: b(y),
        step_solver=CONSTANT,
        frozen_drift=a,
        frozen_diffusion=b,
    )


def check_consistency(splitting: Splitting, problem: SdeProblem, sample_points: Sequence[float]) -> float:
    """max |f(x,x) - a(x)| + |g(x,x) - b(x)| over the sample points."""
    x = np.asarray(sample_points, dtype=float)
    if x.size == 0:
        raise InvalidArgumentError("sample set must be non-empty")
    err = np.abs(splitting.f(x, x) - problem.a(x)) + np.abs(splitting.g(x, x) - problem.b(x))
    return float(np.max(err))


@dataclass(frozen=True)
class SchemePath:
    """Node values of one path, or a batch of paths stacked on axis 0.

    `values` has shape (n + 1,) for a single path and (M, n + 1) for a batch,
    in which case `path_index` is the matching array of path indices.
    """

    grid: TimeGrid
    values: np.ndarray
    scheme_label: str
    path_index: Union[int, np.ndarray] = 0
    stream_seed: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def __len__(self):
        return self.values.shape[-1]
