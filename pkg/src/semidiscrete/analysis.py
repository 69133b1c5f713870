"""Monte Carlo estimators for strong error, moments and positivity.

Per-path work is split into chunks of consecutive path indices that may run
on a thread pool. Chunk results are concatenated in path order before any
reduction, so reports are bit-identical for every worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    InvalidArgumentError,
    SchemePath,
    SdeProblem,
    Splitting,
    geometric_splitting,
    make_grid,
)
from .rng import coarsen, cumulative, derive_stream, sample_batch, sample_increments
from .schemes import run_scheme, semidiscrete_path, tamed_euler_path

Z95 = 1.96
DEFAULT_CHUNK = 250


@dataclass(frozen=True)
class StrongErrorReport:
    n: int
    delta: float
    estimate: float
    sample_std: float
    M: int
    ci_halfwidth: float
    scheme: str = "semidiscrete"


@dataclass(frozen=True)
class MomentReport:
    p: float
    estimate: float
    sample_std: float
    M: int
    ci_halfwidth: float
    terminal_estimate: float
    terminal_std: float
    gronwall_bound: float = math.nan


@dataclass(frozen=True)
class PositivityReport:
    scheme: str
    M: int
    count_nonpositive: int
    fraction: float
    first_crossing_min: float
    first_crossing_median: float
    first_crossing_max: float
    path_minima: np.ndarray


def _mean_std(x: np.ndarray) -> Tuple[float, float]:
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return mean, std


def _chunks(M: int, size: int) -> List[range]:
    return [range(s, min(s + size, M)) for s in range(0, M, size)]


def _map_in_order(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def simulate_paths(problem: SdeProblem, scheme: str, n: int, M: int, master_seed: int,
                   splitting: Optional[Splitting] = None, workers: int = 1,
                   chunk_size: int = DEFAULT_CHUNK) -> SchemePath:
    """Integrate paths 0..M-1 of `scheme` on an n-step grid; rows are paths."""
    if M < 1:
        raise InvalidArgumentError("M must be >= 1")
    grid = make_grid(problem.T, n)

    def work(idx):
        return run_scheme(scheme, problem, sample_batch(grid, master_seed, idx), splitting).values

    values = np.concatenate(_map_in_order(work, _chunks(M, chunk_size), workers), axis=0)
    return SchemePath(grid, values, scheme, np.arange(M), master_seed)


def sup_sq_distance(path_a: SchemePath, path_b: SchemePath):
    """max over common nodes of (y_a - y_b)**2; works row-wise on batches."""
    ga, gb = path_a.grid, path_b.grid
    a, b = path_a.values, path_b.values
    if ga.refines(gb):
        a = a[..., :: ga.n // gb.n]
    elif gb.refines(ga):
        b = b[..., :: gb.n // ga.n]
    else:
        raise InvalidArgumentError(f"grids with n={ga.n} and n={gb.n} (T={ga.T}, {gb.T}) are not nested")
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.max((a - b) ** 2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def strong_error_study(problem: SdeProblem, splitting: Optional[Splitting], coarse_n_list: Sequence[int],
                       fine_n: int, M: int, master_seed: int, scheme: str = "semidiscrete",
                       reference: str = "semidiscrete", workers: int = 1,
                       chunk_size: int = DEFAULT_CHUNK) -> List[StrongErrorReport]:
    """Estimate E max_k |y_k - x_k|**2 per coarse level on coupled Brownian paths.

    Increments are sampled once at `fine_n` and block-summed down to each
    coarse level. The reference is the semi-discrete scheme at `fine_n`
    ("semidiscrete") or the closed-form solution of a c = 0 problem ("exact").
    """
    levels = sorted(int(n) for n in coarse_n_list)
    if not levels:
        raise InvalidArgumentError("need at least one coarse level")
    for n in levels:
        if n < 1 or fine_n % n:
            raise InvalidArgumentError(f"coarse n={n} does not divide fine_n={fine_n}")
    if M < 1:
        raise InvalidArgumentError("M must be >= 1")
    if reference not in ("semidiscrete", "exact"):
        raise InvalidArgumentError(f"unknown reference {reference!r}")
    if splitting is None and "semidiscrete" in (scheme, reference):
        splitting = geometric_splitting(problem)
    fine = make_grid(problem.T, fine_n)

    def work(idx):
        incs = sample_batch(fine, master_seed, idx)
        if reference == "exact":
            ref = SchemePath(fine, problem.exact_solution(fine.nodes, cumulative(incs)), "exact")
        else:
            ref = semidiscrete_path(problem, splitting, incs)
        rows = []
        for n in levels:
            path = run_scheme(scheme, problem, coarsen(incs, fine_n // n), splitting)
            rows.append(sup_sq_distance(path, ref))
        return np.stack(rows)

    per_path = np.concatenate(_map_in_order(work, _chunks(M, chunk_size), workers), axis=1)
    reports = []
    for n, errs in zip(levels, per_path):
        mean, std = _mean_std(errs)
        reports.append(StrongErrorReport(n, fine.T / n, mean, std, M, Z95 * std / math.sqrt(M), scheme))
    return reports


def gronwall_moment_bound(problem: SdeProblem, p: float, t: Optional[float] = None) -> float:
    """Upper bound on E|y_t|**p for the geometric semi-discrete scheme.

    Ito's formula on |y|**p, with the frozen drift -c y_k**(q-1) <= 0
    dropped, gives d E|y|^p <= (p max(theta, 0) + sigma^2 p (p-1) / 2) E|y|^p.
    For theta = 0 this is |x0|^p exp(sigma^2 p (p-1) t / 2).
    """
    fam = problem.family
    if fam is None:
        return math.nan
    t = problem.T if t is None else t
    rate = p * max(fam.theta, 0.0) + 0.5 * fam.sigma ** 2 * p * (p - 1)
    return abs(problem.x0) ** p * math.exp(rate * t)


def moment_study(paths: SchemePath, p: float, problem: Optional[SdeProblem] = None) -> MomentReport:
    if not p >= 2:
        raise InvalidArgumentError("p must be >= 2")
    values = np.atleast_2d(paths.values)
    with np.errstate(over="ignore", invalid="ignore"):
        powered = np.abs(values) ** p
    sup = np.max(powered, axis=-1)
    mean, std = _mean_std(sup)
    t_mean, t_std = _mean_std(powered[:, -1])
    M = values.shape[0]
    bound = gronwall_moment_bound(problem, p, paths.grid.T) if problem is not None else math.nan
    return MomentReport(p, mean, std, M, Z95 * std / math.sqrt(M), t_mean, t_std, bound)


def positivity_study(paths: SchemePath) -> PositivityReport:
    """Count paths with some node value <= 0 (exact comparison)."""
    values = np.atleast_2d(paths.values)
    if not np.all(values[:, 0] > 0):
        raise InvalidArgumentError("positivity analysis needs x0 > 0")
    nonpos = values <= 0
    offending = nonpos.any(axis=-1)
    first = np.argmax(nonpos, axis=-1)[offending]
    M = values.shape[0]
    count = int(offending.sum())
    if count:
        lo, med, hi = float(first.min()), float(np.median(first)), float(first.max())
    else:
        lo = med = hi = math.nan
    return PositivityReport(paths.scheme_label, M, count, count / M, lo, med, hi, np.min(values, axis=-1))


def diff_trajectory(problem: SdeProblem, n: int, master_seed: int, path_index: int = 0,
                    sigma: Optional[float] = None, base_n: Optional[int] = None):
    """Times t_k and z_k = tamed_k - semidiscrete_k on one shared Brownian path.

    With `base_n`, increments are drawn on the base_n grid and block-summed
    to n steps, so runs at different n see the same Brownian path.
    """
    if sigma is not None:
        problem = problem.with_sigma(sigma)
    base = make_grid(problem.T, base_n or n)
    if base.n % n:
        raise InvalidArgumentError(f"n={n} does not divide base_n={base.n}")
    incs = coarsen(sample_increments(base, derive_stream(master_seed, path_index)), base.n // n)
    tamed = tamed_euler_path(problem, incs)
    semi = semidiscrete_path(problem, geometric_splitting(problem), incs)
    return incs.grid.nodes, tamed.values - semi.values


def order_fit(reports: Sequence[StrongErrorReport]) -> Tuple[float, float]:
    """Least-squares slope of log(estimate) on log(delta), and its r**2."""
    if len(reports) < 3:
        raise InvalidArgumentError("need at least 3 levels")
    est = np.array([r.estimate for r in reports])
    if not np.all(np.isfinite(est) & (est > 0)):
        raise InvalidArgumentError("estimates must be positive and finite")
    x = np.log([r.delta for r in reports])
    y = np.log(est)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2
