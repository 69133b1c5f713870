import math

import numpy as np
import pytest

from semidiscrete.analysis import (
    StrongErrorReport,
    diff_trajectory,
    gronwall_moment_bound,
    moment_study,
    order_fit,
    positivity_study,
    simulate_paths,
    strong_error_study,
    sup_sq_distance,
)
from semidiscrete.core import InvalidArgumentError, SchemePath, make_grid, power_linear_problem
from semidiscrete.rng import derive_stream, sample_increments


def paper_example(sigma=1.0, x0=1.0):
    return power_linear_problem(0.0, 1.0, 3, sigma, x0, 1.0)


def gbm():
    return power_linear_problem(0.5, 0.0, 3, 0.2, 1.0, 1.0)


def const_paths(values, n=4, T=1.0):
    grid = make_grid(T, n)
    vals = np.repeat(np.asarray(values, dtype=float)[:, None], n + 1, axis=1)
    return SchemePath(grid, vals, "const", np.arange(len(values)))


class TestSupSqDistance:
    def test_self(self):
        p = simulate_paths(paper_example(), "semidiscrete", 64, 3, 1)
        assert np.all(sup_sq_distance(p, p) == 0)

    def test_constant_offset(self):
        g = make_grid(1, 10)
        a = SchemePath(g, np.ones(11), "a")
        b = SchemePath(g, np.full(11, 1.5), "b")
        assert sup_sq_distance(a, b) == 0.25

    def test_only_coarse_nodes_compared(self):
        fine = SchemePath(make_grid(1, 4), np.array([0.0, 100.0, 1.0, -100.0, 2.0]), "fine")
        coarse = SchemePath(make_grid(1, 2), np.array([0.0, 1.5, 2.0]), "coarse")
        assert sup_sq_distance(coarse, fine) == 0.25
        assert sup_sq_distance(fine, coarse) == 0.25

    @pytest.mark.parametrize("n_a,T_a,n_b,T_b", [(3, 1.0, 4, 1.0), (4, 1.0, 4, 2.0)])
    def test_incompatible(self, n_a, T_a, n_b, T_b):
        a = SchemePath(make_grid(T_a, n_a), np.zeros(n_a + 1), "a")
        b = SchemePath(make_grid(T_b, n_b), np.zeros(n_b + 1), "b")
        with pytest.raises(InvalidArgumentError):
            sup_sq_distance(a, b)


def brute_force_euler_error(problem, coarse_n, fine_n, M, seed):
    """Scalar-loop reference for the coupled Euler-vs-exact strong error."""
    fam = problem.family
    fine = make_grid(problem.T, fine_n)
    r = fine_n // coarse_n
    errs = []
    for i in range(M):
        dW = sample_increments(fine, derive_stream(seed, i)).dW.tolist()
        W, y, worst = 0.0, problem.x0, 0.0
        for j in range(coarse_n):
            block = dW[j * r:(j + 1) * r]
            step = 0.0
            for v in block:
                step += v
            a = (fam.theta - fam.c * y ** (fam.q - 1)) * y
            y = y + a * (problem.T / coarse_n) + fam.sigma * y * step
            W += step
            t = (j + 1) * (problem.T / coarse_n)
            exact = problem.x0 * math.exp((fam.theta - fam.sigma ** 2 / 2) * t + fam.sigma * W)
            worst = max(worst, (y - exact) ** 2)
        errs.append(worst)
    return float(np.mean(errs))


class TestStrongErrorStudy:
    def test_self_reference_is_zero(self):
        reps = strong_error_study(paper_example(), None, [256], 256, 50, 3)
        assert len(reps) == 1
        assert reps[0].estimate == 0.0 and reps[0].sample_std == 0.0

    def test_divisibility(self):
        with pytest.raises(InvalidArgumentError):
            strong_error_study(paper_example(), None, [3, 4], 16, 10, 1)
        with pytest.raises(InvalidArgumentError):
            strong_error_study(paper_example(), None, [], 16, 10, 1)

    def test_report_fields(self):
        reps = strong_error_study(paper_example(), None, [64, 8, 16], 256, 40, 2)
        assert [r.n for r in reps] == [8, 16, 64]
        assert [r.delta for r in reps] == [1 / 8, 1 / 16, 1 / 64]
        for r in reps:
            assert r.estimate > 0 and r.M == 40
            assert r.ci_halfwidth == 1.96 * r.sample_std / math.sqrt(40)

    def test_gbm_semidiscrete_exact_at_nodes(self):
        reps = strong_error_study(gbm(), None, [8, 64, 512], 1024, 100, 4)
        assert all(r.estimate <= 1e-24 for r in reps)
        reps = strong_error_study(gbm(), None, [8, 64, 1024], 1024, 100, 4, reference="exact")
        assert all(r.estimate <= 1e-24 for r in reps)

    def test_euler_against_brute_force(self):
        reps = strong_error_study(gbm(), None, [8, 32], 128, 30, 6, scheme="euler", reference="exact")
        for r in reps:
            assert r.estimate == pytest.approx(brute_force_euler_error(gbm(), r.n, 128, 30, 6), rel=1e-12)

    def test_exact_reference_needs_linear_member(self):
        with pytest.raises(ValueError):
            strong_error_study(paper_example(), None, [8], 64, 5, 1, reference="exact")

    def test_worker_count_does_not_matter(self):
        args = (paper_example(), None, [16, 64], 256, 70, 8)
        one = strong_error_study(*args, workers=1, chunk_size=16)
        many = strong_error_study(*args, workers=4, chunk_size=16)
        assert one == many
        assert one == strong_error_study(*args, workers=1, chunk_size=1000)

    def test_ci_coverage(self):
        # Euler vs exact on GBM at n=8: brute-force mean from a large separate sample
        prob = gbm()
        truth = strong_error_study(prob, None, [8], 64, 40_000, 999, scheme="euler", reference="exact")[0].estimate
        covered = 0
        for rep in range(100):
            r = strong_error_study(prob, None, [8], 64, 200, rep, scheme="euler", reference="exact")[0]
            covered += abs(r.estimate - truth) <= r.ci_halfwidth
        assert covered >= 90


class TestMomentStudy:
    def test_constant_paths(self):
        rep = moment_study(const_paths([1.0, 1.0, 1.0]), 2)
        assert rep.estimate == 1.0 and rep.sample_std == 0.0 and rep.M == 3

    def test_noise_free_paper_example(self):
        prob = paper_example(sigma=0.0, x0=1.3)
        rep = moment_study(simulate_paths(prob, "semidiscrete", 200, 4, 0), 3, prob)
        assert rep.estimate == 1.3 ** 3
        assert rep.gronwall_bound == 1.3 ** 3

    def test_rejects_small_p(self):
        with pytest.raises(InvalidArgumentError):
            moment_study(const_paths([1.0]), 1.5)

    def test_sup_includes_start(self):
        prob = paper_example(sigma=2.0, x0=0.8)
        for p in (2, 3.5, 6):
            rep = moment_study(simulate_paths(prob, "semidiscrete", 100, 50, 5), p, prob)
            assert rep.estimate >= 0.8 ** p

    def test_gronwall_bound(self):
        assert gronwall_moment_bound(paper_example(), 2) == pytest.approx(math.e, rel=1e-15)
        assert gronwall_moment_bound(paper_example(sigma=2.0, x0=0.5), 3) == pytest.approx(
            0.5 ** 3 * math.exp(4 * 3 * 2 / 2), rel=1e-15)


class TestPositivityStudy:
    def test_semidiscrete_never_crosses(self):
        prob = paper_example(sigma=20.0)
        rep = positivity_study(simulate_paths(prob, "semidiscrete", 1000, 200, 1))
        assert rep.count_nonpositive == 0 and rep.fraction == 0.0
        assert math.isnan(rep.first_crossing_median)
        assert np.all(rep.path_minima > 0)

    def test_tamed_crosses_in_figure2_setting(self):
        prob = paper_example(sigma=20.0)
        rep = positivity_study(simulate_paths(prob, "tamed", 1000, 200, 1))
        assert rep.fraction > 0
        assert 1 <= rep.first_crossing_min <= rep.first_crossing_median <= rep.first_crossing_max <= 1000

    def test_positive_constants(self):
        assert positivity_study(const_paths([1.0, 2.0])).fraction == 0.0

    def test_first_crossing(self):
        vals = np.array([[1.0, 0.5, 0.0, 1.0], [1.0, 1.0, 1.0, 1.0], [1.0, -1.0, -2.0, 1.0]])
        rep = positivity_study(SchemePath(make_grid(1, 3), vals, "x"))
        assert rep.count_nonpositive == 2
        assert rep.fraction == 2 / 3
        assert (rep.first_crossing_min, rep.first_crossing_median, rep.first_crossing_max) == (1.0, 1.5, 2.0)

    def test_needs_positive_start(self):
        with pytest.raises(InvalidArgumentError):
            positivity_study(const_paths([0.0, 1.0]))


class TestDiffTrajectory:
    def test_degenerate(self):
        prob = power_linear_problem(0, 0, 3, 0, 1, 1)
        t, z = diff_trajectory(prob, 100, 1, 0)
        assert len(t) == 101 and np.all(z == 0)

    def test_deterministic(self):
        prob = paper_example()
        a = diff_trajectory(prob, 1000, 5, 3)
        b = diff_trajectory(prob, 1000, 5, 3)
        assert a[1].tobytes() == b[1].tobytes()

    def test_sigma_override(self):
        z1 = diff_trajectory(paper_example(sigma=3.0), 500, 5, 0)[1]
        z2 = diff_trajectory(paper_example(), 500, 5, 0, sigma=3.0)[1]
        assert np.array_equal(z1, z2)

    def test_coupled_levels(self):
        t, z = diff_trajectory(paper_example(), 100, 5, 0, base_n=1000)
        assert len(z) == 101 and z[0] == 0.0
        with pytest.raises(InvalidArgumentError):
            diff_trajectory(paper_example(), 300, 5, 0, base_n=1000)


def reports_from(deltas, estimates):
    return [StrongErrorReport(int(round(1 / d)), d, e, 0.0, 1, 0.0) for d, e in zip(deltas, estimates)]


class TestOrderFit:
    deltas = [2.0 ** -k for k in range(3, 9)]

    @pytest.mark.parametrize("order", [1.0, 2.0, 0.5])
    def test_power_law(self, order):
        slope, r2 = order_fit(reports_from(self.deltas, [3.0 * d ** order for d in self.deltas]))
        assert slope == pytest.approx(order, rel=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_too_few(self):
        with pytest.raises(InvalidArgumentError):
            order_fit(reports_from(self.deltas[:2], [1.0, 0.5]))

    def test_nonpositive(self):
        with pytest.raises(InvalidArgumentError):
            order_fit(reports_from(self.deltas[:3], [1.0, 0.0, 0.5]))
