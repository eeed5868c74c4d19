import numpy as np
import pytest

from occafs.baselines import (
    optimal_gamma,
    pebfs_rank,
    pebfs_solve,
    peb_objective,
    ttest_rank,
)
from occafs.datasets import Dataset, make_planted_dataset
from occafs.exceptions import InvalidInputError
from occafs.model import ProblemData, objective
from occafs.scf import SolverConfig

from conftest import random_problem, random_stiefel


def two_cluster():
    rng = np.random.default_rng(3)
    labels = np.repeat([1, 2], 10)
    X = rng.standard_normal((4, 20))
    X[1] += 10.0 * (labels == 1)            # separates class 1
    X[3] = 5.0                              # constant
    return Dataset(X, labels)


class TestTTest:
    def test_constant_last_separating_first(self):
        r = ttest_rank(two_cluster())
        assert r.order[0] == 1
        assert r.order[-1] == 3 and r.scores[3] == 0.0
        assert np.isfinite(r.scores).all()

    def test_permutation_invariant(self):
        ds = two_cluster()
        perm = np.random.default_rng(0).permutation(ds.p)
        r1 = ttest_rank(ds)
        r2 = ttest_rank(Dataset(ds.X[:, perm], ds.labels[perm]))
        np.testing.assert_array_equal(r1.order, r2.order)
        np.testing.assert_allclose(r1.scores, r2.scores, rtol=1e-12)

    def test_shift_and_scale_invariant(self):
        ds = make_planted_dataset(20, 3, 60, 3, 1.0, seed=1)
        X = ds.X.copy()
        X[2] = 7.5 * X[2] + 100.0
        r1, r2 = ttest_rank(ds), ttest_rank(Dataset(X, ds.labels))
        np.testing.assert_allclose(r1.scores, r2.scores, rtol=1e-9)

    def test_small_class_rejected(self):
        ds = Dataset(np.random.default_rng(0).standard_normal((3, 5)),
                     [1, 2, 2, 2, 2])
        with pytest.raises(InvalidInputError):
            ttest_rank(ds)


class TestGamma:
    def test_optimality(self, rng):
        for _ in range(10):
            pd = random_problem(rng, 12, 3, alpha=0.1)
            P = random_stiefel(rng, 12, 3)
            g = optimal_gamma(pd, P)
            best = peb_objective(pd, P, g)
            for d in (1e-3, 1e-1):
                assert best <= peb_objective(pd, P, g + d)
                assert best <= peb_objective(pd, P, g - d)

    def test_optimal_g_is_minus_exact_objective(self, rng):
        pd = random_problem(rng, 10, 2, alpha=0.3, eps0=0.0)
        P = random_stiefel(rng, 10, 2)
        assert peb_objective(pd, P, optimal_gamma(pd, P)) == \
            pytest.approx(-objective(pd, P), rel=1e-12)


class TestPebSolve:
    def test_closed_form(self, rng):
        D = rng.standard_normal((8, 2))
        pd = ProblemData(np.eye(8), D)
        _, trace = pebfs_solve(pd, SolverConfig(max_iter=1000))
        best = np.linalg.svd(D, compute_uv=False).sum() ** 2 / 2
        assert trace.termination == "converged"
        assert trace.final.objective == pytest.approx(-best, rel=1e-8)

    def test_iterates_orthonormal(self, rng):
        pd = random_problem(rng, 15, 3, alpha=0.5)
        seen = []

        def cb(it, state):
            seen.append(state.iteration)
            assert np.linalg.norm(state.P.T @ state.P - np.eye(3)) <= 1e-10
            assert state.objective_g == pytest.approx(
                peb_objective(pd, state.P, state.gamma), rel=1e-12)

        _, trace = pebfs_solve(pd, SolverConfig(max_iter=30), callback=cb)
        assert seen == list(range(trace.n_iter + 1))
        assert np.isnan(trace.kkt_residuals).all()

    def test_degenerate_gamma(self):
        pd = ProblemData(np.eye(4), np.zeros((4, 2)), alpha=0.1, eps0=1e-3)
        _, trace = pebfs_solve(pd)
        assert trace.termination == "degenerate-gamma"

    def test_rank(self):
        ds = make_planted_dataset(20, 3, 80, 2, 3.0, seed=2)
        r = pebfs_rank(ds, alpha=0.1)
        assert r.method == "peb-fs"
        assert sorted(r.order.tolist()) == list(range(20))
        assert r.trace is not None
