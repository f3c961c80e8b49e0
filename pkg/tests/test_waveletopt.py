import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sphwave import waveletopt as wo
from sphwave import wavelets as wl
from sphwave.mesh import build_mesh, neighbor_sets
from sphwave.optcore import check_gradient, project_to_constraints


def _neg_mass(A, P):
    return float((np.minimum(A, 0) ** 2).sum() + (np.minimum(P, 0) ** 2).sum())


def test_lambda_odd_columns(mesh2):
    L = wo.build_lambda(mesh2, 1)
    nb = neighbor_sets(mesh2, 1)
    for i in range(12):
        col = L[:, 6 + i]
        assert col[6 + i] == pytest.approx(1 / 3)
        nbrs = [*nb.v[i], *nb.f[i]]
        np.testing.assert_allclose(col[nbrs], 1 / 6)
        assert np.count_nonzero(col) == 5


def test_lambda_even_columns(mesh2):
    L1 = wo.build_lambda(mesh2, 1)
    for k in range(6):
        assert L1[k, k] == pytest.approx(1 / 3)
        assert sorted(L1[:, k][L1[:, k] > 0])[:4] == pytest.approx([1 / 6] * 4)
    L2 = wo.build_lambda(mesh2, 2)
    nb = neighbor_sets(mesh2, 2)
    for k in range(6, 18):
        assert L2[k, k] == pytest.approx(0.25)
        np.testing.assert_allclose(L2[nb.incident[k], k], 0.125)


@pytest.mark.parametrize("level", [1, 2])
def test_lambda_columns_sum_to_one(mesh2, level):
    np.testing.assert_allclose(wo.build_lambda(mesh2, level).sum(axis=0), 1.0, atol=1e-15)


def test_level_problem_dofs(mesh2):
    p1 = wo.LevelProblem(mesh2, 1, {}, wo.OptWeights())
    assert (p1.nA, p1.tP.n_params) == (4, 4)
    full = wo.LevelProblem(mesh2, 1, {}, wo.OptWeights(), symmetric=False, pin_rest=False)
    assert (full.nA, full.tP.n_params) == (108, 108)


def test_objective_gradient(mesh2, banks2):
    frozen = {1: (banks2["sint"][1].A, banks2["sint"][1].P)}
    rng = np.random.default_rng(4)
    for level, fr in ((1, {}), (2, frozen)):
        prob = wo.LevelProblem(mesh2, level, fr, wo.OptWeights())
        for _ in range(10):
            assert check_gradient(prob.objective, rng.normal(size=prob.n_params)) < 1e-4


def test_constraint_jacobian(mesh2):
    prob = wo.LevelProblem(mesh2, 1, {}, wo.OptWeights())
    theta = np.random.default_rng(0).normal(size=prob.n_params)
    c, J = prob.all_constraints(theta)
    h = 1e-6
    for i in range(prob.n_params):
        e = np.zeros_like(theta)
        e[i] = h
        num = (prob.all_constraints(theta + e)[0] - prob.all_constraints(theta - e)[0]) / (2 * h)
        np.testing.assert_allclose(J[:, i], num, atol=1e-7)


def test_rref_prunes_constraints(mesh2):
    prob = wo.LevelProblem(mesh2, 1, {}, wo.OptWeights(), exact_pressure=False)
    mask = prob.select_constraints()
    assert mask.size == 36 and 0 < mask.sum() < 36


@given(st.integers(0, 10_000))
def test_independent_subset_implies_all(seed):
    mesh = build_mesh(1)
    prob = wo.LevelProblem(mesh, 1, {}, wo.OptWeights(), exact_pressure=False)
    prob.select_constraints()
    theta0 = np.random.default_rng(seed).uniform(0, 1, prob.n_params)
    theta = project_to_constraints(prob.constraints, theta0)
    assert np.abs(prob.constraints(theta)[0]).max() < 1e-10
    assert np.abs(prob.all_constraints(theta)[0]).max() < 1e-6


def test_optimized_filters(opt_result):
    bank, reports = opt_result
    assert bank.family == "optimized" and len(reports) == 2
    for j, lv in bank.levels.items():
        assert np.abs(lv.A @ lv.P - np.eye(lv.A.shape[0])).max() < 1e-6
        np.testing.assert_allclose(lv.A.sum(axis=0), 1.0, atol=1e-4)
        assert _neg_mass(lv.A, lv.P) < 1e-4
        assert lv.biorthogonality_error() < 1e-8
    for r in reports:
        assert r.cost_final <= r.cost_init
        assert r.n_independent < r.n_constraints


def test_chained_column_sums(opt_bank):
    for j in (1, 2):
        for jp in range(j):
            M = wl.synthesis_matrix(opt_bank, jp, j) @ wl.analysis_matrix(opt_bank, jp, j)
            np.testing.assert_allclose(M.sum(axis=0), 1.0, atol=1e-3)


def test_random_starts_agree(mesh2):
    a = wo.optimize_scaling_filters(mesh2, 1, init="random", seed=1)[0][1]
    b = wo.optimize_scaling_filters(mesh2, 1, init="random", seed=2)[0][1]
    np.testing.assert_allclose(a[0], b[0], atol=1e-3)
    np.testing.assert_allclose(a[1], b[1], atol=1e-3)


def test_freezing_keeps_coarse_levels(mesh2, opt_result):
    bank, _ = opt_result
    frozen = {1: (bank[1].A.copy(), bank[1].P.copy())}
    out, reports = wo.optimize_scaling_filters(mesh2, 2, frozen=frozen)
    assert [r.level for r in reports] == [2]
    assert np.array_equal(out[1][0], bank[1].A) and np.array_equal(out[1][1], bank[1].P)


def test_optimizer_arguments(mesh2):
    with pytest.raises(ValueError):
        wo.optimize_scaling_filters(mesh2, 3)
    with pytest.raises(ValueError):
        wo.optimize_level(mesh2, 1, {}, init="zeros")


@pytest.mark.parametrize("maker", [wl.lazy_filters, wl.interpolating_filters, wl.sint_filters])
def test_complete_wavelet_filters(mesh2, maker):
    f = maker(mesh2, 2)
    B, Q = wo.complete_wavelet_filters(f.A, f.P)
    assert wl.LevelFilters(f.A, f.P, B, Q).biorthogonality_error() < 1e-8
    assert np.abs(f.A @ Q).max() < 1e-12


def test_complete_wavelet_filters_errors(mesh2):
    f = wl.lazy_filters(mesh2, 1)
    with pytest.raises(ValueError, match="identity"):
        wo.complete_wavelet_filters(f.A, 2 * f.P)
    A = np.vstack([f.A[:-1], np.zeros(18)])
    with pytest.raises(ValueError):
        wo.complete_wavelet_filters(A, np.linalg.pinv(A))


def test_vbap_completion(banks2):
    lv = banks2["vbap"][2]
    B, Q = wo.complete_wavelet_filters(lv.A, lv.P)
    assert wl.LevelFilters(lv.A, lv.P, B, Q).biorthogonality_error() < 1e-8
