import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmsa.approximation import (
    besov_quasinorm,
    best_m_term,
    reconstruct_S,
    term_count,
    threshold,
    tree_error,
    tree_quasinorm_estimate,
)
from gmsa.dyadic import DyadicCube, complete_to_proper_tree
from gmsa.harness.functions import SUITE, white_coefficients
from gmsa.wavelets import CoeffTree, DyadicStep, decompose, project_Pj


def C(j, *k):
    return DyadicCube(j, tuple(k))


def hand_tree():
    levels = [np.zeros((1, 2)), np.zeros((2, 2)), np.zeros((4, 2))]
    levels[0][0] = [0.3, 0.0]
    levels[1][0, 1] = 0.4
    levels[1][1, 1] = 0.05
    levels[2][0, 1] = 0.2
    return CoeffTree(1, levels)


def midpoints(d, J):
    n = 1 << J
    m = (np.arange(n) + 0.5) / n
    return np.stack([g.ravel() for g in np.meshgrid(*([m] * d), indexing="ij")], axis=1)


def random_steps(seed, count=6):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        d = 1 + i % 2
        L = int(rng.integers(1, 7 if d == 1 else 5))
        out.append(DyadicStep(rng.standard_normal((1 << L,) * d) * rng.uniform(0.1, 2)))
    return out


class TestThreshold:
    def test_hand_example(self):
        res = threshold(hand_tree(), 0.1)
        assert res.lambda_set == {C(1, 0), C(2, 0)}
        assert set(res.tree) == {C(0, 0), C(1, 0), C(2, 0)}
        assert res.n_terms == 3
        assert tree_error(hand_tree(), res) == pytest.approx(0.05, abs=1e-15)

    def test_threshold_is_inclusive(self):
        assert C(1, 0) in threshold(hand_tree(), 0.4).lambda_set

    def test_all_small(self):
        res = threshold(hand_tree(), 1.0)
        assert set(res.tree) == {C(0, 0)} and res.n_terms == 1
        assert tree_error(hand_tree(), res) == pytest.approx(math.sqrt(0.4**2 + 0.05**2 + 0.2**2))

    def test_level_zero_kept_but_not_counted(self):
        c = decompose(DyadicStep([1.0, 0.0]), 3)
        res = threshold(c, 0.1)
        assert res.lambda_set == frozenset()
        assert set(res.tree) == {C(0, 0)}
        x = midpoints(1, 3)
        np.testing.assert_allclose(reconstruct_S(c, res, x), c.evaluate(x), atol=1e-15)
        np.testing.assert_array_equal(reconstruct_S(c, res, x), (x[:, 0] < 0.5).astype(float))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            threshold(hand_tree(), 0.0)

    def test_children_augmented(self):
        res = threshold(hand_tree(), 0.1, children_augmented=True)
        assert set(res.tree) == {C(0, 0), C(1, 0), C(2, 0), C(2, 1)}

    def test_tree_is_closure_of_lambda(self):
        c = decompose(SUITE["step2d"], 6)
        for eta in (0.1, 0.01, 0.001):
            res = threshold(c, eta)
            assert res.tree == complete_to_proper_tree(res.lambda_set, 2)
            for cube in res.lambda_set:
                assert c.block(cube).block_norm >= eta

    def test_text_header(self):
        lines = threshold(hand_tree(), 0.1).to_text(hand_tree()).splitlines()
        assert lines[0] == "eta=0.10000000000000001 N=3"
        assert len(lines) == 1 + 2 + 1 + 1


class TestErrors:
    def test_full_tree_has_zero_error(self):
        c = decompose(SUITE["step1d"], 8)
        assert tree_error(c, threshold(c, 1e-300)) == 0.0

    def test_small_eta_reproduces_projection(self):
        c = decompose(SUITE["bump2d"], 5)
        x = np.random.default_rng(0).random((500, 2))
        np.testing.assert_allclose(reconstruct_S(c, threshold(c, 1e-300), x), project_Pj(c, 5, x), atol=1e-12)

    def test_constant_reproduced_for_any_eta(self):
        c = decompose(DyadicStep(np.full(8, 3.5)), 3)
        x = np.random.default_rng(0).random((50, 1))
        np.testing.assert_allclose(reconstruct_S(c, threshold(c, 10.0), x), 3.5)

    @pytest.mark.parametrize("seed", range(4))
    def test_parseval_error_matches_quadrature(self, seed):
        for f in random_steps(seed):
            J = 7 if f.dim == 1 else 5
            c = decompose(f, J)
            x = midpoints(f.dim, J)
            for eta in (0.5, 0.1, 0.01):
                res = threshold(c, eta)
                direct = math.sqrt(float(np.mean((project_Pj(c, J, x) - reconstruct_S(c, res, x)) ** 2)))
                assert tree_error(c, res) == pytest.approx(direct, abs=1e-8)

    def test_count_bounded_by_energy(self):
        for name in ("step1d", "linear1d", "bump2d", "step2d"):
            f = SUITE[name]
            J = 12 if f.dim == 1 else 7
            c = decompose(f, J)
            energy = sum(float(np.sum(c.block_norms(j) ** 2)) for j in range(1, J))
            for eta in np.geomspace(0.3, 1e-4, 20):
                n = threshold(c, eta).n_terms
                assert eta**2 * (n - 1) <= J * energy + 1e-12


class TestNesting:
    @settings(max_examples=25)
    @given(st.integers(0, 2**31), st.integers(1, 2))
    def test_monotone_in_eta(self, seed, d):
        c = white_coefficients(d, 5 if d == 1 else 4, 1.0, seed)
        rng = np.random.default_rng(seed)
        for lv in c.levels[1:]:
            lv *= rng.uniform(0, 1, lv.shape[:-1] + (1,))
        etas = np.sort(rng.uniform(0.01, 1.0, 8))[::-1]
        prev = None
        for eta in etas:
            res = threshold(c, eta)
            if prev is not None:
                assert prev.tree <= res.tree
                assert tree_error(c, res) <= tree_error(c, prev)
            prev = res


class TestBestMTerm:
    def test_extremes(self):
        c = decompose(SUITE["step1d"], 6)
        total = c.n_atoms() - 1
        assert best_m_term(c, total)[1] == 0.0
        energy = sum(float(np.sum(c.block_norms(j) ** 2)) for j in range(1, 6)) + c.levels[0][0, 1] ** 2
        assert best_m_term(c, 0)[1] == pytest.approx(math.sqrt(energy))

    def test_non_increasing(self):
        c = decompose(SUITE["bump2d"], 4)
        errs = [best_m_term(c, m)[1] for m in range(0, 60, 3)]
        assert all(a >= b for a, b in zip(errs, errs[1:]))

    def test_dominates_tree(self):
        for name in ("step1d", "step2d"):
            c = decompose(SUITE[name], 8 if name == "step1d" else 5)
            for eta in np.geomspace(0.2, 1e-3, 12):
                res = threshold(c, eta)
                assert best_m_term(c, term_count(res))[1] <= tree_error(c, res) * (1 + 1e-12)

    def test_ties_broken_deterministically(self):
        c = white_coefficients(1, 3, 1.0, 0)
        for lv in c.levels[1:]:
            lv[..., 1] = 1.0
        atoms, _ = best_m_term(c, 3)
        assert sorted((a.cube.level, a.cube.index) for a in atoms) == [(1, (0,)), (1, (1,)), (2, (0,))]

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            best_m_term(hand_tree(), -1)


class TestQuasinorms:
    def test_constant(self):
        c = decompose(DyadicStep(np.ones(8)), 3)
        grid = [0.5, 0.1, 0.01]
        assert tree_quasinorm_estimate(c, 1.0, grid) == pytest.approx(0.5)
        assert besov_quasinorm(c, 1.0, 2.0) == 0.0

    def test_half_indicator(self):
        c = decompose(DyadicStep([1.0, 0.0]), 3)
        assert tree_quasinorm_estimate(c, 0.5, [0.3, 0.01, 0.001]) == pytest.approx(0.3**0.5)
        assert besov_quasinorm(c, 1.0, 2.0) == pytest.approx(0.5)

    def test_single_block(self):
        levels = [np.zeros((1, 2)), np.zeros((2, 2)), np.zeros((4, 2))]
        levels[2][1, 1] = 0.7
        c = CoeffTree(1, levels)
        for q in (0.5, 1.0, 3.0):
            assert besov_quasinorm(c, 0.8, q) == pytest.approx(2 ** (2 * 0.8) * 0.7)

    def test_finer_grid_never_lower(self):
        c = decompose(SUITE["step2d"], 6)
        coarse = np.geomspace(0.1, 1e-3, 5)
        fine = np.geomspace(0.1, 1e-3, 17)
        assert tree_quasinorm_estimate(c, 1.0, fine) >= tree_quasinorm_estimate(c, 1.0, coarse)

    def test_invalid(self):
        with pytest.raises(ValueError):
            tree_quasinorm_estimate(hand_tree(), 1.0, [])
        with pytest.raises(ValueError):
            besov_quasinorm(hand_tree(), 1.0, 0.0)
