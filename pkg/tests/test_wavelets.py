import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmsa.dyadic import DyadicCube, locate
from gmsa.errors import DomainError, LevelError
from gmsa.harness.acceptance import gram_matrix
from gmsa.wavelets import (
    CoeffTree,
    DyadicStep,
    WaveletAtom,
    WaveletSystem,
    decompose,
    detail_Qj,
    eval_atom,
    project_Pj,
    sign_table,
    vertex_mask,
    vertex_tuple,
)

SQ2 = math.sqrt(2.0)


def A(j, k, e):
    return WaveletAtom(DyadicCube(j, tuple(k)), tuple(e))


def half(x):
    return (np.asarray(x, dtype=float).reshape(-1) < 0.5).astype(float)


class TestEvalAtom:
    def test_haar_halves(self):
        assert eval_atom(A(0, [0], [1]), 0.25) == 1.0
        assert eval_atom(A(0, [0], [1]), 0.75) == -1.0

    def test_tensor_product(self):
        assert eval_atom(A(0, [0, 0], [1, 0]), (0.25, 0.25)) == 1.0
        assert eval_atom(A(0, [0, 0], [1, 0]), (0.75, 0.25)) == -1.0
        assert eval_atom(A(0, [0, 0], [1, 1]), (0.75, 0.25)) == -1.0

    def test_normalization(self):
        assert eval_atom(A(1, [0], [1]), 0.2) == pytest.approx(1.41421356, abs=1e-8)
        assert eval_atom(A(2, [1, 1], [0, 1]), (0.3, 0.3)) == 4.0

    def test_right_boundary_belongs_to_last_cell(self):
        assert eval_atom(A(1, [1], [1]), 1.0) == -SQ2

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            eval_atom(A(0, [0], [1]), 1.5)

    def test_scaling_only_at_level_zero(self):
        with pytest.raises(ValueError):
            A(1, [0], [0])

    @settings(max_examples=200)
    @given(st.integers(1, 6), st.data())
    def test_vanishes_outside_cube(self, j, data):
        d = data.draw(st.integers(1, 3))
        k = [data.draw(st.integers(0, (1 << j) - 1)) for _ in range(d)]
        e = data.draw(st.integers(1, (1 << d) - 1))
        atom = A(j, k, vertex_tuple(e, d))
        x = np.array(data.draw(st.lists(st.floats(0, 1), min_size=d, max_size=d)))
        inside = locate(x, j) == atom.cube
        v = eval_atom(atom, x)
        if inside:
            assert abs(v) == pytest.approx(2.0 ** (j * d / 2))
        else:
            assert v == 0.0


class TestSystem:
    def test_two_scale_relation(self):
        ws = WaveletSystem(1)
        u = np.random.default_rng(0).uniform(-0.5, 1.5, 1000)
        np.testing.assert_array_equal(ws.scaling(u), ws.refine_scaling(u))

    def test_vertices(self):
        ws = WaveletSystem(2)
        assert ws.vertices == [(0, 0), (1, 0), (0, 1), (1, 1)]
        assert len(ws.nonzero_vertices) == 3

    def test_only_haar(self):
        with pytest.raises(NotImplementedError):
            WaveletSystem(1, kind="db2")

    def test_sign_table_is_hadamard(self):
        for d in (1, 2, 3):
            S = sign_table(d)
            np.testing.assert_array_equal(S @ S.T, (1 << d) * np.eye(1 << d))

    def test_vertex_round_trip(self):
        for d in (1, 2, 3):
            for m in range(1 << d):
                assert vertex_mask(vertex_tuple(m, d)) == m

    @pytest.mark.parametrize("d", [1, 2])
    def test_orthonormal_up_to_level_two(self, d):
        G = gram_matrix(d, 2)
        np.testing.assert_allclose(G, np.eye(len(G)), atol=1e-12)


class TestDecompose:
    def test_constant(self):
        c = decompose(lambda x: np.ones(len(np.atleast_2d(x))), 3, dim=1)
        assert c.scaling_coefficient == pytest.approx(1.0)
        for j in range(3):
            assert np.all(np.abs(c.block_norms(j) if j else c.levels[0][..., 1:]) < 1e-14)

    def test_half_indicator(self):
        c = decompose(DyadicStep([1.0, 0.0]), 3)
        assert c.levels[0][0, 0] == 0.5
        assert c.levels[0][0, 1] == 0.5
        assert all(np.all(c.block_norms(j) == 0) for j in (1, 2))

    def test_identity_by_quadrature(self):
        c = decompose(lambda x: np.asarray(x).reshape(-1), 2, dim=1)
        assert c.levels[0][0, 0] == pytest.approx(0.5, abs=1e-14)
        assert c.levels[0][0, 1] == pytest.approx(-0.25, abs=1e-14)
        np.testing.assert_allclose(c.levels[1][:, 1], -(2**-0.5) / 8, atol=1e-14)

    def test_quadrature_matches_exact_path(self):
        rng = np.random.default_rng(3)
        step = DyadicStep(rng.standard_normal((8, 8)))
        exact = decompose(step, 4)
        quad = decompose(lambda x: step(x), 4, dim=2)
        for a, b in zip(exact.levels, quad.levels):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_level_limit(self):
        with pytest.raises(LevelError):
            decompose(DyadicStep([1.0, 0.0]), 30)

    def test_block_sizes(self):
        c = decompose(DyadicStep(np.arange(16.0).reshape(4, 4)), 3)
        assert len(c.block(DyadicCube(0, (0, 0))).coefficients) == 4
        assert len(c.block(DyadicCube(1, (1, 0))).coefficients) == 3
        blk = c.block(DyadicCube(1, (1, 0)))
        assert blk.block_norm**2 == pytest.approx(sum(v * v for v in blk.coefficients.values()), rel=1e-12)


class TestProjection:
    def test_half_indicator(self):
        c = decompose(DyadicStep([1.0, 0.0]), 3)
        assert project_Pj(c, 1, 0.2) == 1.0
        assert project_Pj(c, 0, 0.2) == 0.5
        assert detail_Qj(c, 0, 0.2) == 0.5

    def test_constant_has_no_detail(self):
        c = decompose(DyadicStep(np.ones(4)), 3)
        for j in range(3):
            assert detail_Qj(c, j, 0.37) == 0.0

    def test_telescoping(self):
        rng = np.random.default_rng(1)
        c = decompose(DyadicStep(rng.standard_normal(32)), 5)
        x = rng.random((1000, 1))
        total = project_Pj(c, 0, x) + sum(detail_Qj(c, j, x) for j in range(5))
        np.testing.assert_allclose(total, project_Pj(c, 5, x), atol=1e-12)

    @settings(max_examples=30)
    @given(st.integers(1, 2), st.integers(0, 4), st.integers(0, 2**31))
    def test_perfect_reconstruction(self, d, L, seed):
        rng = np.random.default_rng(seed)
        f = DyadicStep(rng.standard_normal((1 << L,) * d))
        J = 5 if d == 1 else 4
        c = decompose(f, J)
        n = 1 << J
        mids = (np.arange(n) + 0.5) / n
        grid = np.stack([g.ravel() for g in np.meshgrid(*([mids] * d), indexing="ij")], axis=1)
        np.testing.assert_allclose(project_Pj(c, J, grid), f(grid), atol=1e-12)

    def test_parseval(self):
        rng = np.random.default_rng(2)
        f = DyadicStep(rng.standard_normal((16, 16)))
        c = decompose(f, 4)
        energy = float(np.mean(f.cell_averages(4) ** 2))
        assert c.total_energy() == pytest.approx(energy, abs=1e-12)


class TestText:
    def test_round_trip(self):
        rng = np.random.default_rng(5)
        c = decompose(DyadicStep(rng.standard_normal((4, 4))), 3)
        back = CoeffTree.from_text(c.to_text())
        for a, b in zip(c.levels, back.levels):
            np.testing.assert_array_equal(a, b)

    def test_line_layout(self):
        text = decompose(DyadicStep([1.0, 0.0]), 1).to_text()
        assert text.splitlines()[0] == "0 0 0 0.5"

    def test_malformed(self):
        with pytest.raises(ValueError):
            CoeffTree.from_text("0 0 1\n")
        with pytest.raises(ValueError):
            CoeffTree.from_text("")
