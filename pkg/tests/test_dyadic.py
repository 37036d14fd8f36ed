import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmsa.dyadic import (
    J_MAX,
    CubeSet,
    DyadicCube,
    ProperTree,
    children,
    complete_to_proper_tree,
    locate,
    parent,
    root,
)
from gmsa.errors import DomainError, LevelError, NoParentError


def C(j, *k):
    return DyadicCube(j, tuple(k))


@st.composite
def cubes(draw, dim=None, max_level=8):
    d = draw(st.integers(1, 3)) if dim is None else dim
    j = draw(st.integers(0, max_level))
    k = tuple(draw(st.integers(0, (1 << j) - 1)) for _ in range(d))
    return DyadicCube(j, k)


class TestChildrenParent:
    def test_children_1d_root(self):
        assert children(C(0, 0)) == [C(1, 0), C(1, 1)]

    def test_children_2d_root(self):
        assert children(C(0, 0, 0)) == [C(1, 0, 0), C(1, 0, 1), C(1, 1, 0), C(1, 1, 1)]

    def test_children_of_right_half(self):
        assert children(C(1, 1)) == [C(2, 2), C(2, 3)]

    def test_parent_examples(self):
        assert parent(C(2, 3)) == C(1, 1)
        assert parent(C(1, 1, 0)) == C(0, 0, 0)

    def test_root_has_no_parent(self):
        with pytest.raises(NoParentError):
            parent(C(0, 0))

    @given(cubes(max_level=10))
    def test_parent_of_children(self, cube):
        for c in children(cube):
            assert parent(c) == cube
            assert c.level == cube.level + 1

    @given(cubes())
    def test_children_tile_parent(self, cube):
        kids = children(cube)
        assert len(kids) == 1 << cube.dim
        assert sum(c.volume for c in kids) == pytest.approx(cube.volume, rel=1e-15)
        assert cube.volume == 2.0 ** (-cube.level * cube.dim)
        for c in kids:
            assert np.all(c.lower >= cube.lower) and np.all(c.upper <= cube.upper)
        lows = {tuple(c.lower) for c in kids}
        assert len(lows) == len(kids)


class TestCube:
    def test_equality_by_level_index_dim(self):
        assert C(1, 0) == C(1, 0)
        assert C(1, 0) != C(1, 0, 0)
        assert C(1, 0) != C(2, 0)

    @pytest.mark.parametrize("j,k", [(0, (1,)), (1, (2,)), (2, (-1,))])
    def test_index_out_of_range(self, j, k):
        with pytest.raises(ValueError):
            DyadicCube(j, k)

    def test_level_limit(self):
        DyadicCube(J_MAX, (0,))
        with pytest.raises(LevelError):
            DyadicCube(J_MAX + 1, (0,))

    @given(cubes(max_level=12))
    def test_key_round_trip(self, cube):
        assert DyadicCube.from_key(cube.key) == cube

    def test_support(self):
        c = C(2, 1, 3)
        np.testing.assert_array_equal(c.lower, [0.25, 0.75])
        np.testing.assert_array_equal(c.upper, [0.5, 1.0])


class TestLocate:
    def test_examples(self):
        assert locate(0.3, 2) == C(2, 1)
        assert locate(1.0, 1) == C(1, 1)
        assert locate((0.6, 0.1), 1) == C(1, 1, 0)

    def test_half_open_cells(self):
        assert locate(0.5, 1) == C(1, 1)
        assert locate(0.25, 2) == C(2, 1)

    @pytest.mark.parametrize("x", [-0.1, 1.0001, float("nan")])
    def test_outside_unit_cube(self, x):
        with pytest.raises(DomainError):
            locate(x, 2)

    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=3), st.integers(1, 20))
    def test_nested(self, x, j):
        assert locate(x, j) in children(locate(x, j - 1))
        assert locate(x, j).contains(x)


class TestProperTree:
    def test_completion_examples(self):
        assert set(complete_to_proper_tree([C(2, 3)])) == {C(0, 0), C(1, 1), C(2, 3)}
        assert set(complete_to_proper_tree([], dim=1)) == {C(0, 0)}
        got = set(complete_to_proper_tree([C(2, 0), C(2, 3)]))
        assert got == {C(0, 0), C(1, 0), C(1, 1), C(2, 0), C(2, 3)}

    def test_rejects_missing_parent(self):
        with pytest.raises(ValueError):
            ProperTree([C(0, 0), C(2, 3)], 1)

    def test_rejects_missing_root(self):
        with pytest.raises(ValueError):
            ProperTree([C(1, 0)], 1)

    @given(st.integers(1, 3).flatmap(lambda d: st.lists(cubes(dim=d, max_level=6), max_size=20)))
    def test_completion_is_minimal_proper_tree(self, cs):
        if not cs:
            return
        d = cs[0].dim
        tree = complete_to_proper_tree(cs, d)
        assert root(d) in tree
        for c in tree:
            if c.level:
                assert parent(c) in tree
        expected = {root(d)}
        for c in cs:
            while True:
                expected.add(c)
                if c.level == 0:
                    break
                c = parent(c)
        assert set(tree) == expected
        assert complete_to_proper_tree(tree, d) == tree

    def test_leaves_and_histogram(self):
        tree = complete_to_proper_tree([C(2, 0), C(1, 1)])
        assert tree.leaves() == [C(1, 1), C(2, 0)]
        assert tree.depth_histogram() == {0: 1, 1: 2, 2: 1}
        assert tree.depth == 2


def test_cubeset_slots():
    cs = CubeSet([C(1, 0), C(2, 3), C(1, 1)])
    assert cs.levels() == [1, 2]
    for j in cs.levels():
        assert all(c.level == j for c in cs[j])


def test_every_level_covered_once():
    for j, d in itertools.product(range(4), (1, 2)):
        n = 1 << j
        pts = (np.arange(n) + 0.5) / n
        seen = {locate(x, j) for x in itertools.product(pts, repeat=d)}
        assert len(seen) == n**d
