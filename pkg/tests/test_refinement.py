import math

import numpy as np
import pytest

from gmsa.approximation import threshold
from gmsa.dyadic import DyadicCube, ProperTree, children
from gmsa.envs import DyadicStepMRP
from gmsa.refinement import (
    GMSAConfig,
    initial_basis,
    initial_state,
    refine_basis,
    run_gmsa,
)
from gmsa.wavelets import decompose, eval_atom

STEP = dict(eta=0.05, patience=200, alpha=0.01, j_max=6)


def C(j, *k):
    return DyadicCube(j, tuple(k))


class TestInitialBasis:
    @pytest.mark.parametrize("d,n", [(1, 2), (2, 4), (4, 16)])
    def test_sizes(self, d, n):
        b = initial_basis(d)
        assert b.n == n
        assert all(a.cube == C(0, *([0] * d)) for a in b.atoms)

    @pytest.mark.parametrize("d", [0, 5])
    def test_unsupported(self, d):
        with pytest.raises(ValueError):
            initial_basis(d)


class TestRefineBasis:
    def test_one_step(self):
        st = initial_state(1)
        new, refined, norms = refine_basis(st, np.array([0.3, 0.4]), 0.1)
        assert refined == {C(0, 0)}
        assert norms[C(0, 0)] == pytest.approx(0.5)
        assert [a.cube for a in new.basis.atoms] == [C(1, 0), C(1, 1)]
        assert all(a.vertex == (1,) for a in new.basis.atoms)
        assert set(new.tree) == {C(0, 0), C(1, 0), C(1, 1)}
        assert new.n_frozen == 2

    def test_nothing_refined(self):
        _, refined, _ = refine_basis(initial_state(2), np.full(4, 1e-4), 0.1)
        assert refined == set()

    def test_only_newest_layer_tested(self):
        st, _, _ = refine_basis(initial_state(1), np.array([0.0, 1.0]), 0.1)
        st, refined, norms = refine_basis(st, np.array([0.5, 0.0]), 0.1)
        assert set(norms) == {C(1, 0), C(1, 1)}
        assert refined == {C(1, 0)}
        assert [a.cube for a in st.basis.atoms] == [C(2, 0), C(2, 1)]

    def test_frozen_value_absorbs_layer(self):
        theta = np.array([0.25, -0.5])
        st, _, _ = refine_basis(initial_state(1), theta, 0.1)
        for x in (0.1, 0.6, 1.0):
            expected = sum(t * eval_atom(a, np.array([x])) for t, a in zip(theta, initial_basis(1).atoms))
            assert st.frozen_value(np.array([x])) == pytest.approx(expected)

    def test_depth_limit(self):
        st = initial_state(1)
        for _ in range(3):
            st, _, _ = refine_basis(st, np.ones(st.basis.n), 0.1, j_max=2)
        assert st.tree.depth == 2
        assert st.basis.n == 0

    def test_theta_shape_checked(self):
        with pytest.raises(ValueError):
            refine_basis(initial_state(1), np.zeros(3), 0.1)

    def test_partition_variant_one_cell_per_layer(self):
        st = initial_state(2, "constant", j_max=4)
        rng = np.random.default_rng(0)
        for _ in range(3):
            st, _, _ = refine_basis(st, rng.standard_normal(st.basis.n), 0.5, j_max=4)
            vol = sum(c.volume for c in st.leaves)
            assert vol == pytest.approx(1.0)
            for x in rng.random((200, 2)):
                b = st.basis(x)
                assert np.count_nonzero(b) == 1
            assert isinstance(st.tree, ProperTree)


class TestRun:
    def test_zero_reward(self):
        env = DyadicStepMRP(values=(0.0, 0.0), gamma=0.5)
        value, rep = run_gmsa(env, GMSAConfig(gamma=0.5, patience=20))
        assert rep.converged and len(rep.phases) == 1
        assert rep.phases[0].refined_count == 0
        assert value(np.array([0.3])) == 0.0
        assert set(rep.tree) == {C(0, 0)}

    def test_recovers_step_support(self):
        env = DyadicStepMRP(gamma=0.5)
        target = threshold(decompose(env.value_function(), 8), 1e-9).tree
        value, rep = run_gmsa(env, GMSAConfig(gamma=0.5, seed=3, **STEP))
        assert rep.converged
        assert all(c in rep.tree for c in target)
        assert rep.tree.depth <= target.depth + 1

    def test_basis_grows_and_depth_bounded(self):
        env = DyadicStepMRP(values=np.random.default_rng(0).random(16), gamma=0.3)
        _, rep = run_gmsa(env, GMSAConfig(gamma=0.3, eta=0.02, patience=100, alpha=0.01, j_max=3))
        sizes = rep.basis_sizes
        assert all(a <= b for a, b in zip(sizes, sizes[1:]))
        assert rep.tree.depth <= 3

    def test_deterministic(self):
        env = DyadicStepMRP(gamma=0.5)
        a = run_gmsa(env, GMSAConfig(gamma=0.5, seed=7, **STEP))[1]
        b = run_gmsa(env, GMSAConfig(gamma=0.5, seed=7, **STEP))[1]
        assert a.summary_text() == b.summary_text()
        assert a.transcript.to_csv() == b.transcript.to_csv()

    def test_bootstrap_uses_frozen_plus_layer(self):
        env = DyadicStepMRP(gamma=0.5)
        rows = []
        run_gmsa(env, GMSAConfig(gamma=0.5, seed=1, **STEP), hook=lambda *a: rows.append(a))
        rng = np.random.default_rng(0)
        picks = rng.choice(len(rows), 100, replace=False)
        phases = {id(r[5]) for r in rows}
        assert len(phases) > 1
        for i in picks:
            x, v_frozen, v_layer, target, delta, state = rows[i]
            oracle = sum(
                float(theta @ np.array([eval_atom(a, x) for a in layer.atoms])) for layer, theta in state.layers
            )
            assert v_frozen == pytest.approx(oracle, abs=1e-12)
            assert delta == pytest.approx(target - (v_frozen + v_layer), abs=1e-12)

    def test_episode_budget_continues_last_layer(self):
        env = DyadicStepMRP(gamma=0.5, cap=20)
        _, rep = run_gmsa(env, GMSAConfig(gamma=0.5, episodes=400, **STEP))
        assert len(rep.transcript.episodes) == 400
        assert rep.converged

    def test_summary_text(self):
        env = DyadicStepMRP(gamma=0.5)
        _, rep = run_gmsa(env, GMSAConfig(gamma=0.5, **STEP))
        lines = rep.summary_text().splitlines()
        assert lines[0] == "phase,basisSize,refinedCount,minBlockNorm,maxBlockNorm,steps"
        assert len([ln for ln in lines[1:] if not ln.startswith("#")]) == len(rep.phases)
        assert rep.depth_histogram()[0] == 1

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GMSAConfig(eta=0.0)
        with pytest.raises(ValueError):
            GMSAConfig(max_phases=0)
        with pytest.raises(ValueError):
            GMSAConfig(final_training="never")

    def test_children_augmented_flag(self):
        env = DyadicStepMRP(gamma=0.5)
        _, full = run_gmsa(env, GMSAConfig(gamma=0.5, seed=2, **STEP))
        _, small = run_gmsa(env, GMSAConfig(gamma=0.5, seed=2, children_augmented=False, **STEP))
        assert small.tree <= full.tree
        assert all(c in full.tree for cube in small.tree for c in children(cube) if cube in full.state.passed)


def test_piecewise_constant_values_carry_over():
    env = DyadicStepMRP(gamma=0.0)
    value, rep = run_gmsa(env, GMSAConfig(gamma=0.0, basis="constant", eta=0.05, patience=200, alpha=0.01, j_max=5))
    assert rep.converged
    vol = sum(c.volume for c in rep.state.leaves)
    assert math.isclose(vol, 1.0)
    assert value(np.array([0.6])) == pytest.approx(1.0, abs=0.1)
    assert value(np.array([0.9])) == pytest.approx(0.5, abs=0.1)
