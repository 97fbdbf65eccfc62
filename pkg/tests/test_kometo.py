import math

import pytest
from hypothesis import given, settings, strategies as st

from kometo.algorithm import (KometoConfig, KometoState, cross_validate, effective_budget, exploration_schedule,
                              floor_log, open_cell, optimize_effective_budget, predicted_spend, run,
                              run_with_state, select_and_open)
from kometo.fidelity import CallableFunction, Cutoff, FidelityEnvironment, FidelitySchedule, PolyDecay
from kometo.instances import SmoothnessProfile, random_tree_instance
from kometo.partition import Box


def step_fn(left, right):
    return CallableFunction(lambda x: left if x[0] < 0.5 else right, Box.unit(1), max(left, right))


def fresh_state(fn, model=Cutoff(1), budget=1000.0, eff=10, **flags):
    env = FidelityEnvironment(fn, FidelitySchedule(model), budget)
    return KometoState.create(KometoConfig(budget, 2, **flags), env, eff)


class TestEffectiveBudget:
    @pytest.mark.parametrize("lam, expected", [(1e6, 719), (1000, 2), (1, 0)])
    def test_closed_form(self, lam, expected):
        assert effective_budget(lam, 2) == expected

    def test_rejects_small_budget(self):
        with pytest.raises(ValueError):
            effective_budget(0.5)

    @given(st.floats(1, 1e12))
    def test_floor_log(self, x):
        j = floor_log(x)
        assert math.exp(j) <= x * (1 + 1e-15) and x < math.exp(j + 1)


class TestSchedule:
    def test_first_depth(self):
        js = [j for h, m, j in exploration_schedule(10) if h == 1]
        assert js == [2, 1, 1, 0, 0, 0, 0, 0, 0, 0]

    def test_last_depth(self):
        assert [(m, j) for h, m, j in exploration_schedule(10) if h == 10] == [(1, 0)]

    @given(st.integers(1, 400))
    def test_harmonic_bound(self, L):
        steps = list(exploration_schedule(L))
        assert len(steps) <= L * (math.log(L) + 1)
        assert all(j >= 0 for _, _, j in steps)


class TestOpenCell:
    def test_eager_charges_all_levels(self):
        state = fresh_state(step_fn(0.0, 0.0), PolyDecay(), lazy_child_evaluation=False)
        assert open_cell(state, state.tree.cell(0, 0), 2)
        assert len(state.env.ledger.events) == 6
        total = 2 * (1 + math.e + math.e**2)
        assert state.env.spent == pytest.approx(total)
        assert total < 2 * math.e**3 / (math.e - 1)

    def test_level_zero(self):
        state = fresh_state(step_fn(0.0, 0.0), PolyDecay(), lazy_child_evaluation=False)
        open_cell(state, state.tree.cell(0, 0), 0)
        assert [e.cost for e in state.env.ledger.events] == [1.0, 1.0]

    def test_lazy_defers_charges(self):
        state = fresh_state(step_fn(0.0, 0.0), PolyDecay())
        open_cell(state, state.tree.cell(0, 0), 2)
        assert state.env.spent == 0
        assert state.tree.available((1, 0), 2)

    def test_reopen_lower_is_noop(self):
        state = fresh_state(step_fn(0.0, 0.0))
        root = state.tree.cell(0, 0)
        assert open_cell(state, root, 2)
        assert not open_cell(state, root, 1)
        assert state.tree.opened[root.key] == 2


class TestSelect:
    def _opened_root(self, left, right):
        state = fresh_state(step_fn(left, right))
        open_cell(state, state.tree.cell(0, 0), 0)
        return state

    def test_argmax(self):
        state = self._opened_root(0.3, 0.7)
        assert select_and_open(state, 1, 0).key == (1, 1)

    def test_tie_goes_to_lowest_index(self):
        state = self._opened_root(0.5, 0.5)
        assert select_and_open(state, 1, 0).key == (1, 0)

    def test_empty_depth_is_skipped(self):
        state = self._opened_root(0.5, 0.5)
        assert select_and_open(state, 2, 0) is None
        assert state.skips[-1][-1] == "empty"

    def test_unaffordable_step_is_skipped(self):
        state = fresh_state(step_fn(0.3, 0.7), budget=1.5)
        open_cell(state, state.tree.cell(0, 0), 0)
        assert select_and_open(state, 1, 0) is None
        assert state.skips[-1][-1] == "budget"
        assert state.env.spent == 0


class TestCrossValidation:
    def test_single_level(self):
        env = FidelityEnvironment(step_fn(0.0, -1.0), FidelitySchedule(Cutoff(1)), 100)
        trace, state = run_with_state(KometoConfig(100), env, eff_budget=2)
        assert state.j_max == 0
        assert state.final_values == {}
        assert trace.output == state.tree.cell(*state.candidates[0]).representative

    def test_high_cost_evaluation_reverses_ranking(self):
        # bias 0.5 at cost 1, essentially none from cost e upward; the low
        # level prefers the right half, the exact value prefers the left one
        model = PolyDecay(0.5, 50.0)
        fn = CallableFunction(lambda x: 0.0 if x[0] < 0.5 else -0.2, Box.unit(1), 0.0,
                              family=lambda x, z, b: -b if x[0] < 0.5 else -0.2 + b)
        env = FidelityEnvironment(fn, FidelitySchedule(model), 1000)
        trace, state = run_with_state(KometoConfig(1000), env, eff_budget=3)
        assert state.j_max == 1
        low, high = (state.tree.cell(*state.candidates[j]) for j in (0, 1))
        assert low.representative[0] > 0.5 > high.representative[0]
        assert state.tree.values[(*low.key, 0)] > state.tree.values[(*high.key, 1)]
        assert state.final_values[1] > state.final_values[0]
        assert trace.output == high.representative
        assert trace.regret == 0.0


class TestRun:
    def test_degenerate_budget(self):
        env = FidelityEnvironment(step_fn(0.0, -1.0), FidelitySchedule(PolyDecay()), 1)
        trace = run(KometoConfig(1), env)
        assert trace.output == (0.5,)
        assert trace.spent == 0 and trace.effective_budget == 0

    @settings(max_examples=30)
    @given(lam=st.floats(1, 3e4), seed=st.integers(0, 5), lazy=st.booleans(), opt=st.booleans(),
           reuse=st.booleans(), K=st.sampled_from([2, 3]))
    def test_spend_within_budget(self, lam, seed, lazy, opt, reuse, K):
        p = SmoothnessProfile.with_min_constant(1, 0.5, 0.5 if K == 2 else 0.0, K)
        inst = random_tree_instance(p, PolyDecay(), 8, seed)
        env = FidelityEnvironment(inst, FidelitySchedule(PolyDecay()), lam)
        trace = run(KometoConfig(lam, K, opt, lazy, reuse), env)
        assert trace.spent <= lam
        assert env.ledger.audit()

    def test_deterministic(self):
        p = SmoothnessProfile.with_min_constant(1, 0.5, 0.5, 2)
        runs = []
        for _ in range(2):
            env = FidelityEnvironment(random_tree_instance(p, PolyDecay(), 10, 3), FidelitySchedule(PolyDecay()), 5e4)
            t = run(KometoConfig(5e4), env)
            runs.append((t.output, t.regret, t.opened, env.ledger.events))
        assert runs[0] == runs[1]


class TestBudgetOptimization:
    def test_bracketing_at_one_million(self):
        L = optimize_effective_budget(1e6, 2)
        assert L >= effective_budget(1e6, 2)
        assert predicted_spend(L, 2) <= 1e6 < predicted_spend(L + 1, 2)

    def test_monotone_prediction(self):
        spends = [predicted_spend(L, 3, reuse) for reuse in (True, False) for L in range(0, 300)]
        for block in (spends[:300], spends[300:]):
            assert all(a <= b for a, b in zip(block, block[1:]))

    @given(st.floats(1, 1e5), st.sampled_from([2, 3, 4]))
    def test_at_least_closed_form(self, lam, K):
        assert optimize_effective_budget(lam, K) >= effective_budget(lam, K)
