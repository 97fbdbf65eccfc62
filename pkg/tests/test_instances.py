import json

import pytest
from hypothesis import given, settings, strategies as st

from kometo.fidelity import Cutoff, ExpDecay, FidelitySchedule, PolyDecay
from kometo.instances import (BranchRule, SmoothnessProfile, TreeInstance, TruncatedTree, eval_tree_fidelity,
                              eval_tree_target, make_depth_limited_instance, make_width_limited_family,
                              near_optimal_count, random_tree_instance, verify_membership)

HALF = SmoothnessProfile.with_min_constant(1, 0.5, 0, 2)
DIM1 = SmoothnessProfile.with_min_constant(1, 0.5, 1, 2)


@pytest.fixture
def leftmost():
    return make_depth_limited_instance(HALF, 3, BranchRule("constant", 0), Cutoff(1))


class TestProfile:
    def test_derived_constants(self):
        assert HALF.h0 == 1 and HALF.C_min == 2.0 and HALF.d_max == pytest.approx(1.0)
        assert DIM1.C_min == pytest.approx(1.0)
        assert DIM1.width_limit(3) == 8

    @pytest.mark.parametrize("kw", [dict(nu=0), dict(rho=1.0), dict(d=-1), dict(K=1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SmoothnessProfile(**kw)


class TestTarget:
    def test_two_step_descent(self, leftmost):
        assert eval_tree_target(leftmost, (0.3,)) == -0.5

    def test_on_branch_and_off_tree(self, leftmost):
        assert eval_tree_target(leftmost, (0.0,)) == 0.0
        assert eval_tree_target(leftmost, (0.9,)) == -1.0

    def test_fidelity_is_min_with_bias(self, leftmost):
        sched = FidelitySchedule(PolyDecay(1, 1))
        z = sched.fidelity_for_cost(10.0)
        assert eval_tree_fidelity(leftmost, (0.0,), z, sched) == pytest.approx(-0.1)
        assert eval_tree_fidelity(leftmost, (0.3,), z, sched) == -0.5
        assert leftmost.fidelity((0.3,), 0.5, 0.0) == leftmost.target((0.3,))

    @given(st.floats(0, 1))
    def test_non_positive(self, x):
        inst = make_depth_limited_instance(HALF, 4, BranchRule("random", seed=1))
        assert -1.0 <= inst.target((x,)) <= 0.0


class TestVerifier:
    def test_single_branch_passes(self, leftmost):
        assert verify_membership(leftmost, 20).passed

    def test_constant_below_minimum(self):
        p = SmoothnessProfile(1, 0.5, 0, 1, 2)
        inst = TreeInstance(TruncatedTree(2, [[0], [0, 1], [0]]), p, Cutoff(1))
        rep = verify_membership(inst, 20)
        assert not rep.passed and rep.counterexample["check"] == "profile"

    def test_full_tree_at_max_dimension(self):
        full = TreeInstance(TruncatedTree(2, [list(range(2**g)) for g in range(6)] + [[0]]), DIM1, Cutoff(1))
        assert verify_membership(full, 20).passed

    def test_corrupted_instance_is_located(self):
        tree = TruncatedTree(2, [[0], [0], [0, 1], [0, 1, 2], [0]])
        rep = verify_membership(TreeInstance(tree, HALF, Cutoff(1)), 20)
        assert not rep.passed
        assert rep.counterexample == {"check": "near_optimality", "depth": 3, "count": 4, "limit": 2.0,
                                      "tree_depth": 2, "tree_nodes": 2}
        assert "FAIL" in str(rep)

    def test_near_optimal_count(self, leftmost):
        assert [near_optimal_count(leftmost, h) for h in range(4)] == [1, 2, 2, 2]


class TestConstructors:
    def test_width_family_size(self):
        fam = make_width_limited_family(DIM1, 3, 3)
        assert len(fam) == 16
        assert all(verify_membership(inst, 20).passed for inst in fam)

    def test_width_family_s_zero(self):
        fam = make_width_limited_family(HALF, 4, 0)
        assert len(fam) == 2
        anchors = [inst.tree.nodes()[-1] for inst in fam]
        assert anchors == [[0], [1]]
        assert all(inst.tree.nodes()[:-1] == fam[0].tree.nodes()[:-1] for inst in fam)

    def test_width_family_infeasible(self):
        with pytest.raises(ValueError):
            make_width_limited_family(HALF, 3, 2)

    def test_depth_limited(self):
        inst = make_depth_limited_instance(HALF, 5, BranchRule("random", seed=7))
        assert verify_membership(inst, 20).passed
        h = 40
        g, i = inst.tree.branch_key(h)
        x = inst.partition.cell_at(g, i).representative
        assert inst.cell_sup(g, i) == 0.0
        assert inst.target(x) >= -HALF.nu * HALF.rho**h

    def test_leftmost_optimum(self, leftmost):
        assert leftmost.target((0.0,)) == 0.0
        assert leftmost.tree.branch_key(30) == (30, 0)

    @settings(max_examples=15)
    @given(seed=st.integers(0, 10**6), d=st.sampled_from([0.0, 0.5, 1.0]),
           model=st.sampled_from([Cutoff(1), PolyDecay(), ExpDecay()]))
    def test_random_trees_verify(self, seed, d, model):
        p = SmoothnessProfile.with_min_constant(1, 0.5, d, 2)
        inst = random_tree_instance(p, model, 10, seed)
        rep = verify_membership(inst, 20)
        assert rep.passed, str(rep)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        inst = random_tree_instance(DIM1, ExpDecay(2, 1, 0.5), 8, seed=11)
        path = tmp_path / "t.json"
        inst.save(path)
        back = TreeInstance.load(path)
        assert back.to_dict() == inst.to_dict()
        assert json.loads(path.read_text())["nodes"] == inst.tree.nodes()
        xs = [(k / 97,) for k in range(97)]
        assert [back.target(x) for x in xs] == [inst.target(x) for x in xs]

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"arity": 2, "nodes": [[1]]}))
        with pytest.raises((ValueError, KeyError)):
            TreeInstance.load(path)
