import math

import pytest
from hypothesis import given, strategies as st

from kometo.partition import Box, DomainError, Partition, PartitionTree, children_keys, parent_key


@pytest.fixture
def unit1():
    return Partition(Box.unit(1), 2)


@pytest.fixture
def unit2():
    return Partition(Box.unit(2), 2)


class TestBox:
    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            Box((0.0,), (0.0,))

    def test_midpoint_and_contains(self):
        b = Box.from_pairs([[-5, 10], [0, 15]])
        assert b.midpoint() == (2.5, 7.5)
        assert b.contains((10.0, 0.0))
        assert not b.contains((10.5, 0.0))
        assert not b.contains((1.0,))


class TestSplit:
    def test_bisects_unit_interval(self, unit1):
        a, b = unit1.split(unit1.root())
        assert (a.depth, a.index, a.lower, a.upper) == (1, 0, (0.0,), (0.5,))
        assert (b.depth, b.index, b.lower, b.upper) == (1, 1, (0.5,), (1.0,))

    def test_dimension_cycles_with_depth(self, unit2):
        left, right = unit2.split(unit2.root())
        assert (left.lower, left.upper) == ((0.0, 0.0), (0.5, 1.0))
        low, high = unit2.split(right)
        # depth-1 cells split along the second coordinate
        assert (low.lower, low.upper) == ((0.5, 0.0), (1.0, 0.5))
        assert (high.lower, high.upper) == ((0.5, 0.5), (1.0, 1.0))

    def test_child_indices(self, unit1):
        cell = unit1.cell_at(2, 3)
        assert [c.key for c in unit1.split(cell)] == [(3, 6), (3, 7)]

    def test_three_way_split_keeps_parent_point_in_the_middle(self):
        p = Partition(Box.unit(1), 3)
        kids = p.split(p.root())
        assert [c.upper[0] for c in kids] == pytest.approx([1 / 3, 2 / 3, 1.0])
        assert kids[1].representative == p.root().representative


class TestRepresentative:
    def test_examples(self, unit1, unit2):
        assert unit1.cell_at(1, 0).representative == (0.25,)
        assert unit2.cell_at(2, 1).representative == (0.25, 0.75)
        p = Partition(Box.from_pairs([[-5, 10], [0, 15]]), 2)
        assert p.root().representative == (2.5, 7.5)

    @given(h=st.integers(0, 12), i=st.integers(0, 4095), k=st.sampled_from([2, 3, 4]), dim=st.integers(1, 3))
    def test_midpoint_of_bounds(self, h, i, k, dim):
        p = Partition(Box.unit(dim), k)
        i = i % k**h
        cell = p.cell_at(h, i)
        assert cell.bounds.contains(cell.representative)
        assert cell.representative == pytest.approx(cell.bounds.midpoint(), abs=1e-15)


class TestCellContaining:
    def test_examples(self, unit1):
        assert unit1.cell_containing((0.3,), 2).key == (2, 1)
        assert unit1.cell_containing((0.5,), 1).key == (1, 0)
        assert unit1.cell_containing((0.99,), 3).key == (3, 7)

    def test_outside_domain(self, unit1):
        with pytest.raises(DomainError):
            unit1.cell_containing((1.5,), 2)

    @given(x=st.floats(0, 1), y=st.floats(0, 1), h=st.integers(0, 10))
    def test_returned_cell_contains_point(self, x, y, h):
        p = Partition(Box.unit(2), 2)
        cell = p.cell_containing((x, y), h)
        assert cell.bounds.contains((x, y))
        assert cell.depth == h


class TestStructure:
    @given(h=st.integers(0, 6), k=st.sampled_from([2, 3, 5]))
    def test_children_tile_parent(self, h, k):
        p = Partition(Box.unit(2), k)
        for i in range(0, k**h, max(1, k**h // 7)):
            cell = p.cell_at(h, i)
            kids = p.split(cell)
            s = p.split_dim(h)
            assert kids[0].lower[s] == cell.lower[s] and kids[-1].upper[s] == cell.upper[s]
            for a, b in zip(kids, kids[1:]):
                assert a.upper[s] == b.lower[s]
            assert math.fsum(c.upper[s] - c.lower[s] for c in kids) == pytest.approx(cell.upper[s] - cell.lower[s])

    @given(h=st.integers(1, 20), i=st.integers(0, 10**6), k=st.integers(2, 5))
    def test_parent_round_trip(self, h, i, k):
        i = i % k**h
        par = parent_key((h, i), k)
        assert (h, i) in children_keys(par, k)

    def test_depth_level_covers_domain(self, unit2):
        cells = [unit2.root()]
        for _ in range(5):
            cells = [c for p in cells for c in unit2.split(p)]
        area = math.fsum((c.upper[0] - c.lower[0]) * (c.upper[1] - c.lower[1]) for c in cells)
        assert area == pytest.approx(1.0)
        assert len({c.key for c in cells}) == 32


class TestPartitionTree:
    def test_lazy_cells_and_levels(self, unit1):
        t = PartitionTree(unit1)
        assert t.cell(3, 5) == unit1.cell_at(3, 5)
        assert t.make_available((1, 0), 2) == [0, 1, 2]
        assert t.make_available((1, 0), 1) == []
        assert t.available((1, 0), 2) and not t.available((1, 0), 3)

    def test_parent_closed(self, unit1):
        t = PartitionTree(unit1)
        for key in [(1, 0), (1, 1), (2, 1)]:
            t.make_available(key, 0)
        assert t.is_parent_closed(0)
        t.make_available((3, 6), 0)
        assert not t.is_parent_closed(0)
