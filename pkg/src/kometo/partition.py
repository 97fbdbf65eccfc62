"""Hierarchical K-ary partitioning of a box domain.

Cells are addressed by ``(h, i)``: depth ``h`` and index ``i`` in ``[0, K**h)``.
The children of ``(h, i)`` are ``(h + 1, K*i + l)`` for ``l`` in ``[0, K)``,
ordered by ascending coordinate along the split dimension ``h mod D``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence

Key = tuple[int, int]
Point = tuple[float, ...]


class DomainError(ValueError):
    """Raised when a point or cost lies outside the admissible domain."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``prod_k [lower_k, upper_k]``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) == 0 or len(lo) != len(hi):
            raise DomainError("box bounds must be non-empty and of equal length")
        for a, b in zip(lo, hi):
            if not a < b:
                raise DomainError(f"degenerate interval [{a}, {b}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def _raw(cls, lower: tuple, upper: tuple) -> "Box":
        # trusted constructor for split(); skips validation
        box = object.__new__(cls)
        object.__setattr__(box, "lower", lower)
        object.__setattr__(box, "upper", upper)
        return box

    @classmethod
    def unit(cls, dim: int = 1) -> "Box":
        return cls((0.0,) * dim, (1.0,) * dim)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "Box":
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def dim(self) -> int:
        return len(self.lower)

    def midpoint(self) -> Point:
        return tuple(a + (b - a) / 2 for a, b in zip(self.lower, self.upper))

    def contains(self, x: Sequence[float]) -> bool:
        if len(x) != len(self.lower):
            return False
        for a, v, b in zip(self.lower, x, self.upper):
            if not a <= v <= b:
                return False
        return True

    def pairs(self) -> list[list[float]]:
        return [[a, b] for a, b in zip(self.lower, self.upper)]


def _edges(lo: float, hi: float, k: int) -> list[float]:
    # l/k is exact for l = k/2, so the central edge of an even split is the midpoint
    edges = [lo + (hi - lo) * (l / k) for l in range(k)]
    edges.append(hi)
    return edges


class Cell(NamedTuple):
    """A cell ``P_{h,i}``: its address, corner coordinates and representative point."""

    depth: int
    index: int
    lower: Point
    upper: Point
    representative: Point

    @property
    def key(self) -> Key:
        return (self.depth, self.index)

    @property
    def bounds(self) -> Box:
        return Box._raw(self.lower, self.upper)


@dataclass(frozen=True)
class Partition:
    """Geometry of the K-ary partition of ``domain``.

    Parameters
    ----------
    domain : Box
        The search space.
    arity : int
        Number of children per cell, ``K >= 2``.
    """

    domain: Box
    arity: int = 2

    def __post_init__(self):
        if int(self.arity) != self.arity or self.arity < 2:
            raise ValueError(f"arity must be an integer >= 2, got {self.arity}")

    @property
    def dim(self) -> int:
        return self.domain.dim

    def split_dim(self, h: int) -> int:
        return h % self.domain.dim

    def root(self) -> Cell:
        return Cell(0, 0, self.domain.lower, self.domain.upper, self.domain.midpoint())

    def split(self, cell: Cell) -> list[Cell]:
        """Return the K children of ``cell`` in index order."""
        k = self.arity
        lo, hi = cell.lower, cell.upper
        s = cell.depth % len(lo)
        rep = cell.representative
        edges = _edges(lo[s], hi[s], k)
        mid_child = (k - 1) // 2 if k % 2 else -1
        depth, base = cell.depth + 1, k * cell.index
        children = []
        for l in range(k):
            a, b = edges[l], edges[l + 1]
            if not a < b:
                # below float resolution the interval cannot shrink any further
                a, b = lo[s], hi[s]
            clo = lo[:s] + (a,) + lo[s + 1:]
            chi = hi[:s] + (b,) + hi[s + 1:]
            # only coordinate s moves; odd K keeps the parent's point for the
            # middle child so parent evaluations can be reused exactly
            if l == mid_child:
                point = rep
            else:
                point = rep[:s] + (a + (b - a) / 2,) + rep[s + 1:]
            children.append(Cell(depth, base + l, clo, chi, point))
        return children

    def representative(self, cell: Cell) -> Point:
        return cell.representative

    def child_containing(self, cell: Cell, x: Sequence[float]) -> int:
        """Child offset ``l`` of ``cell`` containing ``x``; boundaries go to the lower index."""
        s = self.split_dim(cell.depth)
        edges = _edges(cell.lower[s], cell.upper[s], self.arity)
        v = x[s]
        for l in range(self.arity - 1):
            if v <= edges[l + 1]:
                return l
        return self.arity - 1

    def path(self, x: Sequence[float], h: int) -> Iterator[Cell]:
        """Yield the cells of depth ``0..h`` containing ``x``."""
        x = tuple(float(v) for v in x)
        if not self.domain.contains(x):
            raise DomainError(f"point {x} outside domain {self.domain}")
        cell = self.root()
        yield cell
        for _ in range(h):
            cell = self.split(cell)[self.child_containing(cell, x)]
            yield cell

    def cell_containing(self, x: Sequence[float], h: int) -> Cell:
        """The unique depth-``h`` cell containing ``x`` (ties to the lower index)."""
        cell = None
        for cell in self.path(x, h):
            pass
        return cell

    def cell_at(self, h: int, i: int) -> Cell:
        """Build cell ``(h, i)`` by descending from the root."""
        if h < 0 or not 0 <= i < self.arity**h:
            raise IndexError(f"no cell ({h}, {i})")
        digits = []
        j = i
        for _ in range(h):
            j, l = divmod(j, self.arity)
            digits.append(l)
        cell = self.root()
        for l in reversed(digits):
            cell = self.split(cell)[l]
        return cell


def parent_key(key: Key, arity: int) -> Optional[Key]:
    h, i = key
    return None if h == 0 else (h - 1, i // arity)


def children_keys(key: Key, arity: int) -> list[Key]:
    h, i = key
    return [(h + 1, arity * i + l) for l in range(arity)]


@dataclass
class PartitionTree:
    """Lazily materialized partition tree with evaluation bookkeeping.

    ``levels[(h, i)]`` is the highest fidelity level ``j`` with ``T_{h,i,j} = 1``
    (all levels ``u <= j`` are then available).  ``values[(h, i, j)]`` stores
    fetched observations and ``opened[(h, i)]`` the level a cell was opened at.
    """

    partition: Partition
    cells: dict[Key, Cell] = field(default_factory=dict)
    levels: dict[Key, int] = field(default_factory=dict)
    values: dict[tuple[int, int, int], float] = field(default_factory=dict)
    opened: dict[Key, int] = field(default_factory=dict)

    def __post_init__(self):
        root = self.partition.root()
        self.cells.setdefault(root.key, root)

    @property
    def arity(self) -> int:
        return self.partition.arity

    @property
    def domain(self) -> Box:
        return self.partition.domain

    def cell(self, h: int, i: int) -> Cell:
        key = (h, i)
        if key not in self.cells:
            if h == 0:
                raise IndexError(f"no cell {key}")
            parent = self.cell(h - 1, i // self.arity)
            self.children(parent)
        return self.cells[key]

    def children(self, cell: Cell) -> list[Cell]:
        keys = children_keys(cell.key, self.arity)
        if keys[0] not in self.cells:
            for child in self.partition.split(cell):
                self.cells[child.key] = child
        return [self.cells[k] for k in keys]

    def make_available(self, key: Key, j: int) -> list[int]:
        """Set ``T = 1`` for levels ``0..j`` of ``key``; return the newly added levels."""
        old = self.levels.get(key, -1)
        if j <= old:
            return []
        self.levels[key] = j
        return list(range(old + 1, j + 1))

    def available(self, key: Key, j: int) -> bool:
        return self.levels.get(key, -1) >= j

    def cell_containing(self, x: Sequence[float], h: int) -> Cell:
        cell = self.partition.cell_containing(x, h)
        return self.cells.setdefault(cell.key, cell)

    def available_set(self, j: int) -> set[Key]:
        return {k for k, top in self.levels.items() if top >= j}

    def is_parent_closed(self, j: int) -> bool:
        """Check the tree property of the level-``j`` evaluated set."""
        keys = self.available_set(j)
        for key in keys:
            p = parent_key(key, self.arity)
            if p is not None and p != (0, 0) and p not in keys:
                return False
        return True
