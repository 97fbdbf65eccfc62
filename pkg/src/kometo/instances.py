"""Piecewise-constant adversarial instances built from truncated trees.

A truncated tree ``T`` is a prefix-closed set of partition cells with at least
one node per depth and a single infinite branch.  It defines the target

    f(x) = -nu * rho**g(x),   g(x) = deepest depth whose tree slice contains x,

(``f = 0`` on the infinite branch) and the fidelities ``f_z = min(f, -zeta(z))``.
Trees are stored explicitly up to a horizon and continued below it by a
deterministic branch rule, so they are finite objects that behave like
infinite ones.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .fidelity import (INF, CostToBiasModel, Cutoff, FidelitySchedule,
                       model_from_dict, model_to_dict)
from .partition import Box, Cell, DomainError, Partition

_TOL = 1e-12


@dataclass(frozen=True)
class SmoothnessProfile:
    """Smoothness parameters ``(nu, rho, d, C)`` for a ``K``-ary partition.

    Parameters
    ----------
    nu : float
        Scale of the optimal-cell guarantee, ``nu > 0``.
    rho : float
        Per-depth shrinkage factor in ``(0, 1)``.
    d : float
        Near-optimality dimension, ``0 <= d <= d_max``.
    C : float
        Constant of the near-optimal cell count.
    K : int
        Partition arity.
    """

    nu: float = 1.0
    rho: float = 0.5
    d: float = 0.0
    C: float = 2.0
    K: int = 2

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if not self.d >= 0:
            raise ValueError("d must be non-negative")
        if int(self.K) != self.K or self.K < 2:
            raise ValueError("K must be an integer >= 2")

    @property
    def log_inv_rho(self) -> float:
        return math.log(1.0 / self.rho)

    @property
    def d_max(self) -> float:
        return math.log(self.K) / self.log_inv_rho

    @property
    def h0(self) -> int:
        return int(math.floor(math.log(3.0) / self.log_inv_rho + _TOL))

    @property
    def C_min(self) -> float:
        return (self.K / self.rho ** (-self.d)) ** self.h0

    def width_limit(self, h: int) -> int:
        """``floor(rho**(-d h))``, the node budget of a truncated tree at depth ``h``."""
        return int(math.floor(self.rho ** (-self.d * h) * (1 + _TOL)))

    def problems(self) -> list[str]:
        out = []
        if self.d > self.d_max * (1 + _TOL):
            out.append(f"d={self.d} exceeds d_max={self.d_max}")
        if self.C < self.C_min * (1 - _TOL):
            out.append(f"C={self.C} below C_min={self.C_min}")
        return out

    def to_dict(self) -> dict:
        return {"nu": self.nu, "rho": self.rho, "d": self.d, "C": self.C, "K": self.K}

    @classmethod
    def with_min_constant(cls, nu=1.0, rho=0.5, d=0.0, K=2) -> "SmoothnessProfile":
        """Profile whose ``C`` is exactly ``C_min``."""
        probe = cls(nu, rho, d, 1.0, K)
        return cls(nu, rho, d, probe.C_min, K)


@dataclass(frozen=True)
class BranchRule:
    """How the infinite branch continues below the explicit horizon.

    ``kind="constant"`` always takes child ``child``; ``kind="random"`` draws
    children from a seeded generator, reproducibly.
    """

    kind: str = "constant"
    child: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("constant", "random"):
            raise ValueError(f"unknown branch rule {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "child": self.child, "seed": self.seed}


class TruncatedTree:
    """Prefix-closed node set with one node at the horizon and an infinite branch.

    Parameters
    ----------
    arity : int
        Partition arity ``K``.
    nodes : sequence of sequences of int
        ``nodes[g]`` lists the node indices at depth ``g``; ``nodes[0] == [0]``
        and the last depth (the horizon) holds a single node, the anchor.
    branch : BranchRule
        Continuation of the branch below the anchor.
    """

    def __init__(self, arity: int, nodes: Sequence[Sequence[int]], branch: BranchRule = BranchRule()):
        self.arity = int(arity)
        self.levels = [frozenset(int(i) for i in level) for level in nodes]
        self.branch = branch
        self._validate()
        self.horizon = len(self.levels) - 1
        (self.anchor,) = self.levels[-1]
        self._branch = [self.anchor]
        self._rng = random.Random(branch.seed) if branch.kind == "random" else None

    def _validate(self):
        K = self.arity
        if not self.levels or self.levels[0] != frozenset({0}):
            raise ValueError("depth 0 must hold exactly the root")
        for g, level in enumerate(self.levels):
            if not level:
                raise ValueError(f"depth {g} is empty")
            for i in level:
                if not 0 <= i < K**g:
                    raise ValueError(f"index {i} out of range at depth {g}")
                if g and i // K not in self.levels[g - 1]:
                    raise ValueError(f"node ({g}, {i}) has no parent in the tree")
        if len(self.levels[-1]) != 1:
            raise ValueError("the horizon depth must hold exactly one node")
        if self.branch.kind == "constant" and not 0 <= self.branch.child < K:
            raise ValueError("constant branch child out of range")

    def branch_index(self, g: int) -> int:
        """Index of the infinite branch at depth ``g >= horizon``."""
        k = g - self.horizon
        while len(self._branch) <= k:
            if self._rng is None:
                l = self.branch.child
            else:
                l = self._rng.randrange(self.arity)
            self._branch.append(self.arity * self._branch[-1] + l)
        return self._branch[k]

    def branch_key(self, g: int) -> tuple[int, int]:
        """Key of the depth-``g`` cell on the infinite branch."""
        if g >= self.horizon:
            return (g, self.branch_index(g))
        return (g, self.anchor // self.arity ** (self.horizon - g))

    def contains(self, g: int, i: int) -> bool:
        if g <= self.horizon:
            return i in self.levels[g]
        return i == self.branch_index(g)

    def count(self, g: int) -> int:
        return len(self.levels[g]) if g <= self.horizon else 1

    def nodes(self) -> list[list[int]]:
        return [sorted(level) for level in self.levels]


class TreeInstance:
    """Target ``f^T`` and fidelities ``min(f^T, -zeta)`` on the unit cube.

    Values at partition representatives are computed symbolically from the
    cell address when a cell hint is given, so they stay exact at depths
    where the cell bounds can no longer be represented in floating point.
    """

    sup = 0.0

    def __init__(self, tree: TruncatedTree, profile: SmoothnessProfile,
                 model: CostToBiasModel, dim: int = 1, max_steps: int = 4096):
        if tree.arity != profile.K:
            raise ValueError("tree arity and profile K differ")
        self.tree = tree
        self.profile = profile
        self.model = model
        self.dim = int(dim)
        self.domain = Box.unit(self.dim)
        self.partition = Partition(self.domain, tree.arity)
        self.max_steps = max_steps
        self._ancestor: dict = {}
        self._below: dict = {}

    # -- exit depths ------------------------------------------------------

    def _deepest_ancestor(self, g: int, i: int) -> int:
        K = self.tree.arity
        path = []
        while True:
            if (g, i) in self._ancestor:
                depth = self._ancestor[(g, i)]
                break
            if self.tree.contains(g, i):
                depth = g
                break
            path.append((g, i))
            g, i = g - 1, i // K
        for key in path:
            self._ancestor[key] = depth
        return depth

    def _rep_exit(self, h: int, i: int) -> Optional[int]:
        """Exit depth of the representative of tree cell ``(h, i)``; ``None`` if on the branch."""
        key = (h, i)
        if key in self._below:
            return self._below[key]
        K, D = self.tree.arity, self.dim
        upper = [False] * D
        g, idx = h, i
        for _ in range(self.max_steps):
            s = g % D
            if upper[s]:
                l = K - 1
            elif K % 2 == 0:
                l = K // 2 - 1
                upper[s] = True
            else:
                l = (K - 1) // 2
            nxt = K * idx + l
            if not self.tree.contains(g + 1, nxt):
                self._below[key] = g
                return g
            g, idx = g + 1, nxt
        self._below[key] = None
        return None

    def exit_depth_of_cell(self, h: int, i: int) -> Optional[int]:
        if self.tree.contains(h, i):
            return self._rep_exit(h, i)
        return self._deepest_ancestor(h, i)

    def exit_depth(self, x: Sequence[float]) -> Optional[int]:
        """Deepest depth whose tree slice contains ``x`` (``None`` on the branch)."""
        x = tuple(float(v) for v in x)
        if not self.domain.contains(x):
            raise DomainError(f"point {x} outside the unit cube")
        part = self.partition
        cell = part.root()
        for _ in range(self.max_steps):
            l = part.child_containing(cell, x)
            nxt = part.split(cell)[l]
            if not self.tree.contains(nxt.depth, nxt.index):
                return cell.depth
            cell = nxt
        return None

    def _value(self, g: Optional[int]) -> float:
        if g is None:
            return 0.0
        return -self.profile.nu * self.profile.rho**g

    # -- MultiFidelityFunction --------------------------------------------

    def target(self, x: Sequence[float], cell: Optional[Cell] = None) -> float:
        if cell is not None:
            return self._value(self.exit_depth_of_cell(cell.depth, cell.index))
        return self._value(self.exit_depth(x))

    def fidelity(self, x: Sequence[float], z: float, bias: float, cell: Optional[Cell] = None) -> float:
        return min(self.target(x, cell), -bias)

    # -- exact cell extrema -----------------------------------------------

    def cell_sup(self, h: int, i: int) -> float:
        """``sup f`` over cell ``(h, i)``."""
        if not self.tree.contains(h, i):
            return self._value(self._deepest_ancestor(h, i))
        if (h, i) == self.tree.branch_key(h):
            return 0.0
        return self._value(self._deepest_descendant(h, i))

    def _deepest_descendant(self, h: int, i: int) -> int:
        K = self.tree.arity
        best = h
        frontier = [i]
        g = h
        while frontier and g < self.tree.horizon:
            nxt = [K * j + l for j in frontier for l in range(K) if self.tree.contains(g + 1, K * j + l)]
            if nxt:
                best = g + 1
            frontier, g = nxt, g + 1
        return best

    def cell_inf(self, h: int, i: int) -> float:
        """``inf f`` over cell ``(h, i)``."""
        if not self.tree.contains(h, i):
            return self._value(self._deepest_ancestor(h, i))
        return self._value(self._shallowest_exit(h, i))

    def _shallowest_exit(self, h: int, i: int) -> int:
        K = self.tree.arity
        kids = [K * i + l for l in range(K)]
        if all(self.tree.contains(h + 1, j) for j in kids):
            return min(self._shallowest_exit(h + 1, j) for j in kids)
        return h

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "arity": self.tree.arity,
            "dim": self.dim,
            "nodes": self.tree.nodes(),
            "branch": self.tree.branch.to_dict(),
            "profile": self.profile.to_dict(),
            "bias": model_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeInstance":
        tree = TruncatedTree(d["arity"], d["nodes"], BranchRule(**d.get("branch", {})))
        return cls(tree, SmoothnessProfile(**d["profile"]), model_from_dict(d["bias"]), d.get("dim", 1))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "TreeInstance":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: invalid tree instance ({exc})") from exc


def eval_tree_target(instance: TreeInstance, x: Sequence[float]) -> float:
    return instance.target(x)


def eval_tree_fidelity(instance: TreeInstance, x: Sequence[float], z: float,
                       schedule: Optional[FidelitySchedule] = None) -> float:
    """``min(f(x), -zeta(z))`` with ``zeta`` from ``schedule`` (unbounded cost by default)."""
    schedule = schedule or FidelitySchedule(instance.model)
    return instance.fidelity(x, z, schedule.bias(z))


# ---------------------------------------------------------------------------
# membership verification


@dataclass
class MembershipReport:
    passed: bool
    checks: dict = field(default_factory=dict)
    counterexample: Optional[dict] = None
    lemma5_hypothesis: bool = True

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"{status}  " + "  ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in self.checks.items())]
        if not self.lemma5_hypothesis:
            lines.append("note: node counts exceed floor(rho^-dh) somewhere")
        if self.counterexample:
            lines.append("counterexample: " + json.dumps(self.counterexample, default=str))
        return "\n".join(lines)


def near_optimal_count(instance: TreeInstance, h: int) -> int:
    """``N_h(3 nu rho^h)``: depth-``h`` cells with ``sup f >= -3 nu rho^h``.

    Such a cell has a tree ancestor at depth ``h - k`` with
    ``k = floor(ln 3 / ln(1/rho))``, so the count is the number of tree
    nodes there times ``K**k``.
    """
    K = instance.tree.arity
    k = instance.profile.h0
    g0 = h - k
    if g0 <= 0:
        return K**h
    return instance.tree.count(g0) * K**k


def _bias_costs(model: CostToBiasModel) -> list[float]:
    costs = [1.0] + [math.exp(u) for u in range(1, 8)]
    if isinstance(model, Cutoff):
        costs += [model.a, max(1.0, math.nextafter(model.a, 0.0))]
    return sorted(set(costs))


def verify_membership(instance: TreeInstance, H: int, shallow_cells: int = 4096) -> MembershipReport:
    """Check that ``instance`` lies in the class of its profile, up to depth ``H``.

    Checks, in order: the profile constants (``C >= C_min``, ``d <= d_max``);
    the optimal-cell guarantee along the infinite branch; the count of
    ``3 nu rho^h``-optimal cells against ``C rho^(-d h)``; and the bias
    envelope ``|f - f_z| <= zeta(z)`` with ``sup f = 0`` and ``f <= 0`` on
    representatives.  The first failure is returned as a counterexample.
    """
    if H < 1:
        raise ValueError("H must be >= 1")
    p = instance.profile
    tree = instance.tree
    report = MembershipReport(True)

    def fail(name, detail):
        report.checks[name] = False
        if report.passed:
            report.passed = False
            report.counterexample = {"check": name, **detail}

    problems = p.problems()
    report.checks["profile"] = not problems
    if problems:
        fail("profile", {"reason": "; ".join(problems), "C": p.C, "C_min": p.C_min,
                         "d": p.d, "d_max": p.d_max})

    report.lemma5_hypothesis = all(1 <= tree.count(h) <= p.width_limit(h) for h in range(H + 1))

    report.checks["optimal_cell"] = True
    for h in range(H + 1):
        g, i = tree.branch_key(h)
        low = instance.cell_inf(g, i)
        if low < -p.nu * p.rho**h * (1 + _TOL):
            fail("optimal_cell", {"depth": h, "index": i, "inf": low, "required": -p.nu * p.rho**h})
            break

    report.checks["near_optimality"] = True
    for h in range(H + 1):
        n = near_optimal_count(instance, h)
        limit = p.C * p.rho ** (-p.d * h)
        if n > limit * (1 + _TOL):
            fail("near_optimality", {"depth": h, "count": n, "limit": limit,
                                     "tree_depth": h - p.h0, "tree_nodes": tree.count(max(h - p.h0, 0))})
            break

    report.checks["bias_envelope"] = True
    schedule = FidelitySchedule(instance.model)
    # every cell while the depth is small, then the children of tree nodes
    part = instance.partition
    cells = [part.root()]
    frontier = [part.root()]
    for g in range(H):
        full = tree.arity ** (g + 1) <= shallow_cells
        kids = [ch for c in frontier for ch in part.split(c)]
        cells.extend(kids)
        frontier = kids if full else [c for c in kids if tree.contains(c.depth, c.index)]
    levels = [(cost, z, schedule.bias(z)) for cost in _bias_costs(instance.model)
              for z in [schedule.fidelity_for_cost(cost)]]
    for c in cells:
        f = instance.target(c.representative, c)
        for cost, z, zeta in levels:
            fz = instance.fidelity(c.representative, z, zeta, c)
            bad = None
            if f > 0:
                bad = "positive value"
            elif zeta != INF and abs(f - fz) > zeta:
                bad = "bias above zeta"
            if bad:
                fail("bias_envelope", {"depth": c.depth, "index": c.index, "cost": cost,
                                       "f": f, "f_z": fz, "zeta": zeta, "reason": bad})
                break
        if not report.checks["bias_envelope"]:
            break
    if report.checks["bias_envelope"] and instance.cell_sup(0, 0) != 0.0:
        fail("bias_envelope", {"reason": "sup f differs from 0", "sup": instance.cell_sup(0, 0)})
    return report


# ---------------------------------------------------------------------------
# constructors


def _check_lemma5(tree: TruncatedTree, profile: SmoothnessProfile) -> None:
    for g in range(tree.horizon + 1):
        if not 1 <= tree.count(g) <= profile.width_limit(g):
            raise ValueError(f"depth {g} holds {tree.count(g)} nodes, limit {profile.width_limit(g)}")


def _require_profile(profile: SmoothnessProfile) -> None:
    problems = profile.problems()
    if problems:
        raise ValueError("; ".join(problems))


def make_width_limited_family(profile: SmoothnessProfile, h: int, s: int,
                              model: CostToBiasModel = Cutoff(1.0), dim: int = 1) -> list[TreeInstance]:
    """The ``K**(s+1)`` instances ``T_i`` that hide the optimum among the children of a full subtree.

    The base tree has one node per depth above ``h - s`` and the full
    ``K``-ary subtree of cell ``(h - s, 0)`` down to depth ``h``.  ``T_i``
    continues it with the leftmost chain below cell ``(h + 1, i)``.
    """
    _require_profile(profile)
    K = profile.K
    if s < 0 or h < s:
        raise ValueError(f"need 0 <= s <= h, got h={h}, s={s}")
    if K**s > profile.rho ** (-profile.d * h) * (1 + _TOL):
        raise ValueError(f"K^s = {K**s} exceeds rho^(-d h) = {profile.rho ** (-profile.d * h)}")
    base = [[0] for _ in range(h - s)] + [list(range(K ** (g - (h - s)))) for g in range(h - s, h + 1)]
    family = []
    for i in range(K ** (s + 1)):
        tree = TruncatedTree(K, base + [[i]], BranchRule("constant", 0))
        _check_lemma5(tree, profile)
        family.append(TreeInstance(tree, profile, model, dim))
    return family


def make_depth_limited_instance(profile: SmoothnessProfile, h: int,
                                branch: BranchRule = BranchRule("constant", 0),
                                model: CostToBiasModel = Cutoff(1.0), dim: int = 1) -> TreeInstance:
    """Single-branch instance: the leftmost chain down to depth ``h``, then ``branch``."""
    _require_profile(profile)
    if h < 1:
        raise ValueError("h must be >= 1")
    tree = TruncatedTree(profile.K, [[0] for _ in range(h + 1)], branch)
    return TreeInstance(tree, profile, model, dim)


def random_tree_instance(profile: SmoothnessProfile, model: CostToBiasModel, horizon: int = 12,
                         seed: int = 0, dim: int = 1) -> TreeInstance:
    """Random tree satisfying the node-count hypothesis, with a random infinite branch.

    Each depth below the horizon keeps a uniformly drawn number of the
    children of the previous depth, at most ``floor(rho^(-d g))``; the
    horizon keeps one of them, and a seeded random branch continues from there.
    """
    _require_profile(profile)
    rng = random.Random(seed)
    K = profile.K
    levels = [[0]]
    for g in range(1, horizon + 1):
        kids = [K * i + l for i in levels[-1] for l in range(K)]
        top = 1 if g == horizon else min(len(kids), profile.width_limit(g))
        levels.append(sorted(rng.sample(kids, rng.randint(1, top))))
    tree = TruncatedTree(K, levels, BranchRule("random", seed=rng.randrange(2**31)))
    return TreeInstance(tree, profile, model, dim)
