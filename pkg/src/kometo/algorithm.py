"""The Kometo multi-fidelity tree search.

A run has three phases:

1. Init.  Turn the raw budget into an effective budget ``L`` and open the
   root at fidelity level ``j_max = floor(ln L)``.
2. Exploration.  For each depth ``h = 1..L`` and ``m = 1..floor(L/h)``,
   open the best unopened depth-``h`` cell at level ``j = floor(ln(L/(h m)))``.
   Opening a cell at level ``j`` makes its children observable at every
   level ``u <= j``, where level ``u`` costs ``e**u``.
3. Cross-validation.  Each level contributes its best cell as a candidate.
   Every candidate is re-evaluated at cost ``L`` and the best one is returned.

All logarithms are natural.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .fidelity import BudgetExceeded, FidelityEnvironment
from .partition import Cell, Key, Partition, PartitionTree
from .results import RegretTrace


@dataclass
class KometoConfig:
    """Run parameters.

    Parameters
    ----------
    budget : float
        Raw budget ``Lambda >= 1``.
    arity : int
        Partition arity ``K``.
    budget_optimization : bool
        Replace the closed-form effective budget by the largest one whose
        predicted worst-case spend fits in ``budget``.
    lazy_child_evaluation : bool
        Fetch child values only when a selection or cross-validation step
        reads them.  When off, opening a cell pays for all its children at once.
    parent_reuse : bool
        Serve repeated ``(point, level)`` requests from a memo.  With the
        midpoint representative this only matters for odd ``K``, where the
        middle child shares its parent's point.
    """

    budget: float
    arity: int = 2
    budget_optimization: bool = False
    lazy_child_evaluation: bool = True
    parent_reuse: bool = True

    def __post_init__(self):
        if not self.budget >= 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if int(self.arity) != self.arity or self.arity < 2:
            raise ValueError(f"arity must be an integer >= 2, got {self.arity}")


# ---------------------------------------------------------------------------
# budget preprocessing


def floor_log(x: float) -> int:
    """``floor(ln x)`` for ``x >= 1``, corrected against ``exp`` at the boundaries."""
    if x < 1:
        raise ValueError(f"floor_log needs x >= 1, got {x}")
    j = int(math.floor(math.log(x)))
    while math.exp(j + 1) <= x:
        j += 1
    while j > 0 and math.exp(j) > x:
        j -= 1
    return j


def effective_budget(budget: float, arity: int = 2) -> int:
    """Closed-form effective budget ``floor((e-1) L / (2 K e (ln L + 1)**2))``."""
    if not budget >= 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    e = math.e
    return int(math.floor((e - 1) * budget / (2 * arity * e * (math.log(budget) + 1) ** 2)))


def exploration_schedule(eff_budget: int) -> Iterator[tuple[int, int, int]]:
    """Yield the exploration steps ``(h, m, j)`` in loop order."""
    for h in range(1, eff_budget + 1):
        for m in range(1, eff_budget // h + 1):
            yield h, m, floor_log(eff_budget / (h * m))


def _level_costs(j: int) -> list[float]:
    return [math.exp(u) for u in range(j + 1)]


def predicted_spend(eff_budget: int, arity: int = 2, parent_reuse: bool = True) -> float:
    """Worst-case spend of a run with effective budget ``eff_budget``.

    Every requested level ``u`` is charged its full nominal cost ``e**u``.
    The count of openings at depth ``h`` is capped by ``floor(L/h)`` and
    by ``K`` times the cap of the depth above, and each depth is charged for
    its most expensive steps.  Cross-validation adds ``(j_max + 1) L``.
    Lazy evaluation can only lower the real spend, so it is ignored here.
    """
    L = int(eff_budget)
    if L <= 0:
        return 0.0
    K = arity
    k_open = K - 1 if (parent_reuse and K % 2 == 1) else K
    j_max = floor_log(L)
    costs = _level_costs(j_max)
    total = K * math.fsum(costs)

    # M[u] = largest product h*m whose level is >= u
    M = []
    for u in range(j_max + 1):
        lo, hi = 1, L
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if floor_log(L / mid) >= u:
                lo = mid
            else:
                hi = mid - 1
        M.append(lo)

    # openings per depth: min(L // h, K * cap[h - 1]); the K-growth cap only
    # binds near the root, after which cap[h] = L // h
    caps = []
    prev = 1
    h = 1
    while h <= L:
        c = min(L // h, K * prev)
        caps.append(c)
        prev = c
        if c == L // h:
            break
        h += 1
    hs = np.arange(1, L + 1, dtype=np.int64)
    cap = L // hs
    cap[: len(caps)] = caps
    explore = 0.0
    for u in range(j_max + 1):
        counts = np.minimum(cap, M[u] // hs)
        explore += costs[u] * float(counts.sum())
    total += k_open * explore
    total += (j_max + 1) * L
    return total


def optimize_effective_budget(budget: float, arity: int = 2, parent_reuse: bool = True) -> int:
    """Largest ``L`` with ``predicted_spend(L) <= budget`` (found by dichotomy)."""
    base = effective_budget(budget, arity)
    lo, hi = base, int(math.floor(budget))
    if predicted_spend(hi, arity, parent_reuse) <= budget:
        return hi
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if predicted_spend(mid, arity, parent_reuse) <= budget:
            lo = mid
        else:
            hi = mid - 1
    return lo


# ---------------------------------------------------------------------------
# state and phases


@dataclass
class KometoState:
    """Mutable bookkeeping of one run."""

    config: KometoConfig
    env: FidelityEnvironment
    tree: PartitionTree
    eff_budget: int
    j_max: int
    memo: dict = field(default_factory=dict)
    pending: dict = field(default_factory=dict)
    heaps: dict = field(default_factory=dict)
    depth_count: dict = field(default_factory=dict)
    opened_seq: list = field(default_factory=list)
    skips: list = field(default_factory=list)
    candidates: dict = field(default_factory=dict)
    final_values: dict = field(default_factory=dict)
    output: Optional[tuple] = None
    output_cell: Optional[Key] = None
    quotes: dict = field(default_factory=dict)

    @classmethod
    def create(cls, config: KometoConfig, env: FidelityEnvironment,
               eff_budget: Optional[int] = None) -> "KometoState":
        if eff_budget is None:
            if config.budget_optimization:
                eff_budget = optimize_effective_budget(config.budget, config.arity, config.parent_reuse)
            else:
                eff_budget = effective_budget(config.budget, config.arity)
        j_max = floor_log(eff_budget) if eff_budget >= 1 else 0
        tree = PartitionTree(Partition(env.domain, config.arity))
        return cls(config, env, tree, int(eff_budget), j_max)

    # -- value access ------------------------------------------------------

    def _memo_key(self, cell: Cell, u: int):
        return (cell.representative, u)

    def level_quote(self, u: int):
        q = self.quotes.get(u)
        if q is None:
            q = self.quotes[u] = self.env.quote(math.exp(u))
        return q

    def fetch_cost(self, key: Key, u: int) -> float:
        if (key[0], key[1], u) in self.tree.values:
            return 0.0
        if self.config.parent_reuse and self._memo_key(self.tree.cell(*key), u) in self.memo:
            return 0.0
        return self.level_quote(u).charge

    def fetch(self, key: Key, u: int) -> float:
        """Value of ``key`` at level ``u``, requesting it from the environment if needed."""
        vkey = (key[0], key[1], u)
        if vkey in self.tree.values:
            return self.tree.values[vkey]
        cell = self.tree.cell(*key)
        mkey = self._memo_key(cell, u)
        if self.config.parent_reuse and mkey in self.memo:
            v = self.memo[mkey]
        else:
            v = self.env.evaluate_quoted(cell.representative, self.level_quote(u), cell=cell)
            if self.config.parent_reuse:
                self.memo[mkey] = v
        self.tree.values[vkey] = v
        return v

    def _push(self, key: Key, u: int, v: float) -> None:
        heapq.heappush(self.heaps.setdefault((key[0], u), []), (-v, key[1]))


def open_cell(state: KometoState, cell: Cell, j: int) -> bool:
    """Open ``cell`` at level ``j``: its children become observable at levels ``0..j``.

    Eager mode fetches the new child values immediately; the caller is
    responsible for checking they are affordable.  Returns ``False`` when
    the cell was already opened at level ``>= j``.
    """
    tree = state.tree
    key = cell.key
    if tree.opened.get(key, -1) >= j:
        return False
    tree.opened[key] = j
    lazy, pending = state.config.lazy_child_evaluation, state.pending
    for child in tree.children(cell):
        new_levels = tree.make_available(child.key, j)
        if new_levels and new_levels[0] == 0:
            state.depth_count[child.depth] = state.depth_count.get(child.depth, 0) + 1
        if lazy:
            for u in new_levels:
                pending.setdefault((child.depth, u), []).append(child.key)
        else:
            for u in new_levels:
                state._push(child.key, u, state.fetch(child.key, u))
    return True


def _opening_cost(state: KometoState, cell: Cell, j: int) -> float:
    if state.config.lazy_child_evaluation:
        return 0.0
    total = 0.0
    for child in state.tree.children(cell):
        top = state.tree.levels.get(child.key, -1)
        for u in range(top + 1, j + 1):
            total += state.fetch_cost(child.key, u)
    return total


def _read_pending(state: KometoState, h: int, j: int) -> bool:
    """Fetch the unread eligible values at ``(h, j)``; ``False`` if unaffordable."""
    pend = state.pending.get((h, j))
    if not pend:
        return True
    opened = state.tree.opened
    todo = [k for k in pend if k not in opened]
    cost = math.fsum(state.fetch_cost(k, j) for k in todo)
    if not state.env.ledger.can_afford(cost):
        return False
    done = 0
    try:
        for k in todo:
            state._push(k, j, state.fetch(k, j))
            done += 1
    except BudgetExceeded:
        # float summation order can differ from the ledger's by an ulp
        state.pending[(h, j)] = todo[done:]
        return False
    state.pending[(h, j)] = []
    return True


def select_and_open(state: KometoState, h: int, j: int, m: Optional[int] = None) -> Optional[Cell]:
    """Open the best unopened depth-``h`` cell among those observable at level ``j``.

    Ties go to the lowest index.  Returns ``None`` (and records a skip) when
    no cell is eligible or the step cannot be paid for.
    """
    if not _read_pending(state, h, j):
        state.skips.append((h, m, j, "budget"))
        return None
    heap = state.heaps.get((h, j), [])
    opened = state.tree.opened
    while heap and (h, heap[0][1]) in opened:
        heapq.heappop(heap)
    if not heap:
        state.skips.append((h, m, j, "empty"))
        return None
    cell = state.tree.cell(h, heap[0][1])
    cost = _opening_cost(state, cell, j)
    if cost and not state.env.ledger.can_afford(cost):
        state.skips.append((h, m, j, "budget"))
        return None
    try:
        open_cell(state, cell, j)
    except BudgetExceeded:
        state.skips.append((h, m, j, "budget"))
        return None
    heapq.heappop(heap)
    state.opened_seq.append((h, cell.index, j))
    return cell


def explore(state: KometoState) -> None:
    """Run the exploration phase."""
    L = state.eff_budget
    for h in range(1, L + 1):
        if not state.depth_count.get(h):
            # nothing is observable at depth h, hence nothing deeper either
            state.skips.append((h, None, None, "empty depth"))
            break
        for m in range(1, L // h + 1):
            select_and_open(state, h, floor_log(L / (h * m)), m)


def _best(state: KometoState, keys: list[Key], j: int) -> Optional[Key]:
    best, best_rank = None, None
    values = state.tree.values
    for key in keys:
        v = values.get((key[0], key[1], j))
        if v is None:
            continue
        rank = (v, key[0], -key[1])
        if best_rank is None or rank > best_rank:
            best, best_rank = key, rank
    return best


def cross_validate(state: KometoState) -> tuple:
    """Pick one candidate per level, re-evaluate at cost ``L``, return the best point."""
    tree = state.tree
    for j in range(state.j_max + 1):
        keys = [k for k, top in tree.levels.items() if top >= j]
        for key in keys:
            if (key[0], key[1], j) not in tree.values:
                try:
                    tree.values[(key[0], key[1], j)] = state.fetch(key, j)
                except BudgetExceeded:
                    state.skips.append((key[0], None, j, "budget cv read"))
                    break
        best = _best(state, keys, j)
        if best is not None:
            state.candidates[j] = best

    if not state.candidates:
        root = tree.cell(0, 0)
        state.output, state.output_cell = root.representative, root.key
        return state.output

    points = {j: tree.cell(*k).representative for j, k in state.candidates.items()}
    if len(set(points.values())) == 1:
        j = min(points)
        state.output, state.output_cell = points[j], state.candidates[j]
        return state.output

    seen: dict = {}
    for j in sorted(state.candidates):
        x = points[j]
        if x not in seen:
            cell = tree.cell(*state.candidates[j])
            try:
                seen[x] = state.env.evaluate_at_cost(x, float(state.eff_budget), cell=cell)
            except BudgetExceeded:
                state.skips.append((cell.depth, None, j, "budget cv final"))
                continue
        state.final_values[j] = seen[x]

    if state.final_values:
        # max over values, ties to the smallest level
        j_best = min(state.final_values, key=lambda j: (-state.final_values[j], j))
    else:
        j_best = max(state.candidates)
    state.output, state.output_cell = points[j_best], state.candidates[j_best]
    return state.output


def run(config: KometoConfig, env: FidelityEnvironment, eff_budget: Optional[int] = None,
        label: str = "kometo") -> RegretTrace:
    """Execute a full run and score its output."""
    return run_with_state(config, env, eff_budget, label)[0]


def run_with_state(config: KometoConfig, env: FidelityEnvironment,
                   eff_budget: Optional[int] = None,
                   label: str = "kometo") -> tuple[RegretTrace, KometoState]:
    """Like :func:`run` but also return the final state."""
    t0 = time.perf_counter()
    state = KometoState.create(config, env, eff_budget)
    root = state.tree.cell(0, 0)
    if state.eff_budget < 1:
        state.output, state.output_cell = root.representative, root.key
    else:
        cost = _opening_cost(state, root, state.j_max)
        opened = False
        if env.ledger.can_afford(cost):
            try:
                opened = open_cell(state, root, state.j_max)
            except BudgetExceeded:
                pass
        if opened:
            state.opened_seq.append((0, 0, state.j_max))
        else:
            state.skips.append((0, None, state.j_max, "budget"))
        explore(state)
        cross_validate(state)
    out_cell = state.tree.cell(*state.output_cell)
    regret = env.regret(state.output, cell=out_cell)
    trace = RegretTrace(
        algorithm=label,
        budget=env.budget,
        spent=env.spent,
        output=tuple(state.output),
        regret=regret,
        wall_ms=(time.perf_counter() - t0) * 1000.0,
        n_events=len(env.ledger.events),
        output_cell=state.output_cell,
        effective_budget=state.eff_budget,
        opened=list(state.opened_seq),
        skips=list(state.skips),
    )
    return trace, state
