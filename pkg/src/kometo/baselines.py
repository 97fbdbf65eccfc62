"""Single-fidelity tree-search baselines that always query the top fidelity.

Each baseline opens, depth by depth, the best-valued unopened cells, with
an opening count per depth given by its schedule.  Every opening evaluates
the ``K`` children of the cell at fidelity ``z = 1``, for ``lambda(1)`` each.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

from .fidelity import BudgetExceeded, FidelityEnvironment
from .partition import Partition, PartitionTree
from .results import RegretTrace


class InapplicableEnvironment(ValueError):
    """The top fidelity has infinite cost, so a single-fidelity baseline cannot run."""


def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


@dataclass(frozen=True)
class OpeningSchedule:
    """Per-depth opening counts.

    ``kind`` is one of

    * ``"sequool"``: ``floor(h_max / h)`` with ``h_max = floor(n / H_n)`` and
      ``H_n`` the ``n``-th harmonic number,
    * ``"sqrt"``: ``floor(2 sqrt(n / h))`` up to depth ``n``,
    * ``"log"``: ``floor(n / (h ln(n/h)**2))`` up to depth ``floor(n / e**2)``.
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.n < 0:
            raise ValueError("n must be non-negative")

    @property
    def max_depth(self) -> int:
        n = self.n
        if n < 1:
            return 0
        if self.kind == "sequool":
            return int(n // harmonic(n))
        if self.kind == "sqrt":
            return n
        return int(math.floor(n / math.e**2))

    def count(self, h: int) -> int:
        return schedule_counts(self, h)


SCHEDULES = ("sequool", "sqrt", "log")


def schedule_counts(s: OpeningSchedule, h: int) -> int:
    """Number of cells the schedule opens at depth ``h >= 1``."""
    if h < 1:
        raise ValueError("depth must be >= 1")
    n = s.n
    if h > s.max_depth:
        return 0
    if s.kind == "sequool":
        return s.max_depth // h
    if s.kind == "sqrt":
        return int(math.floor(2.0 * math.sqrt(n / h)))
    log = math.log(n / h)
    if log == 0.0:
        return 0
    return int(math.floor(n / (h * log * log)))


def worst_case_evaluations(s: OpeningSchedule, arity: int = 2) -> int:
    """Evaluations used if every depth opens as many cells as it can."""
    total, prev = 1, 1
    for h in range(1, s.max_depth + 1):
        c = min(s.count(h), arity * prev)
        if c == 0:
            break
        total += c
        prev = c
    return arity * total


def fit_schedule(kind: str, n_evals: int, arity: int = 2) -> OpeningSchedule:
    """Largest schedule parameter whose worst case fits in ``n_evals`` evaluations."""
    lo, hi = 0, max(1, n_evals)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if worst_case_evaluations(OpeningSchedule(kind, mid), arity) <= n_evals:
            lo = mid
        else:
            hi = mid - 1
    return OpeningSchedule(kind, lo)


def run_baseline(schedule: str | OpeningSchedule, env: FidelityEnvironment, budget: Optional[float] = None,
                 arity: int = 2, label: Optional[str] = None) -> RegretTrace:
    """Run a single-fidelity baseline at ``z = 1``.

    Parameters
    ----------
    schedule : str or OpeningSchedule
        A schedule kind (its parameter is then fitted to the evaluation
        count ``n = floor(budget / lambda(1))``) or an explicit schedule.
    env : FidelityEnvironment
        Evaluation environment; its ledger enforces the budget.
    budget : float, optional
        Defaults to the environment's budget.

    Returns
    -------
    RegretTrace
        The output is the best evaluated representative (ties go to the
        deepest cell, then the lowest index).
    """
    t0 = time.perf_counter()
    top = env.top_cost
    if math.isinf(top):
        raise InapplicableEnvironment("lambda(1) is infinite; single-fidelity baselines cannot run")
    budget = env.budget if budget is None else budget
    n_evals = int(math.floor(budget / top))
    if isinstance(schedule, str):
        schedule = fit_schedule(schedule, n_evals, arity)
    label = label or schedule.kind

    tree = PartitionTree(Partition(env.domain, arity))
    values: dict = {}
    opened_seq = []
    best = None  # (value, depth, -index)

    def evaluate(cell) -> bool:
        nonlocal best
        try:
            v = env.evaluate_at_cost(cell.representative, top, cell=cell)
        except BudgetExceeded:
            return False
        values[cell.key] = v
        rank = (v, cell.depth, -cell.index)
        if best is None or rank > best:
            best = rank
        return True

    def open_(cell) -> bool:
        tree.opened[cell.key] = 0
        opened_seq.append((cell.depth, cell.index, 0))
        return all(evaluate(ch) for ch in tree.children(cell))

    alive = open_(tree.cell(0, 0))
    per_depth = {0: 1}
    h = 1
    while alive and h <= schedule.max_depth:
        count = schedule.count(h)
        cands = sorted((k for k in values if k[0] == h and k not in tree.opened),
                       key=lambda k: (-values[k], k[1]))
        chosen = cands[:count]
        if not chosen:
            break
        for key in chosen:
            per_depth[h] = per_depth.get(h, 0) + 1
            if not open_(tree.cell(*key)):
                alive = False
                break
        h += 1

    if best is None:
        cell = tree.cell(0, 0)
    else:
        cell = tree.cell(best[1], -best[2])
    trace = RegretTrace(
        algorithm=label,
        budget=env.budget,
        spent=env.spent,
        output=tuple(cell.representative),
        regret=env.regret(cell.representative, cell=cell),
        wall_ms=(time.perf_counter() - t0) * 1000.0,
        n_events=len(env.ledger.events),
        output_cell=cell.key,
        opened=opened_seq,
        per_depth=per_depth,
    )
    return trace
