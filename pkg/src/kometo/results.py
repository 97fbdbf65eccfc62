"""Per-run records shared by the optimizers and the harness."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class RegretTrace:
    """Outcome of one optimizer run.

    Attributes
    ----------
    algorithm, instance : str
        Labels used by the harness.
    budget : float
        Total budget ``Lambda`` of the run.
    spent : float
        Budget charged by the ledger.
    output : tuple of float
        The single recommended point.
    regret : float
        Simple regret of ``output``; ``nan`` for skipped runs.
    """

    algorithm: str
    budget: float
    spent: float
    output: tuple
    regret: float
    instance: str = ""
    seed: int = 0
    wall_ms: float = 0.0
    n_events: int = 0
    output_cell: Optional[tuple[int, int]] = None
    effective_budget: Optional[int] = None
    opened: list[tuple[int, int, int]] = field(default_factory=list)
    skips: list[tuple] = field(default_factory=list)
    per_depth: dict = field(default_factory=dict)
    status: str = "ok"

    def row(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "instance": self.instance,
            "budget": self.budget,
            "seed": self.seed,
            "spent": self.spent,
            "regret": self.regret,
            "wall_ms": self.wall_ms,
        }
