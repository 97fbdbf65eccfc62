"""Evaluation environment: cost-to-bias models, fidelity schedules and the budget ledger.

Optimizers never touch a target function directly.  They ask a
:class:`FidelityEnvironment` for an observation at some cost ``c >= 1``;
the environment picks the fidelity ``z_c``, charges ``lambda(z_c) <= c`` to
the ledger and returns the (optionally distorted) value of ``f_{z_c}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional, Protocol, Sequence, Union

from .partition import Box, Cell, DomainError

INF = math.inf


class BudgetExceeded(RuntimeError):
    """A request would push the ledger past its total budget."""


# ---------------------------------------------------------------------------
# cost-to-bias models


@dataclass(frozen=True)
class PolyDecay:
    """``Phi(c) = A / c**alpha``."""

    A: float = 1.0
    alpha: float = 1.0
    kind = "poly"

    def __post_init__(self):
        if not (self.A > 0 and self.alpha > 0):
            raise ValueError("PolyDecay needs A > 0 and alpha > 0")

    def phi(self, c: float) -> float:
        return self.A / c**self.alpha


@dataclass(frozen=True)
class ExpDecay:
    """``Phi(c) = B * exp(-c**beta / sigma)``."""

    B: float = 1.0
    sigma: float = 1.0
    beta: float = 1.0
    kind = "exp"

    def __post_init__(self):
        if not (self.B > 0 and self.sigma > 0 and self.beta > 0):
            raise ValueError("ExpDecay needs B, sigma, beta > 0")

    def phi(self, c: float) -> float:
        return self.B * math.exp(-(c**self.beta) / self.sigma)


@dataclass(frozen=True)
class Cutoff:
    """Infinite bias below cost ``a``, exact observations from ``a`` on."""

    a: float = 1.0
    kind = "cutoff"

    def __post_init__(self):
        if not self.a >= 1:
            raise ValueError("Cutoff needs a >= 1")

    def phi(self, c: float) -> float:
        return INF if c < self.a else 0.0


CostToBiasModel = Union[PolyDecay, ExpDecay, Cutoff]

_MODELS = {"poly": PolyDecay, "exp": ExpDecay, "cutoff": Cutoff}


def phi(model: CostToBiasModel, c: float) -> float:
    """Cost-to-bias value ``Phi(c)`` for ``c >= 1``."""
    if not c >= 1:
        raise DomainError(f"cost must be >= 1, got {c}")
    if c == INF:
        return 0.0
    return model.phi(c)


def model_to_dict(model: CostToBiasModel) -> dict:
    d = {"kind": model.kind}
    d.update({k: getattr(model, k) for k in model.__dataclass_fields__})
    return d


def model_from_dict(d: dict) -> CostToBiasModel:
    d = dict(d)
    try:
        cls = _MODELS[d.pop("kind")]
    except KeyError as exc:
        raise ValueError(f"unknown cost-to-bias model {exc}") from None
    return cls(**d)


# ---------------------------------------------------------------------------
# fidelity schedule


@dataclass(frozen=True)
class FidelitySchedule:
    """Cost and bias as functions of the fidelity ``z in [0, 1]``.

    With ``max_cost = inf`` the cost is ``lambda(z) = 1 / (1 - z)``, so every
    cost ``c >= 1`` is met exactly by ``z_c = 1 - 1/c`` and ``lambda(1)`` is
    infinite.  With a finite ``max_cost = M > 1`` the cost is ``M**z``,
    ``z_c = min(1, ln c / ln M)`` and requests above ``M`` are served at
    ``z = 1`` for ``M``.  In both cases ``zeta(z) = Phi(lambda(z))`` with
    ``zeta(1) = 0``, so the realized cost-to-bias function equals the model's
    ``Phi`` below ``lambda(1)`` and is zero above it.
    """

    model: CostToBiasModel
    max_cost: float = INF

    def __post_init__(self):
        if not self.max_cost > 1:
            raise ValueError("max_cost must exceed 1")

    def cost(self, z: float) -> float:
        if not 0 <= z <= 1:
            raise DomainError(f"fidelity must lie in [0, 1], got {z}")
        if self.max_cost == INF:
            return INF if z == 1 else 1.0 / (1.0 - z)
        return self.max_cost**z

    def fidelity_for_cost(self, c: float) -> float:
        if not c >= 1:
            raise DomainError(f"cost must be >= 1, got {c}")
        if self.max_cost == INF:
            return 1.0 - 1.0 / c
        if c >= self.max_cost:
            return 1.0
        return math.log(c) / math.log(self.max_cost)

    def charge_for_cost(self, c: float) -> float:
        """``lambda(z_c)``, computed without the float round trip through ``z``."""
        if not c >= 1:
            raise DomainError(f"cost must be >= 1, got {c}")
        return min(c, self.max_cost)

    def bias(self, z: float) -> float:
        if z >= 1:
            return 0.0
        return phi(self.model, self.cost(z))

    def bias_for_cost(self, c: float) -> float:
        """``zeta(z_c)``."""
        if c >= self.max_cost:
            return 0.0
        return phi(self.model, c)


# ---------------------------------------------------------------------------
# multi-fidelity functions


class MultiFidelityFunction(Protocol):
    """What an environment needs from a problem instance.

    ``cell`` is an optional hint naming the partition cell whose representative
    is ``x``; tree instances use it to evaluate exactly at depths where the
    cell bounds are no longer resolvable in floating point.
    """

    domain: Box
    sup: float

    def target(self, x: Sequence[float], cell: Optional[Cell] = None) -> float: ...

    def fidelity(self, x: Sequence[float], z: float, bias: float,
                 cell: Optional[Cell] = None) -> float: ...


@dataclass
class CallableFunction:
    """Wrap a plain target ``f`` with a fidelity family.

    By default ``f_z = f - zeta(z)`` (constant downward bias).  Pass
    ``family(x, z, bias)`` to override.
    """

    f: Callable[[Sequence[float]], float]
    domain: Box
    sup: float
    family: Optional[Callable[[Sequence[float], float, float], float]] = None

    def target(self, x, cell=None) -> float:
        return float(self.f(x))

    def fidelity(self, x, z, bias, cell=None) -> float:
        if self.family is not None:
            return float(self.family(x, z, bias))
        return float(self.f(x)) - bias


# strictly increasing per-fidelity maps g_z(v); each keeps float order on
# moderate magnitudes and maps -inf to -inf or to a value below every finite image
DISTORTIONS: dict[str, Callable[[float, float], float]] = {
    "affine": lambda v, z: (2.0 + 3.0 * z) * v,
    "cube": lambda v, z: v**3 if v != -INF else -INF,
    "quintic": lambda v, z: (1.0 + z) * (v + v**5) if v != -INF else -INF,
    "sinh": lambda v, z: math.sinh((1.0 + z) * v),
    "arctan": lambda v, z: (2.0 + z) * math.atan(v),
}


# ---------------------------------------------------------------------------
# ledger and environment


@dataclass
class Event:
    t: int
    x: tuple[float, ...]
    z: float
    cost: float


@dataclass
class BudgetLedger:
    """Running account of evaluation costs against a total budget."""

    budget: float
    spent: float = 0.0
    events: list[Event] = field(default_factory=list)

    def __post_init__(self):
        if not self.budget > 0:
            raise ValueError("budget must be positive")

    @property
    def remaining(self) -> float:
        return self.budget - self.spent

    def can_afford(self, cost: float) -> bool:
        return self.spent + cost <= self.budget

    def charge(self, x, z: float, cost: float) -> None:
        if not self.can_afford(cost):
            raise BudgetExceeded(
                f"charge {cost:g} exceeds remaining budget {self.remaining:g} of {self.budget:g}")
        self.spent += cost
        self.events.append(Event(len(self.events) + 1, tuple(x), z, cost))

    def audit(self) -> bool:
        """Re-add the event log and compare against the budget."""
        total = 0.0
        for e in self.events:
            total += e.cost
        return total == self.spent and total <= self.budget


class Quote(NamedTuple):
    z: float
    charge: float
    bias: float


class FidelityEnvironment:
    """The only channel through which optimizers observe values.

    Parameters
    ----------
    function : MultiFidelityFunction
        Hidden target plus fidelity family.
    schedule : FidelitySchedule
        Cost and bias functions of ``z``.
    budget : float
        Total budget ``Lambda``.
    distortion : callable, optional
        Strictly increasing ``g(v, z)`` applied to every served observation.
    """

    def __init__(self, function: MultiFidelityFunction, schedule: FidelitySchedule,
                 budget: float, distortion: Optional[Callable[[float, float], float]] = None):
        self.function = function
        self.schedule = schedule
        self.ledger = BudgetLedger(float(budget))
        self.distortion = distortion
        self._quotes: dict = {}

    @property
    def domain(self) -> Box:
        return self.function.domain

    @property
    def budget(self) -> float:
        return self.ledger.budget

    @property
    def spent(self) -> float:
        return self.ledger.spent

    @property
    def top_cost(self) -> float:
        """``lambda(1)``, possibly infinite."""
        return self.schedule.max_cost

    def charge_for_cost(self, c: float) -> float:
        return self.schedule.charge_for_cost(c)

    def can_afford(self, c: float) -> bool:
        return self.ledger.can_afford(self.schedule.charge_for_cost(c))

    def quote(self, c: float) -> "Quote":
        """Fidelity, charge and bias of a request at cost ``c``."""
        q = self._quotes.get(c)
        if q is None:
            sch = self.schedule
            q = Quote(sch.fidelity_for_cost(c), sch.charge_for_cost(c), sch.bias_for_cost(c))
            self._quotes[c] = q
        return q

    def evaluate_at_cost(self, x: Sequence[float], c: float, cell: Optional[Cell] = None) -> float:
        """Serve ``g_{z_c}(f_{z_c}(x))`` and charge ``lambda(z_c)``."""
        return self.evaluate_quoted(x, self.quote(c), cell)

    def evaluate_quoted(self, x: Sequence[float], q: "Quote", cell: Optional[Cell] = None) -> float:
        if not self.domain.contains(x):
            raise DomainError(f"point {tuple(x)} outside domain")
        self.ledger.charge(x, q.z, q.charge)
        value = self.function.fidelity(x, q.z, q.bias, cell)
        if self.distortion is not None:
            value = self.distortion(value, q.z)
        return value

    def regret(self, x_out: Sequence[float], cell: Optional[Cell] = None) -> float:
        """``sup f - f(x_out)``; never charged."""
        if not self.domain.contains(x_out):
            raise DomainError(f"point {tuple(x_out)} outside domain")
        return max(0.0, self.function.sup - self.function.target(x_out, cell))
