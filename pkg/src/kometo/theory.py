"""Closed-form regret bounds as pure functions.

Upper bounds are stated for an effective budget ``L`` (the integer the
optimizer derives from the raw budget), lower bounds for the raw budget.
A cost-to-bias model selects the assumption: :class:`PolyDecay` (a),
:class:`ExpDecay` (b) or :class:`Cutoff` (c).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

from .algorithm import effective_budget
from .fidelity import INF, CostToBiasModel, Cutoff, ExpDecay, PolyDecay
from .instances import SmoothnessProfile
from .partition import DomainError

log = logging.getLogger(__name__)


class CaseError(ValueError):
    """A formula was requested outside the case it is defined for."""


# ---------------------------------------------------------------------------
# Lambert W


def lambert_w(x: float) -> float:
    """Principal branch of the inverse of ``w -> w e**w`` on ``[0, inf)``.

    Halley iteration seeded with ``ln x - ln ln x`` above ``e`` and
    ``log1p(x)`` below; for huge ``x`` Newton steps on ``w + ln w = ln x``
    avoid overflowing ``exp``.
    """
    if math.isnan(x) or x < 0:
        raise DomainError(f"lambert_w needs x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return INF
    if x > 1e100:
        lx = math.log(x)
        w = lx - math.log(lx)
        for _ in range(50):
            step = (w + math.log(w) - lx) / (1.0 + 1.0 / w)
            w -= step
            if abs(step) <= 1e-16 * w:
                break
        return w
    w = math.log(x) - math.log(math.log(x)) if x > math.e else math.log1p(x)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        fp = ew * (w + 1.0)
        step = f / (fp - (w + 2.0) * f / (2.0 * w + 2.0))
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def lambert_w_lower(x: float) -> float:
    """Lower bound on ``W(x)``: ``ln x - ln ln x`` for ``x >= e``, ``x / e`` below."""
    if x >= math.e:
        return math.log(x) - math.log(math.log(x))
    return x / math.e


# ---------------------------------------------------------------------------
# upper bounds


def assumption_of(model: CostToBiasModel) -> str:
    if isinstance(model, PolyDecay):
        return "a"
    if isinstance(model, ExpDecay):
        return "b"
    if isinstance(model, Cutoff):
        return "c"
    raise TypeError(f"unsupported model {model!r}")


@dataclass(frozen=True)
class BoundQuery:
    """Inputs of an upper bound: profile, cost-to-bias model, effective budget ``L``."""

    profile: SmoothnessProfile
    model: CostToBiasModel
    eff_budget: float

    @classmethod
    def from_budget(cls, profile: SmoothnessProfile, model: CostToBiasModel, budget: float) -> "BoundQuery":
        return cls(profile, model, effective_budget(budget, profile.K))

    @property
    def assumption(self) -> str:
        return assumption_of(self.model)


@dataclass(frozen=True)
class UpperBound:
    regime: str
    h: float
    regret_bound: float
    h1: Optional[float] = None
    h2: Optional[float] = None


def _w_depth(arg: float, k: float) -> float:
    """Solution ``h`` of ``k h e**(k h) = arg``, i.e. ``W(arg) / k``."""
    return lambert_w(arg) / k


def _depths(q: BoundQuery, w: Callable[[float], float] = lambert_w) -> dict:
    """Depths ``h1``, ``h2`` (or ``h``) of the bound tables, using ``w`` for Lambert W."""
    p, m, L = q.profile, q.model, float(q.eff_budget)
    nu, rho, d, C = p.nu, p.rho, p.d, p.C
    lr = p.log_inv_rho
    e = math.e
    if isinstance(m, PolyDecay):
        inv_a = 1.0 / m.alpha
        k1 = (d + inv_a) * lr
        h1 = w(L * nu**inv_a * k1 / (4 * C * e * m.A**inv_a)) / k1
        h2 = L / (4 * C) if d == 0 else w(L * d * lr / (4 * C)) / (d * lr)
        return {"h1": h1, "h2": h2}
    if isinstance(m, ExpDecay):
        beta, sigma = m.beta, m.sigma
        a = max(1.0 / (2 * sigma), math.log(m.B / nu))
        X = (L / (4 * C * e)) ** (beta / (beta + 1)) * (1.0 / (2 * sigma * lr)) ** (1.0 / (beta + 1))
        if d == 0:
            h1 = X
        else:
            k = beta / (beta + 1) * d * lr
            h1 = w(k * X) / k
        denom = 4 * C * e * (2 * sigma * a) ** (1.0 / beta)
        h2 = L / denom if d == 0 else w(L * d * lr / denom) / (d * lr)
        return {"h1": h1, "h2": h2, "a": a}
    h = L / (4 * C * m.a * e) if d == 0 else w(L * d * lr / (4 * C * m.a * e)) / (d * lr)
    return {"h": h}


def _psi(model: CostToBiasModel, c: float) -> float:
    return model.phi(c)


def theorem3_bound(q: BoundQuery) -> UpperBound:
    """Upper bound on the simple regret of the optimizer, with its budget regime."""
    p, m, L = q.profile, q.model, float(q.eff_budget)
    nu, rho = p.nu, p.rho
    if L < 1:
        return UpperBound("low", 0.0, nu / rho)
    dep = _depths(q)
    if isinstance(m, PolyDecay):
        tail = 2 * m.A / L**m.alpha
        high = nu * rho ** dep["h1"] <= math.e**m.alpha * m.A
    elif isinstance(m, ExpDecay):
        tail = 2 * m.B * math.exp(-(L**m.beta) / m.sigma)
        high = dep["h1"] >= dep["a"] / p.log_inv_rho
    else:
        h = dep["h"]
        return UpperBound("high" if L >= m.a else "low", h, nu / rho * rho**h, h1=h)
    h = dep["h1"] if high else dep["h2"]
    return UpperBound("high" if high else "low", h, 3 * nu / rho * rho**h + tail, dep["h1"], dep["h2"])


def fixed_point_residuals(q: BoundQuery) -> dict:
    """Relative residuals of the equations that define ``h1``, ``h2`` (or ``h``)."""
    p, m, L = q.profile, q.model, float(q.eff_budget)
    nu, rho, d, C = p.nu, p.rho, p.d, p.C
    dep = _depths(q)
    rhs = lambda h: C * rho ** (-d * h)
    out = {}
    if isinstance(m, PolyDecay):
        h1, h2 = dep["h1"], dep["h2"]
        lhs1 = L * nu ** (1 / m.alpha) * rho ** (h1 / m.alpha) / (4 * math.e * m.A ** (1 / m.alpha) * h1)
        out["h1"] = abs(lhs1 - rhs(h1)) / rhs(h1)
        out["h2"] = abs(L / (4 * h2) - rhs(h2)) / rhs(h2)
    elif isinstance(m, ExpDecay):
        h1, h2, a = dep["h1"], dep["h2"], dep["a"]
        lhs1 = L / (4 * h1 * math.e * (2 * m.sigma * h1 * p.log_inv_rho) ** (1 / m.beta))
        lhs2 = L / (4 * h2 * math.e * (2 * m.sigma * a) ** (1 / m.beta))
        out["h1"] = abs(lhs1 - rhs(h1)) / rhs(h1)
        out["h2"] = abs(lhs2 - rhs(h2)) / rhs(h2)
    else:
        h = dep["h"]
        out["h"] = abs(L / (4 * m.a * math.e * h) - rhs(h)) / rhs(h)
    return out


def lemma7_conditions(profile: SmoothnessProfile, psi: CostToBiasModel | Callable[[float], float],
                      eff_budget: float, j: int, h: float) -> bool:
    """Both hypotheses of the opening lemma for level ``j`` and depth ``h``."""
    if j < 0 or not h > 0:
        raise ValueError("need j >= 0 and h > 0")
    f = psi.phi if hasattr(psi, "phi") else psi
    p = profile
    ej = math.exp(j)
    cond1 = f(ej) <= p.nu * p.rho**h
    cond2 = eff_budget / (4 * h * ej) >= p.C * p.rho ** (-p.d * h)
    return bool(cond1 and cond2)


def lemma7_bound(profile: SmoothnessProfile, psi: CostToBiasModel | Callable[[float], float],
                 eff_budget: float, h: float) -> float:
    f = psi.phi if hasattr(psi, "phi") else psi
    return 3 * profile.nu / profile.rho * profile.rho**h + 2 * f(max(1.0, float(eff_budget)))


# ---------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class RateDescriptor:
    """Asymptotic rate of the upper bound and a computable envelope of it.

    ``kind`` is ``"poly"`` (regret ~ ``budget**exponent`` up to log factors)
    or ``"exp"`` (exponentially small).  ``envelope(budget)`` replaces each
    Lambert W in the bound by its elementary lower bound, which can only
    make the bound larger.
    """

    tag: str
    kind: str
    exponent: Optional[float]
    regime: str
    envelope: Callable[[float], float]


def _envelope_bound(profile: SmoothnessProfile, model: CostToBiasModel, budget: float) -> float:
    q = BoundQuery.from_budget(profile, model, budget)
    L = float(q.eff_budget)
    nu, rho = profile.nu, profile.rho
    if L < 1:
        return nu / rho
    exact = theorem3_bound(q)
    low = _depths(q, lambert_w_lower)
    if isinstance(model, Cutoff):
        return nu / rho * rho ** low["h"]
    h = low["h1"] if exact.regime == "high" else low["h2"]
    if isinstance(model, PolyDecay):
        tail = 2 * model.A / L**model.alpha
    else:
        tail = 2 * model.B * math.exp(-(L**model.beta) / model.sigma)
    return 3 * nu / rho * rho**h + tail


def corollary4_rate(q: BoundQuery) -> RateDescriptor:
    """Rate tag for the regime of ``q`` and an envelope of the upper bound."""
    p, m = q.profile, q.model
    d = p.d
    regime = theorem3_bound(q).regime
    env = lambda budget: _envelope_bound(p, m, budget)
    if isinstance(m, PolyDecay):
        al = m.alpha
        if d == 0:
            return RateDescriptor("Θ̃(Λ^{−α})", "poly", -al, regime, env)
        if regime == "high":
            return RateDescriptor("Θ̃(Λ^{−1/(d+1/α)})", "poly", -1.0 / (d + 1.0 / al), regime, env)
        return RateDescriptor("Θ̃(Λ^{−1/d} + Λ^{−α})", "poly", max(-1.0 / d, -al), regime, env)
    if isinstance(m, ExpDecay):
        if d > 0:
            return RateDescriptor("Θ̃(Λ^{−1/d})", "poly", -1.0 / d, regime, env)
        if regime == "high":
            return RateDescriptor("exp(−Θ̃(Λ^{β/(1+β)}))", "exp", None, regime, env)
        return RateDescriptor("exp(−Θ̃(Λ^β)) + exp(−Θ̃(Λ))", "exp", None, regime, env)
    if d > 0:
        return RateDescriptor("Θ̃(Λ^{−1/d})", "poly", -1.0 / d, regime, env)
    return RateDescriptor("exp(−Θ̃(Λ))", "exp", None, regime, env)


# ---------------------------------------------------------------------------
# lower bounds


@dataclass(frozen=True)
class LowerBound:
    value: float
    valid_above: float
    constant: float
    case: str


def inverse_phi(model: CostToBiasModel | Callable[[float], float], y: float) -> float:
    """``inf {c >= 1 : Phi(c) <= y}`` (``inf`` if no cost reaches bias ``y``)."""
    if y < 0:
        return INF
    if isinstance(model, PolyDecay):
        if y == 0:
            return INF
        return max(1.0, (model.A / y) ** (1.0 / model.alpha))
    if isinstance(model, ExpDecay):
        if y >= model.B:
            return 1.0
        if y == 0:
            return INF
        return max(1.0, (model.sigma * math.log(model.B / y)) ** (1.0 / model.beta))
    if isinstance(model, Cutoff):
        return max(1.0, model.a)
    return _inverse_by_bisection(model, y)


def _inverse_by_bisection(f: Callable[[float], float], y: float) -> float:
    if f(1.0) <= y:
        return 1.0
    hi = 2.0
    while f(hi) > y:
        hi *= 2.0
        if hi > 1e300:
            return INF
    lo = hi / 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= y:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def theorem1_constants(profile: SmoothnessProfile, model: CostToBiasModel) -> dict:
    """The constants ``D1..D5`` that apply to ``(profile, model)``."""
    p = profile
    K, nu, rho, d = p.K, p.nu, p.rho, p.d
    lr = p.log_inv_rho
    out = {}
    if isinstance(model, PolyDecay):
        al = model.alpha
        s = d + 1.0 / al
        out["D1"] = K ** (-1.0 / s) * (2 / (nu * rho)) ** (-d / s) * (2 / (rho * model.A)) ** (-1.0 / (1 + d * al))
    elif isinstance(model, ExpDecay):
        if d == 0:
            b = model.beta
            D = 4 ** (1 + 1 / b) * lr * model.sigma ** (-1 / b)
            out["D"] = D
            out["D2"] = 2 * D ** (b / (1 + b))
        else:
            out["D3"] = d3_constant(p)
    else:
        if d == 0:
            out["D4"] = 8 * lr / model.a
        else:
            out["D5"] = d3_constant(p)
    return out


def d3_constant(profile: SmoothnessProfile) -> float:
    """``(nu rho / 2) K**(-1/d)``; only defined for ``d > 0``."""
    if profile.d == 0:
        raise CaseError("this constant needs d > 0")
    return profile.nu * profile.rho / 2 * profile.K ** (-1.0 / profile.d)


def theorem1_lower(profile: SmoothnessProfile, model: CostToBiasModel, budget: float) -> LowerBound:
    """Minimax lower bound at raw budget ``budget`` and the budget above which it holds."""
    p = profile
    K, nu, rho, d = p.K, p.nu, p.rho, p.d
    lr = p.log_inv_rho
    consts = theorem1_constants(p, model)
    if isinstance(model, PolyDecay):
        al = model.alpha
        s = d + 1.0 / al
        D1 = consts["D1"]
        r_min = min(rho * model.A / 2, nu * rho / 2)
        lam = lambda r: (1 / K) * (2 / (nu * rho)) ** (-d) * (2 / (rho * model.A)) ** (-1 / al) * r ** (-s)
        return LowerBound(D1 * budget ** (-1.0 / s), lam(r_min), D1, "a")
    if isinstance(model, ExpDecay) and d == 0:
        B, b, sigma = model.B, model.beta, model.sigma
        D2 = consts["D2"]
        L1 = math.log(nu / 4) - 8 * lr
        L2 = math.log((B / nu) ** 4 * nu / 4)
        r_min = min(nu * rho**6 / 4, (rho * B / nu) ** 4 * nu / 4, math.exp(2 * L1), math.exp(2 * L2))

        def lam(r):
            inner = sigma * math.log(rho * B / nu * (nu / (4 * r)) ** 0.25)
            return (math.log(nu / (4 * r)) / (4 * lr) - 2) * max(inner, 0.0) ** (1 / b)

        return LowerBound(math.exp(-D2 * budget ** (b / (1 + b))), lam(r_min), D2, "b, d=0")
    if isinstance(model, Cutoff) and d == 0:
        a = model.a
        D4 = consts["D4"]
        r_min = nu * rho**6 / 4
        lam_r = (math.log(nu / (4 * r_min)) / (4 * lr) - 2) * a
        extra = a / (4 * lr) * (math.log(4 / nu) + 8 * lr)
        return LowerBound(math.exp(-D4 * budget), max(lam_r, extra), D4, "c, d=0")
    D = d3_constant(p)
    # the threshold is the budget at r = nu rho / 2, i.e. 1/K
    return LowerBound(D * budget ** (-1.0 / d), 1.0 / K, D, ("b" if isinstance(model, ExpDecay) else "c") + ", d>0")


def _sup_feasible(cond: Callable[[float], bool], r_top: float, r_floor: float = 1e-300) -> float:
    """``sup {r in (0, r_top] : cond(r)}`` for ``cond`` true on an initial segment."""
    if cond(r_top):
        return r_top
    if not cond(r_floor):
        return 0.0
    lo, hi = math.log(r_floor), math.log(r_top)
    while hi - lo > 1e-12 * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if cond(math.exp(mid)):
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def lemma6_bound(profile: SmoothnessProfile, model: CostToBiasModel | Callable[[float], float],
                 budget: float, variant: str = "a") -> float:
    """Lower bound on the regret from the width (``a``) or depth (``b``) construction.

    Variant ``a``: the largest ``r <= nu rho / 2`` with
    ``budget <= (1/K) (2r/(nu rho))**(-d) * inv_phi(2r/rho)``.
    Variant ``b``: the largest ``r <= nu rho**6 / 4`` with
    ``budget <= (ln(nu/(4r)) / (4 ln(1/rho)) - 2) * inv_phi((nu/rho)(4r/nu)**(1/4))``.
    Both conditions hold on an initial segment of ``r`` and are located by bisection.
    """
    p = profile
    K, nu, rho, d = p.K, p.nu, p.rho, p.d
    lr = p.log_inv_rho
    if variant == "a":
        cond = lambda r: budget <= (1 / K) * (2 * r / (nu * rho)) ** (-d) * inverse_phi(model, 2 * r / rho)
        return _sup_feasible(cond, nu * rho / 2)
    if variant == "b":
        result = _sup_feasible(_lemma6b_condition(p, model, budget), nu * rho**6 / 4)
        alt = lemma6b_proof_reading(p, model, budget)
        if (result > 0) != (alt > 0):
            log.warning("depth lower bound: statement and proof readings disagree on feasibility "
                        "(budget=%g: %g vs %g)", budget, result, alt)
        return result
    raise ValueError(f"unknown variant {variant!r}")


def _lemma6b_condition(p: SmoothnessProfile, model, budget: float) -> Callable[[float], bool]:
    nu, rho, lr = p.nu, p.rho, p.log_inv_rho

    def cond(r):
        factor = math.log(nu / (4 * r)) / (4 * lr) - 2
        if factor <= 0:
            return False
        return budget <= factor * inverse_phi(model, nu / rho * (4 * r / nu) ** 0.25)

    return cond


def lemma6b_proof_reading(profile: SmoothnessProfile, model, budget: float) -> float:
    """Depth bound as derived in the construction: ``(nu/4) rho**(4(h+2))`` for the
    largest real ``h >= 1`` with ``h * inv_phi(nu rho**h) >= budget``."""
    p = profile
    nu, rho = p.nu, p.rho
    cond = lambda h: h * inverse_phi(model, nu * rho**h) >= budget
    if not cond(1.0):
        # the condition only gets easier with depth, so look for the smallest valid h
        lo, hi = 1.0, 2.0
        while not cond(hi):
            hi *= 2.0
            if hi > 1e12:
                return 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if cond(mid):
                hi = mid
            else:
                lo = mid
        h = hi
    else:
        h = 1.0
    return nu / 4 * rho ** (4 * (h + 2))
