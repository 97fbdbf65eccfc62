"""Standard multi-fidelity synthetic benchmarks, oriented for maximization.

Each benchmark pairs a target ``f`` with a cheap variant ``f_low``.  The
fidelity family is the convex blend

    f_z = (1 - w) f + w f_low,   w = min(1, zeta(z) / M),

where ``M`` bounds ``|f - f_low|`` on the box (measured on a dense sample,
refined locally and inflated by 5%).  Then ``|f - f_z| = w |f - f_low| <= zeta(z)``
wherever the bound holds, which is the envelope the optimizers rely on.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .fidelity import CostToBiasModel, FidelityEnvironment, FidelitySchedule, PolyDecay
from .partition import Box

ArrayFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# formulas; all take an array of shape (n, D) and return shape (n,)


def _branin(X, b=5.1 / (4 * math.pi**2), c=5 / math.pi, t=1 / (8 * math.pi)):
    x1, x2 = X[:, 0], X[:, 1]
    return -((x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1 - t) * np.cos(x1) + 10.0)


def _branin_low(X):
    return _branin(X, b=5.1 / (4 * math.pi**2) - 0.01, c=5 / math.pi - 0.1, t=1 / (8 * math.pi) + 0.05)


_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_A3 = np.array([[3.0, 10, 30], [0.1, 10, 35], [3.0, 10, 30], [0.1, 10, 35]])
_P3 = 1e-4 * np.array([[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]])
_A6 = np.array([[10, 3, 17, 3.5, 1.7, 8], [0.05, 10, 17, 0.1, 8, 14],
                [3, 3.5, 1.7, 10, 17, 8], [17, 8, 0.05, 10, 0.1, 14]])
_P6 = 1e-4 * np.array([[1312, 1696, 5569, 124, 8283, 5886], [2329, 4135, 8307, 3736, 1004, 9991],
                       [2348, 1451, 3522, 2883, 3047, 6650], [4047, 8828, 8732, 5743, 1091, 381]])


def _hartmann(X, A, P, alpha=_ALPHA):
    inner = np.sum(A[None] * (X[:, None, :] - P[None]) ** 2, axis=2)
    return np.exp(-inner) @ alpha


def _currin(X):
    x1, x2 = X[:, 0], X[:, 1]
    with np.errstate(divide="ignore", over="ignore"):
        factor = np.where(x2 > 0, 1.0 - np.exp(-1.0 / (2.0 * np.where(x2 > 0, x2, 1.0))), 1.0)
    return factor * (2300 * x1**3 + 1900 * x1**2 + 2092 * x1 + 60) / (100 * x1**3 + 500 * x1**2 + 4 * x1 + 20)


def _currin_low(X):
    out = np.zeros(len(X))
    for d1, d2 in ((0.05, 0.05), (0.05, -0.05), (-0.05, 0.05), (-0.05, -0.05)):
        Y = X.copy()
        Y[:, 0] += d1
        Y[:, 1] = np.maximum(0.0, Y[:, 1] + d2)
        out += _currin(Y)
    return out / 4.0


def _borehole(X, num=2 * math.pi, extra=1.0):
    rw, r, Tu, Hu, Tl, Hl, L, Kw = (X[:, k] for k in range(8))
    lg = np.log(r / rw)
    return num * Tu * (Hu - Hl) / (lg * (extra + 2 * L * Tu / (lg * rw**2 * Kw) + Tu / Tl))


def _borehole_low(X):
    return _borehole(X, num=5.0, extra=1.5)


_BOREHOLE_BOX = [[0.05, 0.15], [100, 50000], [63070, 115600], [990, 1110],
                 [63.1, 116], [700, 820], [1120, 1680], [9855, 12045]]


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    box: tuple
    f: ArrayFn
    f_low: ArrayFn
    optimum: float
    argmax: Optional[tuple] = None


# reference optima, reproduced by `compute_optimum` (dense sample + L-BFGS-B)
SPECS = {
    "branin": BenchmarkSpec("branin", ((-5.0, 10.0), (0.0, 15.0)), _branin, _branin_low,
                            -0.39788735772973816, (math.pi, 2.275)),
    "hartmann3": BenchmarkSpec("hartmann3", ((0.0, 1.0),) * 3,
                               lambda X: _hartmann(X, _A3, _P3),
                               lambda X: _hartmann(X, _A3, _P3, _ALPHA - 0.1), 3.862779787332662),
    "hartmann6": BenchmarkSpec("hartmann6", ((0.0, 1.0),) * 6,
                               lambda X: _hartmann(X, _A6, _P6),
                               lambda X: _hartmann(X, _A6, _P6, _ALPHA - 0.1), 3.322368011415512),
    "currin": BenchmarkSpec("currin", ((0.0, 1.0),) * 2, _currin, _currin_low, 13.798722044728434),
    # monotone in every input: the sup sits at a vertex of the box
    "borehole": BenchmarkSpec("borehole", tuple(tuple(p) for p in _BOREHOLE_BOX), _borehole, _borehole_low,
                              309.5755876604079, (0.15, 100.0, 115600.0, 1110.0, 116.0, 700.0, 1120.0, 12045.0)),
}

NAMES = tuple(SPECS)


def _spec(name: str) -> BenchmarkSpec:
    try:
        return SPECS[name]
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {', '.join(NAMES)}") from None


def _sample(spec: BenchmarkSpec, n: int, seed: int) -> np.ndarray:
    lo = np.array([a for a, _ in spec.box])
    hi = np.array([b for _, b in spec.box])
    return lo + (hi - lo) * np.random.default_rng(seed).random((n, len(lo)))


def _refine(fun: ArrayFn, spec: BenchmarkSpec, starts: np.ndarray) -> tuple[float, np.ndarray]:
    # optimize in unit-cube coordinates so the badly scaled boxes behave
    lo = np.array([a for a, _ in spec.box])
    hi = np.array([b for _, b in spec.box])
    g = lambda u: -float(fun((lo + (hi - lo) * u)[None])[0])
    best_v, best_x = -np.inf, None
    for x0 in starts:
        res = minimize(g, (x0 - lo) / (hi - lo), bounds=[(0.0, 1.0)] * len(lo), method="L-BFGS-B",
                       options={"ftol": 1e-15, "gtol": 1e-12})
        if -res.fun > best_v:
            best_v, best_x = -res.fun, lo + (hi - lo) * res.x
    return best_v, best_x


def compute_optimum(name: str, n: int = 20000, n_starts: int = 20, seed: int = 0) -> tuple[float, np.ndarray]:
    """Estimate ``max f`` by a dense random sample followed by local refinement."""
    spec = _spec(name)
    X = _sample(spec, n, seed)
    v = spec.f(X)
    starts = X[np.argsort(-v)[:n_starts]]
    if spec.argmax is not None:
        starts = np.vstack([starts, np.array(spec.argmax)[None]])
    return _refine(spec.f, spec, starts)


@functools.lru_cache(maxsize=None)
def gap_bound(name: str, n: int = 20000, seed: int = 1, inflate: float = 1.05) -> float:
    """``M``: an inflated estimate of ``sup |f - f_low|`` on the box."""
    spec = _spec(name)
    gap = lambda X: np.abs(spec.f(X) - spec.f_low(X))
    X = _sample(spec, n, seed)
    v = gap(X)
    best, _ = _refine(gap, spec, X[np.argsort(-v)[:5]])
    return inflate * max(best, float(v.max()))


class BenchmarkFunction:
    """A benchmark target with its calibrated fidelity blend."""

    def __init__(self, name: str):
        spec = _spec(name)
        self.name = name
        self.spec = spec
        self.domain = Box.from_pairs(spec.box)
        self.sup = spec.optimum
        self.gap = gap_bound(name)

    def _eval(self, fun: ArrayFn, x) -> float:
        return float(fun(np.asarray(x, dtype=float)[None])[0])

    def target(self, x: Sequence[float], cell=None) -> float:
        return self._eval(self.spec.f, x)

    def low(self, x: Sequence[float]) -> float:
        return self._eval(self.spec.f_low, x)

    def weight(self, bias: float) -> float:
        return min(1.0, bias / self.gap)

    def fidelity(self, x: Sequence[float], z: float, bias: float, cell=None) -> float:
        w = self.weight(bias)
        if w == 0.0:
            return self.target(x)
        return (1.0 - w) * self.target(x) + w * self.low(x)

    def fidelity_array(self, X: np.ndarray, bias: float) -> np.ndarray:
        w = self.weight(bias)
        return (1.0 - w) * self.spec.f(X) + w * self.spec.f_low(X)


def benchmark(name: str) -> BenchmarkFunction:
    return BenchmarkFunction(name)


def default_model(name: str) -> CostToBiasModel:
    """Polynomial decay whose scale matches the measured fidelity gap."""
    return PolyDecay(A=gap_bound(name), alpha=1.0)


DEFAULT_MAX_COST = 100.0


def benchmark_environment(name: str, budget: float, model: Optional[CostToBiasModel] = None,
                          max_cost: float = DEFAULT_MAX_COST) -> FidelityEnvironment:
    fn = benchmark(name)
    schedule = FidelitySchedule(model or default_model(name), max_cost)
    return FidelityEnvironment(fn, schedule, budget)
