import math

import numpy as np
import pytest

from kometo.benchmarks import NAMES, SPECS, benchmark, benchmark_environment, compute_optimum
from kometo.fidelity import Cutoff, FidelitySchedule

# published optima, maximization sign
LITERATURE = {
    "branin": -0.397887,
    "hartmann3": 3.86278,
    "hartmann6": 3.32237,
    "currin": 13.7986850,
}


def grid(name: str, n: int = 10_000) -> np.ndarray:
    box = np.array(SPECS[name].box, dtype=float)
    dim = len(box)
    per = int(round(n ** (1 / dim)))
    if per**dim == n:
        axes = [np.linspace(a, b, per) for a, b in box]
        return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dim)
    u = np.random.default_rng(0).random((n, dim))
    return box[:, 0] + (box[:, 1] - box[:, 0]) * u


class TestOptima:
    @pytest.mark.parametrize("name", sorted(LITERATURE))
    def test_matches_literature(self, name):
        value, _ = compute_optimum(name)
        assert value == pytest.approx(LITERATURE[name], abs=1e-4)
        assert SPECS[name].optimum == pytest.approx(value, abs=1e-9)

    def test_borehole_vertex(self):
        spec = SPECS["borehole"]
        value, _ = compute_optimum("borehole")
        vertex = float(spec.f(np.array(spec.argmax)[None])[0])
        assert value == pytest.approx(vertex, abs=1e-4)
        assert spec.optimum == pytest.approx(vertex, rel=1e-12)

    def test_branin_minimizer(self):
        f = benchmark("branin")
        assert f.target((math.pi, 2.275)) == pytest.approx(-0.397887, abs=1e-6)

    def test_regret_at_argmax(self):
        env = benchmark_environment("branin", 100)
        assert env.regret((math.pi, 2.275)) == pytest.approx(0.0, abs=1e-6)
        assert env.spent == 0

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            benchmark("rosenbrock")


@pytest.mark.parametrize("name", NAMES)
class TestBlend:
    def test_envelope_on_grid(self, name):
        f = benchmark(name)
        X = grid(name)
        target = f.spec.f(X)
        for bias in [0.0, 1e-3, 0.1, 0.5 * f.gap, f.gap, 10 * f.gap]:
            assert np.all(np.abs(target - f.fidelity_array(X, bias)) <= bias + 1e-12 * np.abs(target).max())

    def test_top_fidelity_is_exact(self, name):
        env = benchmark_environment(name, 1e4, model=Cutoff(100.0), max_cost=100.0)
        x = tuple(np.mean(SPECS[name].box, axis=1))
        assert env.evaluate_at_cost(x, 100.0) == env.function.target(x)

    def test_scalar_and_array_agree(self, name):
        f = benchmark(name)
        X = grid(name, 64)
        for x, v in zip(X[:8], f.fidelity_array(X[:8], 0.2)):
            assert f.fidelity(tuple(x), 0.5, 0.2) == pytest.approx(v, rel=1e-12, abs=1e-12)
