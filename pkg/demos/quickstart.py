"""Run the optimizer on a random tree instance and compare with its regret bound."""
from kometo import (BoundQuery, FidelityEnvironment, FidelitySchedule, KometoConfig, PolyDecay, SmoothnessProfile,
                    random_tree_instance, run, theorem3_bound)

profile = SmoothnessProfile.with_min_constant(nu=1.0, rho=0.5, d=0.5, K=2)
model = PolyDecay(A=1.0, alpha=1.0)
instance = random_tree_instance(profile, model, horizon=12, seed=0)

print(f"{'budget':>9} {'eff':>5} {'spent':>10} {'regret':>11} {'bound':>11}")
for budget in (1e3, 1e4, 1e5):
    env = FidelityEnvironment(instance, FidelitySchedule(model), budget)
    trace = run(KometoConfig(budget), env)
    bound = theorem3_bound(BoundQuery.from_budget(profile, model, budget))
    print(f"{budget:9g} {trace.effective_budget:5d} {trace.spent:10.1f} {trace.regret:11.3e} {bound.regret_bound:11.3e}")
