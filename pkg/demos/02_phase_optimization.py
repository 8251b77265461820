"""Minimize the weighted CRB over unit-modulus RIS phases.

Builds a phase history of random cycles, then lets the manifold optimizer
choose the next cycle and prints the objective trace.
"""
import numpy as np

from hybridloc import CcmConfig, CrbObjective, CrbWeights, Region, RisConfig, UserEstimate, optimize_phase_shifts

ris = RisConfig.from_frequency(10, 10, 5e9)
rng = np.random.default_rng(0)
N = ris.n_elements


def h_a():
    return (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2)


users = [
    UserEstimate(Region.NEAR_FIELD, 1.2, 0.3, 2.0, 1.0, h_a()),
    UserEstimate(Region.FAR_FIELD, 1.9, -0.6, None, 1.0, h_a()),
]
history = np.exp(2j * np.pi * rng.uniform(size=(4, N)))
obj = CrbObjective(users, history, CrbWeights(), 0.1, ris)

trace = []
res = optimize_phase_shifts(obj, history[-1], CcmConfig(), lambda j, *rest: trace.append(rest[-1]))
print(f"objective {res.initial_objective:.4g} -> {res.objective:.4g} in {len(trace)} iterations")
for j in range(0, len(trace), max(1, len(trace) // 8)):
    print(f"  iter {j:3d}: {trace[j]:.5g}")
print(f"max ||beta| - 1| = {np.max(np.abs(np.abs(res.beta) - 1)):.1e}")
