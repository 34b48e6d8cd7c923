"""
A conservative field on Z^2
===========================

The action (t1, t2) -> shift by t1 + t2 collapses the plane onto a line:
X_{(t1, t2)} only depends on t1 - t2. Counting how often each value of
t1 - t2 occurs in the box [-n, n]^2 gives the fibre volume V, and the
maxima over the box are governed by 4n + 1 independent sites.
"""

import numpy as np

from stablefield import (
    ActionGeometry,
    EventSpec,
    ExperimentConfig,
    StableFieldSpec,
    analyze_action,
    coset_counts,
    leb_delta,
    max_limit_conservative,
    q_volume,
    run_ldp_experiment,
)

group = analyze_action(np.array([[1], [1]]))
geom = ActionGeometry(group)
print(group)

# multiplicity of each coset against n * V(s / n)
n = 50
elems, _, counts = coset_counts(n, group)
for s, m in list(zip(elems[:, 1], counts))[::20]:
    print(f"s1={s:4d}  m/n={m / n:.3f}  V={q_volume(s / n, geom):.3f}")

print("Leb(Delta) =", leb_delta(geom))

spec = StableFieldSpec.conservative(1.0, {group.identity: 1.0}, group)
print(max_limit_conservative(spec, geom, 1.0))

# at these sizes the exceedance probability is not small, so the rescaled
# value sits well below the limit 4; it rises as n grows
cfg = ExperimentConfig(spec, (20, 40, 80), 0.5, 100_000, seed=2, event=EventSpec.max_exceed(1.0), geometry=geom)
for r in run_ldp_experiment(cfg):
    print(f"n={r.n:3d}  p_hat={r.p_hat:.4f}  scaled/4={r.scaled / 4:.3f}")
