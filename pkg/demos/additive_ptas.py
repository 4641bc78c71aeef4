"""
Additive approximation through cut decompositions
=================================================

A weak-regularity decomposition splits the vertices into a few atoms. The
best way to send whole atoms to clusters is found by enumeration, and a
vertex's label is the cluster of its atom.
"""

import numpy as np

from localcc import (SeedContext, brute_force_opt, cost, generate_planted, planted_oracle,
                     ptas_explicit, ptas_local_cluster, ptas_preprocess)

eps = 0.3
for s in range(5):
    g, _ = generate_planted(11, 3, 0.15, SeedContext(s))
    labels, h = ptas_explicit(eps, g.oracle(), SeedContext(s), g=g, return_handle=True)
    opt = brute_force_opt(g).opt_cost
    print(f"instance {s}: OPT {opt:>2}, PTAS {cost(g, labels):>2}, "
          f"allowed {opt + eps * 121:.1f}; width {h.decomp.width}, atoms {h.num_atoms}")

# sampled mode probes a vertex set fixed in advance, whose size does not depend on n.
# with the default retry count that set still covers every vertex of these graphs,
# so fewer retries and a small width keep the demo cheap; per-vertex probes stay flat
for n in (1000, 10000, 100000):
    oracle, _ = planted_oracle(n, 2, 0.05, SeedContext(1))
    h = ptas_preprocess(0.5, oracle, SeedContext(2), mode="sampled", decomposition="fk",
                        max_width=3, fk_options={"max_sample": 64, "retries": 8})
    before = oracle.query_count
    ptas_local_cluster(17, h, oracle)
    print(f"n={n}: {h.stats['preprocessing_queries']} preprocessing probes, "
          f"{oracle.query_count - before} probes for one vertex")
