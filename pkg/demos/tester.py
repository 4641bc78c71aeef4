"""
Testing clusterability with a handful of probes
===============================================

The tester looks at a constant number of vertex pairs and says whether a
graph is a cluster graph or far from every cluster graph.
"""

import numpy as np

from localcc import SeedContext, brute_force_opt, cluster_graph, random_graph, test_clusterable

eps = 0.1

close = cluster_graph(np.repeat(np.arange(6), [40, 30, 20, 20, 10, 10]))
verdicts = [test_clusterable(eps, close.oracle(), SeedContext(s)).verdict for s in range(20)]
print("cluster graph, n=130:", {v: verdicts.count(v) for v in set(verdicts)})

# a small random graph whose optimal cost, checked by brute force, exceeds eps n^2
g = random_graph(12, 0.5, 503)
opt = brute_force_opt(g).opt_cost
res = [test_clusterable(eps, g.oracle(), SeedContext(s)) for s in range(20)]
print(f"random n=12 graph, OPT = {opt} > eps n^2 = {eps * 144:.1f}:",
      sum(not r.accept for r in res), "of 20 runs reject")
print(f"threshold {res[0].threshold:.4f}, estimate {res[0].estimate:.4f}, probes {res[0].queries}")
