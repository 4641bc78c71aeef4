"""
Streams and processors agree with the in-memory run
===================================================

One pass, two passes and a two-round distributed protocol all keep just the
edges the pivot pipeline can look at, so they return the exact same
clustering as the in-memory algorithm with the same seed.
"""

from localcc import (ProcessorPartition, SeedContext, explicit_cluster, generate_planted,
                     simulate_distributed, stream_from_graph, stream_one_pass, stream_two_pass)

eps = 0.2
seed = SeedContext(11)
g, _ = generate_planted(300, 5, 0.05, seed.child("graph"))
stream = stream_from_graph(g, seed=seed.child("order"))

ref = explicit_cluster(eps, g.oracle(), seed)
one, s1 = stream_one_pass(stream, eps, seed, return_stats=True)
two, s2 = stream_two_pass(stream, eps, seed, return_stats=True)
dist, tr = simulate_distributed(ProcessorPartition.from_graph(g, 8, seed.child("p")), eps, seed)

print("one pass  == in-memory:", (one == ref).all(), f"(memory {s1.memory}, bound {s1.bound})")
print("two passes == in-memory:", (two == ref).all(), f"(memory {s2.memory}, bound {s2.bound})")
print("8 processors == in-memory:", (dist == ref).all(),
      f"(round messages {[sum(r) for r in tr.messages]})")
print(f"stream had {len(stream)} events over n={g.n} vertices")
