"""Tour of the network families and their spectral diagnostics.

Builds each topology at a small size, assigns in-degree weights, and prints
the quantities that drive everything else in the package: the stationary
vector's skew (kappa), the contraction factor of one gossip round (beta),
and the certified bound on inverse diagonals of the matrix powers (theta).

Run: python demos/network_metrics_tour.py
"""

import numpy as np

from rowgossip import (
    build_directed_ring,
    build_exponential,
    build_geometric,
    build_grid,
    build_nearest_neighbor,
    compute_metrics,
    weights_from_indegree,
)

FAMILIES = [
    ("exponential n=8", build_exponential(8)),
    ("exponential n=16", build_exponential(16)),
    ("directed ring n=16", build_directed_ring(16)),
    ("grid 4x4", build_grid(4, 4)),
    ("geometric n=16 r=0.4", build_geometric(16, 0.4, seed=7)),
    ("nearest-neighbor n=16 k=3", build_nearest_neighbor(16, 3, seed=7)),
]


def main():
    print(f"{'family':28s} {'beta':>8s} {'kappa':>8s} {'theta':>10s} {'s':>10s}")
    for name, graph in FAMILIES:
        matrix = weights_from_indegree(graph)
        met = compute_metrics(matrix)
        print(f"{name:28s} {met.beta:8.4f} {met.kappa:8.3f} {met.theta:10.1f} {met.s_a:10.3f}")

    print()
    print("Reading the table:")
    print(" * beta close to 1 means slow mixing; one gossip round barely averages.")
    print(" * kappa > 1 means plain gossip converges to a biased (weighted) mean.")
    print(" * theta is the certified worst inverse diagonal across all matrix")
    print("   powers; a huge value (directed ring: 2^15) signals that early")
    print("   diagonal corrections in gradient tracking amplify noise violently,")
    print("   which is exactly what multi-step gossip repairs.")

    ring = weights_from_indegree(build_directed_ring(16))
    diag = np.diag(np.linalg.matrix_power(ring.weights, 15)).min()
    print()
    print(f"Directed ring check: min diagonal of the 15th power is {diag:.3e} = 2^-15,")
    print("so the tracker would multiply a gradient by", f"{1/diag:.0f}", "at step 15.")


if __name__ == "__main__":
    main()
