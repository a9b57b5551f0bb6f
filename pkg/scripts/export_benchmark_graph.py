#!/usr/bin/env python3
"""Generate a benchmark topology and write it as a plain-text edge list.

Produces the random geometric graph used by the figure recipes so it can be
inspected, versioned or fed back through ``--graph``.

Usage:
    python scripts/export_benchmark_graph.py [N] [SEED] [TARGET_RHO]
"""

import sys
from pathlib import Path

from maxcons.graph import benchmark_graph, diameter, spectral_radius, write_graph

OUTPUT_DIR = Path(__file__).resolve().parent.parent / "out" / "graphs"


def main() -> None:
    n_nodes = int(sys.argv[1]) if len(sys.argv) > 1 else 75
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    target_rho = float(sys.argv[3]) if len(sys.argv) > 3 else None

    print(f"Generating benchmark graph N={n_nodes} seed={seed} ...")
    g = benchmark_graph(n_nodes, seed=seed, target_rho=target_rho)
    print(f"Built {g.edge_count} edges, rho={spectral_radius(g):.4f}, diameter={diameter(g)}")

    suffix = f"_rho{target_rho:g}" if target_rho is not None else ""
    output_path = OUTPUT_DIR / f"benchmark_n{n_nodes}_seed{seed}{suffix}.txt"
    output_path.parent.mkdir(parents=True, exist_ok=True)
    write_graph(g, output_path)
    print(f"Wrote {output_path}")


if __name__ == "__main__":
    main()
