"""Two ablations with a noisy oracle: graph density and ensemble size.

Density controls how much work traversal does and how much signal it has;
the representative count K controls how well majority voting suppresses a
30% flip rate. Both sweeps print small tab-separated tables.

    python3 demos/noisy_sweeps.py
"""

import numpy as np

from clusterwalk import (
    EnsembleNoisyOracle,
    PlantedSpec,
    TraversalConfig,
    build_graph,
    generate_dataset,
    nmi,
    run_clustering,
)

spec = PlantedSpec(
    n_nodes=300,
    n_classes=3,
    dimension=16,
    noise_sigma=0.3,
    seed=21,
    min_prototype_separation=0.1,
)
records, _ = generate_dataset(spec)
labels = {r.id: r.label for r in records}
vectors = np.array([r.vector for r in records])
upper = np.triu_indices(len(records), k=1)
weights = np.sort(1.0 / (1.0 + np.exp(-14.2857 * (vectors @ vectors.T)[upper])))

SEEDS = range(5)


def mean_run(g, k, p):
    scores, counts = [], []
    for seed in SEEDS:
        oracle = EnsembleNoisyOracle(labels, flip_probability=p, seed=seed)
        clusters, trace = run_clustering(g, oracle, TraversalConfig(k=k, seed=seed))
        scores.append(nmi([c.members for c in clusters], labels))
        counts.append(trace.membership_assessments)
    return float(np.mean(scores)), float(np.mean(counts))


print("density\ttau\tassessments\tnmi")
for density in (0.002, 0.005, 0.01, 0.02):
    keep = int(round(density * weights.size))
    tau = float(weights[-keep])
    g = build_graph(records, tau=tau)
    score, count = mean_run(g, k=3, p=0.2)
    print(f"{density:.3f}\t{tau:.6f}\t{count:.0f}\t{score:.3f}")

print()
print("k\tnmi")
g = build_graph(records, tau=float(weights[-int(round(0.01 * weights.size))]))
for k in (1, 2, 3, 4):
    score, _ = mean_run(g, k=k, p=0.3)
    print(f"{k}\t{score:.3f}")
