"""Seeded experiment pipelines built from the library pieces.

``table_d2`` measures how well logistic regression fits one-hop
mean-aggregated features of homophilic graphs, heterophilic graphs and
their pooled mixtures. ``family_graph`` builds the two-pattern
synthetic graphs used for the subgroup comparisons.
"""
import numpy as np

from .csbm import CsbmSpec, generate
from .graph import PLAIN, GraphBundle, aggregate
from .models import TrainConfig, train
from .seeding import derive_seed, substream

HOMO_RATES = ((0.01, 0.005), (0.01, 0.003), (0.01, 0.001))
HETERO_RATES = ((0.001, 0.005), (0.001, 0.003), (0.001, 0.002))

# logistic regression fit for the separability table
D2_CONFIG = TrainConfig(hops=0, layers=1, lr=1.0, epochs=300, l2=1e-4, patience=0)


def disjoint_union(graphs, name="union"):
    """Place bundles side by side; node ids of later graphs are shifted."""
    offset = 0
    edges, feats, labels, groups = [], [], [], []
    for j, g in enumerate(graphs):
        edges.append(g.edges + offset)
        feats.append(g.features)
        labels.append(g.labels)
        groups.append(np.full(g.num_nodes, j, dtype=np.int64))
        offset += g.num_nodes
    k = max(g.num_classes for g in graphs)
    return GraphBundle(offset, np.concatenate(edges), np.concatenate(feats),
                       np.concatenate(labels), k, subgroups=np.concatenate(groups), name=name)


def fit_accuracy(g, config=D2_CONFIG):
    """Training accuracy of a classifier fit on every node's D^-1 A X row."""
    f = aggregate(g, 1, PLAIN)
    gm = g.with_masks({"train": np.arange(g.num_nodes)})
    model = train(gm, config, features=f)
    return float(np.mean(model.predict(gm, f) == g.labels))


def d2_graph(rates, seed, rho=0.1, dim=50, n=500):
    spec = CsbmSpec.from_rho(rho, dim, [rates], [1.0], n,
                             seed=derive_seed(seed, f"d2/{rates[0]}/{rates[1]}"))
    return generate(spec)


def table_d2(seeds, rho=0.1, dim=50, n=500, config=D2_CONFIG,
             homo=HOMO_RATES, hetero=HETERO_RATES):
    """Accuracy (percent) per seed for every cell of the separability table.

    Returns {(row, col): [acc per seed]} where row indexes ``hetero`` and col
    indexes ``homo``, with ``None`` standing for "no such subgroup". A
    mixture cell pools the two single-pattern graphs of its row and column
    as a disjoint union.
    """
    cells = {}
    for seed in seeds:
        hg = [d2_graph(r, seed, rho, dim, n) for r in homo]
        eg = [d2_graph(r, seed, rho, dim, n) for r in hetero]
        for c, g in enumerate(hg):
            cells.setdefault((None, c), []).append(100 * fit_accuracy(g, config))
        for r, g in enumerate(eg):
            cells.setdefault((r, None), []).append(100 * fit_accuracy(g, config))
        for r, ge in enumerate(eg):
            for c, gh in enumerate(hg):
                acc = fit_accuracy(disjoint_union([gh, ge]), config)
                cells.setdefault((r, c), []).append(100 * acc)
    return cells


def format_rates(rates):
    return f"p={rates[0]:g} q={rates[1]:g}"


def table_d2_rows(cells, homo=HOMO_RATES, hetero=HETERO_RATES):
    """Rows for the wide CSV layout (first column names the heterophilic config)."""
    header = ["hetero\\homo", "-"] + [format_rates(r) for r in homo]
    rows = [header]
    for r in [None] + list(range(len(hetero))):
        row = ["-" if r is None else format_rates(hetero[r])]
        for c in [None] + list(range(len(homo))):
            vals = cells.get((r, c))
            row.append("-" if not vals else f"{np.mean(vals):.2f}±{np.std(vals):.2f}")
        rows.append(row)
    return rows


# ------------------------------------------------------ disparity family

FAMILY_RATES = ((0.9, 0.1), (0.1, 0.9))


def family_spec(pr_homo, seed, n=2000, dim=16, rho=1.0, rates=FAMILY_RATES, edge_rule="rarer"):
    return CsbmSpec.from_rho(rho, dim, rates, [pr_homo, 1.0 - pr_homo], n, seed=seed,
                             edge_rule=edge_rule, name=f"csbm-s-{pr_homo:g}")


def random_masks(n, seed, train_frac=0.1, val_frac=0.1):
    """Uniform random train/val/test split; the test set takes the rest."""
    perm = substream(seed, "random-split").permutation(n)
    a = int(round(train_frac * n))
    b = a + int(round(val_frac * n))
    return {"train": np.sort(perm[:a]), "val": np.sort(perm[a:b]), "test": np.sort(perm[b:])}


def per_class_masks(labels, seed, per_class=20, num_val=500):
    """Sparse-label split: ``per_class`` train nodes per class, ``num_val``
    validation nodes, all remaining nodes for testing."""
    rng = substream(seed, "label-split")
    labels = np.asarray(labels)
    train = np.concatenate([rng.permutation(np.flatnonzero(labels == c))[:per_class]
                            for c in np.unique(labels)])
    rest = rng.permutation(np.setdiff1d(np.arange(len(labels)), train))
    return {"train": np.sort(train), "val": np.sort(rest[:num_val]),
            "test": np.sort(rest[num_val:])}


def family_graph(pr_homo, seed, per_class=20, num_val=500, **kw):
    """Two-pattern graph with a sparse-label split (20 per class by default)."""
    g = generate(family_spec(pr_homo, seed, **kw))
    return g.with_masks(per_class_masks(g.labels, seed, per_class, num_val))
