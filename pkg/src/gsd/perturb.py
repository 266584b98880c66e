"""Targeted edge addition that steers the homophily of a node set.

Homophilic mode joins two targeted nodes of the same label. Heterophilous
mode draws a partner label c ~ D[y_i] (D has zero diagonal) and joins i to a
targeted node of label c. Edges only ever connect targeted nodes, so every
other node keeps its neighborhood and its homophily ratio.
"""
from dataclasses import dataclass

import numpy as np

from .errors import SaturationError, ValidationError
from .graph import node_homophily
from .seeding import substream

HOMO = "homo"
HETERO = "hetero"
REJECTION_LIMIT = 10**6


def circulant_targets(num_classes):
    """Default D: half the mass on each of (c - 1) mod K and (c + 1) mod K."""
    k = num_classes
    if k < 2:
        raise ValidationError("heterophilous edges need at least two classes")
    d = np.zeros((k, k))
    for c in range(k):
        d[c, (c - 1) % k] += 0.5
        d[c, (c + 1) % k] += 0.5
    return d


@dataclass(frozen=True, eq=False)
class PerturbPlan:
    targets: np.ndarray
    budget: int
    mode: str = HOMO
    label_dist: np.ndarray = None
    seed: int = 0
    rejection_limit: int = REJECTION_LIMIT

    def __post_init__(self):
        t = np.unique(np.asarray(self.targets, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "targets", t)
        if self.mode not in (HOMO, HETERO):
            raise ValidationError(f"mode must be {HOMO!r} or {HETERO!r}")
        if int(self.budget) < 0:
            raise ValidationError("budget must be non-negative")
        object.__setattr__(self, "budget", int(self.budget))
        if self.label_dist is not None:
            d = np.asarray(self.label_dist, dtype=np.float64)
            if d.ndim != 2 or d.shape[0] != d.shape[1]:
                raise ValidationError("label distribution must be a K x K matrix")
            if np.any(d < 0) or not np.allclose(d.sum(axis=1), 1.0, atol=1e-12):
                raise ValidationError("label distribution rows must be probability vectors")
            if np.any(np.diag(d) != 0):
                raise ValidationError("label distribution must put zero mass on c itself")
            object.__setattr__(self, "label_dist", d)


def _check(g, plan):
    t = plan.targets
    if len(t) and (t.min() < 0 or t.max() >= g.num_nodes):
        raise ValidationError("targeted node out of range")
    if plan.mode == HETERO:
        d = plan.label_dist if plan.label_dist is not None else circulant_targets(g.num_classes)
        if d.shape[0] != g.num_classes:
            raise ValidationError("label distribution size must equal num_classes")
        return np.cumsum(d, axis=1)
    return None


def edge_trace(g, plan):
    """Sample the ordered list of new edges (budget x 2, as drawn i, j)."""
    cdf = _check(g, plan)
    rng = substream(plan.seed, "perturb")
    n = g.num_nodes
    targets = plan.targets
    trace = np.zeros((plan.budget, 2), dtype=np.int64)
    if plan.budget == 0:
        return trace
    if len(targets) == 0:
        raise ValidationError("no targeted nodes to connect")
    y = g.labels
    pools = [targets[y[targets] == c] for c in range(g.num_classes)]
    existing = set((g.edges[:, 0] * n + g.edges[:, 1]).tolist())
    for step in range(plan.budget):
        rejected = 0
        while True:
            i = int(targets[rng.integers(len(targets))])
            if cdf is None:
                c = y[i]
            else:
                c = min(int(np.searchsorted(cdf[y[i]], rng.random(), side="right")),
                        g.num_classes - 1)
            pool = pools[c]
            if len(pool):
                j = int(pool[rng.integers(len(pool))])
                key = min(i, j) * n + max(i, j)
                if i != j and key not in existing:
                    break
            rejected += 1
            if rejected >= plan.rejection_limit:
                raise SaturationError(step, plan.budget, plan.rejection_limit)
        existing.add(key)
        trace[step] = (i, j)
    return trace


def apply_trace(g, trace):
    """Bundle with the trace's edges added (canonicalized and re-sorted)."""
    if len(trace) == 0:
        return g
    new = np.sort(np.asarray(trace, dtype=np.int64), axis=1)
    edges = np.concatenate([g.edges, new])
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return g.with_edges(edges[order])


def add_edges(g, plan):
    """Return (perturbed bundle, trace) with exactly ``plan.budget`` new edges."""
    trace = edge_trace(g, plan)
    return apply_trace(g, trace), trace


def targeted_homophily(g, targets):
    """Mean one-hop homophily over targeted nodes with a defined ratio."""
    h = node_homophily(g, 1).values[np.asarray(targets, dtype=np.int64)]
    h = h[~np.isnan(h)]
    return float(h.mean()) if len(h) else float("nan")


def sweep(g, plan, checkpoints):
    """Perturbed bundles at increasing budgets along one random trajectory.

    Returns a list of (K, bundle, targeted homophily). The bundle at a smaller
    K is always a subgraph of the bundle at a larger K.
    """
    ks = [int(k) for k in checkpoints]
    if not ks:
        return []
    if any(k < 0 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValidationError("checkpoints must be non-negative and strictly ascending")
    full = PerturbPlan(plan.targets, ks[-1], plan.mode, plan.label_dist, plan.seed,
                       plan.rejection_limit)
    trace = edge_trace(g, full)
    out = []
    for k in ks:
        gk = apply_trace(g, trace[:k])
        out.append((k, gk, targeted_homophily(gk, plan.targets)))
    return out
