"""Diagnostics of performance disparity between structural subgroups.

Covers the per-node disparity score and its equal-size bins, the relative
discriminative ratio of class prototypes, local k-NN agreement, homophily
gaps across hop orders, the subgroup majority rule, and a multi-bandwidth
Gaussian MMD.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ValidationError
from .graph import SELF_LOOP, aggregate, node_homophily

DEFAULT_SIGMAS = (0.01, 0.1, 1.0, 10.0, 100.0)

# rows of the query block per distance chunk; bounds peak memory
_CHUNK = 1024


def _as_index(idx, n=None):
    idx = np.asarray(idx)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    idx = idx.astype(np.int64).reshape(-1)
    if n is not None and len(idx) and (idx.min() < 0 or idx.max() >= n):
        raise ValidationError("node index out of range")
    return idx


def nearest_rows(query, ref):
    """Index into ``ref`` of each query row's L2-nearest row, and the distance.

    Ties resolve to the lowest reference index.
    """
    if len(ref) == 0:
        raise ValidationError("reference set is empty")
    nn = np.empty(len(query), dtype=np.int64)
    dist = np.empty(len(query))
    for s in range(0, len(query), _CHUNK):
        d = cdist(query[s:s + _CHUNK], ref)
        j = np.argmin(d, axis=1)
        nn[s:s + _CHUNK] = j
        dist[s:s + _CHUNK] = d[np.arange(len(j)), j]
    return nn, dist


def k_nearest_rows(query, ref, k):
    """Indices into ``ref`` of the k nearest rows per query (stable ties)."""
    if k > len(ref):
        raise ValidationError(f"need at least {k} reference rows, have {len(ref)}")
    out = np.empty((len(query), k), dtype=np.int64)
    for s in range(0, len(query), _CHUNK):
        d = cdist(query[s:s + _CHUNK], ref)
        out[s:s + _CHUNK] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


# ------------------------------------------------------- majority rule

def split_by_pattern(h, threshold=0.5, side=None):
    """Boolean (majority, minority) masks over nodes with a defined ratio.

    The homophilic side (h > threshold) is the majority when the graph-level
    mean exceeds the threshold, otherwise the heterophilic side (h <= threshold)
    is. ``side`` ("homo" or "hetero") forces the majority side.
    """
    h = np.asarray(h, dtype=np.float64)
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    defined = ~np.isnan(h)
    if not defined.any():
        raise ValidationError("no node has a defined homophily ratio")
    if side is None:
        side = "homo" if h[defined].mean() > threshold else "hetero"
    if side not in ("homo", "hetero"):
        raise ValidationError("side must be 'homo' or 'hetero'")
    homo = defined & (np.nan_to_num(h, nan=-1.0) > threshold)
    hetero = defined & ~homo
    return (homo, hetero) if side == "homo" else (hetero, homo)


# ---------------------------------------------------- disparity score

@dataclass(frozen=True, eq=False)
class DisparityReport:
    """Per-test-node disparity data, in ascending test-node order.

    ``bins`` is filled by :func:`partition_bins` (0-based bin ids).
    """

    test: np.ndarray
    nearest: np.ndarray
    distance: np.ndarray
    homophily_gap: np.ndarray
    hop: int
    undefined: int
    bins: np.ndarray = None

    @property
    def score(self):
        return self.distance + self.homophily_gap

    @property
    def num_bins(self):
        return 0 if self.bins is None else int(self.bins.max()) + 1

    def bin_members(self, b):
        return self.test[self.bins == b]

    def bin_accuracy(self, correct):
        """Per-bin accuracy given a boolean correctness vector over all nodes."""
        correct = np.asarray(correct, dtype=bool)
        return np.array([correct[self.bin_members(b)].mean() for b in range(self.num_bins)])


def disparity_scores(g, hop=2, mode=SELF_LOOP, features=None):
    """Nearest-train-node distance plus k-hop homophily difference per test node.

    ``features`` may supply precomputed hop-``hop`` aggregated features.
    Nodes where either ratio is undefined get a zero homophily gap; their
    number is reported in ``undefined``.
    """
    if hop < 1:
        raise ValidationError("disparity needs hop >= 1")
    train = g.mask("train")
    test = g.mask("test")
    if len(train) == 0:
        raise ValidationError("train mask is empty")
    f = aggregate(g, hop, mode) if features is None else np.asarray(features)
    j, dist = nearest_rows(f[test], f[train])
    nearest = train[j]
    h = node_homophily(g, hop).values
    gap = np.abs(h[test] - h[nearest])
    bad = np.isnan(gap)
    gap[bad] = 0.0
    return DisparityReport(test=test.copy(), nearest=nearest, distance=dist,
                           homophily_gap=gap, hop=hop, undefined=int(bad.sum()))


def partition_bins(report, num_bins=5, key="score"):
    """Assign equal-size contiguous bins after a stable (score, index) sort.

    ``key`` may be "score", "distance" or "homophily_gap" for the single
    component variants. Earlier bins take the remainder.
    """
    n = len(report.test)
    if n < num_bins:
        raise ValidationError(f"{n} test nodes cannot fill {num_bins} bins")
    values = getattr(report, key)
    order = np.lexsort((report.test, values))
    bins = np.empty(n, dtype=np.int64)
    for b, chunk in enumerate(np.array_split(order, num_bins)):
        bins[chunk] = b
    return DisparityReport(report.test, report.nearest, report.distance,
                           report.homophily_gap, report.hop, report.undefined, bins)


# ----------------------------------------------- prototypes and ratio

@dataclass(frozen=True, eq=False)
class PrototypeSet:
    classes: np.ndarray
    train: np.ndarray
    majority: np.ndarray
    minority: np.ndarray
    excluded: tuple


def prototypes(f, labels, train, majority, minority, num_classes):
    """Class-wise feature means of train, majority-test and minority-test nodes."""
    keep, mt, ma, mi, dropped = [], [], [], [], []
    roles = [_as_index(train), _as_index(majority), _as_index(minority)]
    for c in range(num_classes):
        members = [r[labels[r] == c] for r in roles]
        if any(len(m) == 0 for m in members):
            dropped.append(c)
            continue
        keep.append(c)
        mt.append(f[members[0]].mean(axis=0))
        ma.append(f[members[1]].mean(axis=0))
        mi.append(f[members[2]].mean(axis=0))
    d = f.shape[1]
    arr = lambda rows: np.array(rows).reshape(-1, d)
    return PrototypeSet(np.array(keep, dtype=np.int64), arr(mt), arr(ma), arr(mi), tuple(dropped))


def discriminative_ratio(g, hop, majority, minority, mode=SELF_LOOP, mean=False):
    """Sum over classes of ||mu_tr - mu_ma|| / ||mu_tr - mu_mi||.

    ``majority`` and ``minority`` are node sets (index arrays or boolean
    masks); the majority-test and minority-test roles are their
    intersections with the test mask. Returns (ratio, PrototypeSet).
    ``mean=True`` divides the sum by the number of included classes.
    """
    test = np.zeros(g.num_nodes, dtype=bool)
    test[g.mask("test")] = True
    maj = np.zeros(g.num_nodes, dtype=bool)
    mino = np.zeros(g.num_nodes, dtype=bool)
    maj[_as_index(majority, g.num_nodes)] = True
    mino[_as_index(minority, g.num_nodes)] = True
    f = aggregate(g, hop, mode)
    protos = prototypes(f, g.labels, g.mask("train"), np.flatnonzero(maj & test),
                        np.flatnonzero(mino & test), g.num_classes)
    if len(protos.classes) == 0:
        raise ValidationError("no class has train, majority and minority nodes")
    num = np.linalg.norm(protos.train - protos.majority, axis=1)
    den = np.linalg.norm(protos.train - protos.minority, axis=1)
    for c, dv in zip(protos.classes, den):
        if dv == 0:
            raise ValidationError(f"degenerate denominator for class {int(c)}")
    r = float(np.sum(num / den))
    if mean:
        r /= len(protos.classes)
    return r, protos


# ------------------------------------------------------ local agreement

@dataclass(frozen=True)
class AgreementReport:
    ratio: float
    accuracy_majority: float
    accuracy_minority: float
    agreed: int
    total: int


def local_agreement(g, hop, majority, minority, knn=9, mode=SELF_LOOP):
    """Fraction of test nodes whose knn nearest train nodes share a >half label.

    Local accuracy is the fraction of agreeing nodes whose own label equals
    the agreed label, reported for majority and minority test nodes
    separately (NaN when a group has no agreeing node).
    """
    train = g.mask("train")
    test = g.mask("test")
    if len(train) == 0:
        raise ValidationError("train mask is empty")
    f = aggregate(g, hop, mode)
    nbrs = train[k_nearest_rows(f[test], f[train], knn)]
    votes = np.zeros((len(test), g.num_classes), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(len(test)), knn), g.labels[nbrs].ravel()), 1)
    top = votes.argmax(axis=1)
    agree = votes.max(axis=1) > knn / 2.0
    right = agree & (top == g.labels[test])

    maj = np.zeros(g.num_nodes, dtype=bool)
    maj[_as_index(majority, g.num_nodes)] = True
    mino = np.zeros(g.num_nodes, dtype=bool)
    mino[_as_index(minority, g.num_nodes)] = True

    def acc(group):
        sel = group[test] & agree
        return float(right[sel].mean()) if sel.any() else float("nan")

    return AgreementReport(float(agree.mean()) if len(test) else float("nan"),
                           acc(maj), acc(mino), int(agree.sum()), len(test))


# -------------------------------------------------------- hop profile

def hop_homophily_gap(g, nodes, max_hop, nn_hop=2, mode=SELF_LOOP):
    """Mean |h_u^(k) - h_v^(k)| for k = 1..max_hop over ``nodes``.

    v is u's nearest train node on hop-``nn_hop`` aggregated features.
    Pairs with an undefined ratio at hop k are skipped. Returns two lists
    (gap per hop, skipped count per hop).
    """
    nodes = _as_index(nodes, g.num_nodes)
    train = g.mask("train")
    if len(train) == 0:
        raise ValidationError("train mask is empty")
    f = aggregate(g, nn_hop, mode)
    j, _ = nearest_rows(f[nodes], f[train])
    partner = train[j]
    gaps, skipped = [], []
    for k in range(1, max_hop + 1):
        h = node_homophily(g, k).values
        d = np.abs(h[nodes] - h[partner])
        ok = ~np.isnan(d)
        gaps.append(float(d[ok].mean()) if ok.any() else float("nan"))
        skipped.append(int((~ok).sum()))
    return gaps, skipped


# ----------------------------------------------------------------- MMD

def mmd(x, y, sigmas=DEFAULT_SIGMAS):
    """Unbiased squared-MMD estimate averaged over Gaussian bandwidths.

    Kernel exp(-||a - b||^2 / (2 sigma^2)); within-set sums skip i == j.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    n, m = len(x), len(y)
    if n < 2 or m < 2:
        raise ValidationError("MMD needs at least two samples per set")
    dxx = cdist(x, x, "sqeuclidean")
    dyy = cdist(y, y, "sqeuclidean")
    dxy = cdist(x, y, "sqeuclidean")
    total = 0.0
    for s in sigmas:
        if s <= 0:
            raise ValidationError("bandwidths must be positive")
        c = 2.0 * s * s
        kxx = np.exp(-dxx / c)
        kyy = np.exp(-dyy / c)
        kxy = np.exp(-dxy / c)
        total += ((kxx.sum() - np.trace(kxx)) / (n * (n - 1))
                  - 2.0 * kxy.sum() / (n * m)
                  + (kyy.sum() - np.trace(kyy)) / (m * (m - 1)))
    return float(total / len(sigmas))
