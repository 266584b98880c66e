"""Graph container, bundle directory I/O, homophily ratios and aggregation.

A bundle directory holds::

    meta.json        {"num_nodes", "feature_dim", "num_classes", "name"}
    edges.tsv        one canonical edge "u<TAB>v" per line, u < v, sorted
    features.csv     n rows of comma-separated floats (shortest round-trip repr)
    labels.csv       one integer class id per line
    masks.json       optional {"train": [...], "val": [...], "test": [...]}
    subgroups.json   optional list with one small integer per node

Loading is strict: anything that breaks an invariant raises
``ValidationError`` instead of being repaired.
"""
import json
import os
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

PLAIN = "plain"
SELF_LOOP = "self_loop"
AGG_MODES = (PLAIN, SELF_LOOP)

_OPTIONAL_FILES = ("masks.json", "subgroups.json")


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _as_int_array(values, what):
    a = np.asarray(values)
    if a.size == 0:
        return np.zeros(a.shape, dtype=np.int64)
    if a.dtype.kind == "f":
        if not np.all(np.isfinite(a)) or not np.all(a == np.round(a)):
            raise ValidationError(f"{what} must contain integers")
    elif a.dtype.kind not in "iu":
        raise ValidationError(f"{what} must contain integers")
    return a.astype(np.int64)


@dataclass(frozen=True, eq=False)
class GraphBundle:
    """Immutable undirected graph with node features and labels.

    ``edges`` is an (m, 2) integer array of canonical pairs (u < v) in
    lexicographic order. ``masks`` maps a name to a sorted index array;
    all masks are pairwise disjoint. ``subgroups`` tags each node with a
    small integer (e.g. its structural pattern in a synthetic graph).
    """

    num_nodes: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    masks: dict = None
    subgroups: np.ndarray = None
    name: str = "graph"

    def __post_init__(self):
        n = self.num_nodes
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise ValidationError("num_nodes must be an integer")
        if n <= 0:
            raise ValidationError("empty graph")
        n = int(n)
        object.__setattr__(self, "num_nodes", n)

        e = _as_int_array(self.edges, "edges")
        if e.size == 0:
            e = np.zeros((0, 2), dtype=np.int64)
        if e.ndim != 2 or e.shape[1] != 2:
            raise ValidationError("edges must be an (m, 2) array")
        if len(e):
            if e.min() < 0 or e.max() >= n:
                raise ValidationError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValidationError(f"self-loop on node {int(e[e[:, 0] == e[:, 1]][0, 0])}")
            if np.any(e[:, 0] > e[:, 1]):
                raise ValidationError("edges must be canonical (u < v)")
            keys = e[:, 0] * n + e[:, 1]
            step = np.diff(keys)
            if np.any(step == 0):
                raise ValidationError("duplicate edge")
            if np.any(step < 0):
                raise ValidationError("edge list is not sorted")
        object.__setattr__(self, "edges", _frozen(e))

        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != n:
            raise ValidationError(f"features must have shape ({n}, d), got {x.shape}")
        object.__setattr__(self, "features", _frozen(x))

        k = self.num_classes
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
            raise ValidationError("num_classes must be a positive integer")
        object.__setattr__(self, "num_classes", int(k))
        y = _as_int_array(self.labels, "labels").reshape(-1)
        if len(y) != n:
            raise ValidationError(f"expected {n} labels, got {len(y)}")
        if y.min() < 0 or y.max() >= k:
            raise ValidationError(f"labels must lie in [0, {k})")
        object.__setattr__(self, "labels", _frozen(y))

        if self.masks is not None:
            masks = {}
            seen = np.full(n, "", dtype=object)
            for key in sorted(self.masks):
                idx = _as_int_array(self.masks[key], f"mask {key!r}").reshape(-1)
                if len(idx) and (idx.min() < 0 or idx.max() >= n):
                    raise ValidationError(f"mask {key!r} index out of range")
                idx = np.sort(idx)
                if np.any(np.diff(idx) == 0):
                    raise ValidationError(f"mask {key!r} repeats an index")
                clash = seen[idx] != ""
                if np.any(clash):
                    other = seen[idx[clash][0]]
                    raise ValidationError(f"masks {other!r} and {key!r} overlap")
                seen[idx] = key
                masks[str(key)] = _frozen(idx)
            object.__setattr__(self, "masks", masks)

        if self.subgroups is not None:
            s = _as_int_array(self.subgroups, "subgroups").reshape(-1)
            if len(s) != n:
                raise ValidationError(f"expected {n} subgroup tags, got {len(s)}")
            if len(s) and s.min() < 0:
                raise ValidationError("subgroup tags must be non-negative")
            object.__setattr__(self, "subgroups", _frozen(s))

    @classmethod
    def from_pairs(cls, num_nodes, pairs, features, labels, num_classes, **kw):
        """Build a bundle from arbitrary (u, v) pairs, canonicalizing them.

        Self-loops are still rejected; repeated pairs collapse to one edge.
        """
        p = _as_int_array(pairs, "edges").reshape(-1, 2)
        p = np.sort(p, axis=1)
        if len(p):
            p = np.unique(p, axis=0)
        return cls(num_nodes, p, features, labels, num_classes, **kw)

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def feature_dim(self):
        return self.features.shape[1]

    def mask(self, name):
        if not self.masks or name not in self.masks:
            raise ValidationError(f"bundle has no {name!r} mask")
        return self.masks[name]

    def has_mask(self, name):
        return bool(self.masks) and name in self.masks

    def with_masks(self, masks):
        return replace(self, masks=dict(masks) if masks is not None else None)

    def with_edges(self, edges):
        return replace(self, edges=edges)

    def with_features(self, features):
        return replace(self, features=features)

    @cached_property
    def adjacency(self):
        """Symmetric CSR adjacency with unit weights."""
        n = self.num_nodes
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        a.sort_indices()
        return a

    @cached_property
    def degrees(self):
        d = np.diff(self.adjacency.indptr).astype(np.int64)
        d.setflags(write=False)
        return d

    @cached_property
    def _plain_operator(self):
        d = self.degrees.astype(np.float64)
        inv = np.divide(1.0, d, out=np.zeros_like(d), where=d > 0)
        return sp.diags(inv) @ self.adjacency

    @cached_property
    def _self_loop_operator(self):
        a = self.adjacency + sp.identity(self.num_nodes, format="csr")
        inv = 1.0 / np.asarray(a.sum(axis=1)).ravel()
        return (sp.diags(inv) @ a).tocsr()

    def operator(self, mode=SELF_LOOP):
        """Row-normalized propagation matrix: D^-1 A (plain) or D~^-1 A~."""
        if mode == PLAIN:
            return self._plain_operator
        if mode == SELF_LOOP:
            return self._self_loop_operator
        raise ValidationError(f"unknown aggregation mode {mode!r}")


def bundles_equal(a, b):
    """Bit-level equality of two bundles (features compared as raw bytes)."""
    if (a.num_nodes, a.num_classes, a.name) != (b.num_nodes, b.num_classes, b.name):
        return False
    if a.features.shape != b.features.shape or a.features.tobytes() != b.features.tobytes():
        return False
    if not (np.array_equal(a.edges, b.edges) and np.array_equal(a.labels, b.labels)):
        return False
    if (a.masks is None) != (b.masks is None) or (a.subgroups is None) != (b.subgroups is None):
        return False
    if a.masks is not None:
        if sorted(a.masks) != sorted(b.masks):
            return False
        if not all(np.array_equal(a.masks[k], b.masks[k]) for k in a.masks):
            return False
    if a.subgroups is not None and not np.array_equal(a.subgroups, b.subgroups):
        return False
    return True


# ---------------------------------------------------------------- bundle I/O

def save_bundle(g, path):
    """Write ``g`` as a bundle directory (created if missing)."""
    os.makedirs(path, exist_ok=True)
    meta = {
        "num_nodes": g.num_nodes,
        "feature_dim": g.feature_dim,
        "num_classes": g.num_classes,
        "name": g.name,
    }
    with open(os.path.join(path, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(path, "edges.tsv"), "w", encoding="utf-8") as fh:
        fh.writelines(f"{u}\t{v}\n" for u, v in g.edges.tolist())
    with open(os.path.join(path, "features.csv"), "w", encoding="utf-8") as fh:
        # repr() of a Python float is the shortest string that round-trips
        fh.writelines(",".join(map(repr, row)) + "\n" for row in g.features.tolist())
    with open(os.path.join(path, "labels.csv"), "w", encoding="utf-8") as fh:
        fh.writelines(f"{y}\n" for y in g.labels.tolist())
    for fname in _OPTIONAL_FILES:
        fpath = os.path.join(path, fname)
        if os.path.exists(fpath):
            os.remove(fpath)
    if g.masks is not None:
        with open(os.path.join(path, "masks.json"), "w", encoding="utf-8") as fh:
            json.dump({k: v.tolist() for k, v in g.masks.items()}, fh)
            fh.write("\n")
    if g.subgroups is not None:
        with open(os.path.join(path, "subgroups.json"), "w", encoding="utf-8") as fh:
            json.dump(g.subgroups.tolist(), fh)
            fh.write("\n")


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{os.path.basename(path)}: malformed JSON ({exc})") from None


def load_bundle(path):
    """Read and validate a bundle directory written by :func:`save_bundle`."""
    if not os.path.isdir(path):
        raise ValidationError(f"bundle directory not found: {path}")
    for fname in ("meta.json", "edges.tsv", "features.csv", "labels.csv"):
        if not os.path.isfile(os.path.join(path, fname)):
            raise ValidationError(f"missing bundle file: {fname}")

    meta = _load_json(os.path.join(path, "meta.json"))
    try:
        n = meta["num_nodes"]
        d = meta["feature_dim"]
        k = meta["num_classes"]
    except (KeyError, TypeError):
        raise ValidationError("meta.json needs num_nodes, feature_dim, num_classes") from None
    if not isinstance(n, int) or n <= 0:
        raise ValidationError("empty graph")

    edges = []
    for lineno, line in enumerate(_read_lines(os.path.join(path, "edges.tsv")), 1):
        parts = line.split("\t")
        try:
            if len(parts) != 2:
                raise ValueError
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValidationError(f"edges.tsv line {lineno}: malformed row {line!r}") from None
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)

    fpath = os.path.join(path, "features.csv")
    try:
        x = np.loadtxt(fpath, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"features.csv: malformed row ({exc})") from None
    if x.shape != (n, d):
        raise ValidationError(f"features.csv: expected shape ({n}, {d}), got {x.shape}")

    labels = []
    for lineno, line in enumerate(_read_lines(os.path.join(path, "labels.csv")), 1):
        try:
            labels.append(int(line))
        except ValueError:
            raise ValidationError(f"labels.csv line {lineno}: malformed row {line!r}") from None

    masks = subgroups = None
    if os.path.isfile(os.path.join(path, "masks.json")):
        masks = _load_json(os.path.join(path, "masks.json"))
        if not isinstance(masks, dict):
            raise ValidationError("masks.json must map names to index lists")
    if os.path.isfile(os.path.join(path, "subgroups.json")):
        subgroups = _load_json(os.path.join(path, "subgroups.json"))
        if not isinstance(subgroups, list):
            raise ValidationError("subgroups.json must be a list")

    return GraphBundle(n, edges, x, np.array(labels, dtype=np.int64), k,
                       masks=masks, subgroups=subgroups, name=str(meta.get("name", "graph")))


# ------------------------------------------------------------ homophily

@dataclass(frozen=True, eq=False)
class HomophilyProfile:
    """Per-node homophily at one hop order; NaN marks an empty shell."""

    values: np.ndarray
    hop: int

    @property
    def defined(self):
        return ~np.isnan(self.values)

    @property
    def num_undefined(self):
        return int(np.sum(np.isnan(self.values)))

    @property
    def graph(self):
        """Mean over defined nodes (NaN if none is defined)."""
        v = self.values[self.defined]
        return float(v.mean()) if len(v) else float("nan")


def hop_shell(g, k):
    """Boolean CSR matrix whose row i marks nodes at distance exactly k from i."""
    if k < 1:
        raise ValidationError("hop order must be >= 1")
    adj = g.adjacency
    if k == 1:
        return adj.astype(bool)
    n = g.num_nodes
    reach = sp.identity(n, format="csr", dtype=np.float64)
    frontier = reach
    for _ in range(k):
        nxt = (frontier @ adj).astype(bool).astype(np.float64)
        nxt = (nxt - nxt.multiply(reach)).tocsr()
        nxt.eliminate_zeros()
        reach = (reach + nxt).tocsr()
        frontier = nxt
    return frontier.astype(bool)


def node_homophily(g, k=1):
    """Fraction of each node's k-hop shell that shares its label."""
    shell = hop_shell(g, k).astype(np.float64)
    n = g.num_nodes
    size = np.asarray(shell.sum(axis=1)).ravel()
    onehot = sp.csr_matrix((np.ones(n), (np.arange(n), g.labels)), shape=(n, g.num_classes))
    same = np.asarray((shell @ onehot)[np.arange(n), g.labels]).ravel()
    h = np.full(n, np.nan)
    ok = size > 0
    h[ok] = same[ok] / size[ok]
    h.setflags(write=False)
    return HomophilyProfile(values=h, hop=k)


# ----------------------------------------------------------- aggregation

def aggregate(g, k, mode=SELF_LOOP, features=None):
    """Apply the chosen propagation operator k times to the node features.

    ``features`` substitutes another n x d matrix for the bundle's own.
    Plain mode leaves isolated nodes with a zero row.
    """
    if k < 0:
        raise ValidationError("hop order must be >= 0")
    x = g.features if features is None else np.asarray(features, dtype=np.float64)
    if x.shape[0] != g.num_nodes:
        raise ValidationError("feature rows must match num_nodes")
    if k == 0:
        return np.array(x, dtype=np.float64, copy=True)
    op = g.operator(mode)
    out = op @ x
    for _ in range(k - 1):
        out = op @ out
    return np.asarray(out)
