import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsd.csbm import CsbmSpec, generate
from gsd.errors import ValidationError
from gsd.experiments import family_graph, per_class_masks
from gsd.graph import GraphBundle, node_homophily
from gsd.metrics import (discriminative_ratio, disparity_scores, hop_homophily_gap,
                         local_agreement, mmd, partition_bins, split_by_pattern)


def random_graph(n, p, seed, k=2, d=3, train_frac=0.4):
    rng = np.random.default_rng(seed)
    pairs = np.argwhere(np.triu(rng.random((n, n)) < p, 1))
    perm = rng.permutation(n)
    a = int(train_frac * n)
    masks = {"train": perm[:a], "test": perm[a:]}
    return GraphBundle.from_pairs(n, pairs, rng.normal(size=(n, d)), rng.integers(0, k, n), k,
                                  masks=masks)


def dense_self_loop(g, k):
    a = g.adjacency.toarray() + np.eye(g.num_nodes)
    op = a / a.sum(axis=1, keepdims=True)
    return np.linalg.matrix_power(op, k) @ g.features


# ----------------------------------------------------------- disparity

def test_disparity_matches_all_pairs_oracle():
    g = random_graph(30, 0.12, 2)
    rep = disparity_scores(g, 2)
    f = dense_self_loop(g, 2)
    h = node_homophily(g, 2).values
    train = g.mask("train")
    for u, v, dist, gap in zip(rep.test, rep.nearest, rep.distance, rep.homophily_gap):
        d = [np.linalg.norm(f[u] - f[t]) for t in train]
        best = train[int(np.argmin(d))]
        assert v == best and abs(dist - min(d)) < 1e-10
        expect = abs(h[u] - h[v])
        assert gap == (0.0 if np.isnan(expect) else expect)


def test_self_match_scores_zero():
    x = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]] * 2)
    g = GraphBundle(6, [(0, 1), (1, 2), (3, 4), (4, 5)], x, [0, 1, 0, 0, 1, 0], 2,
                    masks={"train": [0, 1, 2], "test": [3, 4, 5]})
    rep = disparity_scores(g, 2)
    assert np.array_equal(rep.nearest, [0, 1, 2]) and np.all(rep.score == 0)


def test_score_decomposes_and_is_nonnegative():
    g = random_graph(50, 0.08, 4)
    rep = disparity_scores(g, 2)
    assert np.array_equal(rep.score, rep.distance + rep.homophily_gap)
    assert np.all(rep.score >= rep.distance) and np.all(rep.distance >= 0)


def test_undefined_gap_counted():
    # node 5 is isolated: its 2-hop shell is empty
    x = np.arange(12, dtype=float).reshape(6, 2)
    g = GraphBundle(6, [(0, 1), (1, 2), (2, 3)], x, [0, 1, 0, 1, 0, 1], 2,
                    masks={"train": [0, 1], "test": [2, 3, 4, 5]})
    rep = disparity_scores(g, 2)
    assert rep.undefined == 2 and rep.homophily_gap[-1] == 0.0


def test_disparity_errors():
    g = random_graph(20, 0.2, 0).with_masks({"train": [], "test": np.arange(20)})
    with pytest.raises(ValidationError, match="train mask is empty"):
        disparity_scores(g)
    with pytest.raises(ValidationError, match="no 'train' mask"):
        disparity_scores(g.with_masks({"test": np.arange(20)}))
    with pytest.raises(ValidationError, match="hop"):
        disparity_scores(random_graph(20, 0.2, 0), 0)


def _report_with(scores):
    g = random_graph(len(scores) * 2, 0.1, 0, train_frac=0.5)
    rep = disparity_scores(g)
    n = len(rep.test)
    return type(rep)(rep.test, rep.nearest, np.asarray(scores[:n], float), np.zeros(n), 2, 0)


def test_bins_equal_sizes():
    rep = partition_bins(_report_with(np.arange(10.0)), 5)
    assert np.bincount(rep.bins).tolist() == [2] * 5


def test_bins_remainder_goes_first():
    g = random_graph(22, 0.1, 0, train_frac=0.5)
    rep = partition_bins(disparity_scores(g), 5)
    assert len(rep.test) == 11 and np.bincount(rep.bins).tolist() == [3, 2, 2, 2, 2]


def test_bins_ties_break_by_node_index():
    rep = partition_bins(_report_with(np.zeros(10)), 5)
    assert np.array_equal(rep.bins, np.repeat(np.arange(5), 2))


def test_bins_contiguous_partition():
    g = random_graph(80, 0.05, 6)
    rep = partition_bins(disparity_scores(g), 5)
    members = np.concatenate([rep.bin_members(b) for b in range(5)])
    assert sorted(members.tolist()) == rep.test.tolist()
    s = rep.score
    for b in range(4):
        assert s[rep.bins == b].max() <= s[rep.bins == b + 1].min()


def test_bins_component_keys_and_errors():
    g = random_graph(40, 0.1, 1)
    rep = disparity_scores(g)
    for key in ("distance", "homophily_gap"):
        r = partition_bins(rep, 4, key=key)
        assert np.bincount(r.bins).max() - np.bincount(r.bins).min() <= 1
    with pytest.raises(ValidationError, match="cannot fill"):
        partition_bins(_report_with(np.arange(4.0)), 5)


# --------------------------------------------------- discriminative ratio

def _ratio_graph(seed=0):
    rng = np.random.default_rng(seed)
    n = 60
    pairs = np.argwhere(np.triu(rng.random((n, n)) < 0.1, 1))
    masks = {"train": np.arange(0, 20), "test": np.arange(20, 60)}
    return GraphBundle.from_pairs(n, pairs, rng.normal(size=(n, 4)), np.arange(n) % 3, 3,
                                  masks=masks)


def test_ratio_equals_k_when_roles_match():
    g = _ratio_graph()
    test = g.mask("test")
    r, protos = discriminative_ratio(g, 0, test, test)
    assert r == pytest.approx(3.0, abs=1e-12) and len(protos.classes) == 3
    r, _ = discriminative_ratio(g, 0, test, test, mean=True)
    assert r == pytest.approx(1.0, abs=1e-12)


def _class_constant(g, rows):
    # give the listed rows one fixed feature vector per class
    x = np.array(g.features)
    rows = np.asarray(rows)
    x[rows] = np.eye(3, g.feature_dim)[g.labels[rows]]
    return g.with_features(x)


def test_ratio_zero_when_majority_is_train():
    g = _class_constant(_ratio_graph(), np.arange(0, 40))
    r, _ = discriminative_ratio(g, 0, np.arange(20, 40), np.arange(40, 60))
    assert r == 0.0


def test_ratio_degenerate_denominator_names_class():
    g = _class_constant(_ratio_graph(), np.r_[0:20, 40:60])
    with pytest.raises(ValidationError, match="class 0"):
        discriminative_ratio(g, 0, np.arange(20, 40), np.arange(40, 60))


def test_ratio_excludes_classes_missing_a_role():
    g = _ratio_graph()
    minority = np.array([i for i in range(40, 60) if i % 3 != 2])
    _, protos = discriminative_ratio(g, 1, np.arange(20, 40), minority)
    assert protos.excluded == (2,) and protos.classes.tolist() == [0, 1]


def test_ratio_permutation_invariant():
    g = _ratio_graph(3)
    maj, mino = np.arange(20, 45), np.arange(45, 60)
    r, _ = discriminative_ratio(g, 2, maj, mino)
    perm = np.random.default_rng(1).permutation(60)
    inv = np.argsort(perm)
    edges = np.sort(inv[g.edges], axis=1)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    h = GraphBundle(60, edges, g.features[perm], g.labels[perm], 3,
                    masks={"train": inv[g.mask("train")], "test": inv[g.mask("test")]})
    r2, _ = discriminative_ratio(h, 2, inv[maj], inv[mino])
    assert r2 == pytest.approx(r, rel=1e-12)


def test_ratio_drops_with_aggregation_on_homophilic_family():
    for seed in range(10):
        g = family_graph(0.8, seed)
        maj, mino = split_by_pattern(node_homophily(g).values)
        r0, _ = discriminative_ratio(g, 0, maj, mino)
        r2, _ = discriminative_ratio(g, 2, maj, mino)
        assert r2 < r0


# ----------------------------------------------------- local agreement

def test_agreement_unanimous_train_labels():
    g = random_graph(40, 0.1, 0)
    y = np.array(g.labels)
    y[g.mask("train")] = 1
    g = GraphBundle(g.num_nodes, g.edges, g.features, y, 2, masks=g.masks)
    rep = local_agreement(g, 1, g.mask("test"), [])
    assert rep.ratio == 1.0 and np.isnan(rep.accuracy_minority)


def test_agreement_matches_exhaustive_oracle():
    g = random_graph(40, 0.1, 8, k=3)
    test, train = g.mask("test"), g.mask("train")
    maj, mino = test[: len(test) // 2], test[len(test) // 2:]
    rep = local_agreement(g, 1, maj, mino, knn=5)
    f = dense_self_loop(g, 1)
    agreed, right = {}, {}
    for u in test:
        order = sorted(train, key=lambda t: (np.linalg.norm(f[u] - f[t]), t))[:5]
        counts = np.bincount(g.labels[order], minlength=3)
        if counts.max() > 2.5:
            agreed[u] = True
            right[u] = counts.argmax() == g.labels[u]
    assert rep.agreed == len(agreed) and rep.ratio == len(agreed) / len(test)
    for group, got in ((maj, rep.accuracy_majority), (mino, rep.accuracy_minority)):
        hits = [right[u] for u in group if u in agreed]
        if hits:
            assert got == pytest.approx(np.mean(hits), abs=1e-15)
        else:
            assert np.isnan(got)


def test_agreement_copy_of_train_node_counted_correct():
    x = np.zeros((12, 1))
    x[10:] = 5.0
    y = [0] * 10 + [0, 1]
    g = GraphBundle(12, [], x, y, 2, masks={"train": np.arange(10), "test": [10, 11]})
    x2 = np.array(x)
    x2[10] = 0.0
    g = g.with_features(x2)
    rep = local_agreement(g, 0, [10], [11])
    assert rep.accuracy_majority == 1.0 and rep.accuracy_minority == 0.0


def test_agreement_knn_exceeds_train():
    g = random_graph(10, 0.2, 0, train_frac=0.3)
    with pytest.raises(ValidationError, match="at least 9"):
        local_agreement(g, 1, [], [])


# -------------------------------------------------------------- hop gap

def test_hop_gap_on_train_set_is_zero():
    g = random_graph(40, 0.1, 3)
    gaps, skipped = hop_homophily_gap(g, g.mask("train"), 3)
    assert all(x == 0 for x in gaps if not np.isnan(x))
    assert len(skipped) == 3


def test_hop_gap_bounded():
    g = random_graph(60, 0.05, 5)
    gaps, _ = hop_homophily_gap(g, g.mask("test"), 4)
    assert all(0 <= x <= 1 for x in gaps if not np.isnan(x))


def test_hop_gap_shrinks_from_one_to_two_hops():
    # two-hop homophily of both patterns is about 0.82, one-hop 0.9 vs 0.1
    for seed in range(10):
        s = CsbmSpec.from_rho(1.0, 16, ((0.009, 0.001), (0.001, 0.009)), (0.8, 0.2), 2000,
                              seed=seed)
        g = generate(s)
        g = g.with_masks(per_class_masks(g.labels, seed))
        test = g.mask("test")
        gaps, _ = hop_homophily_gap(g, test[g.subgroups[test] == 1], 2)
        assert gaps[1] < gaps[0]


# ----------------------------------------------------------------- MMD

def mmd_oracle(x, y, sigma):
    k = lambda a, b: np.exp(-np.sum((a - b) ** 2) / (2 * sigma**2))
    n, m = len(x), len(y)
    sxx = sum(k(x[i], x[j]) for i in range(n) for j in range(n) if i != j)
    syy = sum(k(y[i], y[j]) for i in range(m) for j in range(m) if i != j)
    sxy = sum(k(a, b) for a in x for b in y)
    return sxx / (n * (n - 1)) - 2 * sxy / (n * m) + syy / (m * (m - 1))


def test_mmd_identical_points_is_zero():
    x = np.ones((5, 3))
    assert mmd(x, x.copy()) == 0.0


def test_mmd_matches_double_loop_oracle():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(12, 3)), rng.normal(size=(9, 3)) + 0.5
    sigmas = (0.01, 0.1, 1.0, 10.0, 100.0)
    oracle = np.mean([mmd_oracle(x, y, s) for s in sigmas])
    assert abs(mmd(x, y) - oracle) < 1e-12
    assert abs(mmd(x, x) - np.mean([mmd_oracle(x, x, s) for s in sigmas])) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(2, 10), st.floats(0.1, 10), st.integers(0, 10**6))
def test_mmd_symmetric_and_scale_invariant(n, m, c, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(n, 2)), rng.normal(size=(m, 2))
    assert abs(mmd(x, y) - mmd(y, x)) < 1e-12
    scaled = mmd(c * x, c * y, sigmas=tuple(c * s for s in (0.1, 1.0, 10.0)))
    assert abs(scaled - mmd(x, y, sigmas=(0.1, 1.0, 10.0))) < 1e-10


def test_mmd_detects_shift():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(200, 4))
        x2 = rng.normal(size=(200, 4))
        y = rng.normal(size=(200, 4))
        y[:, 0] += 3.0
        shifted = mmd(x, y)
        assert shifted > 0 and shifted >= 5 * abs(mmd(x, x2))


def test_mmd_errors():
    with pytest.raises(ValidationError, match="two samples"):
        mmd(np.zeros((1, 2)), np.zeros((3, 2)))
    with pytest.raises(ValidationError, match="positive"):
        mmd(np.zeros((2, 2)), np.zeros((3, 2)), sigmas=(0.0,))


# -------------------------------------------------------- majority rule

def test_majority_rule():
    h = np.array([0.9, 0.8, 0.7, 0.2, np.nan])
    maj, mino = split_by_pattern(h)
    assert maj.tolist() == [True, True, True, False, False]
    assert mino.tolist() == [False, False, False, True, False]
    maj, mino = split_by_pattern(1 - h)
    assert maj.tolist() == [True, True, True, False, False]
    maj, _ = split_by_pattern(h, threshold=0.75)
    assert maj.tolist() == [False, False, True, True, False]
    maj, _ = split_by_pattern(h, side="homo", threshold=0.75)
    assert maj.tolist() == [True, True, False, False, False]


def test_majority_rule_errors():
    with pytest.raises(ValidationError):
        split_by_pattern([np.nan, np.nan])
    with pytest.raises(ValidationError):
        split_by_pattern([0.5], threshold=1.0)
    with pytest.raises(ValidationError):
        split_by_pattern([0.5], side="both")


def test_nearest_tie_goes_to_lowest_index():
    # nearest ties resolve to the lowest reference index
    g = GraphBundle(4, [], np.zeros((4, 1)), [0, 1, 0, 1], 2,
                    masks={"train": [1, 2, 3], "test": [0]})
    rep = disparity_scores(g, 1)
    assert rep.nearest.tolist() == [1]
    assert rep.distance.tolist() == [0.0]
