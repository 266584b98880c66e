import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsd.errors import NumericError, ValidationError
from gsd.experiments import family_graph
from gsd.graph import GraphBundle
from gsd.models import (LinearStack, TrainConfig, bin_label, compare, evaluate, homophily_bin,
                        init_params, loss_and_grad, margin_loss, train)
from gsd.seeding import substream


def small_graph(n=40, seed=0, k=3, d=5):
    rng = np.random.default_rng(seed)
    pairs = np.argwhere(np.triu(rng.random((n, n)) < 0.1, 1))
    y = rng.integers(0, k, n)
    x = rng.normal(size=(n, d)) + np.eye(k, d)[y]
    perm = rng.permutation(n)
    masks = {"train": perm[: n // 2], "val": perm[n // 2: 3 * n // 4], "test": perm[3 * n // 4:]}
    return GraphBundle.from_pairs(n, pairs, x, y, k, masks=masks)


def test_one_hot_features_fit_perfectly():
    y = np.array([0, 1] * 10)
    g = GraphBundle(20, [], np.eye(2)[y], y, 2, masks={"train": np.arange(20)})
    m = train(g, TrainConfig(hops=0, layers=1, epochs=200, lr=1.0))
    assert np.all(m.predict(g) == y)


def test_zero_epochs_returns_initialization():
    g = small_graph()
    cfg = TrainConfig(hops=1, layers=2, width=4, epochs=0, seed=5)
    m = train(g, cfg)
    ws, bs = init_params([5, 4, 3], substream(5, "init"))
    assert all(np.array_equal(a, b) for a, b in zip(m.weights, ws))
    assert all(np.array_equal(a, b) for a, b in zip(m.biases, bs))


@pytest.mark.parametrize("layers", [1, 2])
def test_gradient_matches_central_differences(layers):
    rng = np.random.default_rng(layers)
    x = rng.normal(size=(10, 4))
    y = rng.integers(0, 3, 10)
    widths = [4] + [6] * (layers - 1) + [3]
    ws, bs = init_params(widths, rng)
    bs = [rng.normal(size=b.shape) * 0.1 for b in bs]
    l2 = 0.05
    _, gw, gb = loss_and_grad(ws, bs, x, y, l2)
    h = 1e-5
    worst = 0.0
    for params, grads in ((ws, gw), (bs, gb)):
        for p, gp in zip(params, grads):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up = loss_and_grad(ws, bs, x, y, l2)[0]
                p[idx] = old - h
                down = loss_and_grad(ws, bs, x, y, l2)[0]
                p[idx] = old
                fd = (up - down) / (2 * h)
                worst = max(worst, abs(fd - gp[idx]) / max(abs(fd), abs(gp[idx]), 1e-8))
    assert worst < 1e-4


def test_loss_is_non_increasing_and_deterministic():
    g = small_graph(seed=2)
    cfg = TrainConfig(hops=2, layers=2, width=8, lr=5.0, epochs=100, patience=1000, seed=1)
    m1, m2 = train(g, cfg), train(g, cfg)
    hist = np.array(m1.history)
    assert np.all(np.diff(hist) <= 0)
    assert all(np.array_equal(a, b) for a, b in zip(m1.weights, m2.weights))


def test_hops_zero_equals_mlp_on_raw_features():
    g = small_graph(seed=3)
    cfg = TrainConfig(hops=0, layers=2, width=8, epochs=50)
    a = train(g, cfg)
    b = train(g, cfg, features=np.array(g.features))
    assert a.history == b.history
    assert all(np.array_equal(u, v) for u, v in zip(a.weights, b.weights))


def test_divergence_raises_numeric_error():
    g = small_graph()
    g = g.with_features(np.full(g.features.shape, 1e308))
    with pytest.raises(NumericError, match="epoch 0"):
        train(g, TrainConfig(hops=0, layers=1, epochs=5))


def test_best_validation_selection():
    g = small_graph(seed=4)
    m = train(g, TrainConfig(hops=1, layers=1, epochs=60, patience=1000))
    val = g.mask("val")
    assert 0 <= m.best_epoch <= 60
    acc = evaluate(m, g).mask_accuracy["val"]
    assert acc == np.mean(m.predict(g)[val] == g.labels[val])


def test_empty_train_mask():
    g = small_graph().with_masks({"train": [], "test": [0]})
    with pytest.raises(ValidationError, match="train mask is empty"):
        train(g)


def test_config_validation():
    for bad in (dict(hops=-1), dict(layers=0), dict(width=0), dict(epochs=-1), dict(lr=0.0)):
        with pytest.raises(ValidationError):
            TrainConfig(**bad)


# ----------------------------------------------------------- margin loss

def test_margin_loss_cases():
    logits = np.array([[3.0, 0.0], [0.0, 2.0]])
    y = np.array([0, 1])
    assert margin_loss(logits, y, 0.0) == 0.0
    assert margin_loss(logits, y, 2.5) == 0.5
    assert margin_loss(logits, y, 1e9) == 1.0
    # an exact tie counts as a loss
    assert margin_loss(np.array([[1.0, 1.0]]), np.array([0]), 0.0) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(2, 5), st.integers(0, 10**6))
def test_accuracy_is_one_minus_zero_margin_loss(n, k, seed):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(n, k))
    y = rng.integers(0, k, n)
    acc = np.mean(np.argmax(logits, axis=1) == y)
    assert margin_loss(logits, y, 0.0) == pytest.approx(1 - acc, abs=1e-15)


# ------------------------------------------------------------ evaluation

def test_homophily_bin_edges():
    h = [0.0, 0.19999, 0.2, 0.4, 0.6, 0.79, 0.8, 1.0, np.nan]
    assert homophily_bin(h).tolist() == [0, 0, 1, 2, 3, 3, 4, 4, -1]
    assert bin_label(0) == "[0.0,0.2)" and bin_label(4) == "[0.8,1.0]"
    assert bin_label(-1) == "undefined"


def test_bins_recompose_overall_accuracy():
    g = small_graph(80, seed=5)
    m = train(g, TrainConfig(hops=1, epochs=50))
    rep = evaluate(m, g, nodes=np.arange(80))
    total = sum(c * a for _, c, a in rep.homophily_bins if c)
    assert sum(c for _, c, _ in rep.homophily_bins) == 80
    assert abs(total / 80 - rep.accuracy) < 1e-12
    assert all(0 <= a <= 1 for _, c, a in rep.homophily_bins if c)


def test_evaluation_permutation_invariant():
    g = small_graph(50, seed=6)
    m = train(g, TrainConfig(hops=2, epochs=40))
    rep = evaluate(m, g)
    perm = np.random.default_rng(0).permutation(50)
    inv = np.argsort(perm)
    edges = np.sort(inv[g.edges], axis=1)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    h = GraphBundle(50, edges, g.features[perm], g.labels[perm], g.num_classes,
                    masks={k: inv[v] for k, v in g.masks.items()})
    rep2 = evaluate(m, h)
    assert rep2.accuracy == rep.accuracy
    assert [(lbl, c) for lbl, c, _ in rep2.homophily_bins] == \
        [(lbl, c) for lbl, c, _ in rep.homophily_bins]
    for (_, _, a), (_, _, b) in zip(rep.homophily_bins, rep2.homophily_bins):
        assert a == b or (a is None and b is None)


def test_model_json_round_trip(tmp_path):
    g = small_graph(seed=7)
    m = train(g, TrainConfig(hops=1, layers=2, width=5, epochs=20))
    m.save(tmp_path / "m.json")
    m2 = LinearStack.load(tmp_path / "m.json")
    assert all(np.array_equal(a, b) for a, b in zip(m.weights, m2.weights))
    assert all(np.array_equal(a, b) for a, b in zip(m.biases, m2.biases))
    assert m2.config == m.config and m2.hops == 1


def test_malformed_model_file(tmp_path):
    (tmp_path / "m.json").write_text("{not json")
    with pytest.raises(ValidationError, match="malformed"):
        LinearStack.load(tmp_path / "m.json")
    (tmp_path / "m.json").write_text('{"hops": 1}')
    with pytest.raises(ValidationError, match="invalid model"):
        LinearStack.load(tmp_path / "m.json")


def test_compare_same_config_gives_zero_gaps():
    g = small_graph(60, seed=8)
    cfg = TrainConfig(hops=1, epochs=30)
    rows = compare(g, cfg, cfg)
    for label, count, _, _, gap in rows:
        assert gap is None if count == 0 else gap == 0.0


def test_compare_empty_bin_is_absent():
    # a complete graph of one label puts every node in the top bin
    n = 12
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    g = GraphBundle.from_pairs(n, pairs, np.random.default_rng(0).normal(size=(n, 2)),
                               [0] * n, 2, masks={"train": np.arange(6), "test": np.arange(6, 12)})
    rows = compare(g, TrainConfig(hops=0, epochs=5), TrainConfig(hops=1, epochs=5))
    assert [r[4] for r in rows[:4]] == [None] * 4 and rows[4][1] == 6


def test_compare_mlp_wins_on_heterophilic_nodes_of_homophilic_family():
    g = family_graph(0.8, 0)
    sgc = TrainConfig(hops=2, layers=2)
    mlp = TrainConfig(hops=0, layers=2)
    gaps = [r[4] for r in compare(g, sgc, mlp)]
    low = [x for x in gaps[:2] if x is not None]
    high = [x for x in gaps[3:5] if x is not None]
    assert low and high and min(low) > 0 and max(high) < 0
