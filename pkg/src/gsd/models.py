"""Aggregation-then-MLP classifiers and their deterministic trainer.

A ``LinearStack`` aggregates features over k hops with the self-loop
normalized operator and feeds them to an L-layer ReLU network (k = 0 is a
plain MLP, L = 1 is multinomial logistic regression). Training is
full-batch gradient descent on softmax cross-entropy plus an L2 penalty
(lambda/2) * sum ||W_l||_F^2; biases are not penalized.
"""
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import NumericError, ValidationError
from .graph import SELF_LOOP, aggregate, node_homophily
from .seeding import substream

HOMOPHILY_EDGES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    hops: int = 2
    layers: int = 2
    width: int = 16
    lr: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.hops < 0:
            raise ValidationError("hops must be >= 0")
        if self.layers < 1:
            raise ValidationError("need at least one layer")
        if self.width < 1:
            raise ValidationError("width must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.lr <= 0 or self.l2 < 0:
            raise ValidationError("lr must be positive and l2 non-negative")


@dataclass(frozen=True, eq=False)
class LinearStack:
    hops: int
    weights: tuple
    biases: tuple
    config: TrainConfig = field(default_factory=TrainConfig)
    history: tuple = ()
    best_epoch: int = -1

    @property
    def num_layers(self):
        return len(self.weights)

    @property
    def widths(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def features(self, g):
        return aggregate(g, self.hops, SELF_LOOP)

    def logits(self, x):
        return forward(self.weights, self.biases, x)[0]

    def predict(self, g, features=None):
        x = self.features(g) if features is None else features
        return np.argmax(self.logits(x), axis=1)

    # -- serialization
    def to_dict(self):
        return {
            "hops": self.hops,
            "widths": self.widths,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "config": asdict(self.config),
            "best_epoch": self.best_epoch,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            widths = doc["widths"]
            ws = tuple(np.array(w, dtype=np.float64).reshape(a, b)
                       for w, a, b in zip(doc["weights"], widths[:-1], widths[1:]))
            bs = tuple(np.array(b, dtype=np.float64) for b in doc["biases"])
            cfg = TrainConfig(**doc.get("config", {}))
            return cls(int(doc["hops"]), ws, bs, cfg, best_epoch=int(doc.get("best_epoch", -1)))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValidationError(f"invalid model document: {exc}") from None

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: malformed JSON ({exc})") from None


def init_params(widths, rng):
    """Glorot-uniform weights and zero biases."""
    ws, bs = [], []
    for a, b in zip(widths[:-1], widths[1:]):
        lim = np.sqrt(6.0 / (a + b))
        ws.append(rng.uniform(-lim, lim, size=(a, b)))
        bs.append(np.zeros(b))
    return ws, bs


def forward(weights, biases, x):
    """Logits plus the cached pre-activations needed for backprop."""
    h = x
    cache = [x]
    for l, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        if l < len(weights) - 1:
            cache.append(z)
            h = np.maximum(z, 0.0)
        else:
            h = z
    return h, cache


def loss_and_grad(weights, biases, x, y, l2):
    """Mean cross-entropy + (l2/2) sum ||W||^2 and its gradients.

    Overflow is not reported here; callers check the loss for finiteness.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _loss_and_grad(weights, biases, x, y, l2)


def _loss_and_grad(weights, biases, x, y, l2):
    logits, cache = forward(weights, biases, x)
    lse = logsumexp(logits, axis=1)
    n = len(y)
    ce = float(np.mean(lse - logits[np.arange(n), y]))
    loss = ce + 0.5 * l2 * sum(float(np.sum(w * w)) for w in weights)

    g = np.exp(logits - lse[:, None])
    g[np.arange(n), y] -= 1.0
    g /= n
    gw = [None] * len(weights)
    gb = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        inp = cache[l] if l == 0 else np.maximum(cache[l], 0.0)
        gw[l] = inp.T @ g + l2 * weights[l]
        gb[l] = g.sum(axis=0)
        if l > 0:
            g = (g @ weights[l].T) * (cache[l] > 0)
    return loss, gw, gb


def _accuracy(weights, biases, x, y):
    return float(np.mean(np.argmax(forward(weights, biases, x)[0], axis=1) == y))


def train(g, config=None, features=None):
    """Fit a LinearStack on the train mask by safeguarded gradient descent.

    A step that would raise the loss is rejected and the learning rate is
    halved, so the recorded loss never increases. With a val mask the
    parameters with the best validation accuracy are returned (ties go to
    lower validation loss) and training stops after ``patience`` epochs
    without improvement; otherwise the final parameters are returned.
    """
    cfg = config or TrainConfig()
    tr = g.mask("train")
    if len(tr) == 0:
        raise ValidationError("train mask is empty")
    x = aggregate(g, cfg.hops, SELF_LOOP) if features is None else np.asarray(features)
    widths = [x.shape[1]] + [cfg.width] * (cfg.layers - 1) + [g.num_classes]
    ws, bs = init_params(widths, substream(cfg.seed, "init"))
    xt, yt = x[tr], g.labels[tr]
    has_val = g.has_mask("val") and len(g.mask("val")) > 0
    if has_val:
        xv, yv = x[g.mask("val")], g.labels[g.mask("val")]

    lr = cfg.lr
    loss, gw, gb = loss_and_grad(ws, bs, xt, yt, cfg.l2)
    if not np.isfinite(loss):
        raise NumericError("non-finite training loss at epoch 0")
    history = [loss]
    best = None
    if has_val:
        best = (_accuracy(ws, bs, xv, yv), -loss_and_grad(ws, bs, xv, yv, 0.0)[0], 0,
                [w.copy() for w in ws], [b.copy() for b in bs])
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        cw = [w - lr * d for w, d in zip(ws, gw)]
        cb = [b - lr * d for b, d in zip(bs, gb)]
        new, nw, nb = loss_and_grad(cw, cb, xt, yt, cfg.l2)
        if not np.isfinite(new):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        if new > loss:
            lr *= 0.5
        else:
            ws, bs, loss, gw, gb = cw, cb, new, nw, nb
        history.append(loss)
        if has_val:
            key = (_accuracy(ws, bs, xv, yv), -loss_and_grad(ws, bs, xv, yv, 0.0)[0])
            if key > best[:2]:
                best = key + (epoch, [w.copy() for w in ws], [b.copy() for b in bs])
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    best_epoch = len(history) - 1
    if has_val:
        best_epoch, ws, bs = best[2], best[3], best[4]
    return LinearStack(cfg.hops, tuple(ws), tuple(bs), cfg, tuple(history), best_epoch)


# ------------------------------------------------------------ evaluation

def margin_loss(logits, y, gamma=0.0):
    """Fraction of rows whose true logit fails to beat every other by > gamma."""
    logits = np.asarray(logits, dtype=np.float64)
    if len(y) == 0:
        return float("nan")
    n = len(y)
    true = logits[np.arange(n), y]
    other = logits.copy()
    other[np.arange(n), y] = -np.inf
    return float(np.mean(true <= gamma + other.max(axis=1)))


def homophily_bin(h):
    """Bin id in 0..4 for [0,.2), [.2,.4), [.4,.6), [.6,.8), [.8,1]; -1 if undefined."""
    h = np.asarray(h, dtype=np.float64)
    out = np.searchsorted(np.array(HOMOPHILY_EDGES[1:-1]), h, side="right")
    out = np.where(np.isnan(h), -1, out)
    return out.astype(np.int64)


def bin_label(b):
    if b < 0:
        return "undefined"
    lo, hi = HOMOPHILY_EDGES[b], HOMOPHILY_EDGES[b + 1]
    return f"[{lo:.1f},{hi:.1f}{']' if b == len(HOMOPHILY_EDGES) - 2 else ')'}"


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Accuracy summary of a model on one node set.

    ``homophily_bins`` lists (label, count, accuracy-or-None) for the five
    homophily ranges followed by an "undefined" bin for isolated nodes.
    """

    accuracy: float
    mask_accuracy: dict
    homophily_bins: list
    disparity_bins: list
    margin_loss: float
    gamma: float
    count: int


def evaluate(model, g, gamma=0.0, nodes=None, disparity=None, features=None):
    """Evaluate on ``nodes`` (default: the test mask, else all nodes)."""
    x = model.features(g) if features is None else features
    logits = model.logits(x)
    pred = np.argmax(logits, axis=1)
    correct = pred == g.labels
    if nodes is None:
        nodes = g.mask("test") if g.has_mask("test") else np.arange(g.num_nodes)
    nodes = np.asarray(nodes, dtype=np.int64)
    mask_acc = {}
    for name, idx in (g.masks or {}).items():
        mask_acc[name] = float(correct[idx].mean()) if len(idx) else None
    hb = homophily_bin(node_homophily(g, 1).values[nodes])
    bins = []
    for b in list(range(len(HOMOPHILY_EDGES) - 1)) + [-1]:
        sel = nodes[hb == b]
        bins.append((bin_label(b), len(sel), float(correct[sel].mean()) if len(sel) else None))
    dbins = []
    if disparity is not None and disparity.bins is not None:
        for b in range(disparity.num_bins):
            sel = disparity.bin_members(b)
            dbins.append((b, len(sel), float(correct[sel].mean())))
    acc = float(correct[nodes].mean()) if len(nodes) else float("nan")
    return EvalReport(acc, mask_acc, bins, dbins,
                      margin_loss(logits[nodes], g.labels[nodes], gamma), gamma, len(nodes))


def compare(g, config_a, config_b, features_a=None, features_b=None):
    """Per-homophily-bin accuracy(B) - accuracy(A) on the test mask.

    Returns rows (label, count, acc_a, acc_b, gap); gap is None for an
    empty bin.
    """
    ma = train(g, config_a, features_a)
    mb = train(g, config_b, features_b)
    ra = evaluate(ma, g, features=features_a)
    rb = evaluate(mb, g, features=features_b)
    rows = []
    for (label, count, acc_a), (_, _, acc_b) in zip(ra.homophily_bins, rb.homophily_bins):
        gap = None if count == 0 else acc_b - acc_a
        rows.append((label, count, acc_a, acc_b, gap))
    return rows
