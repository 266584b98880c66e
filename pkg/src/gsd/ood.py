"""Structural distribution-shift split and its size-matched i.i.d. control.

In the structural split, train and validation come from the majority
pattern and the test set is the whole minority pattern. The control split
draws sets of the same three sizes uniformly at random.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import node_homophily
from .metrics import mmd, split_by_pattern
from .models import TrainConfig, evaluate, forward, train
from .seeding import substream

STRUCTURAL = "structural-ood"
IID = "iid-control"


@dataclass(frozen=True)
class SplitSpec:
    threshold: float = 0.5
    val_frac: float = 0.2
    mode: str = STRUCTURAL
    seed: int = 0
    side: str = None

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError("threshold must lie in (0, 1)")
        if not 0.0 < self.val_frac < 1.0:
            raise ValidationError("val_frac must lie in (0, 1)")
        if self.mode not in (STRUCTURAL, IID):
            raise ValidationError(f"mode must be {STRUCTURAL!r} or {IID!r}")


def _structural(g, spec):
    h = node_homophily(g, 1).values
    majority, minority = split_by_pattern(h, spec.threshold, spec.side)
    maj = np.flatnonzero(majority)
    test = np.flatnonzero(minority)
    if len(test) == 0:
        raise ValidationError("minority set is empty; no test nodes")
    n_val = int(round(spec.val_frac * len(maj)))
    perm = substream(spec.seed, "ood-split").permutation(maj)
    return {"train": np.sort(perm[n_val:]), "val": np.sort(perm[:n_val]), "test": test}


def make_split(g, spec):
    """Masks dict with train/val/test for the requested mode.

    Nodes with an undefined ratio belong to neither pattern and are left
    out of the structural split; the control split uses the same sizes.
    """
    masks = _structural(g, spec)
    if spec.mode == STRUCTURAL:
        return masks
    sizes = [len(masks[k]) for k in ("train", "val", "test")]
    perm = substream(spec.seed, "iid-split").permutation(g.num_nodes)
    a, b = sizes[0], sizes[0] + sizes[1]
    return {"train": np.sort(perm[:a]), "val": np.sort(perm[a:b]),
            "test": np.sort(perm[b:b + sizes[2]])}


def representations(model, x):
    """Input to the last layer (the aggregated features when L = 1)."""
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    return h


@dataclass(frozen=True)
class OodReport:
    acc_iid: float
    acc_ood: float
    mmd_iid_val: float
    mmd_iid_test: float
    mmd_ood_val: float
    mmd_ood_test: float
    sizes: tuple


def ood_report(g, config=None, spec=None):
    """Train one config under both splits; accuracies and train-vs-set MMDs."""
    cfg = config or TrainConfig()
    spec = spec or SplitSpec()
    out = {}
    for mode in (IID, STRUCTURAL):
        s = SplitSpec(spec.threshold, spec.val_frac, mode, spec.seed, spec.side)
        gm = g.with_masks(make_split(g, s))
        model = train(gm, cfg)
        x = model.features(gm)
        acc = evaluate(model, gm, features=x).accuracy
        rep = representations(model, x)
        tr = rep[gm.mask("train")]
        out[mode] = (acc, mmd(tr, rep[gm.mask("val")]), mmd(tr, rep[gm.mask("test")]),
                     tuple(len(gm.mask(k)) for k in ("train", "val", "test")))
    return OodReport(out[IID][0], out[STRUCTURAL][0], out[IID][1], out[IID][2],
                     out[STRUCTURAL][1], out[STRUCTURAL][2], out[STRUCTURAL][3])
