"""Command-line entry point: ``gsd <subcommand> ...``.

Every subcommand writes its outputs through a ``.partial`` path that is
renamed only on success, and records a manifest (versions, seeds,
parameters, output hashes) next to the output. Exit codes: 0 success,
2 validation error, 3 runtime or numeric error.
"""
import argparse
import csv
import hashlib
import json
import os
import platform
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy

from . import __version__
from .csbm import EDGE_RULES, CsbmSpec, generate
from .errors import NumericError, ValidationError
from .graph import AGG_MODES, SELF_LOOP, aggregate, load_bundle, node_homophily, save_bundle

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


# ------------------------------------------------------------- helpers

class Output:
    """Staged output path: work on ``<path>.partial``, publish on commit."""

    def __init__(self, path, is_dir=False):
        self.final = os.path.abspath(path)
        self.partial = self.final + ".partial"
        self.is_dir = is_dir
        parent = os.path.dirname(self.final)
        if not os.path.isdir(parent):
            raise ValidationError(f"output directory does not exist: {parent}")
        self._clear(self.partial)
        if is_dir:
            os.makedirs(self.partial)

    @staticmethod
    def _clear(path):
        if os.path.isdir(path):
            shutil.rmtree(path)
        elif os.path.exists(path):
            os.remove(path)

    def commit(self):
        self._clear(self.final)
        os.replace(self.partial, self.final)
        return self.final


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_outputs(paths):
    out = {}
    for p in paths:
        if os.path.isdir(p):
            for root, _, files in os.walk(p):
                for f in sorted(files):
                    if f == "manifest.json":
                        continue
                    full = os.path.join(root, f)
                    out[os.path.relpath(full, os.path.dirname(p))] = _sha256(full)
        else:
            out[os.path.basename(p)] = _sha256(p)
    return dict(sorted(out.items()))


def write_manifest(args, outputs, seeds=None):
    """Manifest next to the first output; no timestamps, so reruns match."""
    first = outputs[0]
    path = (os.path.join(first, "manifest.json") if os.path.isdir(first)
            else first + ".manifest.json")
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    doc = {
        "tool": "gsd",
        "version": __version__,
        "command": args.command,
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "seeds": seeds if seeds is not None else ([args.seed] if getattr(args, "seed", None)
                                                   is not None else []),
        "params": params,
        "outputs": _hash_outputs(outputs),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "" if np.isnan(x) else repr(float(x))
    return str(x)


def _nan_to_none(x):
    return None if x is None or (isinstance(x, float) and np.isnan(x)) else x


def _read_index_file(path):
    if not os.path.isfile(path):
        raise ValidationError(f"index file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return np.array([int(t) for t in fh.read().split()], dtype=np.int64)
    except ValueError:
        raise ValidationError(f"{path}: expected whitespace-separated integers") from None


def _node_set(g, spec):
    """Mask name in the bundle, or a file of node indices."""
    if g.has_mask(spec):
        return np.asarray(g.mask(spec))
    return _read_index_file(spec)


def _rates(text):
    try:
        pairs = [tuple(float(t) for t in part.split(",")) for part in text.split(";")]
    except ValueError:
        raise argparse.ArgumentTypeError("rates look like '0.9,0.1;0.1,0.9'") from None
    if any(len(p) != 2 for p in pairs):
        raise argparse.ArgumentTypeError("each subgroup needs exactly 'p,q'")
    return pairs


def _floats(text):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from None


def _ints(text):
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None


def _train_config(args, hops=None, prefix=""):
    from .models import TrainConfig
    get = lambda name: getattr(args, prefix + name)
    return TrainConfig(hops=get("hops") if hops is None else hops, layers=get("layers"),
                       width=args.width, lr=args.lr, epochs=args.epochs, l2=args.l2,
                       patience=args.patience, seed=args.seed)


def _pattern_sets(g, threshold, side):
    from .metrics import split_by_pattern
    return split_by_pattern(node_homophily(g, 1).values, threshold, side)


# ------------------------------------------------------------ commands

def cmd_gen_csbm(args):
    from .experiments import per_class_masks, random_masks
    if args.spec:
        if not os.path.isfile(args.spec):
            raise ValidationError(f"spec file not found: {args.spec}")
        spec = CsbmSpec.load(args.spec)
        doc = spec.to_dict()
    else:
        if args.rates is None or args.n is None:
            raise ValidationError("give --spec or at least --rates and --n")
        probs = args.probs if args.probs is not None else [1.0 / len(args.rates)] * len(args.rates)
        doc = CsbmSpec.from_rho(args.rho, args.dim, args.rates, probs, args.n).to_dict()
    doc["seed"] = args.seed
    if args.edge_rule:
        doc["edge_rule"] = args.edge_rule
    if args.name:
        doc["name"] = args.name
    spec = CsbmSpec.from_dict(doc)
    g = generate(spec)
    if args.split == "per-class":
        g = g.with_masks(per_class_masks(g.labels, args.seed, args.per_class, args.num_val))
    elif args.split == "random":
        g = g.with_masks(random_masks(g.num_nodes, args.seed, args.train_frac, args.val_frac))
    out = Output(args.out, is_dir=True)
    save_bundle(g, out.partial)
    _write_json(os.path.join(out.partial, "spec.json"), spec.to_dict())
    return [out]


def cmd_homophily(args):
    g = load_bundle(args.bundle)
    prof = node_homophily(g, args.hops)
    out = Output(args.out)
    _write_csv(out.partial, ["node", "degree", "homophily"],
               [(i, int(d), _fmt(h)) for i, (d, h) in enumerate(zip(g.degrees, prof.values))])
    print(json.dumps({"hop": args.hops, "graph_homophily": _nan_to_none(prof.graph),
                      "undefined": prof.num_undefined}))
    return [out]


def cmd_aggregate(args):
    g = load_bundle(args.bundle)
    f = aggregate(g, args.hops, args.mode)
    out = Output(args.out)
    with open(out.partial, "w", encoding="utf-8") as fh:
        fh.writelines(",".join(map(repr, row)) + "\n" for row in f.tolist())
    return [out]


def cmd_perturb(args):
    from .perturb import PerturbPlan, apply_trace, edge_trace, targeted_homophily
    g = load_bundle(args.bundle)
    targets = _node_set(g, args.targets)
    dist = _load_matrix(args.label_dist) if args.label_dist else None
    plan = PerturbPlan(targets, args.budget, args.mode, dist, args.seed)
    checkpoints = args.checkpoints or []
    if any(k < 0 or k > args.budget for k in checkpoints):
        raise ValidationError("checkpoints must lie in [0, budget]")
    checkpoints = sorted(set([0] + checkpoints + [args.budget]))
    out = Output(args.out, is_dir=True)
    trace = edge_trace(g, plan)
    rows = []
    for k in checkpoints:
        gk = apply_trace(g, trace[:k])
        rows.append((k, gk.num_edges, _fmt(targeted_homophily(gk, targets))))
        if args.save_checkpoints:
            save_bundle(gk, os.path.join(out.partial, f"bundle_K{k}"))
    save_bundle(gk, os.path.join(out.partial, "bundle"))
    with open(os.path.join(out.partial, "trace.tsv"), "w", encoding="utf-8") as fh:
        fh.write("step\tu\tv\n")
        fh.writelines(f"{s}\t{u}\t{v}\n" for s, (u, v) in enumerate(trace.tolist(), 1))
    _write_csv(os.path.join(out.partial, "sweep.csv"), ["budget", "num_edges", "h_targeted"], rows)
    return [out]


def cmd_train(args):
    from .models import train
    g = load_bundle(args.bundle)
    model = train(g, _train_config(args))
    out = Output(args.out)
    model.save(out.partial)
    print(json.dumps({"epochs_run": len(model.history) - 1, "best_epoch": model.best_epoch,
                      "final_loss": model.history[-1]}))
    return [out]


def _eval_rows(report):
    rows = [("overall", "", report.count, _fmt(report.accuracy))]
    rows += [("homophily", label, count, _fmt(acc)) for label, count, acc in report.homophily_bins]
    rows += [("disparity", b + 1, count, _fmt(acc)) for b, count, acc in report.disparity_bins]
    rows += [("mask", name, "", _fmt(acc)) for name, acc in sorted(report.mask_accuracy.items())]
    rows.append(("margin_loss", report.gamma, report.count, _fmt(report.margin_loss)))
    return rows


def cmd_eval(args):
    from .metrics import disparity_scores, partition_bins
    from .models import evaluate
    g = load_bundle(args.bundle)
    model = _load_model(args.model)
    x = model.features(g)
    rep = None
    if g.has_mask("train") and g.has_mask("test") and len(g.mask("test")) >= args.bins:
        rep = partition_bins(disparity_scores(g, args.disparity_hops), args.bins)
    report = evaluate(model, g, args.gamma, disparity=rep, features=x)
    out = Output(args.out)
    _write_csv(out.partial, ["kind", "bin", "count", "accuracy"], _eval_rows(report))
    return [out]


def _load_model(path):
    from .models import LinearStack
    if not os.path.isfile(path):
        raise ValidationError(f"model file not found: {path}")
    return LinearStack.load(path)


def cmd_compare(args):
    from .models import compare
    g = load_bundle(args.bundle)
    rows = compare(g, _train_config(args, prefix="a_"), _train_config(args, prefix="b_"))
    out = Output(args.out)
    _write_csv(out.partial, ["bin", "count", "acc_a", "acc_b", "gap_b_minus_a"],
               [(label, count, _fmt(a), _fmt(b), _fmt(gap)) for label, count, a, b, gap in rows])
    return [out]


def cmd_disparity(args):
    from .metrics import disparity_scores, partition_bins
    g = load_bundle(args.bundle)
    rep = partition_bins(disparity_scores(g, args.hops), args.bins, args.key)
    correct = None
    if args.model:
        model = _load_model(args.model)
        correct = model.predict(g) == g.labels
    out = Output(args.out, is_dir=True)
    _write_csv(os.path.join(out.partial, "nodes.csv"),
               ["node", "nearest_train", "distance", "homophily_gap", "score", "bin"],
               [(int(u), int(v), repr(float(d)), repr(float(hg)), repr(float(d + hg)), int(b) + 1)
                for u, v, d, hg, b in zip(rep.test, rep.nearest, rep.distance,
                                          rep.homophily_gap, rep.bins)])
    bins = []
    for b in range(rep.num_bins):
        sel = rep.bins == b
        entry = {"bin": b + 1, "count": int(sel.sum()),
                 "mean_score": float(rep.score[sel].mean()),
                 "mean_distance": float(rep.distance[sel].mean()),
                 "mean_homophily_gap": float(rep.homophily_gap[sel].mean())}
        if correct is not None:
            entry["accuracy"] = float(correct[rep.test[sel]].mean())
        bins.append(entry)
    _write_json(os.path.join(out.partial, "bins.json"),
                {"hop": args.hops, "key": args.key, "undefined_homophily": rep.undefined,
                 "bins": bins})
    return [out]


def cmd_protoratio(args):
    from .metrics import discriminative_ratio
    g = load_bundle(args.bundle)
    maj, mino = _pattern_sets(g, args.threshold, args.side)
    rows = []
    for k in range(0, args.max_hop + 1):
        r, protos = discriminative_ratio(g, k, maj, mino, mean=args.mean)
        rows.append((k, repr(r), ";".join(str(c) for c in protos.excluded)))
    out = Output(args.out)
    _write_csv(out.partial, ["hop", "ratio", "excluded_classes"], rows)
    return [out]


def cmd_agree(args):
    from .metrics import local_agreement
    g = load_bundle(args.bundle)
    maj, mino = _pattern_sets(g, args.threshold, args.side)
    rows = []
    for k in range(0, args.max_hop + 1):
        rep = local_agreement(g, k, maj, mino, args.knn)
        rows.append((k, _fmt(rep.ratio), _fmt(rep.accuracy_majority),
                     _fmt(rep.accuracy_minority), rep.agreed, rep.total))
    out = Output(args.out)
    _write_csv(out.partial, ["hop", "agreement_ratio", "accuracy_majority",
                             "accuracy_minority", "agreed", "total"], rows)
    return [out]


def _load_matrix(path):
    if not os.path.isfile(path):
        raise ValidationError(f"file not found: {path}")
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed row ({exc})") from None


def cmd_mmd(args):
    from .metrics import mmd
    if args.bundle:
        g = load_bundle(args.bundle)
        f = aggregate(g, args.hops, SELF_LOOP)
        x = f[_node_set(g, args.x)]
        y = f[_node_set(g, args.y)]
    else:
        x, y = _load_matrix(args.x), _load_matrix(args.y)
    value = mmd(x, y, args.sigmas)
    out = Output(args.out)
    _write_json(out.partial, {"mmd": value, "sigmas": args.sigmas, "n_x": len(x), "n_y": len(y)})
    print(json.dumps({"mmd": value}))
    return [out]


def cmd_ood_split(args):
    from .ood import SplitSpec, make_split
    g = load_bundle(args.bundle)
    masks = make_split(g, SplitSpec(args.threshold, args.val_frac, args.mode, args.seed,
                                    args.side))
    out = Output(args.out, is_dir=True)
    save_bundle(g.with_masks(masks), out.partial)
    return [out]


def cmd_bound(args):
    from .theory import bound_terms
    g = load_bundle(args.bundle)
    model = _load_model(args.model)
    test = g.mask("test")
    maj, mino = _pattern_sets(g, args.threshold, args.side)
    groups = {"majority": test[maj[test]], "minority": test[mino[test]]}
    if g.subgroups is not None:
        for s in np.unique(g.subgroups):
            groups[f"subgroup_{int(s)}"] = test[g.subgroups[test] == s]
    groups = {k: v for k, v in groups.items() if len(v)}
    reports = bound_terms(g, model, groups, args.gamma, args.alpha, args.delta,
                          args.rho, args.sigma)
    doc = []
    for r in reports:
        d = {k: _nan_to_none(v) for k, v in r.__dict__.items()}
        d["empirical_gap"] = r.empirical_gap
        doc.append(d)
    out = Output(args.out)
    _write_json(out.partial, {"subgroups": doc})
    return [out]


def cmd_lemma1_sweep(args):
    from .theory import lemma1_sweep
    rows = lemma1_sweep(args.trials, args.seed, args.dim)
    out = Output(args.out)
    _write_csv(out.partial, ["trial", "lhs", "rhs", "holds"],
               [(i, repr(l), repr(r), int(h)) for i, (l, r, h) in enumerate(rows)])
    viol = sum(1 for _, _, h in rows if not h)
    print(json.dumps({"trials": len(rows), "violations": viol,
                      "violation_rate": viol / max(len(rows), 1)}))
    return [out]


def _table_d2_seed(job):
    from .experiments import table_d2
    seed, rho, dim, n = job
    return table_d2([seed], rho, dim, n)


def cmd_table_d2(args):
    from .experiments import HETERO_RATES, HOMO_RATES, format_rates, table_d2_rows
    seeds = list(range(args.seed, args.seed + args.seeds))
    jobs = [(s, args.rho, args.dim, args.n) for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            parts = list(pool.map(_table_d2_seed, jobs))
    else:
        parts = [_table_d2_seed(j) for j in jobs]
    cells = {}
    for part in parts:
        for key, vals in part.items():
            cells.setdefault(key, []).extend(vals)
    out = Output(args.out)
    with open(out.partial, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(table_d2_rows(cells))
    long_out = Output(os.path.splitext(args.out)[0] + "_per_seed.csv")
    name = lambda i, table: "-" if i is None else format_rates(table[i])
    rows = [(name(r, HETERO_RATES), name(c, HOMO_RATES), s, repr(v))
            for (r, c), vals in sorted(cells.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1])))
            for s, v in zip(seeds, vals)]
    _write_csv(long_out.partial, ["hetero", "homo", "seed", "accuracy"], rows)
    return [out, long_out], seeds


# --------------------------------------------------------------- parser

def _add_train_flags(p, prefix="", hops_default=2):
    p.add_argument(f"--{prefix}hops", type=int, default=hops_default)
    p.add_argument(f"--{prefix}layers", type=int, default=2)


def _add_shared_train_flags(p):
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--seed", type=int, required=True)


def _add_pattern_flags(p):
    p.add_argument("--threshold", type=float, default=0.5,
                   help="homophily threshold separating the two patterns")
    p.add_argument("--side", choices=["homo", "hetero"], default=None,
                   help="force which pattern is the majority")


def build_parser():
    parser = argparse.ArgumentParser(prog="gsd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gsd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-csbm", help="sample a CSBM graph bundle")
    p.add_argument("--spec", help="JSON spec (fields of CsbmSpec, or rho+dim shorthand)")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--rates", type=_rates, help="subgroup rates, e.g. '0.9,0.1;0.1,0.9'")
    p.add_argument("--probs", type=_floats, help="subgroup membership probabilities")
    p.add_argument("--n", type=int)
    p.add_argument("--edge-rule", choices=EDGE_RULES)
    p.add_argument("--name")
    p.add_argument("--split", choices=["none", "per-class", "random"], default="none")
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--num-val", type=int, default=500)
    p.add_argument("--train-frac", type=float, default=0.1)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_csbm)

    p = sub.add_parser("homophily", help="per-node k-hop homophily")
    p.add_argument("--bundle", required=True)
    p.add_argument("--hops", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_homophily)

    p = sub.add_parser("aggregate", help="k-hop aggregated features")
    p.add_argument("--bundle", required=True)
    p.add_argument("--hops", type=int, default=1)
    p.add_argument("--mode", choices=AGG_MODES, default=SELF_LOOP)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("perturb", help="targeted edge addition")
    p.add_argument("--bundle", required=True)
    p.add_argument("--mode", choices=["homo", "hetero"], required=True)
    p.add_argument("--targets", required=True, help="mask name or index file")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--checkpoints", type=_ints)
    p.add_argument("--label-dist", help="CSV K x K target-label distribution")
    p.add_argument("--save-checkpoints", action="store_true")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("train", help="train an SGC/MLP model")
    p.add_argument("--bundle", required=True)
    _add_train_flags(p)
    _add_shared_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model per homophily and disparity bin")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--disparity-hops", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="per-homophily-bin accuracy gap B - A")
    p.add_argument("--bundle", required=True)
    _add_train_flags(p, "a-", 2)
    _add_train_flags(p, "b-", 0)
    _add_shared_train_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("disparity", help="disparity scores and bins")
    p.add_argument("--bundle", required=True)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--key", choices=["score", "distance", "homophily_gap"], default="score")
    p.add_argument("--model", help="model JSON; adds per-bin accuracy")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_disparity)

    p = sub.add_parser("protoratio", help="relative discriminative ratio per hop")
    p.add_argument("--bundle", required=True)
    p.add_argument("--max-hop", type=int, default=4)
    p.add_argument("--mean", action="store_true", help="divide the class sum by K")
    _add_pattern_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_protoratio)

    p = sub.add_parser("agree", help="local agreement ratio and accuracy per hop")
    p.add_argument("--bundle", required=True)
    p.add_argument("--max-hop", type=int, default=4)
    p.add_argument("--knn", type=int, default=9)
    _add_pattern_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("mmd", help="multi-bandwidth Gaussian MMD")
    p.add_argument("--x", required=True, help="CSV of rows, or a mask name with --bundle")
    p.add_argument("--y", required=True)
    p.add_argument("--bundle")
    p.add_argument("--hops", type=int, default=0)
    p.add_argument("--sigmas", type=_floats, default=[0.01, 0.1, 1.0, 10.0, 100.0])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mmd)

    p = sub.add_parser("ood-split", help="structural OOD or matched i.i.d. split")
    p.add_argument("--bundle", required=True)
    p.add_argument("--val-frac", type=float, default=0.2)
    p.add_argument("--mode", choices=["structural-ood", "iid-control"], default="structural-ood")
    _add_pattern_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ood_split)

    p = sub.add_parser("bound", help="subgroup generalization-bound terms")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--rho", type=float)
    p.add_argument("--sigma", type=float)
    _add_pattern_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("lemma1-sweep", help="random checks of the posterior-gap bound")
    p.add_argument("--trials", type=int, default=10**5)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lemma1_sweep)

    p = sub.add_parser("table-d2", help="logistic-regression separability table")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds")
    p.add_argument("--seed", type=int, default=0, help="first seed (seeds are consecutive)")
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--jobs", type=int, default=1, help="worker processes across seeds")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_table_d2)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
        seeds = None
        if isinstance(result, tuple):
            result, seeds = result
        finals = [o.commit() for o in result]
        write_manifest(args, finals, seeds)
    except (ValidationError, FileNotFoundError) as exc:
        print(f"gsd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, ArithmeticError, RuntimeError, MemoryError) as exc:
        print(f"gsd {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
