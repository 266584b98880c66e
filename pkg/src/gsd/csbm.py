"""Contextual stochastic block models with structural subgroups.

Two classes with Gaussian features N(mu_c, I). Every node also belongs to
a structural subgroup j that owns an (intra, inter) edge-rate pair
(p_j, q_j). All subgroups share p_j + q_j so that expected degrees match.
Subgroup 0 with p > q is homophilic; a subgroup with p < q is heterophilic.

Class ``0`` in code corresponds to the first mean ``mu1``.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .graph import GraphBundle
from .seeding import substream

EDGE_RULES = ("mean", "rarer")
VARIANCES = ("sqrt", "clt")

_RATE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CsbmSpec:
    """Parameters of a two-class CSBM with structural subgroups.

    ``edge_rule`` decides the probability of an edge whose endpoints sit in
    different subgroups:

    - ``"mean"``: average of the two endpoints' applicable rates.
    - ``"rarer"``: the endpoint whose subgroup has the lower membership
      probability supplies the rate (ties go to the lower subgroup index).

    Both rules reduce to plain (p, q) when there is a single subgroup and
    both keep every node's expected degree at (n/2)(p + q).
    """

    mu1: np.ndarray
    mu2: np.ndarray
    rates: tuple
    probs: tuple
    n: int
    class_balance: float = 0.5
    seed: int = 0
    edge_rule: str = "mean"
    name: str = "csbm"

    def __post_init__(self):
        mu1 = np.asarray(self.mu1, dtype=np.float64).reshape(-1)
        mu2 = np.asarray(self.mu2, dtype=np.float64).reshape(-1)
        if mu1.shape != mu2.shape or mu1.size == 0:
            raise ValidationError("class means must be non-empty vectors of equal length")
        mu1.setflags(write=False)
        mu2.setflags(write=False)
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu2", mu2)

        rates = tuple((float(p), float(q)) for p, q in self.rates)
        if not rates:
            raise ValidationError("at least one subgroup is required")
        for p, q in rates:
            if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
                raise ValidationError(f"edge rates must lie in [0, 1], got ({p}, {q})")
        total = rates[0][0] + rates[0][1]
        for p, q in rates[1:]:
            if abs(p + q - total) > _RATE_TOL:
                raise ValidationError(
                    "subgroups must share p + q (equal expected degree); "
                    f"got {total} and {p + q}"
                )
        object.__setattr__(self, "rates", rates)

        probs = tuple(float(x) for x in self.probs)
        if len(probs) != len(rates):
            raise ValidationError("need one membership probability per subgroup")
        if any(x < 0 for x in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise ValidationError("subgroup probabilities must be non-negative and sum to 1")
        object.__setattr__(self, "probs", probs)

        if not 0.0 < self.class_balance < 1.0:
            raise ValidationError("class_balance must lie in (0, 1)")
        if self.edge_rule not in EDGE_RULES:
            raise ValidationError(f"edge_rule must be one of {EDGE_RULES}")
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise ValidationError("n must be an integer")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_rho(cls, rho, dim, rates, probs, n, **kw):
        """Means at +-(rho/2) e_1, so that ||mu1 - mu2|| = rho."""
        if dim < 1:
            raise ValidationError("dimension must be >= 1")
        mu1 = np.zeros(dim)
        mu2 = np.zeros(dim)
        mu1[0] = rho / 2.0
        mu2[0] = -rho / 2.0
        return cls(mu1, mu2, rates, probs, n, **kw)

    @property
    def dim(self):
        return self.mu1.size

    @property
    def rho(self):
        return float(np.linalg.norm(self.mu1 - self.mu2))

    def to_dict(self):
        return {
            "mu1": self.mu1.tolist(),
            "mu2": self.mu2.tolist(),
            "rates": [list(r) for r in self.rates],
            "probs": list(self.probs),
            "n": self.n,
            "class_balance": self.class_balance,
            "seed": self.seed,
            "edge_rule": self.edge_rule,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, doc):
        """Accept either explicit means or the ``rho`` + ``dim`` shorthand."""
        doc = dict(doc)
        try:
            if "mu1" in doc or "mu2" in doc:
                mu1, mu2 = doc.pop("mu1"), doc.pop("mu2")
            else:
                rho, dim = float(doc.pop("rho")), int(doc.pop("dim"))
                return cls.from_rho(rho, dim, **doc)
            return cls(mu1, mu2, **doc)
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"invalid CSBM spec: {exc}") from None

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: malformed JSON ({exc})") from None


def _pair_rule(spec):
    """Index array choosing, for subgroups (a, b), whose rates govern the pair."""
    m = len(spec.rates)
    a, b = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    if spec.edge_rule == "rarer":
        order = sorted(range(m), key=lambda j: (spec.probs[j], j))
        rank = np.empty(m, dtype=np.int64)
        rank[order] = np.arange(m)
        return np.where(rank[a] <= rank[b], a, b)
    return None


def block_probabilities(spec):
    """Edge probabilities for (class-agreement, subgroup a, subgroup b).

    Returns an array P of shape (2, m, m); P[1] applies to same-class pairs
    and P[0] to cross-class pairs.
    """
    p = np.array([r[0] for r in spec.rates])
    q = np.array([r[1] for r in spec.rates])
    chooser = _pair_rule(spec)
    if chooser is None:
        same = (p[:, None] + p[None, :]) / 2.0
        cross = (q[:, None] + q[None, :]) / 2.0
    else:
        same = p[chooser]
        cross = q[chooser]
    return np.stack([cross, same])


def generate(spec):
    """Sample a graph bundle from ``spec``; deterministic in ``spec.seed``."""
    n = spec.n
    if n < 2:
        raise ValidationError("CSBM needs n >= 2")
    n0 = math.ceil(n * spec.class_balance - 1e-12)
    n0 = min(max(n0, 0), n)
    labels = np.concatenate([np.zeros(n0, np.int64), np.ones(n - n0, np.int64)])
    labels = substream(spec.seed, "labels").permutation(labels)

    groups = substream(spec.seed, "subgroups").choice(
        len(spec.probs), size=n, p=np.asarray(spec.probs)
    ).astype(np.int64)

    means = np.stack([spec.mu1, spec.mu2])
    noise = substream(spec.seed, "features").standard_normal((n, spec.dim))
    features = means[labels] + noise

    blocks = block_probabilities(spec)
    coins = substream(spec.seed, "edges")
    us, vs = [], []
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        prob = blocks[(labels[j] == labels[i]).astype(np.int64), groups[i], groups[j]]
        hit = coins.random(n - i - 1) < prob
        if hit.any():
            us.append(np.full(int(hit.sum()), i, dtype=np.int64))
            vs.append(j[hit])
    if us:
        edges = np.stack([np.concatenate(us), np.concatenate(vs)], axis=1)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return GraphBundle(n, edges, features, labels, 2, subgroups=groups, name=spec.name)


def aggregated_mean(spec, cls, subgroup):
    """Mean of the one-hop aggregated feature for a class/subgroup pair."""
    p, q = spec.rates[subgroup]
    if p + q == 0:
        raise ValidationError("subgroup has p + q = 0; aggregation undefined")
    if cls == 0:
        return (p * spec.mu1 + q * spec.mu2) / (p + q)
    if cls == 1:
        return (q * spec.mu1 + p * spec.mu2) / (p + q)
    raise ValidationError("class must be 0 or 1")


def sample_aggregated(spec, cls, subgroup, degree, count, rng, variance="sqrt"):
    """Draw aggregated features without building a graph.

    ``variance="sqrt"`` uses covariance I / sqrt(degree); ``"clt"`` uses
    I / degree, the variance of a mean of ``degree`` unit-variance rows.
    """
    if degree <= 0:
        raise ValidationError("degree must be positive")
    if variance not in VARIANCES:
        raise ValidationError(f"variance must be one of {VARIANCES}")
    scale = degree ** -0.25 if variance == "sqrt" else degree ** -0.5
    mean = aggregated_mean(spec, cls, subgroup)
    return mean + scale * rng.standard_normal((int(count), spec.dim))


def aggregated_mean_distance(spec, a, b, cls=0):
    """Distance between the aggregated-feature means of two subgroups."""
    return float(np.linalg.norm(aggregated_mean(spec, cls, a) - aggregated_mean(spec, cls, b)))
