"""Closed-form CSBM quantities and generalization-bound terms.

Includes the two-class posterior for a structural pattern, a checker for
the posterior-gap bound between nodes of different patterns, linear
separability thresholds on node degree, Gaussian misclassification
probabilities, and plug-in evaluation of the subgroup bound terms for a
trained LinearStack.
"""
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import expit, ndtr

from .csbm import CsbmSpec, aggregated_mean, sample_aggregated
from .errors import ValidationError
from .graph import SELF_LOOP, aggregate, node_homophily
from .metrics import nearest_rows
from .models import margin_loss
from .seeding import substream


def _pattern_means(p, q, mu1, mu2):
    s = p + q
    if s <= 0:
        raise ValidationError("pattern needs p + q > 0")
    return (p * mu1 + q * mu2) / s, (q * mu1 + p * mu2) / s


def posterior(pattern, mu1, mu2, sigma, f, cls=1):
    """P(class | f) for a node of the given (p, q) pattern.

    The class-conditional densities are isotropic Gaussians around the
    pattern's aggregated means with kernel exp(-||f - m||^2 / sigma^2) and
    equal priors. Evaluated as a logistic of the log-density difference.
    ``cls=2`` returns the complement 1 - P(class 1 | f).
    """
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    m1, m2 = _pattern_means(pattern[0], pattern[1], mu1, mu2)
    a = np.sum((f - m1) ** 2, axis=-1)
    b = np.sum((f - m2) ** 2, axis=-1)
    p1 = expit((b - a) / (sigma * sigma))
    if cls == 1:
        return p1
    if cls == 2:
        return 1.0 - p1
    raise ValidationError("cls must be 1 or 2")


def homophily_of(pattern):
    p, q = pattern
    return p / (p + q)


@dataclass(frozen=True)
class Lemma1Result:
    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.lhs <= self.rhs


def lemma1_check(pattern_u, pattern_v, mu1, mu2, sigma, f_u, f_v, eps=None):
    """Compare |P_u(c1|f_u) - P_v(c1|f_v)| with (rho/(sqrt(2 pi) sigma))(eps + |h_u - h_v| rho).

    ``eps`` defaults to ||f_u - f_v||; a smaller value is rejected.
    """
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    dist = float(np.linalg.norm(np.asarray(f_u, float) - np.asarray(f_v, float)))
    if eps is None:
        eps = dist
    elif eps < dist:
        raise ValidationError("eps must be at least ||f_u - f_v||")
    rho = float(np.linalg.norm(mu1 - mu2))
    lhs = abs(float(posterior(pattern_u, mu1, mu2, sigma, f_u))
              - float(posterior(pattern_v, mu1, mu2, sigma, f_v)))
    gap = abs(homophily_of(pattern_u) - homophily_of(pattern_v))
    rhs = rho / (math.sqrt(2 * math.pi) * sigma) * (eps + gap * rho)
    return Lemma1Result(lhs, rhs)


def lemma1_sweep(trials, seed, dim=4):
    """Random (patterns, means, sigma, features) draws; returns per-trial rows.

    Each row is (lhs, rhs, holds). Patterns share p + q as required.
    """
    rng = substream(seed, "lemma1")
    rows = []
    for _ in range(int(trials)):
        s = rng.uniform(0.05, 1.0)
        pu = (rng.uniform(0, s),)
        pv = (rng.uniform(0, s),)
        pat_u = (pu[0], s - pu[0])
        pat_v = (pv[0], s - pv[0])
        mu1 = rng.normal(size=dim)
        mu2 = rng.normal(size=dim)
        sigma = rng.uniform(0.25, 2.0)
        f_u = (mu1 + mu2) / 2 + rng.normal(size=dim)
        f_v = f_u + rng.uniform(0, 0.5) * rng.normal(size=dim)
        r = lemma1_check(pat_u, pat_v, mu1, mu2, sigma, f_u, f_v)
        rows.append((r.lhs, r.rhs, r.holds))
    return rows


# --------------------------------------------------------- separability

def separability_threshold(p, q, q_other=None):
    """Degree above which aggregation improves linear separability.

    (p + q)^2 / (p - q)^2 within one pattern; with ``q_other`` the
    denominator becomes (p - q_other)^2 (classes in different patterns).
    Rates are read as the decimals they print as, and the ratio is formed
    exactly before rounding once, so (0.9, 0.1, 0.8) gives exactly 100.
    """
    p, q = Fraction(repr(float(p))), Fraction(repr(float(q)))
    ref = q if q_other is None else Fraction(repr(float(q_other)))
    den = (p - ref) ** 2
    if den == 0:
        raise ValidationError("threshold is infinite (vanishing rate difference)")
    return float((p + q) ** 2 / den)


def separation(p, q, degree, rho, aggregated=True, q_other=None):
    """Half-distance between class means in noise-standard-deviation units."""
    if not aggregated:
        return rho / 2.0
    if degree < 1:
        raise ValidationError("degree must be >= 1")
    ref = q if q_other is None else q_other
    return math.sqrt(degree) * abs(p - ref) / (p + q) * rho / 2.0


def misclassification_prob(p, q, degree, rho, aggregated=True, q_other=None):
    """Phi(-dis) for the midpoint classifier on raw or aggregated features."""
    return float(ndtr(-separation(p, q, degree, rho, aggregated, q_other)))


# ---------------------------------------------------------- bound terms

def term_a(num_classes, rho, sigma, eps, h_gap):
    """K rho / (sqrt(2 pi) sigma) * (eps + h_gap * rho)."""
    return num_classes * rho / (math.sqrt(2 * math.pi) * sigma) * (eps + h_gap * rho)


def disparity_term_a(report, num_classes, rho, sigma):
    """Term (a) per disparity bin, using each bin's mean distance and gap."""
    out = []
    for b in range(report.num_bins):
        sel = report.bins == b
        out.append(term_a(num_classes, rho, sigma, float(report.distance[sel].mean()),
                          float(report.homophily_gap[sel].mean())))
    return np.array(out)


@dataclass(frozen=True)
class BoundReport:
    subgroup: str
    size: int
    eps: float
    h_train: float
    h_subgroup: float
    h_gap: float
    rho: float
    sigma: float
    term_a: float
    term_b: float
    term_r: float
    n_train: int
    alpha: float
    delta: float
    gamma: float
    width: int
    frob_sq: float
    frob_max: float
    b_max: float
    train_margin_loss: float
    subgroup_loss: float

    @property
    def empirical_gap(self):
        return self.subgroup_loss - self.train_margin_loss


def class_geometry(f, labels, num_classes):
    """Plug-in rho (mean pairwise distance of class means) and pooled sigma."""
    means, resid = [], []
    for c in range(num_classes):
        rows = f[labels == c]
        if len(rows) == 0:
            continue
        m = rows.mean(axis=0)
        means.append(m)
        resid.append(rows - m)
    if len(means) < 2:
        raise ValidationError("need train nodes from at least two classes")
    means = np.array(means)
    pair = [np.linalg.norm(means[i] - means[j])
            for i in range(len(means)) for j in range(i + 1, len(means))]
    r = np.concatenate(resid)
    dof = r.size - len(means) * f.shape[1]
    sigma = math.sqrt(float(np.sum(r * r)) / max(dof, 1))
    return float(np.mean(pair)), sigma


def subgroup_eps(f, train, members):
    """max over members of the distance to the closest train row."""
    if len(members) == 0:
        return 0.0
    _, d = nearest_rows(f[members], f[train])
    return float(d.max())


def bound_terms(g, model, subgroups, gamma=0.1, alpha=0.2, delta=0.05, rho=None, sigma=None):
    """Evaluate the subgroup bound terms for each named node set.

    ``subgroups`` maps a name to node indices. ``rho`` and ``sigma``
    override the plug-in estimates from aggregated train features.
    """
    if gamma <= 0:
        raise ValidationError("gamma must be positive for the margin terms")
    if not 0 < alpha < 0.25:
        raise ValidationError("alpha must lie in (0, 1/4)")
    if not 0 < delta < 1:
        raise ValidationError("delta must lie in (0, 1)")
    f = aggregate(g, model.hops, SELF_LOOP)
    train = g.mask("train")
    y = g.labels
    est_rho, est_sigma = class_geometry(f[train], y[train], g.num_classes)
    rho = est_rho if rho is None else float(rho)
    sigma = est_sigma if sigma is None else float(sigma)
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    h = node_homophily(g, 1).values
    h_tr = float(np.nanmean(h[train])) if np.any(~np.isnan(h[train])) else float("nan")
    n_tr = len(train)
    L = model.num_layers
    k = g.num_classes
    hidden = [w.shape[1] for w in model.weights[:-1]]
    width = max(hidden) if hidden else max(model.weights[0].shape)
    frob = [float(np.sum(w * w)) for w in model.weights]
    frob_sq = sum(frob)
    c_max = math.sqrt(max(frob))
    logits = model.logits(f)
    train_loss = margin_loss(logits[train], y[train], gamma)
    norms = np.linalg.norm(f, axis=1)
    out = []
    for name, members in subgroups.items():
        members = np.asarray(members, dtype=np.int64)
        eps = subgroup_eps(f, train, members)
        hm = h[members]
        h_m = float(np.nanmean(hm)) if np.any(~np.isnan(hm)) else float("nan")
        h_gap = abs(h_tr - h_m)
        ta = term_a(k, rho, sigma, eps, h_gap)
        term_b = (width * frob_sq / ((gamma / 8.0) ** (2.0 / L) * n_tr ** alpha)
                  * eps ** (2.0 / L))
        b_m = float(norms[np.concatenate([train, members])].max())
        log_arg = L * c_max * (2 * b_m) ** (1.0 / L) / (gamma ** (1.0 / L) * delta)
        term_r = n_tr ** (2 * alpha - 1) + n_tr ** (-2 * alpha) * math.log(log_arg)
        sub_loss = margin_loss(logits[members], y[members], 0.0)
        out.append(BoundReport(str(name), len(members), eps, h_tr, h_m, h_gap, rho, sigma,
                               ta, term_b, term_r, n_tr, alpha, delta, gamma, width,
                               frob_sq, c_max, b_m, train_loss, sub_loss))
    return out


# ----------------------------------------------- Monte-Carlo separability

def _midpoint_error(points, a, b):
    """Fraction of points (drawn around ``a``) on ``b``'s side of the bisector."""
    w = b - a
    return float(np.mean((points - (a + b) / 2.0) @ w > 0))


def mc_misclassification(p, q, degree, rho, aggregated=True, q_other=None,
                         samples=10**5, seed=0, dim=4, variance="clt"):
    """Monte-Carlo error of the midpoint classifier (both classes pooled).

    Raw features are N(mu_c, I). Aggregated features come from
    :func:`gsd.csbm.sample_aggregated`; with ``q_other`` the second class
    follows the pattern (p + q - q_other, q_other).
    """
    s = p + q
    other = (p, q) if q_other is None else (s - q_other, q_other)
    spec = CsbmSpec.from_rho(rho, dim, [(p, q), other], [0.5, 0.5], 2)
    half = samples // 2
    if not aggregated:
        rng = substream(seed, "mc-raw")
        x0 = spec.mu1 + rng.standard_normal((half, dim))
        x1 = spec.mu2 + rng.standard_normal((samples - half, dim))
        return (_midpoint_error(x0, spec.mu1, spec.mu2) * half
                + _midpoint_error(x1, spec.mu2, spec.mu1) * (samples - half)) / samples
    rng = substream(seed, "mc-aggregated")
    m0 = aggregated_mean(spec, 0, 0)
    m1 = aggregated_mean(spec, 1, 1)
    f0 = sample_aggregated(spec, 0, 0, degree, half, rng, variance)
    f1 = sample_aggregated(spec, 1, 1, degree, samples - half, rng, variance)
    return (_midpoint_error(f0, m0, m1) * half
            + _midpoint_error(f1, m1, m0) * (samples - half)) / samples


def mc_crossover_degree(p, q, rho, q_other=None, samples=10**5, seed=0, dim=4,
                        variance="clt", lo=1e-3, hi=1e7, iters=80):
    """Degree at which the aggregated Monte-Carlo error meets the raw one.

    Bisection in log-degree. The aggregated draws reuse one seed at every
    degree, so the error curve is monotone and the bisection well defined.
    """
    target = mc_misclassification(p, q, 1, rho, False, q_other, samples, seed, dim, variance)
    err = lambda d: mc_misclassification(p, q, d, rho, True, q_other, samples, seed, dim,
                                         variance)
    if err(hi) > target or err(lo) < target:
        raise ValidationError("crossover lies outside the search bracket")
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = (a + b) / 2
        if err(math.exp(mid)) > target:
            a = mid
        else:
            b = mid
    return math.exp((a + b) / 2)
