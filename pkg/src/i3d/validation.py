"""Model checks for an ID estimate.

The inner counts n_i should follow a mixture of binomials whose weights are the
empirical frequencies of the outer counts k_i. Comparing that cdf with the empirical cdf
of n gives a KS statistic. Two bootstraps turn it into a p-value: an i.i.d. parametric
one that needs only the census, and a multiplier bootstrap that accounts for the overlap
of neighboring balls and needs the points. The pool
experiment measures how far the reported error bars are from the actual spread.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln, xlog1py, xlogy
from scipy.stats import binom

from i3d.census import NeighborCensus, adjacency_within, census, neighbor_graph
from i3d.errors import ArgumentError, I3DError
from i3d.estimators import bayes_discrete, mle_discrete, solve_ratio
from i3d.volumes import volume_ratio


@dataclass
class CdfPair:
    support: np.ndarray
    empirical: np.ndarray
    theoretical: np.ndarray
    ks: float

    def to_table(self):
        lines = ["# n empirical_cdf theoretical_cdf"]
        for s, e, t in zip(self.support, self.empirical, self.theoretical):
            lines.append(f"{s:d} {e:.10f} {t:.10f}")
        return "\n".join(lines) + "\n"


def binomial_logpmf(n, k, p):
    """log Binom(n; k, p), valid at p = 0 and p = 1."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    with np.errstate(invalid="ignore"):
        out = (gammaln(k + 1) - gammaln(n + 1) - gammaln(k - n + 1)
               + xlogy(n, p) + xlog1py(k - n, -p))
    return np.where((n >= 0) & (n <= k), out, -np.inf)


def mixture_pmf(k, p, support_max=None):
    """P(n) = sum_k P(k) Binom(n; k, p), with P(k) the empirical frequencies of ``k``."""
    k = np.asarray(k, dtype=np.int64)
    kmax = int(k.max()) if support_max is None else int(support_max)
    values, counts = np.unique(k, return_counts=True)
    weights = counts / counts.sum()
    n = np.arange(kmax + 1)
    logpmf = binomial_logpmf(n[None, :], values[:, None], p)
    return weights @ np.exp(logpmf)


def theoretical_cdf(census, d):
    """Cdf of n under the binomial mixture at dimension d.

    Returns:
        tuple(np.ndarray, np.ndarray): support 0..max(k) and the cdf on it
    """
    if not d > 0:
        raise ArgumentError("dimension must be positive")
    if census.n_points == 0:
        raise ArgumentError("empty census")
    p = volume_ratio(census.t1, census.t2, d)
    pmf = mixture_pmf(census.k, p)
    cdf = np.cumsum(pmf)
    cdf /= cdf[-1]
    return np.arange(cdf.size), cdf


def empirical_cdf(values, support_max):
    counts = np.bincount(np.asarray(values, dtype=np.int64), minlength=support_max + 1)
    return np.cumsum(counts) / counts.sum()


def ks_validate(census, d):
    """Compare the empirical cdf of n with the binomial-mixture cdf at dimension d."""
    if census.n_points == 0:
        raise ArgumentError("empty census")
    support, theo = theoretical_cdf(census, d)
    emp = empirical_cdf(census.n, support[-1])
    ks = float(np.max(np.abs(emp - theo)))
    return CdfPair(support, emp, theo, ks)


def _ks_from_counts(n, k, t1, t2, d):
    return ks_validate(NeighborCensus(n, k, t1, t2), d).ks


def bootstrap_ks(census, d, n_boot=200, seed=None, refit=True):
    """KS statistics of data resampled from the fitted model.

    Each draw samples n_i ~ Binom(k_i, p(d)) keeping the observed k_i, refits d when
    ``refit`` is set, and records the KS distance at the refitted value.
    """
    rng = np.random.default_rng(seed)
    p = volume_ratio(census.t1, census.t2, d)
    out = np.empty(n_boot)
    for b in range(n_boot):
        n_star = rng.binomial(census.k, p)
        d_star = d
        if refit and census.sum_k > 0:
            try:
                d_star = solve_ratio(census.t1, census.t2, n_star.sum() / census.sum_k)
            except I3DError:
                d_star = d
        out[b] = _ks_from_counts(n_star, census.k, census.t1, census.t2, d_star)
    return out


def bootstrap_pvalue(census, d, n_boot=200, seed=None, observed=None, refit=True):
    """Parametric-bootstrap p-value of the observed KS statistic."""
    if observed is None:
        observed = ks_validate(census, d).ks
    null = bootstrap_ks(census, d, n_boot=n_boot, seed=seed, refit=refit)
    return float((1 + np.count_nonzero(null >= observed - 1e-12)) / (n_boot + 1))


def multiplier_ks(points, census, d, n_boot=500, seed=None, graph=None):
    """Null distribution of the KS statistic from a dependence-aware multiplier bootstrap.

    Balls of nearby points overlap, so the per-point counts are positively correlated and
    an i.i.d. resampling understates the spread of the KS statistic. Here every
    point carries the cdf residual e_i(m) = 1[n_i <= m] - Binom(m; k_i, p), corrected for
    the refit of d. The residuals are multiplied by weights that are correlated over the
    t2-neighborhood, xi = (A + I) g / sqrt(k + 1) with g i.i.d. standard normal, and
    KS* = max_m |sum_i xi_i e_i(m)| / N.

    Args:
        points (DiscretePointSet): the points the census was computed on; may be None
            when ``graph`` is given
        census (NeighborCensus): counts at (t1, t2)
        d (float): fitted dimension
        n_boot (int): number of bootstrap draws
        seed: RNG seed
        graph (scipy.sparse matrix, optional): precomputed :func:`neighbor_graph` at a
            radius >= t2

    Returns:
        np.ndarray: n_boot bootstrap KS statistics
    """
    n = census.n_points
    if census.sum_k == 0:
        raise ArgumentError("census has no neighbors")
    if graph is None:
        if points is None:
            raise ArgumentError("need the points or a precomputed graph")
        graph = neighbor_graph(points, census.t2)
    if graph.shape != (n, n):
        raise ArgumentError("graph and census sizes differ")
    graph = adjacency_within(graph, census.t2)
    p = volume_ratio(census.t1, census.t2, d)
    k = census.k
    # beyond this support every per-point cdf is 1 to double precision
    top = max(int(census.n.max()), int(binom.ppf(1.0 - 1e-13, k, p).max()))
    m = np.arange(min(top, int(k.max())) + 1)
    resid = (census.n[:, None] <= m[None, :]) - binom.cdf(m[None, :], k[:, None], p)
    # derivative of the mixture cdf with respect to p, times the linearized refit
    grad = (-k[:, None] * binom.pmf(m[None, :], np.maximum(k, 1)[:, None] - 1, p)).mean(axis=0)
    score = (census.n - p * k) / census.mean_k
    resid = resid - score[:, None] * grad[None, :]
    weights = graph + sp.identity(n, format="csr")
    scale = 1.0 / np.sqrt(k + 1.0)[:, None]
    rng = np.random.default_rng(seed)
    out = np.empty(n_boot)
    for start in range(0, n_boot, 100):
        stop = min(start + 100, n_boot)
        xi = (weights @ rng.standard_normal((n, stop - start))) * scale
        out[start:stop] = np.abs(xi.T @ resid / n).max(axis=1)
    return out


def multiplier_pvalue(points, census, d, n_boot=500, seed=None, observed=None, graph=None):
    """Multiplier-bootstrap p-value of the observed KS statistic."""
    if observed is None:
        observed = ks_validate(census, d).ks
    null = multiplier_ks(points, census, d, n_boot=n_boot, seed=seed, graph=graph)
    if not np.all(np.isfinite(null)):
        raise I3DError("bootstrap produced non-finite statistics")
    return float((1 + np.count_nonzero(null >= observed - 1e-12)) / (n_boot + 1))


def pooled_validation(point_sets, t1, t2, n_boot=500, seed=None):
    """Fit and validate one dimension on several independent datasets at once.

    The censuses are concatenated and the neighbor graphs stacked block-diagonally, so
    the null keeps the within-dataset dependence and no coupling across datasets.

    Returns:
        tuple(IdEstimate, CdfPair, float): pooled MLE, cdf comparison and p-value
    """
    point_sets = list(point_sets)
    cens = [census(pts, t1, t2) for pts in point_sets]
    pooled = NeighborCensus.concatenate(cens)
    graph = sp.block_diag([neighbor_graph(pts, t2) for pts in point_sets], format="csr")
    est = mle_discrete(pooled)
    cdf = ks_validate(pooled, est.d)
    pv = multiplier_pvalue(None, pooled, est.d, n_boot=n_boot, seed=seed, observed=cdf.ks,
                           graph=graph)
    est.ks, est.p_value = cdf.ks, pv
    return est, cdf, pv


@dataclass
class PoolReport:
    chi_corr: np.ndarray
    chi_ind: np.ndarray
    std_corr: float
    std_ind: float
    d_true: float
    realizations: int
    skipped_corr: int = 0
    skipped_ind: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "d_true": self.d_true,
            "realizations": self.realizations,
            "n_corr": int(self.chi_corr.size),
            "n_ind": int(self.chi_ind.size),
            "skipped_corr": self.skipped_corr,
            "skipped_ind": self.skipped_ind,
            "std_corr": self.std_corr,
            "std_ind": self.std_ind,
            "mean_corr": float(np.mean(self.chi_corr)) if self.chi_corr.size else None,
            "chi_corr": self.chi_corr.tolist(),
            "chi_ind": self.chi_ind.tolist(),
            **self.extra,
        }


def pool_experiment(generate, realizations, seed, t1, t2, d_true, min_realizations=50,
                    grid_size=1000):
    """Calibrate the reported error bars against the spread over independent datasets.

    For every realization the full dataset gives a posterior mean and standard deviation,
    pooled as (d - d_true) / sigma. A single random point of the same dataset gives an
    uncorrelated estimate; those are standardized by their own mean and standard deviation
    after the loop, which makes std(chi_ind) one by construction. ``extra["std_ind_gt"]`` is
    the root mean square of (d_ind - d_true) / sigma_stat, the same spread centred on the
    ground truth.

    Args:
        generate (callable): ``generate(rng) -> DiscretePointSet`` for one realization
        realizations (int): number of datasets, at least 50
        seed: root seed; each realization gets its own spawned stream
        t1, t2 (int): radii
        d_true (float): ground-truth dimension

    Returns:
        PoolReport
    """
    if realizations < min_realizations:
        raise ArgumentError(f"need at least {min_realizations} realizations")
    streams = np.random.SeedSequence(seed).spawn(realizations)
    chi_corr, d_ind = [], []
    skipped_corr = skipped_ind = 0
    for ss in streams:
        rng = np.random.default_rng(ss)
        points = generate(rng)
        try:
            cen = census(points, t1, t2)
            post = bayes_discrete(cen, grid_size=grid_size)
            chi_corr.append((post.mean - d_true) / post.std)
        except I3DError:
            skipped_corr += 1
            continue
        i = rng.integers(cen.n_points)
        try:
            d_ind.append(mle_discrete(cen.subset([i])).d)
        except I3DError:
            skipped_ind += 1
    chi_corr = np.asarray(chi_corr)
    d_ind = np.asarray(d_ind)
    extra = {"mean_d_ind": float(d_ind.mean()) if d_ind.size else None}
    if d_ind.size > 1:
        sigma_stat = float(np.std(d_ind, ddof=1))
        chi_ind = (d_ind - d_ind.mean()) / sigma_stat
        # centring on the ground truth instead leaves the single-point bias in the spread
        chi_gt = (d_ind - d_true) / sigma_stat
        extra.update(sigma_stat=sigma_stat, std_ind_gt=float(np.sqrt(np.mean(chi_gt**2))))
    else:
        chi_ind = np.zeros(0)
    std_corr = float(np.std(chi_corr, ddof=1)) if chi_corr.size > 1 else math.nan
    std_ind = float(np.std(chi_ind, ddof=1)) if chi_ind.size > 1 else math.nan
    return PoolReport(chi_corr, chi_ind, std_corr, std_ind, float(d_true), realizations,
                      skipped_corr, skipped_ind, extra)
