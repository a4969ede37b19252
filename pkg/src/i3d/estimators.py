"""Intrinsic dimension from neighbor counts: discrete MLE, Cramer-Rao error, Beta posterior.

The estimator treats each inner count n_i as Binomial(k_i, p(d)) with p(d) the ratio of
lattice-ball volumes at radii t1 < t2. The likelihood is stationary where
p(d) = sum(n) / sum(k), and p(d) is strictly decreasing in d, so there is one root.
"""
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from i3d import continuum
from i3d.census import census_from_histograms, distance_histograms
from i3d.errors import (
    ArgumentError,
    DimensionOutOfRangeError,
    GridRangeWarning,
    I3DError,
    NoNeighborsError,
    ScaleTooSmallError,
    UndefinedError,
)
from i3d.volumes import (
    D_MAX,
    D_MIN,
    log_volume,
    log_volume_array,
    volume_ratio,
    volume_ratio_ddim,
    volume_ratio_ddim_array,
)

METHODS = ("mle-discrete", "bayes-discrete", "mle-continuum", "bayes-continuum")


@dataclass
class IdEstimate:
    d: float
    err: float
    method: str
    t1: float
    t2: float
    n_points: int
    mean_k: float = 0.0
    ks: float = None
    p_value: float = None

    def to_dict(self):
        return asdict(self)


@dataclass
class PosteriorGrid:
    d_grid: np.ndarray
    density: np.ndarray
    mean: float
    variance: float
    alpha: float
    beta: float
    edge_mass: float = 0.0

    @property
    def std(self):
        return math.sqrt(self.variance)

    def to_table(self):
        lines = ["# d density"]
        lines += [f"{x:.10g} {y:.10g}" for x, y in zip(self.d_grid, self.density)]
        return "\n".join(lines) + "\n"


def inner_radius(t2, r):
    """Inner radius max(1, round(r * t2)), rounding halves up."""
    return max(1, int(math.floor(r * t2 + 0.5)))


def _check_counts(sum_n, sum_k):
    if sum_k <= 0:
        raise NoNeighborsError("no neighbors at this scale (sum of k is zero)")
    if sum_n >= sum_k:
        raise ScaleTooSmallError(
            "inner and outer counts coincide (ratio 1): scale too small, increase t2"
        )


def solve_ratio(t1, t2, target):
    """Dimension d in [0.01, 1000] at which V(t1, d) / V(t2, d) equals ``target``."""
    if not 0.0 < target < 1.0:
        if target >= 1.0:
            raise ScaleTooSmallError("volume ratio 1 corresponds to d -> 0: scale too small")
        raise DimensionOutOfRangeError(
            "no inner neighbors: scale inconsistent / dimension out of range"
        )
    log_target = math.log(target)

    def f(d):
        return log_volume(t1, d) - log_volume(t2, d) - log_target

    lo, hi = f(D_MIN), f(D_MAX)
    if lo < 0.0:
        raise ScaleTooSmallError(
            f"ratio {target:.6g} exceeds the volume ratio at d={D_MIN}: scale too small"
        )
    if hi > 0.0:
        raise DimensionOutOfRangeError(
            f"ratio {target:.6g} is below the volume ratio at d={D_MAX}: "
            "scale inconsistent / dimension out of range"
        )
    if lo == 0.0:
        return D_MIN
    if hi == 0.0:
        return D_MAX
    return brentq(f, D_MIN, D_MAX, xtol=1e-12, rtol=1e-14, maxiter=500)


def cramer_rao_discrete(d, census):
    """Cramer-Rao lower bound on the standard error of the estimate at dimension d.

    Args:
        d (float): dimension at which the bound is evaluated (normally the MLE)
        census (NeighborCensus): the counts

    Returns:
        float: sqrt(p (1 - p) / (<k> N p'^2))
    """
    if not d > 0:
        raise ArgumentError("dimension must be positive")
    if census.n_points == 0 or census.sum_k == 0:
        raise UndefinedError("Cramer-Rao bound undefined without neighbors")
    p = volume_ratio(census.t1, census.t2, d)
    dp = volume_ratio_ddim(census.t1, census.t2, d)
    if dp == 0.0:
        raise UndefinedError("volume ratio has zero derivative, bound undefined")
    return math.sqrt(p * (1.0 - p) / (census.mean_k * census.n_points * dp * dp))


def mle_discrete(census):
    """Maximum likelihood ID from a census.

    Examples:
        >>> from i3d.census import NeighborCensus
        >>> est = mle_discrete(NeighborCensus([5] * 10, [13] * 10, 1, 2))
        >>> round(est.d, 9)
        2.0
    """
    sum_n, sum_k = census.sum_n, census.sum_k
    _check_counts(sum_n, sum_k)
    d = solve_ratio(census.t1, census.t2, sum_n / sum_k)
    err = cramer_rao_discrete(d, census)
    return IdEstimate(d, err, "mle-discrete", census.t1, census.t2, census.n_points, census.mean_k)


def _log_posterior(grid, t1, t2, alpha, beta):
    log_p = log_volume_array(t1, grid) - log_volume_array(t2, grid)
    log_1mp = np.log(-np.expm1(log_p))
    jac = np.abs(volume_ratio_ddim_array(t1, t2, grid))
    with np.errstate(divide="ignore"):
        return (alpha - 1.0) * log_p + (beta - 1.0) * log_1mp + np.log(jac)


def _edge_fraction(density, grid, frac=0.01):
    m = max(2, int(round(frac * grid.size)))
    left = np.trapezoid(density[:m], grid[:m])
    right = np.trapezoid(density[-m:], grid[-m:])
    return left, right


def bayes_discrete(census, grid_size=1000, d_max=50.0, max_refinements=12):
    """Posterior of d under a uniform Beta(1, 1) prior on the volume ratio.

    The Beta posterior of the ratio is mapped to d through the Jacobian of the volume
    ratio and evaluated on a uniform grid. The grid spans [0.01, d_max] unless the
    posterior is much narrower than that, in which case it is centered on the MLE with a
    half-width of 12 Cramer-Rao standard errors so that the grid resolves the peak. The
    range is widened (and d_max doubled, up to 1000) while more than 1e-3 of the mass
    sits in the outer 1% of the grid on an open side.

    Returns:
        PosteriorGrid
    """
    sum_n, sum_k = census.sum_n, census.sum_k
    _check_counts(sum_n, sum_k)
    if grid_size < 10:
        raise ArgumentError("grid_size must be at least 10")
    alpha = 1.0 + sum_n
    beta = 1.0 + (sum_k - sum_n)
    t1, t2 = census.t1, census.t2

    try:
        center = mle_discrete(census)
        half = 12.0 * center.err
        lo, hi = max(D_MIN, center.d - half), min(d_max, center.d + half)
        if hi <= lo:
            lo, hi = D_MIN, d_max
    except I3DError:
        center = None
        lo, hi = D_MIN, d_max

    for attempt in range(max_refinements + 1):
        grid = np.linspace(lo, hi, grid_size)
        logd = _log_posterior(grid, t1, t2, alpha, beta)
        density = np.exp(logd - np.max(logd))
        density /= np.trapezoid(density, grid)
        left, right = _edge_fraction(density, grid)
        widen_left = left > 1e-3 and lo > D_MIN
        widen_right = right > 1e-3 and hi < D_MAX
        if not (widen_left or widen_right) or attempt == max_refinements:
            break
        width = hi - lo
        if widen_left:
            lo = max(D_MIN, lo - width)
        if widen_right:
            if hi >= d_max:
                d_max = min(D_MAX, 2.0 * d_max)
            hi = min(d_max, hi + width)
    edge = max(left, right)
    if edge > 1e-3:
        warnings.warn(
            f"grid range insufficient: posterior mass {edge:.3g} at the grid edge", GridRangeWarning
        )
    mean = float(np.trapezoid(grid * density, grid))
    var = float(np.trapezoid((grid - mean) ** 2 * density, grid))
    return PosteriorGrid(grid, density, mean, var, alpha, beta, float(edge))


def continuum_estimate(census):
    """Continuum closed-form MLE, using t1/t2 as the radius ratio."""
    r = census.t1 / census.t2
    _check_counts(census.sum_n, census.sum_k)
    if census.sum_n == 0:
        raise DimensionOutOfRangeError("no inner neighbors: dimension out of range")
    d = continuum.mle_continuum(census.sum_n, census.sum_k, r)
    var = continuum.cr_variance_continuum(d, r, census.n_points, census.mean_k)
    return IdEstimate(
        d, math.sqrt(var), "mle-continuum", census.t1, census.t2, census.n_points, census.mean_k
    )


def estimate(census, method="mle", grid_size=1000, d_max=50.0):
    """Dispatch on ``method``: "mle", "bayes", "continuum" or "bayes-continuum".

    Returns:
        tuple(IdEstimate, PosteriorGrid or None)
    """
    if method in ("mle", "mle-discrete"):
        return mle_discrete(census), None
    if method in ("bayes", "bayes-discrete"):
        post = bayes_discrete(census, grid_size=grid_size, d_max=d_max)
        est = IdEstimate(
            post.mean, post.std, "bayes-discrete", census.t1, census.t2,
            census.n_points, census.mean_k,
        )
        return est, post
    if method in ("continuum", "mle-continuum"):
        return continuum_estimate(census), None
    if method == "bayes-continuum":
        _check_counts(census.sum_n, census.sum_k)
        mean, var = continuum.bayes_continuum_moments(
            census.sum_n, census.sum_k, census.t1 / census.t2
        )
        est = IdEstimate(
            mean, math.sqrt(var), "bayes-continuum", census.t1, census.t2,
            census.n_points, census.mean_k,
        )
        return est, None
    raise ArgumentError(f"unknown method {method!r}")


@dataclass
class ScanRow:
    t2: int
    t1: int
    estimate: IdEstimate = None
    ks: float = None
    mean_k: float = None
    p_value: float = None
    reason: str = None

    @property
    def ok(self):
        return self.estimate is not None


@dataclass
class ScanResult:
    rows: list = field(default_factory=list)
    method: str = "mle"
    ratio: float = 0.5

    def valid_rows(self):
        return [row for row in self.rows if row.ok]

    def dims(self):
        """(t2 values, d values) of the rows that produced an estimate."""
        ok = self.valid_rows()
        return np.array([r.t2 for r in ok]), np.array([r.estimate.d for r in ok])

    def to_records(self):
        out = []
        for row in self.rows:
            rec = {"t1": row.t1, "t2": row.t2, "mean_k": row.mean_k, "ks": row.ks}
            if row.p_value is not None:
                rec["p_value"] = row.p_value
            if row.ok:
                rec.update(method=row.estimate.method, d=row.estimate.d, err=row.estimate.err,
                           n_points=row.estimate.n_points)
            else:
                rec["skipped"] = row.reason
            out.append(rec)
        return out

    def to_table(self):
        header = f"{'t2':>5} {'t1':>5} {'d':>10} {'err':>10} {'mean_k':>10} {'ks':>8} {'p_value':>8}  note"
        lines = [header]
        for row in self.rows:
            mk = f"{row.mean_k:10.4f}" if row.mean_k is not None else f"{'-':>10}"
            ks = f"{row.ks:8.4f}" if row.ks is not None else f"{'-':>8}"
            pv = f"{row.p_value:8.4f}" if row.p_value is not None else f"{'-':>8}"
            if row.ok:
                est = row.estimate
                lines.append(f"{row.t2:5d} {row.t1:5d} {est.d:10.5f} {est.err:10.5f} {mk} {ks} {pv}")
            else:
                lines.append(f"{row.t2:5d} {row.t1:5d} {'-':>10} {'-':>10} {mk} {ks} {pv}  {row.reason}")
        return "\n".join(lines) + "\n"


def scan_histograms(hist, t2_list, r=0.5, method="mle", metric=None, bootstrap=0, seed=None,
                    grid_size=1000, points=None):
    """Scan over outer radii using precomputed distance histograms.

    See :func:`scan`. Without ``points`` the p-values come from the i.i.d. parametric
    bootstrap.
    """
    from i3d.census import neighbor_graph
    from i3d.validation import bootstrap_pvalue, ks_validate, multiplier_pvalue

    if not 0.0 < r < 1.0:
        raise ArgumentError(f"radius ratio must lie in (0, 1), got {r}")
    t2_list = sorted(int(t) for t in t2_list)
    valid = [t for t in t2_list if t >= 2 and inner_radius(t, r) < t]
    if not valid:
        raise ArgumentError("no valid outer radius in the scan list (need t2 >= 2 and t1 < t2)")
    seeds = np.random.SeedSequence(seed).spawn(len(t2_list))
    graph = None
    if bootstrap and points is not None:
        graph = neighbor_graph(points, max(valid))
    result = ScanResult(method=method, ratio=r)
    for t2, ss in zip(t2_list, seeds):
        t1 = inner_radius(t2, r)
        if t2 < 2 or t1 >= t2:
            result.rows.append(ScanRow(t2, t1, reason="t1 >= t2 at this ratio"))
            continue
        cen = census_from_histograms(hist, t1, t2, metric)
        try:
            est, _ = estimate(cen, method, grid_size=grid_size)
        except I3DError as exc:
            result.rows.append(ScanRow(t2, t1, mean_k=cen.mean_k, reason=exc.code))
            continue
        cdf = ks_validate(cen, est.d)
        est.ks = cdf.ks
        pv = None
        if bootstrap and graph is not None:
            pv = multiplier_pvalue(points, cen, est.d, n_boot=bootstrap, seed=ss,
                                   observed=cdf.ks, graph=graph)
        elif bootstrap:
            pv = bootstrap_pvalue(cen, est.d, n_boot=bootstrap, seed=ss, observed=cdf.ks)
        if pv is not None:
            est.p_value = pv
        result.rows.append(ScanRow(t2, t1, est, cdf.ks, cen.mean_k, pv))
    return result


def scan(points, t2_list, r=0.5, method="mle", bootstrap=0, seed=None, workers=1, grid_size=1000):
    """ID as a function of the outer radius t2 at fixed ratio r = t1/t2.

    Distances are histogrammed once up to max(t2_list); each row then costs one cumulative
    sum. Rows where the rounding rule gives t1 >= t2, or where the estimator fails, are
    kept with a reason instead of an estimate.

    Args:
        points (DiscretePointSet): the dataset
        t2_list (list(int)): outer radii, each >= 2
        r (float): ratio t1/t2
        method (str): "mle", "bayes" or "continuum"
        bootstrap (int): number of multiplier-bootstrap draws for the KS p-value, 0 to skip
        seed: seed for the bootstrap streams
        workers (int): threads for the distance pass

    Returns:
        ScanResult
    """
    t2_list = list(t2_list)
    if not t2_list:
        raise ArgumentError("empty t2 list")
    hist = distance_histograms(points, max(max(t2_list), 1), workers=workers)
    return scan_histograms(hist, t2_list, r, method, points.metric_descriptor(), bootstrap, seed,
                           grid_size, points=points)


def two_pass(points_or_hist, t2, r=0.5, workers=1):
    """Estimate at ratio r, then re-estimate at the continuum-optimal ratio for that estimate.

    Returns:
        tuple(IdEstimate, IdEstimate): first and second pass
    """
    if isinstance(points_or_hist, np.ndarray):
        hist, metric = points_or_hist, None
    else:
        hist = distance_histograms(points_or_hist, t2, workers=workers)
        metric = points_or_hist.metric_descriptor()
    first = mle_discrete(census_from_histograms(hist, inner_radius(t2, r), t2, metric))
    r_opt = continuum.optimal_ratio(first.d)
    t1 = min(inner_radius(t2, r_opt), t2 - 1)
    second = mle_discrete(census_from_histograms(hist, t1, t2, metric))
    return first, second


__all__ = [
    "IdEstimate", "PosteriorGrid", "ScanResult", "ScanRow", "bayes_discrete",
    "continuum_estimate", "cramer_rao_discrete", "estimate", "inner_radius", "mle_discrete",
    "scan", "scan_histograms", "solve_ratio", "two_pass",
]
