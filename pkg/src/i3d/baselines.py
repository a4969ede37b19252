"""Box-counting and correlation-style fractal dimension, the classic scale-dependent baselines.

Both estimators fit a straight line in log-log space. The value reported at a given scale
is the slope of the fit that uses every scale from the smallest one up to it, so the series
shows how the answer drifts as larger scales enter the fit.
"""
from dataclasses import dataclass

import numpy as np

from i3d.census import distance_histograms
from i3d.errors import ArgumentError, DegenerateFitError


@dataclass
class ScaleSeries:
    """Per-scale dimension estimates of a baseline.

    Attributes:
        scales (np.ndarray): box sides or radii, strictly increasing
        counts (np.ndarray): occupied boxes or mean neighbor counts at each scale
        values (np.ndarray): slope of the fit over scales[0..i], nan for i = 0
        fit_window (tuple(int, int)): index range [start, stop) of the overall fit
        slope (float): slope over the fit window
        slope_err (float): standard error of that slope, nan with two points
        method (str): "box-counting" or "fractal-dimension"
    """

    scales: np.ndarray
    counts: np.ndarray
    values: np.ndarray
    fit_window: tuple
    slope: float
    slope_err: float
    method: str

    def __post_init__(self):
        if np.any(np.diff(self.scales) <= 0):
            raise ArgumentError("scales must be strictly increasing")
        start, stop = self.fit_window
        if not 0 <= start < stop <= len(self.scales):
            raise ArgumentError("fit window must be a nonempty index range")

    def local_slopes(self):
        """Slopes between consecutive scales."""
        x, y = self._loglog()
        return np.diff(y) / np.diff(x)

    def _loglog(self):
        x = np.log(self.scales.astype(float))
        with np.errstate(divide="ignore"):
            y = np.log(self.counts.astype(float))
        if self.method == "box-counting":
            x = -x
        return x, y

    def to_records(self):
        return [{"scale": float(s), "count": float(c), "value": float(v)}
                for s, c, v in zip(self.scales, self.counts, self.values)]

    def to_table(self):
        lines = [f"# {self.method}: slope {self.slope:.6f} +- {self.slope_err:.6f} "
                 f"over indices {self.fit_window[0]}..{self.fit_window[1] - 1}",
                 "# scale count cumulative_fit"]
        for s, c, v in zip(self.scales, self.counts, self.values):
            lines.append(f"{s:g} {c:.10g} {v:.6f}")
        return "\n".join(lines) + "\n"


def _check_scales(scales, name):
    scales = np.asarray(list(scales), dtype=np.int64)
    if scales.size == 0:
        raise ArgumentError(f"empty {name} list")
    if np.any(scales < 1):
        raise ArgumentError(f"{name} must be >= 1")
    if np.any(np.diff(scales) <= 0):
        raise ArgumentError(f"{name} must be strictly increasing")
    return scales


def _fit(x, y):
    """Least-squares slope and its standard error."""
    if x.size < 2:
        return np.nan, np.nan
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    if x.size < 3:
        return float(coef[0]), np.nan
    sxx = np.sum((x - x.mean()) ** 2)
    resid = float(res[0]) if res.size else 0.0
    return float(coef[0]), float(np.sqrt(resid / (x.size - 2) / sxx))


def _series(scales, counts, method, fit_window):
    x = np.log(scales.astype(float))
    if method == "box-counting":
        x = -x
    y = np.log(counts.astype(float))
    values = np.full(scales.size, np.nan)
    for i in range(1, scales.size):
        values[i] = _fit(x[: i + 1], y[: i + 1])[0]
    if fit_window is None:
        fit_window = (0, scales.size)
    start, stop = fit_window
    slope, err = _fit(x[start:stop], y[start:stop])
    return ScaleSeries(scales, counts, values, (start, stop), slope, err, method)


def box_counting(points, sides, fit_window=None):
    """Box-counting dimension from the number of occupied boxes of each side.

    Boxes are cells of the grid floor(x / s); shifting the data by a multiple of every side
    leaves the counts unchanged.

    Args:
        points (DiscretePointSet): the dataset
        sides (list(int)): box sides, increasing
        fit_window (tuple(int, int), optional): index range of the overall fit

    Returns:
        ScaleSeries

    Examples:
        >>> from i3d.census import DiscretePointSet
        >>> s = box_counting(DiscretePointSet([[0, 0], [1, 1]]), [1, 2])
        >>> s.counts.tolist(), round(s.slope, 12)
        ([2, 1], 1.0)
    """
    sides = _check_scales(sides, "sides")
    coords = points.coords
    counts = np.array([np.unique(np.floor_divide(coords, s), axis=0).shape[0] for s in sides])
    if np.all(counts == 1):
        raise DegenerateFitError("a single box is occupied at every side")
    return _series(sides, counts, "box-counting", fit_window)


def fractal_dimension(points, radii, fit_window=None, workers=1):
    """Correlation-style dimension from the mean number of neighbors within each radius.

    Args:
        points (DiscretePointSet): the dataset
        radii (list(int)): radii, increasing
        fit_window (tuple(int, int), optional): index range of the overall fit
        workers (int): threads for the distance pass

    Returns:
        ScaleSeries
    """
    radii = _check_scales(radii, "radii")
    hist = distance_histograms(points, int(radii[-1]), workers=workers)
    mean_counts = np.cumsum(hist.sum(axis=0)) / points.n_points
    counts = mean_counts[radii]
    if np.all(counts == 0):
        raise DegenerateFitError("no neighbors at any radius")
    if np.any(counts == 0):
        keep = counts > 0
        raise DegenerateFitError(
            f"no neighbors within radius {int(radii[~keep][0])}; start the radii higher")
    return _series(radii, counts, "fractal-dimension", fit_window)


__all__ = ["ScaleSeries", "box_counting", "fractal_dimension"]
