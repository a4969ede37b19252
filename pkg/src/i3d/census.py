"""Discrete point sets, pairwise distances and neighbor counts within two radii."""
import io
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from i3d.errors import ArgumentError

METRICS = ("l1", "l1-periodic", "hamming")


@dataclass
class DiscretePointSet:
    """N points with D integer coordinates and the metric used to compare them.

    Args:
        coords (np.ndarray(int)): array of shape (N, D)
        metric (str): one of "l1", "l1-periodic", "hamming"
        box_side (int or np.ndarray(int), optional): box side per axis, required for "l1-periodic"
        labels (list, optional): one identifier per point
    """

    coords: np.ndarray
    metric: str = "l1"
    box_side: object = None
    labels: list = None

    def __post_init__(self):
        coords = np.asarray(self.coords)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2:
            raise ArgumentError("coordinates must be a 2d array (points x features)")
        if coords.size and not np.issubdtype(coords.dtype, np.integer):
            if not np.all(np.equal(np.mod(coords, 1), 0)):
                raise ArgumentError("coordinates must be integers")
        self.coords = coords.astype(np.int64)
        if self.metric not in METRICS:
            raise ArgumentError(f"unknown metric {self.metric!r}, expected one of {METRICS}")
        if self.metric == "l1-periodic":
            if self.box_side is None:
                raise ArgumentError("l1-periodic metric requires a box side")
            side = np.broadcast_to(np.asarray(self.box_side, dtype=np.int64), (self.dim,)).copy()
            if np.any(side < 1):
                raise ArgumentError("box side must be positive")
            if self.n_points and (self.coords.min() < 0 or np.any(self.coords >= side)):
                raise ArgumentError("periodic coordinates must lie in [0, box_side)")
            self.box_side = side
        if self.labels is not None and len(self.labels) != self.n_points:
            raise ArgumentError("labels must have one entry per point")

    @property
    def n_points(self):
        return self.coords.shape[0]

    @property
    def dim(self):
        return self.coords.shape[1]

    def subset(self, index):
        index = np.asarray(index)
        labels = None
        if self.labels is not None:
            positions = np.arange(self.n_points)[index]
            labels = [self.labels[i] for i in positions]
        return DiscretePointSet(self.coords[index], self.metric, self.box_side, labels)

    def metric_descriptor(self):
        out = {"metric": self.metric}
        if self.box_side is not None:
            out["box_side"] = [int(s) for s in self.box_side]
        return out


@dataclass
class NeighborCensus:
    """Per-point counts of other points within the inner radius (n) and outer radius (k)."""

    n: np.ndarray
    k: np.ndarray
    t1: int
    t2: int
    metric: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.int64)
        self.k = np.asarray(self.k, dtype=np.int64)
        if self.n.shape != self.k.shape or self.n.ndim != 1:
            raise ArgumentError("n and k must be 1d arrays of equal length")
        if np.any(self.n < 0) or np.any(self.n > self.k):
            raise ArgumentError("counts must satisfy 0 <= n <= k")
        if not self.t1 < self.t2:
            raise ArgumentError(f"need t1 < t2, got t1={self.t1}, t2={self.t2}")

    @property
    def n_points(self):
        return self.n.shape[0]

    @property
    def sum_n(self):
        return int(self.n.sum())

    @property
    def sum_k(self):
        return int(self.k.sum())

    @property
    def mean_k(self):
        return self.sum_k / self.n_points if self.n_points else 0.0

    def subset(self, index):
        return NeighborCensus(self.n[index], self.k[index], self.t1, self.t2, dict(self.metric))

    @classmethod
    def concatenate(cls, censuses):
        """Stack the counts of independent datasets measured at the same radii."""
        censuses = list(censuses)
        if not censuses:
            raise ArgumentError("nothing to concatenate")
        t1, t2 = censuses[0].t1, censuses[0].t2
        if any((c.t1, c.t2) != (t1, t2) for c in censuses):
            raise ArgumentError("censuses use different radii")
        return cls(np.concatenate([c.n for c in censuses]),
                   np.concatenate([c.k for c in censuses]), t1, t2, dict(censuses[0].metric))


def distance(x, y, metric="l1", box_side=None):
    """Distance between two integer vectors under the chosen discrete metric."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ArgumentError(f"length mismatch: {x.shape} vs {y.shape}")
    if metric == "l1":
        return int(np.abs(x - y).sum())
    if metric == "l1-periodic":
        if box_side is None:
            raise ArgumentError("l1-periodic metric requires a box side")
        side = np.broadcast_to(np.asarray(box_side, dtype=np.int64), x.shape)
        diff = np.abs(x - y) % side
        return int(np.minimum(diff, side - diff).sum())
    if metric == "hamming":
        return int(np.count_nonzero(x != y))
    raise ArgumentError(f"unknown metric {metric!r}")


def _one_hot(coords):
    blocks = []
    for j in range(coords.shape[1]):
        _, inv = np.unique(coords[:, j], return_inverse=True)
        block = np.zeros((coords.shape[0], inv.max() + 1))
        block[np.arange(coords.shape[0]), inv] = 1.0
        blocks.append(block)
    return np.hstack(blocks)


class _DistanceKernel:
    """Computes blocks of the pairwise distance matrix for one point set."""

    def __init__(self, points):
        self.points = points
        self.coords = points.coords
        if points.metric == "hamming":
            self.onehot = _one_hot(self.coords)

    def block(self, start, stop):
        pts = self.points
        rows = self.coords[start:stop]
        if pts.metric == "hamming":
            same = self.onehot[start:stop] @ self.onehot.T
            return pts.dim - np.rint(same).astype(np.int64)
        out = np.zeros((rows.shape[0], pts.n_points), dtype=np.int64)
        for j in range(pts.dim):
            diff = np.abs(rows[:, j, None] - self.coords[None, :, j])
            if pts.metric == "l1-periodic":
                side = pts.box_side[j]
                diff = np.minimum(diff, side - diff)
            out += diff
        return out


def _chunks(n, chunk_size):
    return [(s, min(s + chunk_size, n)) for s in range(0, n, chunk_size)]


def _chunk_size(points):
    # keep a block around 4M entries
    return max(1, min(points.n_points, 4_000_000 // max(points.n_points, 1)))


def pairwise_distances(points):
    """Full N x N integer distance matrix. Intended for small sets."""
    return _DistanceKernel(points).block(0, points.n_points)


def distance_histograms(points, max_radius, workers=1):
    """Count, for every point, the other points found at each exact distance 0..max_radius.

    The query point itself is excluded. Larger distances are dropped.

    Args:
        points (DiscretePointSet): the dataset
        max_radius (int): largest distance to record
        workers (int): number of threads used over row blocks

    Returns:
        np.ndarray(int): array of shape (N, max_radius + 1)
    """
    if max_radius < 0:
        raise ArgumentError("max_radius must be nonnegative")
    kernel = _DistanceKernel(points)
    width = max_radius + 2
    n = points.n_points

    def work(bounds):
        start, stop = bounds
        block = np.minimum(kernel.block(start, stop), max_radius + 1)
        offsets = (np.arange(stop - start)[:, None] * width + block).ravel()
        hist = np.bincount(offsets, minlength=(stop - start) * width)
        return hist.reshape(stop - start, width)[:, : max_radius + 1]

    chunks = _chunks(n, _chunk_size(points))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    hist = np.vstack(parts) if parts else np.zeros((0, max_radius + 1), dtype=np.int64)
    hist[:, 0] -= 1
    return hist


def census_from_histograms(hist, t1, t2, metric=None):
    """Build a census from precomputed distance histograms (see :func:`distance_histograms`)."""
    if not 1 <= t1 < t2:
        raise ArgumentError(f"need 1 <= t1 < t2, got t1={t1}, t2={t2}")
    if t2 >= hist.shape[1]:
        raise ArgumentError(f"histograms only reach radius {hist.shape[1] - 1}, need {t2}")
    cum = np.cumsum(hist[:, : t2 + 1], axis=1)
    return NeighborCensus(cum[:, t1], cum[:, t2], int(t1), int(t2), metric or {})


def census(points, t1, t2, workers=1):
    """Neighbor counts within closed balls of radii t1 < t2 around every point.

    Examples:
        >>> c = census(DiscretePointSet([[0], [1], [3]]), 1, 3)
        >>> c.n.tolist(), c.k.tolist()
        ([1, 1, 0], [2, 2, 2])
    """
    if not 1 <= t1 < t2:
        raise ArgumentError(f"need 1 <= t1 < t2, got t1={t1}, t2={t2}")
    if points.n_points < 2:
        raise ArgumentError("a census needs at least two points")
    hist = distance_histograms(points, t2, workers=workers)
    return census_from_histograms(hist, t1, t2, points.metric_descriptor())


def neighbor_counts(points, radius, workers=1):
    """Number of other points within distance ``radius`` of each point."""
    return distance_histograms(points, radius, workers=workers).sum(axis=1)


def neighbor_graph(points, radius):
    """Sparse matrix of all pairs of distinct indices within ``radius`` of each other.

    Values store distance + 1, so coincident points (distance 0) are kept as explicit
    entries. Use :func:`adjacency_within` to get the 0/1 adjacency at a smaller radius.

    Returns:
        scipy.sparse.csr_matrix: symmetric (N, N) matrix
    """
    if radius < 0:
        raise ArgumentError("radius must be nonnegative")
    kernel = _DistanceKernel(points)
    rows, cols, vals = [], [], []
    for start, stop in _chunks(points.n_points, _chunk_size(points)):
        block = kernel.block(start, stop)
        i, j = np.nonzero(block <= radius)
        off = i + start != j
        rows.append(i[off] + start)
        cols.append(j[off])
        vals.append(block[i[off], j[off]] + 1)
    n = points.n_points
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def adjacency_within(graph, radius):
    """0/1 adjacency of pairs within ``radius`` from a :func:`neighbor_graph` result."""
    out = graph.copy()
    out.data = (out.data <= radius + 1).astype(float)
    out.eliminate_zeros()
    return out


def read_points(source, metric="l1", box_side=None):
    """Read an integer matrix, one point per row, whitespace- or comma-separated.

    Args:
        source: path, open text stream, or "-" for standard input
    """
    if source == "-" or source is None:
        text = sys.stdin.read()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.replace(",", " ").split()])
        except ValueError as exc:
            raise ArgumentError(f"line {lineno}: non-integer entry ({exc})") from None
    if not rows:
        raise ArgumentError("no points found in input")
    width = len(rows[0])
    bad = [i for i, r in enumerate(rows, 1) if len(r) != width]
    if bad:
        raise ArgumentError(f"rows with inconsistent length: {bad[:10]}")
    return DiscretePointSet(np.array(rows, dtype=np.int64), metric, box_side)


def format_points(points):
    buf = io.StringIO()
    np.savetxt(buf, points.coords, fmt="%d")
    return buf.getvalue()


def write_points(points, path):
    with open(path, "w") as fh:
        fh.write(format_points(points))
