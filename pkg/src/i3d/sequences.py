"""From aligned nucleotide reads to per-cluster ID scans and local principal directions.

The workflow is read, encode, deduplicate, drop isolated points, cluster, then scan each
cluster and combine the scans weighted by cluster population.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import eigsh

from i3d.census import DiscretePointSet, _DistanceKernel, neighbor_counts
from i3d.errors import ArgumentError, EmptyResultError, FastaFormatError, I3DError
from i3d.estimators import scan

ALPHABET = "ACGT"
ENCODINGS = ("binary-spin", "plain")
# two bits per letter; A and T differ in both bits, any other pair in one
BINARY_CODE = {"A": (1, 1), "T": (0, 0), "C": (1, 0), "G": (0, 1)}


@dataclass
class SequenceSet:
    ids: list
    sequences: list
    encoding: str = "binary-spin"

    def __post_init__(self):
        if len(self.ids) != len(self.sequences):
            raise ArgumentError("ids and sequences differ in length")
        if self.encoding not in ENCODINGS:
            raise ArgumentError(f"unknown encoding {self.encoding!r}")
        lengths = {len(s) for s in self.sequences}
        if len(lengths) > 1:
            raise FastaFormatError("sequences have unequal lengths")
        for sid, seq in zip(self.ids, self.sequences):
            bad = set(seq) - set(ALPHABET)
            if bad:
                raise FastaFormatError(f"record {sid!r} has letters outside ACGT: {sorted(bad)}")

    def __len__(self):
        return len(self.sequences)

    @property
    def length(self):
        return len(self.sequences[0]) if self.sequences else 0


def parse_fasta(text, crop=False, drop_invalid=False, source="<string>"):
    """Parse FASTA text; see :func:`read_fasta`."""
    ids, chunks = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        if line.startswith(">"):
            ids.append(line[1:].split()[0] if line[1:].split() else f"seq{len(ids)}")
            chunks.append([])
        elif not ids:
            raise FastaFormatError(f"{source}:{lineno}: sequence data before the first header")
        else:
            chunks[-1].append(line.upper())
    if not ids:
        raise FastaFormatError(f"{source}: no FASTA records found")
    seqs = ["".join(c) for c in chunks]
    keep_ids, keep_seqs = [], []
    for sid, seq in zip(ids, seqs):
        if not seq:
            raise FastaFormatError(f"{source}: record {sid!r} is empty")
        bad = [(i, ch) for i, ch in enumerate(seq) if ch not in ALPHABET]
        if bad:
            if drop_invalid:
                continue
            pos, ch = bad[0]
            raise FastaFormatError(
                f"{source}: record {sid!r} has {ch!r} at position {pos + 1} "
                f"({len(bad)} invalid letters in total)")
        keep_ids.append(sid)
        keep_seqs.append(seq)
    if not keep_seqs:
        raise FastaFormatError(f"{source}: no valid records left")
    lengths = [len(s) for s in keep_seqs]
    shortest = min(lengths)
    if max(lengths) != shortest:
        if not crop:
            common = max(set(lengths), key=lengths.count)
            offenders = [sid for sid, n in zip(keep_ids, lengths) if n != common]
            preview = ", ".join(offenders[:10]) + (" ..." if len(offenders) > 10 else "")
            raise FastaFormatError(
                f"{source}: unequal sequence lengths; {len(offenders)} records differ from "
                f"length {common}: {preview}")
        keep_seqs = [s[:shortest] for s in keep_seqs]
    return SequenceSet(keep_ids, keep_seqs)


def read_fasta(path, crop=False, drop_invalid=False):
    """Read equal-length nucleotide records.

    Sequence lines are joined and uppercased. Unequal lengths are an error unless ``crop``
    truncates all records to the shortest one; records with letters other than ACGT are an
    error unless ``drop_invalid`` skips them.

    Returns:
        SequenceSet
    """
    with open(path) as fh:
        text = fh.read()
    return parse_fasta(text, crop=crop, drop_invalid=drop_invalid, source=str(path))


def encode(seqs, mode="binary-spin"):
    """Encode sequences as points with the Hamming metric.

    "binary-spin" writes two bits per letter, so A and T are at distance 2 and every other
    pair at distance 1. "plain" keeps one symbol per position, all letters equidistant.

    Examples:
        >>> encode(SequenceSet(["a", "b"], ["A", "T"])).coords.tolist()
        [[1, 1], [0, 0]]
    """
    if mode not in ENCODINGS:
        raise ArgumentError(f"unknown encoding {mode!r}")
    letters = np.array([list(s) for s in seqs.sequences])
    if mode == "plain":
        lookup = {ch: i for i, ch in enumerate(ALPHABET)}
        coords = np.vectorize(lookup.__getitem__, otypes=[np.int64])(letters)
    else:
        bits = np.array([BINARY_CODE[ch] for ch in ALPHABET], dtype=np.int64)
        index = np.searchsorted(np.array(list(ALPHABET)), letters)
        coords = bits[index].reshape(len(seqs), -1)
    return DiscretePointSet(coords, "hamming", labels=list(seqs.ids))


def decode_binary(coords):
    """Inverse of the binary-spin encoding for 0/1 rows of even length."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.shape[1] % 2:
        raise ArgumentError("binary rows must have even length")
    inverse = {v: k for k, v in BINARY_CODE.items()}
    pairs = coords.reshape(coords.shape[0], -1, 2)
    return ["".join(inverse[(int(a), int(b))] for a, b in row) for row in pairs]


def spins_to_fasta(points, prefix="s"):
    """FASTA text for 0/1 (or +-1) spin states read as binary-spin codes."""
    coords = np.asarray(points.coords)
    if coords.min() < 0:
        coords = (coords + 1) // 2
    seqs = decode_binary(coords)
    return "".join(f">{prefix}{i}\n{s}\n" for i, s in enumerate(seqs))


def dedup(points):
    """Keep the first occurrence of every distinct row.

    Returns:
        tuple(DiscretePointSet, np.ndarray): unique points and the kept indices
    """
    _, first = np.unique(points.coords, axis=0, return_index=True)
    first = np.sort(first)
    return points.subset(first), first


@dataclass
class FilterReport:
    kept: np.ndarray
    n_in: int
    radius: int
    min_neighbors: int
    passes: int = 1


def filter_isolated(points, radius=10, min_neighbors=10, workers=1):
    """Drop points with fewer than ``min_neighbors`` other points within ``radius``.

    One pass only: counts are taken on the input, so points that lose neighbors through
    the removal are kept, and applying the filter again may remove more.

    Returns:
        tuple(DiscretePointSet, FilterReport)
    """
    if radius < 1 or min_neighbors < 1:
        raise ArgumentError("need radius >= 1 and min_neighbors >= 1")
    counts = neighbor_counts(points, radius, workers=workers)
    kept = np.flatnonzero(counts >= min_neighbors)
    if kept.size == 0:
        raise EmptyResultError(
            f"no point has {min_neighbors} neighbors within {radius} (of {points.n_points})")
    return points.subset(kept), FilterReport(kept, points.n_points, radius, min_neighbors)


def default_k(n_points):
    """Cluster-count heuristic max(2, round(N / 500)); arbitrary."""
    return max(2, int(round(n_points / 500)))


def _l1_to_centers(x, centers):
    out = np.empty((x.shape[0], centers.shape[0]))
    step = max(1, 2_000_000 // max(1, centers.shape[0] * x.shape[1]))
    for s in range(0, x.shape[0], step):
        out[s:s + step] = np.abs(x[s:s + step, None, :] - centers[None, :, :]).sum(axis=2)
    return out


def cluster(points, k, seed=None, max_iter=100):
    """k-means with L1 assignment and mean update on the encoded vectors.

    Seeding is k-means++ with L1 distances. A cluster that becomes empty is reseeded at the
    point farthest from its current center. Identical input points end up sharing a label
    even when k > 1; unused labels simply stay empty.

    Returns:
        np.ndarray(int): labels in 0..k-1
    """
    n = points.n_points
    if not 2 <= k < n:
        raise ArgumentError(f"need 2 <= k < N, got k={k}, N={n}")
    rng = np.random.default_rng(seed)
    x = points.coords.astype(float)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    dist = np.abs(x - centers[0]).sum(axis=1)
    for j in range(1, k):
        total = dist.sum()
        idx = rng.choice(n, p=dist / total) if total > 0 else rng.integers(n)
        centers[j] = x[idx]
        dist = np.minimum(dist, np.abs(x - centers[j]).sum(axis=1))
    labels = np.full(n, -1)
    for _ in range(max_iter):
        d = _l1_to_centers(x, centers)
        new = np.argmin(d, axis=1)
        best = d[np.arange(n), new]
        counts = np.bincount(new, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(best))
            if best[far] == 0:
                break
            new[far] = j
            best[far] = 0.0
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = x[members].mean(axis=0)
    return labels


@dataclass
class LocalPcaResult:
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    center: int
    t2: int
    n_neighbors: int
    residual: float = None

    def to_dict(self):
        return {"center": self.center, "t2": self.t2, "n_neighbors": self.n_neighbors,
                "eigenvalues": self.eigenvalues.tolist(),
                "eigenvectors": self.eigenvectors.tolist(), "residual": self.residual}


def _fix_signs(vectors):
    for v in vectors:
        if v[np.argmax(np.abs(v))] < 0:
            v *= -1.0
    return vectors


def local_pca(points, center_index, t2, m=2, alphas=None):
    """Top-m principal directions of the points within distance t2 of one point.

    Coordinates are used as given (the 0/1 bits in binary-spin mode). Eigenvectors are
    returned as rows, each with its largest-magnitude component positive.

    Args:
        points (DiscretePointSet): the dataset
        center_index (int): index of the center point
        t2 (int): neighborhood radius, inclusive
        m (int): number of directions
        alphas (np.ndarray, optional): ground-truth directions; fills ``residual``

    Returns:
        LocalPcaResult
    """
    if not 0 <= center_index < points.n_points:
        raise ArgumentError("center index out of range")
    if m < 1:
        raise ArgumentError("m must be >= 1")
    kernel = _DistanceKernel(points)
    dist = kernel.block(center_index, center_index + 1)[0]
    members = np.flatnonzero(dist <= t2)
    if members.size < m + 1:
        raise I3DError(f"only {members.size} points within {t2} of the center; need {m + 1}")
    x = points.coords[members].astype(float)
    x -= x.mean(axis=0)
    cov = x.T @ x / members.size
    if m < cov.shape[0] - 1:
        vals, vecs = eigsh(cov, k=m, which="LA", v0=np.ones(cov.shape[0]))
    else:
        vals, vecs = np.linalg.eigh(cov)
        vals, vecs = vals[-m:], vecs[:, -m:]
    order = np.argsort(vals)[::-1]
    vecs = _fix_signs(np.ascontiguousarray(vecs[:, order].T))
    res = LocalPcaResult(vecs, vals[order], int(center_index), int(t2), int(members.size))
    if alphas is not None:
        res.residual = pca_residual(alphas, vecs)
    return res


def pca_residual(alphas, eigvecs):
    """R = d - sum_ij (alpha_i . v_j)^2, zero when the spans coincide.

    Examples:
        >>> pca_residual(np.eye(3)[:2], np.eye(3)[:2])
        0.0
    """
    alphas = np.atleast_2d(np.asarray(alphas, dtype=float))
    eigvecs = np.atleast_2d(np.asarray(eigvecs, dtype=float))
    if alphas.shape != eigvecs.shape:
        raise ArgumentError(f"shape mismatch {alphas.shape} vs {eigvecs.shape}")
    d = alphas.shape[0]
    return float(min(max(d - np.sum((alphas @ eigvecs.T) ** 2), 0.0), d))


@dataclass
class ClusterScan:
    """Per-cluster scans and their population-weighted combination."""

    t2: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    weight: np.ndarray
    scans: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    def to_records(self):
        return [{"t2": int(t), "mean_d": _num(m), "std_d": _num(s), "weight": float(w)}
                for t, m, s, w in zip(self.t2, self.mean, self.std, self.weight)]

    def to_table(self):
        lines = [f"{'t2':>5} {'mean_d':>10} {'std_d':>10} {'weight':>8}"]
        for t, m, s, w in zip(self.t2, self.mean, self.std, self.weight):
            lines.append(f"{t:5d} {m:10.5f} {s:10.5f} {w:8.4f}")
        return "\n".join(lines) + "\n"


def _num(x):
    return None if not np.isfinite(x) else float(x)


def per_cluster_scan(points, labels, t2_list, r=0.5, method="mle", workers=1):
    """ID scan inside every cluster and their population-weighted mean and std per t2.

    Clusters where a scan cannot run (too few points, no valid row) are recorded in
    ``skipped``. At each t2 only clusters with an estimate contribute; ``weight`` is the
    fraction of all points they hold.
    """
    labels = np.asarray(labels)
    if labels.shape != (points.n_points,):
        raise ArgumentError("one label per point required")
    t2_list = sorted(int(t) for t in t2_list)
    scans, skipped = {}, {}
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        if members.size < 2:
            skipped[int(lab)] = "fewer than two points"
            continue
        try:
            scans[int(lab)] = (members.size, scan(points.subset(members), t2_list, r, method,
                                                  workers=workers))
        except I3DError as exc:
            skipped[int(lab)] = str(exc)
    t2 = np.array(t2_list)
    mean = np.full(t2.size, np.nan)
    std = np.full(t2.size, np.nan)
    weight = np.zeros(t2.size)
    for i, t in enumerate(t2_list):
        ds, ws = [], []
        for size, res in scans.values():
            for row in res.rows:
                if row.t2 == t and row.ok:
                    ds.append(row.estimate.d)
                    ws.append(size)
        if ds:
            ds, ws = np.array(ds), np.array(ws, dtype=float)
            mean[i] = np.average(ds, weights=ws)
            std[i] = np.sqrt(np.average((ds - mean[i]) ** 2, weights=ws))
            weight[i] = ws.sum() / points.n_points
    return ClusterScan(t2, mean, std, weight, {k: v[1] for k, v in scans.items()}, skipped)


__all__ = [
    "ALPHABET", "BINARY_CODE", "ClusterScan", "FilterReport", "LocalPcaResult", "SequenceSet",
    "cluster", "decode_binary", "dedup", "default_k", "encode", "filter_isolated",
    "local_pca", "parse_fasta", "pca_residual", "per_cluster_scan", "read_fasta",
    "spins_to_fasta",
]
