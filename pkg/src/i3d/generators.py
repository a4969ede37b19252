"""Seeded generators for the benchmark datasets.

All generators take a seed (or a numpy Generator) and are deterministic given it.
"""
import math
from dataclasses import asdict, dataclass

import numpy as np

from i3d.census import DiscretePointSet
from i3d.errors import ArgumentError, GenerationError

MAX_FRACTAL_POINTS = 20_000_000


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_uniform_lattice(d, side, n_points, periodic=True, seed=None):
    """i.i.d. uniform points on {0, ..., side-1}^d; duplicates are allowed."""
    if d < 1 or side < 2 or n_points < 2:
        raise ArgumentError("need d >= 1, side >= 2, n_points >= 2")
    coords = _rng(seed).integers(0, side, size=(n_points, d))
    if periodic:
        return DiscretePointSet(coords, "l1-periodic", side)
    return DiscretePointSet(coords, "l1")


def gaussian_covariance(d, sigma, offdiag=None, seed=None, max_tries=100):
    """Covariance with ``sigma**2`` on the diagonal and optional symmetric random off-diagonals.

    ``sigma`` is the per-axis standard deviation. ``offdiag`` is None or "uniform", the
    latter drawing each off-diagonal covariance entry once from U(0, 2). Draws that are not
    positive definite are repeated.
    """
    rng = _rng(seed)
    cov = np.eye(d) * float(sigma) ** 2
    if offdiag in (None, "none"):
        return cov
    if offdiag != "uniform":
        raise ArgumentError(f"unknown off-diagonal mode {offdiag!r}")
    iu = np.triu_indices(d, 1)
    for _ in range(max_tries):
        trial = cov.copy()
        trial[iu] = rng.uniform(0.0, 2.0, size=len(iu[0]))
        trial[(iu[1], iu[0])] = trial[iu]
        if np.linalg.eigvalsh(trial).min() > 0.0:
            return trial
    raise GenerationError("no positive-definite covariance after repeated draws")


def gen_gaussian_lattice(d, sigma, offdiag=None, n_points=2500, seed=None):
    """Multivariate normal points rounded to the nearest integer in each coordinate.

    ``sigma`` is the per-axis standard deviation. The effective spread used to normalize
    scales is sqrt(d) * sigma, see :func:`sigma_eff`.

    Returns:
        tuple(DiscretePointSet, np.ndarray): points and the covariance used
    """
    if d < 1 or not sigma > 0:
        raise ArgumentError("need d >= 1 and sigma > 0")
    rng = _rng(seed)
    cov = gaussian_covariance(d, sigma, offdiag, rng)
    x = rng.multivariate_normal(np.zeros(d), cov, size=n_points, method="cholesky")
    return DiscretePointSet(np.rint(x).astype(np.int64), "l1"), cov


def sigma_eff(d, sigma):
    return math.sqrt(d) * sigma


@dataclass
class SpinEnsembleSpec:
    intrinsic_dim: int
    D: int
    N: int
    phi0: float = -0.5
    eps_variance: float = 10.0
    seed: int = None
    binary: bool = False

    def __post_init__(self):
        if not 1 <= self.intrinsic_dim < self.D:
            raise ArgumentError("need 1 <= intrinsic_dim < D")
        if self.N < 2:
            raise ArgumentError("need at least two states")
        if not self.eps_variance > 0:
            raise ArgumentError("eps_variance must be positive")

    def to_dict(self):
        return asdict(self)


def orthonormal_uniform_vectors(m, D, rng):
    """m vectors in R^D with uniform U(-1, 1) components, Gram-Schmidt orthonormalized.

    Two passes of modified Gram-Schmidt keep the rows orthonormal to machine precision.
    """
    raw = rng.uniform(-1.0, 1.0, size=(m, D))
    out = np.empty_like(raw)
    for j in range(m):
        v = raw[j].copy()
        for _ in range(2):
            for i in range(j):
                v -= (out[i] @ v) * out[i]
        out[j] = v / np.linalg.norm(v)
    return out


def spin_sign(phi):
    """sign(phi) as +-1 integers with sign(0) = +1."""
    return np.where(np.asarray(phi) >= 0.0, 1, -1).astype(np.int64)


def gen_spin(spec):
    """Spin states z = sign(phi0 + sum_j alpha_j eps_j) from a low-dimensional linear embedding.

    eps_j(i) ~ N(0, eps_variance), sign(0) = +1. Spins
    are +-1, or 0/1 when ``spec.binary`` is set; the metric is Hamming.

    Returns:
        tuple(DiscretePointSet, np.ndarray): the states and the generating vectors (rows)
    """
    rng = _rng(spec.seed)
    alphas = orthonormal_uniform_vectors(spec.intrinsic_dim, spec.D, rng)
    eps = rng.normal(0.0, math.sqrt(spec.eps_variance), size=(spec.N, spec.intrinsic_dim))
    phi = spec.phi0 + eps @ alphas
    spins = spin_sign(phi)
    if spec.binary:
        spins = (spins + 1) // 2
    return DiscretePointSet(spins, "hamming"), alphas


def gen_sierpinski(level, cell=0):
    """Sierpinski gasket from the odd entries of Pascal's triangle on a 2^level grid.

    Point (i, j), 0 <= j <= i < 2^level, is included when C(i, j) is odd, which by Lucas'
    theorem means j & (i - j) == 0. Level 1 is the three-point motif.

    With ``cell`` = m > 0 every odd entry becomes a filled lower triangle of side 2^m, so
    the set is 2-dimensional below that side and fractal above it.

    Examples:
        >>> gen_sierpinski(1).coords.tolist()
        [[0, 0], [1, 0], [1, 1]]
    """
    if level < 1 or cell < 0:
        raise ArgumentError("need level >= 1 and cell >= 0")
    side = 2**cell
    if 3**level * side * (side + 1) // 2 > MAX_FRACTAL_POINTS:
        raise GenerationError(f"level {level} with cell {cell} exceeds the point budget")
    i, j = np.tril_indices(2 ** (level + cell))
    big_i, big_j = i >> cell, j >> cell
    keep = ((big_j & (big_i - big_j)) == 0) & ((j & (side - 1)) <= (i & (side - 1)))
    return DiscretePointSet(np.column_stack([i[keep], j[keep]]), "l1")


_KOCH_OFFSETS = (0, 1, -1, 0)
# unit steps along the six lattice directions, in coordinates (2x, 2y / sqrt(3))
_HEX_STEPS = np.array([(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)], dtype=np.int64)


def gen_koch(level):
    """Vertices of the Koch curve after ``level`` substitutions, on an integer grid.

    The curve is traced with unit segments at multiples of 60 degrees. Coordinates are
    (2x, 2y / sqrt(3)), which are integers, and every unit segment has L1 length 2.
    """
    if level < 1:
        raise ArgumentError("level must be >= 1")
    if 4**level + 1 > MAX_FRACTAL_POINTS:
        raise GenerationError(f"level {level} exceeds the point budget")
    directions = np.zeros(1, dtype=np.int64)
    for _ in range(level):
        directions = (directions[:, None] + np.array(_KOCH_OFFSETS)[None, :]).ravel()
    steps = _HEX_STEPS[directions % 6]
    coords = np.vstack([np.zeros((1, 2), dtype=np.int64), np.cumsum(steps, axis=0)])
    return DiscretePointSet(coords, "l1")
