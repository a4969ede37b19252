"""Lattice-point counts of L1 balls (cross-polytopes) and their analytic continuation in d.

The number of points of Z^d within L1 distance t of the origin is a polynomial in d of
degree t. Its continuation to real d is what makes the likelihood differentiable in the
dimension.
"""
import math

import numpy as np
from scipy.special import gammaln as _lgamma

from i3d.errors import ArgumentError, DomainError

D_MIN = 0.01
D_MAX = 1000.0


def volume_int(t, d):
    """Exact count of lattice points of Z^d within L1 distance t.

    Uses the enumerating function sum_k C(d, k) C(t - k + d, d) with Python integers,
    so no overflow is possible.

    Args:
        t (int): radius in lattice steps, t >= 0
        d (int): dimension, d >= 1

    Returns:
        int: number of lattice points
    """
    if isinstance(t, bool) or int(t) != t or t < 0:
        raise ArgumentError(f"radius must be a nonnegative integer, got {t!r}")
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise ArgumentError(f"dimension must be a positive integer, got {d!r}")
    t, d = int(t), int(d)
    return sum(math.comb(d, k) * math.comb(t - k + d, d) for k in range(min(d, t) + 1))


def _check_real_args(t, d):
    if isinstance(t, bool) or int(t) != t or t < 0:
        raise ArgumentError(f"radius must be a nonnegative integer, got {t!r}")
    if not d > 0 or not math.isfinite(d):
        raise DomainError(f"dimension must be positive and finite, got {d!r}")
    return int(t), float(d)


def log_volume(t, d):
    """Natural log of the continued volume C(d+t, t) 2F1(-d, -t; -d-t; -1).

    The hypergeometric series terminates after t + 1 terms. Terms are accumulated as
    (log-magnitude, sign) pairs and summed relative to the largest one, which keeps large
    radii and dimensions finite.
    """
    t, d = _check_real_args(t, d)
    log_binom = math.lgamma(d + t + 1.0) - math.lgamma(d + 1.0) - math.lgamma(t + 1.0)
    logs = [0.0]
    signs = [1.0]
    log_mag, sign = 0.0, 1.0
    for j in range(t):
        # term_{j+1} / term_j = -(j - d)(j - t) / ((j - d - t)(j + 1))
        a = j - d
        if a == 0.0:
            break
        num = -a * (j - t)
        den = (j - d - t) * (j + 1)
        ratio = num / den
        sign *= math.copysign(1.0, ratio)
        log_mag += math.log(abs(ratio))
        logs.append(log_mag)
        signs.append(sign)
    logs = np.asarray(logs)
    top = logs.max()
    total = math.fsum(s * math.exp(lm - top) for s, lm in zip(signs, logs))
    if total <= 0.0:
        raise DomainError(f"continued volume is not positive at t={t}, d={d}")
    return log_binom + top + math.log(total)


def volume_real(t, d):
    """Continued lattice volume V(t, d) for real d > 0.

    Agrees with :func:`volume_int` at integer d.

    Examples:
        >>> round(volume_real(2, 1.5), 12)
        8.5
    """
    return math.exp(log_volume(t, d))


def _check_pair(t1, t2):
    for t in (t1, t2):
        if isinstance(t, bool) or int(t) != t or t < 0:
            raise ArgumentError(f"radii must be nonnegative integers, got {t!r}")
    if t1 > t2:
        raise ArgumentError(f"inner radius t1={t1} exceeds outer radius t2={t2}")


def volume_ratio(t1, t2, d):
    """Ratio V(t1, d) / V(t2, d), the binomial success probability of the inner ball."""
    _check_pair(t1, t2)
    if t1 == t2:
        _check_real_args(t1, d)
        return 1.0
    return math.exp(log_volume(t1, d) - log_volume(t2, d))


def volume_ratio_ddim(t1, t2, d):
    """Derivative of :func:`volume_ratio` with respect to d.

    Central finite difference with step 1e-5 * max(1, d). The step never crosses d = 0
    because it is capped at half of d.
    """
    _check_pair(t1, t2)
    _check_real_args(t2, d)
    h = 1e-5 * max(1.0, d)
    h = min(h, 0.5 * d)
    return (volume_ratio(t1, t2, d + h) - volume_ratio(t1, t2, d - h)) / (2.0 * h)


def log_volume_array(t, d):
    """Vectorized :func:`log_volume` over an array of dimensions."""
    t = int(t)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("dimensions must be positive")
    log_binom = _lgamma(d + t + 1.0) - _lgamma(d + 1.0) - math.lgamma(t + 1.0)
    logs = np.zeros((t + 1,) + d.shape)
    signs = np.zeros((t + 1,) + d.shape)
    signs[0] = 1.0
    log_mag = np.zeros(d.shape)
    sign = np.ones(d.shape)
    alive = np.ones(d.shape, dtype=bool)
    for j in range(t):
        a = j - d
        alive &= a != 0.0
        ratio = np.where(alive, -a * (j - t) / ((j - d - t) * (j + 1)), 1.0)
        sign = sign * np.sign(ratio)
        log_mag = log_mag + np.log(np.abs(ratio))
        logs[j + 1] = log_mag
        signs[j + 1] = np.where(alive, sign, 0.0)
    top = np.max(np.where(signs != 0.0, logs, -np.inf), axis=0)
    total = np.sum(signs * np.exp(logs - top), axis=0)
    return log_binom + top + np.log(total)


def volume_ratio_array(t1, t2, d):
    """Vectorized :func:`volume_ratio`."""
    _check_pair(t1, t2)
    d = np.asarray(d, dtype=float)
    if t1 == t2:
        return np.ones(d.shape)
    return np.exp(log_volume_array(t1, d) - log_volume_array(t2, d))


def volume_ratio_ddim_array(t1, t2, d):
    """Vectorized :func:`volume_ratio_ddim`, same step rule."""
    d = np.asarray(d, dtype=float)
    h = np.minimum(1e-5 * np.maximum(1.0, d), 0.5 * d)
    return (volume_ratio_array(t1, t2, d + h) - volume_ratio_array(t1, t2, d - h)) / (2.0 * h)
