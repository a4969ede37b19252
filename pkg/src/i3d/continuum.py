"""Closed forms for the binomial estimator when ball volumes scale as a pure power law.

In continuous space the inner/outer volume ratio is r**d, which turns the discrete
root-finding problem into explicit expressions. These are used as cross-checks of the
lattice machinery and to choose the radius ratio.
"""
import math

from i3d.errors import ArgumentError, DomainError, ScaleTooSmallError

# Bernoulli numbers B_2, B_4, ..., B_16
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)


def digamma(x):
    """psi_0(x) for x > 0 by upward recurrence followed by the asymptotic series."""
    if not x > 0:
        raise DomainError(f"digamma implemented for x > 0 only, got {x}")
    acc = 0.0
    while x < 12.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for k, b in enumerate(_BERNOULLI, 1):
        series += b / (2 * k) * power
        power *= inv2
    return acc + math.log(x) - 0.5 / x - series


def trigamma(x):
    """psi_1(x) for x > 0 by upward recurrence followed by the asymptotic series."""
    if not x > 0:
        raise DomainError(f"trigamma implemented for x > 0 only, got {x}")
    acc = 0.0
    while x < 12.0:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv * inv2
    for b in _BERNOULLI:
        series += b * power
        power *= inv2
    return acc + inv + 0.5 * inv2 + series


def lambert_w0(z, tol=1e-15, max_iter=100):
    """Principal branch of the Lambert W function for z in [-1/e, inf), by Halley iteration."""
    if z < -1.0 / math.e:
        raise DomainError(f"Lambert W has no real value at {z}")
    if z == 0.0:
        return 0.0
    w = math.log1p(z) if z > -0.25 else -1.0 + math.sqrt(2.0 * (1.0 + math.e * z))
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - z
        step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0))
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            break
    return w


def optimal_ratio_constant():
    """Fraction Sn/Sk that minimizes the continuum Cramer-Rao variance, about 0.2032.

    Setting the derivative of (1-x)/(x ln(x)**2) to zero gives ln x = 2(x - 1), whose
    nontrivial solution is x = -W0(-2 e**-2) / 2.
    """
    return -lambert_w0(-2.0 * math.exp(-2.0)) / 2.0


def optimal_ratio(d):
    """Radius ratio r = t1/t2 minimizing the continuum variance at dimension d."""
    if not d > 0:
        raise DomainError("dimension must be positive")
    return optimal_ratio_constant() ** (1.0 / d)


def _check_r(r):
    if not 0.0 < r < 1.0:
        raise ArgumentError(f"radius ratio must lie in (0, 1), got {r}")


def mle_continuum(sum_n, sum_k, r):
    """Explicit MLE d = ln(Sn/Sk) / ln(r)."""
    _check_r(r)
    if not 0 < sum_n <= sum_k:
        raise ArgumentError(f"need 0 < sum_n <= sum_k, got {sum_n}, {sum_k}")
    if sum_n == sum_k:
        raise ScaleTooSmallError("inner and outer counts coincide: estimate collapses to d = 0")
    return math.log(sum_n / sum_k) / math.log(r)


def cr_variance_continuum(d, r, n_points, mean_k):
    """Cramer-Rao lower bound on the variance of the continuum estimator."""
    _check_r(r)
    if not (d > 0 and n_points >= 1 and mean_k > 0):
        raise ArgumentError("need d > 0, n_points >= 1 and mean_k > 0")
    rd = r**d
    return (1.0 - rd) / (mean_k * n_points * math.log(r) ** 2 * rd)


def bayes_continuum_moments(sum_n, sum_k, r):
    """Posterior mean and variance of d under a uniform prior on r**d.

    Returns:
        tuple(float, float): mean and variance
    """
    _check_r(r)
    if sum_n < 0 or sum_k < sum_n:
        raise ArgumentError("need 0 <= sum_n <= sum_k")
    a = 1.0 + sum_n
    ab = 2.0 + sum_k
    lr = math.log(r)
    mean = (digamma(a) - digamma(ab)) / lr
    var = (trigamma(a) - trigamma(ab)) / lr**2
    return mean, var
