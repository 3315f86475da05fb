"""Seeded low-discrepancy point clouds on petals, chart domains and polydiscs.

Every sampler draws from a scrambled Halton net so that a (seed, size) pair
always yields the same cloud.  Points are built in multiplicative
coordinates: a modulus/argument for the shadow monomial, free moduli and
arguments for the remaining coordinates, and the first coordinate solved
from the monomial constraint.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from .errors import EmptySample

TWO_PI = 2.0 * np.pi


def unit_net(n: int, dim: int, seed: int) -> np.ndarray:
    """``n`` scrambled Halton points in [0, 1)^dim."""
    if n < 1:
        raise EmptySample("sample size must be positive")
    if dim == 0:
        return np.zeros((n, 0))
    eng = qmc.Halton(d=dim, scramble=True, seed=np.random.default_rng(seed))
    u = eng.random(n)
    return np.clip(u, 1e-15, 1 - 1e-15)


def _dirichlet(u: np.ndarray) -> np.ndarray:
    """Map uniforms (N, k) to points of the open (k)-simplex (Dirichlet(1))."""
    e = -np.log(u)
    return e / e.sum(axis=1, keepdims=True)


def points_with_monomial(lognu, phase, m, upper, u_split, u_free, u_args, u_branch):
    """Points x with x^m = exp(lognu + i phase) and log|x_i| < upper_i.

    ``upper`` has shape (N, n).  For coordinates with m_i > 0 the slack
    log(nu) - sum m_i upper_i < 0 is split by a Dirichlet draw (``u_split``,
    one column per positive m_i); coordinates with m_i = 0 take
    log|x_i| = upper_i + log(u_free).  Arguments of coordinates 2..n are
    uniform; the argument of coordinate 1 is solved, with branch index drawn
    from ``u_branch``.  Requires m_1 > 0.
    """
    m = np.asarray(m, dtype=np.int64)
    N, n = upper.shape
    pos = np.flatnonzero(m > 0)
    zero = np.flatnonzero(m == 0)
    slack = lognu - upper[:, pos] @ m[pos]
    if np.any(slack >= 0):
        raise ValueError("monomial modulus incompatible with the coordinate bounds")
    v = _dirichlet(u_split)
    logabs = np.empty((N, n))
    logabs[:, pos] = upper[:, pos] + slack[:, None] * v / m[pos]
    if len(zero):
        logabs[:, zero] = upper[:, zero] + np.log(u_free)
    args = np.zeros((N, n))
    if n > 1:
        args[:, 1:] = TWO_PI * u_args
    rest = args[:, 1:] @ m[1:] if n > 1 else 0.0
    k = np.floor(u_branch * m[0])
    args[:, 0] = (phase - rest + TWO_PI * k) / m[0]
    return np.exp(logabs + 1j * args)


def petal_cloud(nu_range, phase_center, phase_halfwidth, m, upper_fn, size, seed):
    """Generic petal sampler; ``upper_fn(lognu, phase)`` gives log-moduli bounds (N, n)."""
    m = np.asarray(m, dtype=np.int64)
    n = len(m)
    k_pos = int(np.count_nonzero(m > 0))
    k_zero = n - k_pos
    dim = 3 + k_pos + k_zero + (n - 1)
    u = unit_net(size, dim, seed)
    lo, hi = np.log(nu_range[0]), np.log(nu_range[1])
    lognu = lo + (hi - lo) * u[:, 0]
    phase = phase_center + phase_halfwidth * (2 * u[:, 1] - 1)
    col = 3
    u_split = u[:, col : col + k_pos]
    col += k_pos
    u_free = u[:, col : col + k_zero]
    col += k_zero
    u_args = u[:, col : col + n - 1]
    upper = upper_fn(lognu, phase)
    return points_with_monomial(lognu, phase, m, upper, u_split, u_free, u_args, u[:, 2])


def polydisc_cloud(n: int, radius: float, size: int, seed: int, band: float = 0.0) -> np.ndarray:
    """Uniform (by volume) points in the polydisc |x_i| < radius (1 - band)."""
    u = unit_net(size, 2 * n, seed)
    rad = radius * (1.0 - band) * np.sqrt(u[:, :n])
    return rad * np.exp(1j * TWO_PI * u[:, n:])


def sector_cloud(eps: float, theta: float, size: int, seed: int, decades: float = 4.0, tilde: bool = False):
    """Points of C(eps, theta), log-uniform in modulus over ``decades``.

    With ``tilde`` the angular range extends to theta + pi/2 and points are
    kept only if they fall in the enlarged set C~ (rejection).
    """
    u = unit_net(size, 2, seed)
    r = eps * 10.0 ** (-decades * u[:, 0])
    half = theta + np.pi / 2 if tilde else theta
    phi = half * (2 * u[:, 1] - 1)
    z = r * np.exp(1j * phi)
    if tilde:
        from .domains import _in_C_tilde_arr

        z = z[_in_C_tilde_arr(z, eps, theta)]
    return z
