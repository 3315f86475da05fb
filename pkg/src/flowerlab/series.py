"""Truncated power series in t = 1/z for the shadow dynamics of x^M.

Without higher-order terms the monomial s = x^M evolves autonomously:
s -> s * E(s) with E(t) = prod_i (1 + a_i t)^{M_i}, i.e. z = 1/s moves by
z -> z / E(1/z) = z + 1 + O(1/z).  Two cohomological equations for this
map are solved order by order here:

* the asymptotic Fatou coordinate phi(z) = z + c_log log z + sum c_k z^-k,
  phi(F(z)) = phi(z) + 1;
* the tail sum G(z) = sum_k g_k z^-k with G(z) - G(F(z)) = Lambda(1/z),
  so that sum_{j>=J} Lambda(1/z_j) = G(z_J) along model orbits.

Both expansions are asymptotic; the first uncancelled residual
coefficient gives the truncation-error estimate.
"""
from __future__ import annotations

import numpy as np


def mul(p, q, order):
    return np.convolve(p, q)[: order + 1]


def log_series(E, order):
    """log E for a series with E[0] = 1."""
    E = np.asarray(E, dtype=complex)[: order + 1]
    E = np.concatenate([E, np.zeros(order + 1 - len(E), dtype=complex)])
    if E[0] != 1:
        raise ValueError("log_series needs E[0] == 1")
    L = np.zeros(order + 1, dtype=complex)
    for k in range(1, order + 1):
        acc = k * E[k]
        for j in range(1, k):
            acc -= j * L[j] * E[k - j]
        L[k] = acc / k
    return L


def exp_series(L, order):
    """exp L for a series with L[0] = 0."""
    L = np.asarray(L, dtype=complex)[: order + 1]
    L = np.concatenate([L, np.zeros(order + 1 - len(L), dtype=complex)])
    E = np.zeros(order + 1, dtype=complex)
    E[0] = 1
    for k in range(1, order + 1):
        E[k] = sum(j * L[j] * E[k - j] for j in range(1, k + 1)) / k
    return E


def log1p_linear(coef, order):
    """Series of log(1 + coef t)."""
    out = np.zeros(order + 1, dtype=complex)
    for k in range(1, order + 1):
        out[k] = (-1) ** (k + 1) * coef ** k / k
    return out


class ShadowSeries:
    """Asymptotic expansions attached to the model map z -> z / E(1/z).

    Parameters
    ----------
    a, M : leading coefficients and exponent of a normalized germ
        (<a, M> = -1).
    order : number of negative powers of z kept.
    """

    def __init__(self, a, M, order: int = 16):
        self.a = np.asarray(a, dtype=complex)
        self.M = np.asarray(M, dtype=np.int64)
        self.order = order
        K = order + 3  # working precision of the series arithmetic
        self._K = K
        logE = sum(Mi * log1p_linear(ai, K) for ai, Mi in zip(self.a, self.M))
        self.logE = logE
        self.E = exp_series(logE, K)
        if abs(self.E[1] + 1) > 1e-12:
            raise ValueError("shadow series requires a normalized germ (<a,M> = -1)")
        # E^k for k = 0..order+1
        self._Epow = [exp_series(k * logE, K) for k in range(order + 2)]
        self._solve_fatou()

    def _shift(self, p, k):
        """t^k * p(t), truncated."""
        out = np.zeros(self._K + 1, dtype=complex)
        out[k:] = p[: self._K + 1 - k]
        return out

    def _solve_fatou(self):
        K = self._K
        invE = exp_series(-self.logE, K)
        B = np.zeros(K + 1, dtype=complex)
        B[1:K] = invE[2 : K + 1]  # (1/E - 1)/t - 1
        self.c_log = -B[1]
        c = np.zeros(self.order + 1, dtype=complex)

        def residual():
            R = B - self.c_log * self.logE
            for k in range(1, self.order + 1):
                if c[k] != 0:
                    R = R + c[k] * self._shift(self._Epow[k] - np.eye(1, K + 1, 0)[0], k)
            return R

        for k in range(1, self.order + 1):
            c[k] = residual()[k + 1] / k
        self.c = c
        self.fatou_residual = residual()
        self._fatou_next = complex(self.fatou_residual[self.order + 2])

    def fatou(self, z):
        """phi(z) = z + c_log log z + sum_k c_k z^-k (principal log)."""
        z = np.asarray(z, dtype=complex)
        t = 1.0 / z
        out = z + self.c_log * np.log(z)
        out = out + np.polyval(self.c[::-1], t) - self.c[0]
        return out

    def fatou_residual_bound(self, zabs):
        """Bound on sum_{j>=0} |phi(F z_j) - phi(z_j) - 1| along an orbit from |z|."""
        return residual_tail(abs(self._fatou_next), self.order + 2, zabs)

    def tail_series(self, weights):
        """Coefficients g_k of G with G(z) - G(F z) = sum_i w_i log(1 + a_i / z).

        Also returns the first uncancelled residual coefficient.
        """
        K = self._K
        w = np.asarray(weights, dtype=complex)
        Lam = sum(wi * log1p_linear(ai, K) for wi, ai in zip(w, self.a))
        if abs(Lam[1]) > 1e-9 * max(1.0, float(np.abs(w).sum())):
            raise ValueError("weights must satisfy sum w_i a_i = 0")
        one = np.eye(1, K + 1, 0)[0]
        g = np.zeros(self.order + 1, dtype=complex)
        R = Lam.copy()
        R[1] = 0
        for k in range(1, self.order + 1):
            g[k] = R[k + 1] / k
            R = R - g[k] * self._shift(one - self._Epow[k], k)
        return g, complex(R[self.order + 2])

    @staticmethod
    def eval_tail(g, z):
        t = 1.0 / np.asarray(z, dtype=complex)
        return np.polyval(g[::-1], t) - g[0]


def residual_tail(coef_abs, q, zabs):
    """2|rho| * sum_{j>=0} (|z| + j/2)^{-q}, the bound used for both expansions.

    Uses |F(z)| > |z| + 1/2 along orbits.
    """
    zabs = np.asarray(zabs, dtype=float)
    return 2.0 * coef_abs * (zabs ** (-q) + 2.0 * zabs ** (1 - q) / (q - 1))
