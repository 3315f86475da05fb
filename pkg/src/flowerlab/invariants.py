"""Invariant functions psi_I = g_I u_I as convergent orbit products.

The correction u_I(x) = prod_j g_I(f^{j+1} x) / g_I(f^j x) is accumulated in
log form.  Each factor is exp(Lambda(x_j)) with

    Lambda(x) = sum_i c_i log(1 + x^M (a_i + A_i(x))),   c = I + lambda_I m,

and sum_i c_i a_i = 0, so Lambda = O(|x^M|^2) plus the higher-order part.
After J explicit steps the tail is evaluated from the asymptotic series G
of the model shadow map (``series.ShadowSeries.tail_series``); the
higher-order part of the tail is bounded using the decay of
|x_i| / |x^m|^gamma along orbits and the Leau-Fatou constant c.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .domains import PetalSpec, in_U_arr, sector_power
from .errors import EmptySample, NoConvergence, OutsidePetal
from .germ import Germ, evaluate, monomial
from .lattice import LatticeData, lambda_of
from .series import ShadowSeries, residual_tail

EPS64 = np.finfo(float).eps


@dataclass(frozen=True)
class InvariantEval:
    value: complex
    u_value: complex
    terms_used: int
    tail_bound: float
    I: tuple
    ell: int

    def __post_init__(self):
        if not np.isfinite(self.tail_bound) or self.tail_bound < 0:
            raise ValueError("tail_bound must be finite and non-negative")


def g_I(x, I, ell: int, g: Germ, lat: LatticeData):
    """Model first integral x^I (x^m)^{lambda_I} on the branch of component ``ell``."""
    I = np.asarray(I, dtype=np.int64)
    lam = lambda_of(I, g.a_vec, lat.d)
    return monomial(x, I) * sector_power(x, lam, ell, lat)


def _weights(I, g, lat):
    I = np.asarray(I, dtype=np.int64)
    lam = lambda_of(I, g.a_vec, lat.d)
    return I + lam * np.asarray(lat.m, dtype=float)


def step_log_ratio(X, I, g: Germ, lat: LatticeData):
    """log(g_I(f x) / g_I(x)) computed without branch ambiguity."""
    c = _weights(I, g, lat)
    X = np.asarray(X, dtype=complex)
    s = monomial(X, g.M_vec)[..., None]
    coef = g.a_vec + g.higher(X) if g.has_higher_order else g.a_vec
    return np.log1p(s * coef) @ c


@lru_cache(maxsize=64)
def _shadow(a: tuple, M: tuple, order: int) -> ShadowSeries:
    return ShadowSeries(a, M, order)


@lru_cache(maxsize=256)
def _tail_coefficients(a: tuple, M: tuple, order: int, c: tuple):
    return _shadow(a, M, order).tail_series(np.array(c))


def _higher_order_data(g: Germ):
    """(C_i, q): coefficient sums |A_i| and the minimal degree of A."""
    if not g.has_higher_order:
        return np.zeros(g.n), 0
    C = np.array([P.abs_bound(1.0) for P in g.A])
    q = min(P.min_degree for P in g.A if len(P))
    return C, q


def psi_I_batch(
    X,
    I,
    ell: int,
    g: Germ,
    lat: LatticeData,
    spec: PetalSpec,
    tol: float = 1e-10,
    accelerate: bool = True,
    max_iter: int = 1_000_000,
    min_iter: int = 32,
    order: int = 16,
):
    """Vectorized psi_I over the rows of X.

    Returns (value, u, terms_used, tail_bound) arrays.  ``tail_bound`` is an
    absolute bound on |psi_I - value|; ``tol`` may be given per point.
    """
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    I = np.asarray(I, dtype=np.int64)
    N = len(X)
    if N == 0:
        raise EmptySample("no points given")
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (N,))
    if np.any(in_U_arr(X, g, spec, lat) != ell):
        raise OutsidePetal(f"some points are not in U_{ell}")
    c = _weights(I, g, lat)
    g0 = g_I(X, I, ell, g, lat)
    # rounding in x^I (x^m)^lambda itself
    lam = lambda_of(I, g.a_vec, lat.d)
    logxm = np.abs(np.log(np.abs(monomial(X, lat.m))))
    g_round = EPS64 * np.abs(g0) * (np.sum(np.abs(I)) + abs(lam) * (1 + logxm) + 2)
    if np.all(np.abs(c) < 1e-14):
        one = np.ones(N, dtype=complex)
        return g0, one, np.zeros(N, dtype=np.int64), g_round

    d = lat.d
    gd = spec.gamma / d
    cLF = spec.constants.c if spec.constants.c is not None else 2.0
    Ci, q = _higher_order_data(g)
    sigma = q * gd
    Msum_C = float(np.dot(g.M_vec, Ci))
    absc = np.abs(c)
    B0 = 2.0 * float(np.dot(absc, Ci))
    if accelerate:
        gcoef, resid = _tail_coefficients(tuple(g.a), tuple(g.M), order, tuple(c))
        res_abs = abs(resid)
        g1 = abs(gcoef[1]) if order >= 1 else 0.0
    K_model = float(np.dot(absc, np.abs(g.a_vec) ** 2))

    Y = X.copy()
    S = np.zeros(N, dtype=complex)
    done = np.zeros(N, dtype=bool)
    terms = np.zeros(N, dtype=np.int64)
    bound = np.full(N, np.inf)
    tail = np.zeros(N, dtype=complex)
    j = 0
    while True:
        act = ~done
        if j >= min_iter:
            Ya = Y[act]
            s = monomial(Ya, g.M_vec)
            abs_s = np.abs(s)
            z = 1.0 / s
            if q:
                rho = np.max(np.abs(Ya), axis=1) / abs_s ** gd
            if accelerate:
                t = ShadowSeries.eval_tail(gcoef, z)
                err = residual_tail(res_abs, order + 2, np.abs(z))
                if q:
                    B = B0 + 8.0 * g1 * abs_s * Msum_C
                    err = err + B * cLF ** (1 + sigma) * rho ** q * (abs_s ** (1 + sigma) + abs_s ** sigma / sigma)
                ok_z = np.abs(z) >= 10.0
            else:
                t = np.zeros_like(s)
                K = K_model + (B0 * rho ** q if q else 0.0)
                err = K * cLF ** (1 + gd) * (abs_s ** (1 + gd) + abs_s ** gd / gd)
                ok_z = np.ones(len(s), dtype=bool)
            err = err + (j + 10) * 4 * EPS64
            mag = np.abs(g0[act] * np.exp(S[act] + t))
            absb = mag * err * 1.01 + g_round[act]
            fin = ok_z & (absb <= tol[act])
            idx = np.flatnonzero(act)
            bound[idx] = absb
            tail[idx] = t
            terms[idx] = j
            done[idx[fin]] = True
            if done.all():
                break
        if j >= max_iter:
            worst = float(np.max(bound[~done]))
            raise NoConvergence(f"psi tail bound {worst:.3e} above tol after {j} steps", residual=worst)
        act = ~done
        Ya = Y[act]
        S[act] += step_log_ratio(Ya, I, g, lat)
        Y[act] = evaluate(g, Ya)
        j += 1
    u = np.exp(S + tail)
    return g0 * u, u, terms, bound


def psi_I(x, I, ell: int, g: Germ, lat: LatticeData, spec: PetalSpec, tol: float = 1e-10, **kw) -> InvariantEval:
    """f-invariant function psi_I at a single point of U_ell."""
    x = np.asarray(x, dtype=complex)
    if in_U_arr(x, g, spec, lat) != ell:
        raise OutsidePetal(f"x is not in U_{ell}")
    v, u, t, b = psi_I_batch(x[None, :], I, ell, g, lat, spec, tol, **kw)
    return InvariantEval(complex(v[0]), complex(u[0]), int(t[0]), float(b[0]), tuple(int(i) for i in I), ell)


def psi_basis_batch(X, ell, g, lat, spec, tol=1e-10, relative=False, **kw):
    """(values, bounds) of psi_{M_2}, ..., psi_{M_n}, each of shape (N, n-1).

    With ``relative`` the target for entry k is tol * max(1, |g_k(x)|).
    """
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    Mm = lat.M_array()
    vals = np.zeros((len(X), g.n - 1), dtype=complex)
    bnds = np.zeros((len(X), g.n - 1))
    for k in range(1, g.n):
        t = tol * np.maximum(1.0, np.abs(g_I(X, Mm[k], ell, g, lat))) if relative else tol
        v, _, _, b = psi_I_batch(X, Mm[k], ell, g, lat, spec, t, **kw)
        vals[:, k - 1] = v
        bnds[:, k - 1] = b
    return vals, bnds


def psi_basis(x, ell: int, g: Germ, lat: LatticeData, spec: PetalSpec, tol: float = 1e-10) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if g.n == 1:
        return np.zeros(0, dtype=complex)
    vals, _ = psi_basis_batch(x[None, :], ell, g, lat, spec, tol)
    return vals[0]


def u_deviation_fit(g: Germ, lat: LatticeData, spec: PetalSpec, sample, I=None, ell: int = 0, tol: float = 1e-10) -> float:
    """Smallest kappa with |u_I(x) - 1| <= kappa |x^m|^gamma over ``sample``.

    Without ``I`` the maximum over the basis rows M_2, ..., M_n is taken.
    The result is stored in ``spec.constants.kappa``.
    """
    X = np.asarray(sample, dtype=complex)
    if X.size == 0:
        raise EmptySample("u_deviation_fit needs at least one point")
    X = np.atleast_2d(X)
    rows = [np.asarray(I, dtype=np.int64)] if I is not None else [lat.M_array()[k] for k in range(1, g.n)]
    scale = np.abs(monomial(X, lat.m)) ** spec.gamma
    kappa = 0.0
    for row in rows:
        _, u, _, _ = psi_I_batch(X, row, ell, g, lat, spec, tol)
        kappa = max(kappa, float(np.max(np.abs(u - 1) / scale)))
    spec.constants.kappa = kappa
    return kappa
