"""Approximate Fatou chart Phi_l, the conjugated map f~ and the Fatou coordinate beta.

Chart: Phi_l(x) = (1/x^M, psi_2(x), ..., psi_n(x)).  Its model part
phi = (1/x^M, g_2, ..., g_n) has the closed-form inverse
x_i = exp(a_i L) prod_{j>=2} w_j^{N_ij} with L = Log z - 2 pi i l.

beta on a slice {w fixed} is the limit of f~^j(z) - f~^j(p).  Orbits are
run in x-space and the limit is taken through the asymptotic Fatou
coordinate of the model shadow map, which is exact up to the higher-order
terms of the germ; those are controlled through the fitted derivative
constant K' of h~ = f~ - z - 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domains import PetalSpec, in_V, sample_V, slice_radius, w_power
from .errors import BranchError, EmptySlice, NoConvergence, NotReached, OutsideV
from .germ import Germ, evaluate, monomial
from .invariants import _shadow, g_I, psi_basis_batch, psi_I_batch
from .lattice import LatticeData

EPS64 = np.finfo(float).eps
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ChartPoint:
    z: complex
    w: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "z", complex(self.z))
        object.__setattr__(self, "w", tuple(complex(v) for v in self.w))
        if not np.isfinite(self.z) or not all(np.isfinite(v) for v in self.w):
            raise ValueError("chart coordinates must be finite")

    @property
    def w_array(self) -> np.ndarray:
        return np.array(self.w, dtype=complex)


@dataclass
class FatouChart:
    """One slice {w fixed} of the chart together with its base point p.

    ``ftilde_fn`` replaces the germ-induced map by an explicit one-variable
    map (used for synthetic checks).
    """

    ell: int
    w: tuple
    base_point_z: complex
    j_max: int = 1_000_000
    tol: float = 1e-10
    beta_error: float = 0.0
    R_w: float = 0.0
    ftilde_fn: Optional[Callable] = None
    _base_x: Optional[np.ndarray] = field(default=None, repr=False)


# ------------------------------------------------------------ chart maps


def phi_forward(x, ell: int, g: Germ, lat: LatticeData, spec: PetalSpec, tol: float = 1e-10) -> ChartPoint:
    """Phi_l(x); each w entry is accurate to tol * max(1, |w|)."""
    x = np.asarray(x, dtype=complex)
    z, W, _ = phi_forward_batch(x[None, :], ell, g, lat, spec, tol)
    return ChartPoint(z[0], tuple(W[0]))


def phi_forward_batch(X, ell, g, lat, spec, tol=1e-10):
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    z = 1.0 / monomial(X, g.M_vec)
    if g.n == 1:
        return z, np.zeros((len(X), 0), dtype=complex), np.zeros((len(X), 0))
    W, B = psi_basis_batch(X, ell, g, lat, spec, tol, relative=True)
    return z, W, B


def model_inverse_batch(z, W, g: Germ, lat: LatticeData, ell: int) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    W = np.asarray(W, dtype=complex).reshape(len(z), g.n - 1)
    if np.any(z == 0) or np.any((z.real < 0) & (z.imag == 0)):
        raise BranchError("z must avoid the closed negative real axis")
    L = np.log(z) - 2j * math.pi * ell
    N = lat.N_array()
    X = np.exp(np.outer(L, g.a_vec))
    for i in range(g.n):
        X[:, i] *= w_power(W, N[i])
    return X


def model_inverse(zw: ChartPoint, g: Germ, lat: LatticeData, ell: int) -> np.ndarray:
    """Exact inverse of phi = (1/x^M, g_2, ..., g_n) on the branch of ``ell``."""
    return model_inverse_batch([zw.z], zw.w_array[None, :], g, lat, ell)[0]


def model_forward_batch(X, g, lat, ell):
    """phi(x) = (1/x^M, g_{M_2}(x), ..., g_{M_n}(x))."""
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    Mm = lat.M_array()
    z = 1.0 / monomial(X, g.M_vec)
    W = np.stack([g_I(X, Mm[j], ell, g, lat) for j in range(1, g.n)], axis=-1) if g.n > 1 else np.zeros((len(X), 0), complex)
    return z, W


def phi_inverse_batch(z, W, g, lat, spec, ell, tol=1e-10, max_iter=100, seed_W=None):
    """Solve Phi_l(x) = (z, w) by the fixed-point iteration w' <- w / u(model_inverse(z, w')).

    The z-coordinate is matched exactly by construction; the loop stops
    when every |psi_j(x) - w_j| is below tol * max(1, |w_j|).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    W = np.asarray(W, dtype=complex).reshape(len(z), g.n - 1)
    if g.n == 1:
        return model_inverse_batch(z, W, g, lat, ell)
    Mm = lat.M_array()
    Wp = W.copy() if seed_W is None else np.asarray(seed_W, dtype=complex).reshape(W.shape).copy()
    scale = np.maximum(1.0, np.abs(W))
    inner = max(1e-2 * tol, 256 * EPS64) * np.min(scale, axis=1)
    res = np.inf
    for _ in range(max_iter):
        X = model_inverse_batch(z, Wp, g, lat, ell)
        U = np.empty_like(W)
        for k in range(1, g.n):
            _, U[:, k - 1], _, _ = psi_I_batch(X, Mm[k], ell, g, lat, spec, inner)
        res = float(np.max(np.abs(Wp * U - W) / scale))
        if res <= max(tol, 512 * EPS64):
            return X
        Wp = W / U
    raise NoConvergence(f"chart inversion residual {res:.3e}", residual=res)


def phi_inverse(zw: ChartPoint, g, lat, spec, ell, tol=1e-10, seed_w=None) -> np.ndarray:
    if not in_V(zw.z, zw.w_array, g, spec, lat):
        raise OutsideV("(z, w) is not in V")
    sw = None if seed_w is None else np.asarray(seed_w, dtype=complex)[None, :]
    return phi_inverse_batch([zw.z], zw.w_array[None, :], g, lat, spec, ell, tol, seed_W=sw)[0]


def ftilde_batch(z, W, g, lat, spec, ell, tol=1e-10):
    X = phi_inverse_batch(z, W, g, lat, spec, ell, tol)
    return 1.0 / monomial(evaluate(g, X), g.M_vec)


def ftilde(zw: ChartPoint, g, lat, spec, ell, tol=1e-10) -> complex:
    """f~(z, w) = 1 / f(Phi^{-1}(z, w))^M = z + 1 + h~(z, w)."""
    if not in_V(zw.z, zw.w_array, g, spec, lat):
        raise OutsideV("(z, w) is not in V")
    return complex(ftilde_batch([zw.z], zw.w_array[None, :], g, lat, spec, ell, tol)[0])


def model_ftilde(z, g: Germ):
    """Shadow map z -> z / prod (1 + a_i/z)^{M_i} of the leading part."""
    z = np.asarray(z, dtype=complex)
    E = np.ones_like(z)
    for ai, Mi in zip(g.a, g.M):
        E = E * (1 + ai / z) ** Mi
    return z / E


# ------------------------------------------------------------ derivative fit


@dataclass(frozen=True)
class DerivativeFit:
    K_prime: float
    exponent: float
    K_prime_half_step: float
    K_prime_higher: float


def htilde_derivative_check(g, lat, spec, ell=0, sample=None, size=200, seed=0, step_rho=1e-3, ftilde_fn=None, tol=1e-12):
    """Fit K' in |d h~/dz| <= K' |z|^{-1-gamma/d} by central radial differences.

    ``sample`` is an optional pair (z, W) of chart points; by default a
    quasi-random sample of V is drawn.  The fit is repeated with half the
    step to expose instability.  ``K_prime_higher`` is the same fit for the
    part of h~ not produced by the leading-order shadow map (zero when the
    germ has no higher-order terms).  Stores K' in ``spec.constants``.
    """
    if sample is None:
        z, W, _ = sample_V(g, lat, spec, size, seed, ell=ell)
        z = z * (1 + 4 * step_rho)  # keep the difference stencil inside V
    else:
        z, W = sample
        z = np.asarray(z, dtype=complex)
        W = np.asarray(W, dtype=complex).reshape(len(z), -1)
    tau = spec.gamma / lat.d

    def F(zz):
        if ftilde_fn is not None:
            return np.asarray(ftilde_fn(zz), dtype=complex)
        return ftilde_batch(zz, W, g, lat, spec, ell, tol)

    def deriv(rho):
        h = rho * z  # radial step: arg z is preserved
        return (F(z + h) - F(z - h)) / (2 * h) - 1.0

    D1 = deriv(step_rho)
    D2 = deriv(step_rho / 2)
    scale = np.abs(z) ** (1 + tau)
    K1 = float(np.max(np.abs(D1) * scale))
    K2 = float(np.max(np.abs(D2) * scale))
    mag = np.abs(D2)
    keep = mag > 1e-14
    if keep.sum() >= 2 and np.ptp(np.log(np.abs(z[keep]))) > 1e-6:
        exponent = float(np.polyfit(np.log(np.abs(z[keep])), np.log(mag[keep]), 1)[0])
    else:
        exponent = -math.inf if keep.sum() == 0 else math.nan
    if ftilde_fn is None and g.has_higher_order:
        hmod = lambda zz: model_ftilde(zz, g)
        Dm = (hmod(z * (1 + step_rho)) - hmod(z * (1 - step_rho))) / (2 * step_rho * z) - 1.0
        Kh = float(np.max(np.abs(D1 - Dm) * scale))
    else:
        Kh = 0.0
    spec.constants.K_prime = K2
    return DerivativeFit(K2, exponent, K1, Kh)


# ------------------------------------------------------------ beta


def chart_base_point(w, g: Germ, lat: LatticeData, spec: PetalSpec, ell: int = 0) -> complex:
    """p = 2 R_w / cos(theta) on the positive real axis."""
    R = slice_radius(np.asarray(w, dtype=complex), g, spec, lat)
    if not np.isfinite(R):
        raise EmptySlice("V_w is empty for this w")
    return complex(2.0 * R / math.cos(spec.theta))


def make_chart(w, ell, g, lat, spec, tol=1e-10, j_max=1_000_000, ftilde_fn=None, base_point=None) -> FatouChart:
    w = tuple(complex(v) for v in np.asarray(w, dtype=complex).ravel())
    R = slice_radius(np.array(w, dtype=complex), g, spec, lat)
    if not np.isfinite(R):
        raise EmptySlice("V_w is empty for this w")
    p = chart_base_point(w, g, lat, spec, ell) if base_point is None else complex(base_point)
    return FatouChart(ell, w, p, j_max, tol, 0.0, R, ftilde_fn)


def in_slice(z, chart: FatouChart, spec: PetalSpec):
    z = np.asarray(z, dtype=complex)
    return (np.abs(z) > chart.R_w) & (np.abs(np.angle(z)) < spec.theta)


def _beta_generic(z, chart, tau):
    F = chart.ftilde_fn
    zj = np.asarray(z, dtype=complex).copy()
    pj = np.full_like(zj, chart.base_point_z)
    beta = zj - pj
    err = np.full(zj.shape, np.inf)
    for j in range(1, chart.j_max + 1):
        zj, pj = F(zj), F(pj)
        nb = zj - pj
        delta = np.abs(nb - beta)
        beta = nb
        err = delta * (1.0 + j / tau)
        if np.all(err <= chart.tol):
            return beta, err
    raise NoConvergence("beta iteration did not settle", residual=float(err.max()))


def fatou_beta_batch(z, chart: FatouChart, g, lat, spec, min_iter=4, order=16):
    """beta_w at the points z of the slice; returns (beta, error bound).

    Iteration stops once the truncation error is below max(tol, rounding
    floor); the returned bound includes the floor, so it can exceed ``tol``
    for very large |z|.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    tau = spec.gamma / lat.d
    if chart.ftilde_fn is not None:
        beta, err = _beta_generic(z, chart, tau)
        chart.beta_error = max(chart.beta_error, float(err.max()))
        return beta, err
    S = _shadow(tuple(g.a), tuple(g.M), order)
    W = np.repeat(np.array(chart.w, dtype=complex)[None, :], len(z), axis=0)
    inv_tol = min(chart.tol, 1e-10) * 1e-2
    X = phi_inverse_batch(z, W, g, lat, spec, chart.ell, inv_tol)
    if chart._base_x is None:
        chart._base_x = phi_inverse_batch([chart.base_point_z], W[:1], g, lat, spec, chart.ell, inv_tol)[0]
    P = np.repeat(chart._base_x[None, :], len(z), axis=0)
    if g.has_higher_order:
        Kh = spec.constants.K_prime
        if Kh is None:
            raise NoConvergence("K' must be fitted before evaluating beta for a germ with higher-order terms")
    else:
        Kh = 0.0
    done = np.zeros(len(z), bool)
    beta = np.zeros(len(z), dtype=complex)
    err = np.full(len(z), np.inf)
    j = 0
    while True:
        if j >= min_iter:
            act = np.flatnonzero(~done)
            zj = 1.0 / monomial(X[act], g.M_vec)
            pj = 1.0 / monomial(P[act], g.M_vec)
            b = S.fatou(zj) - S.fatou(pj)
            mz = np.minimum(np.abs(zj), np.abs(pj))
            e = S.fatou_residual_bound(np.abs(zj)) + S.fatou_residual_bound(np.abs(pj))
            if Kh:
                e = e + Kh * np.abs(zj - pj) * (mz ** (-1 - tau) + 2 * mz ** (-tau) / tau)
            floor = (j + 10) * 8 * EPS64 * np.maximum(np.abs(zj), np.abs(pj))
            # below the rounding floor more steps cannot help; the floor is reported
            fin = (mz >= 10.0) & (e <= np.maximum(chart.tol, floor))
            e = e + floor
            beta[act] = b
            err[act] = e
            done[act[fin]] = True
            if done.all():
                break
        if j >= chart.j_max:
            raise NoConvergence(f"beta error {err[~done].max():.3e} above tol", residual=float(err[~done].max()))
        act = ~done
        X[act] = evaluate(g, X[act])
        P[act] = evaluate(g, P[act])
        j += 1
    chart.beta_error = max(chart.beta_error, float(err.max()))
    return beta, err


def fatou_beta(z, chart: FatouChart, g, lat, spec) -> complex:
    """Fatou coordinate beta_w(z) with beta(f~(z)) = beta(z) + 1."""
    z = complex(z)
    if chart.ftilde_fn is None and not in_slice(z, chart, spec):
        raise OutsideV("z is not in V_w")
    b, _ = fatou_beta_batch([z], chart, g, lat, spec)
    return complex(b[0])


def slice_ftilde(z, chart: FatouChart, g, lat, spec):
    """f~_w on the chart slice (explicit map when the chart carries one)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if chart.ftilde_fn is not None:
        return np.asarray(chart.ftilde_fn(z), dtype=complex)
    W = np.repeat(np.array(chart.w, dtype=complex)[None, :], len(z), axis=0)
    return ftilde_batch(z, W, g, lat, spec, chart.ell, min(chart.tol, 1e-10) * 1e-2)


def check_union_translates(chart: FatouChart, targets, g, lat, spec, tol=1e-8, j_limit=100_000, newton_iter=60):
    """For each target zeta find j >= 0 and z in V_w with beta(z) = zeta + j.

    Newton iteration seeded at zeta + j + p, restricted to a disc of
    radius (sin theta / 2)|seed| around the seed; j is increased until the
    solution lies in V_w.  Returns a list of per-target dicts; raises
    NotReached when some target has no witness.
    """
    rows = []
    missing = []
    rad_frac = 0.5 * math.sin(spec.theta)
    for zeta in targets:
        zeta = complex(zeta)
        found = None
        p = chart.base_point_z
        j = 0
        # skip translates whose seed is certainly outside V_w
        while j <= j_limit and not in_slice(zeta + j + p, chart, spec):
            j += 1
        while j <= j_limit and found is None:
            seed = zeta + j + p
            zc = seed
            ok = False
            for _ in range(newton_iter):
                b = complex(fatou_beta_batch([zc], chart, g, lat, spec)[0][0]) - (zeta + j)
                if abs(b) <= tol:
                    ok = True
                    break
                h = 1e-6 * abs(zc)
                bp = complex(fatou_beta_batch([zc + h], chart, g, lat, spec)[0][0])
                bm = complex(fatou_beta_batch([zc - h], chart, g, lat, spec)[0][0])
                zc = zc - b / ((bp - bm) / (2 * h))
                if abs(zc - seed) > rad_frac * abs(seed) or not in_slice(zc, chart, spec):
                    break
            if ok and in_slice(zc, chart, spec):
                found = (j, zc, abs(b))
            else:
                j += 1
        if found is None:
            missing.append(zeta)
            rows.append({"target": zeta, "reached": False})
        else:
            rows.append({"target": zeta, "reached": True, "j": found[0], "z": found[1], "residual": found[2]})
    if missing:
        raise NotReached(f"no witness for targets {missing}")
    return rows
