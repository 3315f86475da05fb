"""Sector and petal geometry, branch-consistent powers of x^m, calibration.

Component convention: the component with index l of S_{-1}, U and D is the
one whose shadow variable x^m points along exp(2 pi i l / d).  Mirror
(backward) petals use S_1, whose component l is bisected by
exp(i (2 l - 1) pi / d).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .errors import CalibrationFailed, OutsidePetalBranch, PreconditionViolated, ZeroCoordinate
from .germ import Germ, evaluate, evaluate_inverse, monomial
from .lattice import LatticeData
from . import sampling

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class SectorSpec:
    epsilon: float
    theta: float = math.pi / 4

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.theta < math.pi / 2:
            raise ValueError("theta must lie in (0, pi/2)")


@dataclass
class FittedConstants:
    """Empirical stand-ins for the existential constants of the theory.

    A value of ``None`` means the constant has not been fitted yet.
    """

    eta: Optional[float] = None
    rho: Optional[float] = None
    K: Optional[float] = None
    K_prime: Optional[float] = None
    c: Optional[float] = None
    C_big: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not v >= 0:
                raise ValueError(f"fitted constant {f.name} must be non-negative")

    def is_set(self, name: str) -> bool:
        return getattr(self, name) is not None

    def to_dict(self) -> dict:
        return {f.name: {"value": getattr(self, f.name), "fitted": self.is_set(f.name)} for f in fields(self)}


@dataclass
class PetalSpec:
    sector: SectorSpec
    gamma: float
    delta: float
    delta_prime: float
    r: float
    constants: FittedConstants = field(default_factory=FittedConstants)

    def __post_init__(self):
        if not (self.gamma > 0 and self.delta > 0 and self.delta_prime > 0 and self.r > 0):
            raise ValueError("gamma, delta, delta_prime and r must be positive")
        if self.delta_prime > self.delta:
            raise ValueError("delta_prime must not exceed delta")

    @property
    def epsilon(self) -> float:
        return self.sector.epsilon

    @property
    def theta(self) -> float:
        return self.sector.theta

    def check_germ(self, g: Germ, lat: LatticeData):
        bad = [i for i in range(g.n) if not g.a[i].real + self.gamma / lat.d < 0]
        if bad:
            raise PreconditionViolated(f"Re(a_i) + gamma/d >= 0 for i in {bad}")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.sector.epsilon,
            "theta": self.sector.theta,
            "gamma": self.gamma,
            "delta": self.delta,
            "delta_prime": self.delta_prime,
            "r": self.r,
            "constants": self.constants.to_dict(),
        }


# ------------------------------------------------------------ sectors


def _in_C_arr(z, eps, theta):
    z = np.asarray(z, dtype=complex)
    return (z != 0) & (np.abs(z) < eps) & (np.abs(np.angle(z)) < theta)


def _in_C_tilde_arr(z, eps, theta):
    z = np.asarray(z, dtype=complex)
    up = np.abs(z - 0.5 * eps * np.exp(1j * theta)) < 0.5 * eps
    dn = np.abs(z - 0.5 * eps * np.exp(-1j * theta)) < 0.5 * eps
    return _in_C_arr(z, eps, theta) | up | dn


def in_C(z, s: SectorSpec) -> bool:
    return bool(_in_C_arr(z, s.epsilon, s.theta))


def in_C_tilde(z, s: SectorSpec) -> bool:
    return bool(_in_C_tilde_arr(z, s.epsilon, s.theta))


def _root_index(z, a, p):
    """Index of the p-th root direction of -a z^p > 0 nearest to z."""
    k = np.rint((p * np.angle(z) + np.angle(-a)) / TWO_PI).astype(np.int64)
    return np.mod(k, p)


def _in_S(z, a, p, s, tilde):
    if p < 1:
        raise ValueError("p must be >= 1")
    if a == 0:
        raise ValueError("a must be non-zero")
    w = -a * complex(z) ** p
    test = _in_C_tilde_arr if tilde else _in_C_arr
    if not test(w, s.epsilon, s.theta):
        return None
    return int(_root_index(complex(z), a, p))


def in_S(z, a, p: int, s: SectorSpec) -> Optional[int]:
    """Component index of z in S_a(eps, theta) = {-a z^p in C}, or None."""
    return _in_S(z, complex(a), p, s, False)


def in_S_tilde(z, a, p: int, s: SectorSpec) -> Optional[int]:
    return _in_S(z, complex(a), p, s, True)


# ------------------------------------------------------------ branches


def _wrap(phi):
    """Reduce angles to (-pi, pi]."""
    out = np.mod(phi + np.pi, TWO_PI) - np.pi
    return np.where(out == -np.pi, np.pi, out)


def branch_log_xm_arr(x, ell: int, lat: LatticeData) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    xm = monomial(x, lat.m)
    if np.any(xm == 0):
        raise OutsidePetalBranch("x^m = 0 has no logarithm")
    center = TWO_PI * ell / lat.d
    off = _wrap(np.angle(xm) - center)
    half = math.pi / lat.d
    if lat.d > 1 and np.any((off <= -half) | (off > half)):
        raise OutsidePetalBranch(f"arg(x^m) outside the window of component {ell}")
    return np.log(np.abs(xm)) + 1j * (center + off)


def branch_log_xm(x, ell: int, lat: LatticeData):
    """log(x^m) with argument in (2 pi l/d - pi/d, 2 pi l/d + pi/d]."""
    out = branch_log_xm_arr(x, ell, lat)
    return complex(out) if out.ndim == 0 else out


def sector_power(x, lam, ell: int, lat: LatticeData):
    """(x^m)^lam = exp(lam log(x^m)) on the branch of component ``ell``."""
    out = np.exp(complex(lam) * branch_log_xm_arr(x, ell, lat))
    return complex(out) if out.ndim == 0 else out


def forward_component(xm, d: int):
    """Component of S_{-1} (p = d) nearest to the shadow value x^m."""
    return np.mod(np.rint(d * np.angle(xm) / TWO_PI).astype(np.int64), d)


def backward_component(xm, d: int):
    """Component of S_1 (p = d) nearest to the shadow value x^m."""
    return _root_index(xm, 1.0, d)


# ------------------------------------------------------------ petals


def in_U_arr(x, g: Germ, spec: PetalSpec, lat: LatticeData) -> np.ndarray:
    """Component index per point, -1 for non-members."""
    x = np.asarray(x, dtype=complex)
    s = monomial(x, g.M_vec)
    xm = monomial(x, lat.m)
    ok = _in_C_arr(s, spec.epsilon, spec.theta)
    with np.errstate(divide="ignore"):
        bound = np.abs(xm) ** spec.gamma
    ok &= np.all(np.abs(x) < bound[..., None], axis=-1)
    return np.where(ok, forward_component(xm, lat.d), -1)


def in_U(x, g: Germ, spec: PetalSpec, lat: LatticeData) -> Optional[int]:
    k = int(in_U_arr(x, g, spec, lat))
    return None if k < 0 else k


def in_D_arr(x, g, spec, lat, tilde=False, ell=None, backward=False) -> np.ndarray:
    """Boolean membership in D (or D~), forward or mirror, optionally per component."""
    x = np.asarray(x, dtype=complex)
    s = monomial(x, g.M_vec)
    if backward:
        s = -s
    test = _in_C_tilde_arr if tilde else _in_C_arr
    radius = spec.delta_prime if tilde else spec.delta
    ok = test(s, spec.epsilon, spec.theta) & np.all(np.abs(x) < radius, axis=-1)
    if ell is not None:
        xm = monomial(x, lat.m)
        comp = backward_component(xm, lat.d) if backward else forward_component(xm, lat.d)
        ok &= comp == ell
    return ok


def in_D(x, g: Germ, spec: PetalSpec, lat: LatticeData, tilde: bool = False, ell=None, backward: bool = False) -> bool:
    return bool(in_D_arr(x, g, spec, lat, tilde, ell, backward))


def w_power(w, Nrow) -> complex:
    """prod_{j>=2} w_j^{N_ij}, where Nrow is a full row of N (first entry skipped)."""
    w = np.asarray(w, dtype=complex)
    e = np.asarray(Nrow, dtype=np.int64)[1:]
    return monomial(w, e)


def in_V(z, w, g: Germ, spec: PetalSpec, lat: LatticeData) -> bool:
    z = complex(z)
    w = np.asarray(w, dtype=complex)
    if not (abs(z) > 1.0 / spec.epsilon and abs(np.angle(z)) < spec.theta):
        return False
    N = lat.N_array()
    for i in range(g.n):
        e = -spec.gamma / lat.d - g.a[i].real
        if not abs(w_power(w, N[i])) < spec.r * abs(z) ** e:
            return False
    return True


def slice_radius(w, g: Germ, spec: PetalSpec, lat: LatticeData) -> float:
    """R_w: V restricted to fixed w is {|z| > R_w, |arg z| < theta}."""
    N = lat.N_array()
    R = 1.0 / spec.epsilon
    for i in range(g.n):
        e = -spec.gamma / lat.d - g.a[i].real
        try:
            wp = abs(w_power(w, N[i]))
        except ZeroCoordinate:
            return math.inf
        with np.errstate(over="ignore"):
            R = max(R, (wp / spec.r) ** (1.0 / e))
    return float(R)


# ------------------------------------------------------------ samplers


def sample_U(g, lat, spec, size, seed, ell=None, decades=3.0, gamma=None, eps=None, theta=None):
    """Quasi-random points of U (cycling through components unless ``ell`` given)."""
    gamma = spec.gamma if gamma is None else gamma
    eps = spec.epsilon if eps is None else eps
    theta = spec.theta if theta is None else theta
    d = lat.d
    ells = [ell] if ell is not None else list(range(d))
    nu_hi = eps ** (1.0 / d) * (1 - 1e-12)
    nu_lo = nu_hi * 10.0 ** (-decades / d)
    out = []
    for k, l in enumerate(ells):
        cnt = size // len(ells) + (1 if k < size % len(ells) else 0)
        if cnt == 0:
            continue
        upper = lambda lognu, phase: np.repeat((gamma * lognu)[:, None], g.n, axis=1)
        out.append(
            sampling.petal_cloud(
                (nu_lo, nu_hi), TWO_PI * l / d, theta / d * (1 - 1e-9), lat.m, upper, cnt, seed + 7919 * k
            )
        )
    return np.concatenate(out, axis=0)


def sample_D(g, lat, eps, theta, delta, size, seed, tilde=False, backward=False, decades=4.0):
    """Quasi-random points of D (or D~) of radius ``delta``, all components."""
    n = g.n
    M = g.M_vec
    half = theta + math.pi / 2 if tilde else theta
    base = math.pi if backward else 0.0
    collected, tries = [], 0
    have = 0
    while have < size:
        cnt = 2 * (size - have) + 16
        u = sampling.unit_net(cnt, 2 * n + 1, seed + 104729 * tries)
        r = delta * 10.0 ** (-decades * u[:, :n])
        args = TWO_PI * u[:, n : 2 * n]
        phi = base + half * (2 * u[:, 2 * n] - 1)
        rest = args[:, 1:] @ M[1:] if n > 1 else 0.0
        k = np.floor(u[:, n] * M[0])  # reuse of a uniform column for the branch choice
        args[:, 0] = (phi - rest + TWO_PI * k) / M[0]
        x = r * np.exp(1j * args)
        s = monomial(x, M)
        test = _in_C_tilde_arr if tilde else _in_C_arr
        keep = test(-s if backward else s, eps, theta)
        collected.append(x[keep])
        have += int(keep.sum())
        tries += 1
        if tries > 50:
            raise CalibrationFailed("could not populate D with the requested sample size")
    return np.concatenate(collected, axis=0)[:size]


def sample_V(g, lat, spec, size, seed, ell=0, decades=3.0, r=None):
    """Quasi-random chart points (z, w) of V together with the model preimages x.

    w is produced as the model first integrals of x, so that (z, w) lies in V
    by construction.
    """
    from .invariants import g_I

    r = spec.r if r is None else r
    d = lat.d
    mabs = sum(lat.m)
    need = 1.0 - spec.gamma * mabs
    R0 = max(1.0 / spec.epsilon, 2.0 * r ** (-mabs * d / need)) * (1 + 1e-9)
    u = sampling.unit_net(size, 2, seed)
    absz = R0 * 10.0 ** (decades * u[:, 0])
    argz = spec.theta * (1 - 1e-9) * (2 * u[:, 1] - 1)
    z = absz * np.exp(1j * argz)
    lognu = -np.log(absz) / d
    phase = -argz / d + TWO_PI * ell / d
    im_a = g.a_vec.imag
    upper = np.log(r) + spec.gamma * lognu[:, None] - im_a[None, :] * (argz[:, None] - TWO_PI * ell)
    n = g.n
    k_pos = int(np.count_nonzero(np.asarray(lat.m) > 0))
    uu = sampling.unit_net(size, 1 + k_pos + (n - k_pos) + (n - 1), seed + 1)
    x = sampling.points_with_monomial(
        lognu,
        phase,
        lat.m,
        upper,
        uu[:, 1 : 1 + k_pos],
        uu[:, 1 + k_pos : 1 + n],
        uu[:, 1 + n :],
        uu[:, 0],
    )
    # pin x^M = 1/z exactly in the returned z
    z = 1.0 / monomial(x, g.M_vec)
    Mm = lat.M_array()
    w = np.stack([g_I(x, Mm[j], ell, g, lat) for j in range(1, n)], axis=-1) if n > 1 else np.zeros((size, 0), complex)
    return z, w, x


# ------------------------------------------------------------ calibration


@dataclass
class CalibrationConfig:
    theta: float = math.pi / 4
    eps_start: float = 0.5
    eps_floor: float = 1e-10
    samples: int = 10_000
    seed: int = 0
    decades: float = 3.0
    delta_start: float = 0.5
    transit_steps: int = 2000
    leau_fatou_steps: int = 200
    # explicit overrides (skip the corresponding search)
    epsilon: Optional[float] = None
    gamma: Optional[float] = None
    delta: Optional[float] = None
    delta_prime: Optional[float] = None
    r: Optional[float] = None

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


def _require_theorem_A(g: Germ):
    if abs(g.aM() + 1) > 1e-12:
        raise PreconditionViolated("germ is not normalized (<a, M> != -1)")
    if any(ai.real >= 0 for ai in g.a):
        raise PreconditionViolated("calibration needs Re(a_i) < 0 for every i")


def _decay_rates(g, lat, gamma, X):
    """Per point: min_i (1 - ratio_after / ratio_before) / |x^M| and in-U of f(X)."""
    FX = evaluate(g, X)
    s = np.abs(monomial(X, g.M_vec))
    rb = np.abs(X) / (np.abs(monomial(X, lat.m)) ** gamma)[:, None]
    ra = np.abs(FX) / (np.abs(monomial(FX, lat.m)) ** gamma)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = (1 - ra / rb) / s[:, None]
    rate = np.where(np.abs(X) == 0, np.inf, rate)
    return rate.min(axis=1), FX


def _check_U(g, lat, spec_try, X):
    ell0 = in_U_arr(X, g, spec_try, lat)
    rate, FX = _decay_rates(g, lat, spec_try.gamma, X)
    ell1 = in_U_arr(FX, g, spec_try, lat)
    bad = np.flatnonzero((ell1 != ell0) | ~(rate > 0))
    return bad, rate


def _fit_delta(g, lat, eps, theta, delta0, floor, size, seed, backward):
    """Largest delta = delta0 / 2^k with D-invariance and decay |f_i| < |x_i|(1 - rho|x^M|)."""
    step = (lambda X: evaluate_inverse(g, X)) if backward else (lambda X: evaluate(g, X))
    delta = delta0
    while delta > floor:
        X = sample_D(g, lat, eps, theta, delta, size, seed, backward=backward)
        spec_try = PetalSpec(SectorSpec(eps, theta), 1.0, delta, delta, 1.0)
        try:
            FX = step(X)
        except Exception:
            delta /= 2
            continue
        xm = monomial(X, lat.m)
        same = in_D_arr(FX, g, spec_try, lat, backward=backward) & (
            (backward_component(xm, lat.d) if backward else forward_component(xm, lat.d))
            == (
                backward_component(monomial(FX, lat.m), lat.d)
                if backward
                else forward_component(monomial(FX, lat.m), lat.d)
            )
        )
        s = np.abs(monomial(X, g.M_vec))
        with np.errstate(invalid="ignore", divide="ignore"):
            rate = (1 - np.abs(FX) / np.abs(X)) / s[:, None]
        rate = np.where(np.abs(X) == 0, np.inf, rate).min(axis=1)
        if np.all(same) and np.all(rate > 0):
            return delta, 0.5 * float(rate.min())
        delta /= 2
    raise CalibrationFailed("delta underflowed its floor")


def _fit_delta_prime(g, lat, eps, theta, delta, size, seed, steps, backward):
    """delta' = delta / K with transit from D~(delta') into D never leaving the delta-polydisc."""
    step = (lambda X: evaluate_inverse(g, X)) if backward else (lambda X: evaluate(g, X))
    cap = (0.5 * eps) ** (1.0 / sum(g.M))
    K = 2.0
    while K < 1e8:
        dp = min(delta / K, cap)
        spec_try = PetalSpec(SectorSpec(eps, theta), 1.0, delta, dp, 1.0)
        X = sample_D(g, lat, eps, theta, dp, min(size, 2000), seed, tilde=True, backward=backward)
        active = np.ones(len(X), bool)
        ok = True
        for _ in range(steps):
            if not active.any():
                break
            Y = X[active]
            if np.any(np.abs(Y) >= delta):
                ok = False
                break
            captured = in_D_arr(Y, g, spec_try, lat, backward=backward)
            idx = np.flatnonzero(active)
            active[idx[captured]] = False
            if not active.any():
                break
            X[active] = step(X[active])
        if ok:
            return dp
        K *= 2
    raise CalibrationFailed("no admissible delta'")


def _fit_leau_fatou_c(g, lat, X, steps):
    s0 = monomial(X, g.M_vec)
    a0 = np.abs(s0)
    best = 1.0
    Y = X.copy()
    for j in range(1, steps + 1):
        Y = evaluate(g, Y)
        sj = np.abs(monomial(Y, g.M_vec))
        best = max(best, float(np.max(sj * (1 + j * a0) / a0)))
    return 1.1 * best


def _fit_r(g, lat, spec, size, seed):
    r = 1.0 if spec.r is None else spec.r
    while r > 1e-12:
        ok = True
        for ell in range(lat.d):
            try:
                z, w, x = sample_V(g, lat, spec, min(size, 2000), seed + ell, ell=ell, r=r)
            except ValueError:
                ok = False
                break
            nu = np.abs(monomial(x, lat.m))
            margin = np.all(np.abs(x) < 0.5 * (nu ** spec.gamma)[:, None], axis=1)
            if not (np.all(in_U_arr(x, g, spec, lat) == ell) and np.all(margin)):
                ok = False
                break
        if ok:
            return r
        r /= 2
    raise CalibrationFailed("r underflowed")


def _fit_K(g, lat, spec, X):
    """2 max |log(g_I(f x)/g_I(x))| / |x^M|^(1 + gamma/d) over the basis rows I."""
    if g.n == 1:
        return 0.0
    from .invariants import step_log_ratio

    s = np.abs(monomial(X, g.M_vec))
    Mm = lat.M_array()
    worst = 0.0
    for j in range(1, g.n):
        lam = step_log_ratio(X, Mm[j], g, lat)
        worst = max(worst, float(np.max(np.abs(lam) / s ** (1 + spec.gamma / lat.d))))
    return 2.0 * worst


def calibrate_petal(g: Germ, lat: LatticeData, search_config: Optional[CalibrationConfig] = None) -> PetalSpec:
    """Fit petal parameters for which the invariance and decay estimates hold on a sample.

    The witness of the last failed attempt is attached to CalibrationFailed.
    """
    cfg = search_config or CalibrationConfig()
    _require_theorem_A(g)
    d = lat.d
    gamma = cfg.gamma if cfg.gamma is not None else 0.5 * d * min(-ai.real for ai in g.a)
    theta = cfg.theta
    if any(ai.real + gamma / d >= 0 for ai in g.a):
        raise PreconditionViolated("gamma override violates Re(a_i) + gamma/d < 0")

    eps = cfg.epsilon if cfg.epsilon is not None else cfg.eps_start
    witness = None
    while True:
        if eps < cfg.eps_floor:
            raise CalibrationFailed("epsilon underflowed its floor", witness)
        if g.has_higher_order and eps ** (gamma / d) > g.radius:
            eps /= 2
            continue
        trial = PetalSpec(SectorSpec(eps, theta), gamma, 1.0, 1.0, 1.0)
        X = sample_U(g, lat, trial, cfg.samples, cfg.seed, decades=cfg.decades)
        bad, rate = _check_U(g, lat, trial, X)
        if len(bad) == 0:
            eta = 0.5 * float(rate.min())
            Xf = sample_U(g, lat, trial, cfg.samples, cfg.seed + 1, decades=cfg.decades)
            bad_f, rate_f = _check_U(g, lat, trial, Xf)
            if len(bad_f) == 0 and np.all(rate_f >= eta):
                break
            witness = Xf[bad_f[0]] if len(bad_f) else Xf[int(np.argmin(rate_f))]
        else:
            witness = X[bad[0]]
        if cfg.epsilon is not None:
            raise CalibrationFailed("the requested epsilon fails the invariance check", witness)
        eps /= 2

    delta0 = cfg.delta_start if cfg.delta is None else cfg.delta
    if g.has_higher_order:
        delta0 = min(delta0, g.radius)
    delta, rho = _fit_delta(g, lat, eps, theta, delta0, cfg.eps_floor, cfg.samples, cfg.seed + 2, False)
    if cfg.delta is not None and delta != cfg.delta:
        raise CalibrationFailed("the requested delta fails the D-invariance check")
    dp = cfg.delta_prime
    if dp is None:
        dp = _fit_delta_prime(g, lat, eps, theta, delta, cfg.samples, cfg.seed + 3, cfg.transit_steps, False)
    consts = FittedConstants(eta=eta, rho=rho)
    spec = PetalSpec(SectorSpec(eps, theta), gamma, delta, dp, 1.0, consts)
    spec.r = cfg.r if cfg.r is not None else _fit_r(g, lat, spec, cfg.samples, cfg.seed + 4)
    consts.c = _fit_leau_fatou_c(g, lat, X[: min(len(X), 2000)], cfg.leau_fatou_steps)
    consts.K = _fit_K(g, lat, spec, X)
    return spec


def calibrate_backward(g: Germ, lat: LatticeData, forward: PetalSpec, search_config: Optional[CalibrationConfig] = None) -> PetalSpec:
    """Mirror petal parameters: D^- = {-x^M in C, |x_i| < delta} under f^{-1}."""
    cfg = search_config or CalibrationConfig()
    eps, theta = forward.epsilon, forward.theta
    delta0 = forward.delta if cfg.delta is None else cfg.delta
    delta, rho = _fit_delta(g, lat, eps, theta, delta0, cfg.eps_floor, min(cfg.samples, 4000), cfg.seed + 12, True)
    dp = _fit_delta_prime(g, lat, eps, theta, delta, cfg.samples, cfg.seed + 13, cfg.transit_steps, True)
    return PetalSpec(SectorSpec(eps, theta), forward.gamma, delta, dp, forward.r, FittedConstants(rho=rho))
