"""Empirical verification suites behind the CLI.

Each ``verify_*``/``run_*`` function takes an ExperimentConfig and returns a
RunResult whose report holds only deterministic quantities (no timings),
so that equal configs and seeds give byte-identical JSON.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .config import Budgets, ExperimentConfig, germ_to_dict
from .domains import (
    CalibrationConfig,
    PetalSpec,
    _decay_rates,
    _in_C_arr,
    _in_C_tilde_arr,
    _root_index,
    calibrate_backward,
    calibrate_petal,
    in_U_arr,
    in_V,
    sample_U,
    sample_V,
)
from .errors import FlowerLabError, PreconditionViolated
from .export import RunResult, Table
from .germ import Germ, canonical_order, evaluate, monomial, normalize
from .lattice import LatticeData, lattice_data
from .sampling import polydisc_cloud, sector_cloud

KINDS = ("FixedSet", "OmegaPlus", "OmegaMinus", "Escaped", "Undetermined")
_CODE_TO_KIND = {
    kernels.FIXED: "FixedSet",
    kernels.PLUS: "OmegaPlus",
    kernels.MINUS: "OmegaMinus",
    kernels.ESCAPED: "Escaped",
    kernels.UNDETERMINED: "Undetermined",
}


@dataclass(frozen=True)
class ClassificationLabel:
    kind: str
    ell: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown label kind {self.kind!r}")
        petal = self.kind in ("OmegaPlus", "OmegaMinus")
        if petal != (self.ell is not None):
            raise ValueError("ell is required exactly for petal labels")
        if petal and self.ell < 0:
            raise ValueError("ell must be non-negative")


# ------------------------------------------------------------ setup


def prepare_germ(cfg: ExperimentConfig):
    """(normalized germ in canonical order, lattice data, alpha)."""
    g, _ = canonical_order(cfg.build_germ())
    alpha = np.ones(g.n, dtype=complex)
    if abs(g.aM() + 1) > 1e-12:
        g, alpha = normalize(g)
    return g, lattice_data(g.M), alpha


def calibration_config(cfg: ExperimentConfig, seed: Optional[int] = None) -> CalibrationConfig:
    po = cfg.petal
    return CalibrationConfig(
        theta=po.theta,
        samples=cfg.samples.calibration,
        seed=cfg.seed if seed is None else seed,
        epsilon=po.epsilon,
        gamma=po.gamma,
        delta=po.delta,
        delta_prime=po.delta_prime,
        r=po.r,
    )


def calibrate(cfg: ExperimentConfig):
    """(g, lat, forward spec, backward spec) for a Theorem-A germ."""
    g, lat, _ = prepare_germ(cfg)
    cc = calibration_config(cfg)
    fwd = calibrate_petal(g, lat, cc)
    bwd = calibrate_backward(g, lat, fwd, cc)
    return g, lat, fwd, bwd


def _header(cfg, g, lat):
    return {"seed": int(cfg.seed), "germ": germ_to_dict(g), "d": lat.d, "m": list(lat.m)}


# ------------------------------------------------------------ classification


def _classify_arrays(X, g, lat, fwd, bwd, budget, persist):
    M, a, e, c, o = kernels.flatten_germ(g)
    return kernels.classify_kernel(
        np.ascontiguousarray(X, dtype=np.complex128),
        M,
        np.asarray(lat.m, dtype=np.int64),
        lat.d,
        a,
        e,
        c,
        o,
        fwd.epsilon,
        fwd.theta,
        fwd.delta,
        bwd.delta,
        int(budget),
        int(persist),
    )


def classify_point(x, g: Germ, lat: LatticeData, specs, budgets=None) -> ClassificationLabel:
    """Label x by forward capture in D^+_l or backward capture in D^-_l.

    ``specs`` is the pair (forward, backward) of petal specs.  Forward and
    backward orbits advance together and the first capture wins.
    """
    fwd, bwd = specs
    b = budgets or Budgets()
    budget = b if isinstance(b, int) else max(b.forward, b.backward)
    persist = 0 if isinstance(b, int) else b.persist
    x = np.asarray(x, dtype=complex).reshape(1, -1)
    lab, ell, _, _ = _classify_arrays(x, g, lat, fwd, bwd, budget, persist)
    kind = _CODE_TO_KIND[int(lab[0])]
    return ClassificationLabel(kind, int(ell[0]) if kind.startswith("Omega") else None)


def covering_stats(g, lat, fwd, bwd, size, seed, band, budgets: Budgets, radius=None):
    """Classify a quasi-random cloud of the punctured polydisc of radius min(delta')."""
    radius = min(fwd.delta_prime, bwd.delta_prime) if radius is None else radius
    X = polydisc_cloud(g.n, radius, size, seed, band=band)
    X = X[monomial(X, g.M_vec) != 0]
    lab, ell, steps, conflict = _classify_arrays(X, g, lat, fwd, bwd, max(budgets.forward, budgets.backward), budgets.persist)
    counts = {KINDS[k]: int(np.sum(lab == k)) for k in range(5)}
    nonfixed = len(X) - counts["FixedSet"]
    covered = counts["OmegaPlus"] + counts["OmegaMinus"]
    per_ell = []
    for l in range(lat.d):
        per_ell.append(
            {
                "ell": l,
                "plus": int(np.sum((lab == kernels.PLUS) & (ell == l))),
                "minus": int(np.sum((lab == kernels.MINUS) & (ell == l))),
                "conflicts": int(np.sum(conflict & (ell == l))),
            }
        )
    stats = {
        "radius": radius,
        "band": band,
        "samples": int(len(X)),
        "counts": counts,
        "covered_fraction": covered / nonfixed if nonfixed else 1.0,
        "conflicts": int(conflict.sum()),
        "max_capture_steps": int(steps.max()) if len(steps) else 0,
        "forward_components": sorted({int(v) for v in ell[lab == kernels.PLUS]}),
        "backward_components": sorted({int(v) for v in ell[lab == kernels.MINUS]}),
        "per_ell": per_ell,
    }
    return stats, X, lab, ell, steps


def run_classify(cfg: ExperimentConfig) -> RunResult:
    g, lat, fwd, bwd = calibrate(cfg)
    stats, X, lab, ell, steps = covering_stats(
        g, lat, fwd, bwd, cfg.samples.covering, cfg.seed, cfg.tolerances.boundary_band, cfg.budgets
    )
    stats["pass"] = bool(stats["covered_fraction"] >= cfg.tolerances.covering_fraction and stats["conflicts"] == 0)
    header = ["index"] + [f"re_x{i + 1}" for i in range(g.n)] + [f"im_x{i + 1}" for i in range(g.n)] + ["label", "ell", "steps"]
    rows = []
    for k in range(len(X)):
        kind = KINDS[int(lab[k])]
        rows.append(
            [k]
            + [float(v) for v in X[k].real]
            + [float(v) for v in X[k].imag]
            + [kind, int(ell[k]) if kind.startswith("Omega") else "", int(steps[k])]
        )
    report = _header(cfg, g, lat) | {"forward": fwd.to_dict(), "backward": bwd.to_dict(), "covering": stats}
    report["pass"] = stats["pass"]
    return RunResult("classify", report, {"points": Table(header, rows)})


def run_calibrate(cfg: ExperimentConfig) -> RunResult:
    g, lat, fwd, bwd = calibrate(cfg)
    report = _header(cfg, g, lat) | {"forward": fwd.to_dict(), "backward": bwd.to_dict()}
    return RunResult("calibrate", report, {})


# ------------------------------------------------------------ 1-D flower


def _step_1d(g: Germ, z: complex) -> complex:
    zp = z ** g.M[0]
    coef = g.a[0]
    for e, c in g.A[0].terms():
        coef += c * z ** e[0]
    return z * (1 + zp * coef)


def flower_trace(g: Germ, z0: complex, j_max: int):
    """(checkpoint rows (j, z_j), z_{j_max}) of the orbit of z0, log-spaced."""
    marks = sorted({int(round(10 ** (k / 10))) for k in range(int(10 * math.log10(j_max)) + 1)} | {j_max})
    marks = [j for j in marks if 1 <= j <= j_max]
    rows = []
    z = complex(z0)
    nxt = 0
    for j in range(1, j_max + 1):
        z = _step_1d(g, z)
        if j == marks[nxt]:
            rows.append((j, z))
            nxt += 1
    return rows, z


def _flower_net(a, p, eps, theta, size, seed, decades=2.0):
    """Points of S~_a(eps, theta) in every component: -a z^p runs over a C~ net."""
    per = max(1, -(-size // p))
    w = sector_cloud(eps, theta, int(per / 0.6) + 8, seed, decades=decades, tilde=True)[:per]
    base = (w / (-a)) ** (1.0 / p)
    return np.concatenate([base * np.exp(2j * math.pi * k / p) for k in range(p)])


def _flower_sweep(g, a, p, Z, eps, theta, steps):
    """Orbit statistics for the starting points Z over ``steps`` iterations."""
    fstep = lambda Y: evaluate(g, Y[:, None])[:, 0]
    comp0 = _root_index(Z, a, p)
    zp0 = np.abs(Z) ** p
    Y = Z.copy()
    ratio = np.ones(len(Z))
    left = np.zeros(len(Z), bool)
    last_out = np.where(_in_C_arr(-a * Z ** p, eps, theta), -1, 0)
    s_start = last_out < 0
    left_S = np.zeros(len(Z), bool)
    for j in range(1, steps + 1):
        Y = fstep(Y)
        w = -a * Y ** p
        inT = _in_C_tilde_arr(w, eps, theta) & (_root_index(Y, a, p) == comp0)
        inS = _in_C_arr(w, eps, theta)
        left |= ~inT
        left_S |= s_start & ~inS
        last_out = np.where(inS, last_out, j)
        ratio = np.maximum(ratio, np.abs(Y) ** p * (1 + abs(a) * j * zp0) / zp0)
    return {"Y": Y, "ratio": ratio, "left_tilde": left, "left_S": left_S, "last_out": last_out, "zp0": zp0, "comp": comp0}


def verify_flower_1d(cfg: ExperimentConfig) -> RunResult:
    """Leau-Fatou checks for a 1-D germ z(1 + z^p(a/p + ...)).

    Fits epsilon (component invariance on a net), c (orbit bound) and C
    (re-entry time) on one net and validates c and C on a fresh net.
    """
    g = cfg.build_germ()
    if g.n != 1:
        raise PreconditionViolated("the flower check needs a one-variable germ")
    p = g.M[0]
    a = p * g.a[0]
    if a == 0:
        raise PreconditionViolated("a must be non-zero")
    theta = cfg.petal.theta
    size, steps = cfg.samples.flower, cfg.budgets.flower_net

    z0 = complex(*cfg.flower_start)
    if not _in_C_tilde_arr(-a * z0 ** p, 0.5, theta):
        # rotate onto the attracting axis of component 0: -a z0^p > 0
        z0 = abs(z0) * complex(np.exp(-1j * np.angle(-a) / p))
    J = cfg.budgets.flower_j
    trace, zJ = flower_trace(g, z0, J)
    limit_value = J * zJ ** p
    limit_dev = abs(limit_value + a) / abs(a)

    eps = cfg.petal.epsilon if cfg.petal.epsilon is not None else 0.5
    while True:
        Z = _flower_net(a, p, eps, theta, size, cfg.seed)
        F = evaluate(g, Z[:, None])[:, 0]
        inv_tilde = _in_C_tilde_arr(-a * F ** p, eps, theta) & (_root_index(F, a, p) == _root_index(Z, a, p))
        inS = _in_C_arr(-a * Z ** p, eps, theta)
        inv_S = ~inS | _in_C_arr(-a * F ** p, eps, theta)
        if (inv_tilde.all() and inv_S.all()) or cfg.petal.epsilon is not None or eps < 1e-8:
            break
        eps /= 2

    fit = _flower_sweep(g, a, p, Z, eps, theta, steps)
    c_fit = 1.1 * float(fit["ratio"].max())
    settled = fit["last_out"] < steps
    j0 = np.maximum(fit["last_out"] + 1, 0)
    C_fit = 1.1 * float(np.max((j0 * fit["zp0"])[settled])) if settled.any() else math.inf

    Zv = _flower_net(a, p, eps, theta, size, cfg.seed + 1)
    val = _flower_sweep(g, a, p, Zv, eps, theta, steps)
    settled_v = val["last_out"] < steps
    j0v = np.maximum(val["last_out"] + 1, 0)

    components = sorted({int(k) for k in _root_index(Zv, a, p)})
    report = {
        "seed": int(cfg.seed),
        "germ": germ_to_dict(g),
        "p": p,
        "a": a,
        "epsilon": eps,
        "theta": theta,
        "components": len(components),
        "component_indices": components,
        "invariance_violations": int(np.sum(~inv_tilde) + np.sum(~inv_S)),
        "orbit_invariance_violations": int(np.sum(fit["left_tilde"]) + np.sum(val["left_tilde"])),
        "S_invariance_violations": int(np.sum(fit["left_S"]) + np.sum(val["left_S"])),
        "c": c_fit,
        "bound_violations": int(np.sum(val["ratio"] > c_fit)),
        "C_big": C_fit,
        "reentry_violations": int(np.sum((j0v * val["zp0"] > C_fit) & settled_v)),
        "reentry_unsettled": int(np.sum(~settled_v)),
        "net_size": int(len(Zv)),
        "net_steps": steps,
        "limit": {
            "z0": z0,
            "j": J,
            "value": limit_value,
            "target": -a,
            "relative_deviation": limit_dev,
            # the deviation is about 1 / (j |a| |z0|^p) before the asymptotic regime
            "asymptotic_scale": J * abs(a) * abs(z0) ** p,
            "tolerance": cfg.tolerances.flower_limit,
        },
    }
    report["limit"]["pass"] = bool(limit_dev < cfg.tolerances.flower_limit)
    report["pass"] = bool(
        report["limit"]["pass"]
        and report["components"] == p
        and report["invariance_violations"] == 0
        and report["orbit_invariance_violations"] == 0
        and report["S_invariance_violations"] == 0
        and report["bound_violations"] == 0
        and report["reentry_violations"] == 0
    )
    rows = [[j, z.real, z.imag, abs(z) ** p * j] for j, z in trace]
    tables = {"trace": Table(["j", "re_z", "im_z", "abs_z_p_times_j"], rows)}
    return RunResult("flower1d", report, tables)


# ------------------------------------------------------------ invariance suite


def invariance_suite(g, lat, spec: PetalSpec, size, seed, orbit_points=500, orbit_steps=1000):
    """Violations of f(U_l) in U_l and of the eta-decay on a U sample, plus orbit convergence.

    Orbit convergence: along ``orbit_steps`` iterations of ``orbit_points``
    points, |x_i|/|x^m|^gamma must not increase and |x^M| must obey the
    Leau-Fatou bound c|x^M|/(1 + j|x^M|) with the calibrated c.
    """
    eta = spec.constants.eta
    per_ell = []
    X_all = []
    total_inv = total_eta = 0
    for l in range(lat.d):
        cnt = size // lat.d + (1 if l < size % lat.d else 0)
        X = sample_U(g, lat, spec, cnt, seed + 31 * l, ell=l)
        rate, FX = _decay_rates(g, lat, spec.gamma, X)
        inv = int(np.sum(in_U_arr(FX, g, spec, lat) != l))
        dec = int(np.sum(~(rate >= eta)))
        total_inv += inv
        total_eta += dec
        per_ell.append({"ell": l, "samples": int(cnt), "invariance_violations": inv, "eta_violations": dec})
        X_all.append(X[: max(1, orbit_points // lat.d)])
    Y = np.concatenate(X_all)
    s0 = np.abs(monomial(Y, g.M_vec))
    c = spec.constants.c if spec.constants.c is not None else math.inf
    ratio = np.abs(Y) / (np.abs(monomial(Y, lat.m)) ** spec.gamma)[:, None]
    mono_bad = np.zeros(len(Y), bool)
    lf_bad = np.zeros(len(Y), bool)
    for j in range(1, orbit_steps + 1):
        Y = evaluate(g, Y)
        r = np.abs(Y) / (np.abs(monomial(Y, lat.m)) ** spec.gamma)[:, None]
        mono_bad |= np.any(r > ratio * (1 + 1e-12), axis=1)
        ratio = r
        lf_bad |= np.abs(monomial(Y, g.M_vec)) > c * s0 / (1 + j * s0)
    return {
        "samples": int(size),
        "eta": eta,
        "invariance_violations": total_inv,
        "eta_violations": total_eta,
        "orbit_points": int(len(Y)),
        "orbit_steps": orbit_steps,
        "orbit_monotonicity_violations": int(mono_bad.sum()),
        "orbit_bound_violations": int(lf_bad.sum()),
        "per_ell": per_ell,
        "pass": bool(total_inv == 0 and total_eta == 0 and not mono_bad.any() and not lf_bad.any()),
    }


# ------------------------------------------------------------ invariant functions


def invariants_suite(g, lat, spec, size, pairs, seed, tol):
    """psi_2 invariance under f and multiplicativity psi_{I+J} = psi_I psi_J."""
    from .invariants import g_I, psi_I_batch, u_deviation_fit

    if g.n == 1:
        return {"samples": 0, "pairs": 0, "invariance_violations": 0, "product_violations": 0, "pass": True}
    I2 = lat.M_array()[1]
    viol = 0
    worst = 0.0
    per_ell = []
    samples = {}
    for l in range(lat.d):
        cnt = size // lat.d + (1 if l < size % lat.d else 0)
        X = sample_U(g, lat, spec, cnt, seed + 17 * l, ell=l)
        samples[l] = X
        v0, _, _, b0 = psi_I_batch(X, I2, l, g, lat, spec, tol)
        v1, _, _, b1 = psi_I_batch(evaluate(g, X), I2, l, g, lat, spec, tol)
        diff = np.abs(v1 - v0)
        bad = int(np.sum(diff > 2 * (b0 + b1)))
        viol += bad
        worst = max(worst, float(np.max(diff / (b0 + b1))))
        per_ell.append({"ell": l, "samples": int(cnt), "invariance_violations": bad})
    rng = np.random.default_rng(seed)
    prod_viol = 0
    prod_worst = 0.0
    rows = []
    pts_per_pair = 4
    for k in range(pairs):
        I = rng.integers(0, 4, size=g.n)
        J = rng.integers(0, 4, size=g.n)
        l = int(rng.integers(0, lat.d))
        X = samples[l][rng.choice(len(samples[l]), size=min(pts_per_pair, len(samples[l])), replace=False)]
        # targets relative to |g_I|: large |I| gives large values
        rel = lambda K: tol * np.maximum(1.0, np.abs(g_I(X, K, l, g, lat)))
        vI, _, _, bI = psi_I_batch(X, I, l, g, lat, spec, rel(I))
        vJ, _, _, bJ = psi_I_batch(X, J, l, g, lat, spec, rel(J))
        vK, _, _, bK = psi_I_batch(X, I + J, l, g, lat, spec, rel(I + J))
        # combined tolerance, plus the rounding of the product itself
        allow = bK + np.abs(vI) * bJ + np.abs(vJ) * bI + bI * bJ + 4 * np.finfo(float).eps * np.abs(vK)
        err = np.abs(vK - vI * vJ)
        prod_viol += int(np.sum(err > allow))
        prod_worst = max(prod_worst, float(np.max(err / allow)))
        rows.append([k, list(map(int, I)), list(map(int, J)), l, float(err.max()), float(allow.min())])
    kappa = u_deviation_fit(g, lat, spec, samples[0][: min(200, len(samples[0]))], ell=0, tol=tol)
    report = {
        "samples": int(size),
        "tol": tol,
        "invariance_violations": viol,
        "invariance_worst_ratio": worst,
        "pairs": pairs,
        "product_violations": prod_viol,
        "product_worst_ratio": prod_worst,
        "kappa": kappa,
        "per_ell": per_ell,
        "pass": bool(viol == 0 and prod_viol == 0),
    }
    return report, rows


def verify_invariants(cfg: ExperimentConfig) -> RunResult:
    g, lat, _ = prepare_germ(cfg)
    spec = calibrate_petal(g, lat, calibration_config(cfg))
    rep, rows = invariants_suite(g, lat, spec, cfg.samples.invariants, cfg.samples.pairs, cfg.seed, cfg.tolerances.psi)
    report = _header(cfg, g, lat) | {"petal": spec.to_dict(), "invariants": rep}
    tables = {"pairs": Table(["pair", "I", "J", "ell", "max_error", "min_allowance"], rows)}
    return RunResult("invariants", report, tables)


# ------------------------------------------------------------ Fatou charts


def fatou_suite(g, lat, spec, size, seed, tol, tols, ray=(1e3, 1e4, 1e5)):
    """Chart round trip, model inverse, growth, V-invariance, h~ bound and conjugacy."""
    from .fatou import (
        fatou_beta_batch,
        htilde_derivative_check,
        make_chart,
        model_forward_batch,
        model_inverse_batch,
        phi_forward_batch,
        phi_inverse_batch,
        slice_ftilde,
    )

    tau = spec.gamma / lat.d
    fit = htilde_derivative_check(g, lat, spec, 0, size=min(size, 200), seed=seed + 5)
    per_ell = []
    rows = []
    agg = {"model_roundtrip": 0.0, "roundtrip": 0.0, "conjugacy": 0.0, "beta_error": 0.0}
    counts = {"growth_violations": 0, "V_violations": 0, "conjugacy_violations": 0, "K_violations": 0}
    for l in range(lat.d):
        cnt = size // lat.d + (1 if l < size % lat.d else 0)
        z, W, _ = sample_V(g, lat, spec, cnt, seed + 101 * l, ell=l)
        X0 = model_inverse_batch(z, W, g, lat, l)
        zm, Wm = model_forward_batch(X0, g, lat, l)
        m_err = float(max(np.max(np.abs(zm - z) / np.abs(z)), np.max(np.abs(Wm - W) / np.maximum(1, np.abs(W))) if g.n > 1 else 0.0))
        Xs = phi_inverse_batch(z, W, g, lat, spec, l, tol)
        z2, W2, _ = phi_forward_batch(Xs, l, g, lat, spec, tol)
        X3 = phi_inverse_batch(z2, W2, g, lat, spec, l, tol)
        rt = float(np.max(np.abs(X3 - Xs)))
        FX = evaluate(g, Xs)
        fz = 1.0 / monomial(FX, g.M_vec)
        grow = int(np.sum(~(np.abs(fz) > np.abs(z) + 0.5)))
        inV = int(sum(not in_V(fz[k], W[k], g, spec, lat) for k in range(cnt)))
        hK = np.abs(fz - z - 1) * np.abs(z) ** tau
        half = max(1, cnt // 2)
        K = 1.1 * float(hK[:half].max())
        kviol = int(np.sum(hK[half:] > K))
        conj = np.zeros(cnt)
        berr = np.zeros(cnt)
        for k in range(cnt):
            ch = make_chart(W[k], l, g, lat, spec, tol=tols.beta)
            b, e = fatou_beta_batch(np.array([z[k], fz[k]]), ch, g, lat, spec)
            conj[k] = abs(b[1] - b[0] - 1)
            berr[k] = e.sum()
            rows.append([l, k, z[k], fz[k], b[0], conj[k], berr[k]])
        cviol = int(np.sum((conj > tols.conjugacy) | (conj > 2 * berr)))
        counts["growth_violations"] += grow
        counts["V_violations"] += inV
        counts["conjugacy_violations"] += cviol
        counts["K_violations"] += kviol
        agg["model_roundtrip"] = max(agg["model_roundtrip"], m_err)
        agg["roundtrip"] = max(agg["roundtrip"], rt)
        agg["conjugacy"] = max(agg["conjugacy"], float(conj.max()))
        agg["beta_error"] = max(agg["beta_error"], float(berr.max()))
        per_ell.append(
            {
                "ell": l,
                "samples": int(cnt),
                "model_roundtrip": m_err,
                "roundtrip": rt,
                "growth_violations": grow,
                "V_violations": inV,
                "K": K,
                "K_violations": kviol,
                "conjugacy_max": float(conj.max()),
                "conjugacy_violations": cviol,
            }
        )
    # beta(z)/z along the positive ray of the first sampled slice
    z, W, _ = sample_V(g, lat, spec, 1, seed + 7, ell=0)
    ch = make_chart(W[0], 0, g, lat, spec, tol=tols.beta)
    radii = [r for r in ray if r > 2 * ch.R_w]
    b, _ = fatou_beta_batch(np.array(radii, dtype=complex), ch, g, lat, spec) if radii else (np.zeros(0), None)
    ray_dev = [float(abs(b[k] / radii[k] - 1)) for k in range(len(radii))]
    # base-point independence on the same slice
    zs = ch.base_point_z * (1.5 + np.arange(20)) * np.exp(1j * spec.theta * 0.5 * np.sin(np.arange(20)))
    ch2 = make_chart(W[0], 0, g, lat, spec, tol=tols.beta, base_point=2 * ch.base_point_z)
    b1, e1 = fatou_beta_batch(zs, ch, g, lat, spec)
    b2, e2 = fatou_beta_batch(zs, ch2, g, lat, spec)
    spread = float(np.std(b1 - b2))
    bp_allow = float(np.max(e1 + e2))
    report = {
        "samples": int(size),
        "tol": tol,
        "K_prime": fit.K_prime,
        "K_prime_exponent": fit.exponent,
        "K_prime_half_step": fit.K_prime_half_step,
        "model_roundtrip_max": agg["model_roundtrip"],
        "roundtrip_max": agg["roundtrip"],
        "conjugacy_max": agg["conjugacy"],
        "beta_error_max": agg["beta_error"],
        **counts,
        "ray_radii": radii,
        "ray_deviation": ray_dev,
        "base_point_spread": spread,
        "base_point_allowance": bp_allow,
        "per_ell": per_ell,
    }
    report["roundtrip_pass"] = bool(report["roundtrip_max"] <= tols.roundtrip and report["model_roundtrip_max"] <= tols.model_roundtrip)
    report["ray_pass"] = bool(len(ray_dev) > 0 and ray_dev[-1] < 1e-2 and all(np.diff(ray_dev) < 0))
    report["conjugacy_pass"] = bool(counts["conjugacy_violations"] == 0 and report["ray_pass"])
    report["pass"] = bool(
        report["roundtrip_pass"]
        and report["conjugacy_pass"]
        and counts["growth_violations"] == 0
        and counts["V_violations"] == 0
        and spread <= bp_allow
    )
    return report, rows


def verify_fatou(cfg: ExperimentConfig) -> RunResult:
    g, lat, _ = prepare_germ(cfg)
    spec = calibrate_petal(g, lat, calibration_config(cfg))
    rep, rows = fatou_suite(g, lat, spec, cfg.samples.chart, cfg.seed, cfg.tolerances.chart, cfg.tolerances)
    report = _header(cfg, g, lat) | {"petal": spec.to_dict(), "fatou": rep}
    tables = {"chart": Table(["ell", "index", "z", "ftilde_z", "beta", "conjugacy_residual", "beta_error"], rows)}
    return RunResult("fatou", report, tables)


# ------------------------------------------------------------ theorems


def verify_theorem_A(cfg: ExperimentConfig) -> RunResult:
    """Calibration, invariance, covering and conjugacy with per-component statistics."""
    g, lat, _ = prepare_germ(cfg)
    if any(ai.real >= 0 for ai in g.a):
        raise PreconditionViolated("Theorem A needs Re(a_i) < 0 for every i after normalization")
    g, lat, fwd, bwd = calibrate(cfg)
    inv = invariance_suite(g, lat, fwd, cfg.samples.invariance, cfg.seed + 1)
    cov, *_ = covering_stats(g, lat, fwd, bwd, cfg.samples.covering, cfg.seed + 2, cfg.tolerances.boundary_band, cfg.budgets)
    cov["pass"] = bool(cov["covered_fraction"] >= cfg.tolerances.covering_fraction and cov["conflicts"] == 0)
    fat, rows = fatou_suite(g, lat, fwd, cfg.samples.chart, cfg.seed + 3, cfg.tolerances.chart, cfg.tolerances)
    per_ell = []
    for l in range(lat.d):
        e = {"ell": l}
        e |= {f"invariance_{k}": v for k, v in inv["per_ell"][l].items() if k != "ell"}
        e |= {f"covering_{k}": v for k, v in cov["per_ell"][l].items() if k != "ell"}
        e |= {f"fatou_{k}": v for k, v in fat["per_ell"][l].items() if k != "ell"}
        e["pass"] = bool(
            e["invariance_invariance_violations"] == 0
            and e["invariance_eta_violations"] == 0
            and e["covering_plus"] > 0
            and e["covering_minus"] > 0
            and e["covering_conflicts"] == 0
            and e["fatou_conjugacy_violations"] == 0
        )
        per_ell.append(e)
    report = _header(cfg, g, lat) | {
        "forward": fwd.to_dict(),
        "backward": bwd.to_dict(),
        "invariance": inv,
        "covering": cov,
        "fatou": fat,
        "per_ell": per_ell,
    }
    report["pass"] = bool(inv["pass"] and cov["pass"] and fat["conjugacy_pass"] and all(e["pass"] for e in per_ell))
    tables = {"chart": Table(["ell", "index", "z", "ftilde_z", "beta", "conjugacy_residual", "beta_error"], rows)}
    return RunResult("thmA", report, tables)


def verify_theorem_B(cfg: ExperimentConfig) -> RunResult:
    """Escape of forward and backward orbits from the polydisc of radius escape_delta.

    Non-escaping samples are listed with their escape times under a
    ten-fold budget, to tell slow escapes from genuine non-escape.
    """
    g, lat, _ = prepare_germ(cfg)
    if not any(ai.real > 0 for ai in g.a):
        raise PreconditionViolated("Theorem B needs Re(a_i) > 0 for some i after normalization")
    delta = cfg.escape_delta
    X = polydisc_cloud(g.n, delta, cfg.samples.escape, cfg.seed)
    X = X[monomial(X, g.M_vec) != 0]
    M, a, e, c, o = kernels.flatten_germ(g)
    budget = max(cfg.budgets.forward, cfg.budgets.backward)
    fwd, bwd = kernels.escape_kernel(np.ascontiguousarray(X), M, a, e, c, o, delta, budget)
    f_bad = (fwd < 0) | (fwd > cfg.budgets.forward)
    b_bad = (bwd < 0) | (bwd > cfg.budgets.backward)
    bad = np.flatnonzero(f_bad | b_bad)
    exceptions = []
    if len(bad):
        f10, b10 = kernels.escape_kernel(np.ascontiguousarray(X[bad]), M, a, e, c, o, delta, 10 * budget)
        for k, idx in enumerate(bad):
            exceptions.append(
                {
                    "index": int(idx),
                    "x": X[idx],
                    "abs_xM": float(abs(monomial(X[idx], g.M_vec))),
                    "forward_escaped": not bool(f_bad[idx]),
                    "backward_escaped": not bool(b_bad[idx]),
                    "forward_steps_extended": int(f10[k]),
                    "backward_steps_extended": int(b10[k]),
                }
            )
    report = _header(cfg, g, lat) | {
        "delta": delta,
        "samples": int(len(X)),
        "budget_forward": cfg.budgets.forward,
        "budget_backward": cfg.budgets.backward,
        "forward_failures": int(f_bad.sum()),
        "backward_failures": int(b_bad.sum()),
        "max_forward_steps": int(fwd[~f_bad].max()) if (~f_bad).any() else -1,
        "max_backward_steps": int(bwd[~b_bad].max()) if (~b_bad).any() else -1,
        "exceptions": exceptions,
    }
    report["pass"] = bool(len(bad) == 0)
    header = ["index"] + [f"re_x{i + 1}" for i in range(g.n)] + [f"im_x{i + 1}" for i in range(g.n)] + ["forward_steps", "backward_steps"]
    rows = [[k] + list(X[k].real) + list(X[k].imag) + [int(fwd[k]), int(bwd[k])] for k in range(len(X))]
    return RunResult("thmB", report, {"escape": Table(header, rows)})


EXPERIMENTS = {
    "flower1d": verify_flower_1d,
    "calibrate": run_calibrate,
    "invariants": verify_invariants,
    "fatou": verify_fatou,
    "classify": run_classify,
    "thmA": verify_theorem_A,
    "thmB": verify_theorem_B,
}
