"""Compiled orbit kernels for classification and escape-time sweeps.

Germs are passed in flattened form: M, a, and the higher-order terms as
(exps, coefs, owner) with term t contributing coefs[t] x^exps[t] to
A_{owner[t]}.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .germ import Germ

FIXED, PLUS, MINUS, ESCAPED, UNDETERMINED = 0, 1, 2, 3, 4
TWO_PI = 2.0 * math.pi


def flatten_germ(g: Germ):
    exps, coefs, owner = [], [], []
    for i, P in enumerate(g.A):
        for e, c in P.terms():
            exps.append(list(e))
            coefs.append(complex(c))
            owner.append(i)
    if not exps:
        return (
            np.asarray(g.M, dtype=np.int64),
            g.a_vec.copy(),
            np.zeros((0, g.n), dtype=np.int64),
            np.zeros(0, dtype=np.complex128),
            np.zeros(0, dtype=np.int64),
        )
    return (
        np.asarray(g.M, dtype=np.int64),
        g.a_vec.copy(),
        np.asarray(exps, dtype=np.int64),
        np.asarray(coefs, dtype=np.complex128),
        np.asarray(owner, dtype=np.int64),
    )


@njit(cache=True)
def _mono(x, e):
    out = 1.0 + 0.0j
    for k in range(x.shape[0]):
        p = e[k]
        if p > 0:
            for _ in range(p):
                out *= x[k]
        elif p < 0:
            for _ in range(-p):
                out /= x[k]
    return out


@njit(cache=True)
def _coef(x, a, exps, coefs, owner, out):
    for i in range(a.shape[0]):
        out[i] = a[i]
    for t in range(coefs.shape[0]):
        out[owner[t]] += coefs[t] * _mono(x, exps[t])


@njit(cache=True)
def _forward(x, M, a, exps, coefs, owner, buf, out):
    s = _mono(x, M)
    _coef(x, a, exps, coefs, owner, buf)
    for i in range(x.shape[0]):
        out[i] = x[i] * (1.0 + s * buf[i])


@njit(cache=True)
def _backward(y, M, a, exps, coefs, owner, buf, out):
    """Fixed-point solve of f(out) = y; returns False when it fails to settle."""
    n = y.shape[0]
    s = _mono(y, M)
    for i in range(n):
        out[i] = y[i] * (1.0 - s * a[i])
    for _ in range(200):
        s = _mono(out, M)
        _coef(out, a, exps, coefs, owner, buf)
        change = 0.0
        size = 0.0
        for i in range(n):
            nv = y[i] / (1.0 + s * buf[i])
            change = max(change, abs(nv - out[i]))
            size = max(size, abs(nv))
            out[i] = nv
        if change <= 1e-15 * size:
            return True
    return False


@njit(cache=True)
def _in_C(s, eps, theta):
    return s != 0 and abs(s) < eps and abs(math.atan2(s.imag, s.real)) < theta


@njit(cache=True)
def _max_abs(x):
    r = 0.0
    for i in range(x.shape[0]):
        r = max(r, abs(x[i]))
    return r


@njit(cache=True)
def _component(x, m, d, backward):
    xm = _mono(x, m)
    ang = math.atan2(xm.imag, xm.real)
    if backward:
        k = int(round((d * ang + math.pi) / TWO_PI))
    else:
        k = int(round(d * ang / TWO_PI))
    return k % d


@njit(cache=True)
def classify_kernel(X, M, m, d, a, exps, coefs, owner, eps, theta, delta_f, delta_b, budget, persist):
    """Label every row of X; see module constants for the label codes.

    Forward and backward orbits advance in lockstep; the first capture
    (forward on ties) decides.  Captured forward orbits are followed for
    ``persist`` further steps and must stay in the same component of D,
    otherwise ``conflict`` is set.
    """
    N, n = X.shape
    labels = np.empty(N, np.int64)
    ells = np.full(N, -1, np.int64)
    steps = np.zeros(N, np.int64)
    conflict = np.zeros(N, np.bool_)
    xf = np.empty(n, np.complex128)
    xb = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    buf = np.empty(n, np.complex128)
    for p in range(N):
        for i in range(n):
            xf[i] = X[p, i]
            xb[i] = X[p, i]
        s0 = _mono(xf, M)
        if s0 == 0:
            labels[p] = FIXED
            continue
        alive_f = _max_abs(xf) < delta_f
        alive_b = _max_abs(xb) < delta_b
        label = UNDETERMINED
        for k in range(budget + 1):
            if not alive_f and not alive_b:
                label = ESCAPED
                break
            if alive_f:
                if _in_C(_mono(xf, M), eps, theta) and _max_abs(xf) < delta_f:
                    label = PLUS
                    ells[p] = _component(xf, m, d, False)
                    steps[p] = k
                    break
            if alive_b:
                if _in_C(-_mono(xb, M), eps, theta) and _max_abs(xb) < delta_b:
                    label = MINUS
                    ells[p] = _component(xb, m, d, True)
                    steps[p] = k
                    break
            if k == budget:
                break
            if alive_f:
                _forward(xf, M, a, exps, coefs, owner, buf, tmp)
                for i in range(n):
                    xf[i] = tmp[i]
                if _max_abs(xf) >= delta_f:
                    alive_f = False
            if alive_b:
                ok = _backward(xb, M, a, exps, coefs, owner, buf, tmp)
                for i in range(n):
                    xb[i] = tmp[i]
                if not ok or _max_abs(xb) >= delta_b:
                    alive_b = False
        labels[p] = label
        if label == PLUS:
            for _ in range(persist):
                _forward(xf, M, a, exps, coefs, owner, buf, tmp)
                for i in range(n):
                    xf[i] = tmp[i]
                if not (_in_C(_mono(xf, M), eps, theta) and _max_abs(xf) < delta_f) or _component(xf, m, d, False) != ells[p]:
                    conflict[p] = True
                    break
    return labels, ells, steps, conflict


@njit(cache=True)
def escape_kernel(X, M, a, exps, coefs, owner, delta, budget):
    """First j with max_i |f^{+-j}(x)_i| >= delta, forward and backward (-1 if never)."""
    N, n = X.shape
    fwd = np.full(N, -1, np.int64)
    bwd = np.full(N, -1, np.int64)
    x = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    buf = np.empty(n, np.complex128)
    for p in range(N):
        for direction in range(2):
            for i in range(n):
                x[i] = X[p, i]
            if _max_abs(x) >= delta:
                t = 0
            else:
                t = -1
                for j in range(1, budget + 1):
                    if direction == 0:
                        _forward(x, M, a, exps, coefs, owner, buf, tmp)
                    else:
                        if not _backward(x, M, a, exps, coefs, owner, buf, tmp):
                            break
                    for i in range(n):
                        x[i] = tmp[i]
                    if _max_abs(x) >= delta:
                        t = j
                        break
            if direction == 0:
                fwd[p] = t
            else:
                bwd[p] = t
    return fwd, bwd


@njit(cache=True)
def orbit_limit_kernel(z0, M, a, exps, coefs, owner, j_max):
    """1-D orbit samples of j * f^j(z)^p at j = 1..j_max (used by the flower check)."""
    x = np.empty(1, np.complex128)
    tmp = np.empty(1, np.complex128)
    buf = np.empty(1, np.complex128)
    x[0] = z0
    out = np.empty(j_max, np.complex128)
    for j in range(1, j_max + 1):
        _forward(x, M, a, exps, coefs, owner, buf, tmp)
        x[0] = tmp[0]
        out[j - 1] = x[0]
    return out
