"""Integer linear algebra: primitive direction of M and its unimodular completion.

All matrix arithmetic uses Python ints (arbitrary size); matrices are lists
of row lists.  Nothing here touches floating point except ``lambda_of``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import BadOrdering, NotPrimitive, ZeroMultiIndex


@dataclass(frozen=True)
class LatticeData:
    d: int
    m: tuple
    m_bar: int
    Mmat: tuple  # rows of the completion; first row is m
    Nmat: tuple  # integer inverse

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def M(self) -> tuple:
        return tuple(self.d * v for v in self.m)

    def Mrow(self, i: int) -> np.ndarray:
        return np.array(self.Mmat[i], dtype=np.int64)

    def N_array(self) -> np.ndarray:
        return np.array(self.Nmat, dtype=np.int64)

    def M_array(self) -> np.ndarray:
        return np.array(self.Mmat, dtype=np.int64)


def reduce_multiindex(M):
    """(d, m, m_bar) with d = gcd(M), m = M / d, m_bar = #zeros of m."""
    M = [int(v) for v in M]
    if any(v < 0 for v in M):
        raise ValueError("M must be non-negative")
    d = 0
    for v in M:
        d = gcd(d, v)
    if d == 0:
        raise ZeroMultiIndex("M = 0 has no primitive direction")
    m = tuple(v // d for v in M)
    return d, m, sum(1 for v in m if v == 0)


def matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]


def identity(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def det(A) -> int:
    """Exact integer determinant by fraction-free (Bareiss) elimination."""
    n = len(A)
    A = [list(r) for r in A]
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if A[i][k] != 0), None)
            if swap is None:
                return 0
            A[k], A[swap] = A[swap], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def _column_reduce(v):
    """Unimodular V with v V = (1, 0, ..., 0) for a primitive row vector v.

    Repeated Euclidean steps on the entries, mirrored as column operations
    on V.  Deterministic: always reduces by the smallest entry, lowest index.
    """
    k = len(v)
    v = list(v)
    V = identity(k)

    def addcol(dst, src, t):
        v[dst] += t * v[src]
        for row in V:
            row[dst] += t * row[src]

    while sum(1 for x in v if x != 0) > 1:
        piv = min((i for i in range(k) if v[i] != 0), key=lambda i: (abs(v[i]), i))
        for i in range(k):
            if i != piv and v[i] != 0:
                addcol(i, piv, -(v[i] // v[piv]))
    piv = next(i for i in range(k) if v[i] != 0)
    if piv != 0:
        v[0], v[piv] = v[piv], v[0]
        for row in V:
            row[0], row[piv] = row[piv], row[0]
    if v[0] < 0:
        v[0] = -v[0]
        for row in V:
            row[0] = -row[0]
    assert v[0] == 1, "vector was not primitive"
    return V


def _inverse_unimodular(V):
    """Exact inverse of a unimodular integer matrix (Gauss-Jordan over Z)."""
    k = len(V)
    A = [list(r) + e for r, e in zip(V, identity(k))]
    for c in range(k):
        # Euclid down column c until a single +-1 pivot remains
        while True:
            rows = [i for i in range(c, k) if A[i][c] != 0]
            piv = min(rows, key=lambda i: (abs(A[i][c]), i))
            others = [i for i in rows if i != piv]
            if not others:
                break
            for i in others:
                t = A[i][c] // A[piv][c]
                A[i] = [x - t * y for x, y in zip(A[i], A[piv])]
        A[c], A[piv] = A[piv], A[c]
        if A[c][c] < 0:
            A[c] = [-x for x in A[c]]
        for i in range(k):
            if i != c and A[i][c] != 0:
                t = A[i][c]
                A[i] = [x - t * y for x, y in zip(A[i], A[c])]
    return [r[k:] for r in A]


def _hermite_rows(R):
    """Row-style Hermite normal form of an integer matrix (rows combined only)."""
    R = [list(r) for r in R]
    rows, cols = len(R), len(R[0]) if R else 0
    top = 0
    for c in range(cols):
        if top >= rows:
            break
        while True:
            nz = [i for i in range(top, rows) if R[i][c] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda i: (abs(R[i][c]), i))
            others = [i for i in nz if i != piv]
            if not others:
                break
            for i in others:
                t = R[i][c] // R[piv][c]
                R[i] = [x - t * y for x, y in zip(R[i], R[piv])]
        nz = [i for i in range(top, rows) if R[i][c] != 0]
        if not nz:
            continue
        piv = nz[0]
        R[top], R[piv] = R[piv], R[top]
        if R[top][c] < 0:
            R[top] = [-x for x in R[top]]
        for i in range(top):
            t = R[i][c] // R[top][c]
            R[i] = [x - t * y for x, y in zip(R[i], R[top])]
        top += 1
    return R


def complete_unimodular(m):
    """Unimodular non-negative matrix with first row m, and its inverse.

    Zero entries of m must be trailing; they get an identity block.  The
    leading block is completed by Euclidean column reduction, its lower rows
    are brought to Hermite form, the determinant is made +1, and each lower
    row is shifted by the least integer multiple of m that makes it
    non-negative.  Returns (Mmat, Nmat) as tuples of row tuples.
    """
    m = [int(v) for v in m]
    n = len(m)
    if any(v < 0 for v in m):
        raise ValueError("m must be non-negative")
    k = sum(1 for v in m if v != 0)
    if k == 0:
        raise ZeroMultiIndex("m = 0")
    if any(v == 0 for v in m[:k]):
        raise BadOrdering("zero entries of m must be trailing")
    g = 0
    for v in m:
        g = gcd(g, v)
    if g != 1:
        raise NotPrimitive(f"gcd(m) = {g} != 1")

    lead = m[:k]
    V = _column_reduce(lead)
    Mt = _inverse_unimodular(V)
    assert Mt[0] == lead
    lower = _hermite_rows(Mt[1:]) if k > 1 else []
    Mt = [lead] + lower
    if det(Mt) < 0:
        Mt[-1] = [-x for x in Mt[-1]]
    for i in range(1, k):
        t = max(-(Mt[i][j] // lead[j]) for j in range(k))  # ceil(-r_j / m_j)
        Mt[i] = [x + t * y for x, y in zip(Mt[i], lead)]
    Nt = _inverse_unimodular(Mt)

    Mmat = identity(n)
    Nmat = identity(n)
    for i in range(k):
        for j in range(k):
            Mmat[i][j] = Mt[i][j]
            Nmat[i][j] = Nt[i][j]
    return tuple(tuple(r) for r in Mmat), tuple(tuple(r) for r in Nmat)


def lambda_of(I, a, d: int) -> complex:
    """lambda_I = d <a, I>."""
    I = np.asarray(I)
    a = np.asarray(a, dtype=complex)
    if I.shape != a.shape:
        raise ValueError("I and a must have the same length")
    return complex(d * np.dot(a, I))


def check_negative_columns(Nmat, m_bar: int = 0) -> bool:
    """True iff columns 2..n-m_bar (1-based) each hold a negative entry."""
    n = len(Nmat)
    return all(any(Nmat[i][c] < 0 for i in range(n)) for c in range(1, n - m_bar))


def lattice_data(M) -> LatticeData:
    d, m, m_bar = reduce_multiindex(M)
    Mmat, Nmat = complete_unimodular(m)
    return LatticeData(d, m, m_bar, Mmat, Nmat)
