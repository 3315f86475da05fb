"""Germs f_i(x) = x_i (1 + x^M (a_i + A_i(x))) and their elementary operations.

Points are numpy arrays whose last axis has length ``n``; every evaluation
routine broadcasts over leading axes so that whole sample clouds can be
pushed through the map at once.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateGerm, NoConvergence, ZeroCoordinate


def monomial(x, e):
    """x^e = prod_i x_i^{e_i} along the last axis (e integer, possibly negative)."""
    x = np.asarray(x, dtype=complex)
    e = np.asarray(e, dtype=np.int64)
    if e.size == 0:
        return np.ones(x.shape[:-1], dtype=complex)
    if np.any(e < 0):
        neg = e < 0
        if np.any(x[..., neg] == 0):
            raise ZeroCoordinate("negative exponent on a zero coordinate")
    with np.errstate(all="ignore"):
        return np.prod(x ** e, axis=-1)


class Polynomial:
    """Sparse multivariate polynomial with complex coefficients.

    ``exps`` is a (T, n) integer array of exponents and ``coefs`` the matching
    complex coefficients.  Duplicated exponents are merged on construction.
    """

    def __init__(self, n: int, terms=()):
        merged: dict[tuple, complex] = {}
        for e, c in terms:
            e = tuple(int(v) for v in e)
            if len(e) != n:
                raise ValueError(f"exponent {e} has wrong length for n={n}")
            if any(v < 0 for v in e):
                raise ValueError("exponents must be non-negative")
            merged[e] = merged.get(e, 0j) + complex(c)
        items = sorted((e, c) for e, c in merged.items() if c != 0)
        self.n = n
        self.exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), n)
        self.coefs = np.array([c for _, c in items], dtype=complex)

    @classmethod
    def zero(cls, n):
        return cls(n)

    def __len__(self):
        return len(self.coefs)

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and self.n == other.n
            and np.array_equal(self.exps, other.exps)
            and np.array_equal(self.coefs, other.coefs)
        )

    def __repr__(self):
        return f"Polynomial(n={self.n}, terms={self.terms()})"

    def terms(self):
        return [(tuple(int(v) for v in e), complex(c)) for e, c in zip(self.exps, self.coefs)]

    @property
    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if len(self) else 0

    @property
    def min_degree(self) -> int:
        return int(self.exps.sum(axis=1).min()) if len(self) else 0

    def constant_term(self) -> complex:
        if not len(self):
            return 0j
        mask = self.exps.sum(axis=1) == 0
        return complex(self.coefs[mask].sum())

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        if not len(self):
            return np.zeros(x.shape[:-1], dtype=complex)
        # (..., T, n) powers; T and n are tiny for desk-scale germs
        p = np.prod(x[..., None, :] ** self.exps, axis=-1)
        return p @ self.coefs

    def partial(self, k: int) -> "Polynomial":
        terms = []
        for e, c in zip(self.exps, self.coefs):
            if e[k] > 0:
                e2 = e.copy()
                e2[k] -= 1
                terms.append((e2, c * e[k]))
        return Polynomial(self.n, terms)

    def scaled(self, alpha, factor=1.0) -> "Polynomial":
        """Coefficients of factor * P(alpha * x)."""
        alpha = np.asarray(alpha, dtype=complex)
        return Polynomial(
            self.n,
            [(e, factor * c * complex(np.prod(alpha ** e))) for e, c in zip(self.exps, self.coefs)],
        )

    def permuted(self, perm) -> "Polynomial":
        """Polynomial in the coordinates y = x[perm]."""
        return Polynomial(self.n, [(e[list(perm)], c) for e, c in zip(self.exps, self.coefs)])

    def abs_bound(self, radius: float) -> float:
        """sup of |P| over the polydisc of the given radius."""
        if not len(self):
            return 0.0
        return float(np.sum(np.abs(self.coefs) * radius ** self.exps.sum(axis=1)))


@dataclass(frozen=True)
class Germ:
    """f_i(x) = x_i (1 + x^M (a_i + A_i(x))), A_i truncated at ``degree``.

    ``radius`` is the polydisc radius on which the truncated A is trusted.
    """

    M: tuple
    a: tuple
    A: tuple = ()
    degree: int = 0
    radius: float = 1.0
    _a: np.ndarray = field(init=False, repr=False, compare=False)
    _M: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        M = tuple(int(v) for v in self.M)
        a = tuple(complex(v) for v in self.a)
        n = len(M)
        if n == 0 or len(a) != n:
            raise ValueError("M and a must be non-empty and of equal length")
        if any(v < 0 for v in M) or not any(v > 0 for v in M):
            raise ValueError("M must be non-negative with at least one positive entry")
        if any(v == 0 for v in a):
            raise ValueError("every a_i must be non-zero")
        A = tuple(self.A) if self.A else tuple(Polynomial.zero(n) for _ in range(n))
        if len(A) != n:
            raise ValueError("need one higher-order polynomial per coordinate")
        for P in A:
            if P.n != n:
                raise ValueError("A_i must be polynomials in n variables")
            if P.constant_term() != 0:
                raise ValueError("A_i must vanish at the origin")
        degree = max([self.degree] + [P.degree for P in A])
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "degree", int(degree))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "_a", np.array(a, dtype=complex))
        object.__setattr__(self, "_M", np.array(M, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.M)

    @property
    def a_vec(self) -> np.ndarray:
        return self._a

    @property
    def M_vec(self) -> np.ndarray:
        return self._M

    @property
    def has_higher_order(self) -> bool:
        return any(len(P) for P in self.A)

    def aM(self) -> complex:
        return complex(np.dot(self._a, self._M))

    def higher(self, x) -> np.ndarray:
        """Stack of A_i(x) along the last axis."""
        x = np.asarray(x, dtype=complex)
        return np.stack([P(x) for P in self.A], axis=-1)

    def inverse_leading(self) -> "Germ":
        """Germ with leading coefficients -a, the leading part of f^{-1}."""
        return Germ(self.M, tuple(-v for v in self.a), radius=self.radius)


def canonical_order(g: Germ):
    """Permute coordinates so that those with M_i = 0 come last.

    Returns (germ, perm) with new coordinate k equal to old coordinate perm[k].
    """
    perm = [i for i in range(g.n) if g.M[i] > 0] + [i for i in range(g.n) if g.M[i] == 0]
    if perm == list(range(g.n)):
        return g, tuple(perm)
    inner = [g.A[i].permuted(perm) for i in perm]
    return (
        Germ(tuple(g.M[i] for i in perm), tuple(g.a[i] for i in perm), tuple(inner), g.degree, g.radius),
        tuple(perm),
    )


def normalize(g: Germ):
    """Rescale x -> alpha x so that <a, M> = -1.

    Only the first coordinate with M_i > 0 is rescaled, by the principal
    M_i-th root of -1/<a, M>.  Returns (normalized germ, alpha).
    """
    aM = g.aM()
    if aM == 0:
        raise DegenerateGerm("<a, M> = 0: the germ is outside the non-degenerate class")
    alpha = np.ones(g.n, dtype=complex)
    scale = float(np.dot(np.abs(g.a_vec), g.M_vec))
    if abs(aM + 1) <= 4 * np.finfo(float).eps * max(1.0, scale):
        return g, alpha
    target = -1.0 / aM
    k = next(i for i in range(g.n) if g.M[i] > 0)
    alpha[k] = principal_root(target, g.M[k])
    a_new = tuple(-v / aM for v in g.a)
    A_new = tuple(P.scaled(alpha, factor=target) for P in g.A)
    radius = g.radius / float(np.max(np.abs(alpha)))
    return Germ(g.M, a_new, A_new, g.degree, radius), alpha


def evaluate(g: Germ, x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    s = monomial(x, g.M_vec)[..., None]
    coef = g.a_vec + g.higher(x) if g.has_higher_order else g.a_vec
    return x * (1.0 + s * coef)


def jacobian(g: Germ, x) -> np.ndarray:
    """Complex Jacobian df_i/dx_k, shape (..., n, n)."""
    x = np.asarray(x, dtype=complex)
    n = g.n
    s = monomial(x, g.M_vec)
    coef = g.a_vec + g.higher(x) if g.has_higher_order else np.broadcast_to(g.a_vec, x.shape)
    ds = np.empty(x.shape, dtype=complex)
    for k in range(n):
        if g.M[k] == 0:
            ds[..., k] = 0
        else:
            e = g.M_vec.copy()
            e[k] -= 1
            ds[..., k] = g.M[k] * monomial(x, e)
    J = x[..., :, None] * ds[..., None, :] * coef[..., :, None]
    if g.has_higher_order:
        dA = np.stack([np.stack([P.partial(k)(x) for k in range(n)], axis=-1) for P in g.A], axis=-2)
        J = J + x[..., :, None] * s[..., None, None] * dA
    diag = 1.0 + s[..., None] * coef
    idx = np.arange(n)
    J[..., idx, idx] += diag
    return J


def evaluate_inverse(g: Germ, y, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Solve f(x) = y.

    Fixed-point sweeps x <- y / (1 + x^M (a + A(x))) seeded at the
    first-order inverse; a Newton step replaces a sweep whenever the
    residual stops shrinking.
    """
    y = np.asarray(y, dtype=complex)
    s = monomial(y, g.M_vec)[..., None]
    x = y * (1.0 - s * g.a_vec)
    prev = np.inf
    res = np.inf
    for _ in range(max_iter):
        r = evaluate(g, x) - y
        res = float(np.max(np.abs(r))) if r.size else 0.0
        if res <= tol:
            return x
        if res < 0.5 * prev:
            s = monomial(x, g.M_vec)[..., None]
            coef = g.a_vec + g.higher(x) if g.has_higher_order else g.a_vec
            with np.errstate(all="ignore"):
                x_new = y / (1.0 + s * coef)
        else:
            x_new = x - np.linalg.solve(jacobian(g, x), r[..., None])[..., 0]
        prev = res
        x = x_new
    raise NoConvergence(f"inverse did not converge, residual {res:.3e}", residual=res)


def power_image(g: Germ, x, e) -> np.ndarray:
    """prod_i f_i(x)^{e_i}: the image of the monomial x^e under one step."""
    x = np.asarray(x, dtype=complex)
    e = np.asarray(e, dtype=np.int64)
    if np.any(e < 0) and np.any(x[..., e < 0] == 0):
        raise ZeroCoordinate("negative exponent on a zero coordinate")
    return monomial(evaluate(g, x), e)


def infinitesimal_generator(g: Germ, x) -> np.ndarray:
    """The vector field x^M (a_1 x_1, ..., a_n x_n) that f approximates at time 1."""
    x = np.asarray(x, dtype=complex)
    return monomial(x, g.M_vec)[..., None] * g.a_vec * x


@dataclass
class OrbitRecord:
    points: np.ndarray
    escaped: bool = False
    escape_index: Optional[int] = None
    capture_index: Optional[int] = None
    capture_ell: Optional[int] = None

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValueError("an orbit holds at least its starting point")
        for idx in (self.escape_index, self.capture_index):
            if idx is not None and not 0 <= idx < len(self.points):
                raise ValueError("orbit index out of range")


def orbit(g: Germ, x, j_max: int, escape_radius: float, petal=None, lattice=None) -> OrbitRecord:
    """Forward orbit of a single point, stopping early on escape.

    With ``petal`` (a PetalSpec) the first index whose point lies in U is
    recorded as ``capture_index``.
    """
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    x = np.asarray(x, dtype=complex).copy()
    if petal is not None:
        from .domains import in_U
        from .lattice import lattice_data

        lattice = lattice or lattice_data(g.M)
    pts = [x]
    capture = None
    ell = None
    for j in range(j_max + 1):
        if j > 0:
            x = evaluate(g, x)
            pts.append(x)
        if np.max(np.abs(x)) > escape_radius:
            return OrbitRecord(np.array(pts), True, j, capture, ell)
        if petal is not None and capture is None:
            hit = in_U(x, g, petal, lattice)
            if hit is not None:
                capture, ell = j, hit
    return OrbitRecord(np.array(pts), False, None, capture, ell)


def germ_from_terms(M: Sequence[int], a: Sequence[complex], A_terms=None, radius=1.0) -> Germ:
    """Convenience constructor; ``A_terms[i]`` is a list of (exponent, coefficient)."""
    n = len(M)
    A_terms = A_terms or {}
    if not isinstance(A_terms, dict):
        A_terms = dict(enumerate(A_terms))
    A = tuple(Polynomial(n, A_terms.get(i, ())) for i in range(n))
    return Germ(tuple(M), tuple(a), A, radius=radius)


def principal_root(value: complex, k: int) -> complex:
    if k == 1:
        return complex(value)
    return cmath.exp(cmath.log(value) / k)
