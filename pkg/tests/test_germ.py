import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowerlab.errors import DegenerateGerm, NoConvergence, ZeroCoordinate
from flowerlab.germ import (
    Germ,
    Polynomial,
    canonical_order,
    evaluate,
    evaluate_inverse,
    germ_from_terms,
    infinitesimal_generator,
    jacobian,
    monomial,
    normalize,
    orbit,
    power_image,
)

ULP4 = 4 * np.finfo(float).eps


def test_evaluate_examples():
    g = germ_from_terms((1,), (-1,))
    assert evaluate(g, [0.1])[0] == pytest.approx(0.09)
    g2 = germ_from_terms((1, 1), (-0.5, -0.5))
    np.testing.assert_allclose(evaluate(g2, [0.1, 0.1]), [0.0995, 0.0995])
    assert np.all(evaluate(g2, [0, 0]) == 0)


def test_evaluate_with_higher_order_terms():
    g = germ_from_terms((1, 1), (-0.5, -0.5), {0: [((2, 0), 0.3)], 1: [((1, 1), -0.2j)]})
    x = np.array([0.1 + 0.05j, -0.07j])
    s = x[0] * x[1]
    want = [x[0] * (1 + s * (-0.5 + 0.3 * x[0] ** 2)), x[1] * (1 + s * (-0.5 - 0.2j * x[0] * x[1]))]
    np.testing.assert_allclose(evaluate(g, x), want, rtol=1e-15)


def test_germ_invariants():
    with pytest.raises(ValueError):
        Germ((1, 1), (0.0, -1.0))
    with pytest.raises(ValueError):
        Germ((0, 0), (-1.0, -1.0))
    with pytest.raises(ValueError):
        Germ((1,), (-1.0,), (Polynomial(1, [((0,), 1.0)]),))
    with pytest.raises(ValueError):
        Polynomial(2, [((1,), 1.0)])


def test_polynomial_merging_and_partial():
    P = Polynomial(2, [((1, 2), 1.0), ((1, 2), 2.0), ((0, 1), -1.0)])
    assert P.terms() == [((0, 1), -1.0), ((1, 2), 3.0)]
    assert P.degree == 3 and P.min_degree == 1
    dP = P.partial(1)
    x = np.array([0.3, -0.2])
    assert dP(x) == pytest.approx(-1 + 6 * 0.3 * -0.2)
    assert P.abs_bound(0.5) == pytest.approx(0.5 + 3 * 0.125)


def test_normalize_examples():
    g, alpha = normalize(germ_from_terms((1, 1), (-2, 1)))
    assert g.a == (-2, 1) and np.all(alpha == 1)
    g, alpha = normalize(germ_from_terms((1, 1), (-4, 2)))
    np.testing.assert_allclose(g.a, (-2, 1))
    np.testing.assert_allclose(alpha, (0.5, 1))
    g, alpha = normalize(germ_from_terms((1,), (3,)))
    assert g.a[0] == pytest.approx(-1)
    assert alpha[0] ** 1 == pytest.approx(-1 / 3)
    with pytest.raises(DegenerateGerm):
        normalize(germ_from_terms((1, 1), (1, -1)))


def test_normalize_conjugates_the_map():
    g0 = germ_from_terms((2, 1), (0.3 + 0.2j, 0.1), {0: [((1, 0), 0.5)], 1: [((0, 2), 0.25j)]})
    g, alpha = normalize(g0)
    y = np.array([0.01 + 0.02j, -0.03j])
    # f_new(y) = f_old(alpha y) / alpha
    np.testing.assert_allclose(evaluate(g, y), evaluate(g0, alpha * y) / alpha, rtol=1e-13)


complex_coef = st.complex_numbers(min_magnitude=0.1, max_magnitude=3, allow_nan=False, allow_infinity=False)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=4).filter(lambda M: any(M)), st.data())
def test_normalize_properties(M, data):
    a = data.draw(st.lists(complex_coef, min_size=len(M), max_size=len(M)))
    g0 = germ_from_terms(M, a)
    if abs(g0.aM()) < 1e-3:
        return
    g, alpha = normalize(g0)
    assert abs(g.aM() + 1) <= ULP4 * max(1.0, sum(abs(v) * m for v, m in zip(g.a, M)))
    assert abs(np.prod(alpha ** np.array(M)) + 1 / g0.aM()) <= 1e-12 * abs(1 / g0.aM())
    g2, alpha2 = normalize(g)
    assert np.all(alpha2 == 1)
    assert g2.a == g.a


@given(st.lists(st.complex_numbers(max_magnitude=1e-2, allow_nan=False), min_size=2, max_size=2))
def test_inverse_round_trip(xs):
    g = germ_from_terms((1, 2), (-0.2, -0.4), {0: [((1, 1), 0.5 - 0.1j)]})
    x = np.array(xs)
    y = evaluate(g, x)
    np.testing.assert_allclose(evaluate_inverse(g, y, tol=1e-15), x, atol=1e-14)
    np.testing.assert_allclose(evaluate(g, evaluate_inverse(g, y, tol=1e-15)), y, atol=1e-14)


def test_inverse_examples():
    g = germ_from_terms((1,), (-1,))
    assert evaluate_inverse(g, [0.09])[0] == pytest.approx(0.1, abs=1e-13)
    assert evaluate_inverse(g, [0.0])[0] == 0
    with pytest.raises(NoConvergence):
        evaluate_inverse(g, [0.3], max_iter=2)


def test_jacobian_matches_finite_differences():
    g = germ_from_terms((1, 2), (-0.2, -0.4), {0: [((1, 1), 0.5 - 0.1j)], 1: [((2, 0), 0.3)]})
    x = np.array([0.2 + 0.1j, -0.1 + 0.05j])
    J = jacobian(g, x)
    h = 1e-7
    for k in range(2):
        e = np.zeros(2, complex)
        e[k] = h
        fd = (evaluate(g, x + e) - evaluate(g, x - e)) / (2 * h)
        np.testing.assert_allclose(J[:, k], fd, atol=1e-8)


def test_power_image_and_generator():
    g = germ_from_terms((1,), (-1,))
    assert power_image(g, [0.1], [0]) == 1
    assert power_image(g, [0.1], [1]) == pytest.approx(0.09)
    g2 = germ_from_terms((1, 1), (-0.5, -0.5))
    x = np.array([0.1, 0.1])
    assert power_image(g2, x, [1, 1]) == pytest.approx(0.0995**2)
    with pytest.raises(ZeroCoordinate):
        power_image(g2, [0.0, 0.1], [-1, 1])
    np.testing.assert_allclose(infinitesimal_generator(g2, [0.1, 0.2]), [-0.001, -0.002])
    assert infinitesimal_generator(g, [0.1])[0] == pytest.approx(-0.01)
    assert np.all(infinitesimal_generator(g2, [0, 0]) == 0)


@given(st.lists(st.complex_numbers(min_magnitude=1e-4, max_magnitude=0.2, allow_nan=False), min_size=2, max_size=2))
def test_power_image_d_th_power(xs):
    # M = (2, 4): d = 2, m = (1, 2)
    g = germ_from_terms((2, 4), (-0.1, -0.2))
    x = np.array(xs)
    a = power_image(g, x, (1, 2)) ** 2
    b = power_image(g, x, (2, 4))
    assert abs(a - b) <= 8 * np.finfo(float).eps * abs(b)


def test_one_step_expansion_constant():
    g = germ_from_terms((1, 1), (-0.3, -0.7), {0: [((1, 0), 0.4)]})
    r = np.random.default_rng(1)
    X = (r.uniform(0, 0.05, (500, 2))) * np.exp(2j * np.pi * r.uniform(size=(500, 2)))
    m = (1, 1)
    lead = monomial(X, m) * (1 + (-1.0) * monomial(X, g.M))
    err = np.abs(power_image(g, X, m) - lead)
    scale = np.abs(monomial(X, m)) * np.abs(monomial(X, g.M)) * np.max(np.abs(X), axis=1)
    C1 = np.max(err / scale)
    assert np.isfinite(C1) and C1 < 10


def test_orbit_examples():
    g = germ_from_terms((1,), (-1,))
    rec = orbit(g, [0.0], 10, 1.0)
    assert not rec.escaped and np.all(rec.points == 0)
    rec = orbit(g, [0.1], 10_000, 1.0)
    assert not rec.escaped
    j = len(rec.points) - 1
    assert abs(j * rec.points[-1][0] - 1) < 2e-2
    g2 = germ_from_terms((1, 1), (-2, 1))
    rec = orbit(g2, [0.05, 0.05], 100_000, 0.1)
    assert rec.escaped and rec.escape_index is not None
    with pytest.raises(ValueError):
        orbit(g, [0.1], 0, 1.0)


def test_canonical_order_moves_zero_exponents_last():
    g = germ_from_terms((0, 2), (-0.5, -0.5), {0: [((1, 1), 1.0)]})
    h, perm = canonical_order(g)
    assert h.M == (2, 0) and perm == (1, 0)
    x = np.array([0.1, 0.2j])
    np.testing.assert_allclose(evaluate(h, x[list(perm)]), evaluate(g, x)[list(perm)])
