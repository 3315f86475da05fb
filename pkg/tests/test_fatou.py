import dataclasses
import math

import numpy as np
import pytest

from flowerlab.domains import in_V, sample_U, sample_V, slice_radius
from flowerlab.errors import EmptySlice
from flowerlab.fatou import (
    ChartPoint,
    chart_base_point,
    check_union_translates,
    fatou_beta,
    fatou_beta_batch,
    ftilde,
    ftilde_batch,
    htilde_derivative_check,
    in_slice,
    make_chart,
    model_forward_batch,
    model_inverse,
    model_inverse_batch,
    phi_forward,
    phi_forward_batch,
    phi_inverse,
    phi_inverse_batch,
)


def test_phi_forward_examples(one_dim, worked):
    g1, lat1, s1, _ = one_dim
    cp = phi_forward(np.array([0.01]), 0, g1, lat1, s1)
    assert cp.z == pytest.approx(100) and cp.w == ()
    g, lat, spec, _ = worked
    cp = phi_forward(np.array([0.01, 0.01]), 0, g, lat, spec)
    assert cp.z == pytest.approx(1e4) and cp.w[0] == pytest.approx(1)


def test_model_inverse_examples(one_dim, worked):
    g1, lat1, _, _ = one_dim
    assert model_inverse(ChartPoint(250.0), g1, lat1, 0)[0] == pytest.approx(1 / 250)
    g, lat, _, _ = worked
    z, w = 400.0 + 30j, 1.3 - 0.2j
    x = model_inverse(ChartPoint(z, (w,)), g, lat, 0)
    np.testing.assert_allclose(x, [z**-0.5 / w, z**-0.5 * w], rtol=1e-14)


def test_model_roundtrip(worked):
    g, lat, spec, _ = worked
    z, W, _ = sample_V(g, lat, spec, 1000, 1)
    zm, Wm = model_forward_batch(model_inverse_batch(z, W, g, lat, 0), g, lat, 0)
    assert np.max(np.abs(zm - z) / np.abs(z)) <= 1e-12
    assert np.max(np.abs(Wm - W) / np.maximum(1, np.abs(W))) <= 1e-12


def test_phi_inverse_one_dim_is_model(one_dim):
    g, lat, spec, _ = one_dim
    cp = ChartPoint(300.0 + 40j)
    assert np.array_equal(phi_inverse(cp, g, lat, spec, 0), model_inverse(cp, g, lat, 0))


@pytest.mark.parametrize("fixture", ["worked", "skew"])
def test_chart_roundtrip(request, fixture):
    g, lat, spec = request.getfixturevalue(fixture)[:3]
    tol = 1e-10
    z, W, X = sample_V(g, lat, spec, 1000, 4)
    Xr = phi_inverse_batch(z, W, g, lat, spec, 0, tol)
    z2, W2, _ = phi_forward_batch(Xr, 0, g, lat, spec, tol)
    assert np.max(np.abs(z2 - z) / np.abs(z)) <= 10 * tol
    assert np.max(np.abs(W2 - W) / np.maximum(1, np.abs(W))) <= 10 * tol


def test_uniqueness_probe(skew):
    g, lat, spec = skew
    z, W, _ = sample_V(g, lat, spec, 50, 6)
    tol = 1e-11
    X1 = phi_inverse_batch(z, W, g, lat, spec, 0, tol)
    X2 = phi_inverse_batch(z, W, g, lat, spec, 0, tol, seed_W=W * 1.2)
    assert np.max(np.abs(X1 - X2) / np.abs(X1)) <= 10 * tol


def test_ftilde_one_dim_series(one_dim):
    g, lat, spec, _ = one_dim
    z = 1e3 * np.exp(1j * np.linspace(-0.5, 0.5, 11))
    F = ftilde_batch(z, np.zeros((len(z), 0)), g, lat, spec, 0)
    assert np.max(np.abs(F - z - 1 - 1 / z) * np.abs(z) ** 2) < 2


@pytest.mark.parametrize("fixture", ["worked", "skew"])
def test_growth_and_V_invariance(request, fixture):
    g, lat, spec = request.getfixturevalue(fixture)[:3]
    z, W, _ = sample_V(g, lat, spec, 500, 9)
    F = ftilde_batch(z, W, g, lat, spec, 0)
    assert np.all(np.abs(F) > np.abs(z) + 0.5)
    assert all(in_V(F[k], W[k], g, spec, lat) for k in range(len(z)))


def test_ftilde_outside_V(worked):
    g, lat, spec, _ = worked
    from flowerlab.errors import OutsideV

    with pytest.raises(OutsideV):
        ftilde(ChartPoint(1.0, (1.0,)), g, lat, spec, 0)


def test_htilde_synthetic_translation(worked):
    g, lat, spec, _ = worked
    z = 1e3 * np.exp(1j * np.linspace(-0.5, 0.5, 20))
    fit = htilde_derivative_check(g, lat, spec, sample=(z, np.ones((20, 1))), ftilde_fn=lambda zz: zz + 1)
    assert fit.K_prime <= 1e-9


def test_htilde_one_dim_exponent(one_dim):
    g, lat, spec, _ = one_dim
    fit = htilde_derivative_check(g, lat, spec, size=200, seed=1)
    assert fit.exponent == pytest.approx(-2, abs=0.05)
    assert fit.exponent <= -1 - spec.gamma / lat.d
    assert 0.5 * fit.K_prime_half_step <= fit.K_prime <= 2 * fit.K_prime_half_step


def test_beta_synthetic_translation(worked):
    g, lat, spec, _ = worked
    chart = make_chart([1.0], 0, g, lat, spec, ftilde_fn=lambda zz: zz + 1)
    z = np.array([500.0, 800 + 300j])
    b, _ = fatou_beta_batch(z, chart, g, lat, spec)
    np.testing.assert_allclose(b, z - chart.base_point_z, atol=1e-12)


def test_base_point_examples(one_dim, worked):
    g, lat, spec, _ = one_dim
    # with r large the slice is cut only by |z| > 1/epsilon
    spec = dataclasses.replace(spec, r=1e3)
    R = slice_radius(np.zeros(0), g, spec, lat)
    assert R == pytest.approx(1 / spec.epsilon)
    assert chart_base_point(np.zeros(0), g, lat, spec) == pytest.approx(2 * math.sqrt(2) / spec.epsilon)
    g2, lat2, spec2, _ = worked
    with pytest.raises(EmptySlice):
        chart_base_point(np.array([0.0]), g2, lat2, spec2)


def test_segment_visibility(worked):
    g, lat, spec, _ = worked
    w = np.array([1.0 + 0.2j])
    chart = make_chart(w, 0, g, lat, spec)
    rng = np.random.default_rng(0)
    R = chart.R_w
    r = R * np.exp(rng.uniform(0, 4, 1000))
    t = rng.uniform(-spec.theta, spec.theta, 1000) * 0.999
    z = r * np.exp(1j * t)
    s = np.linspace(0, 1, 50)
    seg = z[:, None] * (1 - s) + chart.base_point_z * s
    assert np.all(in_slice(seg, chart, spec))


@pytest.mark.parametrize("fixture", ["worked", "skew"])
def test_conjugacy_and_ray(request, fixture):
    g, lat, spec = request.getfixturevalue(fixture)[:3]
    z, W, _ = sample_V(g, lat, spec, 40, 12)
    w = W[0]
    chart = make_chart(w, 0, g, lat, spec, tol=1e-9)
    zz = chart.base_point_z * (1.5 + np.linspace(0, 3, 20)) * np.exp(1j * np.linspace(-0.5, 0.5, 20) * spec.theta)
    Wk = np.repeat(w[None, :], len(zz), axis=0)
    b0, e0 = fatou_beta_batch(zz, chart, g, lat, spec)
    b1, e1 = fatou_beta_batch(ftilde_batch(zz, Wk, g, lat, spec, 0), chart, g, lat, spec)
    assert np.all(np.abs(b1 - b0 - 1) <= 2 * chart.beta_error)
    dev = [abs(fatou_beta(r, chart, g, lat, spec) / r - 1) for r in (1e3, 1e4, 1e5) if in_slice(r, chart, spec)]
    assert len(dev) >= 2 and all(x > y for x, y in zip(dev, dev[1:]))


def test_base_point_independence(skew):
    g, lat, spec = skew
    _, W, _ = sample_V(g, lat, spec, 5, 3)
    c1 = make_chart(W[0], 0, g, lat, spec, tol=1e-9)
    c2 = make_chart(W[0], 0, g, lat, spec, tol=1e-9, base_point=2 * c1.base_point_z)
    zz = c1.base_point_z * (1.2 + np.linspace(0, 5, 30)) * np.exp(0.4j * np.linspace(-1, 1, 30) * spec.theta)
    d = fatou_beta_batch(zz, c1, g, lat, spec)[0] - fatou_beta_batch(zz, c2, g, lat, spec)[0]
    assert np.std(d) <= c1.beta_error + c2.beta_error


def test_union_translates_synthetic(worked):
    g, lat, spec, _ = worked
    chart = make_chart([1.0], 0, g, lat, spec, ftilde_fn=lambda zz: zz + 1)
    p = chart.base_point_z
    rows = check_union_translates(chart, [50.0, 0.0, -100.0], g, lat, spec)
    assert rows[0]["j"] == 0 and rows[0]["z"] == pytest.approx(50 + p)
    assert all(r["reached"] for r in rows)


def test_union_translates_germ(skew):
    g, lat, spec = skew
    _, W, _ = sample_V(g, lat, spec, 3, 5)
    chart = make_chart(W[0], 0, g, lat, spec, tol=1e-9)
    rows = check_union_translates(chart, [0.0, -100.0, 30j], g, lat, spec, tol=1e-7)
    assert rows[1]["j"] > rows[0]["j"]
    for r in rows:
        b = fatou_beta(r["z"], chart, g, lat, spec)
        assert abs(b - (r["target"] + r["j"])) <= 1e-7 + chart.beta_error
