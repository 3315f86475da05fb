import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowerlab.domains import (
    CalibrationConfig,
    FittedConstants,
    PetalSpec,
    SectorSpec,
    branch_log_xm,
    branch_log_xm_arr,
    calibrate_petal,
    in_C,
    in_C_tilde,
    in_D,
    in_D_arr,
    in_S,
    in_S_tilde,
    in_U,
    in_U_arr,
    in_V,
    sample_D,
    sample_U,
    sample_V,
    sector_power,
    slice_radius,
)
from flowerlab.errors import CalibrationFailed, OutsidePetalBranch, PreconditionViolated, ZeroCoordinate
from flowerlab.germ import evaluate, germ_from_terms, monomial
from flowerlab.lattice import lattice_data


def test_sector_examples():
    s = SectorSpec(0.1, math.pi / 4)
    assert in_C(0.01, s)
    assert not in_C(-0.01, s)
    c = 0.05 * np.exp(1j * math.pi / 4)
    assert in_C_tilde(c, s)
    # just past the ray arg = theta: only the disc contains it
    c2 = 0.05 * np.exp(1j * (math.pi / 4 + 1e-9))
    assert in_C_tilde(c2, s) and not in_C(c2, s)
    assert not in_C(0, s)
    with pytest.raises(ValueError):
        SectorSpec(0.1, math.pi / 2)
    with pytest.raises(ValueError):
        SectorSpec(0.0)


def test_S_examples():
    s = SectorSpec(0.1)
    assert in_S(0.01, -1, 1, s) == 0
    assert in_S(-0.01, 1, 1, s) == 0
    assert in_S(0.01 * np.exp(2j * math.pi / 3), -1, 3, s) == 1
    assert in_S(-0.01, -1, 1, s) is None
    assert in_S_tilde(0.01j + 0.01, -1, 1, s) == 0


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_S_tilde_component_count(p):
    s = SectorSpec(0.5)
    r = np.linspace(0.01, 0.7, 40)
    t = np.linspace(-math.pi, math.pi, 721)
    Z = (r[:, None] * np.exp(1j * t[None, :])).ravel()
    comps = {in_S_tilde(z, -1, p, s) for z in Z} - {None}
    assert comps == set(range(p))


def test_branch_log_examples():
    lat1 = lattice_data((1,))
    assert branch_log_xm(np.array([0.1]), 0, lat1) == pytest.approx(math.log(0.1))
    lat2 = lattice_data((1, 1))
    assert branch_log_xm(np.array([0.1, 0.1]), 0, lat2) == pytest.approx(math.log(0.01))
    lat3 = lattice_data((3,))
    x = np.array([0.01 * np.exp(2j * math.pi / 3)])
    assert branch_log_xm(x, 1, lat3) == pytest.approx(math.log(0.01) + 2j * math.pi / 3)
    with pytest.raises(OutsidePetalBranch):
        branch_log_xm(x, 0, lat3)


def test_sector_power_examples():
    lat = lattice_data((1, 1))
    x = np.array([0.1, 0.1])
    assert sector_power(x, 0, 0, lat) == 1
    assert abs(sector_power(x, 1, 0, lat) - 0.01) <= 2 * np.finfo(float).eps * 0.01
    assert sector_power(x, -1, 0, lat) == pytest.approx(100)


def test_U_examples():
    g = germ_from_terms((1, 1), (-0.5, -0.5))
    lat = lattice_data(g.M)
    spec = PetalSpec(SectorSpec(0.1), 0.25, 0.5, 0.25, 1.0)
    assert in_U(np.array([0.0, 0.0]), g, spec, lat) is None
    assert in_U(np.array([0.1, 0.1]), g, spec, lat) == 0
    assert in_U(np.array([0.5, 0.02]), g, spec, lat) is None


def test_D_examples():
    g1 = germ_from_terms((1,), (-1,))
    spec = PetalSpec(SectorSpec(0.1), 0.5, 0.1, 0.1, 1.0)
    assert in_D(np.array([0.05]), g1, spec, lattice_data((1,)), ell=0)
    g = germ_from_terms((1, 1), (-0.5, -0.5))
    lat = lattice_data(g.M)
    assert not in_D(np.array([0.0, 0.0]), g, spec, lat)
    assert in_D(np.array([0.09, 0.09]), g, spec, lat)
    assert in_D(np.array([-0.09, 0.09]), g, spec, lat, backward=True)


def test_V_examples():
    g1 = germ_from_terms((1,), (-1,))
    lat1 = lattice_data((1,))
    spec = PetalSpec(SectorSpec(0.5), 0.5, 0.5, 0.5, 0.25)
    assert not in_V(1.5, np.zeros(0), g1, spec, lat1)  # |z| <= 1/eps
    assert not in_V(15.0, np.zeros(0), g1, spec, lat1)  # sqrt(15) < 4
    assert in_V(17.0, np.zeros(0), g1, spec, lat1)
    g = germ_from_terms((1, 1), (-0.5, -0.5))
    lat = lattice_data(g.M)
    s2 = PetalSpec(SectorSpec(0.5), 0.25, 0.5, 0.5, 1e-2)
    assert not in_V(1e4, np.array([1.0]), g, s2, lat)
    assert not in_V(1e4, np.array([1e-2]), g, s2, lat)
    big = PetalSpec(SectorSpec(0.5), 0.25, 0.5, 0.5, 2.0)
    assert in_V(1e4, np.array([1.0]), g, big, lat)
    with pytest.raises(ZeroCoordinate):
        in_V(1e4, np.array([0.0]), g, big, lat)
    assert slice_radius(np.array([0.0]), g, big, lat) == math.inf


def test_petal_spec_validation():
    with pytest.raises(ValueError):
        PetalSpec(SectorSpec(0.1), 0.25, 0.1, 0.2, 1.0)
    with pytest.raises(ValueError):
        FittedConstants(eta=-1.0)
    spec = PetalSpec(SectorSpec(0.1), 0.25, 0.1, 0.1, 1.0)
    d = spec.to_dict()
    assert d["constants"]["eta"] == {"value": None, "fitted": False}
    g = germ_from_terms((1, 1), (-0.1, -0.9))
    with pytest.raises(PreconditionViolated):
        spec.check_germ(g, lattice_data(g.M))


def test_calibration_one_dim():
    g = germ_from_terms((1,), (-1,))
    spec = calibrate_petal(g, lattice_data(g.M))
    assert spec.gamma == 0.5 and spec.epsilon >= 1e-3
    assert spec.constants.eta > 0


def test_calibration_rejects_theorem_B_germ():
    g = germ_from_terms((1, 1), (-2, 1))
    with pytest.raises(PreconditionViolated):
        calibrate_petal(g, lattice_data(g.M))


def test_calibration_reports_witness():
    g = germ_from_terms((1, 1), (-0.5, -0.5), {0: [((1, 0), 40.0)]})
    cfg = CalibrationConfig(samples=500, eps_floor=1e-3)
    with pytest.raises(CalibrationFailed) as ei:
        calibrate_petal(g, lattice_data(g.M), cfg)
    assert ei.value.witness is not None


def test_worked_invariance_and_decay(worked):
    g, lat, spec, _ = worked
    assert spec.constants.eta > 0
    X = sample_U(g, lat, spec, 10_000, 11)
    assert np.all(in_U_arr(X, g, spec, lat) == 0)
    FX = evaluate(g, X)
    assert np.all(in_U_arr(FX, g, spec, lat) == 0)
    rb = np.abs(X) / (np.abs(monomial(X, lat.m)) ** spec.gamma)[:, None]
    ra = np.abs(FX) / (np.abs(monomial(FX, lat.m)) ** spec.gamma)[:, None]
    s = np.abs(monomial(X, g.M_vec))
    assert np.all(ra <= rb * (1 - spec.constants.eta * s)[:, None])


def test_D_decay(worked):
    g, lat, spec, _ = worked
    X = sample_D(g, lat, spec.epsilon, spec.theta, spec.delta, 5000, 3)
    assert np.all(in_D_arr(X, g, spec, lat))
    FX = evaluate(g, X)
    s = np.abs(monomial(X, g.M_vec))
    assert np.all(np.abs(FX) < np.abs(X) * (1 - spec.constants.rho * s)[:, None])


def test_branch_consistency_along_orbits(skew):
    g, lat, spec = skew
    X = sample_U(g, lat, spec, 300, 5)
    L = branch_log_xm_arr(X, 0, lat)
    for _ in range(200):
        X = evaluate(g, X)
        L2 = branch_log_xm_arr(X, 0, lat)
        assert np.all(np.abs(L2.imag - L.imag) < 1.0)
        L = L2


def test_sample_V_lands_in_V(worked):
    g, lat, spec, _ = worked
    z, W, x = sample_V(g, lat, spec, 500, 2)
    assert all(in_V(z[k], W[k], g, spec, lat) for k in range(500))
    assert np.all(in_U_arr(x, g, spec, lat) == 0)


@given(st.floats(0.0, 1.0), st.floats(-1.0, 1.0), st.integers(1, 4))
def test_d_components_for_shadow(u, v, d):
    # x^m on the ray of component l maps into S_{-1} with index l
    lat = lattice_data((d,))
    l = int(u * d) % d
    x = np.array([0.1 * np.exp(1j * (2 * math.pi * l / d + 0.5 * v * (math.pi / 4) / d))])
    assert in_S(x[0], -1, d, SectorSpec(0.5)) == l
    assert branch_log_xm(x, l, lat).imag == pytest.approx(np.angle(x[0]) % (2 * math.pi) if l else np.angle(x[0]))
