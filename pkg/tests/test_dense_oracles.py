"""The frozen reference values come out of the dense solvers, and the dense
solvers are converged in their own discretization."""
import math

import pytest

import dense_oracles as do
import reference_values as ref


def test_yang_yang_oracle():
    a = do.yang_yang(2, 1, 1)
    b = do.yang_yang(2, 1, 1, n=4001)
    assert a["phi"] == pytest.approx(ref.YY_PHI, abs=1e-13)
    assert a["at"](0.0)[0].real == pytest.approx(ref.YY_EPS0, abs=1e-13)
    assert abs(a["phi"] - b["phi"]) < 1e-12


def test_yang_yang_oracle_hard_core_limit():
    # with c huge the kernel is negligible and eps = k^2 - mu
    a = do.yang_yang(1e9, 1, 1)
    assert abs(a["at"](0.7)[0] - (0.49 - 1)) < 1e-8


def test_density_oracle():
    d = do.density_state(2, 1, 1, 0.05 + 1.1j)
    assert abs(d["k_plus"] - ref.DENSITY_K_PLUS) < 1e-12
    assert d["inv_xi"].real == pytest.approx(ref.DENSITY_INV_XI, abs=1e-12)
    fine = do.density_state(2, 1, 1, 0.05 + 1.1j, n=3201)
    assert abs(fine["inv_xi"] - d["inv_xi"]) < 1e-11


def test_genfunc_oracle():
    val = do.yang_yang(2, 1.3, 1)["phi"] - do.yang_yang(2, 1, 1)["phi"]
    assert val == pytest.approx(ref.GENFUNC_INV_XI, abs=1e-13)


def test_fermi_boundary_oracle():
    assert do.fermi_boundary(2, 1) == pytest.approx(ref.Q_BAR, abs=1e-13)
    assert abs(do.fermi_boundary(2, 1, order=384) - ref.Q_BAR) < 1e-12


def test_tonks_trapezoid():
    assert do.tonks_field_trapezoid(-1, 1) == pytest.approx(ref.TONKS_FIELD_M1_1, abs=1e-12)


def test_xxz_oracle():
    a = do.xxz_largest(2.5, 0.5, 0.01, 0.01)
    assert a["log_lambda"] == pytest.approx(ref.XXZ_LOG_LAMBDA, abs=1e-11)
    wider = do.xxz_largest(2.5, 0.5, 0.01, 0.01, lam=35.0, panels=600)
    assert abs(wider["log_lambda"] - a["log_lambda"]) < 1e-11


def test_xxz_oracle_free_fermion_point():
    # at eta = pi/2 the kernel vanishes and log Lambda is one quadrature
    T, h = 0.3, 0.2
    a = do.xxz_largest(math.pi / 2, 0.5, h, T, lam=25.0, panels=200)
    m = do.Xxz(math.pi / 2, 0.5, h, T)
    x, w = do.gl_panels(-25, 25, 200)
    import numpy as np
    direct = h / (2 * T) + float(np.sum(w * m.dp0(x) * np.logaddexp(0, -m.e0(x) / T))) / (2 * math.pi)
    direct += 2 * math.log1p(math.exp(-h / T)) * (math.pi / 2 - m.p0(25.0)) / (2 * math.pi)
    assert abs(a["log_lambda"] - direct) < 1e-12


def test_xxz_density_oracle():
    d = do.xxz_density(2.5, 0.5, 0.01, 0.01, 2.2798494174 + 0.3153167364j)
    assert abs(d["k_plus"] - ref.XXZ_DENSITY_K_PLUS) < 1e-11
    assert d["inv_xi"].real == pytest.approx(ref.XXZ_DENSITY_INV_XI, abs=1e-12)
