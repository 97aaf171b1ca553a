from dataclasses import replace
import math

import numpy as np
import pytest

import reference_values as ref
from bosecorr.errors import DomainError, InvalidArgument, NoConvergence
from bosecorr.excitations import (ExcitationSpec, SolvedState, aux_derivative_offgrid,
                                  evaluate_aux_offgrid, refine_roots, solve_excited_state)
from bosecorr.nlie import SolverConfig
from bosecorr.numerics import build_grid
from bosecorr.thermo import ModelParams, solve_dressed_energy


@pytest.fixture(scope="module")
def density_state():
    return solve_excited_state(ModelParams(2.0, 1.0, 1.0), ExcitationSpec("density"))


def test_spec_validation():
    with pytest.raises(InvalidArgument):
        ExcitationSpec("density", r=0)
    with pytest.raises(InvalidArgument):
        ExcitationSpec("magnetic")
    with pytest.raises(InvalidArgument):
        ExcitationSpec("density", phi=0.2)
    with pytest.raises(InvalidArgument):
        ExcitationSpec("field", branches=(0, 1))
    with pytest.raises(InvalidArgument):
        ExcitationSpec("field", contour_mode="curved")
    assert ExcitationSpec("density").branches == (0, -1)
    assert ExcitationSpec("field", r=1).branches == (0, 0, -1)
    assert ExcitationSpec("genfunc").r == 0


def test_hard_core_field_negative_mu():
    T = 0.5
    s = solve_excited_state(ModelParams(math.inf, -1.0, T), ExcitationSpec("field"))
    assert abs(s.roots.k0 - 1j) < 1e-12
    k = s.grid.nodes
    assert np.max(np.abs(s.aux.values - (k * k + 1 + 1j * math.pi * T))) < 1e-12


def test_hard_core_field_positive_mu():
    s = solve_excited_state(ModelParams(math.inf, 1.0, 0.5), ExcitationSpec("field"))
    assert abs(s.roots.k0 - 1.0) < 1e-12


def test_density_roots_match_oracle(density_state):
    s = density_state
    assert abs(s.roots.k_plus[0] - ref.DENSITY_K_PLUS) < 1e-7
    assert abs(s.roots.k_minus[0] - ref.DENSITY_K_PLUS.conjugate()) < 1e-7


def test_residuals_within_tolerance(density_state):
    cfg = SolverConfig()
    assert density_state.residuals["function"] <= cfg.tol
    assert density_state.residuals["roots"] <= 1e-10


def test_resubstitution(density_state):
    # the stored iterate reproduces itself up to the function residual
    s = density_state
    k = s.grid.nodes
    again = evaluate_aux_offgrid(s, k)
    assert np.max(np.abs(again - s.aux.values)) <= SolverConfig().tol
    tight = solve_excited_state(s.params, s.spec, SolverConfig(tol=1e-13))
    again = evaluate_aux_offgrid(tight, k)
    assert np.max(np.abs(again - tight.aux.values) / np.maximum(1, np.abs(tight.aux.values))) < 1e-12


def test_finer_grid(density_state):
    s = density_state
    g = s.grid
    fine = solve_excited_state(s.params, s.spec, grid=build_grid(g.half_width, 2 * g.points))
    assert fine.residuals["function"] < 10 * max(s.residuals["function"], SolverConfig().tol)
    assert abs(fine.roots.k_plus[0] - s.roots.k_plus[0]) < 1e-9


def test_hard_core_offgrid_is_closed_form():
    T = 0.5
    s = solve_excited_state(ModelParams(math.inf, -1.0, T), ExcitationSpec("field"))
    z = np.array([0.3 + 0.2j, -2.0 - 0.7j, 5.0])
    assert np.max(np.abs(evaluate_aux_offgrid(s, z) - (z * z + 1 + 1j * math.pi * T))) < 1e-12


def test_offgrid_derivative(density_state):
    s = density_state
    z = 0.4 + 0.3j
    exact = aux_derivative_offgrid(s, z)
    errs = []
    for h in (1e-2, 5e-3):
        fd = (evaluate_aux_offgrid(s, z + h) - evaluate_aux_offgrid(s, z - h)) / (2 * h)
        errs.append(abs(fd - exact))
    assert errs[1] < errs[0] / 3.5 and errs[0] < 1e-3


def test_offgrid_strip(density_state):
    with pytest.raises(DomainError):
        evaluate_aux_offgrid(density_state, 0.1 + 2.5j)


def test_refine_exact_roots_unchanged(density_state):
    once = refine_roots(density_state)
    assert abs(once.roots.k_plus[0] - density_state.roots.k_plus[0]) < 1e-11
    twice = refine_roots(once)
    assert abs(twice.roots.k_plus[0] - once.roots.k_plus[0]) < 1e-14
    assert abs(twice.roots.k_minus[0] - once.roots.k_minus[0]) < 1e-14


def _with_roots(state, values, **cfg):
    prob = state.problem.clone()
    for r, v in zip(prob.roots, values):
        r.value = complex(v)
    if cfg:
        prob.cfg = replace(prob.cfg, **cfg)
    return SolvedState(state.spec, state.params, state.roots, state.aux, state.logfn,
                       state.residuals, state.mode, prob)


def test_refine_hard_core_from_nearby_seed():
    s = solve_excited_state(ModelParams(math.inf, -1.0, 0.5), ExcitationSpec("field"))
    out = refine_roots(_with_roots(s, [0.9j], max_newton=5))
    assert abs(out.roots.k0 - 1j) < 1e-12


def test_refine_recovers_perturbed_roots(density_state):
    s = density_state
    kp = s.roots.k_plus[0]
    out = _with_roots(s, [kp + 0.01 + 0.005j, kp.conjugate() - 0.007j])
    out = refine_roots(out)
    assert out.residuals["roots"] < 1e-12
    assert abs(out.roots.k_plus[0] - ref.DENSITY_K_PLUS) < 1e-10
    assert abs(out.roots.k_minus[0] - ref.DENSITY_K_PLUS.conjugate()) < 1e-10


@pytest.mark.parametrize("mu,T", [(1.0, 0.3), (-0.5, 0.5), (0.0, 1.0)])
def test_conjugation_symmetry(mu, T):
    s = solve_excited_state(ModelParams(2.0, mu, T), ExcitationSpec("density"))
    kp, km = s.roots.k_plus[0], s.roots.k_minus[0]
    assert abs(km - kp.conjugate()) < 1e-8
    z = 0.7 + 0.4j
    a = evaluate_aux_offgrid(s, z)
    b = evaluate_aux_offgrid(s, z.conjugate())
    assert abs(b - a.conjugate()) < 1e-8


def test_oscillating_branch_parity():
    # branches (-1, -1) are exchanged by k -> -k, which maps the pair onto itself
    s = solve_excited_state(ModelParams(2.0, 1.0, 0.2), ExcitationSpec("density", branches=(-1, -1)))
    kp, km = s.roots.k_plus[0], s.roots.k_minus[0]
    assert abs(km + kp) < 1e-8


@pytest.mark.parametrize("phi", [0.3, -0.8])
def test_genfunc_is_shifted_dressed_energy(phi):
    p = ModelParams(2.0, 1.0, 0.5)
    s = solve_excited_state(p, ExcitationSpec("genfunc", phi=phi))
    de = solve_dressed_energy(ModelParams(2.0, 1.0 + phi * 0.5, 0.5), grid=s.grid)
    assert np.max(np.abs(s.aux.values - de.eps.values)) <= SolverConfig().tol


def test_density_log_tails(density_state):
    assert density_state.logfn.tail_minus == 0 and density_state.logfn.tail_plus == 0


def test_field_straight_contour_tails():
    s = solve_excited_state(ModelParams(2.0, 1.0, 0.05), ExcitationSpec("field"))
    assert s.mode == "straight"
    assert s.roots.k0.imag < 0
    assert s.logfn.tail_minus == 0
    assert s.logfn.tail_plus == pytest.approx(-2j * math.pi, abs=1e-12)


def test_root_outside_strip_refused():
    with pytest.raises(DomainError):
        solve_excited_state(ModelParams(2.0, 1.0, 1.0),
                            ExcitationSpec("density", seeds=(0.1 + 2.5j, 0.1 - 2.5j)))


def test_duplicate_branches_fail():
    with pytest.raises(NoConvergence):
        solve_excited_state(ModelParams(2.0, 1.0, 1.0), ExcitationSpec("density", r=2, branches=(0, 0, -1, -1)))
