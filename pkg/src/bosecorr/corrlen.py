"""Inverse correlation lengths from ratios of the leading and subleading eigenvalues."""
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import GridMismatch, InvalidArgument, NoConvergence
from .excitations import OSCILLATING_DENSITY_BRANCHES, ExcitationSpec, solve_excited_state
from .nlie import SolverConfig
from .thermo import ModelParams, solve_dressed_energy


@dataclass(frozen=True)
class InverseCorrLen:
    """1/xi = log(Lambda_0/Lambda_state); Re is the decay rate, Im the oscillation wavenumber."""
    value: complex
    sector: str
    roots: object
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def decay(self):
        return self.value.real

    @property
    def wavenumber(self):
        return self.value.imag


def log_eigenvalue(problem, L):
    """log of the transfer-matrix eigenvalue: root terms plus the log integral."""
    return problem.root_part() + problem.log_integral(L)


def _assemble(state, de, sector):
    if state.spec.sector != sector:
        raise InvalidArgument(f"expected a {sector} state, got {state.spec.sector}")
    if de.grid != state.grid:
        raise GridMismatch("state and dressed energy live on different grids")
    if de.params != state.params or de.mu_shift != 0.0:
        raise InvalidArgument("dressed energy belongs to different parameters")
    ref = log_eigenvalue(de.problem, de.logfn)
    exc_int = state.problem.log_integral(state.logfn)
    root = -complex(state.problem.root_part())
    integral = complex(ref - exc_int)
    diag = {"integral": integral, "root": root, "residuals": dict(state.residuals),
            "mode": state.mode, "grid_points": state.grid.points}
    value = integral + root
    diag["decaying"] = value.real > 0
    return InverseCorrLen(value, sector, state.roots, diag)


def inverse_corrlen_density(state, de):
    """-(1/2pi) int log[(1+e^{-u/T})/(1+e^{-eps/T})] dk - i sum k+ + i sum k-."""
    return _assemble(state, de, "density")


def inverse_corrlen_genfunc(state, de):
    """Same assembly as the density sector, with the twisted auxiliary function."""
    return _assemble(state, de, "genfunc")


def inverse_corrlen_field(state, de):
    """Field-sector 1/xi including -i k0; on the straight contour that term is carried
    by the -2 pi i tail of the log and does not appear separately."""
    if state.mode == "analytic":
        if de.grid != state.grid:
            raise GridMismatch("state and dressed energy live on different grids")
        p = state.params
        value = complex(tonks_field_value(p.mu, p.T))
        diag = {"integral": value, "root": 0j, "residuals": dict(state.residuals),
                "mode": state.mode, "grid_points": state.grid.points, "decaying": value.real > 0}
        return InverseCorrLen(value, "field", state.roots, diag)
    return _assemble(state, de, "field")


_ASSEMBLERS = {"density": inverse_corrlen_density, "field": inverse_corrlen_field,
               "genfunc": inverse_corrlen_genfunc}


def inverse_corrlen(params, spec, cfg=None, state=None):
    """Solve the sector (unless a state is given) and assemble 1/xi against the
    dressed energy on the same grid."""
    cfg = cfg or SolverConfig()
    if state is None:
        state = solve_excited_state(params, spec, cfg)
    de = solve_dressed_energy(params, cfg, grid=state.grid)
    return _ASSEMBLERS[spec.sector](state, de)


def leading_corrlen(params, sector, cfg=None):
    """Leading term of a sector: the oscillating r = 1 pair (density) or r = 0 (field, genfunc)."""
    if sector == "density":
        return inverse_corrlen(params, ExcitationSpec(sector, branches=OSCILLATING_DENSITY_BRANCHES), cfg)
    return inverse_corrlen(params, ExcitationSpec(sector), cfg)


def corrlen_sweep(c, mu, temps, spec, cfg=None, chunk=8):
    """1/xi along a temperature list, seeding each point with the previous roots.

    Continuation restarts every `chunk` points so that chunks can be computed
    independently with identical results.
    """
    out = []
    for i0 in range(0, len(temps), chunk):
        out.extend(_sweep_chunk(c, mu, temps[i0:i0 + chunk], spec, cfg))
    return out


def _sweep_chunk(c, mu, temps, spec, cfg=None):
    cfg = cfg or SolverConfig()
    out = []
    seeds = spec.seeds
    for T in temps:
        params = ModelParams(c, mu, T)
        sp = replace(spec, seeds=seeds)
        try:
            res = inverse_corrlen(params, sp, cfg)
        except NoConvergence:
            if seeds is None:
                raise
            res = inverse_corrlen(params, replace(spec, seeds=None), cfg)
        out.append(res)
        seeds = None if res.diagnostics["mode"] == "analytic" else tuple(res.roots.all())
    return out


def _graded_panels(a, b, toward, ratio=0.15, depth=18):
    """Panel edges on [a, b] shrinking geometrically toward the endpoint `toward`."""
    length = b - a
    fr = [ratio ** j for j in range(depth, 0, -1)] + [1.0]
    if toward == a:
        return np.array([a] + [a + f * length for f in fr])
    return np.array([b - f * length for f in fr][::-1] + [b])


def _panel_quad(f, edges, order=24):
    x, w = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        total += half * float(np.sum(w * f(mid + half * x)))
    return total


def tonks_field_value(mu, T):
    """Hard-core field sector: (1/2pi) int log|coth((k^2-mu)/2T)| dk, plus sqrt(-mu) for mu < 0.

    Composite Gauss-Legendre on panels graded toward the logarithmic
    singularity at the Fermi point (or toward k = 0 when mu <= 0).
    """
    s = math.sqrt(mu) if mu > 0 else 0.0
    top = math.sqrt(max(mu, 0.0) + 80.0 * T) + 1.0

    def f(d):
        # d is the offset from s, so k^2 - mu = d (2s + d) keeps full precision near the zero
        if s > 0:
            x = d * (2 * s + d) / (2 * T)
        else:
            x = (d * d - mu) / (2 * T)
        ax = np.abs(x)
        # log coth|x| = log1p(2 e^{-2|x|} / (1 - e^{-2|x|}))
        return np.log1p(2 * np.exp(-2 * ax) / -np.expm1(-2 * ax))

    total = _panel_quad(f, _graded_panels(0.0, top - s, 0.0))
    if s > 0:
        total += _panel_quad(f, _graded_panels(-s, 0.0, 0.0))
    val = total / math.pi
    if mu < 0:
        val += math.sqrt(-mu)
    return val
