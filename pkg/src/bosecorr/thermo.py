"""Yang-Yang equation for the dressed energy and equilibrium thermodynamics."""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InvalidArgument, NoConvergence
from .nlie import Problem, SolverConfig
from .numerics import LorentzKernel, SampledFn, build_grid, kernel_bar, theta_bar


@dataclass(frozen=True)
class ModelParams:
    """Bose gas with hbar = 2m = 1; c = inf selects the hard-core limit."""
    c: float
    mu: float
    T: float

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidArgument(f"c must be positive, got {self.c}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidArgument(f"T must be positive, got {self.T}")
        if not math.isfinite(self.mu):
            raise InvalidArgument("mu must be finite")

    @property
    def hard_core(self):
        return math.isinf(self.c)


class BoseModel:
    """Bare data of the gas in the form used by nlie.Problem."""

    def __init__(self, params, mu_shift=0.0):
        self.params = params
        self.T = params.T
        self.mu = params.mu + mu_shift
        self.c = params.c
        self.strip = params.c
        if params.hard_core:
            self.kernel = None
            self.phase_inf = 0.0
        else:
            self.kernel = LorentzKernel(params.c, -1.0)
            self.phase_inf = -math.pi
        self.const = 0.0
        self.field_const = 0.0

    def e0(self, k):
        return k * k - self.mu

    def de0(self, k):
        return 2.0 * k

    def phase(self, z, continued=False):
        return -theta_bar(z, self.c, continued)

    def dphase(self, z, continued=False):
        return -kernel_bar(z, self.c, continued)

    def p0(self, k):
        return k

    def dp0(self, k):
        return np.ones(np.shape(k))


def singularity_distance(mu, T):
    """Distance from the real axis of the nearest zero of 1 + exp(-(k^2-mu)/T)."""
    return abs(np.sqrt(complex(mu, math.pi * T)).imag)


def auto_grid(params, cfg=None, mu_shift=0.0, distance=None):
    """Grid wide enough for Gaussian decay of the log and fine enough for its singularities."""
    cfg = cfg or SolverConfig()
    mu = params.mu + mu_shift
    T = params.T
    lam = cfg.grid_lambda
    if lam is None:
        lam = math.sqrt(max(mu + 37.0 * T, 0.0)) + 1.0
        if not params.hard_core:
            lam = max(lam, 10.0 * params.c)
    if cfg.grid_m is not None:
        return build_grid(lam, cfg.grid_m)
    d = singularity_distance(mu, T)
    if distance is not None:
        d = min(d, distance)
    if not params.hard_core:
        d = min(d, params.c)
    h = d / cfg.resolution
    m = 64
    while 2 * lam / (m - 1) > h:
        m *= 2
    if m > 1 << 22:
        raise InvalidArgument(f"grid of {m} points needed; lower the resolution or set grid_m")
    return build_grid(lam, m)


@dataclass(frozen=True)
class DressedEnergy:
    params: ModelParams
    eps: SampledFn
    logfn: SampledFn
    converged: bool
    residual: float
    iterations: int
    mu_shift: float = 0.0
    problem: Problem = field(default=None, repr=False, compare=False)

    @property
    def grid(self):
        return self.eps.grid

    def at(self, k):
        """Analytic continuation of the dressed energy to complex k (|Im k| < c)."""
        return self.problem.aux_at(k, self.logfn)

    def deriv_at(self, k):
        return self.problem.aux_deriv_at(k, self.logfn)


def solve_dressed_energy(params, cfg=None, grid=None, mu_shift=0.0, initial=None, polish=False):
    """Damped Picard solution of the Yang-Yang equation on a uniform grid.

    mu_shift adds to the chemical potential (the twisted sector uses mu + phi*T).
    polish keeps iterating below the tolerance until round-off stalls progress,
    which finite-difference derivatives need.
    """
    cfg = cfg or SolverConfig()
    model = BoseModel(params, mu_shift)
    grid = grid or auto_grid(params, cfg, mu_shift)
    prob = Problem(model, grid, [], mode="real", cfg=cfg)
    k = grid.nodes
    aux0 = model.e0(k).astype(complex) if initial is None else np.asarray(initial, dtype=complex)
    aux, L, info = prob.solve(aux0, polish=polish)
    aux = aux.real.astype(complex)
    eps = SampledFn(grid, aux, np.inf, np.inf)
    return DressedEnergy(params, eps, L, True, info["function"], info["iterations"], mu_shift, prob)


def grand_potential(de):
    """phi = -(T/2pi) int log(1 + exp(-eps/T)) dk."""
    if not de.converged:
        raise NoConvergence("dressed energy not converged", de.residual)
    val = de.problem.log_integral(de.logfn)
    return -de.params.T * float(val.real)


def _phi(params, cfg, grid, initial=None):
    de = solve_dressed_energy(params, cfg, grid=grid, initial=initial, polish=True)
    return grand_potential(de), de


def density(params, cfg=None):
    """n = -d phi / d mu by a central difference with relative step 1e-4."""
    cfg = cfg or SolverConfig()
    d = 1e-4 * max(1.0, abs(params.mu))
    grid = auto_grid(params, cfg)
    _, de = _phi(params, cfg, grid)
    up, _ = _phi(ModelParams(params.c, params.mu + d, params.T), cfg, grid, de.eps.values)
    dn, _ = _phi(ModelParams(params.c, params.mu - d, params.T), cfg, grid, de.eps.values)
    return -(up - dn) / (2 * d)


def _t_stencil(params, cfg, rel=1e-3):
    cfg = cfg or SolverConfig()
    T = params.T
    d = rel * T
    grid = auto_grid(ModelParams(params.c, params.mu, T - 2 * d), cfg)
    _, de = _phi(params, cfg, grid)
    vals = {}
    for j in (-2, -1, 0, 1, 2):
        vals[j], _ = _phi(ModelParams(params.c, params.mu, T + j * d), cfg, grid, de.eps.values)
    return vals, d


def entropy(params, cfg=None):
    """s = -d phi / dT (five-point central difference, relative step 1e-3)."""
    v, d = _t_stencil(params, cfg)
    return -(v[-2] - 8 * v[-1] + 8 * v[1] - v[2]) / (12 * d)


def specific_heat(params, cfg=None):
    """c_V = -T d^2 phi / dT^2 at fixed mu (five-point stencil, relative step 1e-3)."""
    v, d = _t_stencil(params, cfg)
    second = (-v[-2] + 16 * v[-1] - 30 * v[0] + 16 * v[1] - v[2]) / (12 * d * d)
    return -params.T * second


def thermo_point(params, cfg=None):
    """phi, n, s, c_V at one point, sharing the temperature stencil."""
    cfg = cfg or SolverConfig()
    v, d = _t_stencil(params, cfg)
    s = -(v[-2] - 8 * v[-1] + 8 * v[1] - v[2]) / (12 * d)
    cv = -params.T * (-v[-2] + 16 * v[-1] - 30 * v[0] + 16 * v[1] - v[2]) / (12 * d * d)
    return {"phi": v[0], "density": density(params, cfg), "entropy": s, "specific_heat": cv}
