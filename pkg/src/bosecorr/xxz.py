"""Low-temperature quantum-transfer-matrix equations of the XXZ chain and the
scaling map that turns them into the Bose gas equations.

Lattice data (rapidity lam, anisotropy Delta = cos(eta), 0 < eta < pi):

    e0(lam) = h - 4 J sin^2(eta) / (cosh(2 lam) - cos(eta))
    p0(lam) = 2 arctan(tanh(lam) cot(eta/2)),   p0(+-inf) = +-(pi - eta)
    theta(lam) = 2 arctan(tanh(lam) cot(eta)),  K = theta'

The auxiliary functions solve the generic equation of nlie.Problem with
phase = theta and kernel K/2pi, and

    log Lambda = h/2T + i sum sigma p0(root) + (1/2pi) int p0' log(1 + e^{-a/T}) dlam

with an extra -i*pi in the sector with one spin flipped (it gives the
staggering factor (-1)^m of the lattice correlations).
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.optimize import brentq

from .errors import (ContourModeError, DomainError, InvalidArgument, NoConvergence,
                     NoFermiSea, RootEscape, SingularSystem, WindingAmbiguity)
from .excitations import (ExcitationSpec, RootSet, _conjugation_symmetric, _locate_k0,
                          _newton_on, _rootset)
from .nlie import Problem, Root, SolverConfig
from .numerics import (SampledFn, TrigKernel, build_grid, inv_cosh_shift, kernel_xxz,
                       sinh_over_shift_sq, theta_xxz)


# roots close to the kernel poles couple strongly to the function, so the
# lattice iteration updates them more often and is allowed more sweeps; the
# tolerance is tighter because log Lambda carries eps/T and T is small here
LATTICE_CONFIG = SolverConfig(tol=1e-12, max_iter=4000, newton_every=2)


@dataclass(frozen=True)
class XxzParams:
    eta: float
    J: float
    h: float
    T: float

    def __post_init__(self):
        if not 0 < self.eta < math.pi:
            raise InvalidArgument(f"eta must lie in (0, pi), got {self.eta}")
        if not self.J > 0:
            raise InvalidArgument("J must be positive")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidArgument("T must be positive")
        if not 0 <= self.h < self.h_c:
            raise InvalidArgument(f"h must lie in [0, {self.h_c:.6g}), got {self.h}")

    @property
    def h_c(self):
        return 8 * self.J * math.cos(self.eta / 2) ** 2

    @property
    def delta(self):
        return math.cos(self.eta)


class XxzModel:
    """Lattice data in the form used by nlie.Problem."""
    decaying = False

    def __init__(self, params):
        self.params = params
        self.T = params.T
        eta = params.eta
        self.eta = eta
        self.amp = 4 * params.J * math.sin(eta) ** 2
        self.kernel = TrigKernel(eta)
        self.phase_inf = math.pi - 2 * eta
        self.p0_inf = math.pi - eta
        self.const = 0.0
        self.field_const = -1j * math.pi
        self.strip = min(eta / 2, math.pi - eta)

    def e0(self, lam):
        return self.params.h - self.amp * inv_cosh_shift(lam, math.cos(self.eta))

    def de0(self, lam):
        return 2 * self.amp * sinh_over_shift_sq(lam, math.cos(self.eta))

    def phase(self, z, continued=False):
        return theta_xxz(z, self.eta, continued)

    def dphase(self, z, continued=False):
        return kernel_xxz(z, self.eta, continued)

    def p0(self, lam):
        return 2 * np.arctan(np.tanh(lam) / math.tan(self.eta / 2))

    def dp0(self, lam):
        return 2 * math.sin(self.eta) * inv_cosh_shift(lam, math.cos(self.eta))


def thermal_distance(params):
    """Distance from the real axis of the nearest zero of 1 + exp(-e0/T)."""
    m = XxzModel(params)
    w = math.cos(params.eta) + m.amp / complex(params.h, -math.pi * params.T)
    y = abs((np.arccosh(w) / 2).imag) % math.pi
    return min(y, math.pi - y)


def xxz_grid(params, cfg=None, distance=None):
    """Half-width where e0/T reaches 50 (or where e0 has saturated to 1e-16 T
    when the field is below 50T); spacing from the nearest singularity."""
    cfg = cfg or LATTICE_CONFIG
    m = XxzModel(params)
    T = params.T
    lam = cfg.grid_lambda
    if lam is None:
        c = math.cos(params.eta)
        if params.h > 50 * T:
            lam = 0.5 * np.arccosh(c + m.amp / (params.h - 50 * T))
        else:
            lam = 0.5 * math.log(2 * m.amp / (T * 1e-16))
        lam = max(lam, 10 * min(params.eta, math.pi - params.eta))
    if cfg.grid_m is not None:
        return build_grid(lam, cfg.grid_m)
    d = min(thermal_distance(params), m.strip)
    if distance is not None:
        d = min(d, distance)
    step = d / cfg.resolution
    pts = 64
    while 2 * lam / (pts - 1) > step:
        pts *= 2
    if pts > 1 << 22:
        raise InvalidArgument(f"grid of {pts} points needed; lower the resolution or set grid_m")
    return build_grid(lam, pts)


@dataclass(frozen=True)
class XxzLargest:
    params: XxzParams
    aux: SampledFn
    logfn: SampledFn
    log_lambda: float
    residual: float
    problem: Problem = field(repr=False, compare=False, default=None)

    @property
    def grid(self):
        return self.aux.grid

    def at(self, lam):
        return self.problem.aux_at(lam, self.logfn)

    def deriv_at(self, lam):
        return self.problem.aux_deriv_at(lam, self.logfn)


def _log_lambda(problem, L):
    return problem.params_h_term + problem.root_part() + problem.log_integral(L)


def _problem(params, grid, roots, cfg, **kw):
    prob = Problem(XxzModel(params), grid, roots, cfg=cfg, **kw)
    prob.params_h_term = params.h / (2 * params.T)
    return prob


def solve_xxz_largest(params, cfg=None, grid=None, initial=None):
    """Dressed energy eps(lam) and log Lambda_0 of the largest eigenvalue."""
    cfg = cfg or LATTICE_CONFIG
    grid = grid or xxz_grid(params, cfg)
    prob = _problem(params, grid, [], cfg)
    aux0 = prob.model.e0(grid.nodes) if initial is None else initial
    aux, L, info = prob.solve(np.asarray(aux0, dtype=complex))
    aux = aux.real.astype(complex)
    val = _log_lambda(prob, L)
    return XxzLargest(params, SampledFn(grid, aux, np.inf, np.inf), L, float(val.real),
                      info["function"], prob)


@dataclass(frozen=True)
class XxzState:
    params: XxzParams
    spec: ExcitationSpec
    roots: RootSet
    aux: SampledFn
    logfn: SampledFn
    log_lambda: complex
    mode: str
    residuals: dict
    problem: Problem = field(repr=False, compare=False, default=None)

    @property
    def grid(self):
        return self.aux.grid


def _fermi_point(largest):
    """Right zero of the dressed energy, or None when it is positive everywhere."""
    e = largest.aux.values.real
    lam = largest.grid.nodes
    idx = np.where((e[:-1] < 0) & (e[1:] >= 0))[0]
    if idx.size == 0:
        return None
    i = idx[-1]
    f = lambda x: float(largest.at(x)[0].real)
    return brentq(f, lam[i], lam[i + 1], xtol=1e-14)


def _default_seeds(largest, spec):
    T = largest.params.T
    prob = largest.problem
    strip = prob.model.strip
    lf = _fermi_point(largest)
    f = lambda z: largest.at(z)[0]
    df = lambda z: largest.deriv_at(z)[0]
    seeds = []
    for kind, m in zip(spec.root_kinds(), spec.branches):
        target = 1j * math.pi * T * (2 * m + 1) if kind != "k0" else 2j * math.pi * T * m
        if lf is None:
            guess = 0.5j * strip if kind != "minus" else -0.5j * strip
        else:
            slope = float(df(lf).real)
            y = target.imag / slope
            if kind == "k0" and abs(y) < 1e-12:
                y = min(math.pi * T / slope, 0.5 * strip)
            guess = complex(lf, max(-0.5 * strip, min(0.5 * strip, y)))
        try:
            s = _newton_on(f, df, guess, target, strip)
        except (NoConvergence, DomainError, ZeroDivisionError):
            s = guess
        if kind == "k0" and abs(s.imag) < 1e-10:
            s = complex(s.real, min(math.pi * T / abs(df(s)), 0.5 * strip))
        seeds.append(s)
    return seeds


def _initial(prob, largest, start=None):
    if start is not None and start.mode == prob.mode:
        g = start.grid.nodes
        v = start.aux.values
        x = prob.nodes
        return np.interp(x, g, v.real) + 1j * np.interp(x, g, v.imag)
    lam = prob.nodes.astype(complex)
    return largest.aux.values + (prob.driving(lam) - prob.model.e0(lam))


def _straight_initial(prob, largest, x0):
    lam = prob.nodes
    w = prob.model.strip
    step = math.pi + 2.0 * np.arctan((lam - x0 + 0.5 * w) / (0.5 * w))
    others = prob.driving(lam.astype(complex)) - prob.model.e0(lam) - prob.const()
    return largest.aux.values + 1j * prob.T * step + others


def _finish(params, spec, prob, aux, L, info, mode, k0=None):
    return XxzState(params, spec, _rootset(prob, k0), SampledFn(prob.grid, aux, np.inf, np.inf),
                    L, complex(_log_lambda(prob, L)), mode, info, prob)


def _solve_on(params, spec, cfg, largest, seeds, start=None, initial=None):
    grid = largest.grid
    roots = [Root(k, m, s) for k, m, s in zip(spec.root_kinds(), spec.branches, seeds)]
    if spec.sector != "field":
        sym = _conjugation_symmetric(spec)
        if sym:
            plus = [r for r in roots if r.kind == "plus"]
            for q in (r for r in roots if r.kind == "minus"):
                q.value = next(p for p in plus if p.m == -1 - q.m).value.conjugate()
        prob = _problem(params, grid, roots, cfg, mode="real", symmetric=sym)
        aux0 = initial if initial is not None else _initial(prob, largest, start)
        aux, L, info = prob.solve(aux0)
        return _finish(params, spec, prob, aux, L, info, "real")
    mode = spec.contour_mode
    if mode == "indented":
        raise ContourModeError("the lattice solver takes k0 below the axis on the straight contour")
    if mode == "straight":
        return _field_straight(params, spec, cfg, largest, roots, start, initial)
    order = [_field_upper, _field_straight] if roots[0].value.imag > 0 else [_field_straight, _field_upper]
    failure = None
    for fn in order:
        try:
            return fn(params, spec, cfg, largest, [Root(r.kind, r.m, r.value) for r in roots], start, initial)
        except (ContourModeError, RootEscape, WindingAmbiguity, NoConvergence, DomainError) as exc:
            failure = failure or exc
    raise failure


def _field_upper(params, spec, cfg, largest, roots, start=None, initial=None):
    k0 = roots[0].value
    if k0.imag <= 0:
        roots[0] = Root("k0", roots[0].m, complex(k0.real, max(abs(k0.imag), largest.grid.spacing)))
        k0 = roots[0].value
    sign = 1 if k0.real >= -1e-8 * max(1.0, abs(k0)) else -1
    prob = _problem(params, largest.grid, roots, cfg, mode="real", sign=sign)
    aux0 = initial if initial is not None else _initial(prob, largest, start)
    aux, L, info = prob.solve(aux0)
    if prob.roots[0].value.imag <= 0:
        raise ContourModeError("field root converged below the real axis")
    return _finish(params, spec, prob, aux, L, info, "real")


def _field_straight(params, spec, cfg, largest, roots, start=None, initial=None):
    x0 = roots[0].value.real
    if abs(x0) < largest.grid.spacing:
        x0 = _fermi_point(largest) or 0.0
    sign = 1 if x0 >= 0 else -1
    prob = _problem(params, largest.grid, roots, cfg, mode="straight", sign=sign)
    if initial is not None:
        aux0 = initial
    elif start is not None and start.mode == "straight":
        aux0 = _initial(prob, largest, start)
    else:
        aux0 = _straight_initial(prob, largest, x0)
    aux, L, info = prob.solve(aux0)
    z, m = _locate_k0(prob, L, aux, roots[0].m, x0)
    prob.roots[0] = Root("k0", m, z)
    return _finish(params, spec, prob, aux, L, info, "straight", k0=z)


def solve_xxz_excited(params, spec, cfg=None, largest=None, seeds=None, initial=None):
    """Subleading eigenvalue in the density (N/2) or field (N/2-1) sector.

    The field root k0 is handled on the real contour when it lies above the
    axis and on the straight contour (with the -2 pi i tail) below it.
    Without an explicit grid in cfg the state is re-solved on a finer grid
    when a root lies closer to the axis than the thermal poles.
    """
    cfg = cfg or LATTICE_CONFIG
    if spec.sector == "genfunc":
        raise InvalidArgument("the lattice solver covers the density and field sectors")
    largest = largest or solve_xxz_largest(params, cfg)
    if seeds is None:
        seeds = spec.seeds if spec.seeds is not None else _default_seeds(largest, spec)
    seeds = [complex(s) for s in seeds]
    auto = cfg.grid_m is None
    for attempt in range(4):
        try:
            state = _solve_on(params, spec, cfg, largest, seeds, initial=initial)
            break
        except WindingAmbiguity:
            if not auto or attempt == 3:
                raise
            cfg = replace(cfg, resolution=2 * cfg.resolution)
            largest = solve_xxz_largest(params, cfg)
            initial = None
    if not auto or not state.roots.all():
        return state
    dist = min(abs(k.imag) for k in state.roots.all())
    fine = xxz_grid(params, cfg, distance=dist)
    if fine.points <= largest.grid.points:
        return state
    largest = solve_xxz_largest(params, cfg, grid=fine)
    seeds = state.roots.all()
    if state.mode == "straight":
        # keep the side of the +-i pi T term the coarse solve used
        seeds[0] = complex(state.problem.sign * abs(seeds[0].real), -abs(seeds[0].imag))
    return _solve_on(params, spec, cfg, largest, seeds, start=state)


def xxz_inverse_corrlen(params, spec, cfg=None):
    """log Lambda_0 - log Lambda_i on a shared grid."""
    st = solve_xxz_excited(params, spec, cfg)
    ref = solve_xxz_largest(params, cfg or LATTICE_CONFIG, grid=st.grid)
    return ref.log_lambda - st.log_lambda, st


# ---- zero temperature ----

@dataclass(frozen=True)
class XxzGroundState:
    """Fermi rapidity B, ground-state energy per site and Fermi velocity."""
    B: float
    energy: float
    v_f: float


def _nystrom(params, B, rhs, order):
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = B * x, B * w
    K = kernel_xxz(x[:, None] - x[None, :], params.eta)
    a = np.eye(order) + K * w[None, :] / (2 * math.pi)
    try:
        f = np.linalg.solve(a, rhs(x))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    # Nystrom interpolant
    return x, w, f, lambda y: rhs(y) - kernel_xxz(np.subtract.outer(y, x), params.eta) @ (w * f) / (2 * math.pi)


def xxz_ground_state(params, order=96):
    """Zero-temperature dressed energy and density on [-B, B]:

        eps + (1/2pi) int K eps = e0,   rho + (1/2pi) int K rho = p0'/2pi.
    """
    m = XxzModel(params)

    def edge(B):
        return float(_nystrom(params, B, m.e0, order)[3](np.array([B]))[0])

    if m.e0(0.0) >= 0:
        raise NoFermiSea("the field polarizes the chain completely")
    lo, hi = 1e-3, 1.0
    while edge(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > 200:
            raise NoFermiSea("no Fermi rapidity found")
    B = brentq(edge, lo, hi, xtol=1e-14)
    x, w, eps, _ = _nystrom(params, B, m.e0, order)
    _, _, _, deps = _nystrom(params, B, m.de0, order)
    _, _, _, rho = _nystrom(params, B, lambda y: m.dp0(y) / (2 * math.pi), order)
    energy = -params.h / 2 + float(np.sum(w * m.dp0(x) * eps)) / (2 * math.pi)
    # eps' solves the same equation with e0' as source (boundary terms vanish since eps(+-B) = 0)
    v_f = float(deps(np.array([B]))[0]) / (2 * math.pi * float(rho(np.array([B]))[0]))
    return XxzGroundState(B, energy, v_f)


def affleck_ratio(params, cfg=None):
    """(f(h,T) - e_gs) / (-pi T^2 / 6 v_F); tends to 1 as T -> 0."""
    gs = xxz_ground_state(params)
    f = -params.T * solve_xxz_largest(params, cfg).log_lambda
    return (f - gs.energy) / (-math.pi * params.T ** 2 / (6 * gs.v_f))


# ---- continuum limit ----

@dataclass(frozen=True)
class ContinuumMap:
    """Lattice parameters whose scaling limit eps -> 0 is the gas at (c, mu, Tbar).

    J = 1/2, eta = pi - eps, delta = eps^2/c, T = Tbar delta^2. The field is
    fixed by matching the bottom of the band, e0(0) = -mu delta^2 exactly,
    i.e. h = 2(1 - cos eps) - mu delta^2. With literal=True it is instead
    h = eps^2 + eps^4/4 - mu delta^2, whose band bottom sits at
    -(mu - c^2/3) delta^2 + O(eps^6) and does not reach the requested gas.
    """
    eps: float
    c: float
    mu: float
    Tbar: float
    literal: bool = False

    def __post_init__(self):
        if not 0 < self.eps <= 0.5:
            raise InvalidArgument("scaling parameter must lie in (0, 0.5]")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise InvalidArgument("the scaling map needs finite positive c")

    J = 0.5

    @property
    def delta(self):
        return self.eps ** 2 / self.c

    @property
    def eta(self):
        return math.pi - self.eps

    @property
    def h(self):
        d2 = self.delta ** 2
        if self.literal:
            return self.eps ** 2 + self.eps ** 4 / 4 - self.mu * d2
        return 2 * (1 - math.cos(self.eps)) - self.mu * d2

    @property
    def T(self):
        return self.Tbar * self.delta ** 2

    def params(self):
        """Lattice parameters; positive mu is required (otherwise h >= h_c)."""
        return XxzParams(self.eta, self.J, self.h, self.T)

    def to_rapidity(self, k):
        return self.delta * np.asarray(k) / self.eps

    def to_momentum(self, lam):
        return self.eps * np.asarray(lam) / self.delta

    def gas_log_lambda(self, log_lambda_lattice):
        """(log Lambda - h/2T)/delta."""
        return (log_lambda_lattice - self.h / (2 * self.T)) / self.delta

    def gas_inverse_corrlen(self, inv_xi_lattice):
        """Field sector: the -i pi staggering is removed before rescaling."""
        return (inv_xi_lattice - 1j * math.pi) / self.delta


@dataclass(frozen=True)
class ContinuumReport:
    eps: tuple
    log_lambda: tuple          # rescaled lattice values
    log_lambda_gas: float
    field: tuple
    field_gas: complex
    dev_log_lambda: tuple
    dev_field: tuple
    order_log_lambda: float
    order_field: float

    @property
    def monotonic(self):
        def dec(v):
            return all(b < a for a, b in zip(v, v[1:]))
        return dec(self.dev_log_lambda) and dec(self.dev_field)


def _fit_order(eps, dev):
    return float(np.polyfit(np.log(eps), np.log(dev), 1)[0])


def _lattice_point(cmap, cfg):
    p = cmap.params()
    largest = solve_xxz_largest(p, cfg)
    st = solve_xxz_excited(p, ExcitationSpec("field"), cfg, largest=largest)
    ref = largest if st.grid == largest.grid else solve_xxz_largest(p, cfg, grid=st.grid)
    return cmap.gas_log_lambda(ref.log_lambda), cmap.gas_inverse_corrlen(ref.log_lambda - st.log_lambda)


def continuum_limit_check(bose, eps_list, cfg=None, jobs=None):
    """Compare rescaled lattice eigenvalues with the gas at (c, mu, Tbar).

    Reports |deviation| of log Lambda_0 and of the leading field-sector
    inverse correlation length for each eps, and the slope of log|dev|
    against log eps. The eps points run concurrently.
    """
    from .corrlen import leading_corrlen
    from .thermo import grand_potential, solve_dressed_energy

    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(not 0 < e <= 0.5 for e in eps_list) \
            or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidArgument("eps_list must be strictly decreasing inside (0, 0.5]")
    if bose.hard_core:
        raise InvalidArgument("the scaling map needs finite c")
    cfg = cfg or LATTICE_CONFIG
    de = solve_dressed_energy(bose, cfg)
    gas_log = -grand_potential(de) / bose.T
    gas_field = leading_corrlen(bose, "field", cfg)
    maps = [ContinuumMap(e, bose.c, bose.mu, bose.T) for e in eps_list]
    with ThreadPoolExecutor(max_workers=jobs or len(maps)) as pool:
        out = list(pool.map(lambda m: _lattice_point(m, cfg), maps))
    logs = tuple(float(o[0].real) for o in out)
    fields = tuple(complex(o[1]) for o in out)
    dl = tuple(abs(v - gas_log) for v in logs)
    df = tuple(abs(v - gas_field.value) for v in fields)
    order_l = _fit_order(eps_list, dl) if len(eps_list) > 1 else float("nan")
    order_f = _fit_order(eps_list, df) if len(eps_list) > 1 else float("nan")
    return ContinuumReport(tuple(eps_list), logs, gas_log, fields, complex(gas_field.value),
                           dl, df, order_l, order_f)
