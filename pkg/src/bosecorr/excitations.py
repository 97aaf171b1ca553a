"""Excited-sector auxiliary functions with discrete complex roots.

Sectors: "density" (r particle-hole pairs), "field" (one extra root k0 plus
r pairs) and "genfunc" (density-type equation with mu shifted by phi*T).
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import (ContourModeError, DomainError, InvalidArgument, NoConvergence,
                     RootEscape, WindingAmbiguity)
from .nlie import Problem, Root, SolverConfig
from .numerics import SampledFn
from .thermo import BoseModel, ModelParams, auto_grid, singularity_distance, solve_dressed_energy

SECTORS = ("density", "field", "genfunc")
MODES = ("auto", "indented", "straight")


# With aux(k) = i pi T (2m+1), the pair (0, -1) sits at one Fermi point and gives
# the non-oscillating term; (-1, -1) straddles both Fermi points and carries 2 k_F.
OSCILLATING_DENSITY_BRANCHES = (-1, -1)


@dataclass(frozen=True)
class ExcitationSpec:
    """Sector selector with one branch index per root.

    branches lists k0 first (field sector), then the k+ roots, then the k-
    roots; a root with index m solves aux(k) = i*pi*T*(2m+1).
    """
    sector: str
    r: int = None
    phi: float = 0.0
    branches: tuple = None
    contour_mode: str = "auto"
    seeds: tuple = None

    def __post_init__(self):
        if self.sector not in SECTORS:
            raise InvalidArgument(f"unknown sector {self.sector!r}")
        r = self.r
        if r is None:
            r = 1 if self.sector == "density" else 0
            object.__setattr__(self, "r", r)
        if r < 0 or (self.sector == "density" and r < 1):
            raise InvalidArgument(f"invalid number of pairs r={r} for the {self.sector} sector")
        if self.contour_mode not in MODES:
            raise InvalidArgument(f"unknown contour mode {self.contour_mode!r}")
        if self.sector != "genfunc" and self.phi != 0.0:
            raise InvalidArgument("the twist phi belongs to the genfunc sector")
        nroots = 2 * r + (1 if self.sector == "field" else 0)
        if self.branches is None:
            b = [0] if self.sector == "field" else []
            b += list(range(r)) + [-1 - j for j in range(r)]
            object.__setattr__(self, "branches", tuple(b))
        else:
            object.__setattr__(self, "branches", tuple(int(x) for x in self.branches))
        if len(self.branches) != nroots:
            raise InvalidArgument(f"expected {nroots} branch indices, got {len(self.branches)}")
        if self.seeds is not None:
            object.__setattr__(self, "seeds", tuple(complex(x) for x in self.seeds))
            if len(self.seeds) != nroots:
                raise InvalidArgument(f"expected {nroots} root seeds, got {len(self.seeds)}")

    def root_kinds(self):
        kinds = ["k0"] if self.sector == "field" else []
        return kinds + ["plus"] * self.r + ["minus"] * self.r


@dataclass(frozen=True)
class RootSet:
    k0: complex = None
    k_plus: tuple = ()
    k_minus: tuple = ()

    def all(self):
        return ([self.k0] if self.k0 is not None else []) + list(self.k_plus) + list(self.k_minus)


@dataclass(frozen=True)
class SolvedState:
    spec: ExcitationSpec
    params: ModelParams
    roots: RootSet
    aux: SampledFn
    logfn: SampledFn
    residuals: dict
    mode: str
    problem: Problem = field(repr=False, compare=False, default=None)

    @property
    def grid(self):
        return self.aux.grid


def _rootset(problem, k0=None):
    plus = tuple(r.value for r in problem.roots if r.kind == "plus")
    minus = tuple(r.value for r in problem.roots if r.kind == "minus")
    if k0 is None:
        k0s = [r.value for r in problem.roots if r.kind == "k0"]
        k0 = k0s[0] if k0s else None
    return RootSet(k0, plus, minus)


def _newton_on(fun, dfun, k, target, strip, tol=1e-13, maxit=60):
    for _ in range(maxit):
        step = -(fun(k) - target) / dfun(k)
        if abs(step) > 0.25 * min(strip, 1.0):
            step *= 0.25 * min(strip, 1.0) / abs(step)
        k = k + step
        if abs(k.imag) >= strip:
            raise RootEscape("seed left the strip")
        if abs(step) < tol * max(1.0, abs(k)):
            return k
    raise NoConvergence("seed iteration did not converge")


def _seed_from_eps(de, kind, target, mu_eff):
    """Root of eps(k) = target on the requested side of the axis."""
    T = de.params.T
    s = np.sqrt(complex(mu_eff, target.imag))
    guess = s if (s.imag > 0) == (kind == "plus") else -s
    if kind == "k0":
        guess = s if s.real >= 0 else -s
    strip = de.params.c
    if de.params.hard_core:
        return guess
    try:
        f = lambda k: de.at(k)[0]
        df = lambda k: de.deriv_at(k)[0]
        return _newton_on(f, df, guess, target, strip)
    except (NoConvergence, DomainError, ZeroDivisionError):
        return guess


def _default_seeds(de, spec, mu_eff):
    T = de.params.T
    seeds = []
    for kind, m in zip(spec.root_kinds(), spec.branches):
        if kind == "k0":
            # with the +i pi T term, v ~ eps + i pi T, so eps(k0) = 2 pi i T m
            target = 2j * math.pi * T * m
            s = _seed_from_eps(de, kind, target, mu_eff)
            if abs(s.imag) < 1e-8 * max(1.0, abs(s)):
                # a real Fermi point: start above it by the thermal width
                slope = abs(de.deriv_at(s)[0]) if not de.params.hard_core else 2 * abs(s)
                width = math.pi * T / max(slope, 1e-300)
                cap = min(singularity_distance(mu_eff, T), 0.5 * min(de.params.c, 1e6))
                s = complex(abs(s.real), min(width, cap))
            seeds.append(s)
            continue
        else:
            target = 1j * math.pi * T * (2 * m + 1)
        seeds.append(_seed_from_eps(de, kind, target, mu_eff))
    return seeds


def _field_sign(k0):
    """Plus sign for k0 in the right half plane; a root on the imaginary axis counts as right."""
    return 1 if k0.real >= -1e-8 * max(1.0, abs(k0)) else -1


def solve_excited_state(params, spec, cfg=None, de=None, grid=None):
    """Alternating Picard/Newton solution of an excited-sector equation.

    Without an explicit grid the state is re-solved once on a finer grid when
    a converged root lies closer to the real axis than the thermal poles.
    """
    cfg = cfg or SolverConfig()
    shift = spec.phi * params.T if spec.sector == "genfunc" else 0.0
    if de is None:
        de = solve_dressed_energy(params, cfg, grid=grid, mu_shift=shift)
    elif abs(de.mu_shift - shift) > 1e-15:
        raise InvalidArgument("dressed energy was solved at a different twist")
    if params.hard_core and spec.sector == "field" and spec.r == 0 and params.mu >= 0:
        return _hard_core_field(params, spec, de)
    auto = grid is None and cfg.grid_m is None
    for attempt in range(4):
        try:
            state = _solve_on(params, spec, cfg, de, spec.seeds)
            break
        except WindingAmbiguity:
            # a root closer to the axis than the grid resolves: refine and retry
            if not auto or attempt == 3:
                raise
            cfg = replace(cfg, resolution=2 * cfg.resolution)
            de = solve_dressed_energy(params, cfg, mu_shift=shift)
    if not auto or not state.roots.all():
        return state
    dist = min(abs(k.imag) for k in state.roots.all())
    fine = auto_grid(params, cfg, shift, distance=dist)
    if fine.points <= de.grid.points:
        return state
    de = solve_dressed_energy(params, cfg, grid=fine, mu_shift=shift)
    seeds = state.roots.all()
    if state.mode == "straight":
        seeds[0] = complex(seeds[0].real, abs(seeds[0].imag))
    return _solve_on(params, spec, cfg, de, seeds, start=state)


def _hard_core_field(params, spec, de):
    """Without interactions v = k^2 - mu + i pi T and k0 = sqrt(mu) lies on the real axis.

    The log is then real except for the constant -i pi between the Fermi
    points; it is logarithmically singular at them and the correlation
    length is assembled from the closed form instead of the grid.
    """
    k = de.grid.nodes
    T = params.T
    model = BoseModel(params)
    aux = model.e0(k) + 1j * math.pi * T
    x = (k * k - params.mu) / T
    with np.errstate(divide="ignore"):
        L = np.log(np.abs(-np.expm1(-x))) - 1j * math.pi * (x < 0)
    k0 = complex(math.sqrt(params.mu), 0.0)
    prob = Problem(model, de.grid, [], mode="real", sign=1)
    prob.roots = [Root("k0", spec.branches[0], k0)]
    return SolvedState(spec, params, RootSet(k0), SampledFn(de.grid, aux, np.inf, np.inf),
                       SampledFn(de.grid, L, 0j, 0j), {"function": 0.0, "roots": 0.0},
                       "analytic", prob)


def _solve_on(params, spec, cfg, de, seeds, start=None):
    shift = de.mu_shift
    model = BoseModel(params, shift)
    seeds = list(seeds) if seeds is not None else _default_seeds(de, spec, params.mu + shift)
    roots = [Root(kind, m, s) for kind, m, s in zip(spec.root_kinds(), spec.branches, seeds)]
    if spec.sector != "field":
        return _solve_real(params, spec, model, de.grid, roots, de, cfg, start)
    return _solve_field(params, spec, model, de.grid, roots, de, cfg, start)


def _resampled(start, prob):
    """Converged auxiliary function of a coarser solve, interpolated onto this grid."""
    if start is None or start.mode != prob.mode:
        return None
    k = prob.nodes
    v = start.aux.values
    g = start.grid.nodes
    return np.interp(k, g, v.real) + 1j * np.interp(k, g, v.imag)


def _initial_aux(prob, de, start=None):
    """Dressed energy plus the phase terms of the seeded roots."""
    prev = _resampled(start, prob)
    if prev is not None:
        return prev
    k = prob.nodes.astype(complex)
    base = de.eps.values.real.astype(complex) - (prob.model.e0(k) - de.problem.model.e0(k))
    extra = prob.driving(k) - prob.model.e0(k)
    return base + extra


def _finish(params, spec, prob, aux, L, info, mode, k0=None):
    roots = _rootset(prob, k0)
    auxf = SampledFn(prob.grid, aux, np.inf, np.inf)
    return SolvedState(spec, params, roots, auxf, L, info, mode, prob)


def _conjugation_symmetric(spec):
    """Branch labels invariant under k -> conj(k), which maps m to -1-m and k+ to k-."""
    plus = sorted(spec.branches[:spec.r])
    minus = sorted(-1 - m for m in spec.branches[spec.r:])
    return spec.sector != "field" and plus == minus


def _solve_real(params, spec, model, grid, roots, de, cfg, start=None):
    symmetric = _conjugation_symmetric(spec)
    if symmetric:
        plus = [r for r in roots if r.kind == "plus"]
        for q in (r for r in roots if r.kind == "minus"):
            q.value = next(p for p in plus if p.m == -1 - q.m).value.conjugate()
    prob = Problem(model, grid, roots, mode="real", cfg=cfg, symmetric=symmetric)
    aux, L, info = prob.solve(_initial_aux(prob, de, start))
    return _finish(params, spec, prob, aux, L, info, "real")


def _solve_field(params, spec, model, grid, roots, de, cfg, start=None):
    mode = spec.contour_mode
    k0 = roots[0].value
    if mode == "auto":
        # the plain contour when k0 sits above the axis, else the straight form
        order = [_field_upper, _field_straight] if k0.imag > 0 else [_field_straight, _field_upper]
        failure = None
        for fn in order:
            try:
                return fn(params, spec, model, grid, [Root(r.kind, r.m, r.value) for r in roots], de, cfg, start)
            except (ContourModeError, RootEscape, WindingAmbiguity, NoConvergence, DomainError) as exc:
                failure = failure or exc
        raise failure
    if mode == "straight":
        return _field_straight(params, spec, model, grid, roots, de, cfg, start)
    # indented: plain contour when the root is above the axis
    if k0.imag > 0 and spec.seeds is not None:
        return _field_upper(params, spec, model, grid, roots, de, cfg, start)
    try:
        st = _field_straight(params, spec, model, grid, roots, de, cfg, start)
    except (ContourModeError, WindingAmbiguity):
        return _field_upper(params, spec, model, grid, roots, de, cfg, start)
    return field_indented_from(st, cfg)


def _field_upper(params, spec, model, grid, roots, de, cfg, start=None):
    k0 = roots[0].value
    if k0.imag <= 0:
        k0 = complex(k0.real, max(abs(k0.imag), grid.spacing))
        roots[0] = Root("k0", roots[0].m, k0)
    prob = Problem(model, grid, roots, mode="real", sign=_field_sign(k0), cfg=cfg)
    aux, L, info = prob.solve(_initial_aux(prob, de, start))
    k0 = prob.roots[0].value
    if k0.imag <= 0:
        raise ContourModeError("field root converged below the real axis")
    return _finish(params, spec, prob, aux, L, info, "real")


def _straight_seed(prob, de, x0):
    """Dressed energy with a smooth phase step of height 2 pi T centred left of x0."""
    k = prob.nodes
    T = prob.T
    c = prob.model.c if math.isfinite(prob.model.c) else 1.0
    step = math.pi + 2.0 * np.arctan((k - x0 + 0.5 * c) / (0.5 * c))
    base = de.eps.values.real.astype(complex) - (prob.model.e0(k) - de.problem.model.e0(k))
    others = prob.driving(k.astype(complex)) - prob.model.e0(k) - prob.const()
    return base + 1j * T * step + others


def _locate_k0(prob, L, aux, m, x_hint):
    """Zero of 1 + exp(-v/T) just below the axis where the straight log winds."""
    T = prob.T
    k = prob.nodes
    im = L.values.imag
    # the root belongs to the half line selected by the sign of the +-i pi T term
    side = np.where(k * (prob.sign or 1) >= 0, 0.0, np.inf)
    i = int(np.argmin(np.abs(im + math.pi) + side))
    seed = complex(k[i], -abs(prob.grid.spacing))
    f = lambda z: prob.aux_at(z, L)[0]
    df = lambda z: prob.aux_deriv_at(z, L)[0]
    best = None
    for mm in (m, m - 1, m + 1):
        try:
            z = _newton_on(f, df, seed, 1j * math.pi * T * (2 * mm + 1), prob.model.strip)
        except (NoConvergence, DomainError):
            continue
        if z.imag < 0 and (best is None or abs(z.imag) < abs(best[0].imag)):
            best = (z, mm)
    if best is None:
        raise ContourModeError("could not locate the field root below the axis")
    return best


def _field_straight(params, spec, model, grid, roots, de, cfg, start=None):
    k0 = roots[0].value
    x0 = k0.real
    if abs(x0) < grid.spacing:
        # no Fermi point to wind around: use the zero of the dressed energy
        x0 = _fermi_point(de)
    sign = 1 if x0 >= 0 else -1
    prob = Problem(model, grid, roots, mode="straight", sign=sign, cfg=cfg)
    aux0 = _resampled(start, prob)
    aux, L, info = prob.solve(_straight_seed(prob, de, x0) if aux0 is None else aux0)
    z, m = _locate_k0(prob, L, aux, roots[0].m, x0)
    prob.roots[0] = Root("k0", m, z)
    return _finish(params, spec, prob, aux, L, info, "straight", k0=z)


def _fermi_point(de):
    e = de.eps.values.real
    k = de.grid.nodes
    idx = np.where((e[:-1] < 0) & (e[1:] >= 0))[0]
    if idx.size == 0:
        return 0.0
    i = idx[-1]
    return float(k[i] - e[i] * (k[i + 1] - k[i]) / (e[i + 1] - e[i]))


def field_indented_from(state, cfg=None, radius=None):
    """Re-solve a straight-contour field state on the indented contour."""
    cfg = cfg or state.problem.cfg
    sp = state.problem
    k0 = state.roots.k0
    if k0.imag >= 0:
        raise ContourModeError("indented contour needs k0 below the axis")
    roots = [Root(r.kind, r.m, r.value) for r in sp.roots]
    roots[0] = Root("k0", sp.roots[0].m, k0)
    sign = _field_sign(k0)
    prob = Problem(sp.model, sp.grid, roots, mode="indented", sign=sign, cfg=cfg)
    # the root label follows the constant of the driving term
    shift = (sp.const() - prob.const()) / (2j * math.pi * sp.T)
    prob.roots[0].m = roots[0].m + int(round(shift.real))
    prob.setup_indentation(radius)
    ind = prob.indent
    pts = np.concatenate([ind.arc_nodes, ind.dia_nodes])
    extra0 = sp.aux_at(pts, state.logfn)
    aux0 = state.aux.values
    aux, L, info = prob.solve(aux0, extra0=extra0)
    return _finish(state.params, state.spec, prob, aux, L, info, "indented")


def evaluate_aux_offgrid(state, k):
    """Analytic continuation of the auxiliary function to complex k."""
    k = np.asarray(k, dtype=complex)
    out = state.problem.aux_at(k.ravel(), state.logfn)
    return out.reshape(k.shape) if k.ndim else out[0]


def aux_derivative_offgrid(state, k):
    k = np.asarray(k, dtype=complex)
    out = state.problem.aux_deriv_at(k.ravel(), state.logfn)
    return out.reshape(k.shape) if k.ndim else out[0]


def refine_roots(state, passes=60):
    """Newton-polish every root against its branch constraint with the function held fixed.

    Each Newton solve holds the other roots fixed, so the sweep over roots is
    repeated until the largest step reaches round-off.
    """
    prob = state.problem.clone()
    for _ in range(passes):
        step = prob._update_roots(state.logfn)
        prob.check_roots()
        scale = max([1.0] + [abs(r.value) for r in prob.active_roots()])
        if step <= 1e-14 * scale:
            break
    res = dict(state.residuals)
    res["roots"] = prob.root_residual(state.logfn)
    res["newton_step"] = step
    k0 = state.roots.k0 if state.mode == "straight" else None
    return SolvedState(state.spec, state.params, _rootset(prob, k0), state.aux, state.logfn,
                       res, state.mode, prob)
