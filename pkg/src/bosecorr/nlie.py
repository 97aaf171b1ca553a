"""Generic solver for the real-axis nonlinear integral equations with discrete roots.

An auxiliary function a(k) satisfies

    a(k) = e0(k) + const - i*T*sum_r sigma_r*phase(k - r) + T * int kern(k-k') L(k') dk'

with L = log(1 + exp(-a/T)) continued along the integration contour, and every
root r solves a(r) = i*pi*T*(2m+1).  Models supply e0, phase, kern = phase'/2pi,
and the bare momentum p0 that enters the eigenvalue

    E = i*sum_r sigma_r*p0(r) + (1/2pi) int p0'(k) L(k) dk.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import (BranchCollision, ContourModeError, DomainError, InvalidArgument,
                     NewtonDivergence, NoConvergence, RootEscape, WindingAmbiguity)
from .numerics import (SampledFn, build_grid, integrate_tailed, log1p_exp_neg,
                       offgrid_convolve, convolve_tailed, quantize_tail, unwrap_log)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 500
    damping: float = 0.5
    root_tol: float = 1e-12
    tail_tol: float = 1e-8
    grid_lambda: float | None = None
    grid_m: int | None = None
    # grid spacing is the smallest singularity distance divided by this
    resolution: float = 6.0
    newton_every: int = 5
    newton_switch: float = 1e-6
    max_newton: int = 30

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise InvalidArgument("damping must lie in (0, 1]")
        if not self.tol > 0 or self.max_iter < 1:
            raise InvalidArgument("tolerance and iteration count must be positive")
        if self.grid_m is not None and (self.grid_m < 64 or self.grid_m & (self.grid_m - 1)):
            raise InvalidArgument("grid_m must be a power of two >= 64")
        if self.grid_lambda is not None and not self.grid_lambda > 0:
            raise InvalidArgument("grid_lambda must be positive")


@dataclass
class Root:
    kind: str      # "k0", "plus" or "minus"
    m: int
    value: complex

    @property
    def sigma(self):
        return -1 if self.kind == "minus" else 1

    @property
    def target(self):
        return 1j * math.pi * (2 * self.m + 1)


@dataclass
class Indentation:
    """Lower semicircle replacing the grid segment [a, b] around a root below the axis."""
    ia: int
    ib: int
    center: float
    radius: float
    arc_nodes: np.ndarray
    arc_weights: np.ndarray     # includes dk/dangle
    dia_nodes: np.ndarray
    dia_weights: np.ndarray
    arc_aux: np.ndarray = None
    dia_aux: np.ndarray = None
    arc_log: np.ndarray = None
    dia_log: np.ndarray = None

    def copy(self):
        return replace(self, arc_aux=None if self.arc_aux is None else self.arc_aux.copy(),
                       dia_aux=None if self.dia_aux is None else self.dia_aux.copy())


def make_indentation(grid, k0, radius=None, order=64):
    h = grid.spacing
    rad = 2.0 * abs(k0.imag) if radius is None else radius
    nr = max(2, int(math.ceil(rad / h)))
    ic = int(round((k0.real + grid.half_width) / h))
    ia, ib = ic - nr, ic + nr
    if ia < 1 or ib > grid.points - 2:
        raise ContourModeError("indentation does not fit inside the grid")
    center = grid.nodes[ic]
    radius = nr * h
    if abs(k0 - center) >= radius:
        raise ContourModeError("indentation does not enclose the root")
    x, w = np.polynomial.legendre.leggauss(order)
    ang = 1.5 * math.pi + 0.5 * math.pi * x          # pi .. 2pi, passes below the axis
    arc = center + radius * np.exp(1j * ang)
    arc_w = w * 0.5 * math.pi * 1j * radius * np.exp(1j * ang)
    dia = center + radius * x
    dia_w = w * radius
    return Indentation(ia, ib, center, radius, arc, arc_w, dia.astype(complex), dia_w.astype(complex))


class Problem:
    """One instance of the equation: model, grid, roots, contour mode.

    mode: "real" (plain real axis), "straight" (real axis passing above the
    field root, which is then implicit) or "indented" (real axis with a
    lower semicircle around the field root).
    """

    def __init__(self, model, grid, roots, mode="real", sign=0, cfg=None, symmetric=False):
        self.model = model
        self.grid = grid
        self.nodes = grid.nodes
        self.roots = [Root(r.kind, r.m, complex(r.value)) for r in roots]
        self.mode = mode
        self.sign = sign          # +1/-1 for the field-sector +-i pi T term, 0 otherwise
        self.cfg = cfg or SolverConfig()
        self.T = model.T
        self.indent = None
        # symmetric: k- roots are the conjugates of the k+ roots and aux is real
        self.symmetric = symmetric
        if symmetric:
            plus = [r for r in self.roots if r.kind == "plus"]
            minus = [r for r in self.roots if r.kind == "minus"]
            if mode != "real" or len(plus) != len(minus) or any(r.kind == "k0" for r in self.roots) \
                    or sorted(r.m for r in plus) != sorted(-1 - r.m for r in minus):
                raise InvalidArgument("root set is not symmetric under conjugation")
            self.pairs = [(p, next(q for q in minus if q.m == -1 - p.m)) for p in plus]
        if mode not in ("real", "straight", "indented"):
            raise InvalidArgument(f"unknown contour mode {mode}")
        if mode != "real" and not any(r.kind == "k0" for r in self.roots):
            raise ContourModeError("contour modes other than real need the field root")

    def clone(self):
        """Independent copy whose roots can be updated without touching this one."""
        new = Problem(self.model, self.grid, self.roots, self.mode, self.sign, self.cfg, self.symmetric)
        if self.indent is not None:
            new.indent = replace(self.indent)
        return new

    # ---- driving terms ----
    @property
    def expected_tail_plus(self):
        return -2j * math.pi if self.mode in ("straight", "indented") else 0j

    def const(self):
        T = self.T
        out = self.model.const + 1j * math.pi * T * self.sign
        if self.mode == "straight":
            out += 1j * T * self.model.phase_inf
        return out

    def active_roots(self):
        if self.mode == "straight":
            return [r for r in self.roots if r.kind != "k0"]
        return self.roots

    def driving(self, k, skip=None):
        m = self.model
        out = m.e0(k) + self.const()
        for r in self.active_roots():
            if r is skip:
                continue
            # at another root the difference may leave the strip; the phase is
            # then fixed only modulo 2*pi, which root residuals absorb
            out = out - 1j * self.T * r.sigma * m.phase(k - r.value, continued=skip is not None)
        return out

    def driving_deriv(self, k, skip=None):
        m = self.model
        out = m.de0(k) + 0j
        for r in self.active_roots():
            if r is skip:
                continue
            out = out - 1j * self.T * r.sigma * m.dphase(k - r.value, continued=skip is not None)
        return out

    # ---- kernel part ----
    def logfn(self, aux):
        raw = log1p_exp_neg(np.asarray(aux) / self.T)
        L = unwrap_log(raw)
        if not getattr(self.model, "decaying", True):
            # saturated but nonzero tails; _check_tails verifies the saturation
            return SampledFn(self.grid, L, complex(L[0]), complex(L[-1]))
        tm = quantize_tail(complex(L[0]), 1e-6)
        tp = quantize_tail(complex(L[-1]), 1e-6)
        return SampledFn(self.grid, L, tm, tp)

    def indent_logs(self, L, aux_grid):
        """Branch-continuous logs on the arc and on the diameter."""
        ind = self.indent
        T = self.T
        # arc: continue from L(a) through the arc nodes to b
        raw = log1p_exp_neg(np.concatenate([[aux_grid[ind.ia]], ind.arc_aux, [aux_grid[ind.ib]]]) / T)
        cont = unwrap_log(raw, max_jump=0.9 * math.pi)
        cont = cont + (L.values[ind.ia] - cont[0])
        jump = cont[-1] - L.values[ind.ib]
        if abs(jump - 2j * math.pi) > 1e-6:
            raise ContourModeError(f"indentation encloses winding {jump.imag / (2 * math.pi):.3f} instead of one root")
        arc_log = cont[1:-1]
        # diameter: real points, branch chosen to follow the grid function
        rawd = log1p_exp_neg(ind.dia_aux / T)
        ref = np.interp(ind.dia_nodes.real, self.nodes, L.values.real) \
            + 1j * np.interp(ind.dia_nodes.real, self.nodes, L.values.imag)
        n = np.round((ref.imag - rawd.imag) / (2 * math.pi))
        dia_log = rawd + 2j * math.pi * n
        return arc_log, dia_log

    def kernel_terms(self, k, L, deriv=False):
        """T * (analytic continuation of the integral term) at points k."""
        kern = self.model.kernel
        k = np.atleast_1d(np.asarray(k, dtype=complex))
        if kern is None:
            return np.zeros(k.shape, dtype=complex)
        out = offgrid_convolve(k, L, kern, deriv=deriv)
        if self.mode == "indented":
            out = out + self.indent_correction(k, deriv)
        return self.T * out

    def indent_correction(self, k, deriv=False):
        ind = self.indent
        kern = self.model.kernel
        f = kern.deriv if deriv else kern.at
        z_arc = k[:, None] - ind.arc_nodes[None, :]
        z_dia = k[:, None] - ind.dia_nodes[None, :]
        out = f(z_arc) @ (ind.arc_weights * ind.arc_log) - f(z_dia) @ (ind.dia_weights * ind.dia_log)
        b = self.nodes[ind.ib]
        if deriv:
            out = out + 2j * math.pi * kern.at(k - b)
        else:
            out = out + 2j * math.pi * kern.primitive_right(k - b)
        return out

    def grid_kernel_terms(self, L):
        kern = self.model.kernel
        if kern is None:
            return np.zeros(self.grid.points, dtype=complex)
        out = convolve_tailed(L, kern)
        if self.mode == "indented":
            out = out + self.indent_correction(self.nodes.astype(complex))
        return self.T * out

    # ---- evaluation ----
    def aux_at(self, k, L, skip=None):
        k = np.atleast_1d(np.asarray(k, dtype=complex))
        self.check_strip(k)
        return self.driving(k, skip) + self.kernel_terms(k, L)

    def aux_deriv_at(self, k, L, skip=None):
        k = np.atleast_1d(np.asarray(k, dtype=complex))
        self.check_strip(k)
        return self.driving_deriv(k, skip) + self.kernel_terms(k, L, deriv=True)

    def check_strip(self, k):
        s = self.model.strip
        if np.any(np.abs(np.imag(k)) >= s):
            raise DomainError(f"|Im k| must stay below {s}")

    def rhs(self, aux, L):
        new = self.driving(self.nodes.astype(complex)) + self.grid_kernel_terms(L)
        extra = None
        if self.mode == "indented":
            ind = self.indent
            pts = np.concatenate([ind.arc_nodes, ind.dia_nodes])
            extra = self.driving(pts) + self.kernel_terms(pts, L)
        return new, extra

    # ---- roots ----
    def newton_root(self, r, L):
        """Damped Newton on a(k) - i pi T (2m+1) with the root's own phase term removed.

        A step is halved until the residual drops and the root stays inside the
        strip; ten halvings without progress count as divergence.
        """
        cfg = self.cfg
        T = self.T
        strip = self.model.strip
        k = r.value
        g = self._root_gap(r, k, L)
        step = 0.0
        for _ in range(cfg.max_newton):
            dg = self.aux_deriv_at(k, L, skip=r)[0]
            if dg == 0:
                raise NewtonDivergence("vanishing derivative in root update")
            step = -g / dg
            if abs(step) <= cfg.root_tol * max(1.0, abs(k)):
                k = k + step
                break
            for _half in range(10):
                trial = k + step
                if abs(trial.imag) < strip:
                    gt = self._root_gap(r, trial, L)
                    if abs(gt) < abs(g) or abs(gt) <= 1e-14 * T:
                        break
                step = 0.5 * step
            else:
                if abs(trial.imag) >= strip:
                    raise RootEscape(f"root {r.kind} left the strip |Im k| < c")
                raise NewtonDivergence(f"no descent for root {r.kind} after ten step halvings")
            k, g = trial, gt
            if abs(step) <= cfg.root_tol * max(1.0, abs(k)):
                break
        r.value = k
        return abs(step)

    def _update_roots(self, L):
        # the other roots are frozen during each Newton solve, so report how far
        # each root moved rather than the last inner step
        step = 0.0
        if not self.symmetric:
            for r in self.active_roots():
                before = r.value
                self.newton_root(r, L)
                step = max(step, abs(r.value - before))
            return step
        for p, q in self.pairs:
            before = p.value
            self.newton_root(p, L)
            q.value = p.value.conjugate()
            step = max(step, abs(p.value - before))
        return step

    def _root_gap(self, r, k, L):
        """a(k) - i pi T (2m+1), reduced modulo 2 pi i T when the root sits
        beyond a branch cut of another root's phase term."""
        g = self.aux_at(k, L, skip=r)[0] - self.T * r.target
        s = self.model.strip
        if any(abs((k - o.value).imag) >= s for o in self.active_roots() if o is not r):
            n = round(g.imag / (2 * math.pi * self.T))
            g -= 2j * math.pi * self.T * n
        return g

    def root_residual(self, L):
        res = 0.0
        for r in self.active_roots():
            res = max(res, abs(self._root_gap(r, r.value, L)) / self.T)
        return res

    def check_roots(self):
        for r in self.roots:
            if r.kind == "plus" and r.value.imag <= 0:
                raise RootEscape("a k+ root crossed the real axis")
            if r.kind == "minus" and r.value.imag >= 0:
                raise RootEscape("a k- root crossed the real axis")
            if r.kind == "k0" and self.mode == "real" and r.value.imag <= 0:
                raise ContourModeError("the field root crossed below the real axis")
        vals = [r.value for r in self.roots]
        for i in range(len(vals)):
            for j in range(i):
                if abs(vals[i] - vals[j]) < 1e-8:
                    raise BranchCollision("two roots converged to the same point")

    # ---- iteration ----
    def setup_indentation(self, radius=None):
        k0 = next(r for r in self.roots if r.kind == "k0").value
        if k0.imag >= 0:
            raise ContourModeError("indented mode needs the field root below the axis")
        self.indent = make_indentation(self.grid, k0, radius)

    def solve(self, aux0, extra0=None, fixed_roots=False, polish=False):
        cfg = self.cfg
        aux = np.asarray(aux0, dtype=complex).copy()
        T = self.T
        if self.mode == "indented":
            if self.indent is None:
                self.setup_indentation()
            ind = self.indent
            if extra0 is None:
                pts = np.concatenate([ind.arc_nodes, ind.dia_nodes])
                extra0 = self._interp_extra(aux, pts)
            n_arc = len(ind.arc_nodes)
            ind.arc_aux = np.array(extra0[:n_arc])
            ind.dia_aux = np.array(extra0[n_arc:])
        have_roots = bool(self.active_roots()) and not fixed_roots
        res = np.inf
        it = 0
        rstep = 0.0
        history = []
        for it in range(1, cfg.max_iter + 1):
            L = self.logfn(aux)
            self._check_tails(L)
            if self.mode == "indented":
                self.indent.arc_log, self.indent.dia_log = self.indent_logs(L, aux)
            if have_roots and (res < cfg.newton_switch or it % cfg.newton_every == 1):
                rstep = self._update_roots(L)
                self.check_roots()
                if self.mode == "indented":
                    self._refresh_indentation(L)
            new, extra = self.rhs(aux, L)
            diff = new - aux
            res = float(np.max(np.abs(diff)))
            if extra is not None:
                old = np.concatenate([self.indent.arc_aux, self.indent.dia_aux])
                res = max(res, float(np.max(np.abs(extra - old))))
            history.append(res)
            a = cfg.damping
            aux = aux + a * diff
            if self.symmetric:
                aux = aux.real.astype(complex)
            if extra is not None:
                ext = old + a * (extra - old)
                n_arc = len(self.indent.arc_nodes)
                self.indent.arc_aux = ext[:n_arc]
                self.indent.dia_aux = ext[n_arc:]
            done = res < cfg.tol and (not have_roots or rstep < max(cfg.tol, cfg.root_tol))
            if done and polish:
                # continue until round-off stops further progress
                best = min(history[:-1], default=np.inf)
                done = len(history) > 8 and min(history[-8:]) >= 0.5 * min(history[:-8])
                done = done or res == 0.0 or it == cfg.max_iter
            if done:
                break
        else:
            raise NoConvergence(f"no convergence after {cfg.max_iter} iterations "
                                f"(residual {res:.3e})", residual=res)
        L = self.logfn(aux)
        self._check_tails(L)
        if self.mode == "indented":
            self.indent.arc_log, self.indent.dia_log = self.indent_logs(L, aux)
        rres = self.root_residual(L) if self.active_roots() else 0.0
        return aux, L, {"function": res, "roots": rres, "iterations": it}

    def _interp_extra(self, aux, pts):
        re = np.interp(pts.real, self.nodes, aux.real)
        im = np.interp(pts.real, self.nodes, aux.imag)
        return re + 1j * im

    def _refresh_indentation(self, L):
        """Keep the indentation around k0; rebuild it if the root moved too far."""
        k0 = next(r for r in self.roots if r.kind == "k0").value
        ind = self.indent
        if k0.imag >= 0:
            raise ContourModeError("field root moved above the axis in indented mode")
        if abs(k0 - ind.center) < 0.75 * ind.radius and abs(k0.imag) < 0.75 * ind.radius \
                and 2 * abs(k0.imag) <= ind.radius + self.grid.spacing:
            return
        new = make_indentation(self.grid, k0)
        pts = np.concatenate([new.arc_nodes, new.dia_nodes])
        vals = self.aux_at(pts, L)
        n_arc = len(new.arc_nodes)
        new.arc_aux = vals[:n_arc]
        new.dia_aux = vals[n_arc:]
        self.indent = new

    def _check_tails(self, L):
        if not getattr(self.model, "decaying", True):
            v = L.values
            tol = self.cfg.tail_tol
            if abs(v[1] - v[0]) > tol or abs(v[-1] - v[-2]) > tol:
                raise WindingAmbiguity("the log has not saturated at the grid edges")
            wind = round((v[-1] - v[0]).imag / (2 * math.pi))
            if 2j * math.pi * wind != self.expected_tail_plus:
                raise ContourModeError(f"log winds {wind} times but the {self.mode} contour "
                                       f"expects {self.expected_tail_plus.imag / (2 * math.pi):.0f}")
            return
        if abs(L.values[0] - L.tail_minus) > self.cfg.tail_tol or L.tail_minus != 0:
            raise WindingAmbiguity(f"left tail of the log is {L.values[0]:.3e}, expected 0")
        if abs(L.values[-1] - L.tail_plus) > self.cfg.tail_tol:
            raise WindingAmbiguity(f"right tail of the log is not settled ({L.values[-1]:.3e})")
        if L.tail_plus != self.expected_tail_plus:
            raise ContourModeError(f"log winds to {L.tail_plus:.3f} but the {self.mode} contour "
                                   f"expects {self.expected_tail_plus:.3f}")

    # ---- eigenvalue ----
    def log_integral(self, L, weight=None):
        """(1/2pi) int p0' L along the contour, regularized in straight mode."""
        m = self.model
        w = m.dp0(self.nodes) if weight is None else weight
        val = integrate_tailed(L, w)
        lam = self.grid.half_width
        p_inf = getattr(m, "p0_inf", None)
        if p_inf is None:
            ref = m.p0(lam)
        else:
            # bounded momentum: add the constant tails beyond the grid
            if weight is None:
                val += L.tail_minus * (m.p0(-lam) + p_inf) + L.tail_plus * (p_inf - m.p0(lam))
            ref = p_inf
        if self.mode == "straight":
            val += 2j * math.pi * ref
        elif self.mode == "indented":
            ind = self.indent
            b = self.nodes[ind.ib]
            val += 2j * math.pi * (ref - m.p0(b))
            val += np.sum(ind.arc_weights * m.dp0(ind.arc_nodes) * ind.arc_log)
            val -= np.sum(ind.dia_weights * m.dp0(ind.dia_nodes) * ind.dia_log)
        return val / (2 * math.pi)

    def root_part(self):
        m = self.model
        out = 0j
        for r in self.active_roots():
            out += 1j * r.sigma * m.p0(r.value)
        if any(r.kind == "k0" for r in self.roots):
            out += m.field_const
        return out
