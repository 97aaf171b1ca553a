"""Zero-temperature linear integral equations on the Fermi interval [-q, q].

Every equation has the form f(k) - (1/2pi) int_{-q}^{q} K(k-l) f(l) dl = rhs(k)
with the Lieb-Liniger kernel K(k) = 2c/(k^2+c^2), solved by Nystrom's method.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument, NoFermiSea, SingularSystem
from .numerics import kernel_bar, theta_bar


@dataclass(frozen=True)
class FermiInterval:
    q: float
    order: int = 64

    def __post_init__(self):
        if not self.q > 0:
            raise InvalidArgument(f"Fermi boundary must be positive, got {self.q}")
        if self.order < 32:
            raise InvalidArgument("quadrature order must be at least 32")

    @property
    def quadrature(self):
        x, w = np.polynomial.legendre.leggauss(self.order)
        return self.q * x, self.q * w


class LinearSolution:
    """Nystrom solution; evaluates f anywhere through the integral equation itself."""

    def __init__(self, c, fi, rhs, values):
        self.c = c
        self.fi = fi
        self.rhs = rhs
        self.nodes, self.weights = fi.quadrature
        self.values = values

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        base = np.asarray(self.rhs(k), dtype=float)
        if math.isinf(self.c):
            return base
        kk = np.atleast_1d(k)
        mat = kernel_bar(kk[:, None] - self.nodes[None, :], self.c) / (2 * math.pi)
        out = np.atleast_1d(base) + mat @ (self.weights * self.values)
        return out.reshape(k.shape)

    def integral(self, weight=None):
        w = 1.0 if weight is None else weight(self.nodes)
        return float(np.sum(self.weights * w * self.values))


def _operator(c, fi):
    x, w = fi.quadrature
    if math.isinf(c):
        return np.eye(len(x))
    mat = np.eye(len(x)) - kernel_bar(x[:, None] - x[None, :], c) * w[None, :] / (2 * math.pi)
    return mat


def solve_linear_ie(rhs, c, fi):
    """Solve f - (1/2pi) K f = rhs on [-q, q]; rhs is a callable of k."""
    x, _ = fi.quadrature
    a = _operator(c, fi)
    b = np.asarray(rhs(x), dtype=float) * np.ones_like(x)
    try:
        f = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(f)):
        raise SingularSystem("non-finite Nystrom solution")
    return LinearSolution(c, fi, rhs, f)


def resolvent(c, fi, k, l):
    """R(k, l) solving R(k,l) - (1/2pi) int K(k-m) R(m,l) dm = K(k-l)/2pi."""
    return solve_linear_ie(lambda x: kernel_bar(x - l, c) / (2 * math.pi), c, fi)(k)


def dressed_phase(c, fi, k, l):
    """F(k|l) solving F(k|l) - (1/2pi) int K(k-m) F(m|l) dm = theta(k-l)/2pi."""
    return solve_linear_ie(lambda x: theta_bar(x - l, c).real / (2 * math.pi), c, fi)(k)


def dressed_energy0(c, mu, fi):
    return solve_linear_ie(lambda k: k * k - mu, c, fi)


def solve_fermi_boundary(c, mu, order=64, tol=1e-13):
    """q with eps0(q; q) = 0; eps0 at the boundary increases with q."""
    if not mu > 0:
        raise NoFermiSea(f"no Fermi sea for mu = {mu}")
    if math.isinf(c):
        return FermiInterval(math.sqrt(mu), order)

    def edge(q):
        return float(dressed_energy0(c, mu, FermiInterval(q, order))(q))

    lo = 0.5 * math.sqrt(mu)
    while edge(lo) > 0:
        lo *= 0.5
    hi = math.sqrt(mu)
    while edge(hi) < 0:
        hi *= 1.5
    q = brentq(edge, lo, hi, xtol=tol * hi, rtol=4 * np.finfo(float).eps, maxiter=200)
    return FermiInterval(q, order)


@dataclass(frozen=True)
class GroundStateSummary:
    c: float
    mu: float
    q: float
    density: float
    k_f: float
    rho_at_q: float
    z: float
    v_f: float
    eps0_prime_at_q: float


def ground_state_summary(c, mu, order=64):
    fi = solve_fermi_boundary(c, mu, order)
    q = fi.q
    rho = solve_linear_ie(lambda k: np.full_like(k, 1 / (2 * math.pi)), c, fi)
    z = solve_linear_ie(lambda k: np.ones_like(k), c, fi)
    de = solve_linear_ie(lambda k: 2.0 * k, c, fi)
    d = rho.integral()
    zq = float(z(q))
    dq = float(de(q))
    return GroundStateSummary(c, mu, q, d, math.pi * d, float(rho(q)), zq, dq / zq, dq)
