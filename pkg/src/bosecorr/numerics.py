"""Grids, the Lieb-Liniger phase and kernel, FFT convolution with tails, and
branch-continuous complex logarithms."""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import fft as sfft
from scipy.special import erf, psi

from .errors import DomainError, InvalidArgument, TailMismatch, WindingAmbiguity


@dataclass(frozen=True)
class Grid:
    """Uniform grid k_i = -half_width + i*spacing, i = 0..points-1."""
    half_width: float
    points: int

    @property
    def spacing(self):
        return 2.0 * self.half_width / (self.points - 1)

    @property
    def nodes(self):
        return -self.half_width + self.spacing * np.arange(self.points)


def build_grid(half_width, points):
    points = int(points)
    if not half_width > 0 or not math.isfinite(half_width):
        raise InvalidArgument(f"half width must be positive, got {half_width}")
    if points < 64 or points & (points - 1):
        raise InvalidArgument(f"points must be a power of two >= 64, got {points}")
    return Grid(float(half_width), points)


@dataclass(frozen=True)
class SampledFn:
    grid: Grid
    values: np.ndarray
    tail_minus: complex = 0j
    tail_plus: complex = 0j

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.points,):
            raise InvalidArgument("values do not match the grid")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def tail_error(self):
        return max(abs(self.values[0] - self.tail_minus), abs(self.values[-1] - self.tail_plus))

    def check_tails(self, tol):
        err = self.tail_error()
        if err > tol:
            raise TailMismatch(f"boundary samples differ from declared tails by {err:.3e}")
        return err


@dataclass(frozen=True)
class KernelParams:
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidArgument(f"coupling must be positive, got {self.c}")


def _check_strip(z, width):
    z = np.asarray(z)
    if np.iscomplexobj(z) and np.any(np.abs(z.imag) >= width):
        raise DomainError(f"|Im k| must stay below {width}")


def theta_bar(k, c, continued=False):
    """Two-body phase i*log((ic+k)/(ic-k)) = 2*arctan(k/c), continued for |Im k| < c.

    continued=True drops the strip check and uses the principal arctan beyond
    it; that value is defined only up to multiples of 2*pi.
    """
    if math.isinf(c):
        return np.zeros_like(np.asarray(k, dtype=complex))
    if not continued:
        _check_strip(k, c)
    return 2.0 * np.arctan(np.asarray(k) / c)


def kernel_bar(k, c, continued=False):
    """Lieb-Liniger kernel 2c/(k^2+c^2), the derivative of theta_bar."""
    if math.isinf(c):
        return np.zeros_like(np.asarray(k, dtype=complex))
    if not continued:
        _check_strip(k, c)
    k = np.asarray(k)
    return 2.0 * c / (k * k + c * c)


def trigamma(z):
    """psi'(z) for complex z with Re z > 0 (recurrence plus asymptotic series)."""
    z = np.array(z, dtype=complex, ndmin=1)
    acc = np.zeros_like(z)
    small = np.abs(z) < 20.0
    while np.any(small):
        acc[small] += 1.0 / z[small] ** 2
        z[small] += 1.0
        small = np.abs(z) < 20.0
    w = 1.0 / z
    w2 = w * w
    series = w + 0.5 * w2 + w * w2 * (1 / 6 - w2 * (1 / 30 - w2 * (1 / 42 - w2 * (1 / 30 - w2 * 5 / 66))))
    return acc + series


class LorentzKernel:
    """Normalized Lorentzian kernel (1/2pi) * 2c/(x^2+c^2) times a sign."""

    def __init__(self, c, sign=1.0):
        self.c = float(c)
        self.sign = float(sign)
        self.key = ("lorentz", self.c, self.sign)

    def __eq__(self, other):
        return getattr(other, "key", None) == self.key

    def __hash__(self):
        return hash(self.key)

    def at(self, z):
        _check_strip(z, self.c)
        return self.sign * self.c / (np.pi * (z * z + self.c ** 2))

    def deriv(self, z):
        _check_strip(z, self.c)
        return -self.sign * 2.0 * self.c * z / (np.pi * (z * z + self.c ** 2) ** 2)

    def primitive_right(self, z):
        """Integral of the kernel over (-inf, z]."""
        return self.sign * (0.5 + np.arctan(z / self.c) / np.pi)

    def _tail(self, a, h):
        # h * sum_{n>=1} kernel(-(n + a) h) for complex a
        b = self.c / h
        return self.sign * (psi(1 + a + 1j * b) - psi(1 + a - 1j * b)) / (2j * np.pi)

    def _tail_da(self, a, h):
        b = self.c / h
        return self.sign * (trigamma(1 + a + 1j * b) - trigamma(1 + a - 1j * b)) / (2j * np.pi)

    def tail_sums(self, k, grid):
        """Discrete tail sums (left, right): h*sum_{n>=1} kernel(k -/+ (Lambda + n h))."""
        k = np.asarray(k, dtype=complex)
        h = grid.spacing
        lam = grid.half_width
        right = self._tail((lam - k) / h, h)
        left = self._tail((lam + k) / h, h)
        return left, right

    def tail_sums_deriv(self, k, grid):
        k = np.asarray(k, dtype=complex)
        h = grid.spacing
        lam = grid.half_width
        right = -self._tail_da((lam - k) / h, h) / h
        left = self._tail_da((lam + k) / h, h) / h
        return left, right


def theta_xxz(lam, eta, continued=False):
    """Lattice two-magnon phase 2*arctan(tanh(lam)*cot(eta)); tends to +-(pi - 2*eta)."""
    lam = np.asarray(lam)
    if not continued:
        _check_strip(lam, min(eta, math.pi - eta))
    return 2.0 * np.arctan(np.tanh(lam) / math.tan(eta))


def inv_cosh_shift(z, b):
    """1/(cosh(2z) - b) written through w = exp(-2|Re z|) so large |z| cannot overflow."""
    z = np.asarray(z)
    s = np.where(np.real(z) >= 0, 1.0, -1.0)
    w = np.exp(-2 * s * z)
    return 2 * w / (1 + w * w - 2 * b * w)


def sinh_over_shift_sq(z, b):
    """sinh(2z)/(cosh(2z) - b)^2 in the same overflow-free form."""
    z = np.asarray(z)
    s = np.where(np.real(z) >= 0, 1.0, -1.0)
    w = np.exp(-2 * s * z)
    return 2 * s * w * (1 - w * w) / (1 + w * w - 2 * b * w) ** 2


def kernel_xxz(lam, eta, continued=False):
    """K = d theta_xxz / d lam = 2 sin(2 eta) / (cosh(2 lam) - cos(2 eta))."""
    lam = np.asarray(lam)
    if not continued:
        _check_strip(lam, min(eta, math.pi - eta))
    return 2.0 * math.sin(2 * eta) * inv_cosh_shift(lam, math.cos(2 * eta))


class TrigKernel:
    """Normalized lattice kernel K(lam)/2pi of the XXZ chain.

    Discrete tail sums h*sum_{n>=1} kernel(z + n h) are exact: terms with
    Re(z + n h) below a cut are added directly, the rest through the
    expansion kernel(u) = 2a sum_j U_j(b) exp(-2(j+1)u), each exponential
    summed as a geometric series.
    """
    cut = 1.5
    terms = 24

    def __init__(self, eta):
        self.eta = float(eta)
        self.a = math.sin(2 * self.eta) / math.pi
        self.b = math.cos(2 * self.eta)
        self.width = min(self.eta, math.pi - self.eta)
        self.key = ("trig", self.eta)
        u = np.zeros(self.terms)
        u[0], u[1] = 1.0, 2 * self.b
        for j in range(2, self.terms):
            u[j] = 2 * self.b * u[j - 1] - u[j - 2]
        self._cheb = u

    def __eq__(self, other):
        return getattr(other, "key", None) == self.key

    def __hash__(self):
        return hash(self.key)

    def _w(self, z):
        # w = exp(-2|Re z| ...) keeps cosh(2z) from overflowing
        z = np.asarray(z)
        s = np.where(np.real(z) >= 0, 1.0, -1.0)
        return s, np.exp(-2 * s * z)

    def at(self, z):
        _check_strip(z, self.width)
        _, w = self._w(z)
        return 2 * self.a * w / (1 + w * w - 2 * self.b * w)

    def deriv(self, z):
        _check_strip(z, self.width)
        s, w = self._w(z)
        return -4 * self.a * s * w * (1 - w * w) / (1 + w * w - 2 * self.b * w) ** 2

    def primitive_right(self, z):
        """Integral of the kernel over (-inf, z]."""
        return (2.0 * np.arctan(np.tanh(z) / math.tan(self.eta)) + math.pi - 2 * self.eta) / (2 * math.pi)

    def _sum(self, z, h, deriv):
        """h*sum_{n>=1} f(z + n h) with f the kernel or its derivative."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        f = self.deriv if deriv else self.at
        nd = np.clip(np.ceil((self.cut - z.real) / h), 0, None).astype(int)
        out = np.zeros(z.shape, dtype=complex)
        for n in range(1, int(nd.max(initial=0)) + 1):
            sel = nd >= n
            out[sel] += f(z[sel] + n * h)
        start = z + nd * h
        for j in range(self.terms):
            s = 2.0 * (j + 1)
            q = math.exp(-s * h)
            g = 2 * self.a * self._cheb[j] * np.exp(-s * start) * q / (1 - q)
            out += -s * g if deriv else g
        return h * out

    def tail_sums(self, k, grid):
        k = np.asarray(k, dtype=complex)
        lam = grid.half_width
        h = grid.spacing
        return self._sum(k + lam, h, False), self._sum(lam - k, h, False)

    def tail_sums_deriv(self, k, grid):
        k = np.asarray(k, dtype=complex)
        lam = grid.half_width
        h = grid.spacing
        return self._sum(k + lam, h, True), -self._sum(lam - k, h, True)


@lru_cache(maxsize=64)
def _kernel_spectrum(kernel, points, spacing):
    n = sfft.next_fast_len(2 * points)
    lags = np.zeros(n)
    lags[:points] = spacing * np.arange(points)
    lags[n - points + 1:] = -spacing * np.arange(points - 1, 0, -1)
    samples = np.asarray(kernel.at(lags), dtype=float)
    samples[points:n - points + 1] = 0.0
    return n, sfft.fft(samples)


def fft_convolve(values, grid, kernel):
    """h * sum_j kernel(k_i - k_j) values_j for all nodes i (full trapezoid weights)."""
    n, spec = _kernel_spectrum(kernel, grid.points, grid.spacing)
    out = sfft.ifft(sfft.fft(np.asarray(values, dtype=complex), n) * spec)[:grid.points]
    return grid.spacing * out


@lru_cache(maxsize=64)
def _grid_tail_sums(kernel, grid):
    left, right = kernel.tail_sums(grid.nodes, grid)
    left = np.real_if_close(left, tol=1e6)
    right = np.real_if_close(right, tol=1e6)
    left.flags.writeable = False
    right.flags.writeable = False
    return left, right


def convolve_tailed(L, kernel, tail_tol=None):
    """Convolution of a tailed sampled function with a kernel on its own grid.

    Constant tails beyond the grid are summed in closed form with the same
    node spacing, so the result is the infinite trapezoid sum.
    """
    if tail_tol is not None:
        L.check_tails(tail_tol)
    out = fft_convolve(L.values, L.grid, kernel)
    if L.tail_minus != 0 or L.tail_plus != 0:
        left, right = _grid_tail_sums(kernel, L.grid)
        out = out + L.tail_minus * left + L.tail_plus * right
    return out


def convolve(L, kp, tail_tol=1e-8):
    """(1/2pi) * integral of K(k-k') L(k') dk' on the grid of L."""
    out = convolve_tailed(L, LorentzKernel(kp.c), tail_tol)
    return SampledFn(L.grid, out, L.tail_minus, L.tail_plus)


def offgrid_convolve(k, L, kernel, deriv=False):
    """Same sum as convolve_tailed evaluated at arbitrary (complex) points k."""
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    nodes = L.grid.nodes
    h = L.grid.spacing
    f = kernel.deriv if deriv else kernel.at
    out = np.empty(k.shape, dtype=complex)
    for i0 in range(0, k.size, 64):
        chunk = k[i0:i0 + 64]
        out[i0:i0 + 64] = h * (f(chunk[:, None] - nodes[None, :]) @ L.values)
    if L.tail_minus != 0 or L.tail_plus != 0:
        sums = kernel.tail_sums_deriv(k, L.grid) if deriv else kernel.tail_sums(k, L.grid)
        out = out + L.tail_minus * sums[0] + L.tail_plus * sums[1]
    return out


def log1p_exp_neg(x):
    """A branch of log(1 + exp(-x)) that does not overflow for large |x|."""
    x = np.asarray(x, dtype=complex)
    pos = x.real >= 0
    out = np.empty_like(x)
    out[pos] = np.log1p(np.exp(-x[pos]))
    out[~pos] = -x[~pos] + np.log1p(np.exp(x[~pos]))
    return out


def unwrap_log(raw, max_jump=0.75 * np.pi):
    """Make the imaginary part of a log continuous, principal at the first node."""
    raw = np.asarray(raw, dtype=complex)
    phase = np.unwrap(raw.imag)
    jumps = np.abs(np.diff(phase))
    if jumps.size and jumps.max() > max_jump:
        i = int(np.argmax(jumps))
        raise WindingAmbiguity(f"phase jumps by {jumps[i]:.3f} between nodes {i} and {i + 1}")
    first = math.remainder(phase[0], 2 * math.pi)
    if first == -math.pi:
        first = math.pi
    phase = phase + (first - phase[0])
    return raw.real + 1j * phase


def branch_continuous_log(f, max_jump=0.75 * np.pi):
    """Branch-continuous log of a sampled nonvanishing function, tails recorded."""
    vals = np.asarray(f.values, dtype=complex)
    if np.any(vals == 0):
        raise InvalidArgument("function vanishes on the grid")
    out = unwrap_log(np.log(vals), max_jump)
    return SampledFn(f.grid, out, out[0], out[-1])


def quantize_tail(value, tol=1e-6):
    """Snap a tail value to the nearest multiple of 2*pi*i when within tol."""
    n = round(value.imag / (2 * math.pi))
    target = 2j * math.pi * n
    if abs(value - target) <= tol:
        return target
    return complex(value)


def step_reference(k, tail_minus, tail_plus, width=1.0):
    """Smooth step between the two tails; integrates to (tail_minus+tail_plus)*Lambda on [-Lambda, Lambda]."""
    return tail_minus + (tail_plus - tail_minus) * 0.5 * (1.0 + erf(np.asarray(k) / width))


def integrate_tailed(L, weight=None, step_width=1.0):
    """Trapezoid integral over [-Lambda, Lambda] of weight*L.

    With an even weight the constant tails are removed by a smooth step that
    has an exact integral, so the remaining integrand decays at both ends.
    """
    k = L.grid.nodes
    h = L.grid.spacing
    w = np.ones_like(k) if weight is None else np.asarray(weight)
    ref = step_reference(k, L.tail_minus, L.tail_plus, step_width)
    g = w * (L.values - ref)
    inner = h * (g.sum() - 0.5 * (g[0] + g[-1]))
    if L.tail_minus == 0 and L.tail_plus == 0:
        return inner
    # exact integral of w*ref for even w: the erf part is odd
    half = 0.5 * (L.tail_minus + L.tail_plus)
    wint = h * (w.sum() - 0.5 * (w[0] + w[-1])) if weight is not None else 2 * L.grid.half_width
    return inner + half * wint
