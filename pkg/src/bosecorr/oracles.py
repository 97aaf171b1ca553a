"""Closed-form reference values: hard-core gas correlation lengths and
Luttinger-liquid predictions at low temperature."""
from dataclasses import dataclass
import math

from scipy import integrate

from .errors import InvalidArgument, NoFermiSea


def tonks_field_corrlen(mu, T):
    """Field-sector 1/xi of the hard-core gas by adaptive quadrature.

    1/xi = (1/2pi) int log|(e^x+1)/(e^x-1)| dk, x = (k^2-mu)/T, plus sqrt(-mu) when mu < 0.
    """
    if not T > 0:
        raise InvalidArgument("T must be positive")

    def f(k):
        x = (k * k - mu) / T
        if x == 0:
            return math.inf
        return math.log(abs(1.0 / math.tanh(0.5 * x)))

    top = math.sqrt(max(mu, 0.0) + 60.0 * T) + 1.0
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=500)
    # the integrand lives within a thermal width of its peak; break the range
    # there so that the adaptive rule cannot step over it at low T
    if mu > 0:
        s = math.sqrt(mu)
        a = min(0.5 * s, 40.0 * T / s)
        cuts = [0.0, s - a, s, s + a, top]
    else:
        cuts = [0.0, min(math.sqrt(40.0 * T), 0.5 * top), top]
    val = sum(integrate.quad(f, lo, hi, **opts)[0] for lo, hi in zip(cuts[:-1], cuts[1:]))
    val += integrate.quad(f, top, math.inf, **opts)[0]
    out = val / math.pi
    if mu < 0:
        out += math.sqrt(-mu)
    return out


@dataclass(frozen=True)
class CftPrediction:
    sector: str
    l: int
    quantum_numbers: tuple
    value: complex


def cft_prediction(gs, sector, l, T, quantum_numbers=()):
    """Leading low-T 1/xi from the conformal exponents of the gas.

    field: 2 pi T/v_F * (1/(4 Z^2) + l^2 Z^2)
    density: l = 0 gives the non-oscillating 2 pi T/v_F; l != 0 gives
    2 pi T/v_F * l^2 Z^2 + 2 i l k_F.
    """
    if gs is None or not gs.mu > 0:
        raise NoFermiSea("Luttinger-liquid predictions need mu > 0")
    if not T > 0:
        raise InvalidArgument("T must be positive")
    rate = 2 * math.pi * T / gs.v_f
    z2 = gs.z ** 2
    if sector == "field":
        val = complex(rate * (1 / (4 * z2) + l * l * z2))
    elif sector == "density":
        if l == 0:
            val = complex(rate)
        else:
            val = complex(rate * l * l * z2, 2 * l * gs.k_f)
    else:
        raise InvalidArgument(f"no prediction for sector {sector!r}")
    return CftPrediction(sector, int(l), tuple(quantum_numbers), val)
