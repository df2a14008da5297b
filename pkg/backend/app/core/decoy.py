"""
PM-QCC Decoy-grenser
====================
Tre-intensitets decoy-analyse: totale intensiteter, G-koeffisienter fra
Gauss-eliminasjon, nedre grense for to-foton yield Y2 og øvre grense for
fasefeilraten E_X.

Systemet som elimineres er

    e^t Q_t = Y0 + 2t Y1 + t^2/2 Y2 + t^3/6 Y3 + sum_{k>=4} t^k/k! Yk

for t = mu_tot, nu_tot, omega_tot. Y1 og Y3 faller bort, Y0- og Yk>=4-ledd
har ikke-positive koeffisienter og kastes, noe som gir en nedre grense.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from app.core.errors import DecoyInfeasibleError, ParameterError, UndefinedQuantityError
from app.models.schemas import PartySource

logger = logging.getLogger(__name__)

RATIO_TOLERANCE = 5e-2
RATIO_WARNING = 1e-3
SERIES_TAIL = 1e-15


# =============================================================================
# TYPER
# =============================================================================

@dataclass(frozen=True)
class IntensityTotals:
    """Summerte intensiteter over de tre partene per nivå."""
    mu_tot: float
    nu_tot: float
    omega_tot: float
    ratio_deviation: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.mu_tot, self.nu_tot, self.omega_tot)


@dataclass(frozen=True)
class GCoefficients:
    g: float
    g_nu: float
    g_0: float
    g_mu: float
    g_omega: float


@dataclass(frozen=True)
class TwoPhotonBound:
    """Y2^L etter klemming, rå verdi og om grensen er tom (vacuous)."""
    value: float
    raw: float
    vacuous: bool


# =============================================================================
# TOTALER OG KOEFFISIENTER
# =============================================================================

def _ratio_deviation(sources: Sequence[PartySource]) -> float:
    """Største relative avvik i nu/mu og omega/mu fra Alices forhold."""
    ref = sources[0]
    worst = 0.0
    for s in sources[1:]:
        for attr in ("nu", "omega"):
            r_ref = getattr(ref, attr) / ref.mu
            r = getattr(s, attr) / s.mu
            if r_ref > 0:
                worst = max(worst, abs(r - r_ref) / r_ref)
            elif r > 0:
                worst = math.inf
    return worst


def totals(
    source_a: PartySource, source_b: PartySource, source_c: PartySource
) -> IntensityTotals:
    """
    mu_tot = mu_a+mu_b+mu_c, tilsvarende for nu og omega.

    Raises:
        DecoyInfeasibleError: ved brudd på mu_tot > nu_tot > omega_tot > 0,
            eller forholdsavvik over RATIO_TOLERANCE
    """
    sources = (source_a, source_b, source_c)
    mu_tot = sum(s.mu for s in sources)
    nu_tot = sum(s.nu for s in sources)
    omega_tot = sum(s.omega for s in sources)

    violations = []
    if not omega_tot > 0:
        violations.append("omega_tot: must be > 0")
    if not nu_tot > omega_tot:
        violations.append("nu_tot: nu_tot > omega_tot violated")
    if not mu_tot > nu_tot:
        violations.append("mu_tot: mu_tot > nu_tot violated")
    if violations:
        raise DecoyInfeasibleError("Decoy-analysen er ugyldig", violations)

    deviation = _ratio_deviation(sources)
    if deviation > RATIO_TOLERANCE:
        raise DecoyInfeasibleError(
            "Intensitetsforholdene er ulike mellom partene",
            [f"ratio: deviation {deviation:.3e} exceeds {RATIO_TOLERANCE:.0e}"],
        )
    if deviation > RATIO_WARNING:
        logger.warning(f"Intensitetsforhold avviker med {deviation:.2%} mellom partene")

    return IntensityTotals(mu_tot, nu_tot, omega_tot, deviation)


def g_coefficients(t: IntensityTotals) -> GCoefficients:
    """De fem koeffisientene fra Gauss-eliminasjonen."""
    mu, nu, om = t.as_tuple()
    return GCoefficients(
        g=(mu - nu) * (nu - om) * mu * nu**2 * om * (mu - om),
        g_nu=mu * nu * om * math.exp(nu) * (mu**2 - om**2),
        g_0=(mu - nu) * (nu - om) * nu * (mu * (mu + nu) - om * (nu + om)),
        g_mu=(nu**2 - om**2) * nu**2 * om * math.exp(mu),
        g_omega=(mu**2 - nu**2) * mu * nu**2 * math.exp(om),
    )


# =============================================================================
# GRENSER
# =============================================================================

def y2_lower(q_mu: float, q_nu: float, q_omega: float, t: IntensityTotals) -> TwoPhotonBound:
    """
    Y2^L = (2/G)(G_nu*Q_nu - G_mu*Q_mu - G_omega*Q_omega), klemt til [0, 1].

    I endelig-størrelse-modus sendes Q_nu^L, Q_mu^U og Q_omega^U inn.
    """
    for name, q in (("q_mu", q_mu), ("q_nu", q_nu), ("q_omega", q_omega)):
        if not 0 <= q <= 1:
            raise ParameterError("Ugyldig gain", [f"{name}: must be in [0,1] (got {q})"])
    c = g_coefficients(t)
    raw = (2 / c.g) * (c.g_nu * q_nu - c.g_mu * q_mu - c.g_omega * q_omega)
    vacuous = raw <= 0
    if vacuous and (q_mu or q_nu or q_omega):
        logger.debug("Decoy-grensen er tom (Y2^L <= 0)")
    return TwoPhotonBound(value=min(1.0, max(0.0, raw)), raw=raw, vacuous=vacuous)


def forward_gain_series(yields: Sequence[float], t_total: float) -> float:
    """
    Q = e^(-t)(Y0 + 2t Y1 + t^2/2 Y2 + ...), kuttet når Poisson-halen < 1e-15.

    Brukes som orakel for y2_lower i testene.
    """
    y = np.asarray(yields, dtype=float)
    if y.size < 11:
        raise ParameterError("For kort yield-vektor", ["yields: need k_max >= 10"])
    if np.any((y < 0) | (y > 1)):
        raise ParameterError("Ugyldig yield", ["yields: must be in [0,1]"])
    k = np.arange(y.size)
    weights = poisson.pmf(k, t_total)
    weights[1] *= 2  # serien har 2t foran Y1
    tail = poisson.sf(k, t_total)
    cut = int(np.argmax(tail < SERIES_TAIL)) if np.any(tail < SERIES_TAIL) else y.size - 1
    return float(np.dot(weights[: cut + 1], y[: cut + 1]))


def poisson_weight(k: int, mu_tot: float) -> float:
    """P_mu(k) = e^(-mu_tot) mu_tot^k / k!."""
    if k < 0 or mu_tot <= 0:
        raise ParameterError("Ugyldig Poisson-argument", [f"k={k}, mu_tot={mu_tot}"])
    return float(poisson.pmf(k, mu_tot))


def phase_error_upper(y2: float, q_mu_ref: float, mu_tot: float) -> float:
    """E_X^U = 1 - P_mu(2) * Y2^L / Q_mu, klemt til [0, 1]."""
    if q_mu_ref <= 0:
        raise UndefinedQuantityError("E_X^U er udefinert når referanse-gain er 0")
    value = 1 - poisson_weight(2, mu_tot) * y2 / q_mu_ref
    return min(1.0, max(0.0, value))


def parity_weights(mu_tot: float) -> tuple[float, float]:
    """(p_even, p_odd) = e^(-mu)(cosh mu, sinh mu)."""
    if mu_tot < 0:
        raise ParameterError("Ugyldig intensitet", ["mu_tot: must be >= 0"])
    p_odd = -math.expm1(-2 * mu_tot) / 2
    return 1 - p_odd, p_odd
