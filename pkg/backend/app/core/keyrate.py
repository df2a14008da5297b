"""
PM-QCC Nøkkelrate
=================
Setter sammen endelig-størrelse-raten R1 og den asymptotiske raten R2 fra
observerte eller simulerte størrelser.

    R = (2/D)^2 * Q * [1 - f*h(E_Z^max) - h(E_X^U)]

R1 er per totalrunde (Q = m_mu/N), R2 er per signalrunde (Q = Q_mu).
Faktoren (2/D)^2 kommer fra fase-postseleksjonen.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from app.core import channel as analytic
from app.core.decoy import IntensityTotals, phase_error_upper, totals, y2_lower
from app.core.errors import ParameterError
from app.core.finite_size import gain_bound_pair
from app.models.schemas import (
    ExMode,
    ObservedBlock,
    PartySource,
    ProtocolConfig,
    QberModel,
    RateReport,
    StarChannel,
    Tier,
)

logger = logging.getLogger(__name__)

Sources = tuple[PartySource, PartySource, PartySource]

# 62 500 pulser per 100 us, hvorav 10 x 4000 signalpulser
DEFAULT_CLOCK_HZ = 6.25e8
DEFAULT_SIGNAL_FRACTION = 0.64


# =============================================================================
# ENTROPI OG YIELD
# =============================================================================

def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2(1-x), med h(0) = h(1) = 0."""
    if not 0 <= x <= 1:
        raise ParameterError("Ugyldig sannsynlighet", [f"x: must be in [0,1] (got {x})"])
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def capped_entropy(x: float) -> float:
    """h(min(x, 1/2)): en feilrate over 1/2 gir ingen informasjon, ikke negativ kostnad."""
    return binary_entropy(min(max(x, 0.0), 0.5))


def ghz_yield(ez_list: Sequence[float], ex: float) -> float:
    """
    Destillasjons-yield for GHZ-tilstanden med M parter.

    Y = 1 - max_m h(E_Z^{1,m}) - h(E_X), gulv ved 0.
    """
    if not ez_list:
        raise ParameterError("Mangler QBER", ["ez_list: need at least one pair"])
    for x in (*ez_list, ex):
        if not 0 <= x <= 1:
            raise ParameterError("Ugyldig feilrate", [f"rate: must be in [0,1] (got {x})"])
    value = 1 - max(capped_entropy(e) for e in ez_list) - capped_entropy(ex)
    return max(0.0, value)


def _bracket(ez_max: float, ex: float, f: float) -> float:
    return 1 - f * capped_entropy(ez_max) - capped_entropy(ex)


def _prefactor(D: int) -> float:
    if D < 2 or D % 2:
        raise ParameterError("Ugyldig antall faseskiver", [f"D: must be even and >= 2 (got {D})"])
    return (2 / D) ** 2


# =============================================================================
# ASYMPTOTISK RATE
# =============================================================================

@dataclass(frozen=True)
class AsymptoticTerms:
    y2_lower: float
    ex_upper: float
    r_raw: float

    @property
    def rate(self) -> float:
        return max(0.0, self.r_raw)


def asymptotic_terms(
    q_mu: float,
    q_nu: float,
    q_omega: float,
    ez_max: float,
    t: IntensityTotals,
    D: int,
    f: float,
) -> AsymptoticTerms:
    """Mellomresultatene bak R2 (ubegrensede gains, ingen Chernoff)."""
    y2 = y2_lower(q_mu, q_nu, q_omega, t).value
    ex = phase_error_upper(y2, q_mu, t.mu_tot) if q_mu > 0 else 1.0
    r_raw = _prefactor(D) * q_mu * _bracket(ez_max, ex, f)
    return AsymptoticTerms(y2_lower=y2, ex_upper=ex, r_raw=r_raw)


def asymptotic_key_rate(
    q_mu: float,
    q_nu: float,
    q_omega: float,
    ez_max: float,
    sources: Sources,
    D: int,
    f: float,
) -> float:
    """R2 = (2/D)^2 * Q_mu * [1 - f*h(E_Z^max) - h(E_X^U,asym)], per signalrunde."""
    for name, q in (("q_mu", q_mu), ("q_nu", q_nu), ("q_omega", q_omega)):
        if not 0 <= q <= 1:
            raise ParameterError("Ugyldig gain", [f"{name}: must be in [0,1] (got {q})"])
    t = totals(*sources)
    return asymptotic_terms(q_mu, q_nu, q_omega, ez_max, t, D, f).rate


# =============================================================================
# ENDELIG-STØRRELSE RATE
# =============================================================================

def finite_key_rate(
    block: ObservedBlock,
    sources: Sources,
    config: ProtocolConfig,
    D: int,
    ex_mode: ExMode = ExMode.UPPER,
    ex_override: Optional[float] = None,
    ez_max: Optional[float] = None,
) -> RateReport:
    """
    Full endelig-størrelse-pipeline:

    1. Chernoff-grenser på koinsidenstellingene per nivå
    2. Y2^L med (Q_nu^L, Q_mu^U, Q_omega^U)
    3. E_X^U med valgt referanse-gain (ex_override erstatter resultatet)
    4. E_Z^max = max(ez_ab, ez_ac) med mindre ez_max er gitt
    5. R1 = (2/D)^2 * (m_mu/N) * [1 - f*h(E_Z^max) - h(E_X^U)], gulv ved 0
    6. K = (2/D)^2 * m_mu
    """
    prefactor = _prefactor(D)
    t = totals(*sources)
    eps = config.per_bound_epsilon

    gains: dict[Tier, float] = {}
    bounds: dict[Tier, tuple[float, float]] = {}
    zero_count = False
    for tier in Tier:
        m, n = block.counts(tier)
        pair = gain_bound_pair(m, n, eps)
        zero_count = zero_count or pair.zero_count
        gains[tier] = m / n
        bounds[tier] = (pair.lower / n, min(1.0, pair.upper / n))

    two_photon = y2_lower(
        bounds[Tier.MU][1], bounds[Tier.NU][0], bounds[Tier.OMEGA][1], t
    )
    if two_photon.vacuous and block.m_mu > 0:
        logger.warning("Decoy-grensen er tom; E_X^U = 1 og raten blir 0")

    q_ref = {
        ExMode.PLAIN: gains[Tier.MU],
        ExMode.LOWER: bounds[Tier.MU][0],
        ExMode.UPPER: bounds[Tier.MU][1],
    }[ex_mode]
    if ex_override is not None:
        ex = ex_override
    elif q_ref > 0:
        ex = phase_error_upper(two_photon.value, q_ref, t.mu_tot)
    else:
        ex = 1.0

    if ez_max is None:
        ez_max = max(block.ez_ab, block.ez_ac)

    r_raw = prefactor * (block.m_mu / config.N) * _bracket(ez_max, ex, config.f)
    asym = asymptotic_terms(
        gains[Tier.MU], gains[Tier.NU], gains[Tier.OMEGA], ez_max, t, D, config.f
    )

    return RateReport(
        q_mu=gains[Tier.MU],
        q_nu=gains[Tier.NU],
        q_omega=gains[Tier.OMEGA],
        q_mu_lower=bounds[Tier.MU][0],
        q_mu_upper=bounds[Tier.MU][1],
        q_nu_lower=bounds[Tier.NU][0],
        q_nu_upper=bounds[Tier.NU][1],
        q_omega_lower=bounds[Tier.OMEGA][0],
        q_omega_upper=bounds[Tier.OMEGA][1],
        y2_lower=two_photon.value,
        ex_upper=ex,
        ez_max=ez_max,
        r_finite=max(0.0, r_raw),
        r_asymptotic=asym.rate,
        sifted_length=prefactor * block.m_mu,
        r_finite_raw=r_raw,
        y2_lower_asymptotic=asym.y2_lower,
        ex_upper_asymptotic=asym.ex_upper,
        ex_mode=ex_mode,
        epsilon_per_bound=eps,
        decoy_vacuous=two_photon.vacuous,
        zero_count=zero_count,
    )


def zero_rate_report(config: ProtocolConfig, ex_mode: ExMode = ExMode.UPPER) -> RateReport:
    """Rapport uten koinsidenser: tom decoy-grense, E_X^U = 1 og R1 = R2 = 0."""
    return RateReport(
        q_mu=0.0, q_nu=0.0, q_omega=0.0,
        q_mu_lower=0.0, q_mu_upper=0.0, q_nu_lower=0.0, q_nu_upper=0.0,
        q_omega_lower=0.0, q_omega_upper=0.0,
        y2_lower=0.0, ex_upper=1.0, ez_max=0.5,
        r_finite=0.0, r_asymptotic=0.0, sifted_length=0.0, r_finite_raw=0.0,
        y2_lower_asymptotic=0.0, ex_upper_asymptotic=1.0,
        ex_mode=ex_mode, epsilon_per_bound=config.per_bound_epsilon,
        decoy_vacuous=True, zero_count=True,
    )


def simulate_key_rate(
    channel: StarChannel,
    sources: Sources,
    config: ProtocolConfig,
    qber_model: QberModel = QberModel.IDEAL,
    ex_mode: ExMode = ExMode.UPPER,
) -> RateReport:
    """
    Simulert rate: analytiske gains -> forventede tellinger -> endelig-størrelse-pipeline.

    E_Z^max = max(e^{AB}, e^{AC}) + e_d for signalnivået.
    """
    gains = analytic.tier_gains(sources, channel)
    counts = analytic.expected_counts(config.N, sources, gains)
    a, b, c = sources
    qber = analytic.intrinsic_qber(channel, a.mu, b.mu, c.mu, model=qber_model)
    block = ObservedBlock(
        n_mu=counts.n_mu, n_nu=counts.n_nu, n_omega=counts.n_omega,
        m_mu=counts.m_mu, m_nu=counts.m_nu, m_omega=counts.m_omega,
        ez_ab=min(1.0, qber.e_ab + channel.e_d),
        ez_ac=min(1.0, qber.e_ac + channel.e_d),
    )
    return finite_key_rate(block, sources, config, channel.D, ex_mode=ex_mode, ez_max=qber.ez_max)


# =============================================================================
# GJENNOMSTRØMNING
# =============================================================================

def acquisition_time(
    N: float,
    clock_hz: float = DEFAULT_CLOCK_HZ,
    signal_fraction: float = DEFAULT_SIGNAL_FRACTION,
) -> float:
    """Sekunder som trengs for N protokollrunder."""
    if clock_hz <= 0 or not 0 < signal_fraction <= 1:
        raise ParameterError("Ugyldig klokke", ["clock_hz/signal_fraction: out of range"])
    return N / (clock_hz * signal_fraction)


def key_throughput(
    r_finite: float,
    clock_hz: float = DEFAULT_CLOCK_HZ,
    signal_fraction: float = DEFAULT_SIGNAL_FRACTION,
) -> float:
    """Sikre bit per sekund for en rate per runde."""
    return r_finite / acquisition_time(1.0, clock_hz, signal_fraction)
