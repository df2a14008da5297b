"""
PM-QCC Analytisk kanal
======================
Lukkede uttrykk for klikksannsynlighet per målegren, koinsidens-gain,
intrinsisk QBER og forventede tellinger.

Målestasjonen har to grener: AB (Alice/Bob) og AC (Alice/Charlie).
Alices puls splittes i to, så hver gren ser eta_A*eta_d*mu_A/2 fra Alice
(eller eta_A*eta_d*mu_A når eta_A allerede inneholder splitten).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from app.core.errors import ParameterError, UndefinedQuantityError
from app.models.schemas import PartySource, QberModel, StarChannel, Tier

logger = logging.getLogger(__name__)

# Flyttallsslakk ved klemming av sannsynligheter
CLAMP_TOLERANCE = 1e-15


@dataclass(frozen=True)
class BranchLoad:
    """Midlere detektert fotontall i én målegren, fordelt på bidragsyterne."""
    s_alice: float
    s_partner: float

    def __post_init__(self):
        if self.s_alice < 0 or self.s_partner < 0:
            raise ParameterError("Negativ grenlast", ["s: must be >= 0"])

    @property
    def s(self) -> float:
        return self.s_alice + self.s_partner

    @property
    def visibility(self) -> float:
        """Interferens-synlighet 2*sqrt(sA*sX)/(sA+sX); 1 for tom gren."""
        if self.s <= 0:
            return 1.0
        return 2 * math.sqrt(self.s_alice * self.s_partner) / self.s


@dataclass(frozen=True)
class QberEstimate:
    """Intrinsisk QBER per gren og maks QBER inkludert feiljustering."""
    e_ab: float
    e_ac: float
    ez_max: float


@dataclass(frozen=True)
class ExpectedCounts:
    """Forventede runder og koinsidenser per intensitetsnivå."""
    n_mu: float
    n_nu: float
    n_omega: float
    m_mu: float
    m_nu: float
    m_omega: float


def _clamp(p: float) -> float:
    if p < -CLAMP_TOLERANCE or p > 1 + CLAMP_TOLERANCE:
        logger.debug(f"Klemmer sannsynlighet utenfor [0,1]: {p}")
    return min(1.0, max(0.0, p))


def branch_load(channel: StarChannel, mu_a: float, mu_x: float, partner: str) -> BranchLoad:
    """Grenlast for grenen mellom Alice og partner ('B' eller 'C')."""
    return BranchLoad(
        s_alice=channel.eta_A * channel.eta_d * mu_a * channel.alice_factor,
        s_partner=channel.eta(partner) * channel.eta_d * mu_x,
    )


def branch_click_probability(load: BranchLoad, p_d: float, exact: bool = False) -> float:
    """
    Sannsynlighet for klikk i en målegren.

    Lineær form: 1 - e^(-s) + 2*p_d*e^(-s).
    Eksakt form: 1 - (1-p_d)^2 * e^(-s).
    """
    if not 0 <= p_d < 1:
        raise ParameterError("Ugyldig mørketelling", [f"p_d: must be in [0,1) (got {p_d})"])
    vacuum = math.exp(-load.s)
    if exact:
        return _clamp(1 - (1 - p_d) ** 2 * vacuum)
    return _clamp(-math.expm1(-load.s) + 2 * p_d * vacuum)


def coincidence_gain(mu_a: float, mu_b: float, mu_c: float, channel: StarChannel) -> float:
    """Q = p_click(AB) * p_click(AC)."""
    if min(mu_a, mu_b, mu_c) < 0:
        raise ParameterError("Negativ intensitet", ["mu: intensities must be >= 0"])
    exact = channel.exact_dark_counts
    p_ab = branch_click_probability(branch_load(channel, mu_a, mu_b, "B"), channel.p_d, exact)
    p_ac = branch_click_probability(branch_load(channel, mu_a, mu_c, "C"), channel.p_d, exact)
    return p_ab * p_ac


def tier_gains(
    sources: tuple[PartySource, PartySource, PartySource], channel: StarChannel
) -> dict[Tier, float]:
    """Gain for hvert matchede intensitetsnivå."""
    a, b, c = sources
    return {
        tier: coincidence_gain(a.intensity(tier), b.intensity(tier), c.intensity(tier), channel)
        for tier in Tier
    }


def slice_error(D: int) -> float:
    """e_delta = pi/D - (D/pi)^2 * sin^3(pi/D)."""
    if D < 2:
        raise ParameterError("Ugyldig antall faseskiver", [f"D: must be >= 2 (got {D})"])
    x = math.pi / D
    return x - (D / math.pi) ** 2 * math.sin(x) ** 3


def _branch_qber(load: BranchLoad, channel: StarChannel, e_delta: float, model: QberModel) -> float:
    p_click = branch_click_probability(load, channel.p_d, channel.exact_dark_counts)
    if p_click <= 0:
        raise UndefinedQuantityError("QBER er udefinert når klikksannsynligheten er 0")
    if model == QberModel.VISIBILITY:
        v = load.visibility
        per_photon = v * e_delta + (1 - v) / 2
    else:
        per_photon = e_delta
    return _clamp((channel.p_d + load.s * per_photon) * math.exp(-load.s) / p_click)


def intrinsic_qber(
    channel: StarChannel,
    mu_a: float,
    mu_b: float,
    mu_c: float,
    model: QberModel = QberModel.IDEAL,
) -> QberEstimate:
    """
    Intrinsisk QBER for signalnivået.

    e^{AX} = [p_d + s*e_delta]*e^(-s) / p_click(AX)
    ez_max = max(e^{AB}, e^{AC}) + e_d, klemt til [0, 0.5].
    """
    e_delta = slice_error(channel.D)
    e_ab = _branch_qber(branch_load(channel, mu_a, mu_b, "B"), channel, e_delta, model)
    e_ac = _branch_qber(branch_load(channel, mu_a, mu_c, "C"), channel, e_delta, model)
    ez_max = min(0.5, max(0.0, max(e_ab, e_ac) + channel.e_d))
    return QberEstimate(e_ab=e_ab, e_ac=e_ac, ez_max=ez_max)


def expected_counts(
    N: float,
    sources: tuple[PartySource, PartySource, PartySource],
    gains: dict[Tier, float],
) -> ExpectedCounts:
    """
    N_x = N * p_x^A * p_x^B * p_x^C og M_x = N_x * Q_x.

    Runder med blandede nivåer forkastes ved sikting og telles ikke.
    """
    probs = np.array([s.probabilities for s in sources])  # (part, nivå)
    n = N * probs.prod(axis=0)
    m = n * np.array([gains[Tier.MU], gains[Tier.NU], gains[Tier.OMEGA]])
    return ExpectedCounts(
        n_mu=float(n[0]), n_nu=float(n[1]), n_omega=float(n[2]),
        m_mu=float(m[0]), m_nu=float(m[1]), m_omega=float(m[2]),
    )
