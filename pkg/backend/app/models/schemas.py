"""
PM-QCC Domenetyper
==================
Pydantic-modeller for kilder, kanal, protokollkonfigurasjon, observerte
tellinger og rate-rapporter. Alle typer er uforanderlige verdiobjekter
og kan deles fritt mellom tråder.

Feltnavnene er identiske med JSON-formatet (flat struktur).
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Toleranse for summen av sendesannsynligheter
PROBABILITY_SUM_TOLERANCE = 1e-12


# =============================================================================
# ENUMS
# =============================================================================

class Tier(str, Enum):
    """Intensitetsnivå: signal og to decoy-tilstander."""
    MU = "mu"
    NU = "nu"
    OMEGA = "omega"


class ExMode(str, Enum):
    """Hvilken gain som brukes i nevneren til E_X^U."""
    PLAIN = "plain"
    LOWER = "lower"
    UPPER = "upper"


class QberModel(str, Enum):
    """Modell for intrinsisk QBER per målegren."""
    IDEAL = "ideal"            # e_delta-modellen, antar full interferens
    VISIBILITY = "visibility"  # vekter e_delta med interferens-synligheten V


class PhaseMode(str, Enum):
    """Fasetrekking i Monte Carlo."""
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class MisalignmentMode(str, Enum):
    """Hvordan e_d realiseres i Monte Carlo."""
    FLIP = "flip"
    PHASE_NOISE = "phase-noise"


class OptimizationMode(str, Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


# =============================================================================
# KILDE, KANAL OG KONFIGURASJON
# =============================================================================

class PartySource(BaseModel):
    """Én parts signal- og decoy-intensiteter med sendesannsynligheter."""

    model_config = ConfigDict(frozen=True)

    mu: float = Field(..., ge=0, description="Signalintensitet (midlere fotontall)")
    nu: float = Field(..., ge=0, description="Decoy-intensitet 1")
    omega: float = Field(..., ge=0, description="Decoy-intensitet 2")
    p_mu: float = Field(..., gt=0, le=1, description="Sannsynlighet for signal")
    p_nu: float = Field(..., gt=0, le=1, description="Sannsynlighet for decoy 1")
    p_omega: float = Field(..., gt=0, le=1, description="Sannsynlighet for decoy 2")

    @model_validator(mode="after")
    def check_ordering(self) -> "PartySource":
        """Sjekk 0 <= omega < nu < mu og at sannsynlighetene summerer til 1."""
        problems = []
        if not self.omega < self.nu:
            problems.append("omega < nu violated")
        if not self.nu < self.mu:
            problems.append("nu < mu violated")
        if abs(self.p_mu + self.p_nu + self.p_omega - 1.0) > PROBABILITY_SUM_TOLERANCE:
            problems.append("probabilities must sum to 1")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def intensity(self, tier: Tier) -> float:
        return {Tier.MU: self.mu, Tier.NU: self.nu, Tier.OMEGA: self.omega}[tier]

    def probability(self, tier: Tier) -> float:
        return {Tier.MU: self.p_mu, Tier.NU: self.p_nu, Tier.OMEGA: self.p_omega}[tier]

    @property
    def probabilities(self) -> tuple[float, float, float]:
        return (self.p_mu, self.p_nu, self.p_omega)


class StarChannel(BaseModel):
    """
    Stjernekanal fra tre parter til målestasjonen.

    eta_A inkluderer tapet i Alices splitter på målestasjonen når
    alice_split_in_eta er satt (konvensjonen i den publiserte tabellen).
    Ellers er eta_A ren kanaltransmittans og faktoren 1/2 brukes eksplisitt.
    """

    model_config = ConfigDict(frozen=True)

    eta_A: float = Field(..., gt=0, le=1, description="Transmittans Alice -> målestasjon")
    eta_B: float = Field(..., gt=0, le=1, description="Transmittans Bob -> målestasjon")
    eta_C: float = Field(..., gt=0, le=1, description="Transmittans Charlie -> målestasjon")
    eta_d: float = Field(..., gt=0, le=1, description="Total deteksjonseffektivitet")
    p_d: float = Field(..., ge=0, lt=1, description="Mørketelling per puls per detektor")
    e_d: float = Field(0.03, ge=0, lt=0.5, description="Feiljusteringsrate")
    D: int = Field(16, ge=2, description="Antall faseskiver (partall)")
    alice_split_in_eta: bool = Field(
        default=False,
        description="eta_A inneholder allerede Alices 1/2-splitt"
    )
    exact_dark_counts: bool = Field(
        default=False,
        description="Bruk 1-(1-p_d)^2 i stedet for den lineariserte 2*p_d"
    )

    @field_validator("D")
    @classmethod
    def validate_even(cls, v: int) -> int:
        if v % 2 != 0:
            raise ValueError("D must be even")
        return v

    def eta(self, party: str) -> float:
        """Transmittans for part 'A', 'B' eller 'C'."""
        return {"A": self.eta_A, "B": self.eta_B, "C": self.eta_C}[party]

    @property
    def alice_factor(self) -> float:
        """Andelen av Alices puls som når hver målegren."""
        return 1.0 if self.alice_split_in_eta else 0.5

    @classmethod
    def from_distances(
        cls,
        d_A: float,
        d_B: float,
        d_C: float,
        alpha: float,
        alice_extra_loss_db: float = 0.0,
        **detector,
    ) -> "StarChannel":
        """
        Bygg kanal fra fiberlengder (km) og dempning (dB/km).

        alice_extra_loss_db legger til komponenttap på Alices side.
        Resten av nøkkelordene (eta_d, p_d, e_d, D, ...) sendes videre.
        """
        from app.core.validation import transmittance_from_distance

        eta_A = transmittance_from_distance(d_A, alpha) * 10 ** (-alice_extra_loss_db / 10)
        return cls(
            eta_A=eta_A,
            eta_B=transmittance_from_distance(d_B, alpha),
            eta_C=transmittance_from_distance(d_C, alpha),
            **detector,
        )

    def with_distances(
        self, d_A: float, d_B: float, d_C: float, alpha: float
    ) -> "StarChannel":
        """Samme detektorer, nye fiberlengder."""
        detector = self.model_dump(exclude={"eta_A", "eta_B", "eta_C"})
        return StarChannel.from_distances(d_A, d_B, d_C, alpha, **detector)


class ProtocolConfig(BaseModel):
    """Globale protokollparametre: runder, feilkorreksjon og feilsannsynlighet."""

    model_config = ConfigDict(frozen=True)

    N: int = Field(..., ge=1, description="Totalt antall protokollrunder")
    f: float = Field(1.06, ge=1, description="Feilkorreksjonseffektivitet")
    epsilon: float = Field(1e-10, gt=0, lt=1, description="Feilsannsynlighet per grense")
    global_budget: bool = Field(
        default=False,
        description="Del epsilon likt på de seks Chernoff-grensene"
    )

    @property
    def per_bound_epsilon(self) -> float:
        return self.epsilon / 6 if self.global_budget else self.epsilon


# =============================================================================
# OBSERVASJONER OG RESULTATER
# =============================================================================

class ObservedBlock(BaseModel):
    """Runder, koinsidenser og målte QBER per intensitetsnivå."""

    model_config = ConfigDict(frozen=True)

    n_mu: float = Field(..., ge=0, description="Runder der alle sendte signal")
    n_nu: float = Field(..., ge=0)
    n_omega: float = Field(..., ge=0)
    m_mu: float = Field(..., ge=0, description="Vellykkede koinsidenser, signalnivå")
    m_nu: float = Field(..., ge=0)
    m_omega: float = Field(..., ge=0)
    ez_ab: float = Field(..., ge=0, le=1, description="Målt QBER Alice-Bob")
    ez_ac: float = Field(..., ge=0, le=1, description="Målt QBER Alice-Charlie")

    @model_validator(mode="after")
    def check_counts(self) -> "ObservedBlock":
        problems = [
            f"m_{tier} <= n_{tier} violated"
            for tier in ("mu", "nu", "omega")
            if getattr(self, f"m_{tier}") > getattr(self, f"n_{tier}")
        ]
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def counts(self, tier: Tier) -> tuple[float, float]:
        """(m, n) for et nivå."""
        return getattr(self, f"m_{tier.value}"), getattr(self, f"n_{tier.value}")


class RateReport(BaseModel):
    """Alle mellomresultater fra nøkkelrate-beregningen, flat struktur."""

    model_config = ConfigDict(frozen=True)

    q_mu: float = Field(..., ge=0, le=1)
    q_nu: float = Field(..., ge=0, le=1)
    q_omega: float = Field(..., ge=0, le=1)
    q_mu_lower: float = Field(..., ge=0)
    q_mu_upper: float = Field(..., ge=0)
    q_nu_lower: float = Field(..., ge=0)
    q_nu_upper: float = Field(..., ge=0)
    q_omega_lower: float = Field(..., ge=0)
    q_omega_upper: float = Field(..., ge=0)
    y2_lower: float = Field(..., ge=0, le=1, description="Nedre grense for to-foton yield")
    ex_upper: float = Field(..., ge=0, le=1, description="Øvre grense for fasefeil")
    ez_max: float = Field(..., ge=0, le=1, description="Største parvise QBER")
    r_finite: float = Field(..., ge=0, description="R1 per totalrunde")
    r_asymptotic: float = Field(..., ge=0, description="R2 per signalrunde")
    sifted_length: float = Field(..., ge=0, description="Forventet rånøkkellengde")
    r_finite_raw: float = Field(..., description="R1 før gulv ved 0")
    y2_lower_asymptotic: float = Field(..., ge=0, le=1)
    ex_upper_asymptotic: float = Field(..., ge=0, le=1)
    ex_mode: ExMode = ExMode.UPPER
    epsilon_per_bound: float = Field(..., gt=0)
    decoy_vacuous: bool = False
    zero_count: bool = False

    @property
    def q_bounds(self) -> dict[Tier, tuple[float, float]]:
        return {
            Tier.MU: (self.q_mu_lower, self.q_mu_upper),
            Tier.NU: (self.q_nu_lower, self.q_nu_upper),
            Tier.OMEGA: (self.q_omega_lower, self.q_omega_upper),
        }


class SourceTriple(BaseModel):
    """Kilder for Alice, Bob og Charlie."""

    model_config = ConfigDict(frozen=True)

    source_a: PartySource
    source_b: PartySource
    source_c: PartySource

    def as_tuple(self) -> tuple[PartySource, PartySource, PartySource]:
        return (self.source_a, self.source_b, self.source_c)


class KeyRateInput(BaseModel):
    """Inndata for `keyrate`-kommandoen: observert blokk, kilder og konfigurasjon."""

    block: ObservedBlock
    source_a: PartySource
    source_b: PartySource
    source_c: PartySource
    config: ProtocolConfig
    D: int = Field(16, ge=2)
    name: Optional[str] = None
    ex_override: Optional[float] = Field(
        None, ge=0, le=1,
        description="Bruk denne E_X^U i stedet for decoy-grensen (f.eks. publisert verdi)"
    )

    class Config:
        json_schema_extra = {
            "example": {
                "name": "{25,25,25}",
                "block": {
                    "n_mu": 1.10e13, "n_nu": 2.46e10, "n_omega": 1.98e10,
                    "m_mu": 2040135966, "m_nu": 1272088, "m_omega": 2482,
                    "ez_ab": 0.0326, "ez_ac": 0.0320,
                },
                "source_a": {"mu": 0.0739, "nu": 0.0388, "omega": 0.00188,
                             "p_mu": 0.8003, "p_nu": 0.1030, "p_omega": 0.0967},
                "config": {"N": 2.14e13, "f": 1.06, "epsilon": 1e-10},
                "D": 16,
            }
        }


# =============================================================================
# OPTIMERING
# =============================================================================

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "mu": (1e-4, 1.0),           # signalintensitet (Bob/Charlie i symmetrisk modus)
    "nu_ratio": (0.05, 0.95),    # nu/mu
    "omega_ratio": (1e-3, 0.9),  # omega/nu
}


class OptimizationSpec(BaseModel):
    """
    Oppsett for intensitetsoptimering.

    Variablene er signalintensitet(er), felles forhold nu/mu og omega/nu,
    og én felles sannsynlighetsvektor. Grensene er [min, max] per variabel.
    """

    model_config = ConfigDict(frozen=True)

    channel: StarChannel
    config: ProtocolConfig
    mode: OptimizationMode = OptimizationMode.SYMMETRIC
    bounds: dict[str, tuple[float, float]] = Field(
        default_factory=lambda: dict(DEFAULT_BOUNDS),
        description="Grenser for mu, nu_ratio og omega_ratio"
    )
    alice_doubling: bool = Field(
        default=True,
        description="Symmetrisk modus: mu_a = 2*mu_b = 2*mu_c"
    )
    budget: int = Field(2000, ge=1, description="Maks evalueringer per restart")
    restarts: int = Field(8, ge=0, description="Antall Latin-hyperkube-starter")
    seed: int = Field(0, ge=0)
    initial: list[SourceTriple] = Field(
        default_factory=list,
        description="Brukergitte startpunkter (tas med i restart-settet)"
    )
    qber_model: QberModel = QberModel.VISIBILITY
    ex_mode: ExMode = ExMode.UPPER
    threads: Optional[int] = Field(None, ge=1)

    @field_validator("bounds")
    @classmethod
    def validate_bounds(cls, v: dict[str, tuple[float, float]]) -> dict[str, tuple[float, float]]:
        unknown = set(v) - set(DEFAULT_BOUNDS)
        problems = [f"unknown bound '{name}'" for name in sorted(unknown)]
        merged = {**DEFAULT_BOUNDS, **v}
        for name, (lo, hi) in merged.items():
            if not 0 < lo < hi:
                problems.append(f"{name}: need 0 < min < max (got [{lo}, {hi}])")
            elif name.endswith("_ratio") and hi >= 1:
                problems.append(f"{name}: max must be < 1 (got {hi})")
        if problems:
            raise ValueError("; ".join(problems))
        return merged

    @model_validator(mode="after")
    def check_seeds(self) -> "OptimizationSpec":
        if not (self.restarts or self.initial):
            raise ValueError("need at least one restart or initial point")
        return self
