"""
PM-QCC Monte Carlo
==================
Hendelsesnivå-simulering av protokollen med ærlig målestasjon:

1. Preparering: nivå, faseskive og nøkkelbit per part
2. Måling: to 50:50-grener (AB og AC), fire detektorer
3. Kunngjøring: vellykket = nøyaktig ett klikk i hver gren
4. Sikting: samme nivå for alle tre, skivedifferanse 0 eller D/2
5. Estimering: gains og parvise QBER per nivå

Brukes som brute-force-orakel for analytic-channel og som kjørbar
definisjon av bit-flip-regelen: Bobs bit = k_b XOR d XOR r, der d = 1
når pi-porten klikket og r = 1 når skivedifferansen er D/2.

Tilfeldige tall trekkes i blokker på BLOCK_SIZE forsøk. Blokk b bruker
SeedSequence(seed, spawn_key=(b,)), så resultatet avhenger bare av
(seed, n_trials), aldri av antall arbeidere.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from app.core.errors import ParameterError
from app.core.keyrate import Sources, finite_key_rate, zero_rate_report
from app.models.config import get_settings
from app.models.schemas import (
    ExMode,
    MisalignmentMode,
    ObservedBlock,
    PhaseMode,
    ProtocolConfig,
    RateReport,
    StarChannel,
    Tier,
)

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1 << 17
TRACE_CAP = 1_000_000
TIERS = (Tier.MU, Tier.NU, Tier.OMEGA)


# =============================================================================
# TYPER
# =============================================================================

@dataclass
class TrialOutcome:
    """
    Forsøk i én blokk, vektorisert.

    clicks har kolonnene [AB-0, AB-pi, AC-0, AC-pi].
    success = nøyaktig én detektor klikket i hver gren.
    """
    tiers: np.ndarray    # (n, 3) 0=mu, 1=nu, 2=omega
    slices: np.ndarray   # (n, 3)
    bits: np.ndarray     # (n, 3)
    clicks: np.ndarray   # (n, 4) bool
    success: np.ndarray  # (n,) bool
    kept: np.ndarray     # (n,) bool

    def to_frame(self, offset: int = 0) -> pd.DataFrame:
        return pd.DataFrame({
            "trial": np.arange(offset, offset + len(self.success)),
            "tier_a": self.tiers[:, 0], "tier_b": self.tiers[:, 1], "tier_c": self.tiers[:, 2],
            "slice_a": self.slices[:, 0], "slice_b": self.slices[:, 1], "slice_c": self.slices[:, 2],
            "bit_a": self.bits[:, 0], "bit_b": self.bits[:, 1], "bit_c": self.bits[:, 2],
            "click_ab_0": self.clicks[:, 0], "click_ab_pi": self.clicks[:, 1],
            "click_ac_0": self.clicks[:, 2], "click_ac_pi": self.clicks[:, 3],
            "success": self.success, "kept": self.kept,
        })


@dataclass
class TierTally:
    """Tellinger for ett matchet intensitetsnivå."""
    rounds: int = 0        # alle tre valgte nivået
    coincidences: int = 0  # vellykket deteksjon, før fasesikting
    kept: int = 0          # etter fasesikting
    errors_ab: int = 0
    errors_ac: int = 0

    def __add__(self, other: "TierTally") -> "TierTally":
        return TierTally(*(a + b for a, b in zip(asdict(self).values(), asdict(other).values())))


@dataclass
class SiftedTally:
    """Akkumulator over forsøk; sammenslåing er assosiativ og kommutativ."""
    total_rounds: int = 0
    tiers: dict = field(default_factory=lambda: {t: TierTally() for t in TIERS})

    def merge(self, other: "SiftedTally") -> "SiftedTally":
        return SiftedTally(
            total_rounds=self.total_rounds + other.total_rounds,
            tiers={t: self.tiers[t] + other.tiers[t] for t in TIERS},
        )

    def gain(self, tier: Tier) -> float:
        t = self.tiers[tier]
        return t.coincidences / t.rounds if t.rounds else 0.0

    def qber(self, tier: Tier, pair: str) -> float:
        t = self.tiers[tier]
        errors = t.errors_ab if pair == "AB" else t.errors_ac
        return errors / t.kept if t.kept else 0.0

    def standard_errors(self) -> dict[str, float]:
        """Binomiske standardfeil for gains og QBER."""
        out = {}
        for tier in TIERS:
            t = self.tiers[tier]
            q = self.gain(tier)
            out[f"q_{tier.value}"] = math.sqrt(q * (1 - q) / t.rounds) if t.rounds else math.inf
            for pair in ("AB", "AC"):
                e = self.qber(tier, pair)
                key = f"ez_{pair.lower()}_{tier.value}"
                out[key] = math.sqrt(e * (1 - e) / t.kept) if t.kept else math.inf
        return out

    def to_dict(self) -> dict:
        return {
            "total_rounds": self.total_rounds,
            **{f"{k}_{tier.value}": v for tier in TIERS for k, v in asdict(self.tiers[tier]).items()},
        }


@dataclass
class MonteCarloResult:
    tally: SiftedTally
    standard_errors: dict
    trace: Optional[pd.DataFrame] = None

    def to_dict(self) -> dict:
        record = self.tally.to_dict()
        for tier in TIERS:
            record[f"q_{tier.value}"] = self.tally.gain(tier)
            record[f"ez_ab_{tier.value}"] = self.tally.qber(tier, "AB")
            record[f"ez_ac_{tier.value}"] = self.tally.qber(tier, "AC")
        record.update({f"se_{k}": v for k, v in self.standard_errors.items()})
        return record


# =============================================================================
# SIMULERING
# =============================================================================

def phase_noise_sigma(e_d: float) -> float:
    """sigma slik at E[(1 - cos X)/2] = e_d for X ~ N(0, sigma^2)."""
    return math.sqrt(-2 * math.log1p(-2 * e_d)) if e_d > 0 else 0.0


@dataclass(frozen=True)
class _Setup:
    intensities: np.ndarray  # (part, nivå)
    cumulative: np.ndarray   # (part, 2)
    eta: np.ndarray          # (part,) inkludert eta_d og Alices splitt
    p_d: float
    e_d: float
    D: int
    phase_mode: PhaseMode
    misalignment: MisalignmentMode
    slice_offset: int


def _simulate_block(
    setup: _Setup, seed: int, block: int, n: int, trace_rows: int = 0
) -> tuple[SiftedTally, Optional[TrialOutcome]]:
    """Én blokk. Utfallet beholdes bare for de første trace_rows forsøkene."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    D = setup.D
    parties = np.arange(3)

    tiers = (rng.random((n, 3))[:, :, None] >= setup.cumulative[None, :, :]).sum(axis=2)
    bits = rng.integers(0, 2, size=(n, 3))
    if setup.phase_mode == PhaseMode.DISCRETE:
        slices = rng.integers(0, D, size=(n, 3))
        phase = 2 * np.pi * slices / D
    else:
        phase = rng.random((n, 3)) * 2 * np.pi
        slices = np.minimum((phase * D / (2 * np.pi)).astype(np.int64), D - 1)
    if setup.slice_offset:
        slices = (slices + setup.slice_offset) % D
        phase = phase + 2 * np.pi * setup.slice_offset / D
    u_detect = rng.random((n, 4))
    u_flip = rng.random((n, 2))
    drift = (
        rng.normal(0.0, phase_noise_sigma(setup.e_d), size=(n, 2))
        if setup.misalignment == MisalignmentMode.PHASE_NOISE
        else np.zeros((n, 2))
    )

    s = setup.eta[None, :] * setup.intensities[parties[None, :], tiers]  # (n, 3)
    theta = phase + np.pi * bits

    clicks = np.empty((n, 4), dtype=bool)
    for branch, partner in enumerate((1, 2)):
        s_a, s_x = s[:, 0], s[:, partner]
        cross = 2 * np.sqrt(s_a * s_x) * np.cos(theta[:, 0] - theta[:, partner] + drift[:, branch])
        n_zero = np.maximum((s_a + s_x + cross) / 2, 0.0)
        n_pi = np.maximum((s_a + s_x - cross) / 2, 0.0)
        clicks[:, 2 * branch] = u_detect[:, 2 * branch] < -np.expm1(-n_zero) * (1 - setup.p_d) + setup.p_d
        clicks[:, 2 * branch + 1] = u_detect[:, 2 * branch + 1] < -np.expm1(-n_pi) * (1 - setup.p_d) + setup.p_d

    one_b = clicks[:, 0] ^ clicks[:, 1]
    one_c = clicks[:, 2] ^ clicks[:, 3]
    success = one_b & one_c
    matched = (tiers[:, 0] == tiers[:, 1]) & (tiers[:, 0] == tiers[:, 2])

    diff_b = (slices[:, 0] - slices[:, 1]) % D
    diff_c = (slices[:, 0] - slices[:, 2]) % D
    half = D // 2
    phase_ok = ((diff_b == 0) | (diff_b == half)) & ((diff_c == 0) | (diff_c == half))
    kept = success & matched & phase_ok

    bob = bits[:, 1] ^ clicks[:, 1] ^ (diff_b == half)
    charlie = bits[:, 2] ^ clicks[:, 3] ^ (diff_c == half)
    if setup.misalignment == MisalignmentMode.FLIP:
        bob = bob ^ (u_flip[:, 0] < setup.e_d)
        charlie = charlie ^ (u_flip[:, 1] < setup.e_d)
    err_b = kept & (bob != bits[:, 0])
    err_c = kept & (charlie != bits[:, 0])

    tally = SiftedTally(total_rounds=n)
    for index, tier in enumerate(TIERS):
        mask = matched & (tiers[:, 0] == index)
        tally.tiers[tier] = TierTally(
            rounds=int(mask.sum()),
            coincidences=int((success & mask).sum()),
            kept=int((kept & mask).sum()),
            errors_ab=int((err_b & mask).sum()),
            errors_ac=int((err_c & mask).sum()),
        )
    if trace_rows <= 0:
        return tally, None
    rows = slice(0, trace_rows)
    outcome = TrialOutcome(
        tiers=tiers[rows].astype(np.int8),
        slices=slices[rows].astype(np.int16 if D <= np.iinfo(np.int16).max else np.int32),
        bits=bits[rows].astype(np.int8),
        clicks=clicks[rows].copy(),
        success=success[rows].copy(),
        kept=kept[rows].copy(),
    )
    return tally, outcome


def run_trials(
    channel: StarChannel,
    sources: Sources,
    n_trials: int,
    seed: int,
    phase_mode: PhaseMode = PhaseMode.DISCRETE,
    misalignment_mode: MisalignmentMode = MisalignmentMode.FLIP,
    threads: Optional[int] = None,
    slice_offset: int = 0,
    trace_limit: int = 0,
    block_size: int = BLOCK_SIZE,
) -> MonteCarloResult:
    """
    Simuler n_trials protokollrunder og returner siktet telling med standardfeil.

    Mørketellinger bruker eksakt 1 - (1-p_d) e^(-n) per detektor.
    """
    if n_trials < 1:
        raise ParameterError("Ugyldig antall forsøk", [f"n_trials: must be >= 1 (got {n_trials})"])
    if trace_limit > TRACE_CAP:
        raise ParameterError("For langt spor", [f"trace_limit: must be <= {TRACE_CAP}"])
    threads = threads or get_settings().threads

    intensities = np.array([[s.mu, s.nu, s.omega] for s in sources])
    probs = np.array([s.probabilities for s in sources])
    setup = _Setup(
        intensities=intensities,
        cumulative=np.cumsum(probs, axis=1)[:, :2],
        eta=np.array([
            channel.eta_A * channel.alice_factor,
            channel.eta_B,
            channel.eta_C,
        ]) * channel.eta_d,
        p_d=channel.p_d,
        e_d=channel.e_d,
        D=channel.D,
        phase_mode=phase_mode,
        misalignment=misalignment_mode,
        slice_offset=slice_offset,
    )

    sizes = [block_size] * (n_trials // block_size)
    if n_trials % block_size:
        sizes.append(n_trials % block_size)
    starts = [b * block_size for b in range(len(sizes))]
    trace_rows = [min(n, max(0, trace_limit - start)) for start, n in zip(starts, sizes)]
    logger.info(f"Monte Carlo: {n_trials} forsøk i {len(sizes)} blokker, {threads} tråder")

    tally = SiftedTally()
    frames = []
    # Tellingene slås sammen i blokkrekkefølge etter hvert; bare sporblokkene beholder arrays
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = pool.map(
            _simulate_block,
            itertools.repeat(setup), itertools.repeat(seed), range(len(sizes)), sizes, trace_rows,
        )
        for (block_tally, outcome), start, n in zip(results, starts, sizes):
            tally = tally.merge(block_tally)
            if outcome is not None:
                frames.append(outcome.to_frame(offset=start))
            logger.debug(f"Blokk ferdig: {n} forsøk")

    trace = pd.concat(frames, ignore_index=True) if frames else None
    return MonteCarloResult(tally=tally, standard_errors=tally.standard_errors(), trace=trace)


# =============================================================================
# RATE FRA SIMULERTE DATA
# =============================================================================

def tally_to_block(tally: SiftedTally, scale: float = 1.0) -> ObservedBlock:
    """ObservedBlock fra en telling; scale > 1 skalerer til forventede tellinger."""
    mu = tally.tiers[Tier.MU]
    ez_ab = tally.qber(Tier.MU, "AB") if mu.kept else 0.5
    ez_ac = tally.qber(Tier.MU, "AC") if mu.kept else 0.5
    return ObservedBlock(
        n_mu=mu.rounds * scale,
        n_nu=tally.tiers[Tier.NU].rounds * scale,
        n_omega=tally.tiers[Tier.OMEGA].rounds * scale,
        m_mu=mu.coincidences * scale,
        m_nu=tally.tiers[Tier.NU].coincidences * scale,
        m_omega=tally.tiers[Tier.OMEGA].coincidences * scale,
        ez_ab=ez_ab,
        ez_ac=ez_ac,
    )


def empirical_rate(
    tally: SiftedTally,
    config: ProtocolConfig,
    sources: Sources,
    D: int,
    scale_to_config: bool = False,
    ex_mode: ExMode = ExMode.UPPER,
) -> RateReport:
    """
    Kjør hele endelig-størrelse-pipelinen på simulerte tellinger.

    Uten skalering er N = antall simulerte runder. Med scale_to_config
    skaleres tellingene til config.N (forventede tellinger).
    """
    if any(tally.tiers[t].rounds == 0 for t in TIERS) or tally.tiers[Tier.MU].coincidences == 0:
        logger.warning("Tom telling; rapporterer null rate")
        return zero_rate_report(config, ex_mode)

    if scale_to_config:
        scale = config.N / tally.total_rounds
        run_config = config
    else:
        scale = 1.0
        run_config = config.model_copy(update={"N": tally.total_rounds})
    block = tally_to_block(tally, scale)
    return finite_key_rate(block, sources, run_config, D, ex_mode=ex_mode)
