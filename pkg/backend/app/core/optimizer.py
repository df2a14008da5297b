"""
PM-QCC Optimering
=================
Maksimerer simulert R1 over intensiteter og sendesannsynligheter.

Variabler (ubegrenset rom, mappes inn i boksene):
- signalintensitet(er): x = lo * (hi/lo)^sigmoid(z)
- felles forhold nu/mu og omega/nu: samme log-boks
- sannsynligheter: softmax([0, l_nu, l_omega])

Symmetrisk modus: mu_a = 2*mu_b = 2*mu_c (kan slås av), asymmetrisk modus:
mu_a, mu_b, mu_c frie. Forholdene og sannsynlighetsvektoren er alltid felles,
så decoy-analysens forutsetning om like forhold holder eksakt.

Nelder-Mead med flere starter fra et Latin-hyperkube-design. Målfunksjonen
er -asinh(R1_raw / 1e-20), som skiller mellom negative rå-rater på
null-platået og komprimerer skalaen over mange dekader.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import expit, logit, softmax
from scipy.stats import qmc

from app.core.errors import PmqccError
from app.core.keyrate import Sources, simulate_key_rate, zero_rate_report
from app.models.config import get_settings
from app.models.schemas import (
    OptimizationMode,
    OptimizationSpec,
    PartySource,
    RateReport,
    SourceTriple,
)

logger = logging.getLogger(__name__)

RATE_SCALE = 1e-20
XATOL = 1e-7
FATOL = 1e-10
LOGIT_RANGE = (-6.0, 0.0)  # startområde for l_nu, l_omega
UNIT_CLIP = 1e-12
LOGIT_CLIP = 30.0

SWEEP_COLUMNS = [
    "d_A", "d_B", "d_C", "N", "R1", "R2",
    "mu_a", "mu_b", "mu_c", "nu_a", "nu_b", "nu_c",
    "omega_a", "omega_b", "omega_c", "p_mu", "p_nu", "p_omega",
]


@dataclass(frozen=True)
class TraceEntry:
    """Én evaluering av målfunksjonen."""
    restart: int
    evaluation: int
    params: tuple[float, ...]  # (mu_a, mu_b, mu_c, nu_ratio, omega_ratio, p_mu, p_nu, p_omega)
    rate: float
    rate_raw: float
    failed: bool = False  # evalueringen kastet; rate settes til 0


@dataclass
class OptimizationResult:
    sources: Sources
    report: RateReport
    restart: int
    zero_rate: bool = False
    trace: list[TraceEntry] = field(default_factory=list)

    @property
    def mu_total(self) -> float:
        return sum(s.mu for s in self.sources)

    def to_row(self) -> dict:
        a, b, c = self.sources
        return {
            "R1": self.report.r_finite,
            "R2": self.report.r_asymptotic,
            "mu_a": a.mu, "mu_b": b.mu, "mu_c": c.mu,
            "nu_a": a.nu, "nu_b": b.nu, "nu_c": c.nu,
            "omega_a": a.omega, "omega_b": b.omega, "omega_c": c.omega,
            "p_mu": a.p_mu, "p_nu": a.p_nu, "p_omega": a.p_omega,
        }


# =============================================================================
# PARAMETRISERING
# =============================================================================

class Parametrization:
    """Koding mellom ubegrenset vektor og tre kilder som oppfyller modusens krav."""

    def __init__(self, spec: OptimizationSpec):
        self.spec = spec
        self.n_mu = 3 if spec.mode == OptimizationMode.ASYMMETRIC else 1
        self.dim = self.n_mu + 4

    @staticmethod
    def _to_box(z: float, bound: tuple[float, float]) -> float:
        lo, hi = bound
        return lo * (hi / lo) ** float(expit(z))

    @staticmethod
    def _from_box(x: float, bound: tuple[float, float]) -> float:
        lo, hi = bound
        s = math.log(x / lo) / math.log(hi / lo)
        return float(logit(min(max(s, UNIT_CLIP), 1 - UNIT_CLIP)))

    def decode(self, x: np.ndarray) -> Sources:
        b = self.spec.bounds
        mus = [self._to_box(z, b["mu"]) for z in x[: self.n_mu]]
        if self.n_mu == 1:
            mu_b = mus[0]
            mu_a = 2 * mu_b if self.spec.alice_doubling else mu_b
            mus = [mu_a, mu_b, mu_b]
        nu_ratio = self._to_box(x[self.n_mu], b["nu_ratio"])
        omega_ratio = self._to_box(x[self.n_mu + 1], b["omega_ratio"])
        logits = np.clip(x[self.n_mu + 2: self.n_mu + 4], -LOGIT_CLIP, LOGIT_CLIP)
        p_mu, p_nu, p_omega = (float(v) for v in softmax(np.concatenate(([0.0], logits))))
        return tuple(
            PartySource(
                mu=mu, nu=mu * nu_ratio, omega=mu * nu_ratio * omega_ratio,
                p_mu=p_mu, p_nu=p_nu, p_omega=p_omega,
            )
            for mu in mus
        )

    def encode(self, sources: Sources) -> np.ndarray:
        """Invers av decode; punkter utenfor boksene projiseres inn."""
        b = self.spec.bounds
        a = sources[0]
        if self.n_mu == 1:
            mus = [sources[1].mu]
        else:
            mus = [s.mu for s in sources]
        z = [self._from_box(m, b["mu"]) for m in mus]
        z.append(self._from_box(a.nu / a.mu, b["nu_ratio"]))
        z.append(self._from_box(a.omega / a.nu, b["omega_ratio"]))
        z.append(math.log(a.p_nu / a.p_mu))
        z.append(math.log(a.p_omega / a.p_mu))
        return np.array(z)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Punkt i enhetskuben (fra LHS) -> startvektor."""
        z = list(logit(np.clip(u[: self.n_mu + 2], UNIT_CLIP, 1 - UNIT_CLIP)))
        lo, hi = LOGIT_RANGE
        z.extend(lo + (hi - lo) * u[self.n_mu + 2:])
        return np.array(z, dtype=float)

    @staticmethod
    def params(sources: Sources) -> tuple[float, ...]:
        a, b, c = sources
        return (a.mu, b.mu, c.mu, a.nu / a.mu, a.omega / a.nu, a.p_mu, a.p_nu, a.p_omega)


# =============================================================================
# OPTIMERING
# =============================================================================

def _evaluate(spec: OptimizationSpec, sources: Sources) -> Optional[RateReport]:
    try:
        return simulate_key_rate(
            spec.channel, sources, spec.config,
            qber_model=spec.qber_model, ex_mode=spec.ex_mode,
        )
    except PmqccError as e:
        logger.debug(f"Evaluering feilet: {e}")
        return None


def _run_restart(
    spec: OptimizationSpec, param: Parametrization, index: int, x0: np.ndarray
) -> tuple[Optional[OptimizationResult], list[TraceEntry]]:
    trace: list[TraceEntry] = []
    best: dict = {}

    def objective(x: np.ndarray) -> float:
        sources = param.decode(x)
        report = _evaluate(spec, sources)
        if report is None:
            trace.append(TraceEntry(
                restart=index, evaluation=len(trace), params=param.params(sources),
                rate=0.0, rate_raw=0.0, failed=True,
            ))
            return math.inf
        trace.append(TraceEntry(
            restart=index, evaluation=len(trace), params=param.params(sources),
            rate=report.r_finite, rate_raw=report.r_finite_raw,
        ))
        value = -math.asinh(report.r_finite_raw / RATE_SCALE)
        if not best or value < best["value"]:
            best.update(value=value, sources=sources, report=report)
        return value

    minimize(
        objective, x0, method="Nelder-Mead",
        options={"maxfev": spec.budget, "xatol": XATOL, "fatol": FATOL},
    )
    logger.debug(f"Restart {index}: {len(trace)} evalueringer")
    if not best:
        return None, trace
    return OptimizationResult(
        sources=best["sources"], report=best["report"], restart=index
    ), trace


def starting_points(spec: OptimizationSpec, param: Parametrization) -> list[np.ndarray]:
    """Brukerens startpunkter først, deretter LHS-design."""
    points = [param.encode(t.as_tuple()) for t in spec.initial]
    if spec.restarts:
        sampler = qmc.LatinHypercube(d=param.dim, seed=spec.seed)
        points.extend(param.from_unit(u) for u in sampler.random(spec.restarts))
    return points


def optimize(spec: OptimizationSpec) -> OptimizationResult:
    """
    Finn kildene som maksimerer simulate_key_rate under modusens krav.

    Deterministisk gitt seed. Hvis ingen evaluering gir positiv rate,
    returneres beste rå-punkt med zero_rate satt. Feilede evalueringer står
    i sporet med failed=True; feiler alle, rapporteres første startpunkt
    med null-rapport.
    """
    param = Parametrization(spec)
    points = starting_points(spec, param)
    threads = spec.threads or get_settings().threads
    logger.info(
        f"Optimerer ({spec.mode.value}): {len(points)} starter, "
        f"budsjett {spec.budget}, {threads} tråder"
    )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_restart, spec, param, i, x0) for i, x0 in enumerate(points)]
        runs = [f.result() for f in futures]

    trace = [entry for _, restart_trace in runs for entry in restart_trace]
    candidates = [result for result, _ in runs if result is not None]
    if not candidates:
        logger.warning(
            f"Null-rate: alle {len(trace)} evalueringer feilet; rapporterer første startpunkt"
        )
        return OptimizationResult(
            sources=param.decode(points[0]),
            report=zero_rate_report(spec.config, spec.ex_mode),
            restart=0,
            zero_rate=True,
            trace=trace,
        )

    best = min(
        candidates,
        key=lambda r: (-r.report.r_finite, -r.report.r_finite_raw, r.mu_total, r.restart),
    )
    best.trace = trace
    best.zero_rate = best.report.r_finite <= 0
    if best.zero_rate:
        logger.warning("Null-rate overalt: ingen parametre gir positiv nøkkelrate")
    else:
        logger.info(f"Beste R1 = {best.report.r_finite:.4e} (restart {best.restart})")
    return best


# =============================================================================
# AVSTANDSSVEIP
# =============================================================================

def _sweep(
    spec: OptimizationSpec,
    distances: Sequence[tuple[float, float, float]],
    alpha: float,
    alice_extra_loss_db: float,
) -> pd.DataFrame:
    rows = []
    previous: Optional[OptimizationResult] = None
    for d_A, d_B, d_C in distances:
        channel = spec.channel.with_distances(d_A, d_B, d_C, alpha)
        if alice_extra_loss_db:
            channel = channel.model_copy(
                update={"eta_A": channel.eta_A * 10 ** (-alice_extra_loss_db / 10)}
            )
        initial = list(spec.initial)
        if previous is not None and not previous.zero_rate:
            a, b, c = previous.sources
            initial.append(SourceTriple(source_a=a, source_b=b, source_c=c))
        result = optimize(spec.model_copy(update={"channel": channel, "initial": initial}))
        rows.append({"d_A": d_A, "d_B": d_B, "d_C": d_C, "N": spec.config.N, **result.to_row()})
        previous = result
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def sweep_distance(
    spec: OptimizationSpec,
    distances: Sequence,
    alpha: float,
    alice_extra_loss_db: float = 0.0,
) -> pd.DataFrame:
    """
    Optimer i hvert avstandspunkt og returner én rad per punkt.

    distances er enten armlengder (symmetrisk, samme lengde for alle) eller
    tripler (d_A, d_B, d_C). Forrige optimum brukes som ekstra startpunkt.
    """
    triples = [
        tuple(float(x) for x in d) if isinstance(d, (tuple, list)) else (float(d),) * 3
        for d in distances
    ]
    return _sweep(spec, triples, alpha, alice_extra_loss_db)


def sweep_grid(
    spec: OptimizationSpec,
    d_a: float,
    d_b_values: Sequence[float],
    d_c_values: Sequence[float],
    alpha: float,
) -> pd.DataFrame:
    """Asymmetrisk rutenett: Alice fast, Bob og Charlie varieres."""
    asym = spec.model_copy(update={"mode": OptimizationMode.ASYMMETRIC})
    triples = [(float(d_a), float(b), float(c)) for b, c in itertools.product(d_b_values, d_c_values)]
    return _sweep(asym, triples, alpha, 0.0)
