"""
PM-QCC Publisert datasett
=========================
Laster de ni publiserte fiberkonfigurasjonene (intensiteter, sannsynligheter,
transmittanser, tellinger, QBER, E_X^U, K, R1, R2) og de globale konstantene.

Datasettet er eneste kilde til publiserte tall; resten av koden får alle
parametre som argumenter.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.decoy import totals
from app.core.errors import DecoyInfeasibleError, ParameterError
from app.core.validation import pydantic_violations
from app.models.config import get_settings
from app.models.schemas import ObservedBlock, PartySource, ProtocolConfig, StarChannel

logger = logging.getLogger(__name__)


class DatasetConstants(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta_d: float = Field(..., gt=0, le=1)
    p_d: float = Field(..., ge=0, lt=1)
    f: float = Field(..., ge=1)
    epsilon: float = Field(..., gt=0, lt=1)
    D: int = Field(..., ge=2)
    e_d: float = Field(..., ge=0, lt=0.5)
    alpha: float = Field(..., gt=0, description="Fiberdempning (dB/km)")
    simulation_eta_d: float = Field(0.6, gt=0, le=1)


class PublishedValues(BaseModel):
    model_config = ConfigDict(frozen=True)

    ex_upper: float = Field(..., ge=0, le=1)
    K: float = Field(..., ge=0, description="Rånøkkellengde")
    R1: float = Field(..., ge=0)
    R2: float = Field(..., ge=0)


class PublishedRecord(BaseModel):
    """Én kolonne fra de publiserte tabellene."""

    model_config = ConfigDict(frozen=True)

    name: str
    distances: tuple[float, float, float]
    N: float = Field(..., gt=0)
    source_a: PartySource
    source_b: PartySource
    source_c: PartySource
    eta_A: float = Field(..., gt=0, le=1)
    eta_B: float = Field(..., gt=0, le=1)
    eta_C: float = Field(..., gt=0, le=1)
    block: ObservedBlock
    published: PublishedValues

    @model_validator(mode="after")
    def check_totals(self) -> "PublishedRecord":
        try:
            totals(*self.sources)
        except DecoyInfeasibleError as e:
            raise ValueError("; ".join(e.violations))
        return self

    @property
    def sources(self) -> tuple[PartySource, PartySource, PartySource]:
        return (self.source_a, self.source_b, self.source_c)

    @property
    def symmetric(self) -> bool:
        return len(set(self.distances)) == 1

    def channel(self, constants: DatasetConstants) -> StarChannel:
        """Kanal med publiserte transmittanser; eta_A inkluderer Alices splitter."""
        return StarChannel(
            eta_A=self.eta_A, eta_B=self.eta_B, eta_C=self.eta_C,
            eta_d=constants.eta_d, p_d=constants.p_d, e_d=constants.e_d, D=constants.D,
            alice_split_in_eta=True,
        )

    def config(self, constants: DatasetConstants, global_budget: bool = False) -> ProtocolConfig:
        return ProtocolConfig(
            N=round(self.N), f=constants.f, epsilon=constants.epsilon,
            global_budget=global_budget,
        )


class PublishedDataset(BaseModel):
    model_config = ConfigDict(frozen=True)

    provenance: dict
    constants: DatasetConstants
    records: list[PublishedRecord]

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.records]

    def record(self, name: str) -> PublishedRecord:
        """Slå opp konfigurasjon på navn; '{50,50,50}' og '50,50,50' godtas."""
        key = name.strip().strip("{}").replace(" ", "")
        for r in self.records:
            if r.name.strip("{}") == key:
                return r
        raise ParameterError("Ukjent konfigurasjon", [f"config: '{name}' not in {self.names}"])


def load_dataset(path: Optional[Union[str, Path]] = None) -> PublishedDataset:
    """
    Last datasettet fra path, PMQCC_DATASET eller den medfølgende filen.

    Raises:
        ParameterError: hvis filen mangler, ikke er gyldig JSON eller bryter skjemaet
    """
    path = Path(path) if path else get_settings().dataset_path
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParameterError("Fant ikke datasett", [f"dataset: no such file {path}"])
    except json.JSONDecodeError as e:
        raise ParameterError("Ugyldig JSON", [f"dataset: line {e.lineno} column {e.colno}: {e.msg}"])
    try:
        dataset = PublishedDataset.model_validate(raw)
    except ValidationError as e:
        raise ParameterError("Ugyldig datasett", pydantic_violations(e, "dataset"))
    logger.debug(f"Lastet {len(dataset.records)} konfigurasjoner fra {path}")
    return dataset
