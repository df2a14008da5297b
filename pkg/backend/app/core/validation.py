"""
PM-QCC Validering
=================
Fiberdempning og samlet validering av parameterpakker.

validate() rapporterer ALLE brudd på en gang, med feltnavn,
i stedet for å stoppe ved første feil.
"""

import logging
from dataclasses import dataclass
from typing import Any, Mapping, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from app.core.errors import ParameterError
from app.models.schemas import PartySource, ProtocolConfig, StarChannel

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


def transmittance_from_distance(d: float, alpha: float) -> float:
    """
    Transmittans for en fiber med lengde d (km) og dempning alpha (dB/km).

    Returnerer 10^(-alpha*d/10).
    """
    violations = []
    if d < 0:
        violations.append(f"d: distance must be >= 0 (got {d})")
    if alpha <= 0:
        violations.append(f"alpha: attenuation must be > 0 (got {alpha})")
    if violations:
        raise ParameterError("Ugyldig fiberkanal", violations)
    return 10 ** (-alpha * d / 10)


def pydantic_violations(error: ValidationError, prefix: str = "") -> list[str]:
    """Gjør pydantic-feil om til 'felt: melding'-strenger."""
    violations = []
    for err in error.errors():
        loc = ".".join(str(part) for part in err["loc"])
        field = ".".join(part for part in (prefix, loc) if part) or "input"
        msg = err["msg"].removeprefix("Value error, ")
        for part in msg.split("; "):
            violations.append(f"{field}: {part}")
    return violations


def parse_model(model: Type[M], data: Union[M, Mapping[str, Any]], prefix: str = "") -> M:
    """Bygg en modell, og løft ParameterError med alle brudd ved feil."""
    if isinstance(data, model):
        return data
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ParameterError(f"Ugyldig {prefix or model.__name__}", pydantic_violations(e, prefix))


@dataclass(frozen=True)
class ValidatedBundle:
    """Gyldig kombinasjon av tre kilder, kanal og konfigurasjon."""
    sources: tuple[PartySource, PartySource, PartySource]
    channel: StarChannel
    config: ProtocolConfig


def collect_violations(
    sources: tuple[Any, Any, Any],
    channel: Any,
    config: Any,
) -> list[str]:
    """Returner komplett liste over brudd (tom liste = gyldig)."""
    violations: list[str] = []
    parts = [
        (PartySource, sources[0], "source_a"),
        (PartySource, sources[1], "source_b"),
        (PartySource, sources[2], "source_c"),
        (StarChannel, channel, "channel"),
        (ProtocolConfig, config, "config"),
    ]
    for model, data, prefix in parts:
        try:
            parse_model(model, data, prefix)
        except ParameterError as e:
            violations.extend(e.violations)
    return violations


def validate(
    sources: tuple[Any, Any, Any],
    channel: Any,
    config: Any,
) -> ValidatedBundle:
    """
    Valider en parameterpakke.

    Raises:
        ParameterError: med hele listen over brudd
    """
    violations = collect_violations(sources, channel, config)
    if violations:
        logger.warning(f"{len(violations)} valideringsfeil funnet")
        raise ParameterError("Ugyldige parametre", violations)
    return ValidatedBundle(
        sources=tuple(parse_model(PartySource, s) for s in sources),
        channel=parse_model(StarChannel, channel),
        config=parse_model(ProtocolConfig, config),
    )
