"""
PM-QCC Feilhierarki
===================
Felles unntak for hele verktøykassen. CLI-laget oversetter dem til
exit-koder: ParameterError -> 2, NumericError -> 3.
"""

from typing import Iterable, Optional


class PmqccError(Exception):
    """Baseklasse for alle feil i pmqcc."""
    pass


class ParameterError(PmqccError):
    """
    Ugyldige inngangsparametre.

    Bærer en komplett liste over brudd på formen "felt: melding",
    slik at brukeren ser alle feil på én gang.
    """

    def __init__(self, message: str, violations: Optional[Iterable[str]] = None):
        self.violations: list[str] = list(violations or [])
        if self.violations and message:
            message = f"{message}: " + "; ".join(self.violations)
        super().__init__(message)


class DecoyInfeasibleError(ParameterError):
    """Intensitetene oppfyller ikke kravene til decoy-analysen."""
    pass


class NumericError(PmqccError):
    """Numerisk løser konvergerte ikke."""
    pass


class UndefinedQuantityError(NumericError):
    """En størrelse er udefinert (f.eks. QBER når klikk-sannsynligheten er 0)."""
    pass
