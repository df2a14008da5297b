"""
PM-QCC Modeller
===============
Domenetyper og innstillinger.
"""

from .schemas import (
    Tier,
    ExMode,
    QberModel,
    PhaseMode,
    MisalignmentMode,
    OptimizationMode,
    PartySource,
    StarChannel,
    ProtocolConfig,
    ObservedBlock,
    RateReport,
    SourceTriple,
    KeyRateInput,
    OptimizationSpec,
    DEFAULT_BOUNDS,
)
from .config import Settings, get_settings, reset_settings

__all__ = [
    'Tier',
    'ExMode',
    'QberModel',
    'PhaseMode',
    'MisalignmentMode',
    'OptimizationMode',
    'PartySource',
    'StarChannel',
    'ProtocolConfig',
    'ObservedBlock',
    'RateReport',
    'SourceTriple',
    'KeyRateInput',
    'OptimizationSpec',
    'DEFAULT_BOUNDS',
    'Settings',
    'get_settings',
    'reset_settings',
]
