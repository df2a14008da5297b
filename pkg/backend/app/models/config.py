import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

load_dotenv()

DEFAULT_DATASET = Path(__file__).resolve().parent.parent / "data" / "published_configs.json"


class Settings(BaseModel):
    """Kjøretidsinnstillinger fra miljøet (.env støttes)."""

    # === Parallellitet ===
    threads: int = Field(
        default_factory=lambda: os.cpu_count() or 1,
        ge=1,
        description="Maks antall arbeidertråder (PMQCC_THREADS)"
    )

    # === Logging ===
    log_level: str = Field(default="INFO", description="Loggnivå (PMQCC_LOG_LEVEL)")

    # === Data ===
    dataset_path: Path = Field(
        default=DEFAULT_DATASET,
        description="Sti til publisert datasett (PMQCC_DATASET)"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"Ukjent loggnivå: {v}")
        return level

    @classmethod
    def from_env(cls) -> "Settings":
        values = {}
        if os.getenv("PMQCC_THREADS"):
            values["threads"] = int(os.getenv("PMQCC_THREADS"))
        if os.getenv("PMQCC_LOG_LEVEL"):
            values["log_level"] = os.getenv("PMQCC_LOG_LEVEL")
        if os.getenv("PMQCC_DATASET"):
            values["dataset_path"] = Path(os.getenv("PMQCC_DATASET"))
        return cls(**values)


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Lazy-initialiserte innstillinger."""
    global _settings
    if _settings is None:
        _settings = Settings.from_env()
    return _settings


def reset_settings() -> None:
    """Nullstill (brukes av tester etter endring av miljøvariabler)."""
    global _settings
    _settings = None
