"""
PM-QCC CLI
==========
Kommandolinje for verktøykassen:

    python -m app.main keyrate INPUT.json
    python -m app.main reproduce [--config "{50,50,50}"] [--ex-mode best]
    python -m app.main simulate --distances 25,25,25 --config "{25,25,25}" --n-rounds 1e13
    python -m app.main optimize --mode asymmetric --distances 75,25,25 --n-rounds 4e13
    python -m app.main sweep --distances 25:100:25 --n-rounds 1e14
    python -m app.main montecarlo --config "{25,25,25}" --trials 1e7 --seed 7

Exit-koder: 0 ok, 2 ugyldige parametre, 3 numerisk feil, 4 toleransebrudd.
Logging går til stderr, resultater til stdout eller --out.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from app.api.commands import HANDLERS, emit, parse_count
from app.core.errors import ParameterError, PmqccError
from app.models.config import get_settings
from app.models.schemas import ExMode, MisalignmentMode, OptimizationMode, PhaseMode, QberModel

logger = logging.getLogger(__name__)

EXIT_PARAMETER = 2
EXIT_NUMERIC = 3


def _add_output(p: argparse.ArgumentParser, default_format: str = "json") -> None:
    p.add_argument("--out", type=Path, help="Skriv resultat til fil i stedet for stdout")
    p.add_argument("--format", choices=["json", "csv"], default=default_format)


def _add_dataset(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", type=Path, help="Alternativt datasett (ellers PMQCC_DATASET)")


def _add_channel(p: argparse.ArgumentParser) -> None:
    p.add_argument("--distances", help="d_A,d_B,d_C i km (én verdi = symmetrisk)")
    p.add_argument("--alpha", type=float, help="Fiberdempning i dB/km")
    p.add_argument("--eta-d", type=float, help="Deteksjonseffektivitet")
    p.add_argument("--dark", type=float, help="Mørketelling per puls")
    p.add_argument("--misalignment", type=float, help="Feiljusteringsrate e_d")
    p.add_argument("--slices", type=int, help="Antall faseskiver D")
    p.add_argument("--epsilon", type=float, help="Feilsannsynlighet per grense")


def _add_optimizer(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in OptimizationMode], default="symmetric")
    p.add_argument("--no-doubling", action="store_true", help="Ikke krev mu_a = 2*mu_b")
    p.add_argument("--evals", type=int, default=2000, help="Evalueringer per restart")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--qber-model", choices=[m.value for m in QberModel], default="visibility")
    p.add_argument("--threads", type=int, help="Overstyrer PMQCC_THREADS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmqcc",
        description="Nøkkelrate, optimering og Monte Carlo for tre-intensitets PM-QCC",
    )
    parser.add_argument("--log-level", help="Overstyrer PMQCC_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    # === keyrate ===
    p = sub.add_parser("keyrate", help="Rate fra observerte tellinger")
    p.add_argument("input", nargs="?", type=Path, help="JSON med block, source_a/b/c og config")
    p.add_argument("--config", help="Bruk en medfølgende konfigurasjon, f.eks. '{25,25,25}'")
    p.add_argument("--published-ex", action="store_true", help="Bruk publisert E_X^U (med --config)")
    p.add_argument("--ex-mode", choices=[m.value for m in ExMode], default="upper")
    p.add_argument("--budget", action="store_true", help="Del epsilon på seks grenser")
    p.add_argument("--csv", dest="format", action="store_const", const="csv", default="json", help="Kortform for --format csv")
    _add_dataset(p)
    _add_output(p)

    # === reproduce ===
    p = sub.add_parser("reproduce", help="Sammenlign med publiserte tabeller")
    p.add_argument("--config", help="Kjør bare én konfigurasjon")
    p.add_argument("--ex-mode", choices=[m.value for m in ExMode] + ["best"], default="best")
    p.add_argument("--checks", default="r1,k,ex,r2", help="Dommer som bestemmer exit-koden")
    p.add_argument("--budget", action="store_true", help="Del epsilon på seks grenser")
    p.add_argument("--verify", action="store_true", help="Symbolsk kontroll av eliminasjonen først")
    _add_dataset(p)
    _add_output(p, default_format="csv")

    # === simulate ===
    p = sub.add_parser("simulate", help="Simulert rate for gitte kilder")
    _add_channel(p)
    p.add_argument("--n-rounds", type=parse_count, required=True)
    p.add_argument("--config", help="Kilder (og kanal uten --distances) fra datasettet")
    p.add_argument("--sources", type=Path, help="JSON med source_a/b/c")
    p.add_argument("--qber-model", choices=[m.value for m in QberModel], default="ideal")
    p.add_argument("--ex-mode", choices=[m.value for m in ExMode], default="upper")
    _add_dataset(p)
    _add_output(p)

    # === optimize ===
    p = sub.add_parser("optimize", help="Optimer intensiteter og sannsynligheter")
    _add_channel(p)
    p.add_argument("--n-rounds", type=parse_count, required=True)
    p.add_argument("--trace", type=Path, help="Skriv alle evalueringer til CSV")
    _add_optimizer(p)
    _add_dataset(p)
    _add_output(p)

    # === sweep ===
    p = sub.add_parser("sweep", help="Optimert rate langs avstand")
    _add_channel(p)
    p.add_argument("--grid", help="d_A:start:stop:step for asymmetrisk rutenett")
    p.add_argument("--n-rounds", type=parse_count, required=True)
    _add_optimizer(p)
    _add_dataset(p)
    _add_output(p, default_format="csv")

    # === montecarlo ===
    p = sub.add_parser("montecarlo", help="Hendelsesnivå-simulering")
    _add_channel(p)
    p.add_argument("--config", help="Kilder (og kanal uten --distances) fra datasettet")
    p.add_argument("--sources", type=Path, help="JSON med source_a/b/c")
    p.add_argument("--trials", type=parse_count, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--phase-mode", choices=[m.value for m in PhaseMode], default="discrete")
    p.add_argument("--misalignment-mode", choices=[m.value for m in MisalignmentMode], default="flip")
    p.add_argument("--threads", type=int, help="Overstyrer PMQCC_THREADS")
    p.add_argument("--trace", type=Path, help="Per-hendelse-spor som CSV (maks 1e6)")
    p.add_argument("--rate", action="store_true", help="Kjør endelig-størrelse-pipelinen på tellingen")
    p.add_argument("--n-rounds", type=parse_count, help="Skaler tellingen til N runder")
    _add_dataset(p)
    _add_output(p)

    return parser


def _configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=(level or get_settings().log_level).upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        _configure_logging(args.log_level)
        output = HANDLERS[args.command](args)
        emit(output.data, args.format, args.out)
        return output.exit_code
    except ParameterError as e:
        print(f"Feil: {e}", file=sys.stderr)
        for violation in e.violations:
            print(f"  - {violation}", file=sys.stderr)
        return EXIT_PARAMETER
    except PmqccError as e:
        print(f"Numerisk feil: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"Feil: {e}", file=sys.stderr)
        return EXIT_PARAMETER


if __name__ == "__main__":
    sys.exit(main())
