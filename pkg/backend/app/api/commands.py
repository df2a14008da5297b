"""
PM-QCC Kommandoer
=================
Handlere for CLI-underkommandoene og felles serialisering.

Hver handler tar et argparse.Namespace og returnerer CommandOutput.
JSON skrives med full float-repr, CSV med %.12e og '.' som desimaltegn.
"""

import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd

from app.core.dataset import PublishedDataset, load_dataset
from app.core.errors import ParameterError
from app.core.keyrate import finite_key_rate, simulate_key_rate
from app.core.montecarlo import TRACE_CAP, empirical_rate, run_trials
from app.core.optimizer import optimize, sweep_distance, sweep_grid
from app.core.validation import parse_model, transmittance_from_distance
from app.models.schemas import (
    ExMode,
    KeyRateInput,
    MisalignmentMode,
    OptimizationMode,
    OptimizationSpec,
    PhaseMode,
    ProtocolConfig,
    QberModel,
    SourceTriple,
    StarChannel,
)
from app.services.reproduction import reproduce

logger = logging.getLogger(__name__)

Record = Union[dict, list[dict]]

EXIT_OK = 0
EXIT_TOLERANCE = 4


@dataclass
class CommandOutput:
    data: Record
    exit_code: int = EXIT_OK


# =============================================================================
# SERIALISERING
# =============================================================================

def _native(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Kan ikke serialisere {type(value).__name__}")


def to_json(data: Record) -> str:
    return json.dumps(data, indent=2, default=_native) + "\n"


def to_csv(data: Record) -> str:
    rows = data if isinstance(data, list) else [data]
    return pd.DataFrame(rows).to_csv(index=False, float_format="%.12e")


def emit(data: Record, fmt: str = "json", out: Optional[Path] = None) -> None:
    """Skriv resultatet til fil eller stdout."""
    text = to_csv(data) if fmt == "csv" else to_json(data)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"Skrev {out}")
    else:
        sys.stdout.write(text)


def read_json(path: Path) -> Any:
    """Les JSON-fil; syntaksfeil rapporteres med linje og kolonne."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParameterError("Fant ikke fil", [f"input: no such file {path}"])
    except json.JSONDecodeError as e:
        raise ParameterError("Ugyldig JSON", [f"input: line {e.lineno} column {e.colno}: {e.msg}"])


# =============================================================================
# ARGUMENT-HJELPERE
# =============================================================================

def parse_count(text: str) -> int:
    """'1e14' -> 100000000000000."""
    value = float(text)
    if not value >= 1 or value != int(value):
        raise ValueError(f"ugyldig antall: {text}")
    return int(value)


def parse_range(text: str) -> list[float]:
    """'25:100:25' -> [25, 50, 75, 100]; '25,50' -> [25, 50]."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0 or stop < start:
            raise ValueError(f"ugyldig område: {text}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_grid(text: str) -> tuple[float, list[float]]:
    """'75:25:100:25' -> (75, [25, 50, 75, 100]): Alice fast, rutenett for Bob og Charlie."""
    d_a, _, rest = text.partition(":")
    return float(d_a), parse_range(rest)


def parse_triple(text: str) -> tuple[float, float, float]:
    """'75,25,25' -> (75, 25, 25); én verdi gir symmetrisk trippel."""
    values = [float(x) for x in text.split(",")]
    if len(values) == 1:
        values *= 3
    if len(values) != 3:
        raise ValueError(f"forventet én eller tre avstander: {text}")
    return tuple(values)


def _dataset(args) -> PublishedDataset:
    return load_dataset(getattr(args, "dataset", None))


def _sources(args, dataset: PublishedDataset):
    if getattr(args, "sources", None):
        return parse_model(SourceTriple, read_json(args.sources), "sources").as_tuple()
    if getattr(args, "config", None):
        return dataset.record(args.config).sources
    raise ParameterError("Mangler kilder", ["sources: give --sources FILE or --config NAME"])


def _detector(args, dataset: PublishedDataset) -> dict:
    c = dataset.constants
    return dict(
        eta_d=args.eta_d if args.eta_d is not None else c.simulation_eta_d,
        p_d=args.dark if args.dark is not None else c.p_d,
        e_d=args.misalignment if args.misalignment is not None else c.e_d,
        D=args.slices if args.slices is not None else c.D,
    )


def _alpha(args, dataset: PublishedDataset) -> float:
    return args.alpha if args.alpha is not None else dataset.constants.alpha


def channel_from_distances(
    distances: tuple[float, float, float], alpha: float, detector: dict
) -> StarChannel:
    etas = [transmittance_from_distance(d, alpha) for d in distances]
    return parse_model(StarChannel, dict(zip(("eta_A", "eta_B", "eta_C"), etas), **detector), "channel")


def _channel(args, dataset: PublishedDataset) -> StarChannel:
    """Kanal fra --distances eller --config; detektorverdier fra flagg eller datasettets konstanter."""
    detector = _detector(args, dataset)
    if args.distances is None:
        if not getattr(args, "config", None):
            raise ParameterError("Mangler kanal", ["distances: give --distances or --config"])
        record = dataset.record(args.config)
        return parse_model(StarChannel, dict(
            eta_A=record.eta_A, eta_B=record.eta_B, eta_C=record.eta_C,
            alice_split_in_eta=True, **detector,
        ), "channel")
    return channel_from_distances(parse_triple(args.distances), _alpha(args, dataset), detector)


def _config(args, dataset: PublishedDataset, N: Optional[int] = None) -> ProtocolConfig:
    c = dataset.constants
    return parse_model(ProtocolConfig, {
        "N": N or args.n_rounds,
        "f": c.f,
        "epsilon": args.epsilon if args.epsilon is not None else c.epsilon,
        "global_budget": getattr(args, "budget", False),
    }, "config")


def _spec(args, dataset: PublishedDataset, channel: StarChannel, config: ProtocolConfig) -> OptimizationSpec:
    return parse_model(OptimizationSpec, {
        "channel": channel,
        "config": config,
        "mode": OptimizationMode(args.mode),
        "alice_doubling": not args.no_doubling,
        "budget": args.evals,
        "restarts": args.restarts,
        "seed": args.seed,
        "qber_model": QberModel(args.qber_model),
        "threads": args.threads,
    }, "optimization")


def _report_row(report, **extra) -> dict:
    return {**extra, **report.model_dump(mode="json")}


# =============================================================================
# HANDLERE
# =============================================================================

def cmd_keyrate(args) -> CommandOutput:
    """Rate fra observerte tellinger (fil eller medfølgende konfigurasjon)."""
    if args.input:
        data = parse_model(KeyRateInput, read_json(args.input), "")
        sources = (data.source_a, data.source_b, data.source_c)
        block, config, D, name = data.block, data.config, data.D, data.name
        ex_override = data.ex_override
    elif args.config:
        dataset = _dataset(args)
        record = dataset.record(args.config)
        sources, block, name = record.sources, record.block, record.name
        config = record.config(dataset.constants, args.budget)
        D = dataset.constants.D
        ex_override = record.published.ex_upper if args.published_ex else None
    else:
        raise ParameterError("Mangler inndata", ["input: give a file or --config NAME"])

    report = finite_key_rate(block, sources, config, D, ex_mode=ExMode(args.ex_mode), ex_override=ex_override)
    return CommandOutput(_report_row(report, config=name))


def cmd_reproduce(args) -> CommandOutput:
    report = reproduce(
        dataset=_dataset(args),
        configs=[args.config] if args.config else None,
        ex_mode=args.ex_mode,
        checks=[c.strip() for c in args.checks.split(",") if c.strip()],
        global_budget=args.budget,
        verify=args.verify,
    )
    return CommandOutput(
        report.table.to_dict(orient="records"),
        EXIT_OK if report.passed else EXIT_TOLERANCE,
    )


def cmd_simulate(args) -> CommandOutput:
    dataset = _dataset(args)
    channel = _channel(args, dataset)
    report = simulate_key_rate(
        channel, _sources(args, dataset), _config(args, dataset),
        qber_model=QberModel(args.qber_model), ex_mode=ExMode(args.ex_mode),
    )
    return CommandOutput(_report_row(report))


def cmd_optimize(args) -> CommandOutput:
    dataset = _dataset(args)
    spec = _spec(args, dataset, _channel(args, dataset), _config(args, dataset))
    result = optimize(spec)
    if args.trace:
        trace = pd.DataFrame([
            {"restart": e.restart, "evaluation": e.evaluation, "rate": e.rate, "rate_raw": e.rate_raw,
             "failed": e.failed,
             **dict(zip(("mu_a", "mu_b", "mu_c", "nu_ratio", "omega_ratio", "p_mu", "p_nu", "p_omega"), e.params))}
            for e in result.trace
        ])
        trace.to_csv(args.trace, index=False, float_format="%.12e")
    row = {
        "mode": spec.mode.value,
        "N": spec.config.N,
        "zero_rate": result.zero_rate,
        "restart": result.restart,
        "evaluations": len(result.trace),
        **result.to_row(),
        "ez_max": result.report.ez_max,
        "ex_upper": result.report.ex_upper,
    }
    return CommandOutput(row)


def cmd_sweep(args) -> CommandOutput:
    dataset = _dataset(args)
    alpha = _alpha(args, dataset)
    detector = _detector(args, dataset)
    config = _config(args, dataset)
    if args.grid:
        d_a, grid = parse_grid(args.grid)
        spec = _spec(args, dataset, channel_from_distances((d_a, grid[0], grid[0]), alpha, detector), config)
        frame = sweep_grid(spec, d_a, grid, grid, alpha)
    else:
        if args.distances is None:
            raise ParameterError("Mangler avstander", ["distances: give --distances START:STOP:STEP"])
        arms = parse_range(args.distances)
        spec = _spec(args, dataset, channel_from_distances((arms[0],) * 3, alpha, detector), config)
        frame = sweep_distance(spec, arms, alpha)
    return CommandOutput(frame.to_dict(orient="records"))


def cmd_montecarlo(args) -> CommandOutput:
    dataset = _dataset(args)
    channel = _channel(args, dataset)
    sources = _sources(args, dataset)
    trace_limit = 0
    if args.trace:
        trace_limit = min(args.trials, TRACE_CAP)
    result = run_trials(
        channel, sources, args.trials, args.seed,
        phase_mode=PhaseMode(args.phase_mode),
        misalignment_mode=MisalignmentMode(args.misalignment_mode),
        threads=args.threads,
        trace_limit=trace_limit,
    )
    if args.trace and result.trace is not None:
        result.trace.to_csv(args.trace, index=False)
    row = {"trials": args.trials, "seed": args.seed, **result.to_dict()}
    if args.rate:
        config = _config(args, dataset, N=args.n_rounds or args.trials)
        report = empirical_rate(
            result.tally, config, sources, channel.D, scale_to_config=bool(args.n_rounds)
        )
        row.update({"R1": report.r_finite, "R2": report.r_asymptotic, "ex_upper": report.ex_upper})
    return CommandOutput(row)


HANDLERS = {
    "keyrate": cmd_keyrate,
    "reproduce": cmd_reproduce,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "montecarlo": cmd_montecarlo,
}

__all__ = ["HANDLERS", "CommandOutput", "emit", "to_json", "to_csv"]
