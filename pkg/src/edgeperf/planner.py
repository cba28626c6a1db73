"""Deployment planning over ingested configuration tables.

Loads accuracy/latency/cost rows, computes Pareto frontiers, answers
constrained-selection queries, aggregates parallel samples by majority vote,
and summarizes prefill/decode phase ratios.
"""

from __future__ import annotations

import csv
import warnings
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Hashable, Iterable, Optional, Sequence

from .errors import (
    DomainError,
    EmptyInput,
    InvariantViolation,
    ParseError,
    ZeroDecodeWarning,
    ZeroPrefill,
)
from .latency import LatencyBudget
from .profiles import MeasurementRecord, Phase, _read_text_csv


class Technique(str, Enum):
    BASE = "base"
    HARD_LIMIT = "hard_limit"
    SOFT_LIMIT = "soft_limit"
    NO_REASONING = "no_reasoning"
    DIRECT = "direct"
    BUDGET_AWARE = "budget_aware"


# Objective names accepted by pareto_frontier. Accuracy is maximized; the
# others are minimized.
OBJECTIVES = ("accuracy", "latency", "cost")


@dataclass(frozen=True)
class ConfigPoint:
    """One deployment configuration row from a result table."""

    model_id: str
    technique: Technique
    accuracy: float  # percent in [0, 100]
    avg_tokens: float  # decoded tokens per question
    latency: Optional[float] = None  # seconds per question
    cost: Optional[float] = None  # dollars per million tokens
    token_budget: Optional[int] = None
    scaling_factor: int = 1

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 100.0:
            raise InvariantViolation("config.accuracy", "accuracy must be in [0, 100]")
        if self.avg_tokens < 0:
            raise InvariantViolation("config.avg_tokens", "avg_tokens must be >= 0")
        if self.latency is not None and not self.latency > 0:
            raise InvariantViolation("config.latency", "latency must be > 0 when present")
        if self.cost is not None and self.cost < 0:
            raise InvariantViolation("config.cost", "cost must be >= 0 when present")
        if self.scaling_factor < 1:
            raise InvariantViolation("config.scaling_factor", "scaling_factor must be >= 1")


@dataclass(frozen=True)
class PhaseRatios:
    """Decode-to-prefill aggregates: tokens per token, seconds per second."""

    token_ratio: float
    latency_ratio: float


CONFIG_HEADER = [
    "model_id",
    "technique",
    "token_budget",
    "accuracy_pct",
    "avg_tokens",
    "latency_s",
    "cost_per_mtok",
    "scaling_factor",
]


def load_config_table(source) -> list[ConfigPoint]:
    """Parse the configuration-table CSV; empty cells mean absent fields."""
    text = _read_text_csv(source)
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty config table (header required)") from None
    if [h.strip() for h in header] != CONFIG_HEADER:
        raise ParseError(f"bad header {header!r}, expected {','.join(CONFIG_HEADER)}", line=1)
    points = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        if len(row) != len(CONFIG_HEADER):
            raise ParseError(
                f"expected {len(CONFIG_HEADER)} cells, got {len(row)}", line=lineno
            )
        try:
            points.append(
                ConfigPoint(
                    model_id=row[0].strip(),
                    technique=Technique(row[1].strip()),
                    token_budget=int(row[2]) if row[2].strip() else None,
                    accuracy=float(row[3]),
                    avg_tokens=float(row[4]),
                    latency=float(row[5]) if row[5].strip() else None,
                    cost=float(row[6]) if row[6].strip() else None,
                    scaling_factor=int(row[7]) if row[7].strip() else 1,
                )
            )
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return points


def _objective_values(point: ConfigPoint, objectives: Sequence[str]) -> Optional[tuple]:
    """Values oriented so smaller is better; None when a field is absent."""
    out = []
    for obj in objectives:
        if obj == "accuracy":
            out.append(-point.accuracy)
        elif obj == "latency":
            if point.latency is None:
                return None
            out.append(point.latency)
        elif obj == "cost":
            if point.cost is None:
                return None
            out.append(point.cost)
        else:
            raise DomainError(f"unknown objective {obj!r}")
    return tuple(out)


def pareto_frontier(points: Sequence[ConfigPoint], objectives: Iterable[str]) -> list[ConfigPoint]:
    """Non-dominated points under the given objective senses.

    Dominance is weak in every objective and strict in at least one; exact
    ties never dominate. Points missing a required field are excluded. The
    frontier is returned sorted by latency ascending.
    """
    requested = set(objectives)
    unknown = requested - set(OBJECTIVES)
    if unknown:
        raise DomainError(f"unknown objective {sorted(unknown)[0]!r}")
    objs = sorted(requested, key=OBJECTIVES.index)
    if len(objs) < 2:
        raise DomainError("need at least 2 objectives")
    if not points:
        raise DomainError("need at least 1 point")
    scored = [(p, v) for p in points for v in [_objective_values(p, objs)] if v is not None]

    def dominated(candidate) -> bool:
        _, cv = candidate
        for _, other in scored:
            if other == cv:
                continue
            if all(o <= c for o, c in zip(other, cv)) and any(
                o < c for o, c in zip(other, cv)
            ):
                return True
        return False

    frontier = []
    seen = set()
    for p, v in scored:
        key = (p.model_id, p.technique, v, p.token_budget, p.scaling_factor)
        if key in seen:
            continue
        if not dominated((p, v)):
            frontier.append(p)
            seen.add(key)
    frontier.sort(
        key=lambda p: (
            p.latency if p.latency is not None else float("inf"),
            -p.accuracy,
            p.model_id,
        )
    )
    return frontier


def _selection_key(point: ConfigPoint) -> tuple:
    # Max accuracy; ties: lower latency, then lower cost, then model_id.
    return (
        -point.accuracy,
        point.latency if point.latency is not None else float("inf"),
        point.cost if point.cost is not None else float("inf"),
        point.model_id,
    )


def best_under_latency(
    points: Sequence[ConfigPoint], budget: LatencyBudget
) -> Optional[ConfigPoint]:
    """Highest-accuracy configuration whose latency fits the budget, if any."""
    feasible = [p for p in points if p.latency is not None and p.latency <= budget.limit]
    if not feasible:
        return None
    return min(feasible, key=_selection_key)


def best_under_cost(points: Sequence[ConfigPoint], budget: float) -> Optional[ConfigPoint]:
    """Highest-accuracy configuration whose cost fits the budget, if any."""
    if budget < 0:
        raise DomainError(f"cost budget must be >= 0, got {budget}")
    feasible = [p for p in points if p.cost is not None and p.cost <= budget]
    if not feasible:
        return None
    return min(feasible, key=_selection_key)


def majority_vote(answers: Sequence[Hashable]) -> Hashable:
    """Most frequent answer; ties break toward the earliest first occurrence."""
    if not answers:
        raise EmptyInput("majority_vote needs at least one answer")
    counts = Counter(answers)
    first_seen = {}
    for idx, answer in enumerate(answers):
        first_seen.setdefault(answer, idx)
    return min(counts, key=lambda a: (-counts[a], first_seen[a]))


def phase_ratios(records: Iterable[MeasurementRecord]) -> PhaseRatios:
    """Aggregate decode-to-prefill token and latency ratios.

    Prefill rows contribute their input tokens and latency; decode rows their
    output tokens and latency. All-zero decode aggregates return 0/0 with a
    warning rather than failing.
    """
    records = list(records)
    if not records:
        raise EmptyInput("phase_ratios needs at least one record")
    prefill_tokens = sum(r.input_len for r in records if r.phase is Phase.PREFILL)
    prefill_latency = sum(r.latency for r in records if r.phase is Phase.PREFILL)
    decode_tokens = sum(r.output_len for r in records if r.phase is Phase.DECODE)
    decode_latency = sum(r.latency for r in records if r.phase is Phase.DECODE)
    if prefill_tokens <= 0 or prefill_latency <= 0:
        raise ZeroPrefill("prefill aggregates must be positive")
    if decode_tokens == 0 and decode_latency == 0:
        warnings.warn(
            "no decode activity in records; ratios are 0/0",
            ZeroDecodeWarning,
            stacklevel=2,
        )
        return PhaseRatios(token_ratio=0.0, latency_ratio=0.0)
    return PhaseRatios(
        token_ratio=decode_tokens / prefill_tokens,
        latency_ratio=decode_latency / prefill_latency,
    )


def builtin_config_table_path() -> Path:
    return Path(resources.files("edgeperf").joinpath("data/mmlu_redux_configs.csv"))


def default_config_table() -> list[ConfigPoint]:
    """The packaged MMLU-Redux result table."""
    return load_config_table(builtin_config_table_path())
