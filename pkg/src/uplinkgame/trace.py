"""Run trace rows, their CSV serialization, and run summaries.

The CSV schema is fixed: one header row naming the fields, floats with 17
significant digits so files round-trip bit-exactly, associations as
hyphen-joined 1-based AP labels. Inner-loop evaluations carry their inner
iteration index; outer-level records use inner_iter = -1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

TRACE_HEADER = (
    "outer_iter",
    "inner_iter",
    "system_potential",
    "sum_rate",
    "residual_inf_norm",
    "association",
    "switch_count",
)


@dataclass(frozen=True)
class TraceRow:
    outer_iter: int
    inner_iter: int  # -1 for outer-level records
    system_potential: float
    sum_rate: float
    residual_inf_norm: float
    association: str  # hyphen-joined 1-based AP labels
    switch_count: int


def association_label(association) -> str:
    return "-".join(str(int(a) + 1) for a in association)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for r in rows:
            writer.writerow(
                (
                    r.outer_iter,
                    r.inner_iter,
                    _fmt(r.system_potential),
                    _fmt(r.sum_rate),
                    _fmt(r.residual_inf_norm),
                    r.association,
                    r.switch_count,
                )
            )


def read_trace(path) -> list[TraceRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_HEADER:
            raise ValidationError(f"{path}: unexpected trace header {header}")
        for rec in reader:
            rows.append(
                TraceRow(
                    outer_iter=int(rec[0]),
                    inner_iter=int(rec[1]),
                    system_potential=float(rec[2]),
                    sum_rate=float(rec[3]),
                    residual_inf_norm=float(rec[4]),
                    association=rec[5],
                    switch_count=int(rec[6]),
                )
            )
    return rows


def inner_rows(outer_iter: int, association, inner_trace) -> list[TraceRow]:
    """Expand an InnerTrace into CSV rows under one outer iteration."""
    label = association_label(association)
    return [
        TraceRow(
            outer_iter=outer_iter,
            inner_iter=j,
            system_potential=float(inner_trace.potential[j]),
            sum_rate=float(inner_trace.sum_rate[j]),
            residual_inf_norm=float(inner_trace.residual_inf[j]),
            association=label,
            switch_count=0,
        )
        for j in range(len(inner_trace.potential))
    ]


def write_summary(path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)!r}")
