"""Result persistence: fixed-schema CSV for estimates, JSON-lines for checks.

Column order is fixed and versioned; every row carries the seed and the
schema version so downstream plot scripts never break silently.  Writes are
atomic (temp file + rename) and contain no timestamps, so re-running a
command with the same config and seed reproduces byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Iterable

from .estimators import Estimate
from .inequalities import CheckReport

__all__ = [
    "SCHEMA_VERSION",
    "ESTIMATE_COLUMNS",
    "estimate_row",
    "append_estimates_csv",
    "write_estimates_json",
    "append_checks_jsonl",
    "write_json",
]

SCHEMA_VERSION = 1

ESTIMATE_COLUMNS = ["experiment_id", "event", "h", "n", "M", "p_hat",
                    "ci_lo", "ci_hi", "seed", "schema_version"]


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def estimate_row(experiment_id: str, est: Estimate) -> list:
    return [experiment_id, est.event, repr(est.h), est.n, est.M,
            repr(est.p_hat), repr(est.ci_lo), repr(est.ci_hi), est.seed,
            SCHEMA_VERSION]


def append_estimates_csv(path: str, experiment_id: str,
                         estimates: Iterable[Estimate]) -> None:
    """Append estimate rows, creating the file with a header if needed."""
    existing = ""
    if os.path.exists(path):
        with open(path, newline="") as fh:
            existing = fh.read()
    lines = []
    if not existing:
        lines.append(",".join(ESTIMATE_COLUMNS))
    for est in estimates:
        lines.append(",".join(str(v) for v in estimate_row(experiment_id, est)))
    _atomic_write(path, existing + "\n".join(lines) + "\n")


def _jsonable(value):
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_estimates_json(path: str, experiment_id: str,
                         estimates: Iterable[Estimate],
                         extra: dict | None = None) -> None:
    """JSON mirror of the CSV rows for one run."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "experiment_id": experiment_id,
        "estimates": [
            {col: val for col, val in zip(ESTIMATE_COLUMNS,
                                          estimate_row(experiment_id, e))}
            for e in estimates
        ],
    }
    if extra:
        doc.update(_jsonable(extra))
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def check_to_dict(report: CheckReport) -> dict:
    return _jsonable({
        "name": report.name,
        "lhs": report.lhs,
        "rhs": report.rhs,
        "margin": report.margin,
        "se": report.se,
        "verdict": report.verdict,
        "params": report.params,
        "flags": list(report.flags),
        "seed": report.seed,
        "schema_version": SCHEMA_VERSION,
    })


def append_checks_jsonl(path: str, reports: Iterable[CheckReport]) -> None:
    """One JSON document per line per check report."""
    existing = ""
    if os.path.exists(path):
        with open(path) as fh:
            existing = fh.read()
    lines = [json.dumps(check_to_dict(r), sort_keys=True) for r in reports]
    _atomic_write(path, existing + "\n".join(lines) + "\n")


def write_json(path: str, doc: dict) -> None:
    _atomic_write(path, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
