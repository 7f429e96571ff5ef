"""Deterministic CSV/JSON sinks for experiment results.

CSV bodies are byte-identical across reruns with the same config and seed;
the only timestamp lives in a leading comment header.
"""

from __future__ import annotations

import csv
import datetime
import json
import os
from typing import Iterable, Optional, Sequence

from .bounds import CheckResult


def _header_comment(tag: str) -> str:
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return f"# heatbound {tag} generated {stamp}"


def write_checks_csv(path: str, checks: Sequence[CheckResult], tag: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_header_comment(tag) + "\n")
        writer = csv.writer(fh)
        writer.writerow(CheckResult.CSV_HEADER)
        for ck in checks:
            writer.writerow(ck.csv_row())


def write_rows_csv(path: str, header: Sequence[str], rows: Iterable[Sequence],
                   tag: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_header_comment(tag) + "\n")
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))


def append_rows_csv(path: str, header: Sequence[str],
                    rows: Iterable[Sequence]) -> None:
    exists = os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if not exists:
            writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def csv_body(path: str) -> str:
    """File contents minus comment headers; used for determinism checks."""
    with open(path, "r", encoding="utf-8") as fh:
        return "".join(line for line in fh if not line.startswith("#"))
