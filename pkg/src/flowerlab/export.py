"""Dataset export: CSV tables and JSON reports with deterministic bytes."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Table:
    header: list
    rows: list = field(default_factory=list)


@dataclass
class RunResult:
    """What an experiment hands to the exporter: a report and named tables."""

    name: str
    report: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)


def to_jsonable(obj):
    """Plain JSON types; complex numbers become [re, im], non-finite floats strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def _num(v):
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def report_json(report: dict) -> str:
    return json.dumps(to_jsonable(report), indent=2, ensure_ascii=True, allow_nan=False) + "\n"


def _cell(v):
    v = to_jsonable(v)
    if isinstance(v, list):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def write_csv(path, table: Table):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_cell(v) for v in row])


def export_datasets(run: RunResult, out_dir) -> list:
    """Write ``<name>_report.json`` and ``<name>_<table>.csv``; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    p = os.path.join(out_dir, f"{run.name}_report.json")
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report_json(run.report))
    paths.append(p)
    for key in sorted(run.tables):
        p = os.path.join(out_dir, f"{run.name}_{key}.csv")
        write_csv(p, run.tables[key])
        paths.append(p)
    return paths
