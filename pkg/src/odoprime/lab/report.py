"""Versioned, deterministic reports: JSON documents and sectioned CSV."""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction

import numpy as np

SCHEMA = "odoprime.report/1"


def jsonable(v):
    """Convert numbers, fractions and containers into plain JSON values."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        v = int(v)
        # keep exact integers readable but safe for float-only JSON readers
        return v if abs(v) < 1 << 53 else str(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if v is None or isinstance(v, str):
        return v
    if hasattr(v, "to_json"):
        return jsonable(v.to_json())
    return str(v)


class Report:
    """Checks, tables and plottable series produced by one command."""

    def __init__(self, command: str, config=None, schedules=None, metric: str | None = None):
        self.command = command
        self.config = config
        self.schedules = {}
        for s in schedules or []:
            self.add_schedule(s)
        self.metric = metric
        self.truncation: dict = {}
        self.checks: list = []
        self.tables: dict = {}
        self.series: dict = {}
        self.notes: list = []
        self.summary: dict = {}

    def add_schedule(self, sched, label: str | None = None):
        self.schedules[label or sched.name or f"custom{len(self.schedules)}"] = sched.to_dict()

    def check(self, name: str, passed: bool, **detail) -> bool:
        self.checks.append({"name": name, "passed": bool(passed), **detail})
        return bool(passed)

    def table(self, name: str, rows: list):
        self.tables.setdefault(name, []).extend(rows)

    def add_series(self, name: str, x, ys: dict, xlabel: str = "", ylabel: str = "", logy: bool = False):
        self.series[name] = {"x": list(x), "y": {k: list(v) for k, v in ys.items()},
                             "xlabel": xlabel, "ylabel": ylabel, "logy": logy}

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        cfg = self.config
        return jsonable({
            "schema": SCHEMA,
            "command": self.command,
            "config_hash": cfg.digest() if cfg is not None else None,
            "seed": cfg.seed if cfg is not None else None,
            "config": cfg.canonical() if cfg is not None else None,
            "schedules": self.schedules,
            "metric": self.metric,
            "truncation": self.truncation,
            "passed": self.passed,
            "checks": self.checks,
            "summary": self.summary,
            "tables": self.tables,
            "series": self.series,
            "notes": self.notes,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        """Every table as a ``# table: <name>`` section; checks come first."""
        d = self.to_dict()
        buf = io.StringIO()
        sections = {"checks": [_flat(c) for c in d["checks"]]}
        sections.update({k: [_flat(r) for r in v] for k, v in sorted(d["tables"].items())})
        for name, rows in sections.items():
            buf.write(f"# table: {name}\n")
            cols: list = []
            for r in rows:
                cols += [k for k in r if k not in cols]
            w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
            buf.write("\n")
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def _flat(row: dict) -> dict:
    return {k: json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v for k, v in row.items()}
