"""JSON and CSV artifacts for experiment reports.

The JSON file holds the whole report and loads back into an equal
:class:`ExperimentReport`.  The CSV file is a long table with one row per
band or check, preceded by ``#`` comment lines carrying the schema version,
experiment, master seed, git description and resolved config.  Wall-clock
times appear only in the JSON, so CSV bodies are byte-identical across
re-runs with the same config and seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess
import tempfile
from functools import lru_cache
from pathlib import Path

from .estimate import Estimate
from .experiments import BandReport, Check, ExperimentReport

SCHEMA_VERSION = 1
CSV_COLUMNS = ("experiment", "kind", "parameter", "estimate", "ci_low", "ci_high",
               "band_low", "band_high", "verdict", "hits", "n_samples", "seed", "note")


class ReportIOError(OSError):
    """An artifact could not be written; no partial files are left behind."""


@lru_cache(maxsize=1)
def git_describe() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "-C", str(here), "describe", "--always", "--dirty", "--tags"],
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


# ---------------------------------------------------------------------------
# dict <-> report
# ---------------------------------------------------------------------------


def _num(x: float):
    return x if math.isfinite(x) else None


def _tuple(x):
    return tuple(_tuple(v) for v in x) if isinstance(x, list) else x


def _estimate_dict(e: Estimate) -> dict:
    return {"hits": e.hits, "n_samples": e.n_samples, "seed": e.seed,
            "config": list(e.config), "level": e.level, "wall_time": e.wall_time,
            "p_hat": e.p_hat, "ci_low": e.ci_low, "ci_high": e.ci_high}


def _estimate_from(d: dict) -> Estimate:
    return Estimate(d["hits"], d["n_samples"], d["seed"], _tuple(d["config"]),
                    d.get("wall_time", 0.0), d["level"])


def report_to_dict(r: ExperimentReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": r.experiment,
        "seed": r.seed,
        "git_describe": git_describe(),
        "verdict": r.verdict,
        "config": r.config,
        "bands": [{"parameter": b.parameter, "estimate": _estimate_dict(b.estimate),
                   "band": list(b.band), "verdict": b.verdict, "note": b.note}
                  for b in r.bands],
        "checks": [{"name": c.name, "value": _num(c.value), "low": _num(c.low),
                    "high": _num(c.high), "verdict": c.verdict, "note": c.note}
                   for c in r.checks],
        "tables": r.tables,
        "wall_time": r.wall_time,
    }


def report_from_dict(d: dict) -> ExperimentReport:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
    bands = [BandReport(b["parameter"], _estimate_from(b["estimate"]), tuple(b["band"]),
                        b["verdict"], b["note"]) for b in d["bands"]]
    checks = [Check(c["name"], math.inf if c["value"] is None else c["value"],
                    -math.inf if c["low"] is None else c["low"],
                    math.inf if c["high"] is None else c["high"], c["verdict"], c["note"])
              for c in d["checks"]]
    return ExperimentReport(d["experiment"], d["config"], d["seed"], bands, checks,
                            d["tables"], d.get("wall_time", 0.0))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ""
    return str(x)


def csv_rows(r: ExperimentReport) -> list[dict]:
    rows = []
    for b in r.bands:
        e = b.estimate
        rows.append({"experiment": r.experiment, "kind": "band", "parameter": b.parameter,
                     "estimate": e.p_hat, "ci_low": e.ci_low, "ci_high": e.ci_high,
                     "band_low": b.band[0], "band_high": b.band[1], "verdict": b.verdict,
                     "hits": e.hits, "n_samples": e.n_samples, "seed": r.seed, "note": b.note})
    for c in r.checks:
        rows.append({"experiment": r.experiment, "kind": "check", "parameter": c.name,
                     "estimate": c.value, "ci_low": None, "ci_high": None,
                     "band_low": c.low, "band_high": c.high, "verdict": c.verdict,
                     "hits": None, "n_samples": None, "seed": r.seed, "note": c.note})
    return rows


def render_csv(r: ExperimentReport) -> str:
    buf = io.StringIO()
    buf.write(f"# dynwalk schema_version={SCHEMA_VERSION}\n")
    buf.write(f"# experiment={r.experiment} seed={r.seed} git_describe={git_describe()}\n")
    buf.write(f"# config={json.dumps(r.config, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in csv_rows(r):
        w.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def csv_body(text: str) -> str:
    """The CSV text without its ``#`` header lines."""
    return "".join(ln for ln in text.splitlines(keepends=True) if not ln.startswith("#"))


def read_csv_rows(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        body = csv_body(fh.read())
    return list(csv.DictReader(io.StringIO(body)))


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def _atomic_write_all(items: list[tuple[Path, str]]) -> None:
    # write every file to a temp sibling first, then rename them all;
    # on any failure remove temps and whatever was already renamed
    temps, done = [], []
    try:
        for dest, text in items:
            dest.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=dest.parent, prefix=f".{dest.name}.", suffix=".tmp")
            temps.append(tmp)
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
        for (dest, _), tmp in zip(items, temps):
            os.replace(tmp, dest)
            done.append(dest)
    except OSError as exc:
        for p in temps:
            if os.path.exists(p):
                os.unlink(p)
        for p in done:
            if p.exists():
                p.unlink()
        raise ReportIOError(f"could not write report: {exc}") from exc


def emit_report(report: ExperimentReport, out_dir: str | os.PathLike,
                stem: str | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.csv`` under ``out_dir``; return both paths."""
    out = Path(out_dir)
    stem = stem or f"{report.experiment}-seed{report.seed}"
    js = out / f"{stem}.json"
    cs = out / f"{stem}.csv"
    text = json.dumps(report_to_dict(report), indent=2, sort_keys=True, allow_nan=False)
    _atomic_write_all([(js, text + "\n"), (cs, render_csv(report))])
    return js, cs


def load_report(path: str | os.PathLike) -> ExperimentReport:
    with open(path) as fh:
        return report_from_dict(json.load(fh))
