"""Report serialization: JSON, CSV and the convergence table."""
from __future__ import annotations

import csv
import io
import json
import os
import platform
import tempfile
from pathlib import Path

import numpy as np

from .scenarios import compare

SCHEMA_VERSION = "1"
CSV_COLUMNS = ("scenario", "rung", "value_re", "value_im", "oracle", "rel_err")
#: keys that legitimately differ between two runs of the same configuration
VOLATILE_KEYS = ("timestamp",)


def _plain(obj):
    """JSON-safe copy: complex numbers become ``[re, im]``, arrays lists, non-finite floats strings."""
    if isinstance(obj, dict):
        return {str(key): _plain(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(item) for item in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(float(obj.real)), _plain(float(obj.imag))]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if np.isfinite(obj) else repr(obj)
    return obj


def environment() -> dict:
    from ..kernels import BACKEND

    return {"python": platform.python_version(), "numpy": np.__version__, "backend": BACKEND,
            "threads": os.environ.get("NILQUANT_THREADS", "default")}


def build_report(config, result=None, diagnostic=None, started=None, seconds=None) -> dict:
    """Assemble the JSON document for one run (``result`` is None after a precondition failure)."""
    from ..ovmeasure import matrix_to_pairs

    if result is None:
        status = "error"
    else:
        status = "pass" if all(verdict["passed"] for verdict in result.verdicts.values()) else "fail"
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": _plain(config.echo()),
        "status": status,
        "diagnostic": diagnostic,
        "rungs": [],
        "results": {},
        "verdicts": {},
        "matrices": {},
        "exploratory": False,
        "environment": environment(),
        "timestamp": {"started": started, "seconds": seconds},
    }
    if result is not None:
        report.update(rungs=_plain(result.rungs), results=_plain(result.results), verdicts=_plain(result.verdicts),
                      matrices={key: matrix_to_pairs(np.asarray(mat)) for key, mat in result.matrices.items()},
                      exploratory=result.exploratory)
        report.update({key: _plain(val) for key, val in result.attachments.items()})
    return report


def check_report(report: dict) -> list[str]:
    """Re-evaluate every verdict from its stored value and tolerance; returns the failing names."""
    if report.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {report.get('schema_version')!r}")
    if report.get("status") == "error":
        return ["precondition"]
    failing = []
    for name, verdict in report["verdicts"].items():
        value = float(verdict["value"])  # non-finite values are stored as strings
        recomputed = compare(value, float(verdict["tolerance"]), verdict["comparison"])
        if recomputed != verdict["passed"] or not recomputed:
            failing.append(name)
    return failing


def csv_rows(report: dict) -> list[dict]:
    rows = []
    name = report["scenario"]["name"]
    for row in report["rungs"]:
        real, imag = row["value"]
        oracle = row["oracle"]
        if oracle is None:
            rel = ""
        else:
            scale = abs(oracle) if oracle != 0 else 1.0
            rel = abs(complex(real, imag) - oracle) / scale
        rows.append({"scenario": name, "rung": row.get("label", row["rung"]), "value_re": real, "value_im": imag,
                     "oracle": "" if oracle is None else oracle, "rel_err": rel})
    return rows


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(csv_rows(report))
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: dict, out_dir, fmt: str = "both") -> list[Path]:
    out_dir = Path(out_dir)
    stem = report["scenario"]["name"]
    written = []
    if fmt in ("json", "both"):
        path = out_dir / f"{stem}.json"
        _atomic_write(path, json.dumps(report, indent=2, sort_keys=True) + "\n")
        written.append(path)
    if fmt in ("csv", "both"):
        path = out_dir / f"{stem}.csv"
        _atomic_write(path, to_csv(report))
        written.append(path)
    return written


def convergence_table(report: dict) -> str:
    """Table of a report's rungs; see :func:`format_convergence`."""
    rungs = report.get("rungs") or []
    return format_convergence([row["rung"] for row in rungs], [complex(*row["value"]) for row in rungs])


def format_convergence(params, values) -> str:
    """Fixed-width table: rung, value, ``|value - previous|`` and the ratio of successive differences."""
    params, values = list(params), [complex(val) for val in values]
    if not values:
        raise ValueError("convergence table needs at least one rung")
    if len(params) != len(values):
        raise ValueError("params and values differ in length")
    lines = [f"{'rung':>12}  {'value':>24}  {'|diff|':>12}  {'rate':>8}"]
    diffs = [None] + [abs(after - before) for before, after in zip(values, values[1:])]
    for index, (param, value) in enumerate(zip(params, values)):
        # imaginary parts at roundoff level are not shown
        if abs(value.imag) <= 1e-12 * abs(value):
            shown = f"{value.real:.10g}"
        else:
            shown = f"{value.real:.10g}{value.imag:+.3g}j"
        diff = "n/a" if diffs[index] is None else f"{diffs[index]:.4e}"
        if index >= 2 and diffs[index - 1]:
            rate = f"{diffs[index] / diffs[index - 1]:.4f}"
        else:
            rate = "n/a"
        lines.append(f"{param:>12.6g}  {shown:>24}  {diff:>12}  {rate:>8}")
    return "\n".join(lines) + "\n"
