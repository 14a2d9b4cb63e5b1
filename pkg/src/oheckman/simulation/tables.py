"""Rendering of study results as CSV or markdown, and parsing CSV back."""

import csv
import io
import math
from collections.abc import Callable, Sequence

from ..config import get_settings
from ..errors import DataError
from .study import OHECKMAN, OLS, CellSummary, EstimateSummary, McStudyResult, Study

_FIELDS = ("mean", "sd", "coverage", "failed", "crossing")

_LABELS = {OLS: "OLS", OHECKMAN: "OH"}


def _label(name: str) -> str:
    if name in _LABELS:
        return _LABELS[name]
    if name.startswith("imputation_q"):
        return "Q" + name.removeprefix("imputation_q")
    return name


def _estimate_value(summary: EstimateSummary | None, field: str) -> float | None:
    if summary is None:
        return None
    value = {
        "mean": summary.mean,
        "sd": summary.sd,
        "coverage": summary.coverage,
        "failed": float(summary.n_failed),
        "crossing": summary.mean_crossing,
    }[field]
    return None if math.isnan(value) else value


def _used_fields(result: McStudyResult, name: str) -> list[str]:
    """Fields with a value in at least one cell, in fixed order."""
    used = []
    for field in _FIELDS:
        if any(_estimate_value(c.estimates.get(name), field) is not None for c in result.cells):
            used.append(field)
    return used or ["mean", "sd"]


Column = tuple[str, str, Callable[[CellSummary], float | None]]


def table_columns(result: McStudyResult, estimators: Sequence[str] | None = None) -> list[Column]:
    """(csv header, display header, getter) for every column, in table order."""
    names = list(estimators) if estimators is not None else list(result.estimators)
    columns: list[Column] = [
        ("rho", "ρ", lambda c: c.rho),
        ("alpha1", "α₁", lambda c: c.alpha1),
    ]
    for name in names:
        for field in _used_fields(result, name):
            display = {
                "mean": _label(name),
                "sd": "(SD)",
                "coverage": f"{_label(name)} coverage",
                "failed": f"{_label(name)} failed",
                "crossing": f"{_label(name)} crossing",
            }[field]
            columns.append(
                (
                    f"{name}_{field}",
                    display,
                    lambda c, n=name, f=field: _estimate_value(c.estimates.get(n), f),
                )
            )
    if OLS in names and OHECKMAN in names:
        columns.append(("diff_mean", "OLS−OH", lambda c: _finite(c.diff_mean)))
        columns.append(("diff_sd", "(SD)", lambda c: _finite(c.diff_sd)))
    columns.append(("flagged", "flagged", lambda c: 1.0 if c.flagged else 0.0))
    return columns


def _finite(value: float) -> float | None:
    return None if math.isnan(value) else value


def _format(value: float | None, digits: int | None) -> str:
    if value is None:
        return ""
    if digits is None:
        return repr(float(value))
    return f"{value:.{digits}g}"


def emit_table(
    result: McStudyResult,
    fmt: str = "csv",
    columns: Sequence[str] | None = None,
    digits: int | None = None,
) -> str:
    """Render ``result``; missing values are blank fields.

    CSV uses full precision unless ``digits`` is given and carries the study,
    seed and replication count so parse_table_csv can rebuild the result.
    Markdown defaults to the configured significant digits and puts
    standard deviations in parentheses. ``columns`` restricts the estimators.
    """
    spec = table_columns(result, columns)
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["study", "replications", "seed"] + [c[0] for c in spec])
        for cell in result.cells:
            row = [result.study.value, str(result.replications), str(result.seed)]
            row += [_format(getter(cell), digits) for _, _, getter in spec]
            writer.writerow(row)
        return buffer.getvalue()
    if fmt == "markdown":
        digits = get_settings().significant_digits if digits is None else digits
        lines = [
            "| " + " | ".join(c[1] for c in spec) + " |",
            "|" + "---|" * len(spec),
        ]
        for cell in result.cells:
            fields = []
            for key, _, getter in spec:
                text = _format(getter(cell), digits)
                if text and key.endswith("_sd"):
                    text = f"({text})"
                fields.append(text)
            lines.append("| " + " | ".join(fields) + " |")
        return "\n".join(lines) + "\n"
    raise DataError(f"unknown table format {fmt!r}")


def parse_table_csv(text: str) -> McStudyResult:
    """Rebuild a McStudyResult from emit_table's CSV output."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise DataError("table has no rows")
    header = list(rows[0].keys())
    names: list[str] = []
    for key in header:
        if key.endswith("_mean") and key != "diff_mean":
            names.append(key.removesuffix("_mean"))

    def number(row: dict[str, str], key: str) -> float:
        value = row.get(key, "")
        return float(value) if value not in ("", None) else float("nan")

    first = rows[0]
    result = McStudyResult(
        study=Study(first["study"]),
        replications=int(first["replications"]),
        seed=int(first["seed"]),
        estimators=names,
    )
    for row in rows:
        cell = CellSummary(
            rho=float(row["rho"]),
            alpha1=float(row["alpha1"]),
            replications=int(row["replications"]),
            diff_mean=number(row, "diff_mean"),
            diff_sd=number(row, "diff_sd"),
            flagged=number(row, "flagged") == 1.0,
        )
        for name in names:
            if row.get(f"{name}_mean", "") == "":
                continue
            failed = number(row, f"{name}_failed")
            n_failed = 0 if math.isnan(failed) else int(failed)
            cell.estimates[name] = EstimateSummary(
                estimator=name,
                mean=number(row, f"{name}_mean"),
                sd=number(row, f"{name}_sd"),
                coverage=number(row, f"{name}_coverage"),
                n_success=cell.replications - n_failed,
                n_failed=n_failed,
                mean_crossing=number(row, f"{name}_crossing"),
            )
        result.cells.append(cell)
    return result
