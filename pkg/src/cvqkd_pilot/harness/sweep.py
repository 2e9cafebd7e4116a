"""Parameter sweeps with incremental, resumable CSV output."""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Callable

from ..errors import ConfigurationError, SimulationError
from ..estimation import EstimationResult
from .config import RunConfig, SweepSpec

log = logging.getLogger(__name__)

__all__ = ["CSV_COLUMNS", "result_row", "failure_row", "run_sweep", "read_rows", "append_row"]

CSV_COLUMNS = (
    "axis_value",
    "v_mod",
    "t_ch",
    "v_en",
    "xi_a_msnu",
    "i_ab",
    "chi_be",
    "skr_bps",
    "skr_raw",
    "n_symbols",
    "n_copies",
    "status",
)


def result_row(axis_value, res: EstimationResult) -> dict:
    return {
        "axis_value": axis_value,
        "v_mod": res.v_mod,
        "t_ch": res.t_ch,
        "v_en": res.v_en,
        "xi_a_msnu": res.xi_a_msnu,
        "i_ab": res.i_ab,
        "chi_be": res.chi_be,
        "skr_bps": res.skr_bps,
        "skr_raw": res.skr_raw,
        "n_symbols": res.n_symbols_used,
        "n_copies": res.n_copies,
        "status": res.status,
    }


def failure_row(axis_value, exc: BaseException) -> dict:
    row = {c: math.nan for c in CSV_COLUMNS}
    row.update(axis_value=axis_value, n_symbols=0, n_copies=0, status=f"error:{type(exc).__name__}: {exc}")
    return row


def read_rows(path) -> list[dict]:
    """Rows of an existing sweep CSV as string dicts (empty if missing)."""
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        return []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigurationError(f"{path}: header does not match the sweep CSV columns")
        return list(reader)


def _same(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0)


def run_sweep(
    spec: SweepSpec,
    runner: Callable[[RunConfig], EstimationResult] | None = None,
    resume: bool = True,
) -> list[dict]:
    """One row per axis value, appended to ``spec.output_path`` as it completes.

    With ``resume``, values already present in the output file are skipped and
    their stored rows returned. A ``SimulationError`` at one point is recorded
    in the ``status`` column and the sweep moves on.
    """
    if runner is None:
        from .runner import run_single

        runner = run_single
    path = spec.output_path
    done: list[dict] = []
    if path is not None:
        path = Path(path)
        if resume:
            done = read_rows(path)
        elif path.exists():
            path.unlink()

    rows = []
    for value in spec.values:
        previous = next((r for r in done if _same(float(r["axis_value"]), float(value))), None)
        if previous is not None:
            log.info("skip %s=%s (already in %s)", spec.axis, value, path)
            rows.append(previous)
            continue
        try:
            row = result_row(value, runner(spec.config_for(value)))
        except SimulationError as exc:
            log.warning("%s=%s failed: %s", spec.axis, value, exc)
            row = failure_row(value, exc)
        rows.append(row)
        if path is not None:
            append_row(path, row)
    return rows


def append_row(path: Path, row: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            writer.writeheader()
        writer.writerow(row)
        fh.flush()
