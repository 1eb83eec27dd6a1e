# workflows/diagnose_workflow.py
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from core.errors import InvalidArgumentError, UndefinedVarianceError
from diagnostics.efficiency import (
    CHAIN_PARAMETERS,
    acf_table,
    efficiency_report,
    ergodic_means,
    gelman_rubin,
    read_chain_csv,
    write_report_csv,
)
from utils.instrument import timed_operation

logger = logging.getLogger(__name__)


def _present(frame: pd.DataFrame) -> List[str]:
    return [name for name in CHAIN_PARAMETERS if not frame[name].isna().all()]


def _label(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


@timed_operation
def run_diagnose_workflow(
    chain_files: Sequence[str],
    out: Optional[str] = None,
    max_lag: int = 50,
    cpu_seconds: Optional[float] = None,
    sampler: Optional[str] = None,
) -> Tuple[Dict[str, Any], List[str]]:
    """
    Diagnostics for one or more chain CSV files.

    Writes ``acf.csv`` (per file and parameter), ``report.csv`` (IAT/ESS/CES),
    ``ergodic.csv`` (running means) and, with two or more files, ``psrf.csv``.
    CPU time defaults to the sum of each file's ``seconds`` column.

    Returns:
        Summary facts and the list of files written
    """
    if not chain_files:
        raise InvalidArgumentError("diagnose needs at least one chain file")
    out = out or os.path.dirname(os.path.abspath(chain_files[0]))
    os.makedirs(out, exist_ok=True)

    frames = {path: read_chain_csv(path) for path in chain_files}
    logger.info(f"Read {len(frames)} chain file(s) with {sum(len(f) for f in frames.values())} rows")

    acf_parts, ergodic_parts, reports = [], [], []
    for path, frame in frames.items():
        label = _label(path)
        parameters = _present(frame)

        table = acf_table(frame, max_lag, parameters)
        table.insert(0, "chain", label)
        acf_parts.append(table)

        running = pd.DataFrame({"iter": frame["iter"].astype(int)})
        for name in parameters:
            running[name] = ergodic_means(frame[name].to_numpy())
        running.insert(0, "chain", label)
        ergodic_parts.append(running)

        seconds = cpu_seconds if cpu_seconds is not None else float(frame["seconds"].sum())
        for name in parameters:
            try:
                reports.append(efficiency_report(frame[name].to_numpy(), seconds,
                                                 sampler=sampler or label, parameter=name))
            except (InvalidArgumentError, UndefinedVarianceError) as e:
                logger.warning(f"{label}: no efficiency figures for {name}: {e}")

    paths = []
    acf_path = os.path.join(out, "acf.csv")
    pd.concat(acf_parts, ignore_index=True).to_csv(acf_path, index=False, float_format="%.6g")
    paths.append(acf_path)

    if reports:
        paths.append(write_report_csv(reports, os.path.join(out, "report.csv")))

    ergodic_path = os.path.join(out, "ergodic.csv")
    pd.concat(ergodic_parts, ignore_index=True).to_csv(ergodic_path, index=False, float_format="%.10g")
    paths.append(ergodic_path)

    summary: Dict[str, Any] = {"chains": len(frames), "reports": reports}
    if len(frames) >= 2:
        # chains of unequal length are compared on their common prefix
        size = min(len(f) for f in frames.values())
        shared = set.intersection(*(set(_present(f)) for f in frames.values()))
        rows = []
        for name in (p for p in CHAIN_PARAMETERS if p in shared):
            try:
                value = gelman_rubin([f[name].to_numpy()[:size] for f in frames.values()])
            except (InvalidArgumentError, UndefinedVarianceError) as e:
                logger.warning(f"No PSRF for {name}: {e}")
                continue
            rows.append({"parameter": name, "psrf": value})
            summary[f"psrf_{name}"] = value
        psrf_path = os.path.join(out, "psrf.csv")
        pd.DataFrame(rows, columns=["parameter", "psrf"]).to_csv(psrf_path, index=False, float_format="%.6g")
        paths.append(psrf_path)

    return summary, paths
