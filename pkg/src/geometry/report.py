import logging
from pathlib import Path
from typing import Any, Dict, Union

from src.geometry.invariants import InvariantReport
from src.series.codec import series_to_dict, write_json

logger = logging.getLogger(__name__)

REPORT_FORMAT = "crflat-report-v1"


def report_to_dict(report: InvariantReport, embed_series: bool = False) -> Dict[str, Any]:
    """Serialize a report; residual series are embedded only on request."""
    s0 = report.S0
    payload: Dict[str, Any] = {
        "format": REPORT_FORMAT,
        "order_in": report.order_in,
        "S0": None if s0 is None else {"re": float(s0.real), "im": float(s0.imag)},
        "J_branch": report.J_branch,
        "flags": {
            name: {"value": flag.value, "certified_order": flag.certified_order}
            for name, flag in report.flags.items()
        },
        "max_residual_magnitudes": report.max_residual_magnitudes(),
        "errors": dict(report.errors),
        "tolerances": report.tolerances.as_dict(),
    }
    if embed_series:
        named = dict(report.residual_series())
        named["S"] = report.S
        payload["series"] = {
            name: series_to_dict(series)
            for name, series in named.items()
            if series is not None
        }
    return payload


def write_report(
    path: Union[str, Path], report: InvariantReport, embed_series: bool = False
) -> None:
    write_json(path, report_to_dict(report, embed_series))
