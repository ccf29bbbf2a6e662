"""JSON codec for the crflat-series-v1 file format."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from src.series.core import VAR_LABELS, Series
from src.series.holo import HoloSeries
from src.utils.errors import FormatError

logger = logging.getLogger(__name__)

SERIES_FORMAT = "crflat-series-v1"


def _complex_entry(value: complex) -> Dict[str, float]:
    return {"re": float(value.real), "im": float(value.imag)}


def _parse_complex(entry: Dict[str, Any], where: str) -> complex:
    try:
        return complex(float(entry["re"]), float(entry.get("im", 0.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{where}: expected numeric 're'/'im' fields ({e})")


def series_to_dict(
    series: Series, provenance: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    payload: Dict[str, Any] = {
        "format": SERIES_FORMAT,
        "vars": list(VAR_LABELS),
        "order": series.order,
        "terms": [
            {"exp": list(exps), **_complex_entry(value)} for exps, value in series.terms()
        ],
    }
    if provenance:
        payload["provenance"] = dict(provenance)
    return payload


def series_from_dict(payload: Dict[str, Any]) -> Series:
    if not isinstance(payload, dict) or payload.get("format") != SERIES_FORMAT:
        raise FormatError(f"Not a {SERIES_FORMAT} document")
    if list(payload.get("vars", VAR_LABELS)) != list(VAR_LABELS):
        raise FormatError(f"Unsupported variable list {payload.get('vars')!r}")
    order = payload.get("order")
    if not isinstance(order, int) or isinstance(order, bool) or order < 0:
        raise FormatError(f"Invalid series order {order!r}")
    terms: Dict[tuple, complex] = {}
    for i, entry in enumerate(payload.get("terms", [])):
        exps = entry.get("exp") if isinstance(entry, dict) else None
        if (
            not isinstance(exps, list)
            or len(exps) != 4
            or not all(isinstance(e, int) and e >= 0 for e in exps)
        ):
            raise FormatError(f"terms[{i}]: invalid exponent list {exps!r}")
        if sum(exps) > order:
            raise FormatError(f"terms[{i}]: monomial {exps} exceeds order {order}")
        key = tuple(exps)
        terms[key] = terms.get(key, 0j) + _parse_complex(entry, f"terms[{i}]")
    return Series.from_terms(terms, order)


def holo_terms_from_list(entries: List[Dict[str, Any]], where: str) -> List[tuple]:
    """Parse ``[{"exp": c, "re": x, "im": y}, ...]`` lists of holomorphic data."""
    if not isinstance(entries, list):
        raise FormatError(f"{where}: expected a list of terms")
    parsed = []
    for i, entry in enumerate(entries):
        exponent = entry.get("exp") if isinstance(entry, dict) else None
        if not isinstance(exponent, int) or isinstance(exponent, bool) or exponent < 0:
            raise FormatError(f"{where}[{i}]: invalid exponent {exponent!r}")
        parsed.append((exponent, _parse_complex(entry, f"{where}[{i}]")))
    return parsed


def holo_to_list(series: HoloSeries) -> List[Dict[str, Any]]:
    return [{"exp": c, **_complex_entry(value)} for c, value in series.terms()]


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2) + "\n"


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})")


def write_json(path: Union[str, Path], payload: Dict[str, Any]) -> None:
    Path(path).write_text(dumps(payload), encoding="utf-8")
    logger.info(f"Wrote {payload.get('format', 'json')} to {path}")


def read_series(path: Union[str, Path]) -> Series:
    series = series_from_dict(read_json(path))
    logger.debug(f"Read series of order {series.order} with {series.nnz()} terms from {path}")
    return series


def write_series(
    path: Union[str, Path], series: Series, provenance: Optional[Dict[str, Any]] = None
) -> None:
    write_json(path, series_to_dict(series, provenance))
