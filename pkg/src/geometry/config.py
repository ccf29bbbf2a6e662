"""Construction configs (crflat-config-v1) and model-data sidecars (crflat-sidecar-v1)."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.geometry.construct import RigidModelData
from src.series.codec import (
    holo_terms_from_list,
    holo_to_list,
    read_json,
    series_from_dict,
    series_to_dict,
    write_json,
)
from src.series.holo import HoloSeries
from src.utils.errors import FormatError
from src.utils.settings import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

CONFIG_FORMAT = "crflat-config-v1"
SIDECAR_FORMAT = "crflat-sidecar-v1"
DEFAULT_ORDER = 12
SIDECAR_FIELDS = ("r", "t", "u", "rev")


def _holo_from_entries(entries: Any, where: str) -> HoloSeries:
    terms = holo_terms_from_list(entries, where)
    order = max((exponent for exponent, _ in terms), default=0)
    return HoloSeries.from_terms(terms, order)


@dataclass(frozen=True)
class ConstructionConfig:
    """Inputs of the construction pipeline: the disk map rho and the seed of u."""

    rho: HoloSeries
    u_seed: HoloSeries = field(default_factory=HoloSeries.zero)
    order: int = DEFAULT_ORDER

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ConstructionConfig":
        if not isinstance(payload, dict) or payload.get("format") != CONFIG_FORMAT:
            raise FormatError(f"Not a {CONFIG_FORMAT} document")
        order = payload.get("order", DEFAULT_ORDER)
        if not isinstance(order, int) or isinstance(order, bool):
            raise FormatError(f"Config order must be an integer, got {order!r}")
        if "rho" not in payload:
            raise FormatError("Config is missing the 'rho' term list")
        return cls(
            rho=_holo_from_entries(payload["rho"], "rho"),
            u_seed=_holo_from_entries(payload.get("u_seed", []), "u_seed"),
            order=order,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": CONFIG_FORMAT,
            "order": self.order,
            "rho": holo_to_list(self.rho),
            "u_seed": holo_to_list(self.u_seed),
        }


def load_config(path: Union[str, Path]) -> ConstructionConfig:
    config = ConstructionConfig.from_dict(read_json(path))
    logger.info(
        f"Loaded config from {path}: order {config.order}, "
        f"rho of degree {config.rho.order}, seed of degree {config.u_seed.order}"
    )
    return config


def sidecar_to_dict(
    data: RigidModelData,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    provenance: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    payload: Dict[str, Any] = {"format": SIDECAR_FORMAT}
    for name in SIDECAR_FIELDS:
        payload[name] = series_to_dict(getattr(data, name))
    payload["tolerances"] = tolerances.as_dict()
    if provenance:
        payload["provenance"] = dict(provenance)
    return payload


def sidecar_from_dict(payload: Dict[str, Any]) -> RigidModelData:
    if not isinstance(payload, dict) or payload.get("format") != SIDECAR_FORMAT:
        raise FormatError(f"Not a {SIDECAR_FORMAT} document")
    missing = [name for name in SIDECAR_FIELDS if name not in payload]
    if missing:
        raise FormatError(f"Sidecar is missing {', '.join(missing)}")
    return RigidModelData(**{name: series_from_dict(payload[name]) for name in SIDECAR_FIELDS})


def write_sidecar(
    path: Union[str, Path],
    data: RigidModelData,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    provenance: Optional[Dict[str, Any]] = None,
) -> None:
    write_json(path, sidecar_to_dict(data, tolerances, provenance))


def read_sidecar(path: Union[str, Path]) -> RigidModelData:
    return sidecar_from_dict(read_json(path))
