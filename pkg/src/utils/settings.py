import os
import logging
from dataclasses import dataclass, asdict, replace
from typing import Dict, Optional

logger = logging.getLogger(__name__)

DEFAULT_MAX_ORDER = 24
MAX_ORDER_ENV = "CRFLAT_MAX_ORDER"


@dataclass(frozen=True)
class Tolerances:
    """
    Numerical thresholds used throughout the package.

    Attributes:
        cmp: Relative comparison tolerance; two coefficient sets agree when
            their difference is below ``cmp * (1 + max magnitude compared)``.
        div: Smallest constant term accepted for division, square roots and
            the 2-nondegeneracy test.
        store: Relative threshold below which coefficients are dropped from
            the canonical form of a series.
    """

    cmp: float = 1e-9
    div: float = 1e-12
    store: float = 1e-15

    def with_overrides(
        self, cmp: Optional[float] = None, div: Optional[float] = None
    ) -> "Tolerances":
        changes = {}
        if cmp is not None:
            changes["cmp"] = cmp
        if div is not None:
            changes["div"] = div
        return replace(self, **changes)

    def as_dict(self) -> Dict[str, float]:
        return {f"tol_{key}": value for key, value in asdict(self).items()}


DEFAULT_TOLERANCES = Tolerances()


def max_order() -> int:
    """Global cap on truncation orders, read from the environment on each call."""
    raw = os.environ.get(MAX_ORDER_ENV)
    if raw is None:
        return DEFAULT_MAX_ORDER
    try:
        value = int(raw)
    except ValueError:
        logger.warning(
            f"Ignoring non-integer {MAX_ORDER_ENV}={raw!r}; "
            f"using {DEFAULT_MAX_ORDER}"
        )
        return DEFAULT_MAX_ORDER
    return max(value, 0)
