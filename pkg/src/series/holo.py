import logging
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from src.series.core import Series
from src.utils.errors import OrderExhausted, OrderMismatch

logger = logging.getLogger(__name__)


class HoloSeries:
    """
    Truncated power series in z2 alone (holomorphic data such as rho or a seed).

    Holomorphic inputs are polynomial data: coefficients above ``order`` are
    taken to be zero, so ``to_series`` may embed at a higher order than the
    one the data was declared with.
    """

    __slots__ = ("_coeffs", "_order")

    def __init__(self, coeffs: Sequence[complex], order: Optional[int] = None):
        data = np.array(coeffs, dtype=complex).reshape(-1)
        if order is None:
            order = max(len(data) - 1, 0)
        if order < 0:
            raise OrderMismatch(f"HoloSeries order must be nonnegative, got {order}")
        padded = np.zeros(order + 1, dtype=complex)
        keep = min(len(data), order + 1)
        padded[:keep] = data[:keep]
        padded.setflags(write=False)
        self._coeffs = padded
        self._order = order

    @classmethod
    def from_terms(cls, terms: Iterable[Tuple[int, complex]], order: int) -> "HoloSeries":
        data = np.zeros(order + 1, dtype=complex)
        for exponent, value in terms:
            if exponent < 0:
                raise OrderMismatch(f"Negative exponent {exponent} in holomorphic data")
            if exponent <= order:
                data[exponent] += value
        return cls(data, order)

    @classmethod
    def zero(cls, order: int = 0) -> "HoloSeries":
        return cls(np.zeros(order + 1), order)

    @property
    def order(self) -> int:
        return self._order

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def constant_term(self) -> complex:
        return complex(self._coeffs[0])

    def coefficient(self, exponent: int) -> complex:
        if exponent > self._order:
            return 0j
        return complex(self._coeffs[exponent])

    def terms(self):
        for exponent, value in enumerate(self._coeffs):
            if value != 0:
                yield exponent, complex(value)

    def derivative(self) -> "HoloSeries":
        if self._order == 0:
            raise OrderExhausted("Cannot differentiate a HoloSeries of order 0")
        return HoloSeries(npoly.polyder(self._coeffs), self._order - 1)

    def evaluate(self, z) -> np.ndarray:
        return npoly.polyval(np.asarray(z, dtype=complex), self._coeffs)

    def to_series(self, order: Optional[int] = None) -> Series:
        """Embed as a series in the variable z2."""
        if order is None:
            order = self._order
        data = np.zeros((order + 1,) * 4, dtype=complex)
        keep = min(self._order, order) + 1
        data[0, 0, :keep, 0] = self._coeffs[:keep]
        return Series(data, order)

    def __repr__(self) -> str:
        return f"HoloSeries(order={self._order}, coeffs={np.round(self._coeffs, 6).tolist()})"
