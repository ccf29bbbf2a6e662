"""
Truncated formal power series in z1, z1bar, z2, z2bar.

A ``Series`` stores its coefficients as a dense complex tensor of shape
``(order + 1,) * 4``; entry ``[a, b, c, d]`` is the coefficient of
``z1^a z1bar^b z2^c z2bar^d``. Entries of total degree above ``order`` are
always zero. Instances are immutable: the tensor is flagged read-only and every
operation returns a new series.
"""

import logging
import numbers
from enum import IntEnum
from functools import lru_cache
from typing import Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from src.utils.errors import (
    IncompatibleShape,
    NonConjugatePoint,
    NonPositiveConstantTerm,
    NonUnitConstantTerm,
    NotReal,
    OrderExhausted,
    OrderMismatch,
)
from src.utils.settings import DEFAULT_TOLERANCES, Tolerances, max_order

logger = logging.getLogger(__name__)

Monomial = Tuple[int, int, int, int]
Scalar = Union[complex, float, int]

CONJ_AXES = (1, 0, 3, 2)
POINT_TOLERANCE = 1e-12


class Var(IntEnum):
    """The four series variables; the value is the tensor axis."""

    Z1 = 0
    Z1B = 1
    Z2 = 2
    Z2B = 3

    @property
    def label(self) -> str:
        return VAR_LABELS[self.value]

    @property
    def conjugate(self) -> "Var":
        return Var(CONJ_AXES[self.value])

    @classmethod
    def parse(cls, name: Union[str, "Var"]) -> "Var":
        if isinstance(name, Var):
            return name
        try:
            return cls(VAR_LABELS.index(name))
        except ValueError:
            raise ValueError(f"Unknown variable {name!r}; expected one of {VAR_LABELS}")


VAR_LABELS = ("z1", "z1b", "z2", "z2b")


def degree(monomial: Monomial) -> int:
    return sum(monomial)


def graded_lex_key(monomial: Monomial) -> Tuple[int, int, int, int, int]:
    """Sort key: total degree first, then the exponents (a, b, c, d) in order."""
    return (degree(monomial),) + tuple(monomial)


@lru_cache(maxsize=64)
def degree_grid(order: int) -> np.ndarray:
    """Total degree of every tensor slot for a series of the given order."""
    k = np.arange(order + 1)
    grid = (
        k[:, None, None, None]
        + k[None, :, None, None]
        + k[None, None, :, None]
        + k[None, None, None, :]
    )
    grid.setflags(write=False)
    return grid


@lru_cache(maxsize=64)
def monomials(order: int) -> Tuple[Monomial, ...]:
    """All monomials of degree <= order in graded lexicographic order."""
    slots = np.argwhere(degree_grid(order) <= order)
    return tuple(sorted((tuple(int(e) for e in row) for row in slots), key=graded_lex_key))


def _convolve(x: np.ndarray, y: np.ndarray, order: int) -> np.ndarray:
    """Truncated product of two coefficient tensors of the same order."""
    n = order + 1
    if np.count_nonzero(x) > np.count_nonzero(y):
        x, y = y, x
    out = np.zeros((n,) * 4, dtype=complex)
    for a, b, c, d in zip(*np.nonzero(x)):
        out[a:, b:, c:, d:] += x[a, b, c, d] * y[: n - a, : n - b, : n - c, : n - d]
    out[degree_grid(order) > order] = 0
    return out


class Series:
    """Immutable truncated power series; see the module docstring."""

    __slots__ = ("_coeffs", "_order")

    def __init__(
        self,
        coeffs: np.ndarray,
        order: int,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
    ):
        if order < 0:
            raise OrderMismatch(f"Series order must be nonnegative, got {order}")
        data = np.array(coeffs, dtype=complex)
        if data.shape != (order + 1,) * 4:
            raise IncompatibleShape(
                f"Coefficient tensor of shape {data.shape} does not match order {order}"
            )
        data[degree_grid(order) > order] = 0
        magnitudes = np.abs(data)
        peak = magnitudes.max() if magnitudes.size else 0.0
        data[magnitudes < tolerances.store * (1.0 + peak)] = 0
        data.setflags(write=False)
        self._coeffs = data
        self._order = order

    # ----------------------------------------------------------------- builders

    @classmethod
    def zero(cls, order: int) -> "Series":
        return cls(np.zeros((order + 1,) * 4, dtype=complex), order)

    @classmethod
    def constant(cls, value: Scalar, order: int) -> "Series":
        data = np.zeros((order + 1,) * 4, dtype=complex)
        data[0, 0, 0, 0] = value
        return cls(data, order)

    @classmethod
    def one(cls, order: int) -> "Series":
        return cls.constant(1.0, order)

    @classmethod
    def monomial(cls, exponents: Monomial, order: int, coeff: Scalar = 1.0) -> "Series":
        return cls.from_terms({tuple(exponents): coeff}, order)

    @classmethod
    def variable(cls, var: Union[str, Var], order: int) -> "Series":
        exps = [0, 0, 0, 0]
        exps[Var.parse(var)] = 1
        return cls.monomial(tuple(exps), order)

    @classmethod
    def from_terms(cls, terms: Mapping[Monomial, Scalar], order: int) -> "Series":
        """Build a series from a monomial map; terms above ``order`` are dropped."""
        data = np.zeros((order + 1,) * 4, dtype=complex)
        for exps, value in terms.items():
            if len(exps) != 4 or any(e < 0 for e in exps):
                raise IncompatibleShape(f"Invalid monomial exponents {exps}")
            if degree(exps) <= order:
                data[tuple(exps)] += value
        return cls(data, order)

    # --------------------------------------------------------------- accessors

    @property
    def order(self) -> int:
        return self._order

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def constant_term(self) -> complex:
        return complex(self._coeffs[0, 0, 0, 0])

    def coefficient(self, exponents: Monomial) -> complex:
        if degree(exponents) > self._order:
            raise OrderExhausted(
                f"Monomial {exponents} lies above the series order {self._order}"
            )
        return complex(self._coeffs[tuple(exponents)])

    def terms(self) -> Iterator[Tuple[Monomial, complex]]:
        """Nonzero terms in graded lexicographic order."""
        for exps in monomials(self._order):
            value = self._coeffs[exps]
            if value != 0:
                yield exps, complex(value)

    def nnz(self) -> int:
        return int(np.count_nonzero(self._coeffs))

    def max_abs(self) -> float:
        return float(np.abs(self._coeffs).max())

    def support(self) -> List[Monomial]:
        return [exps for exps, _ in self.terms()]

    def depends_on(self, var: Union[str, Var]) -> bool:
        axis = Var.parse(var)
        rest = np.take(self._coeffs, np.arange(1, self._order + 1), axis=axis)
        return bool(np.any(rest != 0))

    def z1_free_part(self) -> "Series":
        """The part of the series without z1 or z1bar."""
        data = np.zeros_like(self._coeffs)
        data[0, 0] = self._coeffs[0, 0]
        return Series(data, self._order)

    def homogeneous_part(self, d: int) -> "Series":
        data = np.where(degree_grid(self._order) == d, self._coeffs, 0)
        return Series(data, self._order)

    # ------------------------------------------------------------- truncation

    def truncate(self, order: int) -> "Series":
        if order > self._order:
            raise OrderMismatch(
                f"Cannot raise the order of a series from {self._order} to {order}"
            )
        if order == self._order:
            return self
        n = order + 1
        return Series(self._coeffs[:n, :n, :n, :n], order)

    def _aligned(self, other: "Series") -> Tuple[np.ndarray, np.ndarray, int]:
        order = min(self._order, other._order)
        return self.truncate(order)._coeffs, other.truncate(order)._coeffs, order

    def _coerce(self, other) -> Optional["Series"]:
        if isinstance(other, Series):
            return other
        if isinstance(other, numbers.Number):
            return Series.constant(complex(other), self._order)
        return None

    # -------------------------------------------------------------- ring ops

    def __add__(self, other) -> "Series":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        x, y, order = self._aligned(other)
        return Series(x + y, order)

    __radd__ = __add__

    def __neg__(self) -> "Series":
        return Series(-self._coeffs, self._order)

    def __sub__(self, other) -> "Series":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        x, y, order = self._aligned(other)
        return Series(x - y, order)

    def __rsub__(self, other) -> "Series":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other) -> "Series":
        if isinstance(other, numbers.Number):
            return Series(self._coeffs * complex(other), self._order)
        if not isinstance(other, Series):
            return NotImplemented
        x, y, order = self._aligned(other)
        return Series(_convolve(x, y, order), order)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Series":
        if isinstance(other, numbers.Number):
            if other == 0:
                raise ZeroDivisionError("Series division by zero scalar")
            return Series(self._coeffs / complex(other), self._order)
        if isinstance(other, Series):
            return self * other.invert()
        return NotImplemented

    def __pow__(self, exponent: int) -> "Series":
        if not isinstance(exponent, numbers.Integral) or exponent < 0:
            raise ValueError(f"Series power needs a nonnegative integer, got {exponent!r}")
        result = Series.one(self._order)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def shift(self, exponents: Monomial) -> "Series":
        """Multiply by a monomial; the order grows by its degree."""
        shift = degree(exponents)
        order = self._order + shift
        n = self._order + 1
        data = np.zeros((order + 1,) * 4, dtype=complex)
        a, b, c, d = exponents
        data[a : a + n, b : b + n, c : c + n, d : d + n] = self._coeffs
        return Series(data, order)

    # ---------------------------------------------------- division and roots

    def invert(self, tolerances: Tolerances = DEFAULT_TOLERANCES) -> "Series":
        """Multiplicative inverse, solved degree by degree."""
        a0 = self.constant_term
        if abs(a0) <= tolerances.div:
            raise NonUnitConstantTerm(
                f"Cannot invert a series with constant term {a0:.3g} "
                f"(|a0| <= {tolerances.div:g})"
            )
        order = self._order
        layers = degree_grid(order)
        rest = self._coeffs.copy()
        rest[0, 0, 0, 0] = 0
        inverse = np.zeros_like(rest)
        inverse[0, 0, 0, 0] = 1.0 / a0
        for d in range(1, order + 1):
            layer = layers == d
            inverse[layer] = -_convolve(rest, inverse, order)[layer] / a0
        return Series(inverse, order)

    def sqrt(self, tolerances: Tolerances = DEFAULT_TOLERANCES) -> "Series":
        """Square root whose constant term is the principal root of a0."""
        a0 = self.constant_term
        if abs(a0) <= tolerances.div:
            raise NonUnitConstantTerm(
                f"Cannot take the square root of a series with constant term {a0:.3g}"
            )
        order = self._order
        layers = degree_grid(order)
        s0 = complex(np.sqrt(a0))
        root = np.zeros_like(self._coeffs)
        for d in range(1, order + 1):
            layer = layers == d
            cross = _convolve(root, root, order)[layer]
            root[layer] = (self._coeffs[layer] - cross) / (2.0 * s0)
        root[0, 0, 0, 0] = s0
        return Series(root, order)

    def sqrt_real(self, tolerances: Tolerances = DEFAULT_TOLERANCES) -> "Series":
        a0 = self.constant_term
        if abs(a0.imag) > tolerances.cmp * (1.0 + abs(a0)) or a0.real <= tolerances.div:
            raise NonPositiveConstantTerm(
                f"sqrt_real needs a positive real constant term, got {a0:.3g}"
            )
        if not self.check_real(tolerances):
            raise NotReal("sqrt_real needs a real series")
        return self.sqrt(tolerances)

    # ----------------------------------------------------------- involution

    def conj(self) -> "Series":
        return Series(np.conj(self._coeffs.transpose(CONJ_AXES)), self._order)

    def check_real(self, tolerances: Tolerances = DEFAULT_TOLERANCES) -> bool:
        return self.approx_equal(self.conj(), tolerances=tolerances)

    # ------------------------------------------------------------- calculus

    def diff(self, var: Union[str, Var]) -> "Series":
        """Formal partial derivative; the order drops by one."""
        if self._order == 0:
            raise OrderExhausted("Cannot differentiate a series of order 0")
        axis = Var.parse(var)
        n = self._order
        k = np.arange(1, n + 1)
        shape = [1, 1, 1, 1]
        shape[axis] = n
        taken = np.take(self._coeffs, k, axis=axis) * k.reshape(shape)
        return Series(taken[:n, :n, :n, :n], n - 1)

    def antidiff(self, var: Union[str, Var]) -> "Series":
        """
        Term-by-term antiderivative with zero constant of integration.

        The order grows by one, capped at ``max_order()``.
        """
        axis = Var.parse(var)
        n = self._order + 1
        k = np.arange(1, n + 1)
        shape = [1, 1, 1, 1]
        shape[axis] = n
        data = np.zeros((n + 1,) * 4, dtype=complex)
        target = [slice(0, n)] * 4
        target[axis] = slice(1, n + 1)
        data[tuple(target)] = self._coeffs / k.reshape(shape)
        result = Series(data, n)
        cap = max_order()
        if n > cap:
            logger.debug(f"Antiderivative order {n} capped at {cap}")
            result = result.truncate(max(cap, self._order))
        return result

    def euler(self) -> "Series":
        """Apply the degree operator: each coefficient times its total degree."""
        return Series(self._coeffs * degree_grid(self._order), self._order)

    # ----------------------------------------------------------- evaluation

    def eval(self, point: Tuple[complex, complex, complex, complex]) -> complex:
        """Horner evaluation at (z1, z1bar, z2, z2bar) with conjugate entries."""
        z1, z1b, z2, z2b = (complex(v) for v in point)
        if (
            abs(z1b - z1.conjugate()) > POINT_TOLERANCE
            or abs(z2b - z2.conjugate()) > POINT_TOLERANCE
        ):
            raise NonConjugatePoint(
                f"Point {point} is not of the form (z1, conj z1, z2, conj z2)"
            )
        value = self._coeffs
        for x in (z1, z1b, z2, z2b):
            value = npoly.polyval(x, value, tensor=False)
        return complex(value)

    def evaluate(self, z1, z2) -> np.ndarray:
        """Vectorised evaluation on arrays of (z1, z2); conjugates are implied."""
        z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=complex), np.asarray(z2, dtype=complex))
        k = np.arange(self._order + 1)
        p1 = z1[..., None] ** k
        p2 = z2[..., None] ** k
        return np.einsum(
            "abcd,...a,...b,...c,...d->...",
            self._coeffs,
            p1,
            np.conj(p1),
            p2,
            np.conj(p2),
            optimize=True,
        )

    # ----------------------------------------------------------- comparison

    def approx_equal(
        self,
        other: "Series",
        order: Optional[int] = None,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
    ) -> bool:
        """Coefficient-wise agreement within tol.cmp * (1 + max magnitude compared)."""
        common = min(self._order, other._order)
        if order is not None:
            common = min(common, order)
        x = self.truncate(common)._coeffs
        y = other.truncate(common)._coeffs
        scale = max(np.abs(x).max(), np.abs(y).max())
        return bool(np.abs(x - y).max() <= tolerances.cmp * (1.0 + scale))

    def is_zero(
        self, scale: float = 0.0, tolerances: Tolerances = DEFAULT_TOLERANCES
    ) -> bool:
        """
        True when every coefficient is negligible.

        Args:
            scale: Magnitude of the terms that cancelled to produce this series;
                the threshold is ``tol.cmp * (1 + max(scale, max_abs))``.
        """
        peak = self.max_abs()
        return peak <= tolerances.cmp * (1.0 + max(scale, peak))

    def __repr__(self) -> str:
        shown = []
        for exps, value in self.terms():
            shown.append(f"({value.real:.6g}{value.imag:+.6g}j)*{_format_monomial(exps)}")
            if len(shown) == 6:
                shown.append("...")
                break
        body = " + ".join(shown) if shown else "0"
        return f"Series(order={self._order}, nnz={self.nnz()}: {body})"


def _format_monomial(exps: Monomial) -> str:
    parts = [f"{VAR_LABELS[i]}^{e}" for i, e in enumerate(exps) if e]
    return "*".join(parts) if parts else "1"


# --- log / exp / real powers ----------------------------------------------


def log_series(a: Series, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Series:
    """
    Logarithm via the degree operator: E(log a) = E(a) / a.

    The constant term is the principal logarithm of a(0).
    """
    a0 = a.constant_term
    if abs(a0) <= tolerances.div:
        raise NonUnitConstantTerm(f"Cannot take the logarithm of constant term {a0:.3g}")
    ratio = (a.euler() * a.invert(tolerances)).coeffs
    layers = degree_grid(a.order)
    data = np.zeros_like(ratio)
    positive = layers > 0
    data[positive] = ratio[positive] / layers[positive]
    data[0, 0, 0, 0] = np.log(a0)
    return Series(data, a.order)


def exp_series(a: Series) -> Series:
    """Exponential solved degree by degree from E(exp a) = exp(a) * E(a)."""
    order = a.order
    layers = degree_grid(order)
    slope = a.euler().coeffs
    data = np.zeros_like(slope)
    data[0, 0, 0, 0] = 1.0
    for d in range(1, order + 1):
        layer = layers == d
        data[layer] = _convolve(slope, data, order)[layer] / d
    return Series(data, order) * complex(np.exp(a.constant_term))


def power_real(
    a: Series, exponent: float, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> Series:
    """a**exponent for a real series with positive constant term."""
    a0 = a.constant_term
    if a0.real <= tolerances.div or abs(a0.imag) > tolerances.cmp * (1.0 + abs(a0)):
        raise NonPositiveConstantTerm(
            f"Real powers need a positive constant term, got {a0:.3g}"
        )
    if not a.check_real(tolerances):
        raise NotReal("Real powers need a real series")
    return exp_series(log_series(a, tolerances) * float(exponent))


def sqrt_real(a: Series, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Series:
    return a.sqrt_real(tolerances)


def invert(a: Series, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Series:
    return a.invert(tolerances)


def conj(a: Series) -> Series:
    return a.conj()


def diff(a: Series, var: Union[str, Var]) -> Series:
    return a.diff(var)


def antidiff(a: Series, var: Union[str, Var]) -> Series:
    return a.antidiff(var)


def check_real(a: Series, tolerances: Tolerances = DEFAULT_TOLERANCES) -> bool:
    return a.check_real(tolerances)


def ring_ops(a: Series, b: Series, op: str) -> Series:
    """Dispatch for the three ring operations by name."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"Unknown ring operation {op!r}")


def z2_block(a: Series) -> np.ndarray:
    """Coefficient matrix [c, d] of a series that depends on z2, z2bar only."""
    if a.depends_on(Var.Z1) or a.depends_on(Var.Z1B):
        raise IncompatibleShape("Expected a series in z2 and z2bar only")
    return np.array(a.coeffs[0, 0])


def from_z2_block(block: np.ndarray, order: int) -> Series:
    data = np.zeros((order + 1,) * 4, dtype=complex)
    n = min(block.shape[0], order + 1)
    data[0, 0, :n, :n] = block[:n, :n]
    return Series(data, order)


def describe(series: Dict[str, Series]) -> str:
    """One-line summary of several series for log messages."""
    return ", ".join(
        f"{name}: order {s.order}, nnz {s.nnz()}, max {s.max_abs():.3g}"
        for name, s in series.items()
    )
