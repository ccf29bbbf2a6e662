"""
Rigid-case CR invariants of a germ Re z3 = F(z1, z1bar, z2, z2bar).

Subscripts follow the usual convention: F_{1 1bar} is the derivative of F in
z1 and z1bar, and so on. Every quantity is a truncated series whose order
records how far it is known exactly.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from src.series.core import Monomial, Series, Var, power_real
from src.utils.errors import (
    CRFlatError,
    IndeterminateTerm,
    InvalidGerm,
    OrderExhausted,
    TwoDegenerate,
)
from src.utils.settings import DEFAULT_TOLERANCES, Tolerances
from src.utils.workers import run_tasks

logger = logging.getLogger(__name__)

LEVI_TERM: Monomial = (1, 1, 0, 0)


@dataclass(frozen=True)
class HypersurfaceGerm:
    """Graphing function F of a rigid hypersurface germ, validated on creation."""

    F: Series
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES, compare=False)

    def __post_init__(self):
        tol = self.tolerances
        if self.F.order < 2:
            raise InvalidGerm(f"A germ needs order >= 2, got {self.F.order}")
        if not self.F.check_real(tol):
            raise InvalidGerm("F is not real-valued: conj(F) != F")
        if abs(self.F.constant_term) > tol.cmp * (1.0 + self.F.max_abs()):
            raise InvalidGerm(f"F(0) = {self.F.constant_term:.3g}, expected 0")
        levi = self.F.coefficient(LEVI_TERM)
        if levi.real <= tol.div or abs(levi.imag) > tol.cmp * (1.0 + abs(levi)):
            raise InvalidGerm(
                f"F_(1 1bar)(0) = {levi:.3g} must be real and positive"
            )

    @property
    def order(self) -> int:
        return self.F.order


@dataclass
class Residual:
    """A series that should vanish, with the magnitude of what cancelled in it."""

    value: Series
    scale: float

    def vanishes(self, tolerances: Tolerances = DEFAULT_TOLERANCES) -> bool:
        return self.value.is_zero(self.scale, tolerances)

    @property
    def order(self) -> int:
        return self.value.order


class _TermSum:
    def __init__(self):
        self.total: Optional[Series] = None
        self.scale = 0.0

    def add(self, term: Series, coeff: complex = 1.0) -> "_TermSum":
        term = term * coeff
        self.scale = max(self.scale, term.max_abs())
        self.total = term if self.total is None else self.total + term
        return self

    def result(self, order: int) -> Residual:
        return Residual(self.total.truncate(order), self.scale)


@dataclass(frozen=True)
class Flag:
    value: bool
    certified_order: int


@dataclass
class InvariantReport:
    order_in: int
    tolerances: Tolerances
    S: Optional[Series] = None
    S0: Optional[complex] = None
    J: Optional[Series] = None
    J_branch: Optional[str] = None
    W: Optional[Series] = None
    ma_residual: Optional[Series] = None
    monge_residual: Optional[Series] = None
    s1_residual: Optional[Series] = None
    s1b_residual: Optional[Series] = None
    specclass_residual: Optional[Series] = None
    monge_integrated_residual: Optional[Series] = None
    flags: Dict[str, Flag] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)

    @property
    def cr_flat_candidate(self) -> bool:
        flag = self.flags.get("cr_flat_candidate")
        return bool(flag and flag.value)

    def residual_series(self) -> Dict[str, Optional[Series]]:
        return {
            "ma": self.ma_residual,
            "monge": self.monge_residual,
            "s1": self.s1_residual,
            "s1b": self.s1b_residual,
            "J": self.J,
            "W": self.W,
            "specclass": self.specclass_residual,
            "monge_integrated": self.monge_integrated_residual,
        }

    def max_residual_magnitudes(self) -> Dict[str, Optional[float]]:
        return {
            name: (None if series is None else series.max_abs())
            for name, series in self.residual_series().items()
        }


class RigidInvariants:
    """
    Invariant calculator for one germ.

    Partial derivatives of F and the series S are computed once and shared
    between the individual invariants, so a single instance can serve every
    entry of a full report (also from several threads).
    """

    def __init__(self, germ: HypersurfaceGerm, tolerances: Optional[Tolerances] = None):
        self.germ = germ
        self.tol = tolerances or germ.tolerances
        self._cache: Dict[Tuple, Series] = {}
        self._lock = threading.Lock()

    # ------------------------------------------------------------- plumbing

    def _memo(self, key: Tuple, build: Callable[[], Series]) -> Series:
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        value = build()
        with self._lock:
            return self._cache.setdefault(key, value)

    def _require(self, minimum: int, what: str) -> None:
        if self.germ.order < minimum:
            raise OrderExhausted(
                f"{what} needs a germ of order >= {minimum}, got {self.germ.order}"
            )

    def partial(self, a: int = 0, b: int = 0, c: int = 0, d: int = 0) -> Series:
        """F differentiated a times in z1, b in z1bar, c in z2, d in z2bar."""
        index = (a, b, c, d)
        if index == (0, 0, 0, 0):
            return self.germ.F

        def build() -> Series:
            axis = next(i for i in range(3, -1, -1) if index[i] > 0)
            parent = list(index)
            parent[axis] -= 1
            return self.partial(*parent).diff(Var(axis))

        return self._memo(("F",) + index, build)

    def inverse_levi(self) -> Series:
        return self._memo(("inv_F11b",), lambda: self.partial(1, 1).invert(self.tol))

    def S(self) -> Series:
        """S = (F_{1 2bar} / F_{1 1bar})_1."""
        self._require(3, "S")
        return self._memo(
            ("S",), lambda: (self.partial(1, 0, 0, 1) * self.inverse_levi()).diff(Var.Z1)
        )

    def S_derivative(self, *vars: Var) -> Series:
        key = ("S",) + tuple(int(v) for v in vars)
        if not vars:
            return self.S()
        return self._memo(key, lambda: self.S_derivative(*vars[:-1]).diff(vars[-1]))

    def S_bar_derivative(self, *vars: Var) -> Series:
        key = ("Sbar",) + tuple(int(v) for v in vars)
        if not vars:
            return self._memo(key, lambda: self.S().conj())
        return self._memo(key, lambda: self.S_bar_derivative(*vars[:-1]).diff(vars[-1]))

    def S0(self) -> complex:
        return self.S().constant_term

    def _require_two_nondegenerate(self) -> Series:
        S = self.S()
        if abs(S.constant_term) <= self.tol.div:
            raise TwoDegenerate(
                f"|S(0)| = {abs(S.constant_term):.3g} <= {self.tol.div:g}: "
                "the germ is 2-degenerate at the origin"
            )
        return S

    def log_levi_derivative(self) -> Series:
        """A = F_{1 1 1bar} / F_{1 1bar}."""
        return self._memo(("A",), lambda: self.partial(2, 1) * self.inverse_levi())

    # ------------------------------------------------------------ residuals

    def ma(self) -> Residual:
        """Complex Monge-Ampere determinant F_{1 1bar} F_{2 2bar} - F_{1 2bar} F_{2 1bar}."""
        self._require(2, "Monge-Ampere residual")
        first = self.partial(1, 1) * self.partial(0, 0, 1, 1)
        second = self.partial(1, 0, 0, 1) * self.partial(0, 1, 1, 0)
        return Residual(first - second, max(first.max_abs(), second.max_abs()))

    def monge(self) -> Residual:
        """Residual of the complex Monge equation in F_{k 1bar}, k = 1..4.

        9 F_{1111 1bar} F_{1 1bar}^2 - 45 F_{111 1bar} F_{11 1bar} F_{1 1bar} + 40 F_{11 1bar}^3
        """
        self._require(6, "complex Monge residual")
        f11, f21, f31, f41 = (self.partial(k, 1) for k in (1, 2, 3, 4))
        terms = _TermSum()
        terms.add(f41 * f11 * f11, 9.0)
        terms.add(f31 * f21 * f11, -45.0)
        terms.add(f21 * f21 * f21, 40.0)
        return terms.result(self.germ.order - 6)

    def s1111(self) -> Tuple[Residual, Residual]:
        self._require(4, "S_1, S_1bar")
        scale = self.S().max_abs()
        return (
            Residual(self.S_derivative(Var.Z1), scale),
            Residual(self.S_derivative(Var.Z1B), scale),
        )

    def specclass(self) -> Residual:
        """F_{1 1bar} minus its z1-independent part."""
        f11 = self.partial(1, 1)
        return Residual(f11 - f11.z1_free_part(), f11.max_abs())

    def monge_integrated(self) -> Residual:
        """
        Part of F_{1 1bar}^(-2/3) beyond bidegree (2, 2) in (z1, z1bar).

        F solves the complex Monge equation exactly when this part vanishes.
        """
        self._require(2, "integrated Monge residual")
        powered = power_real(self.partial(1, 1), -2.0 / 3.0, self.tol)
        data = np.array(powered.coeffs)
        data[:3, :3] = 0
        return Residual(Series(data, powered.order), powered.max_abs())

    def reality_ok(self) -> bool:
        """F_{2 1bar} is computed independently and must equal conj(F_{1 2bar})."""
        return self.partial(0, 1, 1, 0).approx_equal(
            self.partial(1, 0, 0, 1).conj(), tolerances=self.tol
        )

    # ------------------------------------------------------------- J and W

    def reduced_J(self) -> Residual:
        """J under S_1 = S_1bar = 0: (1/3) A A_1 - (2/27) A^3 - (1/6) A_11."""
        self._require(6, "J")
        A = self.log_levi_derivative()
        A1 = A.diff(Var.Z1)
        A11 = A1.diff(Var.Z1)
        terms = _TermSum()
        terms.add(A * A1, 1.0 / 3.0)
        terms.add(A * A * A, -2.0 / 27.0)
        terms.add(A11, -1.0 / 6.0)
        return terms.result(self.germ.order - 6)

    def full_J(self) -> Residual:
        self._require(6, "J")
        S = self._require_two_nondegenerate()
        S1 = self.S_derivative(Var.Z1)
        S11 = self.S_derivative(Var.Z1, Var.Z1)
        S111 = self.S_derivative(Var.Z1, Var.Z1, Var.Z1)
        inv_S = S.invert(self.tol)
        inv_S1 = S1.invert(self.tol)
        A = self.log_levi_derivative()
        A1 = A.diff(Var.Z1)
        A11 = A1.diff(Var.Z1)
        q = S1 * inv_S

        terms = _TermSum()
        terms.add(q * q * A, 5.0 / 18.0)
        terms.add(A * A1, 1.0 / 3.0)
        terms.add(q * A * A, -1.0 / 9.0)
        terms.add(q * q * q, 20.0 / 27.0)
        terms.add(q * S11 * inv_S, -5.0 / 6.0)
        terms.add(q * A1, 1.0 / 6.0)
        terms.add(S11 * inv_S * A, -1.0 / 6.0)
        terms.add(A * A * A, -2.0 / 27.0)
        terms.add(A11, -1.0 / 6.0)
        terms.add(S111 * inv_S1)
        return terms.result(self.germ.order - 6)

    def J(self) -> Tuple[Residual, str]:
        """
        Invariant J together with the branch used ("reduced" or "full").

        S_1 identically zero selects the reduced expression; an invertible S_1
        selects the full one. Anything in between has no series meaning.
        """
        self._require(6, "J")
        S = self._require_two_nondegenerate()
        S1 = self.S_derivative(Var.Z1)
        if S1.is_zero(S.max_abs(), self.tol):
            return self.reduced_J(), "reduced"
        if abs(S1.constant_term) > self.tol.div:
            return self.full_J(), "full"
        raise IndeterminateTerm(
            f"S_1 has constant term {abs(S1.constant_term):.3g} but coefficients up to "
            f"{S1.max_abs():.3g}; the S_111/S_1 term is undefined as a series"
        )

    def W(self) -> Residual:
        self._require(5, "W")
        S = self._require_two_nondegenerate()
        Sb = self.S_bar_derivative()
        Sb_1 = self.S_bar_derivative(Var.Z1)
        Sb_1b = self.S_bar_derivative(Var.Z1B)
        Sb_2 = self.S_bar_derivative(Var.Z2)
        Sb_11b = self.S_bar_derivative(Var.Z1, Var.Z1B)
        Sb_21b = self.S_bar_derivative(Var.Z2, Var.Z1B)
        inv_Sb = Sb.invert(self.tol)
        inv_S = S.invert(self.tol)
        B = self.partial(0, 1, 1, 0) * self.inverse_levi()

        terms = _TermSum()
        terms.add(Sb_1 * inv_Sb, 2.0 / 3.0)
        terms.add(self.S_derivative(Var.Z1) * inv_S, 2.0 / 3.0)
        terms.add(Sb_1b * inv_Sb * inv_Sb * inv_Sb * (B * Sb_1 - Sb_2), 1.0 / 3.0)
        terms.add(inv_Sb * inv_Sb * (B * Sb_11b - Sb_21b), -1.0 / 3.0)
        return terms.result(self.germ.order - 5)


# --- operations ------------------------------------------------------------


def levi_coefficient(g: HypersurfaceGerm) -> Series:
    """F_{1 1bar}; the germ constructor already checked its value at 0."""
    return RigidInvariants(g).partial(1, 1)


def ma_residual(g: HypersurfaceGerm) -> Series:
    return RigidInvariants(g).ma().value


def compute_S(g: HypersurfaceGerm) -> Series:
    return RigidInvariants(g).S()


def compute_J(g: HypersurfaceGerm) -> Series:
    residual, _ = RigidInvariants(g).J()
    return residual.value


def compute_W(g: HypersurfaceGerm) -> Series:
    return RigidInvariants(g).W().value


def monge_residual(g: HypersurfaceGerm) -> Series:
    return RigidInvariants(g).monge().value


def monge_integrated_residual(g: HypersurfaceGerm) -> Series:
    return RigidInvariants(g).monge_integrated().value


def s1111_residuals(g: HypersurfaceGerm) -> Tuple[Series, Series]:
    s1, s1b = RigidInvariants(g).s1111()
    return s1.value, s1b.value


def full_report(
    g: HypersurfaceGerm,
    tolerances: Optional[Tolerances] = None,
    max_workers: Optional[int] = None,
) -> InvariantReport:
    """
    Compute every invariant and residual of a germ and certify the flags.

    A failing computation leaves its field as None and records the error
    message under ``errors`` instead of aborting the report.
    """
    tol = tolerances or g.tolerances
    calc = RigidInvariants(g, tol)
    report = InvariantReport(order_in=g.order, tolerances=tol)
    logger.info(f"Computing invariant report for a germ of order {g.order}")

    def guarded(name: str, task: Callable):
        def run():
            try:
                return task()
            except CRFlatError as e:
                logger.warning(f"{name}: {type(e).__name__}: {e}")
                return e

        return run

    # S is shared by J, W and the S_1 residuals; compute it before fanning out.
    S = guarded("S", calc.S)()
    results = run_tasks(
        {
            "ma": guarded("ma", calc.ma),
            "monge": guarded("monge", calc.monge),
            "s1111": guarded("s1111", calc.s1111),
            "specclass": guarded("specclass", calc.specclass),
            "monge_integrated": guarded("monge_integrated", calc.monge_integrated),
            "J": guarded("J", calc.J),
            "W": guarded("W", calc.W),
            "reality": guarded("reality", calc.reality_ok),
        },
        max_workers=max_workers,
    )
    if isinstance(S, Exception):
        report.errors["S"] = f"{type(S).__name__}: {S}"
    else:
        report.S = S
        report.S0 = S.constant_term
    for name, value in results.items():
        if isinstance(value, Exception):
            report.errors[name] = f"{type(value).__name__}: {value}"

    def ok(name: str):
        value = results[name]
        return None if isinstance(value, Exception) else value

    ma, monge, specclass = ok("ma"), ok("monge"), ok("specclass")
    s1111, integrated, J, W = ok("s1111"), ok("monge_integrated"), ok("J"), ok("W")
    if ma is not None:
        report.ma_residual = ma.value
    if monge is not None:
        report.monge_residual = monge.value
    if specclass is not None:
        report.specclass_residual = specclass.value
    if integrated is not None:
        report.monge_integrated_residual = integrated.value
    if s1111 is not None:
        report.s1_residual, report.s1b_residual = s1111[0].value, s1111[1].value
    if J is not None:
        report.J, report.J_branch = J[0].value, J[1]
    if W is not None:
        report.W = W.value

    levi = ma is not None and ma.vanishes(tol)
    nondegenerate = report.S0 is not None and abs(report.S0) > tol.div
    j_zero = J is not None and J[0].vanishes(tol)
    w_zero = W is not None and W.vanishes(tol)
    flat_order = g.order - 6

    report.flags = {
        "levi_rank_one": Flag(levi, g.order - 2),
        "two_nondegenerate": Flag(nondegenerate, max(g.order - 3, 0)),
        "s1111_holds": Flag(
            s1111 is not None and s1111[0].vanishes(tol) and s1111[1].vanishes(tol),
            g.order - 4,
        ),
        "specclass_holds": Flag(specclass is not None and specclass.vanishes(tol), g.order - 2),
        "monge_holds": Flag(monge is not None and monge.vanishes(tol), g.order - 6),
        "reality_ok": Flag(results["reality"] is True, g.order - 2),
        "cr_flat_candidate": Flag(
            levi and nondegenerate and j_zero and w_zero, flat_order
        ),
    }
    summary = ", ".join(
        f"{name}={flag.value}@{flag.certified_order}" for name, flag in report.flags.items()
    )
    logger.info(f"Flags: {summary}")
    return report
