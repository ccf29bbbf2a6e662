"""
Self-test suite: certifies the model germ, random pipeline draws, and the
numerical oracles, collecting one named check per assertion.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from src.geometry.construct import (
    build_germ,
    mtilde0,
    pipeline_identities,
    sample_admissible,
)
from src.geometry.invariants import (
    HypersurfaceGerm,
    InvariantReport,
    Residual,
    RigidInvariants,
    compute_S,
    full_report,
)
from src.series.core import Series
from src.series.holo import HoloSeries
from src.utils.errors import CRFlatError
from src.utils.settings import DEFAULT_TOLERANCES, Tolerances
from src.utils.workers import run_tasks
from src.xcheck.numeric import cauchy_pompeiu_check, fd_residual

logger = logging.getLogger(__name__)

DEFAULT_SEED = 12345
DEFAULT_DRAWS = 5
REFERENCE_ORDER = 12
# the Monge residual of z1^2 z1bar^2 z2 z2bar starts in degree 9, certified from order 15
MONGE_SENSITIVITY_ORDER = 15

CERTIFIED_FLAGS = (
    "levi_rank_one",
    "two_nondegenerate",
    "s1111_holds",
    "specclass_holds",
    "monge_holds",
    "reality_ok",
    "cr_flat_candidate",
)
MODEL_RESIDUALS = ("ma", "monge", "s1", "s1b", "J", "W")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: Optional[float] = None
    limit: Optional[float] = None
    detail: str = ""

    def as_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"name": self.name, "passed": self.passed}
        if self.value is not None:
            payload["value"] = self.value
        if self.limit is not None:
            payload["limit"] = self.limit
        if self.detail:
            payload["detail"] = self.detail
        return payload


@dataclass
class SelftestResult:
    order: int
    draws: int
    seed: int
    tolerances: Tolerances
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def first_failure(self) -> Optional[str]:
        return next((check.name for check in self.checks if not check.passed), None)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "check": "selftest",
            "order": self.order,
            "draws": self.draws,
            "seed": self.seed,
            "passed": self.passed,
            "first_failure": self.first_failure,
            "checks": [check.as_dict() for check in self.checks],
            "tolerances": self.tolerances.as_dict(),
        }


def _below(name: str, value: Optional[float], limit: float) -> CheckResult:
    if value is None:
        return CheckResult(name, False, None, limit, "not computed")
    return CheckResult(name, bool(value <= limit), float(value), limit)


def _vanishing(name: str, residual: Residual, tolerances: Tolerances) -> CheckResult:
    value = residual.value.max_abs()
    limit = tolerances.cmp * (1.0 + max(residual.scale, value))
    return CheckResult(name, bool(value <= limit), value, limit)


def _flag_checks(prefix: str, report: InvariantReport, names) -> List[CheckResult]:
    checks = []
    for name in names:
        flag = report.flags.get(name)
        detail = "" if flag is None else f"certified at order {flag.certified_order}"
        checks.append(CheckResult(f"{prefix}.{name}", bool(flag and flag.value), detail=detail))
    return checks


class AcceptanceSuite:
    """
    Runs every acceptance check at a given order.

    The draw checks use ``order``; the reference checks (closed-form pipeline,
    quadrature, finite differences, sensitivity) run at the reference order 12
    where their thresholds are meaningful.
    """

    def __init__(
        self,
        order: int = REFERENCE_ORDER,
        draws: int = DEFAULT_DRAWS,
        seed: int = DEFAULT_SEED,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
        max_workers: Optional[int] = None,
    ):
        self.order = order
        self.draws = draws
        self.seed = seed
        self.tol = tolerances
        self.max_workers = max_workers

    def run(self) -> SelftestResult:
        result = SelftestResult(self.order, self.draws, self.seed, self.tol)
        stages = [
            ("model", self.check_model),
            ("draws", self.check_draws),
            ("closed_form", self.check_closed_form),
            ("cauchy_pompeiu", self.check_cauchy_pompeiu),
            ("sensitivity", self.check_sensitivity),
            ("degeneracy", self.check_degeneracy),
            ("fd", self.check_finite_differences),
        ]
        for stage, run in stages:
            logger.info(f"Selftest stage {stage}")
            try:
                result.checks.extend(run())
            except CRFlatError as e:
                logger.error(f"Selftest stage {stage} raised {type(e).__name__}: {e}")
                result.checks.append(
                    CheckResult(f"{stage}.completed", False, detail=f"{type(e).__name__}: {e}")
                )
        logger.info(
            f"Selftest {'passed' if result.passed else 'failed'}: "
            f"{sum(c.passed for c in result.checks)}/{len(result.checks)} checks"
        )
        return result

    # --- stages ----------------------------------------------------------

    def check_model(self) -> List[CheckResult]:
        report = full_report(mtilde0(self.order), self.tol, self.max_workers)
        checks = _flag_checks("model", report, CERTIFIED_FLAGS)
        magnitudes = report.max_residual_magnitudes()
        checks.extend(_below(f"model.{name}", magnitudes[name], 1e-9) for name in MODEL_RESIDUALS)
        s0_error = None if report.S0 is None else abs(report.S0 - 1.0)
        checks.append(_below("model.S0", s0_error, 1e-12))
        return checks

    def _check_draw(self, index: int, rho: HoloSeries, seed: HoloSeries) -> List[CheckResult]:
        prefix = f"draw{index}"
        germ, data = build_germ(rho, seed, self.order, self.tol)
        report = full_report(germ, self.tol, max_workers=1)
        checks = _flag_checks(prefix, report, CERTIFIED_FLAGS)
        identities = pipeline_identities(data, self.tol)
        for name in ("expanded_ma", "eqforuuu", "eqforvvv"):
            checks.append(_vanishing(f"{prefix}.{name}", identities[name], self.tol))
        checks.append(
            _vanishing(
                f"{prefix}.liouville_log",
                identities["liouville_log"],
                self.tol.with_overrides(cmp=1e-8),
            )
        )
        checks.append(
            _vanishing(f"{prefix}.dbar", identities["dbar"], self.tol.with_overrides(cmp=1e-12))
        )
        S = compute_S(germ)
        half_r = data.r * 0.5
        checks.append(
            _vanishing(
                f"{prefix}.S_equals_half_r", Residual(S - half_r, half_r.max_abs()), self.tol
            )
        )
        return checks

    def check_draws(self) -> List[CheckResult]:
        rng = np.random.default_rng(self.seed)
        inputs = [sample_admissible(rng) for _ in range(self.draws)]
        tasks = {
            f"draw{k}": (lambda k=k, pair=pair: self._check_draw(k, *pair))
            for k, pair in enumerate(inputs)
        }
        results = run_tasks(tasks, self.max_workers)
        return [check for checks in results.values() for check in checks]

    def check_closed_form(self) -> List[CheckResult]:
        germ, _ = build_germ(HoloSeries([0, 1]), HoloSeries.zero(), REFERENCE_ORDER, self.tol)
        difference = germ.F - 2.0 * mtilde0(REFERENCE_ORDER).F
        return [_below("closed_form.twice_model", difference.max_abs(), 1e-10)]

    def check_cauchy_pompeiu(self) -> List[CheckResult]:
        _, data = build_germ(HoloSeries([0, 1]), HoloSeries([1]), REFERENCE_ORDER, self.tol)
        fine = cauchy_pompeiu_check(data.r, data.u, 0.3, 64, self.tol)
        coarse = cauchy_pompeiu_check(data.r, data.u, 0.3, 32, self.tol)
        ratio = coarse / fine if fine > 0 else float("inf")
        return [
            _below("cauchy_pompeiu.n64", fine, 5e-3),
            CheckResult("cauchy_pompeiu.refinement", bool(ratio >= 1.5), float(ratio), 1.5),
        ]

    def check_sensitivity(self) -> List[CheckResult]:
        model = mtilde0(REFERENCE_ORDER).F
        bump = Series.monomial((2, 2, 0, 0), REFERENCE_ORDER, 1e-2)
        levi = full_report(HypersurfaceGerm(model + bump, self.tol), self.tol, self.max_workers)
        ma = levi.max_residual_magnitudes()["ma"]
        checks = [
            CheckResult("sensitivity.ma_detected", bool(ma is not None and ma >= 5e-3), ma, 5e-3),
            CheckResult("sensitivity.ma_not_flat", not levi.cr_flat_candidate),
        ]
        bump = Series.monomial((2, 2, 1, 1), REFERENCE_ORDER, 1e-2)
        flat = full_report(HypersurfaceGerm(model + bump, self.tol), self.tol, self.max_workers)
        magnitudes = flat.max_residual_magnitudes()
        # J is indeterminate here (S_1 vanishes at 0 but not identically), so the
        # Monge residual is re-evaluated at an order that keeps its degree-9 term
        deep = mtilde0(MONGE_SENSITIVITY_ORDER).F + Series.monomial(
            (2, 2, 1, 1), MONGE_SENSITIVITY_ORDER, 1e-2
        )
        monge = RigidInvariants(HypersurfaceGerm(deep, self.tol), self.tol).monge()
        detected = max(magnitudes["J"] or 0.0, magnitudes["monge"] or 0.0, monge.value.max_abs())
        logger.info(
            f"Sensitivity: J error {flat.errors.get('J')!r}, "
            f"order-{MONGE_SENSITIVITY_ORDER} Monge residual {monge.value.max_abs():.3g}"
        )
        checks.append(
            CheckResult("sensitivity.J_or_monge_detected", detected > 1e-6, detected, 1e-6)
        )
        checks.append(CheckResult("sensitivity.J_not_flat", not flat.cr_flat_candidate))
        return checks

    def check_degeneracy(self) -> List[CheckResult]:
        order = self.order
        z1z1b = Series.monomial((1, 1, 0, 0), order)
        z2z2b = Series.monomial((0, 0, 1, 1), order)
        degenerate = full_report(
            HypersurfaceGerm(z1z1b + z1z1b * z2z2b, self.tol), self.tol, self.max_workers
        )
        quadric = full_report(HypersurfaceGerm(z1z1b + z2z2b, self.tol), self.tol, self.max_workers)
        ma = quadric.max_residual_magnitudes()["ma"]
        return [
            CheckResult(
                "degeneracy.two_degenerate_detected",
                not degenerate.flags["two_nondegenerate"].value,
            ),
            CheckResult(
                "degeneracy.levi_rank_two_detected", not quadric.flags["levi_rank_one"].value
            ),
            CheckResult(
                "degeneracy.quadric_ma_is_one",
                bool(ma is not None and abs(ma - 1.0) <= 1e-12),
                ma,
                1.0,
            ),
        ]

    def check_finite_differences(self) -> List[CheckResult]:
        model = mtilde0(REFERENCE_ORDER).F
        return [
            _below("fd.d1_d1bar", fd_residual(model, (1, 1, 0, 0), 0.3, 16), 1e-5),
            _below("fd.d1_d1_d1bar", fd_residual(model, (2, 1, 0, 0), 0.3, 16), 1e-4),
        ]


def run_selftest(
    order: int = REFERENCE_ORDER,
    draws: int = DEFAULT_DRAWS,
    seed: int = DEFAULT_SEED,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    max_workers: Optional[int] = None,
) -> SelftestResult:
    return AcceptanceSuite(order, draws, seed, tolerances, max_workers).run()
