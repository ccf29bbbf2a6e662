import pytest

from src.geometry.construct import mtilde0, rescale_z1
from src.geometry.invariants import (
    HypersurfaceGerm,
    RigidInvariants,
    compute_J,
    compute_S,
    compute_W,
    full_report,
    levi_coefficient,
    ma_residual,
    monge_integrated_residual,
    monge_residual,
    s1111_residuals,
)
from src.series.core import Series, Var, power_real
from src.utils.errors import IndeterminateTerm, InvalidGerm, OrderExhausted


def germ_from_terms(terms, order):
    return HypersurfaceGerm(Series.from_terms(terms, order))


def full_j_germ(order=8):
    """F = |z1|^2 + z1^2 z2bar + z1bar^2 z2 + z1^3 z2bar + z1bar^3 z2, with S = 2 + 6 z1."""
    return germ_from_terms(
        {
            (1, 1, 0, 0): 1.0,
            (2, 0, 0, 1): 1.0,
            (0, 2, 1, 0): 1.0,
            (3, 0, 0, 1): 1.0,
            (0, 3, 1, 0): 1.0,
        },
        order,
    )


def monge_germ(order=10):
    """F with F_(1 1bar) = (1 + |z1|^2)^(-3/2), a solution of the complex Monge equation."""
    levi = power_real(1 + Series.monomial((1, 1, 0, 0), order - 2), -1.5)
    return HypersurfaceGerm(levi.antidiff(Var.Z1).antidiff(Var.Z1B))


def z1_square_germ(h, order=8):
    """F = |z1|^2 + z1^2 h(z2bar) + z1bar^2 conj(h)(z2) for h = sum h[k] z2bar^(k+1)."""
    terms = {(1, 1, 0, 0): 1.0}
    for k, coeff in enumerate(h, start=1):
        terms[(2, 0, 0, k)] = coeff
        terms[(0, 2, k, 0)] = complex(coeff).conjugate()
    return germ_from_terms(terms, order)


Z1_SQUARE_FAMILY = [(1.0,), (0.5 + 0.5j, 0.3), (2.0j, -0.4, 0.1 + 0.2j)]


@pytest.mark.unit
class TestHypersurfaceGerm:
    @pytest.mark.parametrize(
        "terms, order",
        [
            ({(1, 1, 0, 0): 1.0}, 1),
            ({(1, 1, 0, 0): 1.0, (1, 0, 0, 0): 1.0}, 4),
            ({(0, 0, 0, 0): 1.0, (1, 1, 0, 0): 1.0}, 4),
            ({(1, 1, 0, 0): -1.0}, 4),
            ({(0, 0, 1, 1): 1.0}, 4),
        ],
        ids=["order-too-low", "not-real", "nonzero-at-origin", "negative-levi", "zero-levi"],
    )
    def test_invalid_germs(self, terms, order):
        with pytest.raises(InvalidGerm):
            germ_from_terms(terms, order)

    def test_order(self):
        assert mtilde0(6).order == 6

    def test_levi_coefficient(self, small_model):
        levi = levi_coefficient(small_model)
        assert levi.order == 6
        assert levi.constant_term == 1.0
        assert levi.coefficient((0, 0, 1, 1)) == pytest.approx(1.0)
        assert not levi.depends_on(Var.Z1)


@pytest.mark.unit
class TestResiduals:
    def test_quadric_has_unit_ma_residual(self):
        ma = ma_residual(germ_from_terms({(1, 1, 0, 0): 1.0, (0, 0, 1, 1): 1.0}, 6))
        assert list(ma.terms()) == [((0, 0, 0, 0), 1.0)]

    def test_model_ma_residual_vanishes(self, small_model):
        assert ma_residual(small_model).max_abs() <= 1e-12

    def test_model_s(self, small_model):
        S = compute_S(small_model)
        assert S.constant_term == pytest.approx(1.0)
        assert S.order == small_model.order - 3

    def test_monge_solution(self):
        g = monge_germ()
        residual = monge_residual(g)
        assert residual.order == 4
        assert residual.max_abs() <= 1e-9
        assert RigidInvariants(g).monge_integrated().vanishes()

    def test_monge_violation(self):
        g = germ_from_terms({(1, 1, 0, 0): 1.0, (3, 1, 0, 0): 1.0, (1, 3, 0, 0): 1.0}, 8)
        residual = monge_residual(g)
        assert abs(residual.coefficient((1, 0, 0, 0))) == pytest.approx(1620.0)
        assert not RigidInvariants(g).monge_integrated().vanishes()
        assert monge_integrated_residual(g).max_abs() > 1e-3

    def test_s1111_residuals(self, small_model):
        s1, s1b = s1111_residuals(small_model)
        assert s1.max_abs() <= 1e-12 and s1b.max_abs() <= 1e-12

    def test_specclass_detects_z1_dependence(self):
        g = germ_from_terms({(1, 1, 0, 0): 1.0, (2, 2, 0, 0): 1.0}, 6)
        assert not RigidInvariants(g).specclass().vanishes()

    def test_reality_cross_check(self, small_model):
        assert RigidInvariants(small_model).reality_ok()

    def test_order_exhausted(self):
        with pytest.raises(OrderExhausted):
            compute_S(germ_from_terms({(1, 1, 0, 0): 1.0}, 2))


@pytest.mark.unit
class TestJAndW:
    def test_model_uses_reduced_branch(self, small_model):
        calc = RigidInvariants(small_model)
        J, branch = calc.J()
        assert branch == "reduced"
        assert J.value.approx_equal(calc.reduced_J().value)
        assert J.vanishes()

    def test_invertible_s1_uses_full_branch(self):
        g = full_j_germ()
        J, branch = RigidInvariants(g).J()
        assert branch == "full"
        assert J.order == g.order - 6
        assert compute_S(g).coefficient((1, 0, 0, 0)) == pytest.approx(6.0)

    def test_w_of_full_branch_germ(self):
        W = compute_W(full_j_germ())
        assert W.order == 3
        assert W.constant_term == pytest.approx(2.0)
        assert W.coefficient((1, 0, 0, 0)) == pytest.approx(-6.0)

    def test_model_w_vanishes(self, small_model):
        assert compute_W(small_model).max_abs() <= 1e-9

    def test_indeterminate_j(self):
        g = germ_from_terms(
            {
                (1, 1, 0, 0): 1.0,
                (2, 0, 0, 1): 1.0,
                (0, 2, 1, 0): 1.0,
                (2, 2, 1, 0): 1.0,
                (2, 2, 0, 1): 1.0,
            },
            8,
        )
        with pytest.raises(IndeterminateTerm):
            compute_J(g)


@pytest.mark.unit
class TestImplications:
    @pytest.mark.parametrize("h", Z1_SQUARE_FAMILY)
    def test_s1111_implies_w_vanishes(self, h):
        g = z1_square_germ(h)
        assert compute_S(g).constant_term == pytest.approx(2 * h[0])
        s1, s1b = s1111_residuals(g)
        assert s1.max_abs() <= 1e-12 and s1b.max_abs() <= 1e-12
        assert compute_W(g).max_abs() <= 1e-9
        # not Levi degenerate, so W = 0 does not come from flatness
        assert not RigidInvariants(g).ma().vanishes()

    def test_s1111_implies_w_vanishes_after_rescaling(self, small_model):
        g = rescale_z1(small_model, 0.5 + 0.5j)
        s1, s1b = s1111_residuals(g)
        assert s1.max_abs() <= 1e-12 and s1b.max_abs() <= 1e-12
        assert compute_W(g).max_abs() <= 1e-9

    @pytest.mark.parametrize("h", Z1_SQUARE_FAMILY)
    def test_monge_and_s1111_imply_j_vanishes(self, h):
        calc = RigidInvariants(z1_square_germ(h))
        assert calc.monge().vanishes()
        J, branch = calc.J()
        assert branch == "reduced"
        assert J.vanishes()

    def test_monge_and_s1111_imply_j_vanishes_after_rescaling(self, small_model):
        calc = RigidInvariants(rescale_z1(small_model, 2.0 - 1.0j))
        assert calc.monge().vanishes()
        assert all(residual.vanishes() for residual in calc.s1111())
        J, branch = calc.J()
        assert branch == "reduced"
        assert J.vanishes()

    @pytest.mark.parametrize("order, expected", [(12, 0.0), (15, 2.56e-3)])
    def test_degree_nine_monge_term_needs_order_fifteen(self, order, expected):
        F = mtilde0(order).F + Series.monomial((2, 2, 1, 1), order, 1e-2)
        residual = monge_residual(HypersurfaceGerm(F))
        assert residual.order == order - 6
        assert residual.max_abs() == pytest.approx(expected, abs=1e-15)
        if order == 15:
            assert residual.coefficient((0, 3, 3, 3)) == pytest.approx(2.56e-3)


class TestFullReport:
    @pytest.mark.unit
    def test_model_is_flat(self, small_model):
        report = full_report(small_model, max_workers=1)
        assert report.cr_flat_candidate
        assert all(flag.value for flag in report.flags.values()), report.flags
        assert report.J_branch == "reduced"
        assert report.errors == {}
        assert report.flags["levi_rank_one"].certified_order == 6
        assert report.flags["cr_flat_candidate"].certified_order == 2

    @pytest.mark.unit
    def test_two_degenerate_germ(self):
        g = germ_from_terms({(1, 1, 0, 0): 1.0, (1, 1, 1, 1): 1.0}, 8)
        report = full_report(g, max_workers=1)
        assert not report.flags["two_nondegenerate"].value
        assert not report.cr_flat_candidate
        assert "TwoDegenerate" in report.errors["J"]
        assert report.J is None

    @pytest.mark.unit
    def test_quadric_is_not_levi_degenerate(self):
        g = germ_from_terms({(1, 1, 0, 0): 1.0, (0, 0, 1, 1): 1.0}, 6)
        report = full_report(g, max_workers=1)
        assert not report.flags["levi_rank_one"].value
        assert report.max_residual_magnitudes()["ma"] == 1.0

    @pytest.mark.unit
    def test_short_germ_records_errors(self):
        report = full_report(germ_from_terms({(1, 1, 0, 0): 1.0, (2, 0, 0, 1): 1.0, (0, 2, 1, 0): 1.0}, 4))
        assert "OrderExhausted" in report.errors["J"]
        assert "OrderExhausted" in report.errors["monge"]
        assert not report.cr_flat_candidate

    @pytest.mark.unit
    def test_indeterminate_j_is_reported(self):
        g = germ_from_terms(
            {
                (1, 1, 0, 0): 1.0,
                (2, 0, 0, 1): 1.0,
                (0, 2, 1, 0): 1.0,
                (2, 2, 1, 0): 1.0,
                (2, 2, 0, 1): 1.0,
            },
            8,
        )
        report = full_report(g, max_workers=1)
        assert not report.flags["s1111_holds"].value
        assert "IndeterminateTerm" in report.errors["J"]

    @pytest.mark.unit
    @pytest.mark.parametrize("scale", [0.5, 3.0])
    def test_flags_survive_rigid_scaling(self, small_model, random_pipeline, scale):
        for germ in (small_model, random_pipeline[0], full_j_germ()):
            scaled = HypersurfaceGerm(germ.F * scale)
            expected = full_report(germ, max_workers=1)
            report = full_report(scaled, max_workers=1)
            assert report.flags == expected.flags
            assert report.S0 == pytest.approx(expected.S0)

    @pytest.mark.unit
    def test_threaded_report_matches_serial(self, small_model):
        serial = full_report(small_model, max_workers=1)
        threaded = full_report(small_model, max_workers=4)
        assert serial.flags == threaded.flags
        assert serial.max_residual_magnitudes() == threaded.max_residual_magnitudes()

    @pytest.mark.slow
    def test_model_at_reference_order(self, model_germ):
        report = full_report(model_germ)
        assert report.cr_flat_candidate
        assert report.S0 == pytest.approx(1.0, abs=1e-12)
        for name, magnitude in report.max_residual_magnitudes().items():
            assert magnitude is not None and magnitude <= 1e-9, f"{name}: {magnitude}"
        assert report.J.order == 6
        assert report.W.order == 7

    @pytest.mark.slow
    def test_sensitivity(self, model_germ):
        bumped = HypersurfaceGerm(model_germ.F + Series.monomial((2, 2, 0, 0), 12, 1e-2))
        report = full_report(bumped)
        assert report.max_residual_magnitudes()["ma"] >= 5e-3
        assert not report.cr_flat_candidate

        bumped = HypersurfaceGerm(model_germ.F + Series.monomial((2, 2, 1, 1), 12, 1e-2))
        report = full_report(bumped)
        assert "IndeterminateTerm" in report.errors["J"]
        assert not report.cr_flat_candidate

        deep = HypersurfaceGerm(mtilde0(15).F + Series.monomial((2, 2, 1, 1), 15, 1e-2))
        assert monge_residual(deep).max_abs() > 1e-6
