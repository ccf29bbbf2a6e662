import logging

import numpy as np
import pytest

from src.geometry.construct import (
    RigidModelData,
    assemble_F,
    build_germ,
    compute_rev,
    extract_model_data,
    integrate_t,
    liouville_metric,
    liouville_residual,
    mtilde0,
    normalize_model_data,
    pipeline_identities,
    rescale_model_data,
    rescale_z1,
    sample_admissible,
    solve_dbar_u,
)
from src.geometry.invariants import HypersurfaceGerm, compute_S, full_report
from src.series.core import Series, Var
from src.series.holo import HoloSeries
from src.utils.errors import (
    IncompatibleShape,
    InvariantViolation,
    NotInModelForm,
    NotReal,
    OrderMismatch,
    RhoCritical,
    RhoNotInDisk,
    ZeroScale,
)
from src.utils.settings import Tolerances

Z2Z2B = (0, 0, 1, 1)


def geometric(order, scale=1.0):
    """1 / (1 - scale |z2|^2)."""
    return (1 - Series.monomial(Z2Z2B, order, scale)).invert()


@pytest.mark.unit
class TestLiouvilleMetric:
    def test_unit_disk_identity(self):
        r = liouville_metric(HoloSeries([0, 1]), 8)
        assert r.order == 8
        assert r.approx_equal(2.0 * geometric(8))
        assert liouville_residual(r).vanishes()

    def test_half_disk(self):
        r = liouville_metric(HoloSeries([0, 0.5]), 8)
        assert r.constant_term == pytest.approx(1.0)
        assert r.approx_equal(geometric(8, 0.25))

    def test_large_derivative_is_accepted(self):
        r = liouville_metric(HoloSeries([0, 2]), 6)
        assert r.constant_term == pytest.approx(4.0)

    def test_constant_rho_is_critical(self):
        with pytest.raises(RhoCritical):
            liouville_metric(HoloSeries([0.5]), 8)

    def test_rho_outside_disk(self):
        with pytest.raises(RhoNotInDisk):
            liouville_metric(HoloSeries([1.0, 1.0]), 8)


@pytest.mark.unit
class TestIntegrateT:
    def test_unit_disk(self):
        t = integrate_t(2.0 * geometric(8))
        assert t.order == 9
        assert t.approx_equal(Series.variable(Var.Z2B, 9) * geometric(9))

    def test_constant_metric(self):
        t = integrate_t(Series.constant(3.0, 4))
        assert list(t.terms()) == [((0, 0, 0, 1), pytest.approx(2.25))]

    def test_zero_metric(self):
        assert integrate_t(Series.zero(4)).nnz() == 0

    def test_rejects_z1_dependence(self):
        with pytest.raises(IncompatibleShape):
            integrate_t(1 + Series.monomial((1, 1, 0, 0), 4))

    def test_rejects_complex_metric(self):
        with pytest.raises(NotReal):
            integrate_t(1 + Series.variable(Var.Z2, 4))


@pytest.mark.unit
class TestSolveDbar:
    def test_constant_metric_by_hand(self):
        u = solve_dbar_u(Series.constant(2.0, 2), HoloSeries([1]))
        expected = Series.from_terms({(0, 0, 0, 0): 1.0, (0, 0, 0, 1): 1.0, Z2Z2B: 1.0}, 2)
        assert u.approx_equal(expected)

    def test_zero_seed(self):
        assert solve_dbar_u(2.0 * geometric(6), HoloSeries.zero(3)).nnz() == 0

    def test_seed_is_the_holomorphic_part(self):
        seed = HoloSeries([0.5j, 1.0, -0.25])
        u = solve_dbar_u(2.0 * geometric(6), seed)
        for c in range(3):
            assert u.coefficient((0, 0, c, 0)) == pytest.approx(seed.coefficient(c))

    def test_seed_longer_than_metric(self):
        with pytest.raises(OrderMismatch):
            solve_dbar_u(Series.constant(2.0, 2), HoloSeries([1, 0, 0, 1]))

    def test_resubstitution(self, random_pipeline):
        _, data = random_pipeline
        assert pipeline_identities(data)["dbar"].vanishes()


@pytest.mark.unit
class TestComputeRev:
    def test_constant_inputs(self):
        rev = compute_rev(Series.constant(2.0, 4), Series.one(4))
        assert list(rev.terms()) == [(Z2Z2B, pytest.approx(0.25))]

    def test_zero_u(self):
        assert compute_rev(2.0 * geometric(4), Series.zero(4)).nnz() == 0

    def test_reality(self, random_pipeline):
        _, data = random_pipeline
        assert data.rev.check_real()


@pytest.mark.unit
class TestAssemble:
    def test_direct_assembly(self):
        data = RigidModelData(
            r=Series.constant(2.0, 4),
            t=Series.variable(Var.Z2B, 5),
            u=Series.zero(4),
            rev=Series.zero(6),
        )
        F = assemble_F(data).F
        assert F.order == 5
        expected = Series.from_terms({(1, 1, 0, 0): 2.0, (2, 0, 0, 1): 1.0, (0, 2, 1, 0): 1.0}, 5)
        assert F.approx_equal(expected)

    def test_invalid_data(self):
        data = RigidModelData(
            r=Series.constant(2.0, 4),
            t=Series.zero(5),
            u=Series.zero(4),
            rev=Series.zero(6),
        )
        with pytest.raises(InvariantViolation):
            assemble_F(data)

    def test_validate_rejects_complex_rev(self, random_pipeline):
        _, data = random_pipeline
        broken = RigidModelData(data.r, data.t, data.u, data.rev + Series.variable(Var.Z2, 10))
        with pytest.raises(InvariantViolation):
            broken.validate()

    def test_pipeline_output_is_a_flat_germ(self, random_pipeline):
        germ, data = random_pipeline
        assert germ.order == 8
        assert germ.F.check_real()
        levi = germ.F.diff(Var.Z1).diff(Var.Z1B)
        assert levi.approx_equal(data.r)
        data.validate()

    def test_s_is_half_the_metric(self, random_pipeline):
        germ, data = random_pipeline
        assert compute_S(germ).approx_equal(data.r * 0.5)

    def test_pipeline_identities(self, random_pipeline):
        _, data = random_pipeline
        loose = Tolerances(cmp=1e-8)
        for name, residual in pipeline_identities(data).items():
            tol = loose if name == "liouville_log" else Tolerances()
            assert residual.vanishes(tol), f"{name} residual {residual.value.max_abs():.3g}"

    def test_pipeline_report(self, random_pipeline):
        germ, _ = random_pipeline
        report = full_report(germ, max_workers=1)
        assert report.cr_flat_candidate, report.errors
        assert report.J_branch == "reduced"

    def test_model_data_is_logged(self, caplog):
        with caplog.at_level(logging.DEBUG, logger="src.geometry.construct"):
            build_germ(HoloSeries([0, 1]), HoloSeries([1]), 6)
        summary = next(r.getMessage() for r in caplog.records if "Model data" in r.getMessage())
        assert all(f"{name}: order" in summary for name in ("r", "t", "u", "rev"))


@pytest.mark.unit
class TestModelGerm:
    def test_degree_four_expansion(self):
        F = mtilde0(4).F
        expected = Series.from_terms(
            {(1, 1, 0, 0): 1.0, (1, 1, 1, 1): 1.0, (2, 0, 0, 1): 0.5, (0, 2, 1, 0): 0.5}, 4
        )
        assert F.approx_equal(expected)
        assert F.nnz() == 4

    def test_order_two(self):
        assert mtilde0(2).F.support() == [(1, 1, 0, 0)]

    def test_order_one_rejected(self):
        with pytest.raises(OrderMismatch):
            mtilde0(1)

    @pytest.mark.parametrize("order", [2, 5, 9])
    def test_real(self, order):
        assert mtilde0(order).F.check_real()

    def test_closed_form_pipeline(self, model_germ):
        germ, _ = build_germ(HoloSeries([0, 1]), HoloSeries.zero(), 12)
        assert germ.order == 12
        assert np.abs((germ.F - 2.0 * model_germ.F).coeffs).max() <= 1e-10


@pytest.mark.unit
class TestNormalization:
    def test_model_rescaled_by_one_half(self):
        rescaled = rescale_z1(mtilde0(8), 0.5)
        assert rescaled.F.approx_equal(2.0 * mtilde0(8).F)
        data = extract_model_data(rescaled)
        assert data.residuals()["t_normalization"].vanishes()

    def test_quarter_is_a_fixed_point(self, random_pipeline):
        _, data = random_pipeline
        same = rescale_model_data(data, 0.25)
        for name in ("r", "t", "u", "rev"):
            assert getattr(same, name).approx_equal(getattr(data, name))

    def test_zero_scale(self, small_model):
        with pytest.raises(ZeroScale):
            rescale_z1(small_model, 0.0)

    def test_not_in_model_form(self):
        g = HypersurfaceGerm(mtilde0(6).F + Series.monomial((2, 2, 0, 0), 6, 0.1))
        with pytest.raises(NotInModelForm):
            extract_model_data(g)
        with pytest.raises(NotInModelForm):
            rescale_z1(g, 0.5)

    def test_extract_round_trip(self, random_pipeline):
        germ, data = random_pipeline
        extracted = extract_model_data(germ)
        assert extracted.r.approx_equal(data.r)
        assert extracted.u.approx_equal(data.u)
        assert extracted.rev.approx_equal(data.rev)

    def test_normalize_constant_scale(self, small_model):
        data = normalize_model_data(extract_model_data(small_model))
        assert data.residuals()["t_normalization"].vanishes()

    def test_normalize_antiholomorphic_scale(self):
        r = liouville_metric(HoloSeries([0, 1]), 8)
        w = 0.25 + 0.1 * Series.variable(Var.Z2B, 8)
        t = (w * r * r).antidiff(Var.Z2B)
        data = RigidModelData(r=r, t=t, u=Series.zero(8), rev=Series.zero(10))
        normalized = normalize_model_data(data)
        assert normalized.residuals()["t_normalization"].vanishes()
        assert normalized.r.check_real()

    def test_normalize_rejects_holomorphic_scale(self):
        r = liouville_metric(HoloSeries([0, 1]), 8)
        t = (Series.variable(Var.Z2, 8) * r * r + 0.25 * r * r).antidiff(Var.Z2B)
        data = RigidModelData(r=r, t=t, u=Series.zero(8), rev=Series.zero(10))
        with pytest.raises(InvariantViolation):
            normalize_model_data(data)


@pytest.mark.unit
class TestSampling:
    def test_admissible_bounds(self, rng):
        for _ in range(20):
            rho, seed = sample_admissible(rng)
            assert abs(rho.constant_term) <= 0.5
            assert 0.5 <= abs(rho.coefficient(1)) <= 1.0
            assert all(abs(rho.coefficient(k)) <= 0.3 for k in range(2, rho.order + 1))
            assert np.abs(seed.coeffs).max() <= 1.0

    def test_deterministic(self):
        first = sample_admissible(np.random.default_rng(7))
        second = sample_admissible(np.random.default_rng(7))
        assert np.array_equal(first[0].coeffs, second[0].coeffs)
        assert np.array_equal(first[1].coeffs, second[1].coeffs)


@pytest.mark.integration
class TestOrderBookkeeping:
    def test_higher_order_run_extends_lower_order_run(self):
        rng = np.random.default_rng(31)
        for _ in range(2):
            rho, seed = sample_admissible(rng)
            low_germ, low = build_germ(rho, seed, 8)
            high_germ, high = build_germ(rho, seed, 12)
            assert high_germ.F.approx_equal(low_germ.F, order=8)
            for name in ("r", "t", "u", "rev"):
                short, long = getattr(low, name), getattr(high, name)
                assert long.approx_equal(short, order=short.order), name
            low_S = compute_S(low_germ)
            assert compute_S(high_germ).approx_equal(low_S, order=low_S.order)
