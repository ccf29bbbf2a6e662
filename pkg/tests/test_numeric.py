import numpy as np
import pytest

from src.geometry.construct import liouville_metric
from src.series.core import Series, Var
from src.series.holo import HoloSeries
from src.utils.errors import (
    InvariantViolation,
    OrderExhausted,
    QuadratureDegenerate,
    RadiusTooLarge,
    ResolutionTooLow,
)
from src.xcheck.numeric import (
    PLANES,
    cauchy_pompeiu_check,
    cauchy_pompeiu_residuals,
    cauchy_pompeiu_verdict,
    eval_grid,
    fd_convergence,
    fd_residual,
    grid_points,
    polar_midpoint_grid,
    probe_points,
    wirtinger_stencil,
    write_grid_csv,
)

Z1Z1B = (1, 1, 0, 0)


@pytest.mark.unit
class TestGrid:
    def test_constant(self):
        sample = eval_grid(Series.constant(2.5, 3), 0.3, 8)
        assert sample.values.shape == (8, 8)
        assert np.allclose(sample.values, 2.5)

    def test_corner_value(self):
        sample = eval_grid(Series.monomial((0, 0, 1, 1), 4), 0.5, 9)
        assert sample.points[-1, 4] == pytest.approx(0.5)
        assert sample.values[-1, 4] == pytest.approx(0.25)

    def test_z1_plane(self):
        sample = eval_grid(Series.monomial(Z1Z1B, 4), 0.4, 8, plane="z1")
        assert np.allclose(sample.values, np.abs(sample.points) ** 2)

    def test_real_series_has_real_values(self, small_model):
        sample = eval_grid(small_model.F, 0.3, 16, plane="z1")
        assert np.abs(sample.values.imag).max() <= 1e-14

    @pytest.mark.parametrize(
        "radius, n, error",
        [(0.6, 16, RadiusTooLarge), (0.0, 16, RadiusTooLarge), (0.3, 4, ResolutionTooLow)],
    )
    def test_rejects_bad_grids(self, radius, n, error):
        with pytest.raises(error):
            grid_points(radius, n)

    def test_planes(self):
        assert PLANES == ("z1", "z2")
        for plane in PLANES:
            assert eval_grid(Series.one(2), 0.3, 8, plane=plane).plane == plane

    def test_rejects_unknown_plane(self):
        with pytest.raises(ValueError):
            eval_grid(Series.one(2), 0.3, 8, plane="w")

    def test_csv(self, tmp_path):
        path = tmp_path / "grid.csv"
        write_grid_csv(eval_grid(Series.monomial((0, 0, 1, 1), 4), 0.3, 8), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,y,re,im"
        assert len(lines) == 65
        table = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.allclose(table[:, 2], table[:, 0] ** 2 + table[:, 1] ** 2)
        assert np.allclose(table[:, 3], 0.0)


@pytest.mark.unit
class TestFiniteDifferences:
    def test_first_derivative_stencil(self):
        stencil = wirtinger_stencil((0, 0, 1, 0), 0.1)
        assert stencil == {
            (0, 0, 1, 0): pytest.approx(2.5),
            (0, 0, -1, 0): pytest.approx(-2.5),
            (0, 0, 0, 1): pytest.approx(-2.5j),
            (0, 0, 0, -1): pytest.approx(2.5j),
        }

    def test_stencil_weights_annihilate_constants(self):
        stencil = wirtinger_stencil((1, 1, 0, 1), 0.05)
        assert abs(sum(stencil.values())) <= 1e-9

    def test_levi_form_of_quadric(self):
        F = Series.monomial(Z1Z1B, 4)
        assert fd_residual(F, (1, 1, 0, 0), plane="z1") <= 1e-8

    def test_model_germ(self, model_germ):
        assert fd_residual(model_germ.F, (1, 1, 0, 0), 0.3, 16) <= 1e-5
        assert fd_residual(model_germ.F, (2, 1, 0, 0), 0.3, 16) <= 1e-4

    def test_antiholomorphic_derivative(self):
        F = Series.monomial((0, 0, 2, 3), 8)
        assert fd_residual(F, (0, 0, 0, 1), 0.3, 16) <= 1e-3

    def test_convergence(self):
        F = (1 - Series.monomial((0, 0, 1, 1), 10)).invert()
        history = fd_convergence(F, (0, 0, 1, 1), ns=(8, 16))
        assert [n for n, _ in history] == [8, 16]
        assert history[0][1] / history[1][1] >= 3.0

    def test_too_short(self):
        with pytest.raises(OrderExhausted):
            fd_residual(Series.monomial(Z1Z1B, 3), (1, 1, 0, 0))

    def test_bad_multi_index(self):
        with pytest.raises(ValueError):
            fd_residual(Series.monomial(Z1Z1B, 6), (1, 1, 0))


@pytest.mark.unit
class TestCauchyPompeiu:
    def test_polar_grid_covers_the_disk(self):
        nodes, cell = polar_midpoint_grid(0.3, 32)
        assert nodes.shape == (32, 32)
        assert cell * nodes.size == pytest.approx(np.pi * 0.09)
        assert np.abs(nodes).max() < 0.3

    def test_probe_points(self):
        probes = probe_points(0.3)
        assert len(probes) == 8
        assert np.allclose(np.abs(probes), 0.15)

    def test_zero_solution(self):
        r = liouville_metric(HoloSeries([0, 1]), 8)
        assert cauchy_pompeiu_check(r, Series.zero(8), 0.3, 32) <= 1e-12

    def test_holomorphic_solution_of_flat_equation(self):
        # r = 0 leaves u holomorphic; only the boundary term survives
        u = HoloSeries([1, 0.5, -0.25j]).to_series(6)
        assert cauchy_pompeiu_check(Series.zero(6), u, 0.3, 32) <= 1e-10

    def test_pipeline_solution_converges(self, disk_pipeline):
        _, data = disk_pipeline
        coarse = cauchy_pompeiu_check(data.r, data.u, 0.3, 32)
        fine = cauchy_pompeiu_check(data.r, data.u, 0.3, 64)
        assert fine <= 5e-3
        assert coarse / fine >= 1.5

    def test_verdict(self, disk_pipeline):
        _, data = disk_pipeline
        verdict = cauchy_pompeiu_verdict(data.r, data.u)
        assert verdict["check"] == "cauchy-pompeiu"
        assert (verdict["radius"], verdict["n"]) == (0.3, 64)
        assert verdict["max_residual"] <= 5e-3

    def test_rejects_non_solution(self):
        with pytest.raises(InvariantViolation):
            cauchy_pompeiu_check(Series.constant(2.0, 6), Series.one(6), 0.3, 32)

    def test_resolution_too_low(self, disk_pipeline):
        _, data = disk_pipeline
        with pytest.raises(ResolutionTooLow):
            cauchy_pompeiu_check(data.r, data.u, 0.3, 16)

    def test_radius_too_large(self, disk_pipeline):
        _, data = disk_pipeline
        with pytest.raises(RadiusTooLarge):
            cauchy_pompeiu_check(data.r, data.u, 0.45, 64)

    def test_probes_near_boundary(self, disk_pipeline):
        _, data = disk_pipeline
        with pytest.raises(QuadratureDegenerate):
            cauchy_pompeiu_residuals(data.r, data.u, 0.3, 64, probe_fraction=0.99)


@pytest.mark.unit
def test_series_derivative_matches_grid_derivative(small_model):
    exact = small_model.F.diff(Var.Z1).diff(Var.Z1B)
    sample = eval_grid(exact, 0.2, 8)
    assert np.allclose(sample.values, 1.0 / (1.0 - np.abs(sample.points) ** 2), atol=1e-3)
