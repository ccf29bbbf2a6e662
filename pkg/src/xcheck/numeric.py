"""
Numerical cross-checks of the series engine: grid evaluation, central finite
differences for Wirtinger derivatives, and a disk quadrature of the
Cauchy-Pompeiu representation of the dbar solution.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from src.series.core import Series, Var
from src.utils.errors import (
    InvariantViolation,
    OrderExhausted,
    QuadratureDegenerate,
    RadiusTooLarge,
    ResolutionTooLow,
)
from src.utils.settings import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

GRID_MAX_RADIUS = 0.5
GRID_MIN_N = 8
CP_MAX_RADIUS = 0.4
CP_MIN_N = 32
CP_PROBES = 8
PLANES = ("z1", "z2")

Stencil = Dict[Tuple[int, int, int, int], complex]

# real axes (x1, y1, x2, y2) of each variable, and the sign of the i d/dy term
_WIRTINGER = {
    Var.Z1: (0, 1, -1.0),
    Var.Z1B: (0, 1, 1.0),
    Var.Z2: (2, 3, -1.0),
    Var.Z2B: (2, 3, 1.0),
}


@dataclass(frozen=True)
class GridSample:
    """Values of a series on an n x n grid of a disk-sized square."""

    radius: float
    n: int
    plane: str
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        _check_grid(self.radius, self.n)
        if self.plane not in PLANES:
            raise ValueError(f"Unknown plane {self.plane!r}; expected one of {PLANES}")


def _check_grid(radius: float, n: int) -> None:
    if not 0 < radius <= GRID_MAX_RADIUS:
        raise RadiusTooLarge(f"Grid radius {radius} must lie in (0, {GRID_MAX_RADIUS}]")
    if n < GRID_MIN_N:
        raise ResolutionTooLow(f"Grid resolution {n} is below the minimum {GRID_MIN_N}")


def grid_points(radius: float, n: int) -> np.ndarray:
    _check_grid(radius, n)
    axis = np.linspace(-radius, radius, n)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    return x + 1j * y


def _place(points: np.ndarray, plane: str) -> Tuple[np.ndarray, np.ndarray]:
    zeros = np.zeros_like(points)
    return (points, zeros) if plane == "z1" else (zeros, points)


def eval_grid(F: Series, radius: float, n: int, plane: str = "z2") -> GridSample:
    """Evaluate F on the grid of one complex plane, the other variable at 0."""
    points = grid_points(radius, n)
    z1, z2 = _place(points, plane)
    return GridSample(radius=radius, n=n, plane=plane, points=points, values=F.evaluate(z1, z2))


def write_grid_csv(sample: GridSample, path: Union[str, Path]) -> None:
    """One row per node: x, y, re, im."""
    rows = np.column_stack(
        [
            sample.points.real.ravel(),
            sample.points.imag.ravel(),
            sample.values.real.ravel(),
            sample.values.imag.ravel(),
        ]
    )
    np.savetxt(path, rows, delimiter=",", header="x,y,re,im", comments="", fmt="%.17g")
    logger.info(f"Wrote {rows.shape[0]} grid nodes to {path}")


def wirtinger_stencil(deriv: Sequence[int], h: float) -> Stencil:
    """
    Compose central differences into a stencil for d^deriv, using
    d/dz = (d/dx - i d/dy) / 2 and d/dzbar = (d/dx + i d/dy) / 2.

    Keys are offsets in units of h along (x1, y1, x2, y2).
    """
    stencil: Stencil = {(0, 0, 0, 0): 1.0 + 0j}
    for var, count in zip(Var, deriv):
        x_axis, y_axis, sign = _WIRTINGER[var]
        for _ in range(count):
            composed: Stencil = {}
            for offset, weight in stencil.items():
                for axis, factor in ((x_axis, 0.5), (y_axis, 0.5j * sign)):
                    for step in (1, -1):
                        moved = list(offset)
                        moved[axis] += step
                        key = tuple(moved)
                        composed[key] = composed.get(key, 0j) + weight * factor * step / (2.0 * h)
            stencil = {k: w for k, w in composed.items() if w != 0}
    return stencil


def _derivative(F: Series, deriv: Sequence[int]) -> Series:
    result = F
    for var, count in zip(Var, deriv):
        for _ in range(count):
            result = result.diff(var)
    return result


def fd_residual(
    F: Series,
    deriv: Sequence[int],
    radius: float = 0.3,
    n: int = 16,
    plane: str = "z2",
) -> float:
    """Max over grid nodes of |series derivative - finite-difference derivative|."""
    deriv = tuple(int(k) for k in deriv)
    if len(deriv) != 4 or min(deriv) < 0:
        raise ValueError(f"Derivative multi-index must have four nonnegative entries, got {deriv}")
    if F.order < sum(deriv) + 2:
        raise OrderExhausted(
            f"Series of order {F.order} is too short for a derivative of order {sum(deriv)}"
        )
    points = grid_points(radius, n)
    z1, z2 = _place(points, plane)
    h = radius / (4 * n)
    exact = _derivative(F, deriv).evaluate(z1, z2)
    approx = np.zeros_like(points)
    for (dx1, dy1, dx2, dy2), weight in sorted(wirtinger_stencil(deriv, h).items()):
        approx += weight * F.evaluate(z1 + h * (dx1 + 1j * dy1), z2 + h * (dx2 + 1j * dy2))
    residual = float(np.abs(exact - approx).max())
    logger.debug(f"fd_residual deriv={deriv} radius={radius} n={n} h={h:.3g}: {residual:.3g}")
    return residual


def fd_convergence(
    F: Series,
    deriv: Sequence[int],
    ns: Iterable[int] = (8, 16, 32),
    radius: float = 0.3,
    plane: str = "z2",
) -> List[Tuple[int, float]]:
    return [(n, fd_residual(F, deriv, radius, n, plane)) for n in ns]


# --- Cauchy-Pompeiu ------------------------------------------------------


def polar_midpoint_grid(radius: float, n: int) -> Tuple[np.ndarray, float]:
    """
    Nodes of an n x n equal-area polar grid and the common cell area.

    Radii are sqrt((j + 1/2) / n) * radius, angles 2 pi (k + 1/2) / n.
    """
    radii = radius * np.sqrt((np.arange(n) + 0.5) / n)
    angles = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    nodes = radii[:, None] * np.exp(1j * angles)[None, :]
    return nodes, np.pi * radius**2 / n**2


def probe_points(radius: float, fraction: float = 0.5, count: int = CP_PROBES) -> np.ndarray:
    angles = np.pi * (2 * np.arange(count) + 1) / count
    return fraction * radius * np.exp(1j * angles)


def _z2_values(series: Series, z: np.ndarray) -> np.ndarray:
    return series.evaluate(np.zeros_like(z), z)


def cauchy_pompeiu_residuals(
    r: Series,
    u: Series,
    radius: float,
    n: int,
    probe_fraction: float = 0.5,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    Residuals u(z) + (1/pi) Int (r conj(u) / 2) / (zeta - z) dA - w(z) at the probes.

    The kernel singularity is subtracted first: over the disk,
    Int dA / (zeta - z) = -pi conj(z), so only the bounded difference quotient
    (f(zeta) - f(z)) / (zeta - z) goes through the midpoint rule. The boundary
    term w(z) = (1/2pi) Int u(zeta) zeta / (zeta - z) dtheta uses 4n trapezoid nodes.
    """
    if radius > CP_MAX_RADIUS:
        raise RadiusTooLarge(f"Quadrature radius {radius} exceeds {CP_MAX_RADIUS}")
    if n < CP_MIN_N:
        raise ResolutionTooLow(f"Quadrature resolution {n} is below the minimum {CP_MIN_N}")
    probes = probe_points(radius, probe_fraction)
    if radius - np.abs(probes).max() < 2.0 * radius / n:
        raise QuadratureDegenerate(
            f"Probe points at |z| = {probe_fraction * radius:.3g} "
            "lie within two cells of the boundary"
        )
    lhs = u.diff(Var.Z2B)
    rhs = r * u.conj() * 0.5
    if not lhs.approx_equal(rhs, tolerances=tolerances):
        raise InvariantViolation("u does not solve u_(2bar) = (r/2) conj(u)")

    nodes, cell = polar_midpoint_grid(radius, n)
    density = 0.5 * _z2_values(r, nodes) * np.conj(_z2_values(u, nodes))

    boundary_angles = 2.0 * np.pi * np.arange(4 * n) / (4 * n)
    boundary = radius * np.exp(1j * boundary_angles)
    u_boundary = _z2_values(u, boundary)

    u_probe = _z2_values(u, probes)
    density_probe = 0.5 * _z2_values(r, probes) * np.conj(u_probe)

    residuals = np.zeros(len(probes), dtype=complex)
    for k, z in enumerate(probes):
        gap = nodes - z
        quotient = (density - density_probe[k]) / gap
        area = np.sum(quotient) * cell - np.pi * np.conj(z) * density_probe[k]
        w = np.mean(u_boundary * boundary / (boundary - z))
        residuals[k] = u_probe[k] + area / np.pi - w
    return np.abs(residuals)


def cauchy_pompeiu_check(
    r: Series,
    u: Series,
    radius: float = 0.3,
    n: int = 64,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """Max absolute Cauchy-Pompeiu residual over the probe points."""
    residual = float(cauchy_pompeiu_residuals(r, u, radius, n, tolerances=tolerances).max())
    logger.info(f"Cauchy-Pompeiu residual at radius {radius}, n {n}: {residual:.3g}")
    return residual


def cauchy_pompeiu_verdict(
    r: Series,
    u: Series,
    radius: float = 0.3,
    n: int = 64,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Dict[str, Union[str, float, int]]:
    return {
        "check": "cauchy-pompeiu",
        "radius": radius,
        "n": n,
        "max_residual": cauchy_pompeiu_check(r, u, radius, n, tolerances),
    }
