"""
Constructive pipeline for CR-flat germs of the family F = r|z1|^2 + s + conj(s),
s = t z1^2 + u z1 + v:

    rho --Liouville--> r --integrate--> t
                       r + seed --dbar solve--> u
                       r, u --double antiderivative--> Re v
                       (r, t, u, Re v) --assemble--> F

All integration constants are zero; the holomorphic seed of u is the only free
datum besides rho.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from src.geometry.invariants import HypersurfaceGerm, Residual
from src.series.core import (
    Series,
    Var,
    describe,
    exp_series,
    from_z2_block,
    log_series,
    z2_block,
)
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
from src.utils.settings import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

Z1Z1B = (1, 1, 0, 0)
Z1SQ = (2, 0, 0, 0)
Z1BSQ = (0, 2, 0, 0)
Z1 = (1, 0, 0, 0)
Z1B = (0, 1, 0, 0)
MODEL_Z1_EXPONENTS = {(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)}


def _require_z2_only(series: Series, name: str) -> None:
    if series.depends_on(Var.Z1) or series.depends_on(Var.Z1B):
        raise IncompatibleShape(f"{name} must depend on z2 and z2bar only")


def _require_real(series: Series, name: str, tolerances: Tolerances) -> None:
    if not series.check_real(tolerances):
        raise NotReal(f"{name} must be real-valued")


@dataclass(frozen=True)
class RigidModelData:
    """The functions r, t, u and Re v that define a germ of the model family."""

    r: Series
    t: Series
    u: Series
    rev: Series

    @property
    def order(self) -> int:
        return min(self.r.order, self.t.order, self.u.order, self.rev.order)

    def residuals(self) -> Dict[str, Residual]:
        """The three structural equations, each as a residual that should vanish."""
        r, t, u = self.r, self.t, self.u
        half_r_ubar = r * u.conj() * 0.5
        integrand = r * u * u.conj() / 8.0
        quarter_r2 = r * r / 4.0
        t_2b = t.diff(Var.Z2B)
        u_2b = u.diff(Var.Z2B)
        rev_22b = self.rev.diff(Var.Z2).diff(Var.Z2B)
        return {
            "t_normalization": Residual(
                t_2b - quarter_r2, max(t_2b.max_abs(), quarter_r2.max_abs())
            ),
            "dbar": Residual(u_2b - half_r_ubar, max(u_2b.max_abs(), half_r_ubar.max_abs())),
            "rev": Residual(rev_22b - integrand, max(rev_22b.max_abs(), integrand.max_abs())),
        }

    def validate(self, tolerances: Tolerances = DEFAULT_TOLERANCES) -> None:
        problems = []
        for name in ("r", "t", "u", "rev"):
            series = getattr(self, name)
            if series.depends_on(Var.Z1) or series.depends_on(Var.Z1B):
                problems.append(f"{name} depends on z1")
        for name in ("r", "rev"):
            if not getattr(self, name).check_real(tolerances):
                problems.append(f"{name} is not real")
        r0 = self.r.constant_term
        if r0.real <= tolerances.div:
            problems.append(f"r(0) = {r0:.3g} is not positive")
        if not problems:
            for name, residual in self.residuals().items():
                if not residual.vanishes(tolerances):
                    problems.append(
                        f"{name} equation fails (max residual {residual.value.max_abs():.3g})"
                    )
        if problems:
            raise InvariantViolation("Model data invalid: " + "; ".join(problems))


# --- pipeline stages -------------------------------------------------------


def liouville_metric(
    rho: HoloSeries, N: int, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> Series:
    """r = 2|rho'| / (1 - |rho|^2), a metric of constant curvature -1, at order N."""
    rho0 = rho.constant_term
    if abs(rho0) >= 1.0 - tolerances.div:
        raise RhoNotInDisk(f"|rho(0)| = {abs(rho0):.6g} must be below 1")
    if abs(rho.coefficient(1)) <= tolerances.div:
        raise RhoCritical(
            f"rho'(0) = {rho.coefficient(1):.3g}: rho must have nowhere vanishing derivative"
        )
    lifted = rho.to_series(N + 1)
    slope = lifted.diff(Var.Z2)
    rho_s = lifted.truncate(N)
    speed = (slope * slope.conj()).sqrt_real(tolerances)
    r = 2.0 * speed * (1.0 - rho_s * rho_s.conj()).invert(tolerances)
    logger.debug(f"Liouville metric of order {r.order}, r(0) = {r.constant_term.real:.6g}")
    return r


def liouville_residual(r: Series) -> Residual:
    """r r_{2 2bar} - r_2 r_{2bar} - r^4 / 4."""
    r_2 = r.diff(Var.Z2)
    r_2b = r.diff(Var.Z2B)
    first = r * r_2.diff(Var.Z2B)
    second = r_2 * r_2b
    third = (r * r) * (r * r) / 4.0
    return Residual(first - second - third, max(first.max_abs(), second.max_abs(), third.max_abs()))


def liouville_log_residual(
    r: Series, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> Residual:
    """4 R_{2 2bar} - exp(2R) for R = log r, i.e. Delta R = e^(2R) with Delta = 4 d2 d2bar."""
    R = log_series(r, tolerances)
    laplacian = 4.0 * R.diff(Var.Z2).diff(Var.Z2B)
    growth = exp_series(2.0 * R.truncate(laplacian.order))
    return Residual(laplacian - growth, max(laplacian.max_abs(), growth.max_abs()))


def integrate_t(r: Series, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Series:
    """t = antiderivative of r^2 / 4 in z2bar, with no z2bar-free part."""
    _require_z2_only(r, "r")
    _require_real(r, "r", tolerances)
    return (r * r / 4.0).antidiff(Var.Z2B)


def solve_dbar_u(
    r: Series, seed: HoloSeries, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> Series:
    """
    Solve u_{2bar} = (r/2) conj(u) with holomorphic part ``seed``.

    Writing u = sum u[p, q] z2^p z2bar^q, the equation reads
    (k + 1) u[j, k + 1] = sum_{m + q = j, n + p = k} (r[m, n] / 2) conj(u[p, q]),
    whose right side only involves coefficients of lower total degree, so the
    coefficients are filled in degree by degree starting from u[d, 0] = seed_d.
    """
    _require_z2_only(r, "r")
    _require_real(r, "r", tolerances)
    if seed.order > r.order:
        raise OrderMismatch(
            f"Seed order {seed.order} exceeds the order {r.order} of the metric"
        )
    N = r.order
    metric = z2_block(r)
    u = np.zeros((N + 1, N + 1), dtype=complex)
    u[: seed.order + 1, 0] = seed.coeffs
    for total in range(1, N + 1):
        for k in range(total):
            j = total - 1 - k
            mirrored = np.conj(u[k::-1, j::-1]).T
            u[j, k + 1] = np.sum(metric[: j + 1, : k + 1] * mirrored) / (2.0 * (k + 1))
    return from_z2_block(u, N)


def dbar_residual(r: Series, u: Series) -> Residual:
    lhs = u.diff(Var.Z2B)
    rhs = r * u.conj() * 0.5
    return Residual(lhs - rhs, max(lhs.max_abs(), rhs.max_abs()))


def compute_rev(r: Series, u: Series) -> Series:
    """Re v = double antiderivative (z2bar, then z2) of r |u|^2 / 8."""
    _require_z2_only(r, "r")
    _require_z2_only(u, "u")
    return (r * u * u.conj() / 8.0).antidiff(Var.Z2B).antidiff(Var.Z2)


def _assemble(data: RigidModelData) -> Series:
    F = (
        data.r.shift(Z1Z1B)
        + data.t.shift(Z1SQ)
        + data.t.conj().shift(Z1BSQ)
        + data.u.shift(Z1)
        + data.u.conj().shift(Z1B)
        + 2.0 * data.rev
    )
    return F


def assemble_F(
    data: RigidModelData, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> HypersurfaceGerm:
    """F = r|z1|^2 + t z1^2 + conj(t) z1bar^2 + u z1 + conj(u) z1bar + 2 Re v."""
    data.validate(tolerances)
    return HypersurfaceGerm(_assemble(data), tolerances)


def build_germ(
    rho: HoloSeries,
    seed: HoloSeries,
    order: int,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Tuple[HypersurfaceGerm, RigidModelData]:
    """Run the whole pipeline and return the germ at ``order`` with its model data."""
    logger.info(f"Constructing germ of order {order} from rho of order {rho.order}")
    r = liouville_metric(rho, order, tolerances)
    t = integrate_t(r, tolerances)
    u = solve_dbar_u(r, seed, tolerances)
    rev = compute_rev(r, u)
    data = RigidModelData(r=r, t=t, u=u, rev=rev)
    logger.debug(f"Model data: {describe({'r': r, 't': t, 'u': u, 'rev': rev})}")
    germ = assemble_F(data, tolerances)
    return HypersurfaceGerm(germ.F.truncate(order), tolerances), data


# --- the model germ and the normalization ---------------------------------


def mtilde0(N: int) -> HypersurfaceGerm:
    """|z1|^2/(1-|z2|^2) + (z2bar z1^2 + z2 z1bar^2) / (2(1-|z2|^2)), truncated at N."""
    if N < 2:
        raise OrderMismatch(f"The model germ needs order >= 2, got {N}")
    geometric = (1.0 - Series.monomial((0, 0, 1, 1), N)).invert()
    quadratic = 0.5 * Series.variable(Var.Z2B, N) * geometric
    F = geometric.shift(Z1Z1B) + quadratic.shift(Z1SQ) + quadratic.conj().shift(Z1BSQ)
    return HypersurfaceGerm(F.truncate(N))


def extract_model_data(
    g: HypersurfaceGerm, tolerances: Optional[Tolerances] = None
) -> RigidModelData:
    """Read r, t, u, Re v back off a germ of the model family."""
    tol = tolerances or g.tolerances
    F = g.F
    coeffs = F.coeffs
    stray = np.array(coeffs)
    for a, b in MODEL_Z1_EXPONENTS:
        stray[a, b] = 0
    if np.abs(stray).max() > tol.cmp * (1.0 + F.max_abs()):
        raise NotInModelForm(
            "F has z1-monomials outside 1, z1, z1bar, |z1|^2, z1^2, z1bar^2; "
            "F_(1 1bar) depends on z1"
        )
    N = F.order
    return RigidModelData(
        r=from_z2_block(coeffs[1, 1], N - 2),
        t=from_z2_block(coeffs[2, 0], N - 2),
        u=from_z2_block(coeffs[1, 0], N - 1),
        rev=from_z2_block(coeffs[0, 0] / 2.0, N),
    )


def rescale_model_data(
    data: RigidModelData, w0: complex, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> RigidModelData:
    """Image of the model data under z1 -> z1 / (2 sqrt(conj(w0)))."""
    if abs(w0) <= tolerances.div:
        raise ZeroScale(f"Scale w0 = {w0:.3g} is degenerate")
    w0 = complex(w0)
    root = complex(np.sqrt(w0.conjugate()))
    return RigidModelData(
        r=data.r * (4.0 * abs(w0)),
        t=data.t * (4.0 * w0.conjugate()),
        u=data.u * (2.0 * root),
        rev=data.rev,
    )


def rescale_z1(
    g: HypersurfaceGerm, w0: complex, tolerances: Optional[Tolerances] = None
) -> HypersurfaceGerm:
    tol = tolerances or g.tolerances
    if abs(w0) <= tol.div:
        raise ZeroScale(f"Scale w0 = {w0:.3g} is degenerate")
    data = rescale_model_data(extract_model_data(g, tol), w0, tol)
    return HypersurfaceGerm(_assemble(data).truncate(g.order), tol)


def normalize_model_data(
    data: RigidModelData, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> RigidModelData:
    """
    Bring t_{2bar} = w(z2bar) r^2 to t_{2bar} = r^2 / 4 for a nonconstant w.

    The map is z1 -> z1 / (2 sqrt(conj(w))), applied coefficient-wise.
    """
    r2 = data.r * data.r
    w = data.t.diff(Var.Z2B) * r2.invert(tolerances)
    antiholomorphic = np.zeros_like(w.coeffs)
    antiholomorphic[0, 0, 0, :] = w.coeffs[0, 0, 0, :]
    w_only = Series(antiholomorphic, w.order)
    if not (w - w_only).is_zero(scale=w.max_abs(), tolerances=tolerances):
        raise InvariantViolation("t_(2bar) / r^2 is not a function of z2bar alone")
    w = w_only
    if abs(w.constant_term) <= tolerances.div:
        raise ZeroScale("t_(2bar) / r^2 vanishes at the origin")
    w_bar = w.conj()
    return RigidModelData(
        r=4.0 * (w * w_bar).sqrt_real(tolerances) * data.r,
        t=4.0 * w_bar * data.t,
        u=2.0 * w_bar.sqrt(tolerances) * data.u,
        rev=data.rev,
    )


# --- structural identities of the pipeline --------------------------------


def eqforr_residual(data: RigidModelData) -> Residual:
    """r r_{2 2bar} - |r_2|^2 - |s_{1 1 2bar}|^2 with s_{1 1 2bar} = 2 t_{2bar}."""
    r = data.r
    r_2 = r.diff(Var.Z2)
    s_112b = 2.0 * data.t.diff(Var.Z2B)
    first = r * r_2.diff(Var.Z2B)
    second = r_2 * r_2.conj()
    third = s_112b * s_112b.conj()
    return Residual(first - second - third, max(first.max_abs(), second.max_abs(), third.max_abs()))


def eqforttt_residual(data: RigidModelData) -> Residual:
    """r t_{2 2bar} - 2 r_2 t_{2bar}."""
    t_2b = data.t.diff(Var.Z2B)
    first = data.r * t_2b.diff(Var.Z2)
    second = 2.0 * data.r.diff(Var.Z2) * t_2b
    return Residual(first - second, max(first.max_abs(), second.max_abs()))


def eqforuuu_residual(data: RigidModelData) -> Residual:
    """r u_{2 2bar} - 2 t_{2bar} conj(u)_2 - r_2 u_{2bar}."""
    r, t, u = data.r, data.t, data.u
    u_2b = u.diff(Var.Z2B)
    first = r * u_2b.diff(Var.Z2)
    second = 2.0 * t.diff(Var.Z2B) * u.conj().diff(Var.Z2)
    third = r.diff(Var.Z2) * u_2b
    return Residual(first - second - third, max(first.max_abs(), second.max_abs(), third.max_abs()))


def eqforvvv_residual(data: RigidModelData) -> Residual:
    """(Re v)_{2 2bar} - (r/8)|u|^2."""
    return data.residuals()["rev"]


def expanded_ma_residual(data: RigidModelData) -> Residual:
    """
    Monge-Ampere determinant of F = r|z1|^2 + s + conj(s) written through r and s:

    r (r_{2 2bar}|z1|^2 + s_{2 2bar} + conj(s_{2 2bar})) - |r_2|^2 |z1|^2
      - |s_{1 2bar}|^2 - r_2 s_{1 2bar} z1 - r_{2bar} conj(s_{1 2bar}) z1bar
    """
    r = data.r
    s = data.t.shift(Z1SQ) + data.u.shift(Z1) + data.rev
    r_2 = r.diff(Var.Z2)
    r_2b = r.diff(Var.Z2B)
    s_22b = s.diff(Var.Z2).diff(Var.Z2B)
    s_12b = s.diff(Var.Z1).diff(Var.Z2B)
    terms = [
        r * (r_2.diff(Var.Z2B).shift(Z1Z1B) + s_22b + s_22b.conj()),
        -(r_2 * r_2b).shift(Z1Z1B),
        -(s_12b * s_12b.conj()),
        -(r_2 * s_12b).shift(Z1),
        -(r_2b * s_12b.conj()).shift(Z1B),
    ]
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return Residual(total, max(term.max_abs() for term in terms))


def pipeline_identities(
    data: RigidModelData, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> Dict[str, Residual]:
    """Every structural equation the pipeline output must satisfy."""
    return {
        "liouville": liouville_residual(data.r),
        "liouville_log": liouville_log_residual(data.r, tolerances),
        "eqforr": eqforr_residual(data),
        "eqforttt": eqforttt_residual(data),
        "dbar": dbar_residual(data.r, data.u),
        "eqforuuu": eqforuuu_residual(data),
        "eqforvvv": eqforvvv_residual(data),
        "expanded_ma": expanded_ma_residual(data),
    }


# --- admissible random inputs ---------------------------------------------


def _uniform_disk(rng: np.random.Generator, radius: float) -> complex:
    magnitude = radius * np.sqrt(rng.uniform())
    return complex(magnitude * np.exp(2j * np.pi * rng.uniform()))


def sample_admissible(
    rng: np.random.Generator, rho_degree: int = 4, seed_degree: int = 3
) -> Tuple[HoloSeries, HoloSeries]:
    """
    Draw (rho, seed): |rho(0)| <= 0.5, 0.5 <= |rho'(0)| <= 1, higher rho
    coefficients in the 0.3-disk, seed coefficients in the unit disk.
    """
    rho = [_uniform_disk(rng, 0.5)]
    speed = rng.uniform(0.5, 1.0)
    rho.append(complex(speed * np.exp(2j * np.pi * rng.uniform())))
    rho.extend(_uniform_disk(rng, 0.3) for _ in range(2, rho_degree + 1))
    seed = [_uniform_disk(rng, 1.0) for _ in range(seed_degree + 1)]
    return HoloSeries(rho), HoloSeries(seed)
