"""Relatively parallel hypersurfaces ``x + mu y`` and the laws relating them.

Every quantity of the parallel hypersurface is built from scratch: the
composite map ``x + mu y`` is differentiated in jet arithmetic and run
through the same frame code as the base surface, keeping the normalization
``y``.  The transformation laws are then checked against those independent
results, one :class:`IdentityRecord` per law.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from . import jet as J
from .curvature import CurvatureData, clusters, principal_curvatures
from .errors import NotApplicable, OrderExceeded, SingularFamily
from .euclid import frame_from_map
from .jet import Jet
from .relgeo import (
    RelativeFrame,
    affine_support,
    assemble,
    beltrami1,
    build_relative_frame,
    image_regular,
    relative_image_forms,
    relative_normal,
    tchebychev_gradient,
)

SINGULAR_TOL = 1e-10
DEFAULT_TOL = 1e-6
ROUTE_TOL = 1e-8
PARALLEL_SPREAD = 1e-6


@dataclass(frozen=True)
class ParallelConfig:
    surface: object
    normalization: object
    mu: float
    order: int = J.DEFAULT_ORDER

    def __post_init__(self):
        if self.mu == 0:
            raise ValueError("the relative distance mu must be nonzero")


@dataclass(frozen=True)
class Base:
    """Base surface data shared by every member of the family."""

    points: np.ndarray
    rel: RelativeFrame
    curv: CurvatureData

    @property
    def frame(self):
        return self.rel.frame


def base_state(surface, normalization, points, order: int = J.DEFAULT_ORDER, full: bool = True) -> Base:
    pts = J.as_points(points)
    rel = build_relative_frame(surface, normalization, pts, order, full=full)
    return Base(pts, rel, principal_curvatures(rel))


def family_jet(rel: RelativeFrame, mu: float) -> Jet:
    """``A(mu) = det(I - mu B)`` as a scalar jet."""
    n = rel.n
    eye = Jet.constant(np.broadcast_to(np.eye(n)[:, :, None], (n, n, rel.B_mix.batch)), n, rel.B_mix.order)
    return J.det(eye - rel.B_mix * mu)


def _check_family(a_values, where=""):
    bad = np.flatnonzero(~(np.abs(a_values) >= SINGULAR_TOL))
    if bad.size:
        raise SingularFamily(f"A(mu) vanishes{where} at batch points {bad.tolist()}", bad)


@dataclass(frozen=True)
class Offset:
    mu: float
    base: Base
    star: RelativeFrame
    A: Jet


def offset_frame(cfg: ParallelConfig, points=None, base: Base | None = None, full: bool = True) -> Offset:
    """Frames of ``(x + mu y, y)`` built from the composite map.

    The unit normal of the parallel hypersurface is oriented along the base
    normal, so both share ``xi`` (their tangent hyperplanes are parallel).
    """
    if base is None:
        base = base_state(cfg.surface, cfg.normalization, points, cfg.order, full=full)
    A = family_jet(base.rel, cfg.mu)
    _check_family(A.value)
    x_star = base.frame.x + base.rel.y * cfg.mu
    star_frame = frame_from_map(x_star, orient=base.frame.xi)
    star = assemble(star_frame, base.rel.y, full=full)
    return Offset(cfg.mu, base, star, A)


def family_determinant(rel: RelativeFrame, curv: CurvatureData, mu: float):
    """``A(mu)`` three ways: determinant, mean-curvature polynomial, product over radii.

    The third route falls back to ``prod(1 - mu k_i)`` at points where a
    radius of curvature is undefined.
    """
    n = rel.n
    m = rel.B_mix.bvalue
    a_det = np.linalg.det(np.eye(n) - mu * m)
    a_poly = sum(comb(n, r) * curv.H[:, r] * (-mu) ** r for r in range(n + 1))
    with np.errstate(invalid="ignore"):
        a_radii = (-1) ** n * curv.K * np.prod(mu - curv.R, axis=1)
    a_prod = np.prod(1.0 - mu * curv.k, axis=1)
    a_three = np.where(curv.radii_defined, a_radii, a_prod)
    return a_det, a_poly, a_three


def star_mean_curvatures(H: np.ndarray, A: np.ndarray, mu: float) -> np.ndarray:
    """Mean curvatures of the parallel member from the mu-derivatives of ``A``."""
    n = H.shape[1] - 1
    out = np.zeros_like(H)
    for s in range(n + 1):
        deriv = sum(
            (-1) ** r * factorial(r) / factorial(r - s) * comb(n, r) * H[:, r] * mu ** (r - s)
            for r in range(s, n + 1)
        )
        out[:, s] = (-1) ** s / (factorial(s) * comb(n, s) * A) * deriv
    return out


def star_mean_curvature(H: np.ndarray, A: np.ndarray, mu: float) -> np.ndarray:
    n = H.shape[1] - 1
    total = sum((-1) ** (r + 1) * r * comb(n, r) * H[:, r] * mu ** (r - 1) for r in range(1, n + 1))
    return total / (n * A)


# reports


@dataclass
class IdentityRecord:
    id: str
    law: str
    residual: np.ndarray
    tolerance: float
    not_applicable: np.ndarray
    reason: str | None = None

    @property
    def applicable(self) -> np.ndarray:
        return ~self.not_applicable

    @property
    def max_residual(self) -> float:
        vals = self.residual[self.applicable]
        return float(np.max(vals)) if vals.size else float("nan")

    @property
    def passed(self) -> bool:
        vals = self.residual[self.applicable]
        return bool(np.all(vals <= self.tolerance))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "law": self.law,
            "tolerance": self.tolerance,
            "max_residual": None if np.isnan(self.max_residual) else self.max_residual,
            "pass": self.passed,
            "not_applicable": int(self.not_applicable.sum()),
            "reason": self.reason,
        }


@dataclass
class IdentityReport:
    """Residuals of every transformation law at a batch of points."""

    mu: float
    points: np.ndarray
    records: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)

    def add(self, id, law, residual, tolerance, not_applicable=None, reason=None):
        if id in self.records:
            raise ValueError(f"identity {id!r} recorded twice")
        residual = np.asarray(residual, dtype=float)
        residual = np.broadcast_to(residual, (len(self.points),)).copy()
        if not_applicable is None:
            not_applicable = np.zeros(len(self.points), dtype=bool)
        not_applicable = np.broadcast_to(np.asarray(not_applicable, dtype=bool), residual.shape).copy()
        residual[not_applicable] = np.nan
        self.records[id] = IdentityRecord(id, law, residual, tolerance, not_applicable, reason)

    def not_applicable(self, id, law, tolerance, reason):
        self.add(id, law, np.nan, tolerance, True, reason)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records.values())

    def failures(self) -> list[IdentityRecord]:
        return [r for r in self.records.values() if not r.passed]

    def merge(self, other: "IdentityReport"):
        for rec in other.records.values():
            if rec.id in self.records:
                raise ValueError(f"identity {rec.id!r} recorded twice")
            self.records[rec.id] = rec
        self.scalars.update(other.scalars)
        return self

    def at(self, i: int) -> dict:
        """Residuals of every law at one point."""
        return {k: float(r.residual[i]) for k, r in self.records.items()}


def residual(a, b) -> np.ndarray:
    """Scale-normalised distance per point: ``|a - b| / max(1, |a|, |b|)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    axes = tuple(range(1, a.ndim))
    diff = np.sqrt(np.sum((a - b) ** 2, axis=axes)) if axes else np.abs(a - b)
    na = np.sqrt(np.sum(a**2, axis=axes)) if axes else np.abs(a)
    nb = np.sqrt(np.sum(b**2, axis=axes)) if axes else np.abs(b)
    return diff / np.maximum(1.0, np.maximum(na, nb))


def _sorted_match(a, b):
    a = np.sort(a, axis=1)
    b = np.sort(b, axis=1)
    return np.max(np.abs(a - b) / (1.0 + np.abs(b)), axis=1)


def verify_transform(cfg: ParallelConfig, points=None, offset: Offset | None = None,
                     tol: float = DEFAULT_TOL) -> IdentityReport:
    """Check the shape-operator and curvature laws of the parallel member."""
    off = offset if offset is not None else offset_frame(cfg, points)
    base, star, mu = off.base, off.star, off.mu
    rel, curv = base.rel, base.curv
    n = rel.n
    rep = IdentityReport(mu, base.points)
    A = off.A.bvalue
    star_curv = principal_curvatures(star)

    rep.add("peterson", "d1x* x ... x dnx* = A (d1x x ... x dnx)",
            residual(star.frame.normal.bvalue, A[:, None] * base.frame.normal.bvalue), tol)
    rep.add("common_normal", "xi* = xi", residual(star.frame.xi.bvalue, base.frame.xi.bvalue), tol)
    rep.add("common_support", "q* = q", residual(star.q.bvalue, rel.q.bvalue), tol)
    rep.add("common_conormal", "X* = X", residual(star.X.bvalue, rel.X.bvalue), tol)
    rep.add("common_B", "B*_ij = B_ij", residual(star.B_cov.bvalue, rel.B_cov.bvalue), tol)

    m, ms = rel.B_mix.bvalue, star.B_mix.bvalue
    regular = image_regular(rel)
    image_laws = [
        ("image_first_form", "gbar_ij = B_i^k B_j^m g_km"),
        ("image_second_form", "hbar_ij = -B_i^k h_kj"),
        ("image_II", "IIbar = -q B"),
        ("image_curvature", "K = (-1)^n K~ / K~bar"),
        ("star_image_curvature", "K* = (-1)^n K~* / K~bar"),
    ]
    if not regular.any():
        for id, law in image_laws:
            rep.not_applicable(id, law, tol, "relative image is not an immersion")
    else:
        img = relative_image_forms(rel, check=False)
        img_star = relative_image_forms(star, check=False)
        reason = None if regular.all() else "relative image is not an immersion"
        with np.errstate(divide="ignore", invalid="ignore"):
            values = [
                np.maximum(residual(img.gbar, img.gbar_from_B), residual(img.gbar, img_star.gbar_from_B)),
                np.maximum(residual(img.hbar, img.hbar_from_B), residual(img.hbar, img_star.hbar_from_B)),
                np.maximum(residual(img.hbar, img.IIbar_from_q), residual(img.hbar, img_star.IIbar_from_q)),
                residual(img.K, img.K_check),
                residual(np.linalg.det(ms), (-1) ** n * star.frame.Ktilde.bvalue / img.Kbar),
            ]
        for (id, law), value in zip(image_laws, values):
            rep.add(id, law, value, tol, ~regular, reason)

    rep.add("second_form", "II* = II - mu q B",
            residual(star.frame.h.bvalue, base.frame.h.bvalue - mu * rel.q.bvalue[:, None, None] * rel.B_cov.bvalue),
            tol)
    rep.add("relative_metric", "G* = G - mu B", residual(star.G.bvalue, rel.G.bvalue - mu * rel.B_cov.bvalue), tol)
    eye = np.eye(n)
    rep.add("mixed_relations", "B = B*(I - mu B), B* = B(I + mu B*)",
            np.maximum(residual(m, ms @ (eye - mu * m)), residual(ms, m @ (eye + mu * ms))), tol)
    rep.add("mixed_commute", "B^k_i B*^j_k = B*^k_i B^j_k", residual(m @ ms, ms @ m), tol)

    K, K_star = np.linalg.det(m), np.linalg.det(ms)
    rep.add("relative_curvature", "K* = K / A", residual(K_star, K / A), tol)

    w, ws = rel.operator, star.operator
    rep.add("operator_relation", "w* = (I - mu w)^-1 w", residual(ws, np.linalg.solve(eye - mu * w, w)), tol)
    rep.add("operators_commute", "w w* = w* w", residual(w @ ws, ws @ w), tol)

    expected_k = curv.k / (1.0 - mu * curv.k)
    rep.add("principal_curvatures", "k*_i = k_i / (1 - mu k_i)", _sorted_match(star_curv.k, expected_k), tol)

    radii_ok = curv.radii_defined & star_curv.radii_defined
    rep.add("radii_shift", "R*_i = R_i - mu",
            np.where(radii_ok, _sorted_match(np.nan_to_num(star_curv.R), np.nan_to_num(curv.R - mu)), np.nan),
            tol, ~radii_ok, None if radii_ok.all() else "a relative principal curvature vanishes")

    rep.add("principal_vectors", "w*(k*_i u_i) = k*_i (k*_i u_i)", _principal_vector_residual(curv, ws, mu), tol)

    H_formula = star_mean_curvatures(curv.H, A, mu)
    rep.add("star_mean_curvatures", "H*_s = (-1)^s / (s! C(n,s) A) d^s A / d mu^s",
            residual(H_formula, star_curv.H), tol)

    K_ok = (np.abs(curv.K) > 1e-10) & (np.abs(star_curv.K) > 1e-10)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = star_curv.H[:, n - 1] / star_curv.K
        rhs = curv.H[:, n - 1] / curv.K - mu
    rep.add("hn1_ratio", "H*_(n-1) / K* = H_(n-1) / K - mu", np.where(K_ok, residual(lhs, rhs), np.nan), tol,
            ~K_ok, None if K_ok.all() else "relative curvature vanishes")
    rep.add("star_mean_curvature", "H* = sum_r (-1)^(r+1) r C(n,r) H_r mu^(r-1) / (n A)",
            residual(star_mean_curvature(curv.H, A, mu), star_curv.H[:, 1]), tol)

    Kt, Kt_star = base.frame.Ktilde.bvalue, star.frame.Ktilde.bvalue
    with np.errstate(divide="ignore", invalid="ignore"):
        rep.add("gauss_relative_ratio", "K~* / K* = K~ / K",
                np.where(K_ok, residual(Kt_star / K_star, Kt / K), np.nan), tol, ~K_ok,
                None if K_ok.all() else "relative curvature vanishes")
    rep.add("gauss_ratio", "K~* / K~ = 1 / A", residual(Kt_star / Kt, 1.0 / A), tol)

    a_det, a_poly, a_three = family_determinant(rel, curv, mu)
    rep.add("family_determinant", "det(I - mu B) = sum C(n,r) H_r (-mu)^r = prod(1 - mu k_i)",
            np.maximum.reduce([residual(a_det, a_poly), residual(a_det, a_three), residual(a_det, A)]), ROUTE_TOL)

    rep.scalars.update(A=A, K=K, K_star=K_star, H_star=star_curv.H, k_star=star_curv.k, k=curv.k)
    return rep


def _principal_vector_residual(curv: CurvatureData, ws: np.ndarray, mu: float) -> np.ndarray:
    out = np.zeros(len(curv.k))
    for b in range(len(curv.k)):
        worst = 0.0
        for group in clusters(curv.k[b]):
            u = curv.U[b][:, group]
            kstar = curv.k[b, group[0]] / (1.0 - mu * curv.k[b, group[0]])
            lhs = ws[b] @ (kstar * u)
            rhs = kstar * (kstar * u)
            scale = max(1.0, np.linalg.norm(lhs), np.linalg.norm(rhs))
            # eigen-relation of u itself (meaningful also when k*_i = 0)
            direct = np.linalg.norm(ws[b] @ u - kstar * u) / max(1.0, np.linalg.norm(kstar * u)) / np.linalg.norm(u)
            worst = max(worst, np.linalg.norm(lhs - rhs) / scale, direct)
        out[b] = worst
    return out


def relation_checks(rel: RelativeFrame, tol: float = DEFAULT_TOL, label: str = "") -> IdentityReport:
    """Internal two-route identities of one relative frame."""
    frame = rel.frame
    rep = IdentityReport(float("nan"), np.zeros((rel.q.batch, rel.n)))
    T115, T120 = tchebychev_gradient(rel)
    rep.add(f"{label}tchebychev_gradient", "T^i = G^(ij) d_j ln(phi)", residual(rel.T, T115), tol)
    rep.add(f"{label}tchebychev_beltrami", "T = q grad_II(ln(phi), x)", residual(rel.T_vec, T120), tol)
    rep.add(f"{label}laplace", "Laplace_G(x) / n = T + y", residual(rel.L_laplace, rel.L), tol)
    rep.add(f"{label}conormal", "<X, d_i x> = 0, <X, y> = 1",
            np.maximum(rel.residuals["conormal_tangent"], rel.residuals["conormal_y"]), tol)
    rep.add(f"{label}conormal_normal", "X = xi / q, G = h / q",
            np.maximum(residual(rel.X.bvalue, frame.xi.bvalue / rel.q.bvalue[:, None]),
                        residual(rel.G.bvalue, frame.h.bvalue / rel.q.bvalue[:, None, None])), tol)
    rep.add(f"{label}B_symmetry", "B_ij = B_ji", rel.residuals["B_symmetry"], tol)
    rep.add(f"{label}darboux_symmetry", "A_ijk totally symmetric", rel.residuals["darboux_symmetry"], tol)
    return rep


# affine normalization of the parallel member


def affine_transport(cfg: ParallelConfig, points=None, offset: Offset | None = None,
                     tol: float = DEFAULT_TOL) -> IdentityReport:
    """Transport laws for the equiaffine objects, against from-scratch values."""
    off = offset if offset is not None else offset_frame(cfg, points)
    base, star, mu = off.base, off.star, off.mu
    rel, frame, sframe = base.rel, base.frame, star.frame
    n = rel.n
    rep = IdentityReport(mu, base.points)
    if off.A.order < 1:
        raise OrderExceeded(f"affine transport needs the gradient of A; jet order {cfg.order} is too low")
    absA = off.A.abs()
    Av = absA.bvalue

    q_aff = affine_support(frame)
    q_aff_star = affine_support(sframe)
    rep.add("affine_support", "q*_aff = |A|^(-1/(n+2)) q_aff",
            residual(q_aff_star.bvalue, Av ** (-1.0 / (n + 2)) * q_aff.bvalue), tol)
    rep.add("tchebychev_function", "phi* = |A|^(1/(2n)) phi",
            residual(star.phi.bvalue, Av ** (1.0 / (2 * n)) * rel.phi.bvalue), tol)

    log_a = absA.log()
    dual_q = beltrami1(frame, q_aff, "II", "x") + beltrami1(frame, q_aff, "III", "xi")
    dual_a = beltrami1(frame, log_a, "II", "x") + beltrami1(frame, log_a, "III", "xi")
    rep.add("beltrami_duality", "grad_II(f, x) = -grad_III(f, xi)",
            np.maximum(residual(dual_q.bvalue, 0.0), residual(dual_a.bvalue, 0.0)), tol)

    shift = (rel.q.bvalue / (2 * n))[:, None] * beltrami1(frame, log_a, "III", "xi").bvalue
    rep.add("tchebychev_transport", "T* = T - q/(2n) grad_III(ln|A|, xi)", residual(star.T_vec, rel.T_vec - shift), tol)
    rep.add("laplace_transport", "L* = L - q/(2n) grad_III(ln|A|, xi)",
            residual(star.L_laplace, rel.L_laplace - shift), tol)

    y_aff = relative_normal(q_aff, frame)
    y_aff_star = relative_normal(q_aff_star, sframe)
    factor = absA.pow(-1.0 / (n + 2))
    transported = y_aff * factor + q_aff * beltrami1(frame, factor, "III", "xi")
    rep.add("affine_normal_transport", "y*_aff = |A|^(-1/(n+2)) y_aff + q_aff grad_III(|A|^(-1/(n+2)), xi)",
            residual(y_aff_star.bvalue, transported.bvalue), tol)
    rep.scalars.update(y_aff=y_aff.bvalue, y_aff_star=y_aff_star.bvalue, q_aff=q_aff.bvalue,
                       q_aff_star=q_aff_star.bvalue)
    return rep


def full_report(cfg: ParallelConfig, points=None, offset: Offset | None = None, tol: float = DEFAULT_TOL,
                transport_tol: float | None = None) -> IdentityReport:
    """Every law at once: shape operator, curvatures, frame routes, affine transport."""
    off = offset if offset is not None else offset_frame(cfg, points)
    rep = verify_transform(cfg, offset=off, tol=tol)
    rep.merge(relation_checks(off.base.rel, tol, "base_"))
    rep.merge(relation_checks(off.star, tol, "star_"))
    rep.merge(affine_transport(cfg, offset=off, tol=tol if transport_tol is None else transport_tol))
    return rep


# derivative law


def star_operator(base: Base, mu: float) -> np.ndarray:
    """Coefficients ``B*^m_i`` of the parallel member at ``mu``, built from scratch."""
    a = family_jet(base.rel, mu)
    _check_family(a.value, f" at mu={mu}")
    x_star = base.frame.x + base.rel.y * mu
    sframe = frame_from_map(x_star, orient=base.frame.xi)
    return assemble(sframe, base.rel.y, full=False).B_mix.bvalue


def derivative_check(cfg: ParallelConfig, points=None, delta: float = 1e-4, base: Base | None = None,
                     mu: float | None = None) -> np.ndarray:
    """Central difference of ``B*`` in ``mu`` against ``(B*)^2``, per point.

    ``mu`` overrides ``cfg.mu`` (allowing the base point ``mu = 0``).
    """
    if base is None:
        base = base_state(cfg.surface, cfg.normalization, points, cfg.order, full=False)
    mu = cfg.mu if mu is None else mu
    # A(t) = prod(1 - t k_i) vanishes at the radii; none may lie inside the stencil
    with np.errstate(divide="ignore"):
        roots = 1.0 / base.curv.k
    inside = np.flatnonzero(np.any((roots >= mu - delta) & (roots <= mu + delta), axis=1))
    if inside.size:
        raise SingularFamily(f"A vanishes inside [{mu - delta}, {mu + delta}] at batch points {inside.tolist()}", inside)
    if mu == 0:
        center = base.rel.B_mix.bvalue
    else:
        center = star_operator(base, mu)
    fd = (star_operator(base, mu + delta) - star_operator(base, mu - delta)) / (2 * delta)
    return residual(fd, center @ center)


# parallel affine normals


@dataclass
class ParallelismResult:
    parallel: bool
    spread: float
    A: np.ndarray
    c: float | None
    relation_residual: float
    checks: dict


def affine_parallelism_test(cfg: ParallelConfig, points) -> ParallelismResult:
    """Whether the affine normals of base and parallel member are parallel.

    Decided by constancy of ``A`` over the sample; when parallel, the
    proportionality factor of the affine normals and the equivalent
    conditions on Gaussian curvatures and Tchebychev/Laplace vectors are
    reported.
    """
    pts = J.as_points(points)
    if len(pts) < 2:
        raise ValueError("need at least two sample points")
    off = offset_frame(cfg, pts)
    A = off.A.bvalue
    spread = float(np.std(A) / np.mean(np.abs(A)))
    c1 = float(np.mean(A))
    relation = float(np.max(np.abs(A - c1)) / abs(cfg.mu))
    parallel = spread <= PARALLEL_SPREAD
    checks = {}
    c = None
    if parallel:
        tr = affine_transport(cfg, offset=off)
        y_aff, y_star = tr.scalars["y_aff"], tr.scalars["y_aff_star"]
        ratios = np.einsum("za,za->z", y_star, y_aff) / np.einsum("za,za->z", y_aff, y_aff)
        c = float(np.mean(ratios))
        checks["affine_normals_parallel"] = float(np.max(residual(y_star, c * y_aff)))
        gauss = off.star.frame.Ktilde.bvalue / off.base.frame.Ktilde.bvalue
        checks["gauss_proportional"] = float(np.max(np.abs(gauss - np.mean(gauss))))
        checks["gauss_ratio"] = float(np.max(residual(gauss, 1.0 / A)))
        checks["tchebychev_equal"] = float(np.max(residual(off.star.T_vec, off.base.rel.T_vec)))
        checks["laplace_equal"] = float(np.max(residual(off.star.L_laplace, off.base.rel.L_laplace)))
        checks["c_vs_A"] = abs(c - abs(c1) ** (-1.0 / (off.base.rel.n + 2)))
    return ParallelismResult(parallel, spread, A, c, relation, checks)


def vanishing_hn1_distance(curv: CurvatureData) -> np.ndarray:
    """Distance ``H_(n-1) / K`` at which the parallel member has ``H*_(n-1) = 0``."""
    n = curv.n
    bad = np.flatnonzero(~((np.abs(curv.K) > 1e-10) & curv.radii_defined))
    if bad.size:
        raise NotApplicable(f"relative curvature or a radius is undefined at batch points {bad.tolist()}", bad)
    return curv.H[:, n - 1] / curv.K
