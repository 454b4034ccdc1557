"""Relative apparatus of a relatively normalized hypersurface ``(x, y)``.

Jets are kept for the quantities that are differentiated again downstream
(support function, relative normal, metric, Weingarten matrix); quantities
that are only ever read at the point (Christoffel symbols, Darboux tensor,
Tchebychev and Laplace vectors, Pick invariant) are stored as plain arrays
with the batch axis first.

The relative normal is reconstructed from the support function as
``y = grad_III(q, xi) + q xi`` with ``grad_III(f, xi) = e^(ij) d_i f d_j xi``;
this is the only reading for which ``d_i y`` stays tangent when ``q`` is not
constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dsl
from . import jet as J
from .errors import DegenerateImmersion, DomainError, NonSymmetricB, OrderExceeded, RankViolation, ZeroSupport
from .euclid import EuclidFrame, build_frame, frame_from_map
from .jet import Jet

ZERO_SUPPORT_TOL = 1e-10
RANK_TOL = 1e-6
SYMMETRY_TOL = 1e-6


@dataclass(frozen=True)
class RelativeFrame:
    frame: EuclidFrame
    q: Jet
    q_aff: Jet
    X: Jet
    y: Jet
    dy: Jet
    G: Jet
    G_inv: Jet
    B_mix: Jet  # [i, j] = B_i^j, so d_i y = -B_mix[i, j] d_j x
    B_cov: Jet  # [i, j] = B_ij
    phi: Jet | None = None
    Gamma: np.ndarray | None = None  # [b, m, i, j] = Gamma^m_ij
    A_dar: np.ndarray | None = None  # [b, i, j, k]
    T: np.ndarray | None = None  # [b, m] = T^m
    T_vec: np.ndarray | None = None  # [b, a] ambient T^m d_m x
    J_pick: np.ndarray | None = None
    L: np.ndarray | None = None  # T + y
    L_laplace: np.ndarray | None = None  # Laplacian of x over n
    residuals: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def operator(self) -> np.ndarray:
        """Matrix of the shape operator on chart components, ``(batch, n, n)``.

        Column ``u`` of components maps to ``operator @ u``; it is the
        transpose of ``B_mix``.
        """
        return np.swapaxes(self.B_mix.bvalue, 1, 2)


def support_function(nd, frame: EuclidFrame, points=None) -> Jet:
    """Support function ``q`` for a normalization definition."""
    n = frame.n
    if nd.kind == "euclidean":
        q = Jet.constant(np.ones(frame.x.batch), n, frame.order)
    elif nd.kind == "equiaffine":
        q = affine_support(frame)
    else:
        if points is None:
            raise ValueError("a custom support function needs the chart points")
        q = dsl.eval_jet(nd.expr, points, frame.order)
    bad = np.flatnonzero(~(np.abs(q.value) >= ZERO_SUPPORT_TOL))
    if bad.size:
        raise ZeroSupport(f"support function vanishes at batch points {bad.tolist()}", bad)
    return q


def affine_support(frame: EuclidFrame) -> Jet:
    """Equiaffine support function ``|K|^(1/(n+2))``."""
    return frame.Ktilde.abs().pow(1.0 / (frame.n + 2))


_FORMS = {"I": "g_inv", "II": "h_inv", "III": "e_inv"}
_TARGETS = {"x": "dx", "xi": "dxi"}


def beltrami1(frame: EuclidFrame, f: Jet, form: str = "III", target: str = "xi") -> Jet:
    """Mixed first Beltrami operator ``F^(ij) d_i f d_j target``.

    ``form`` is one of ``"I"``, ``"II"``, ``"III"``; ``target`` is ``"x"``
    or ``"xi"``.
    """
    f_inv = getattr(frame, _FORMS[form])
    d_target = getattr(frame, _TARGETS[target])
    coeffs = J.einsum("ij,i->j", f_inv, f.grad())
    return J.einsum("j,ja->a", coeffs, d_target)


def relative_normal(q: Jet, frame: EuclidFrame) -> Jet:
    """Relative normal from its support function; consumes one derivative of ``q``."""
    return beltrami1(frame, q, "III", "xi") + q * frame.xi


def _max_abs(arr):
    return np.abs(arr).reshape(arr.shape[0], -1).max(axis=1)


def assemble(frame: EuclidFrame, y: Jet, full: bool = True) -> RelativeFrame:
    """Relative frame of ``(frame, y)`` computed from the jets of ``y``.

    With ``full=False`` only the support function, metric and Weingarten
    matrices are built (enough for curvature work); ``full=True`` adds
    Christoffel symbols, the Darboux tensor and the Tchebychev/Laplace/Pick
    objects, which need three derivatives of ``x`` and two of ``q``.
    """
    n = frame.n
    res = {}
    q = J.dot(frame.xi, y)
    bad = np.flatnonzero(~(np.abs(q.value) >= ZERO_SUPPORT_TOL))
    if bad.size:
        raise ZeroSupport(f"<xi, y> vanishes at batch points {bad.tolist()}", bad)
    X = frame.xi / q
    G = frame.h / q
    G_inv = frame.h_inv * q
    dy = y.grad()
    B_mix = -J.matmul(J.einsum("ia,ka->ik", dy, frame.dx), frame.g_inv)
    B_cov = J.matmul(B_mix, G)

    dyv = dy.bvalue
    scale = np.maximum(_max_abs(dyv), 1.0)
    res["normal_dy"] = _max_abs(np.einsum("zia,za->zi", dyv, frame.xi.bvalue)) / scale
    res["conormal_tangent"] = _max_abs(np.einsum("zia,za->zi", frame.dx.bvalue, X.bvalue))
    res["conormal_y"] = np.abs(np.einsum("za,za->z", X.bvalue, y.bvalue) - 1.0)
    bad = np.flatnonzero(~(res["normal_dy"] <= RANK_TOL))
    if bad.size:
        raise RankViolation(f"d_i y is not tangent at batch points {bad.tolist()}", bad)
    bc = B_cov.bvalue
    res["B_symmetry"] = _max_abs(bc - np.swapaxes(bc, 1, 2)) / np.maximum(_max_abs(bc), 1.0)
    bad = np.flatnonzero(~(res["B_symmetry"] <= SYMMETRY_TOL))
    if bad.size:
        raise NonSymmetricB(f"B_ij is not symmetric at batch points {bad.tolist()}", bad)

    q_aff = frame.Ktilde.abs().pow(1.0 / (n + 2))
    base = dict(frame=frame, q=q, q_aff=q_aff, X=X, y=y, dy=dy, G=G, G_inv=G_inv, B_mix=B_mix, B_cov=B_cov)
    if not full:
        return RelativeFrame(**base, residuals=res)

    if frame.ddx.order < 1 or G.order < 1:
        raise OrderExceeded(
            f"the Darboux tensor needs third derivatives of x; jet order {frame.order} is too low"
        )
    Giv = G_inv.bvalue
    dG = G.grad().bvalue  # [b, k, i, j] = d_k G_ij
    first_kind = 0.5 * (  # [b, c, a, b'] = Gamma_{c, ab}
        np.einsum("zabc->zcab", dG) + np.einsum("zbac->zcab", dG) - dG
    )
    gamma = np.einsum("zmc,zcab->zmab", Giv, first_kind)
    third = frame.ddx.grad().bvalue  # [b, k, j, i, a]
    proj = np.einsum("zkjia,za->zijk", third, X.bvalue)
    A = (
        proj
        - np.einsum("zkij->zijk", first_kind)
        - np.einsum("zjki->zijk", first_kind)
        - np.einsum("zikj->zijk", first_kind)
    )
    T = np.einsum("zia,zmb,ziab->zm", Giv, Giv, A) / n
    A_up = np.einsum("zja,zkb,zlc,zabc->zjkl", Giv, Giv, Giv, A)
    J_pick = np.einsum("zjkl,zjkl->z", A, A_up) / (n * (n - 1)) if n > 1 else np.zeros(len(A))
    dxv = frame.dx.bvalue
    T_vec = np.einsum("zm,zma->za", T, dxv)
    L = T_vec + y.bvalue
    hess = frame.ddx.bvalue - np.einsum("zmij,zma->zija", gamma, dxv)
    L_lap = np.einsum("zij,zija->za", Giv, hess) / n
    ratio = (q / q_aff).abs()
    phi = ratio.pow((n + 2) / (2.0 * n))

    perms = ["zikj", "zjik", "zjki", "zkij", "zkji"]
    scale_a = np.maximum(_max_abs(A), 1.0)
    res["darboux_symmetry"] = np.max(
        [_max_abs(A - np.einsum(f"zijk->{p}", A)) for p in perms], axis=0
    ) / scale_a
    return RelativeFrame(
        **base,
        phi=phi,
        Gamma=gamma,
        A_dar=A,
        T=T,
        T_vec=T_vec,
        J_pick=J_pick,
        L=L,
        L_laplace=L_lap,
        residuals=res,
    )


def build_relative_frame(surface, nd, points, order: int = J.DEFAULT_ORDER, full: bool = True) -> RelativeFrame:
    """Full relative frame of ``surface`` under normalization ``nd`` at chart points."""
    frame = build_frame(surface, points, order)
    q = support_function(nd, frame, points)
    return assemble(frame, relative_normal(q, frame), full=full)


def tchebychev_gradient(rel: RelativeFrame) -> tuple[np.ndarray, np.ndarray]:
    """Tchebychev vector from the Tchebychev function.

    Returns chart components ``G^(ij) d_j ln(phi)`` and the ambient vector
    ``q grad_II(ln(phi), x)``, both batch-first.
    """
    if rel.phi is None:
        raise ValueError("relative frame was assembled without the Tchebychev function")
    if np.any(rel.phi.value <= 0):
        raise DomainError("Tchebychev function must be positive")
    log_phi = rel.phi.log()
    comps = np.einsum("zij,zj->zi", rel.G_inv.bvalue, log_phi.grad().bvalue)
    ambient = rel.q.bvalue[:, None] * beltrami1(rel.frame, log_phi, "II", "x").bvalue
    return comps, ambient


@dataclass(frozen=True)
class RelativeImageForms:
    gbar: np.ndarray  # from the jets of y
    gbar_from_B: np.ndarray
    hbar: np.ndarray
    hbar_from_B: np.ndarray
    IIbar_from_q: np.ndarray
    Kbar: np.ndarray
    K_check: np.ndarray  # (-1)^n K~ / K~bar
    K: np.ndarray  # det B_i^j


IMAGE_TOL = 1e-10


def image_regular(rel: RelativeFrame) -> np.ndarray:
    """Per-point mask where the relative image is an immersion (``det B != 0``)."""
    bm = rel.B_mix.bvalue
    scale = np.maximum(_max_abs(bm), 1.0) ** rel.n
    return np.abs(np.linalg.det(bm)) > IMAGE_TOL * scale


def relative_image_forms(rel: RelativeFrame, check: bool = True) -> RelativeImageForms:
    """Fundamental forms of the relative image ``(M, y)``, two ways.

    The direct route builds the frame of ``y`` itself (oriented along
    ``xi``); the other contracts ``B`` with the forms of ``x``.  Raises
    :class:`~hyperpar.errors.DegenerateImmersion` when ``y`` is not an
    immersion; with ``check=False`` such points come back as NaN.
    """
    frame = rel.frame
    n = frame.n
    regular = image_regular(rel)
    bad = np.flatnonzero(~regular)
    if check and bad.size:
        raise DegenerateImmersion(f"relative image is singular at batch points {bad.tolist()}", bad)
    with np.errstate(divide="ignore", invalid="ignore"):
        img = frame_from_map(rel.y, orient=frame.xi, check=False)
    bm = rel.B_mix.bvalue
    gbar_b = np.einsum("zik,zjm,zkm->zij", bm, bm, frame.g.bvalue)
    hbar_b = -np.einsum("zik,zkj->zij", bm, frame.h.bvalue)
    second = -rel.q.bvalue[:, None, None] * rel.B_cov.bvalue
    kbar = np.where(regular, img.Ktilde.bvalue, np.nan)
    return RelativeImageForms(
        gbar=img.g.bvalue,
        gbar_from_B=gbar_b,
        hbar=img.h.bvalue,
        hbar_from_B=hbar_b,
        IIbar_from_q=second,
        Kbar=kbar,
        K_check=(-1) ** n * frame.Ktilde.bvalue / np.where(regular, kbar, 1.0),
        K=np.linalg.det(bm),
    )
