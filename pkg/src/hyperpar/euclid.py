"""Euclidean apparatus of an immersion: tangent basis, unit normal, I, II, III, K."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jet as J
from .errors import DegenerateImmersion, FlatPoint
from .jet import Jet

DEGENERATE_TOL = 1e-14  # smallest / largest eigenvalue of g
FLAT_TOL = 1e-10  # |K~| against |g^-1 h|^n


@dataclass(frozen=True)
class EuclidFrame:
    """Jets of the Euclidean quantities at a batch of chart points.

    Index conventions: ``dx[i]`` is ``d_i x``, ``ddx[j, i]`` is
    ``d_j d_i x``, ``dxi[i]`` is ``d_i xi``.  ``normal`` is the raw vector
    product ``d_1 x x ... x d_n x`` and ``xi`` its normalisation, multiplied
    by ``orientation`` (+1 or -1 per point) when a reference normal was
    supplied.  ``h`` uses ``xi``, so its sign follows the orientation.
    """

    x: Jet
    dx: Jet
    ddx: Jet
    normal: Jet
    xi: Jet
    dxi: Jet
    g: Jet
    h: Jet
    e: Jet
    g_inv: Jet
    h_inv: Jet
    e_inv: Jet
    Ktilde: Jet
    orientation: np.ndarray

    @property
    def n(self) -> int:
        return self.x.n_vars

    @property
    def order(self) -> int:
        return self.x.order


def _rank_ratio(g: np.ndarray) -> np.ndarray:
    ev = np.linalg.eigvalsh(g)
    return ev[:, 0] / np.maximum(ev[:, -1], 1e-300)


def _flatness(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``|det S| / |S|_F^n`` for the shape matrix ``S = g^-1 h`` (0 for planes)."""
    s = np.linalg.solve(g, h)
    n = g.shape[-1]
    size = np.sqrt(np.einsum("zij,zij->z", s, s)) ** n
    det = np.abs(np.linalg.det(s))
    return np.where(size > 0, det / np.where(size > 0, size, 1.0), 0.0)


def frame_from_map(x: Jet, orient: Jet | None = None, check: bool = True) -> EuclidFrame:
    """Frame of the hypersurface traced by the ``(n+1,)``-jet ``x``.

    Needs ``x.order >= 2``.  With ``orient`` given, the unit normal is flipped
    pointwise to have a positive component along ``orient``.
    """
    n = x.n_vars
    if x.shape != (n + 1,):
        raise ValueError(f"position jet must have shape ({n + 1},), got {x.shape}")
    if x.order < 2:
        raise J.OrderExceeded(f"a Euclidean frame needs jets of order >= 2, got {x.order}")
    dx = x.grad()
    ddx = dx.grad()
    g = J.einsum("ia,ja->ij", dx, dx)
    det_g = J.det(g)
    if check:
        bad = np.flatnonzero(~(_rank_ratio(g.bvalue) > DEGENERATE_TOL))
        if bad.size:
            raise DegenerateImmersion(f"immersion has rank < {n} at batch points {bad.tolist()}", bad)
    normal = J.cross(dx)
    length = J.dot(normal, normal).sqrt()
    xi = normal / length
    if orient is not None:
        sign = np.sign(np.einsum("ab,ab->b", normal.value, orient.value))
        sign[sign == 0] = 1.0
        xi = xi * sign
    else:
        sign = np.ones(x.batch)
    dxi = xi.grad()
    h = J.einsum("jia,a->ij", ddx, xi)
    e = J.einsum("ia,ja->ij", dxi, dxi)
    det_h = J.det(h)
    if check:
        bad = np.flatnonzero(~(_flatness(g.bvalue, h.bvalue) > FLAT_TOL))
        if bad.size:
            raise FlatPoint(f"Gaussian curvature vanishes at batch points {bad.tolist()}", bad)
    return EuclidFrame(
        x=x,
        dx=dx,
        ddx=ddx,
        normal=normal,
        xi=xi,
        dxi=dxi,
        g=g,
        h=h,
        e=e,
        g_inv=J.inv(g),
        h_inv=J.inv(h),
        e_inv=J.inv(e),
        Ktilde=det_h / det_g,
        orientation=sign,
    )


def build_frame(surface, points, order: int = J.DEFAULT_ORDER) -> EuclidFrame:
    """Frame of a :class:`~hyperpar.surfaces.SurfaceDef` at chart points."""
    return frame_from_map(surface.jet(points, order))


def euclid_shape(frame: EuclidFrame) -> Jet:
    """Euclidean shape operator ``S_i^j = h_ik g^(kj)``."""
    return J.einsum("ik,kj->ij", frame.h, frame.g_inv)


def weingarten_residual(frame: EuclidFrame) -> np.ndarray:
    """Per-point max norm of ``d_j xi + h_jk g^(km) d_m x`` (should vanish)."""
    s = euclid_shape(frame).value
    res = frame.dxi.value + np.einsum("jmb,mab->jab", s, frame.dx.value)
    return np.abs(res).max(axis=(0, 1))


def gauss_curvature_of_map(m: Jet, orient: Jet | None = None) -> Jet:
    """Gaussian curvature of the hypersurface traced by the map ``m``."""
    return frame_from_map(m, orient=orient).Ktilde
