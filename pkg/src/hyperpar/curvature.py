"""Relative principal curvatures, principal vectors and mean curvature functions."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ComplexEigenvalues

IMAG_TOL = 1e-8
RADIUS_TOL = 1e-10
CLUSTER_TOL = 1e-6


@dataclass(frozen=True)
class CurvatureData:
    """Eigen-structure of the relative shape operator, batch-first.

    ``U[b, :, i]`` holds the chart components of the principal vector of
    ``k[b, i]``; ``R`` is NaN where a principal curvature is (numerically)
    zero.
    """

    k: np.ndarray
    U: np.ndarray
    H: np.ndarray
    R: np.ndarray
    charpoly: np.ndarray

    @property
    def K(self) -> np.ndarray:
        return self.H[:, -1]

    @property
    def n(self) -> int:
        return self.k.shape[1]

    @property
    def radii_defined(self) -> np.ndarray:
        return np.all(np.isfinite(self.R), axis=1)


def elementary_symmetric(k: np.ndarray) -> np.ndarray:
    """``e_0 .. e_n`` of the last axis of ``k``."""
    k = np.asarray(k, dtype=float)
    n = k.shape[-1]
    e = np.zeros(k.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        ki = k[..., i]
        for r in range(i + 1, 0, -1):
            e[..., r] = e[..., r] + ki * e[..., r - 1]
    return e


def mean_curvatures(k) -> np.ndarray:
    """Binomially averaged elementary symmetric functions ``H_0 .. H_n``."""
    k = np.asarray(k, dtype=float)
    n = k.shape[-1]
    if n < 1:
        raise ValueError("need at least one principal curvature")
    binom = np.array([comb(n, r) for r in range(n + 1)], dtype=float)
    return elementary_symmetric(k) / binom


def charpoly(H) -> np.ndarray:
    """Coefficients (ascending powers of k) of ``sum_r C(n,r) H_r (-k)^(n-r)``."""
    H = np.asarray(H, dtype=float)
    n = H.shape[-1] - 1
    out = np.zeros(H.shape)
    for r in range(n + 1):
        out[..., n - r] = comb(n, r) * H[..., r] * (-1.0) ** (n - r)
    return out


def matrix_charpoly(m: np.ndarray) -> np.ndarray:
    """Ascending coefficients of ``det(m - k I)`` by Faddeev-LeVerrier."""
    m = np.asarray(m, dtype=float)
    n = m.shape[-1]
    eye = np.broadcast_to(np.eye(n), m.shape)
    coeffs = [np.ones(m.shape[:-2])]  # monic det(k I - m), descending
    aux = np.zeros(m.shape)
    for i in range(1, n + 1):
        aux = m @ aux + coeffs[-1][..., None, None] * eye
        coeffs.append(-np.trace(m @ aux, axis1=-2, axis2=-1) / i)
    desc = np.stack(coeffs, axis=-1) * (-1.0) ** n
    return desc[..., ::-1]


def _eig_sorted(op):
    vals, vecs = np.linalg.eig(op)
    scale = np.maximum(np.abs(vals).max(axis=-1), 1.0)
    bad = np.flatnonzero(np.abs(vals.imag).max(axis=-1) > IMAG_TOL * scale)
    if bad.size:
        raise ComplexEigenvalues(
            f"shape operator has non-real eigenvalues at batch points {bad.tolist()}", bad
        )
    vals = vals.real
    vecs = vecs.real
    order = np.argsort(vals, axis=-1, kind="stable")
    vals = np.take_along_axis(vals, order, axis=-1)
    vecs = np.take_along_axis(vecs, order[:, None, :], axis=-1)
    return vals, vecs


def _orthogonalize_clusters(vals, vecs):
    # repeated eigenvalues: replace the returned vectors by an orthonormal basis of their span
    for b in range(vals.shape[0]):
        for group in clusters(vals[b]):
            if len(group) > 1:
                q, _ = np.linalg.qr(vecs[b][:, group])
                vecs[b][:, group] = q
    return vecs


def clusters(vals: np.ndarray) -> list[list[int]]:
    """Groups of indices of (numerically) equal sorted eigenvalues for one point."""
    groups, current = [], [0]
    for i in range(1, len(vals)):
        if abs(vals[i] - vals[current[0]]) <= CLUSTER_TOL * (1 + abs(vals[current[0]])):
            current.append(i)
        else:
            groups.append(current)
            current = [i]
    groups.append(current)
    return groups


def principal_curvatures(rel) -> CurvatureData:
    """Eigen-structure of the relative shape operator of a relative frame."""
    op = rel.operator
    vals, vecs = _eig_sorted(op)
    vecs = _orthogonalize_clusters(vals, vecs)
    G = rel.G.bvalue
    glen = np.einsum("zai,zab,zbi->zi", vecs, G, vecs)
    eig_g = np.linalg.eigvalsh(G)
    definite = np.all(eig_g > 0, axis=1) | np.all(eig_g < 0, axis=1)
    norm = np.where(definite[:, None], np.sqrt(np.abs(glen)), np.linalg.norm(vecs, axis=1))
    vecs = vecs / norm[:, None, :]
    with np.errstate(divide="ignore"):
        radii = np.where(np.abs(vals) > RADIUS_TOL, 1.0 / np.where(vals == 0, 1.0, vals), np.nan)
    H = mean_curvatures(vals)
    return CurvatureData(k=vals, U=vecs, H=H, R=radii, charpoly=charpoly(H))
