"""Finite-difference reference pipeline.

Works on plain float evaluation of the surface expressions only, so it
shares no code with the jet machinery beyond the expression parser.
"""

from __future__ import annotations

import numpy as np

from hyperpar import dsl

STEP = 1e-5


def position(surface, u):
    return np.array([dsl.evaluate(c, u) for c in surface.components])


def _shift(u, i, h):
    v = np.array(u, dtype=float)
    v[i] += h
    return v


def first(f, u, h=STEP):
    """Central differences, rows = d_i f."""
    return np.array([(f(_shift(u, i, h)) - f(_shift(u, i, -h))) / (2 * h) for i in range(len(u))])


def first4(f, u, h):
    """Fourth-order central differences, for nested oracles."""
    rows = []
    for i in range(len(u)):
        rows.append(
            (-f(_shift(u, i, 2 * h)) + 8 * f(_shift(u, i, h)) - 8 * f(_shift(u, i, -h)) + f(_shift(u, i, -2 * h)))
            / (12 * h)
        )
    return np.array(rows)


def second(f, u, h=STEP):
    """Central second differences, ``[i, j] = d_i d_j f``."""
    n = len(u)
    f0 = f(np.asarray(u, dtype=float))
    out = np.zeros((n, n) + np.shape(f0))
    for i in range(n):
        out[i, i] = (f(_shift(u, i, h)) - 2 * f0 + f(_shift(u, i, -h))) / h**2
        for j in range(i + 1, n):
            pp = f(_shift(_shift(u, i, h), j, h))
            pm = f(_shift(_shift(u, i, h), j, -h))
            mp = f(_shift(_shift(u, i, -h), j, h))
            mm = f(_shift(_shift(u, i, -h), j, -h))
            out[i, j] = out[j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return out


def unit_normal(dx):
    """Unit normal with ``<N, w> = det[d_1 x, ..., d_n x, w]``."""
    n = dx.shape[0]
    normal = np.array([np.linalg.det(np.vstack([dx, np.eye(n + 1)[a]])) for a in range(n + 1)])
    return normal / np.linalg.norm(normal)


def euclid(surface, u, h=STEP):
    """``g``, ``h``, ``K~``, ``xi`` and the equiaffine support at one point."""
    f = lambda v: position(surface, v)  # noqa: E731
    dx = first(f, u, h)
    ddx = second(f, u, h)
    xi = unit_normal(dx)
    g = dx @ dx.T
    hh = ddx @ xi
    kt = np.linalg.det(hh) / np.linalg.det(g)
    n = len(u)
    return {"g": g, "h": hh, "Ktilde": kt, "xi": xi, "q_aff": abs(kt) ** (1.0 / (n + 2)), "dx": dx}


def weingarten_from_y(y_of, surface, u, h=STEP):
    """``B_i^j`` from differences of a relative normal field ``y_of(u)``."""
    dy = first(y_of, u, h)
    dx = first(lambda v: position(surface, v), u, h)
    g = dx @ dx.T
    return -(dy @ dx.T) @ np.linalg.inv(g)


def affine_normal(surface, u, h=1e-3):
    """Equiaffine normal ``grad_III(q_aff, xi) + q_aff xi`` by nested differences."""
    def q_aff(v):
        return euclid(surface, v, 1e-4)["q_aff"]

    def xi(v):
        return euclid(surface, v, 1e-4)["xi"]

    dq = first4(q_aff, u, h)
    dxi = first4(xi, u, h)
    e = dxi @ dxi.T
    return np.linalg.solve(e, dq) @ dxi + q_aff(u) * xi(u)
