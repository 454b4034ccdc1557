"""Declarative hypersurfaces and normalizations, plus the built-in catalog."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import dsl
from .errors import BadParams, UnknownSurface
from .jet import Jet, as_points, stack

MARGIN = 1e-3


@dataclass(frozen=True)
class SurfaceDef:
    """A chart ``x: domain -> R^(n+1)`` given by ``n + 1`` resolved expressions."""

    n: int
    components: tuple
    domain: tuple
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.components) != self.n + 1:
            raise BadParams(f"{self.name}: need {self.n + 1} components, got {len(self.components)}")
        if len(self.domain) != self.n:
            raise BadParams(f"{self.name}: need {self.n} domain intervals, got {len(self.domain)}")
        for lo, hi in self.domain:
            if not lo < hi:
                raise BadParams(f"{self.name}: empty domain interval [{lo}, {hi}]")

    @classmethod
    def from_expressions(cls, texts, n, domain, params=None, name="custom"):
        params = dict(params or {})
        comps = tuple(dsl.resolve(dsl.parse(t, n), params) for t in texts)
        dom = tuple((float(lo), float(hi)) for lo, hi in domain)
        return cls(n, comps, dom, name, params)

    def jet(self, points, order: int) -> Jet:
        """Position vector as an ``(n+1,)``-shaped jet."""
        return stack([dsl.eval_jet(c, points, order) for c in self.components])

    def evaluate(self, point) -> np.ndarray:
        return np.array([dsl.evaluate(c, point) for c in self.components])

    def contains(self, points) -> np.ndarray:
        pts = as_points(points)
        lo = np.array([d[0] for d in self.domain])
        hi = np.array([d[1] for d in self.domain])
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def restrict(self, domain) -> "SurfaceDef":
        """Same chart on a sub-box; ``None`` entries keep the current interval."""
        new = []
        for cur, want in zip(self.domain, domain):
            lo, hi = cur if want is None else (max(cur[0], float(want[0])), min(cur[1], float(want[1])))
            new.append((lo, hi))
        return SurfaceDef(self.n, self.components, tuple(new), self.name, dict(self.params))

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        """Scrambled Halton points in the domain, ``(count, n)``."""
        unit = qmc.Halton(d=self.n, scramble=True, seed=seed).random(count)
        lo = np.array([d[0] for d in self.domain])
        hi = np.array([d[1] for d in self.domain])
        return lo + unit * (hi - lo)

    def grid(self, resolution) -> np.ndarray:
        axes = [np.linspace(lo, hi, r) for (lo, hi), r in zip(self.domain, resolution)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class NormalizationDef:
    """Which support function to use: ``euclidean``, ``equiaffine`` or ``custom``."""

    kind: str
    expr: object = None
    text: str | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "equiaffine", "custom"):
            raise BadParams(f"unknown normalization kind {self.kind!r}")
        if self.kind == "custom" and self.expr is None:
            raise BadParams("custom normalization needs an expression")

    @classmethod
    def euclidean(cls):
        return cls("euclidean")

    @classmethod
    def equiaffine(cls):
        return cls("equiaffine")

    @classmethod
    def custom(cls, text: str, n: int, params=None):
        return cls("custom", dsl.resolve(dsl.parse(text, n), params), text)

    @property
    def label(self) -> str:
        return f"expr:{self.text}" if self.kind == "custom" else self.kind


def _positive(name, params, key, default):
    value = float(params.get(key, default))
    if not value > 0 or not math.isfinite(value):
        raise BadParams(f"{name}: parameter {key} must be positive, got {value}")
    return value


def _dimension(name, params, allowed):
    n = params.get("n", 2)
    if int(n) != n or int(n) not in allowed:
        raise BadParams(f"{name}: n must be one of {sorted(allowed)}, got {n}")
    return int(n)


def _sphere(params):
    r = _positive("sphere", params, "r", 1.0)
    n = _dimension("sphere", params, {2, 3})
    half = math.pi / 2 - MARGIN
    if n == 2:
        texts = ["r*cos(u1)*cos(u2)", "r*sin(u1)*cos(u2)", "r*sin(u2)"]
    else:
        texts = [
            "r*cos(u1)*cos(u2)*cos(u3)",
            "r*sin(u1)*cos(u2)*cos(u3)",
            "r*sin(u2)*cos(u3)",
            "r*sin(u3)",
        ]
    domain = [(-math.pi, math.pi)] + [(-half, half)] * (n - 1)
    return SurfaceDef.from_expressions(texts, n, domain, {"r": r}, "sphere")


def _ellipsoid(params):
    a = _positive("ellipsoid", params, "a", 1.0)
    b = _positive("ellipsoid", params, "b", 1.0)
    c = _positive("ellipsoid", params, "c", 1.0)
    half = math.pi / 2 - MARGIN
    texts = ["a*cos(u1)*cos(u2)", "b*sin(u1)*cos(u2)", "c*sin(u2)"]
    return SurfaceDef.from_expressions(
        texts, 2, [(-math.pi, math.pi), (-half, half)], {"a": a, "b": b, "c": c}, "ellipsoid"
    )


def _torus(params):
    big = _positive("torus", params, "R", 2.0)
    small = _positive("torus", params, "rho", 0.5)
    if small >= big:
        raise BadParams(f"torus: need rho < R, got rho={small}, R={big}")
    band = params.get("band", 1)
    if band not in (1, -1):
        raise BadParams(f"torus: band must be 1 (outer, K>0) or -1 (inner, K<0), got {band}")
    half = math.pi / 2
    # cos(u2) = 0 are the parabolic circles where the Gaussian curvature vanishes
    lo, hi = (-half + MARGIN, half - MARGIN) if band == 1 else (half + MARGIN, 3 * half - MARGIN)
    texts = ["(bigr + rho*cos(u2))*cos(u1)", "(bigr + rho*cos(u2))*sin(u1)", "rho*sin(u2)"]
    return SurfaceDef.from_expressions(
        texts, 2, [(-math.pi, math.pi), (lo, hi)], {"bigr": big, "rho": small}, "torus"
    )


def _graph(params):
    n = _dimension("graph", params, {2, 3})
    f = params.get("f")
    if not isinstance(f, str):
        raise BadParams("graph: parameter f must be an expression string")
    lo = float(params.get("lo", -1.0))
    hi = float(params.get("hi", 1.0))
    numeric = {k: v for k, v in params.items() if k not in ("f", "n", "lo", "hi")}
    texts = [f"u{i + 1}" for i in range(n)] + [f]
    return SurfaceDef.from_expressions(texts, n, [(lo, hi)] * n, numeric, "graph")


def _paraboloid(params):
    n = _dimension("paraboloid", params, {2, 3})
    names = "abc"[:n]
    coeffs = {k: _positive("paraboloid", params, k, 1.0) for k in names}
    f = "(" + " + ".join(f"{k}*u{i + 1}^2" for i, k in enumerate(names)) + ")/2"
    lo = float(params.get("lo", -1.0))
    hi = float(params.get("hi", 1.0))
    texts = [f"u{i + 1}" for i in range(n)] + [f]
    return SurfaceDef.from_expressions(texts, n, [(lo, hi)] * n, coeffs, "paraboloid")


_CATALOG = {
    "sphere": _sphere,
    "ellipsoid": _ellipsoid,
    "torus": _torus,
    "graph": _graph,
    "paraboloid": _paraboloid,
}


def catalog(name: str, params: dict | None = None, **kwargs) -> SurfaceDef:
    """Built-in surface by name.

    >>> catalog("sphere", r=1, n=2).n
    2
    """
    if name not in _CATALOG:
        raise UnknownSurface(f"unknown surface {name!r}; known: {', '.join(sorted(_CATALOG))}")
    merged = dict(params or {})
    merged.update(kwargs)
    return _CATALOG[name](merged)


def catalog_names() -> list[str]:
    return sorted(_CATALOG)
