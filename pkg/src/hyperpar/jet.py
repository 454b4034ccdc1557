"""Truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet` carries, for a tensor-valued field of ``n_vars`` chart
variables, all Taylor coefficients ``d^a f / a!`` with ``|a| <= order`` at a
batch of expansion points.  Coefficients live in a dense array of shape
``(*shape, n_coeffs, batch)``: leading axes index the tensor, the
second-to-last axis runs over multi-indices in graded-lexicographic order,
and the last axis runs over chart points.  Because truncating to a lower
order is a prefix slice of the coefficient axis, differentiation simply
lowers the order by one and binary operations on jets of unequal order
truncate to the smaller one.

Every operation is vectorised over tensor components and chart points, so a
3x3 matrix product of jets is a single convolution, not 27.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import DivisionByZeroValue, DomainError, InvalidVariable, OrderExceeded

DEFAULT_ORDER = 6
DIVISION_TINY = 1e-300


@lru_cache(maxsize=None)
def multi_indices(n_vars: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with ``|a| <= order``, graded, lex-descending per degree."""

    def compositions(total, k):
        if k == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in compositions(total - first, k - 1):
                yield (first,) + rest

    return tuple(a for d in range(order + 1) for a in compositions(d, n_vars))


def n_coeffs(n_vars: int, order: int) -> int:
    return math.comb(n_vars + order, order)


@lru_cache(maxsize=None)
def _index(n_vars, order):
    return {a: i for i, a in enumerate(multi_indices(n_vars, order))}


@lru_cache(maxsize=None)
def _product_table(n_vars, order):
    # pairs (left, right) contributing to each output coefficient, grouped by output
    idx = _index(n_vars, order)
    left, right, starts = [], [], []
    for alpha in multi_indices(n_vars, order):
        starts.append(len(left))
        for beta in itertools.product(*(range(a + 1) for a in alpha)):
            left.append(idx[beta])
            right.append(idx[tuple(a - b for a, b in zip(alpha, beta))])
    return np.array(left), np.array(right), np.array(starts)


@lru_cache(maxsize=None)
def _diff_table(n_vars, order, var):
    idx = _index(n_vars, order)
    src, fac = [], []
    for beta in multi_indices(n_vars, order - 1):
        up = list(beta)
        up[var] += 1
        src.append(idx[tuple(up)])
        fac.append(float(up[var]))
    return np.array(src, dtype=int), np.array(fac)


def _convolve(a, b, n_vars, order, subscripts=None):
    left, right, starts = _product_table(n_vars, order)
    pa = np.take(a, left, axis=-2)
    pb = np.take(b, right, axis=-2)
    prod = pa * pb if subscripts is None else np.einsum(subscripts, pa, pb)
    return np.add.reduceat(prod, starts, axis=prod.ndim - 2)


def as_points(points) -> np.ndarray:
    """Chart points as a ``(batch, n)`` float array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise ValueError(f"chart points must be (n,) or (batch, n), got shape {pts.shape}")
    return pts


class Jet:
    """Tensor-valued truncated Taylor expansion at a batch of chart points."""

    __slots__ = ("c", "n_vars", "order")
    __array_ufunc__ = None  # make ndarray <op> Jet defer to Jet

    def __init__(self, c, n_vars: int, order: int):
        c = np.asarray(c, dtype=float)
        if order < 0:
            raise OrderExceeded(f"negative jet order {order}")
        if c.ndim < 2 or c.shape[-2] != n_coeffs(n_vars, order):
            raise ValueError(
                f"coefficient array of shape {c.shape} does not fit n_vars={n_vars}, order={order}"
            )
        self.c = c
        self.n_vars = n_vars
        self.order = order

    # construction

    @classmethod
    def constant(cls, value, n_vars: int, order: int) -> Jet:
        """Constant jet; ``value`` is a scalar or an array shaped ``(*shape, batch)``."""
        value = np.asarray(value, dtype=float)
        if value.ndim == 0:
            value = value.reshape(1)
        c = np.zeros(value.shape[:-1] + (n_coeffs(n_vars, order), value.shape[-1]))
        c[..., 0, :] = value
        return cls(c, n_vars, order)

    @classmethod
    def variable(cls, index: int, points, order: int) -> Jet:
        pts = as_points(points)
        n_vars = pts.shape[1]
        if not 0 <= index < n_vars:
            raise InvalidVariable(f"variable index {index} out of range for {n_vars} chart variables")
        c = np.zeros((n_coeffs(n_vars, order), pts.shape[0]))
        c[0] = pts[:, index]
        if order >= 1:
            unit = tuple(int(k == index) for k in range(n_vars))
            c[_index(n_vars, order)[unit]] = 1.0
        return cls(c, n_vars, order)

    # shape and access

    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-2]

    @property
    def batch(self) -> int:
        return self.c.shape[-1]

    @property
    def value(self) -> np.ndarray:
        """Point values, shape ``(*shape, batch)``."""
        return self.c[..., 0, :]

    @property
    def bvalue(self) -> np.ndarray:
        """Point values with the batch axis first, shape ``(batch, *shape)``."""
        return np.moveaxis(self.c[..., 0, :], -1, 0)

    def coeff(self, alpha) -> np.ndarray:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.n_vars:
            raise ValueError(f"multi-index {alpha} has wrong length for {self.n_vars} variables")
        if sum(alpha) > self.order:
            raise OrderExceeded(f"|{alpha}| exceeds jet order {self.order}")
        return self.c[..., _index(self.n_vars, self.order)[alpha], :]

    def coeffs(self) -> dict[tuple[int, ...], np.ndarray]:
        return {a: self.c[..., i, :] for i, a in enumerate(multi_indices(self.n_vars, self.order))}

    def partial(self, alpha) -> np.ndarray:
        """The true partial derivative ``d^alpha f`` (``alpha!`` times the coefficient)."""
        scale = math.prod(math.factorial(int(a)) for a in alpha)
        return scale * self.coeff(alpha)

    def truncate(self, order: int) -> Jet:
        if order > self.order:
            raise OrderExceeded(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.c[..., : n_coeffs(self.n_vars, order), :], self.n_vars, order)

    def __getitem__(self, key) -> Jet:
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key) or len(key) > len(self.shape):
            raise IndexError(f"invalid tensor index {key!r} for jet of shape {self.shape}")
        return Jet(self.c[key + (slice(None), slice(None))], self.n_vars, self.order)

    def transpose(self, *axes) -> Jet:
        nd = len(self.shape)
        axes = tuple(axes) if axes else tuple(reversed(range(nd)))
        return Jet(np.transpose(self.c, axes + (nd, nd + 1)), self.n_vars, self.order)

    @property
    def T(self) -> Jet:
        return self.transpose()

    def sum(self, axis: int = 0) -> Jet:
        nd = len(self.shape)
        if not -nd <= axis < nd:
            raise ValueError(f"axis {axis} out of range for tensor shape {self.shape}")
        return Jet(self.c.sum(axis=axis % nd), self.n_vars, self.order)

    def __repr__(self):
        return f"Jet(shape={self.shape}, n_vars={self.n_vars}, order={self.order}, batch={self.batch})"

    # differentiation

    def d(self, var: int) -> Jet:
        """Partial derivative in chart variable ``var``; the order drops by one."""
        if not 0 <= var < self.n_vars:
            raise InvalidVariable(f"variable index {var} out of range for {self.n_vars} chart variables")
        if self.order == 0:
            raise OrderExceeded("cannot differentiate an order-0 jet")
        src, fac = _diff_table(self.n_vars, self.order, var)
        return Jet(np.take(self.c, src, axis=-2) * fac[:, None], self.n_vars, self.order - 1)

    def grad(self) -> Jet:
        """All first partials stacked on a new leading axis: shape ``(n_vars, *shape)``."""
        return stack([self.d(i) for i in range(self.n_vars)])

    # arithmetic

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.n_vars != self.n_vars:
                raise ValueError(f"jets over {self.n_vars} and {other.n_vars} variables cannot be combined")
            order = min(self.order, other.order)
            return self.truncate(order).c, other.truncate(order).c, order
        return self.c, Jet.constant(other, self.n_vars, self.order).c, self.order

    def __add__(self, other):
        a, b, order = self._coerce(other)
        return Jet(a + b, self.n_vars, order)

    __radd__ = __add__

    def __sub__(self, other):
        a, b, order = self._coerce(other)
        return Jet(a - b, self.n_vars, order)

    def __rsub__(self, other):
        a, b, order = self._coerce(other)
        return Jet(b - a, self.n_vars, order)

    def __neg__(self):
        return Jet(-self.c, self.n_vars, self.order)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if other.ndim == 0:
                return Jet(self.c * other, self.n_vars, self.order)
            return Jet(self.c * other[..., None, :], self.n_vars, self.order)
        a, b, order = self._coerce(other)
        return Jet(_convolve(a, b, self.n_vars, order), self.n_vars, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if np.any(np.abs(other) < DIVISION_TINY):
                raise DivisionByZeroValue("division by a zero constant")
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            return (exponent * self.log()).exp()
        exponent = float(exponent)
        if exponent.is_integer():
            return self.ipow(int(exponent))
        return self.pow(exponent)

    def __rpow__(self, base):
        base = float(base)
        if base <= 0:
            raise DomainError(f"{base} ** jet requires a positive base")
        return (self * math.log(base)).exp()

    # univariate composition

    def _compose(self, series) -> Jet:
        """``f(self)`` given ``series[k] = f^(k)(value) / k!`` for ``k = 0..order``."""
        result = Jet.constant(series[self.order], self.n_vars, self.order)
        if self.order == 0:
            return result
        t = self - self.value
        for k in range(self.order - 1, -1, -1):
            result = result * t + series[k]
        return result

    def reciprocal(self) -> Jet:
        v = self.value
        if np.any(np.abs(v) < DIVISION_TINY):
            raise DivisionByZeroValue("reciprocal of a jet whose value vanishes")
        inv = 1.0 / v
        series = [inv]
        for _ in range(self.order):
            series.append(-series[-1] * inv)
        return self._compose(series)

    def exp(self) -> Jet:
        e = np.exp(self.value)
        return self._compose([e / math.factorial(k) for k in range(self.order + 1)])

    def log(self) -> Jet:
        v = self.value
        if np.any(v <= 0):
            raise DomainError("ln of a non-positive value")
        series = [np.log(v)]
        for k in range(1, self.order + 1):
            series.append((-1.0) ** (k + 1) / (k * v**k))
        return self._compose(series)

    def sin(self) -> Jet:
        v = self.value
        return self._compose([np.sin(v + k * np.pi / 2) / math.factorial(k) for k in range(self.order + 1)])

    def cos(self) -> Jet:
        v = self.value
        return self._compose([np.cos(v + k * np.pi / 2) / math.factorial(k) for k in range(self.order + 1)])

    def tan(self) -> Jet:
        return self.sin() / self.cos()

    def pow(self, r: float) -> Jet:
        """Real power; non-integral exponents need a positive value."""
        r = float(r)
        if r.is_integer():
            return self.ipow(int(r))
        v = self.value
        if np.any(v <= 0):
            raise DomainError(f"non-integral power {r} of a non-positive value")
        series = [v**r]
        for k in range(1, self.order + 1):
            series.append(series[-1] * (r - k + 1) / (k * v))
        return self._compose(series)

    def sqrt(self) -> Jet:
        if np.any(self.value <= 0):
            raise DomainError("sqrt of a non-positive value")
        return self.pow(0.5)

    def ipow(self, k: int) -> Jet:
        if k < 0:
            return self.ipow(-k).reciprocal()
        result = Jet.constant(np.ones(self.value.shape), self.n_vars, self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def abs(self) -> Jet:
        """``|f|`` away from zero crossings, where it is smooth."""
        v = self.value
        if np.any(np.abs(v) < DIVISION_TINY):
            raise DomainError("abs is not differentiable at a zero value")
        return self * np.sign(v)

    def __abs__(self):
        return self.abs()


def lift(value=None, *, var_index: int | None = None, point=None, n_vars: int | None = None,
         order: int = DEFAULT_ORDER) -> Jet:
    """Constant or coordinate-function jet.

    ``lift(5.0, n_vars=2, order=2)`` is the constant 5; ``lift(var_index=0,
    point=(0.3, 0.7), order=2)`` is the coordinate function ``u1`` expanded at
    that point.
    """
    if var_index is not None:
        pts = as_points(point)
        if n_vars is not None and n_vars != pts.shape[1]:
            raise InvalidVariable(f"point has {pts.shape[1]} coordinates, expected {n_vars}")
        return Jet.variable(var_index, pts, order)
    if n_vars is None:
        if point is None:
            raise ValueError("lift of a constant needs n_vars or a point")
        n_vars = as_points(point).shape[1]
    batch = 1 if point is None else as_points(point).shape[0]
    return Jet.constant(np.full(batch, float(value)), n_vars, order)


def stack(jets, axis: int = 0) -> Jet:
    """Stack equally shaped jets along a new tensor axis."""
    jets = list(jets)
    n_vars = jets[0].n_vars
    order = min(j.order for j in jets)
    arrays = [j.truncate(order).c for j in jets]
    target = np.broadcast_shapes(*(a.shape for a in arrays))
    arrays = [np.broadcast_to(a, target) for a in arrays]
    nd = len(target) - 2
    if not -nd - 1 <= axis <= nd:
        raise ValueError(f"stack axis {axis} out of range")
    return Jet(np.stack(arrays, axis=axis % (nd + 1)), n_vars, order)


def einsum(subscripts: str, a: Jet, b: Jet) -> Jet:
    """Tensor contraction of two jets, e.g. ``einsum("ij,jk->ik", A, B)``.

    Subscripts name tensor axes only; the coefficient and batch axes are
    handled implicitly.
    """
    inputs, output = subscripts.replace(" ", "").split("->")
    left, right = inputs.split(",")
    spec = f"{left}...,{right}...->{output}..."
    if not isinstance(a, Jet) or not isinstance(b, Jet):
        raise TypeError("einsum expects two jets; use contract() for constant arrays")
    if a.n_vars != b.n_vars:
        raise ValueError("jets over different chart dimensions")
    order = min(a.order, b.order)
    c = _convolve(a.truncate(order).c, b.truncate(order).c, a.n_vars, order, spec)
    return Jet(c, a.n_vars, order)


def contract(subscripts: str, const: np.ndarray, b: Jet) -> Jet:
    """Contract a point-dependent constant array ``(*shape, batch)`` with a jet."""
    inputs, output = subscripts.replace(" ", "").split("->")
    left, right = inputs.split(",")
    spec = f"{left}...,{right}...->{output}..."
    const = np.asarray(const, dtype=float)[..., None, :]
    return Jet(np.einsum(spec, const, b.c), b.n_vars, b.order)


def matmul(a: Jet, b: Jet) -> Jet:
    return einsum("ij,jk->ik", a, b)


def det(m: Jet) -> Jet:
    """Determinant over the last two tensor axes (Leibniz expansion, small sizes)."""
    *lead, rows, cols = m.shape
    if rows != cols:
        raise ValueError(f"det of a non-square jet matrix {m.shape}")
    if rows == 0:
        return Jet.constant(np.ones(tuple(lead) + (m.batch,)), m.n_vars, m.order)
    if rows == 1:
        return m[(slice(None),) * len(lead) + (0, 0)]
    perms = np.array(list(itertools.permutations(range(rows))))
    signs = np.array([_perm_sign(p) for p in perms], dtype=float)
    lead_ix = (slice(None),) * len(lead)
    factors = [Jet(m.c[lead_ix + (i, perms[:, i])], m.n_vars, m.order) for i in range(rows)]
    prod = factors[0]
    for f in factors[1:]:
        prod = prod * f
    return Jet((prod.c * signs[:, None, None]).sum(axis=len(lead)), m.n_vars, m.order)


def _perm_sign(p) -> int:
    sign, seen = 1, [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def minors(m: Jet) -> Jet:
    """Determinants of all ``(k-1)x(k-1)`` minors: result ``[i, j]`` drops row i, column j."""
    k = m.shape[-1]
    keep = [[r for r in range(k) if r != i] for i in range(k)]
    sub = np.stack(
        [np.stack([m.c[..., keep[i], :, :, :][..., keep[j], :, :] for j in range(k)]) for i in range(k)]
    )
    return det(Jet(sub, m.n_vars, m.order))


def inv(m: Jet) -> Jet:
    """Matrix inverse over the last two tensor axes via the adjugate."""
    k = m.shape[-1]
    cof = minors(m)
    signs = np.array([[(-1.0) ** (i + j) for j in range(k)] for i in range(k)])
    adj = Jet(np.swapaxes(cof.c * signs[:, :, None, None], 0, 1), m.n_vars, m.order)
    return adj * det(m).reciprocal()


def cross(vectors: Jet) -> Jet:
    """Generalised vector product of the rows of an ``(n, n+1)`` jet.

    The result ``N`` satisfies ``<N, w> = det[v_1, ..., v_n, w]`` for every
    ``w``, so ``det[v_1, ..., v_n, N] = |N|^2 > 0``.
    """
    n, dim = vectors.shape
    if dim != n + 1:
        raise ValueError(f"cross product needs n vectors in R^(n+1), got shape {vectors.shape}")
    cols = vectors.T  # (n+1, n): ambient components as rows
    comps = []
    for k in range(dim):
        rows = [r for r in range(dim) if r != k]
        minor = Jet(cols.c[rows], cols.n_vars, cols.order)
        comps.append(det(minor) * (-1.0) ** (k + n))
    return stack(comps)


def dot(a: Jet, b: Jet) -> Jet:
    return einsum("a,a->", a, b)
