"""Truncated multivariate Taylor jets for exact forward-mode differentiation.

A :class:`Jet` stores the Taylor coefficients of an array-valued function
around a point, for every monomial of total degree ``<= order`` in ``nvars``
variables.  Arithmetic is done by the product rule on the coefficient
arrays, so partial derivatives come out exact up to floating point rounding.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


def _monomials(nvars: int, order: int) -> list[tuple[int, ...]]:
    monos = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), deg):
            alpha = [0] * nvars
            for i in combo:
                alpha[i] += 1
            monos.append(tuple(alpha))
    return monos


class Basis:
    """Monomial index tables for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError("a jet needs at least one variable")
        if order < 0:
            raise ValueError("jet order must be non-negative")
        self.nvars = nvars
        self.order = order
        self.monos = _monomials(nvars, order)
        self.index = {a: k for k, a in enumerate(self.monos)}
        self.size = len(self.monos)
        self.degrees = np.array([sum(a) for a in self.monos])
        self.factorials = np.array(
            [math.prod(math.factorial(e) for e in a) for a in self.monos], dtype=float
        )

        ga, gb, gc = [], [], []
        for ia, a in enumerate(self.monos):
            for ib, b in enumerate(self.monos):
                c = tuple(x + y for x, y in zip(a, b))
                ic = self.index.get(c)
                if ic is not None:
                    ga.append(ia)
                    gb.append(ib)
                    gc.append(ic)
        self.pair_a = np.array(ga)
        self.pair_b = np.array(gb)
        # scatter matrix: out[c] = sum over pairs landing on c
        scatter = np.zeros((self.size, len(gc)))
        scatter[gc, np.arange(len(gc))] = 1.0
        self.scatter = scatter

    def __repr__(self) -> str:
        return f"Basis(nvars={self.nvars}, order={self.order})"

    @property
    def lower(self) -> "Basis":
        return basis(self.nvars, self.order - 1)

    @property
    def truncation(self) -> np.ndarray:
        """Indices in this basis of the monomials of ``self.lower``."""
        return _truncation(self.nvars, self.order)

    def derivative_table(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        return _derivative_table(self.nvars, self.order, var)

    def embedding(self, nvars: int, offset: int) -> np.ndarray:
        return _embedding(self.nvars, self.order, nvars, offset)


@lru_cache(maxsize=None)
def basis(nvars: int, order: int) -> Basis:
    return Basis(nvars, order)


@lru_cache(maxsize=None)
def _truncation(nvars: int, order: int) -> np.ndarray:
    hi = basis(nvars, order)
    lo = basis(nvars, order - 1)
    return np.array([hi.index[a] for a in lo.monos])


@lru_cache(maxsize=None)
def _derivative_table(nvars: int, order: int, var: int) -> tuple[np.ndarray, np.ndarray]:
    # d/dx_var of coefficient at alpha + e_var lands on alpha with factor alpha_var + 1
    hi = basis(nvars, order)
    lo = basis(nvars, order - 1)
    src, fac = [], []
    for a in lo.monos:
        b = list(a)
        b[var] += 1
        src.append(hi.index[tuple(b)])
        fac.append(a[var] + 1)
    return np.array(src), np.array(fac, dtype=float)


@lru_cache(maxsize=None)
def _embedding(nvars: int, order: int, new_nvars: int, offset: int) -> np.ndarray:
    src = basis(nvars, order)
    dst = basis(new_nvars, order)
    out = []
    for a in src.monos:
        full = [0] * new_nvars
        full[offset : offset + nvars] = a
        out.append(dst.index[tuple(full)])
    return np.array(out)


class Jet:
    """Taylor coefficients ``coef[k, ...]`` of an array-valued function.

    ``coef[k]`` multiplies ``(x - p)**alpha_k``; partial derivatives are
    recovered as ``alpha! * coef[k]``.
    """

    __array_priority__ = 100

    def __init__(self, b: Basis, coef: np.ndarray):
        self.basis = b
        self.coef = np.asarray(coef, dtype=float)
        if self.coef.shape[0] != b.size:
            raise ValueError("coefficient array does not match basis size")

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, b: Basis, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        coef = np.zeros((b.size,) + value.shape)
        coef[0] = value
        return cls(b, coef)

    @classmethod
    def variable(cls, b: Basis, var: int, value: float) -> "Jet":
        coef = np.zeros(b.size)
        coef[0] = value
        if b.order >= 1:
            e = [0] * b.nvars
            e[var] = 1
            coef[b.index[tuple(e)]] = 1.0
        return cls(b, coef)

    # basic properties ---------------------------------------------------
    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coef.shape[1:]

    @property
    def ndim(self) -> int:
        return self.coef.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.coef[0]

    def partial(self, multi: Sequence[int]) -> np.ndarray:
        """Partial derivative along the variables listed in ``multi``.

        ``partial((0, 1))`` is d^2/dx0 dx1 at the expansion point.
        """
        alpha = [0] * self.nvars
        for i in multi:
            alpha[i] += 1
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise ValueError(f"jet of order {self.order} has no derivative of degree {sum(alpha)}")
        k = self.basis.index[alpha]
        return self.coef[k] * self.basis.factorials[k]

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, nvars={self.nvars}, shape={self.shape})"

    # order management ---------------------------------------------------
    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise the order of a jet")
        j = self
        while j.order > order:
            j = Jet(j.basis.lower, j.coef[j.basis.truncation])
        return j

    def embed(self, nvars: int, offset: int = 0) -> "Jet":
        """View this jet as a function of ``nvars`` variables (pullback by projection)."""
        if nvars == self.nvars and offset == 0:
            return self
        dst = basis(nvars, self.order)
        coef = np.zeros((dst.size,) + self.shape)
        coef[self.basis.embedding(nvars, offset)] = self.coef
        return Jet(dst, coef)

    def d(self, var: int) -> "Jet":
        """Partial derivative along variable ``var``, as a jet of one order less."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = self.basis.derivative_table(var)
        fac = fac.reshape((-1,) + (1,) * self.ndim)
        return Jet(self.basis.lower, self.coef[src] * fac)

    def grad(self) -> "Jet":
        """All first partials stacked on a new trailing axis."""
        parts = [self.d(i).coef for i in range(self.nvars)]
        return Jet(self.basis.lower, np.stack(parts, axis=-1))

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(self.basis, other)

    def _align(self, other) -> tuple["Jet", "Jet"]:
        other = self._coerce(other)
        if other.nvars != self.nvars:
            raise ValueError("jets live on charts of different dimension")
        if other.order == self.order:
            return self, other
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def _pad(self, ndim: int) -> np.ndarray:
        # left-pad value dims so numpy broadcasting lines up on the value axes
        c = self.coef
        extra = ndim - self.ndim
        if extra > 0:
            c = c.reshape((c.shape[0],) + (1,) * extra + c.shape[1:])
        return c

    def __add__(self, other):
        a, b = self._align(other)
        nd = max(a.ndim, b.ndim)
        return Jet(a.basis, a._pad(nd) + b._pad(nd))

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.basis, -self.coef)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.basis, self.coef * np.asarray(other, dtype=float))
        a, b = self._align(other)
        nd = max(a.ndim, b.ndim)
        return bilinear(a, b, lambda x, y: x * y, pad=nd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.basis, self.coef / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __matmul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.basis, _matmul(self.coef, other[None], self.ndim, other.ndim))
        a, b = self._align(other)
        return bilinear(a, b, lambda x, y: _matmul(x, y, a.ndim, b.ndim))

    def __rmatmul__(self, other):
        other = np.asarray(other, dtype=float)
        return Jet(self.basis, _matmul(other[None], self.coef, other.ndim, self.ndim))

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("only integer powers are supported")
        if n < 0:
            return (self ** (-n)).reciprocal()
        out = Jet.constant(self.basis, np.ones(self.shape))
        for _ in range(n):
            out = out * self
        return out

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.basis, self.coef[(slice(None),) + idx])

    # array-shape helpers --------------------------------------------------
    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.basis, self.coef.reshape((self.basis.size,) + tuple(shape)))

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], tuple):
            axes = axes[0]
        return Jet(self.basis, self.coef.transpose((0,) + tuple(a + 1 for a in axes)))

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def swapaxes(self, a: int, b: int) -> "Jet":
        a = a % self.ndim
        b = b % self.ndim
        return Jet(self.basis, self.coef.swapaxes(a + 1, b + 1))

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis,)
        axis = tuple(a % self.ndim + 1 for a in axis)
        return Jet(self.basis, self.coef.sum(axis=axis))

    # nonlinear functions ------------------------------------------------
    def compose(self, derivs: Sequence[np.ndarray]) -> "Jet":
        """Apply an elementwise function given its derivatives at the base value.

        ``derivs[k]`` is the k-th derivative of the function evaluated at
        ``self.value``; at least ``order + 1`` entries are needed.
        """
        delta = Jet(self.basis, self.coef.copy())
        delta.coef[0] = 0.0
        out = Jet.constant(self.basis, derivs[0])
        power = None
        for k in range(1, self.order + 1):
            power = delta if power is None else power * delta
            out = out + power * (np.asarray(derivs[k]) / math.factorial(k))
        return out

    def reciprocal(self) -> "Jet":
        v = self.value
        if np.any(v == 0):
            raise ZeroDivisionError("jet reciprocal at a zero value")
        derivs = [(-1) ** k * math.factorial(k) / v ** (k + 1) for k in range(self.order + 1)]
        return self.compose(derivs)

    def sqrt(self) -> "Jet":
        v = self.value
        derivs = []
        c = 1.0
        for k in range(self.order + 1):
            derivs.append(c * v ** (0.5 - k))
            c *= 0.5 - k
        return self.compose(derivs)

    def sin(self) -> "Jet":
        v = self.value
        cyc = [np.sin(v), np.cos(v), -np.sin(v), -np.cos(v)]
        return self.compose([cyc[k % 4] for k in range(self.order + 1)])

    def cos(self) -> "Jet":
        v = self.value
        cyc = [np.cos(v), -np.sin(v), -np.cos(v), np.sin(v)]
        return self.compose([cyc[k % 4] for k in range(self.order + 1)])

    def inv(self) -> "Jet":
        """Matrix inverse over the last two axes (Neumann series in the nilpotent part)."""
        a0 = self.value
        a0inv = np.linalg.inv(a0)
        delta = Jet(self.basis, self.coef.copy())
        delta.coef[0] = 0.0
        step = Jet.constant(self.basis, -a0inv) @ delta
        out = Jet.constant(self.basis, a0inv)
        term = out
        for _ in range(self.order):
            term = step @ term
            out = out + term
        return out


def _matmul(x: np.ndarray, y: np.ndarray, ndx: int, ndy: int) -> np.ndarray:
    # leading axis of x and y is the monomial / pair axis
    if ndy == 1:
        return np.matmul(x, y[..., None])[..., 0]
    if ndx == 1:
        return np.matmul(x[..., None, :], y)[..., 0, :]
    return np.matmul(x, y)


def bilinear(a: Jet, b: Jet, op: Callable, pad: int | None = None) -> Jet:
    """Cauchy product of two jets under a bilinear value operation ``op``."""
    bs = a.basis
    ca = a._pad(pad) if pad is not None else a.coef
    cb = b._pad(pad) if pad is not None else b.coef
    prod = op(ca[bs.pair_a], cb[bs.pair_b])
    flat = prod.reshape(prod.shape[0], -1)
    out = (bs.scatter @ flat).reshape((bs.size,) + prod.shape[1:])
    return Jet(bs, out)


def einsum(subscripts: str, a: Jet, b) -> Jet:
    """``np.einsum`` for two operands, lifted to jets by the product rule."""
    if not isinstance(b, Jet):
        lhs, rhs = subscripts.split("->")
        sa, sb = lhs.split(",")
        return Jet(a.basis, np.einsum(f"Z{sa},{sb}->Z{rhs}", a.coef, np.asarray(b, dtype=float)))
    a, b = a._align(b)
    lhs, rhs = subscripts.split("->")
    sa, sb = lhs.split(",")
    spec = f"Z{sa},Z{sb}->Z{rhs}"
    return bilinear(a, b, lambda x, y: np.einsum(spec, x, y))


def stack(items: Sequence, axis: int = 0, like: Jet | None = None) -> Jet:
    """Stack jets (or constants) along a new value axis."""
    ref = like
    for it in items:
        if isinstance(it, Jet):
            ref = it if ref is None or it.order < ref.order else ref
    if ref is None:
        raise ValueError("stack needs at least one jet to fix the basis")
    k = ref.order
    coefs = []
    for it in items:
        j = it.truncate(k) if isinstance(it, Jet) else Jet.constant(basis(ref.nvars, k), it)
        coefs.append(j.coef)
    axis = axis % (coefs[0].ndim) if axis < 0 else axis
    return Jet(basis(ref.nvars, k), np.stack(coefs, axis=axis + 1))


def array(nested, like: Jet) -> Jet:
    """Build an array-valued jet from a nested list of jets and numbers."""
    if isinstance(nested, Jet):
        return nested
    if isinstance(nested, (list, tuple)):
        return stack([array(x, like) for x in nested], like=like)
    return Jet.constant(basis(like.nvars, like.order), nested)


def concatenate(items: Sequence[Jet], axis: int = 0) -> Jet:
    k = min(it.order for it in items)
    items = [it.truncate(k) for it in items]
    return Jet(items[0].basis, np.concatenate([it.coef for it in items], axis=axis % items[0].ndim + 1))


def block(rows: Sequence[Sequence[Jet]]) -> Jet:
    """2-D block matrix assembly over the last two value axes."""
    return concatenate([concatenate(list(r), axis=-1) for r in rows], axis=-2)


def coordinates(point: Sequence[float], order: int) -> list[Jet]:
    """Seed jets for the coordinate functions at ``point``."""
    b = basis(len(point), order)
    return [Jet.variable(b, i, float(v)) for i, v in enumerate(point)]
