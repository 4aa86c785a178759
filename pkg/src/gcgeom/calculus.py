"""Exact calculus on coordinate charts: fields, forms, d, Lie brackets.

Every field is a closed-form rule that can be evaluated as a jet at a point.
Differential operators (``d``, Lie bracket, Lie derivative) are again fields:
they request one extra jet order from their inputs, so they can be nested.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from . import jets
from .jets import Jet

MAX_ORDER = 3


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    """Axis-aligned coordinate box, optionally with a ball around the origin removed."""

    dim: int
    lower: tuple[float, ...] = ()
    upper: tuple[float, ...] = ()
    excluded_radius: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ChartError("chart dimension must be positive")
        if not self.lower:
            object.__setattr__(self, "lower", (-1.0,) * self.dim)
        if not self.upper:
            object.__setattr__(self, "upper", (1.0,) * self.dim)
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ChartError("box bounds do not match chart dimension")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ChartError("chart box must have positive volume")

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            return False
        if np.any(p < np.array(self.lower)) or np.any(p > np.array(self.upper)):
            return False
        return bool(np.linalg.norm(p) > self.excluded_radius) or self.excluded_radius == 0.0

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = np.array(self.lower), np.array(self.upper)
        out = []
        while len(out) < count:
            p = lo + (hi - lo) * rng.random(self.dim)
            if self.excluded_radius and np.linalg.norm(p) <= self.excluded_radius:
                continue
            out.append(p)
        return np.array(out)


class Field:
    """A smooth array-valued map on a chart, evaluable as a jet.

    Subclasses implement :meth:`_jet`.  Results are memoised per
    ``(point, order)``; fields are otherwise immutable.
    """

    _CACHE_LIMIT = 2048

    def __init__(self, dim: int, shape: tuple[int, ...]):
        self.dim = dim
        self.shape = tuple(shape)
        self._cache: dict = {}

    def _jet(self, p: tuple[float, ...], order: int) -> Jet:
        raise NotImplementedError

    def jet(self, p, order: int = 0) -> Jet:
        key = (tuple(float(v) for v in p), order)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if len(key[0]) != self.dim:
            raise ChartError(f"point has {len(key[0])} coordinates, chart has {self.dim}")
        out = self._jet(key[0], order)
        if out.shape != self.shape:
            raise ValueError(f"{type(self).__name__} produced shape {out.shape}, expected {self.shape}")
        if len(self._cache) >= self._CACHE_LIMIT:
            self._cache.clear()
        self._cache[key] = out
        return out

    def __call__(self, p) -> np.ndarray:
        return self.jet(p, 0).value

    # algebra builds pointwise map fields
    def _binary(self, other, op, shape=None):
        if not isinstance(other, Field):
            other = ConstantField(self.dim, other)
        if other.dim != self.dim:
            raise ChartError("fields live on charts of different dimension")
        if shape is None:
            shape = np.broadcast_shapes(self.shape, other.shape)
        return MapField(op, [self, other], shape)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __neg__(self):
        return MapField(lambda a: -a, [self], self.shape)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, lambda a, b: a / b)

    def __matmul__(self, other):
        if not isinstance(other, Field):
            other = ConstantField(self.dim, other)
        shape = np.matmul(np.zeros(self.shape), np.zeros(other.shape)).shape
        return MapField(lambda a, b: a @ b, [self, other], shape)

    def __rmatmul__(self, other):
        other = ConstantField(self.dim, other)
        return other @ self

    def __getitem__(self, idx):
        shape = np.zeros(self.shape)[idx].shape
        return MapField(lambda a: a[idx], [self], shape)

    @property
    def T(self):
        return MapField(lambda a: a.T, [self], tuple(reversed(self.shape)))


class FormulaField(Field):
    """Field given by a rule ``fn(x)`` acting on coordinate jets.

    ``fn`` receives the list of coordinate jets and returns a jet, a number,
    or a nested list of those (assembled with :func:`jets.array`).
    """

    def __init__(self, dim: int, fn: Callable, shape: tuple[int, ...] = ()):
        super().__init__(dim, shape)
        self.fn = fn

    def _jet(self, p, order):
        x = jets.coordinates(p, order)
        out = self.fn(x)
        if not isinstance(out, Jet):
            out = jets.array(out, x[0])
        if out.order > order:
            out = out.truncate(order)
        return out


class ConstantField(Field):
    def __init__(self, dim: int, value):
        value = np.asarray(value, dtype=float)
        super().__init__(dim, value.shape)
        self.value = value

    def _jet(self, p, order):
        return Jet.constant(jets.basis(self.dim, order), self.value)


class MapField(Field):
    """Pointwise algebraic combination of other fields (no derivatives taken)."""

    def __init__(self, fn: Callable, sources: Sequence[Field], shape: tuple[int, ...]):
        dims = {s.dim for s in sources}
        if len(dims) != 1:
            raise ChartError("map field sources live on different charts")
        super().__init__(dims.pop(), shape)
        self.fn = fn
        self.sources = list(sources)

    def _jet(self, p, order):
        out = self.fn(*[s.jet(p, order) for s in self.sources])
        if not isinstance(out, Jet):
            out = Jet.constant(jets.basis(self.dim, order), out)
        return out


class DerivedField(Field):
    """Field whose rule needs ``extra`` more derivatives of its sources."""

    def __init__(self, fn: Callable, sources: Sequence[Field], shape: tuple[int, ...], extra: int = 1):
        dims = {s.dim for s in sources}
        if len(dims) != 1:
            raise ChartError("derived field sources live on different charts")
        super().__init__(dims.pop(), shape)
        self.fn = fn
        self.sources = list(sources)
        self.extra = extra

    def _jet(self, p, order):
        out = self.fn(*[s.jet(p, order + self.extra) for s in self.sources])
        return out.truncate(order)


class PullbackField(Field):
    """Pull a field on ``base`` coordinates back along a projection of a bigger chart."""

    def __init__(self, base: Field, dim: int, offset: int = 0):
        super().__init__(dim, base.shape)
        self.base = base
        self.offset = offset

    def _jet(self, p, order):
        sub = p[self.offset : self.offset + self.base.dim]
        return self.base.jet(sub, order).embed(self.dim, self.offset)


def field_of(dim: int, fn: Callable, shape: tuple[int, ...] = ()) -> FormulaField:
    return FormulaField(dim, fn, shape)


def eval_jet(f: Field, p, order: int = 0, chart: Chart | None = None) -> Jet:
    """Value and all partials of ``f`` at ``p`` up to ``order`` (at most 3)."""
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"jet order must be between 0 and {MAX_ORDER}")
    if chart is not None and not chart.contains(p):
        raise ChartError(f"point {tuple(p)} is outside chart {chart.label or chart}")
    return f.jet(p, order)


# ---------------------------------------------------------------------------
# antisymmetric tensors

@dataclass(frozen=True)
class _AltTables:
    tuples: tuple
    perms: tuple
    signs: tuple


def _perm_sign(perm: Sequence[int]) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def increasing_tuples(m: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(m), k))


def antisymmetrize(t: Jet, axes: Sequence[int] | None = None) -> Jet:
    """Average of signed permutations over the given value axes (default: all)."""
    nd = t.ndim
    if axes is None:
        axes = list(range(nd))
    axes = [a % nd for a in axes]
    k = len(axes)
    if k < 2:
        return t
    acc = None
    for perm in itertools.permutations(range(k)):
        order = list(range(nd))
        for src, dst in zip(axes, [axes[q] for q in perm]):
            order[src] = dst
        term = t.transpose(tuple(order)) * float(_perm_sign(perm))
        acc = term if acc is None else acc + term
    return acc * (1.0 / math.factorial(k))


def compress(t: Jet, k: int) -> Jet:
    """Components of a full antisymmetric k-tensor on increasing index tuples."""
    if k == 0:
        return t.reshape(1)
    m = t.shape[0]
    idx = increasing_tuples(m, k)
    cols = tuple(np.array([tup[a] for tup in idx]) for a in range(k))
    return Jet(t.basis, t.coef[(slice(None),) + cols])


def expand(c: Jet, m: int, k: int) -> Jet:
    """Full antisymmetric tensor from components on increasing tuples."""
    if k == 0:
        return c.reshape(())
    out = np.zeros((c.basis.size,) + (m,) * k)
    for n, tup in enumerate(increasing_tuples(m, k)):
        for perm in itertools.permutations(range(k)):
            out[(slice(None),) + tuple(tup[q] for q in perm)] = _perm_sign(perm) * c.coef[:, n]
    return Jet(c.basis, out)


class KForm:
    """A differential k-form stored on strictly increasing index tuples."""

    def __init__(self, degree: int, components: Field):
        m = components.dim
        if degree < 0 or degree > m:
            raise ValueError(f"degree {degree} form cannot live on a {m}-dimensional chart")
        if components.shape != (math.comb(m, degree),):
            raise ValueError("component field has the wrong length for this degree")
        self.degree = degree
        self.dim = m
        self.components = components

    @classmethod
    def from_tensor(cls, degree: int, tensor: Field) -> "KForm":
        """Wrap a field whose values are full antisymmetric tensors of rank ``degree``."""
        m = tensor.dim
        comps = MapField(lambda t: compress(t, degree), [tensor], (math.comb(m, degree),))
        return cls(degree, comps)

    @classmethod
    def from_dict(cls, dim: int, degree: int, entries: dict) -> "KForm":
        """Build from ``{(i, j, ...): coefficient}`` with increasing tuples.

        Coefficients are numbers or rules ``fn(x)`` on coordinate jets.
        """
        tuples = increasing_tuples(dim, degree)
        for key in entries:
            if tuple(key) not in tuples:
                raise ValueError(f"index tuple {key} is not strictly increasing in range")
        def rule(x):
            out = []
            for tup in tuples:
                c = entries.get(tup, 0.0)
                out.append(c(x) if callable(c) else c)
            return out
        return cls(degree, FormulaField(dim, rule, (len(tuples),)))

    @classmethod
    def zero(cls, dim: int, degree: int) -> "KForm":
        return cls(degree, ConstantField(dim, np.zeros(math.comb(dim, degree))))

    def tensor_jet(self, p, order: int = 0) -> Jet:
        return expand(self.components.jet(p, order), self.dim, self.degree)

    def tensor_field(self) -> Field:
        m, k = self.dim, self.degree
        return MapField(lambda c: expand(c, m, k), [self.components], (m,) * k)

    def __repr__(self) -> str:
        return f"KForm(degree={self.degree}, dim={self.dim})"

    def __call__(self, p) -> np.ndarray:
        return self.tensor_jet(p, 0).value

    def __add__(self, other: "KForm") -> "KForm":
        _same(self, other)
        return KForm(self.degree, self.components + other.components)

    def __sub__(self, other: "KForm") -> "KForm":
        _same(self, other)
        return KForm(self.degree, self.components - other.components)

    def __neg__(self) -> "KForm":
        return KForm(self.degree, -self.components)

    def scale(self, f) -> "KForm":
        """Multiply by a scalar field or number."""
        if isinstance(f, Field):
            return KForm(self.degree, MapField(lambda a, c: c * a, [f, self.components], self.components.shape))
        return KForm(self.degree, self.components * float(f))


def _same(a: KForm, b: KForm):
    if a.dim != b.dim or a.degree != b.degree:
        raise ValueError("forms differ in chart dimension or degree")


def _vector_check(X: Field, dim: int):
    if X.shape != (dim,):
        raise ValueError(f"expected a vector field of shape ({dim},), got {X.shape}")
    if X.dim != dim:
        raise ChartError("vector field lives on a different chart")


# jet-level kernels -----------------------------------------------------------

def d_tensor(w: Jet, k: int) -> Jet:
    """Exterior derivative of a full antisymmetric k-tensor jet (loses one order)."""
    g = w.grad()  # last axis is the derivative direction
    nd = g.ndim
    moved = g.transpose((nd - 1,) + tuple(range(nd - 1)))
    return antisymmetrize(moved) * float(k + 1)


def interior_tensor(X: Jet, w: Jet) -> Jet:
    k = w.ndim
    letters = "abcdefgh"[:k]
    return jets.einsum(f"a,{letters}->{letters[1:]}", X, w)


def wedge_tensor(a: Jet, b: Jet) -> Jet:
    k, l = a.ndim, b.ndim
    la, lb = "abcdef"[:k], "ghijkl"[:l]
    if k == 0 or l == 0:
        return a * b
    prod = jets.einsum(f"{la},{lb}->{la}{lb}", a, b)
    return antisymmetrize(prod) * (math.factorial(k + l) / (math.factorial(k) * math.factorial(l)))


def lie_bracket_jet(X: Jet, Y: Jet) -> Jet:
    """[X,Y]^i = X^j d_j Y^i - Y^j d_j X^i (inputs one order higher than output)."""
    return jets.einsum("ij,j->i", Y.grad(), X) - jets.einsum("ij,j->i", X.grad(), Y)


# public operations -----------------------------------------------------------

def exterior_derivative(w: KForm) -> KForm:
    if w.degree >= w.dim:
        raise ValueError("exterior derivative of a top-degree form is not supported")
    m, k = w.dim, w.degree
    full = DerivedField(lambda c: d_tensor(expand(c, m, k), k), [w.components], (m,) * (k + 1))
    return KForm.from_tensor(k + 1, full)


def function_form(f: Field) -> KForm:
    if f.shape != ():
        raise ValueError("a 0-form needs a scalar field")
    return KForm(0, MapField(lambda a: a.reshape(1), [f], (1,)))


def interior_product(X: Field, w: KForm) -> KForm:
    if w.degree == 0:
        raise ValueError("interior product of a 0-form is not defined")
    _vector_check(X, w.dim)
    m, k = w.dim, w.degree
    full = MapField(lambda x, c: interior_tensor(x, expand(c, m, k)), [X, w.components], (m,) * (k - 1))
    return KForm.from_tensor(k - 1, full)


def wedge(a: KForm, b: KForm) -> KForm:
    if a.dim != b.dim:
        raise ChartError("forms on different charts")
    m = a.dim
    k = a.degree + b.degree
    if k > m:
        raise ValueError(f"wedge product of degree {k} exceeds chart dimension {m}")
    ka, kb = a.degree, b.degree

    def rule(ca, cb):
        ta = expand(ca, m, ka)
        tb = expand(cb, m, kb)
        return wedge_tensor(ta, tb)

    full = MapField(rule, [a.components, b.components], (m,) * k)
    return KForm.from_tensor(k, full)


def lie_bracket(X: Field, Y: Field) -> Field:
    if X.dim != Y.dim:
        raise ChartError("vector fields on different charts")
    _vector_check(X, X.dim)
    _vector_check(Y, X.dim)
    return DerivedField(lie_bracket_jet, [X, Y], (X.dim,))


def lie_derivative_form(X: Field, w: KForm) -> KForm:
    """L_X w via the Cartan formula d i_X w + i_X d w."""
    _vector_check(X, w.dim)
    parts = []
    if w.degree > 0:
        parts.append(exterior_derivative(interior_product(X, w)))
    if w.degree < w.dim:
        parts.append(interior_product(X, exterior_derivative(w)))
    if not parts:
        raise ValueError("empty Lie derivative")
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def vector_field(dim: int, fn: Callable) -> FormulaField:
    return FormulaField(dim, fn, (dim,))


def scalar_field(dim: int, fn: Callable) -> FormulaField:
    return FormulaField(dim, fn, ())


def covector_form(covector: Field) -> KForm:
    """A 1-form from a covector field of shape (m,)."""
    return KForm(1, covector)


def _monomials(dim: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            out.append(combo)
    return out


class PolynomialField(Field):
    """Array-valued polynomial with coefficient array ``coef[n, *shape]`` on a monomial list."""

    def __init__(self, dim: int, monomials: Sequence[tuple[int, ...]], coef: np.ndarray):
        coef = np.asarray(coef, dtype=float)
        super().__init__(dim, coef.shape[1:])
        self.monomials = [tuple(m) for m in monomials]
        self.coef = coef

    def _jet(self, p, order):
        x = jets.coordinates(p, order)
        b = jets.basis(self.dim, order)
        acc = Jet.constant(b, np.zeros(self.shape))
        for mono, c in zip(self.monomials, self.coef):
            term = Jet.constant(b, 1.0)
            for var in mono:
                term = term * x[var]
            acc = acc + term * Jet.constant(b, c)
        return acc


def random_polynomial_field(dim: int, shape: tuple[int, ...], rng: np.random.Generator,
                            degree: int = 2, scale: float = 1.0) -> PolynomialField:
    monos = _monomials(dim, degree)
    coef = scale * rng.standard_normal((len(monos),) + tuple(shape))
    return PolynomialField(dim, monos, coef)


def random_form(dim: int, degree: int, rng: np.random.Generator, poly_degree: int = 2) -> KForm:
    comps = random_polynomial_field(dim, (math.comb(dim, degree),), rng, poly_degree)
    return KForm(degree, comps)


def coordinate_lie_derivative(X: Field, w: KForm, p) -> np.ndarray:
    """(L_X w)_I = X^j d_j w_I + sum over slots of w with d X inserted, as a full tensor at p."""
    _vector_check(X, w.dim)
    k = w.degree
    T = w.tensor_field().jet(p, 1)
    Xj = X.jet(p, 1)
    dT = T.grad().value  # [..., j]
    dX = Xj.grad().value  # [i, a] = d_a X^i
    out = np.tensordot(dT, Xj.value, axes=([k], [0]))
    for slot in range(k):
        moved = np.moveaxis(T.value, slot, -1) @ dX  # contract slot with X^i, new index a last
        out = out + np.moveaxis(moved, -1, slot)
    return out
