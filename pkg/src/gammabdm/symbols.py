"""Symbol algebra of transmission problems: interior and boundary symbols.

Symbols are closed-form evaluables.  A boundary symbol is materialized as a
:class:`~gammabdm.fiber.FiberOperator` only when evaluated on a grid, and
every evaluation accepts a conormal dilation ``mu`` and a weight ``w``:

``evaluate(m', grid, mu, w) = W kappa_mu sigma(m') kappa_mu^{-1} W^{-1}``

with ``W = diag(w, 1)``.  Leaves built from components apply ``mu``
analytically (rescaling their frequency arguments), so pushforwards along
dilation orbits stay exact on the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .fiber import (
    FiberGrid,
    FiberOperator,
    assemble_boundary_symbol,
    kappa_xi,
    multiplication_decomposition,
    transmission_check,
)
from .geometry import BoundaryCospherePoint, CospherePoint, OrbitGeometry

__all__ = [
    "InteriorSymbol",
    "BoundarySymbol",
    "MultiplierBoundary",
    "ComponentBoundary",
    "EmbeddedBoundary",
    "MatrixBoundary",
    "BdMSymbol",
    "compose",
    "adjoint",
    "pushforward",
    "embed_psdo",
    "symbol_norm",
    "compatibility_defect",
    "TransmissionError",
]


class TransmissionError(ValueError):
    """Raised when a symbol fails the transmission parity test."""


# ------------------------------------------------------------------ interior
class InteriorSymbol:
    """Degree-zero function on the cosphere bundle, side-valued on cuts.

    Parameters
    ----------
    func : callable ``CospherePoint -> complex``
    value_at_infinity : complex, optional
        Value at the added point at infinity.
    array_func : callable ``(X, XI, side) -> array``, optional
        Vectorized evaluation on stacked base points and unit covectors.
    """

    def __init__(
        self,
        func: Callable[[CospherePoint], complex],
        value_at_infinity: complex | None = None,
        array_func: Callable | None = None,
        label: str = "",
    ):
        self.func = func
        self.value_at_infinity = value_at_infinity
        self.array_func = array_func
        self.label = label

    def __call__(self, p: CospherePoint) -> complex:
        if p.at_infinity:
            if self.value_at_infinity is None:
                raise ValueError(f"symbol {self.label!r} has no value at infinity")
            return complex(self.value_at_infinity)
        return complex(self.func(p))

    def pair(self, p: CospherePoint) -> tuple[complex, complex]:
        """Values on the ``+`` and ``-`` sides of a cut point."""
        return (
            self(CospherePoint(p.x, p.xi, "+")),
            self(CospherePoint(p.x, p.xi, "-")),
        )

    def eval_many(self, X: np.ndarray, XI: np.ndarray, side: str | None) -> np.ndarray:
        """Evaluate on arrays of base points and covectors (trailing axis ``dim``)."""
        XI = XI / np.linalg.norm(XI, axis=-1, keepdims=True)
        if self.array_func is not None:
            out = np.asarray(self.array_func(X, XI, side), dtype=complex)
            return np.broadcast_to(out, X.shape[:-1]).copy()
        flatX, flatXI = X.reshape(-1, X.shape[-1]), XI.reshape(-1, XI.shape[-1])
        vals = [self.func(CospherePoint(x, xi, side)) for x, xi in zip(flatX, flatXI)]
        return np.asarray(vals, dtype=complex).reshape(X.shape[:-1])

    # algebra
    @classmethod
    def constant(cls, c: complex) -> "InteriorSymbol":
        c = complex(c)
        return cls(lambda p: c, c, lambda X, XI, s: np.full(X.shape[:-1], c), label=str(c))

    def _binary(self, other: "InteriorSymbol", op) -> "InteriorSymbol":
        vinf = None
        if self.value_at_infinity is not None and other.value_at_infinity is not None:
            vinf = op(complex(self.value_at_infinity), complex(other.value_at_infinity))
        af = None
        if self.array_func is not None and other.array_func is not None:
            f1, f2 = self.array_func, other.array_func
            af = lambda X, XI, s: op(np.asarray(f1(X, XI, s)), np.asarray(f2(X, XI, s)))
        return InteriorSymbol(lambda p: op(self.func(p), other.func(p)), vinf, af)

    def __mul__(self, other):
        if isinstance(other, InteriorSymbol):
            return self._binary(other, lambda a, b: a * b)
        return self._binary(InteriorSymbol.constant(other), lambda a, b: a * b)

    __rmul__ = __mul__

    def __add__(self, other: "InteriorSymbol") -> "InteriorSymbol":
        return self._binary(other, lambda a, b: a + b)

    def conj(self) -> "InteriorSymbol":
        af = None
        if self.array_func is not None:
            f = self.array_func
            af = lambda X, XI, s: np.conj(f(X, XI, s))
        vinf = None if self.value_at_infinity is None else complex(self.value_at_infinity).conjugate()
        return InteriorSymbol(lambda p: np.conj(self.func(p)), vinf, af)

    def pushforward(self, geometry: OrbitGeometry, k: int) -> "InteriorSymbol":
        """``p -> a(gamma^{-k} p)``."""
        if k == 0:
            return self
        return InteriorSymbol(lambda p: self.func(geometry.act(-k, p)), self.value_at_infinity)


# ------------------------------------------------------------------ boundary
class BoundarySymbol:
    """Field of fiber operators over the boundary cosphere bundle."""

    def evaluate(self, p: BoundaryCospherePoint, grid: FiberGrid, mu: float = 1.0, weight: complex = 1.0) -> FiberOperator:
        raise NotImplementedError

    def __call__(self, p: BoundaryCospherePoint, grid: FiberGrid) -> FiberOperator:
        return self.evaluate(p, grid)

    def __matmul__(self, other: "BoundarySymbol") -> "BoundarySymbol":
        return _Product(self, other)

    def __add__(self, other: "BoundarySymbol") -> "BoundarySymbol":
        return _Sum((self, other), (1.0, 1.0))

    def __mul__(self, c: complex) -> "BoundarySymbol":
        return _Sum((self,), (complex(c),))

    __rmul__ = __mul__

    @property
    def H(self) -> "BoundarySymbol":
        return _Adjoint(self)


def _weighted(M: np.ndarray, weight: complex) -> np.ndarray:
    if weight == 1.0:
        return M
    M = M.copy()
    M[:-1, -1] *= weight
    M[-1, :-1] /= weight
    return M


class MultiplierBoundary(BoundarySymbol):
    """Boundary symbol of multiplication by a function.

    ``f_plus``/``f_minus`` give the one-sided values at the base point and
    ``d`` the value acting on the ``C`` summand; all are functions of the
    boundary point.  The result does not depend on ``mu``.
    """

    def __init__(self, f_plus: Callable, f_minus: Callable | None = None, d: Callable | None = None):
        self.f_plus = f_plus
        self.f_minus = f_plus if f_minus is None else f_minus
        self.d = f_plus if d is None else d

    def evaluate(self, p, grid, mu=1.0, weight=1.0):
        p_mask = grid.plus_mask
        diag = np.where(p_mask, complex(self.f_plus(p)), complex(self.f_minus(p)))
        return FiberOperator(grid, np.diag(np.append(diag, complex(self.d(p)))), {"a+", "a-", "d"})


class ComponentBoundary(BoundarySymbol):
    """Boundary symbol assembled from components.

    Each argument is a function of the boundary point returning the
    component: ``a_plus``, ``a_minus``, ``b_plus``, ``b_minus``, ``c`` are
    functions of ``xi_n``; ``g_plus``, ``g_minus`` kernels of
    ``(xi_n, eta_n)``; ``d`` a number.
    """

    def __init__(self, a_plus=None, a_minus=None, g_plus=None, g_minus=None, b_plus=None, b_minus=None, c=None, d=None):
        self.parts = dict(a_plus=a_plus, a_minus=a_minus, g_plus=g_plus, g_minus=g_minus,
                          b_plus=b_plus, b_minus=b_minus, c=c, d=d)

    def evaluate(self, p, grid, mu=1.0, weight=1.0):
        get = {k: (None if f is None else f(p)) for k, f in self.parts.items()}
        sq = math.sqrt(mu)

        def fn(f):
            if f is None:
                return None
            return (lambda xi: f(mu * xi)) if callable(f) else f

        def kern(g):
            if g is None:
                return None
            return lambda xi, eta: mu * np.asarray(g(mu * xi, mu * eta))

        def row(b, s):
            if b is None:
                return None
            return (lambda xi: s * sq * np.asarray(b(mu * xi))) if callable(b) else s * sq * b

        return assemble_boundary_symbol(
            grid,
            a_plus=fn(get["a_plus"]) if get["a_plus"] is not None else 0.0,
            a_minus=fn(get["a_minus"]) if get["a_minus"] is not None else 0.0,
            g_plus=kern(get["g_plus"]),
            g_minus=kern(get["g_minus"]),
            b_plus=row(get["b_plus"], 1.0 / weight),
            b_minus=row(get["b_minus"], 1.0 / weight),
            c=row(get["c"], weight),
            d=0.0 if get["d"] is None else complex(get["d"]),
        )


class EmbeddedBoundary(BoundarySymbol):
    """Boundary symbol of a pseudodifferential operator with the transmission property.

    At ``(x', xi')`` the symbol is the decomposition of
    ``xi_n -> a(x', 0, xi', xi_n)``; a jump across the cut is handled by
    using the ``+``-side symbol on ``x_n > 0`` columns and the ``-``-side
    symbol on ``x_n < 0`` columns.
    """

    def __init__(self, interior: InteriorSymbol, geometry: OrbitGeometry):
        self.interior = interior
        self.geometry = geometry

    def restricted(self, p: BoundaryCospherePoint, side: str, mu: float = 1.0):
        geo, a = self.geometry, self.interior

        def f(xin):
            xin = np.asarray(xin, dtype=float)
            X, XI = geo.chart(p, np.zeros_like(xin), np.ones_like(xin), mu * xin)
            return a.eval_many(X, XI, side)

        return f

    def evaluate(self, p, grid, mu=1.0, weight=1.0):
        fp, fm = self.restricted(p, "+", mu), self.restricted(p, "-", mu)
        xi = grid.dual_nodes
        Dp = multiplication_decomposition(grid, fp)
        if np.allclose(fp(xi), fm(xi), rtol=0, atol=1e-14) and np.allclose(fp(np.array([1e8, -1e8])), fm(np.array([1e8, -1e8])), atol=1e-14):
            return Dp
        Dm = multiplication_decomposition(grid, fm)
        M = Dp.matrix.copy()
        cols = np.append(~grid.plus_mask, False)
        M[:, cols] = Dm.matrix[:, cols]
        return FiberOperator(grid, M, Dp.tags)


class MatrixBoundary(BoundarySymbol):
    """Generic boundary symbol given as ``(p, grid) -> FiberOperator``.

    Conormal dilations are applied by conjugation with resampled
    :func:`~gammabdm.fiber.kappa_xi` matrices and are therefore subject to
    grid truncation.
    """

    def __init__(self, func: Callable[[BoundaryCospherePoint, FiberGrid], FiberOperator], kappa_mode: str = "sinc"):
        self.func = func
        self.kappa_mode = kappa_mode

    def evaluate(self, p, grid, mu=1.0, weight=1.0):
        S = self.func(p, grid)
        if mu != 1.0:
            S = kappa_xi(grid, mu) @ S @ kappa_xi(grid, 1.0 / mu)
        return FiberOperator(grid, _weighted(S.matrix, weight), S.tags)


class _Product(BoundarySymbol):
    def __init__(self, left, right):
        self.left, self.right = left, right

    def evaluate(self, p, grid, mu=1.0, weight=1.0):
        return self.left.evaluate(p, grid, mu, weight) @ self.right.evaluate(p, grid, mu, weight)


class _Sum(BoundarySymbol):
    def __init__(self, terms, coeffs):
        self.terms, self.coeffs = tuple(terms), tuple(coeffs)

    def evaluate(self, p, grid, mu=1.0, weight=1.0):
        out = None
        for t, c in zip(self.terms, self.coeffs):
            v = c * t.evaluate(p, grid, mu, weight)
            out = v if out is None else out + v
        return out


class _Adjoint(BoundarySymbol):
    def __init__(self, inner):
        self.inner = inner

    def evaluate(self, p, grid, mu=1.0, weight=1.0):
        return self.inner.evaluate(p, grid, mu, 1.0 / np.conj(weight)).H

    @property
    def H(self):
        return self.inner


class _Pushforward(BoundarySymbol):
    def __init__(self, inner, geometry: OrbitGeometry, k: int, weighted: bool):
        self.inner, self.geometry, self.k, self.weighted = inner, geometry, int(k), weighted

    def evaluate(self, p, grid, mu=1.0, weight=1.0):
        geo, k = self.geometry, self.k
        src = geo.act(-k, p)
        scale = geo.boundary_fiber_scale(k, p)
        w = weight
        if not self.weighted:
            w = weight * geo.jacobians(k, src)[2] ** -0.5
        return self.inner.evaluate(src, grid, mu * scale, w)


# --------------------------------------------------------------------- pairs
@dataclass(frozen=True)
class BdMSymbol:
    """Pair of interior and boundary symbols of one transmission problem."""

    interior: InteriorSymbol
    boundary: BoundarySymbol
    support: tuple | None = None

    @classmethod
    def identity(cls) -> "BdMSymbol":
        one = lambda p: 1.0
        return cls(InteriorSymbol.constant(1.0), MultiplierBoundary(one))

    @classmethod
    def zero(cls) -> "BdMSymbol":
        z = lambda p: 0.0
        return cls(InteriorSymbol.constant(0.0), MultiplierBoundary(z))

    @classmethod
    def multiplier(cls, f: InteriorSymbol, geometry: OrbitGeometry, d: Callable | None = None) -> "BdMSymbol":
        """Multiplication by a function ``f`` (covector-independent).

        The boundary part multiplies by the one-sided values of ``f`` and by
        ``d`` (default: ``f`` from the ``+`` side) on the ``C`` summand.
        """

        def side_value(side):
            def g(p: BoundaryCospherePoint):
                return f(geometry.arc_point(p, 0.0, side))
            return g

        return cls(f, MultiplierBoundary(side_value("+"), side_value("-"), d or side_value("+")))

    def __matmul__(self, other: "BdMSymbol") -> "BdMSymbol":
        return compose(self, other)

    def __add__(self, other: "BdMSymbol") -> "BdMSymbol":
        return BdMSymbol(self.interior + other.interior, self.boundary + other.boundary)

    def __mul__(self, c: complex) -> "BdMSymbol":
        return BdMSymbol(self.interior * c, self.boundary * c)

    __rmul__ = __mul__

    def adjoint(self) -> "BdMSymbol":
        return adjoint(self)

    def pushforward(self, geometry: OrbitGeometry, k: int, weighted: bool = True) -> "BdMSymbol":
        return pushforward(geometry, k, self, weighted)


def compose(s1: BdMSymbol, s2: BdMSymbol) -> BdMSymbol:
    """Pointwise product of interior symbols and of boundary fiber operators."""
    return BdMSymbol(s1.interior * s2.interior, _Product(s1.boundary, s2.boundary))


def adjoint(s: BdMSymbol) -> BdMSymbol:
    """Conjugate interior symbol, fiber-wise adjoint boundary symbol."""
    return BdMSymbol(s.interior.conj(), s.boundary.H)


def pushforward(geometry: OrbitGeometry, k: int, s: BdMSymbol, weighted: bool = True) -> BdMSymbol:
    """Symbol of ``T s T^{-1}`` for the shift by ``gamma^k``.

    With ``weighted=True`` the shift is the unitary one (Jacobian weight
    included); otherwise the plain composition operator.
    """
    if k == 0:
        return s
    return BdMSymbol(s.interior.pushforward(geometry, k), _Pushforward(s.boundary, geometry, k, weighted))


def _local_component(a: InteriorSymbol, geometry: OrbitGeometry, p: BoundaryCospherePoint):
    def f(xp, xn, xip, xin):
        X, XI = geometry.chart(p, np.array([xn]), np.asarray(xip, dtype=float)[None, :], np.array([xin]))
        return a.eval_many(X, XI, "+" if xn >= 0 else "-")[0]
    return f


def embed_psdo(
    a: InteriorSymbol,
    geometry: OrbitGeometry,
    check_points: Iterable[BoundaryCospherePoint] | None = None,
    components: Mapping[int, Callable] | None = None,
    K: int = 2,
    tol: float = 1e-6,
) -> BdMSymbol:
    """Embed a zero-order pseudodifferential symbol with the transmission property.

    The transmission property is tested at ``check_points`` (default: four
    base points times both tangential orientations on each component of
    ``X_1``).  Without explicit ``components`` the principal symbol itself
    is used as the degree-zero component.

    Raises
    ------
    TransmissionError
        If the parity test fails anywhere.
    """
    if check_points is None:
        check_points = default_boundary_sample(geometry, depth=1, n_base=4)
    for p in check_points:
        comps = components if components is not None else {0: _local_component(a, geometry, p)}
        ok, worst = transmission_check(comps, K=K, tol=tol, dim_xip=geometry.dim - 1)
        if not ok:
            raise TransmissionError(f"transmission property fails at {p} (violation {worst:.3g})")
    return BdMSymbol(a, EmbeddedBoundary(a, geometry))


def default_boundary_sample(geometry: OrbitGeometry, depth: int = 1, n_base: int = 4) -> list[BoundaryCospherePoint]:
    """A few boundary cosphere points on each component up to ``depth``."""
    pts = []
    for comp in geometry.orbit_components(depth):
        lev = geometry.component_level(comp)
        for i in range(n_base):
            ang = 2 * math.pi * i / n_base + 0.1
            for sgn in (1, -1):
                pts.append(geometry.boundary_point(lev, ang, sgn))
    return pts


def symbol_norm(
    s: BdMSymbol,
    interior_points: Sequence[CospherePoint],
    boundary_points: Sequence[BoundaryCospherePoint],
    grid: FiberGrid,
) -> float:
    """Sampled proxy for the essential norm: max of ``|sigma_int|`` and ``||sigma_X||``."""
    if not interior_points or not boundary_points:
        raise ValueError("sampling must be nonempty on both parts")
    vi = max(abs(s.interior(p)) for p in interior_points)
    vb = max(s.boundary.evaluate(p, grid).norm() for p in boundary_points)
    return float(max(vi, vb))


def compatibility_defect(
    s: BdMSymbol,
    p: BoundaryCospherePoint,
    geometry: OrbitGeometry,
    grid: FiberGrid,
    xi_samples: Sequence[float] = (-1.0, -0.5, 0.5, 1.0),
    width: float | None = None,
) -> float:
    """Largest mismatch between boundary action on wave packets and interior values.

    A Gaussian packet centred at ``x_n = +-L/2`` with frequency ``xi_n``
    sees the boundary symbol as multiplication by the one-sided interior
    symbol at ``(x', xi', xi_n)``, up to the packet's spectral width.
    """
    S = s.boundary.evaluate(p, grid).matrix[:-1, :-1]
    x = grid.nodes
    width = grid.L / 8 if width is None else width
    worst = 0.0
    for side, x0 in (("+", grid.L / 2), ("-", -grid.L / 2)):
        for xin in xi_samples:
            u = np.exp(-((x - x0) / width) ** 2 + 1j * xin * x)
            rq = np.vdot(u, S @ u) / np.vdot(u, u)
            X, XI = geometry.chart(p, np.zeros(1), np.ones(1), np.array([xin]))
            val = s.interior.eval_many(X, XI, side)[0]
            worst = max(worst, abs(rq - val))
    return float(worst)
