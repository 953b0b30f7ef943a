"""Orbit geometries: the cylinder S^1 x R and Euclidean space with spheres.

Both built-in geometries are foliated by *level sets* of a scalar function
(``t`` on the cylinder, ``|x|`` on R^d).  Every component of the cut ``X`` is
a level set, so two components either coincide or are disjoint, and all
orbit combinatorics reduce to arithmetic on levels.

Conventions
-----------
* The integer ``k`` denotes the group element ``gamma^k`` where ``gamma`` is
  the generator (translation by ``tau`` or dilation by ``q``).
* Covectors are stored unit-normalized.  ``act`` pushes a covector forward
  with the codifferential ``((d gamma)^T)^{-1}`` and renormalizes.
* The ``+`` side of a component is the side of increasing level.  All
  built-in actions preserve it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "GroupSpec",
    "Component",
    "CospherePoint",
    "BoundaryCospherePoint",
    "FixedPointData",
    "Arc",
    "Closure",
    "OrbitGeometry",
    "CylinderGeometry",
    "EuclideanGeometry",
    "closure_YX",
]

_LEVEL_TOL = 1e-9


def _unit(v: Sequence[float]) -> tuple[float, ...]:
    arr = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(arr))
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("covector must be nonzero and finite")
    return tuple(float(c) for c in arr / n)


@dataclass(frozen=True)
class GroupSpec:
    """The group Z acting by powers of a translation or a dilation.

    Parameters
    ----------
    action : {"translate", "dilate"}
    parameter : float
        Translation step ``tau`` or dilation factor ``q``.
    kind : str
        Only ``"Z"`` is supported.
    """

    action: str = "dilate"
    parameter: float = 2.0
    kind: str = "Z"

    def __post_init__(self) -> None:
        if self.kind != "Z":
            raise ValueError(f"unsupported group kind {self.kind!r}; only 'Z'")
        if self.action not in ("translate", "dilate"):
            raise ValueError(f"unknown group action {self.action!r}")
        if not (self.parameter > 0 and math.isfinite(self.parameter)):
            raise ValueError("group parameter must be positive and finite")
        if self.action == "dilate" and self.parameter == 1.0:
            raise ValueError("dilation factor must differ from 1")

    @staticmethod
    def word_length(k: int) -> int:
        """Word metric on Z with generating set {1, -1}."""
        return abs(int(k))

    def level_map(self, k: int, level: float) -> float:
        """Image of a level under ``gamma^k``."""
        if self.action == "translate":
            return level + k * self.parameter
        return level * self.parameter ** k

    def stretch(self, k: int) -> float:
        """Derivative of the level map (constant for built-in actions)."""
        return 1.0 if self.action == "translate" else self.parameter ** k


@dataclass(frozen=True)
class Component:
    """The component ``gamma^gamma (Z_j)`` of the cut."""

    gamma: int
    j: int


@dataclass(frozen=True)
class CospherePoint:
    """A point of the interior cosphere bundle (or the point at infinity).

    ``side`` is ``"+"`` or ``"-"`` when ``x`` lies on a cut component and
    ``None`` otherwise.
    """

    x: tuple[float, ...] = ()
    xi: tuple[float, ...] = ()
    side: str | None = None
    at_infinity: bool = False

    def __post_init__(self) -> None:
        if self.at_infinity:
            return
        object.__setattr__(self, "x", tuple(float(c) for c in self.x))
        object.__setattr__(self, "xi", _unit(self.xi))
        if self.side not in (None, "+", "-"):
            raise ValueError(f"side must be '+', '-' or None, got {self.side!r}")

    @classmethod
    def infinity(cls) -> "CospherePoint":
        return cls(at_infinity=True)


@dataclass(frozen=True)
class BoundaryCospherePoint:
    """A point of the boundary cosphere bundle ``S^*X``.

    ``x`` holds ambient coordinates of the base point and ``xi`` a unit
    covector tangent to the component (expressed in ambient coordinates).
    """

    component: Component
    x: tuple[float, ...]
    xi: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(c) for c in self.x))
        object.__setattr__(self, "xi", _unit(self.xi))


Point = Union[CospherePoint, BoundaryCospherePoint]


@dataclass(frozen=True)
class FixedPointData:
    """Isotropy data of a point: ``Gamma_m`` and the quotient ``Gamma^m``."""

    Gamma_m: str
    Gamma_quotient: str
    topologically_free: bool


@dataclass(frozen=True)
class Arc:
    """The conormal arc glued to a boundary point in the closure.

    Represents ``{(x', 0, cos(phi) xi', sin(phi) xi_n): phi in [lo, hi]}``
    on both sides of the component.
    """

    point: BoundaryCospherePoint
    phi_range: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    sides: tuple[str, ...] = ("+", "-")

    def sample(self, geometry: "OrbitGeometry", n: int) -> list[CospherePoint]:
        """Interior points on the arc (both sides), ``n`` angles per side."""
        out = []
        for phi in np.linspace(*self.phi_range, n):
            for s in self.sides:
                out.append(geometry.arc_point(self.point, float(phi), s))
        return out


@dataclass(frozen=True)
class Closure:
    """Closed subset of the glued space: finite interior part, arcs, boundary part."""

    interior: frozenset[CospherePoint] = field(default_factory=frozenset)
    arcs: frozenset[Arc] = field(default_factory=frozenset)
    boundary: frozenset[BoundaryCospherePoint] = field(default_factory=frozenset)


class OrbitGeometry:
    """Base class for level-set geometries acted on by Z.

    Subclasses define the ambient coordinates through :meth:`level`,
    :meth:`_move`, :meth:`_push_covector` and the Jacobians.
    """

    base: str = ""
    dim: int = 0

    def __init__(self, group: GroupSpec, Z: Sequence[float]):
        self.group = group
        levels = [float(z) for z in Z]
        if not levels:
            raise ValueError("at least one component is required")
        self.Z = tuple(levels)
        self._check_components()

    # ------------------------------------------------------------------ levels
    def _check_components(self) -> None:
        pass

    def level(self, x: Sequence[float]) -> float:
        raise NotImplementedError

    def component_level(self, comp: Component) -> float:
        return self.group.level_map(comp.gamma, self.Z[comp.j])

    def is_fixed_level(self, level: float) -> bool:
        """True if the level is invariant under the whole group."""
        return abs(self.group.level_map(1, level) - level) <= _LEVEL_TOL * (1 + abs(level))

    def _orbit_index(self, level: float, j: int) -> int | None:
        """Return ``k`` with ``gamma^k(Z_j)`` at ``level`` or ``None``."""
        z = self.Z[j]
        g = self.group
        if self.is_fixed_level(z):
            return 0 if abs(level - z) <= _LEVEL_TOL * (1 + abs(z)) else None
        if g.action == "translate":
            k = round((level - z) / g.parameter)
        else:
            if z == 0 or level == 0 or np.sign(level) != np.sign(z):
                return None
            k = round(math.log(level / z) / math.log(g.parameter))
        cand = g.level_map(k, z)
        return k if abs(cand - level) <= _LEVEL_TOL * (1 + abs(level)) else None

    def canonical(self, comp: Component) -> Component:
        """Canonical label of a component (smallest j, then smallest |gamma|)."""
        lev = self.component_level(comp)
        for j in range(len(self.Z)):
            k = self._orbit_index(lev, j)
            if k is not None:
                return Component(k, j)
        return comp

    def on_cut(self, level: float) -> bool:
        return any(self._orbit_index(level, j) is not None for j in range(len(self.Z)))

    def component_at(self, level: float) -> Component | None:
        for j in range(len(self.Z)):
            k = self._orbit_index(level, j)
            if k is not None:
                return Component(k, j)
        return None

    def orbit_components(self, N: int) -> list[Component]:
        """Distinct components ``gamma^k(Z_j)`` with ``|k| <= N``, sorted by level."""
        if N < 0:
            raise ValueError("N must be nonnegative")
        seen: dict[float, Component] = {}
        for j in range(len(self.Z)):
            for k in sorted(range(-N, N + 1), key=abs):
                comp = self.canonical(Component(k, j))
                key = round(self.component_level(comp), 12)
                seen.setdefault(key, comp)
        return [seen[k] for k in sorted(seen)]

    # ----------------------------------------------------------------- action
    def _move(self, k: int, x: tuple[float, ...]) -> tuple[float, ...]:
        raise NotImplementedError

    def _push_covector(self, k: int, x: tuple[float, ...], xi: tuple[float, ...]) -> np.ndarray:
        """Unnormalized ``partial gamma^k (xi)`` at base point ``x``."""
        raise NotImplementedError

    def act(self, k: int, p: Point) -> Point:
        """Apply ``gamma^k`` to an interior or boundary cosphere point."""
        k = int(k)
        if isinstance(p, BoundaryCospherePoint):
            comp = self.canonical(Component(p.component.gamma + k, p.component.j))
            return BoundaryCospherePoint(comp, self._move(k, p.x), tuple(self._push_covector(k, p.x, p.xi)))
        if p.at_infinity or k == 0:
            return p
        return CospherePoint(self._move(k, p.x), tuple(self._push_covector(k, p.x, p.xi)), p.side)

    def tangential_rescale(self, k: int, p: BoundaryCospherePoint) -> float:
        """``|partial gamma^k (xi')|`` for the unit tangential covector of ``p``."""
        return float(np.linalg.norm(self._push_covector(k, p.x, p.xi)))

    def boundary_fiber_scale(self, k: int, target: BoundaryCospherePoint) -> float:
        """Dilation factor ``mu`` of the conormal fiber map for ``gamma^k``.

        The boundary symbol pushed forward by ``gamma^k`` and evaluated at
        ``target`` equals ``kappa_mu sigma(source) kappa_mu^{-1}`` with
        ``source = act(-k, target)``, where the normal stretch and twisted
        homogeneity are combined into the single factor ``mu``.
        """
        source = self.act(-k, target)
        return self.group.stretch(k) / self.tangential_rescale(k, source)

    # -------------------------------------------------------------- jacobians
    def jacobians(self, k: int, p: Point) -> tuple[float, float, float]:
        """Radon-Nikodym factors ``(J_Y, J_X, J_N)`` of ``gamma^k``.

        ``J_Y`` is ``|det d(gamma^{-k})|`` so that
        ``T u = J_Y^{1/2} u o gamma^{-k}`` is unitary on ``L^2(Y)``; ``J_X``
        is the analogue on the cut and ``J_N`` the conormal factor.
        """
        raise NotImplementedError

    # -------------------------------------------------------------- validation
    def validate(self, p: Point) -> None:
        """Raise ``ValueError`` if ``p`` does not belong to the geometry."""
        if isinstance(p, BoundaryCospherePoint):
            if len(p.x) != self.dim or len(p.xi) != self.dim:
                raise ValueError("boundary point has wrong dimension")
            if not 0 <= p.component.j < len(self.Z):
                raise ValueError("unknown component index")
            lev = self.component_level(p.component)
            if abs(self.level(p.x) - lev) > 1e-7 * (1 + abs(lev)):
                raise ValueError("base point is not on the stated component")
            if abs(float(np.dot(self.normal(p.x), p.xi))) > 1e-7:
                raise ValueError("covector is not tangential to the component")
            return
        if p.at_infinity:
            return
        if len(p.x) != self.dim or len(p.xi) != self.dim:
            raise ValueError("point has wrong dimension")
        on = self.on_cut(self.level(p.x))
        if on and p.side is None:
            raise ValueError("point on a cut component needs a side tag")
        if not on and p.side is not None:
            raise ValueError("side tag given for a point off the cut")

    def normal(self, x: Sequence[float]) -> np.ndarray:
        """Unit conormal pointing to increasing level."""
        raise NotImplementedError

    def tangent_basis(self, x: Sequence[float]) -> np.ndarray:
        """Orthonormal basis (rows) of the tangent space of the component through ``x``."""
        n = self.normal(x)
        q, _ = np.linalg.qr(np.column_stack([n, np.eye(self.dim)]))
        basis = q[:, 1:self.dim].T
        return basis * np.sign(basis @ self._tangent_reference(x))[:, None]

    def _tangent_reference(self, x: Sequence[float]) -> np.ndarray:
        return np.ones(self.dim)

    def chart(self, p: BoundaryCospherePoint, xn, xip, xin):
        """Ambient coordinates and covectors of local chart points near ``p``.

        ``xn`` is the signed normal distance, ``xip`` tangential covector
        coefficients in :meth:`tangent_basis` and ``xin`` the conormal
        coefficient.  Arrays broadcast; returns ``(X, XI)`` with a trailing
        axis of length ``dim``.
        """
        raise NotImplementedError

    def arc_point(self, p: BoundaryCospherePoint, phi: float, side: str) -> CospherePoint:
        """Interior point ``(x', 0, cos(phi) xi', sin(phi) xi_n)`` on a given side."""
        xi = math.cos(phi) * np.asarray(p.xi) + math.sin(phi) * self.normal(p.x)
        return CospherePoint(p.x, tuple(xi), side)

    # ------------------------------------------------------------ fixed points
    def fixed_point_data(self, p: Point) -> FixedPointData:
        """Isotropy data of ``p`` for the shift action."""
        self.validate(p)
        if isinstance(p, BoundaryCospherePoint):
            fixed = self.is_fixed_level(self.component_level(p.component))
            if fixed and self.act(1, p) == p:
                return FixedPointData("Z", "trivial", False)
        return FixedPointData("trivial", "Z", True)

    def fixed_multiplier_scale(self, p: BoundaryCospherePoint) -> float:
        """Fiber dilation ``mu`` of the multiplier ``kappa_mu`` at a fixed point."""
        return self.boundary_fiber_scale(1, p)

    def describe(self) -> dict:
        return {
            "base": self.base,
            "dim": self.dim,
            "group": {"kind": self.group.kind, "action": self.group.action, "parameter": self.group.parameter},
            "Z": list(self.Z),
        }


class CylinderGeometry(OrbitGeometry):
    """``S^1 x R`` with coordinates ``(x, t)``, cut along circles ``t = const``.

    The group acts on ``t`` only, by translation or by dilation.
    """

    base = "cylinder"
    dim = 2

    def _check_components(self) -> None:
        if self.group.action == "dilate" and any(self.is_fixed_level(z) for z in self.Z[1:]) and self.Z[0] != 0:
            raise ValueError("the fixed circle t=0 must be listed first")

    def level(self, x: Sequence[float]) -> float:
        return float(x[1])

    def normal(self, x: Sequence[float]) -> np.ndarray:
        return np.array([0.0, 1.0])

    def tangent_basis(self, x):
        return np.array([[1.0, 0.0]])

    def chart(self, p, xn, xip, xin):
        xn, xin = np.asarray(xn, dtype=float), np.asarray(xin, dtype=float)
        xip = np.asarray(xip, dtype=float)
        if xip.ndim and xip.shape[-1] == 1:
            xip = xip[..., 0]
        shape = np.broadcast_shapes(xn.shape, xip.shape, xin.shape)
        X = np.empty(shape + (2,))
        X[..., 0] = p.x[0]
        X[..., 1] = p.x[1] + xn
        XI = np.empty(shape + (2,))
        XI[..., 0] = xip * p.xi[0]
        XI[..., 1] = xin
        return X, XI

    def _move(self, k, x):
        return (float(x[0]) % (2 * math.pi), self.group.level_map(k, float(x[1])))

    def _push_covector(self, k, x, xi):
        return np.array([xi[0], xi[1] / self.group.stretch(k)])

    def jacobians(self, k, p):
        s = self.group.stretch(k)
        return (1.0 / s, 1.0, s)

    def boundary_point(self, level: float, x: float, sign: int = 1) -> BoundaryCospherePoint:
        """Boundary cosphere point over ``(x, level)`` with ``xi' = sign``."""
        comp = self.component_at(level)
        if comp is None:
            raise ValueError(f"t={level} is not on the cut")
        return BoundaryCospherePoint(comp, (x % (2 * math.pi), level), (float(sign), 0.0))

    def point(self, x: float, t: float, xi: float, tau: float, side: str | None = None) -> CospherePoint:
        return CospherePoint((x % (2 * math.pi), t), (xi, tau), side)


class EuclideanGeometry(OrbitGeometry):
    """``R^d`` acted on by dilations, cut along spheres ``|x| = const``."""

    base = "euclidean"

    def __init__(self, group: GroupSpec, Z: Sequence[float] = (1.0,), dim: int = 2):
        if group.action != "dilate":
            raise ValueError("Euclidean geometry supports dilations only")
        if dim < 2:
            raise ValueError("dimension must be at least 2")
        self.dim = dim
        super().__init__(group, Z)

    def _check_components(self) -> None:
        if any(z <= 0 for z in self.Z):
            raise ValueError("sphere radii must be positive (a point is not a hypersurface)")

    def level(self, x):
        return float(np.linalg.norm(x))

    def normal(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x)
        if r == 0:
            raise ValueError("no conormal at the origin")
        return x / r

    def _tangent_reference(self, x):
        if self.dim == 2:
            return np.array([-x[1], x[0]], dtype=float)
        return np.ones(self.dim)

    def chart(self, p, xn, xip, xin):
        xn, xin = np.asarray(xn, dtype=float), np.asarray(xin, dtype=float)
        xip = np.asarray(xip, dtype=float)
        if xip.ndim == 0 or xip.shape[-1] != self.dim - 1:
            xip = xip[..., None] * np.ones(self.dim - 1)
        n = self.normal(p.x)
        T = self.tangent_basis(p.x)
        r = np.linalg.norm(p.x)
        X = ((r + xn) / r)[..., None] * np.asarray(p.x)
        # tangential direction: coefficient of the covector xi' of the point
        xi_t = np.asarray(p.xi) @ T.T
        XI = xin[..., None] * n + (xip * xi_t) @ T if self.dim == 2 else xin[..., None] * n + xip @ T
        return X, XI

    def _move(self, k, x):
        s = self.group.stretch(k)
        return tuple(s * float(c) for c in x)

    def _push_covector(self, k, x, xi):
        return np.asarray(xi, dtype=float) / self.group.stretch(k)

    def jacobians(self, k, p):
        s = self.group.stretch(k)
        return (s ** (-self.dim), s ** (-(self.dim - 1)), s)

    def fixed_point_data(self, p: Point) -> FixedPointData:
        self.validate(p)
        return FixedPointData("trivial", "Z", True)

    def boundary_point(self, radius: float, angle: float, sign: int = 1) -> BoundaryCospherePoint:
        """Boundary point on the circle of given radius (``dim == 2``)."""
        if self.dim != 2:
            raise ValueError("angle parametrization needs dim == 2")
        comp = self.component_at(radius)
        if comp is None:
            raise ValueError(f"radius {radius} is not on the cut")
        c, s = math.cos(angle), math.sin(angle)
        return BoundaryCospherePoint(comp, (radius * c, radius * s), (-sign * s, sign * c))


def closure_YX(
    U: Iterable[CospherePoint], V: Iterable[BoundaryCospherePoint], geometry: OrbitGeometry | None = None
) -> Closure:
    """Closure of a finite set in the glued space.

    Each boundary point contributes itself and its conormal arc; interior
    points already lying on one of those arcs are absorbed.  Arcs are
    returned symbolically.
    """
    V = frozenset(V)
    arcs = frozenset(Arc(v) for v in V)
    kept = []
    for u in U:
        if geometry is not None and any(_on_arc(geometry, u, a) for a in arcs):
            continue
        kept.append(u)
    return Closure(frozenset(kept), arcs, V)


def closure_of(c: Closure, geometry: OrbitGeometry | None = None) -> Closure:
    """Re-close an already closed set; arcs are closed so this is the identity."""
    more = closure_YX(c.interior, c.boundary, geometry)
    return Closure(more.interior, more.arcs | c.arcs, more.boundary)


def _on_arc(geometry: OrbitGeometry, u: CospherePoint, arc: Arc) -> bool:
    if u.at_infinity or u.side not in arc.sides:
        return False
    p = arc.point
    if not np.allclose(u.x, p.x, atol=1e-12):
        return False
    xi = np.asarray(u.xi)
    a, b = float(xi @ np.asarray(p.xi)), float(xi @ geometry.normal(p.x))
    return abs(a * a + b * b - 1) < 1e-12 and a >= -1e-12
