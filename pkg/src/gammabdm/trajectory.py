"""Trajectory symbols of operators ``D = sum_k D_k T^k`` along Z-orbits.

Slot ``n`` of a trajectory at a point ``m`` carries the point
``gamma^{-n} m``; the band entry from slot ``n + k`` to slot ``n`` is the
symbol of ``D_k`` pushed forward by ``gamma^n`` (unitary convention) and
evaluated at ``m``.  For interior points this is
``sigma_int(D_k)(gamma^{-n} m)``; for boundary points it is the fiber
operator ``kappa_mu sigma_X(D_k)(gamma^{-n} m') kappa_mu^{-1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .fiber import FiberGrid, FiberOperator, kappa_xi
from .geometry import BoundaryCospherePoint, CospherePoint, OrbitGeometry
from .symbols import BdMSymbol

__all__ = [
    "GammaSymbol",
    "ProjectionSymbol",
    "TrajectoryOperator",
    "GammaTriple",
    "interior_trajectory",
    "boundary_trajectory",
    "fixedpoint_trajectory",
    "project_trajectory",
    "restrict",
    "limit_coefficients",
]


class GammaSymbol:
    """Finitely supported map ``k -> symbol of D_k`` (scalar or ``n x n``).

    Parameters
    ----------
    geometry : OrbitGeometry
    terms : mapping ``k -> BdMSymbol`` or ``k -> n x n`` nested lists of
        ``BdMSymbol`` (``None`` entries are zero).
    """

    def __init__(self, geometry: OrbitGeometry, terms: Mapping[int, object], matrix_size: int = 1):
        self.geometry = geometry
        self.matrix_size = int(matrix_size)
        n = self.matrix_size
        self.terms: dict[int, np.ndarray] = {}
        for k, t in terms.items():
            arr = np.empty((n, n), dtype=object)
            if isinstance(t, BdMSymbol):
                if n != 1:
                    raise ValueError("scalar term given for a matrix problem")
                arr[0, 0] = t
            else:
                rows = list(t)
                if len(rows) != n or any(len(r) != n for r in rows):
                    raise ValueError(f"term {k} is not {n}x{n}")
                for i in range(n):
                    for j in range(n):
                        arr[i, j] = rows[i][j]
            self.terms[int(k)] = arr

    @classmethod
    def identity(cls, geometry: OrbitGeometry, n: int = 1) -> "GammaSymbol":
        I = [[BdMSymbol.identity() if i == j else None for j in range(n)] for i in range(n)]
        return cls(geometry, {0: I[0][0] if n == 1 else I}, n)

    @classmethod
    def shift(cls, geometry: OrbitGeometry, k: int = 1) -> "GammaSymbol":
        return cls(geometry, {k: BdMSymbol.identity()})

    @property
    def support(self) -> list[int]:
        return sorted(self.terms)

    @property
    def band(self) -> tuple[int, int]:
        s = self.support
        return (min(s), max(s)) if s else (0, 0)

    def __add__(self, other: "GammaSymbol") -> "GammaSymbol":
        out = {k: v.copy() for k, v in self.terms.items()}
        for k, v in other.terms.items():
            if k in out:
                out[k] = _entrywise(out[k], v, lambda a, b: a + b)
            else:
                out[k] = v.copy()
        return GammaSymbol(self.geometry, {k: _unwrap(v) for k, v in out.items()}, self.matrix_size)

    def __mul__(self, c: complex) -> "GammaSymbol":
        out = {}
        for k, v in self.terms.items():
            w = np.empty_like(v)
            for idx, s in np.ndenumerate(v):
                w[idx] = None if s is None else s * c
            out[k] = _unwrap(w)
        return GammaSymbol(self.geometry, out, self.matrix_size)

    __rmul__ = __mul__

    def __matmul__(self, other: "GammaSymbol") -> "GammaSymbol":
        """Product ``(sum D_k T^k)(sum E_l T^l) = sum D_k (T^k E_l T^{-k}) T^{k+l}``."""
        n = self.matrix_size
        out: dict[int, np.ndarray] = {}
        for k, Dk in self.terms.items():
            for l, El in other.terms.items():
                prod = np.empty((n, n), dtype=object)
                for i in range(n):
                    for j in range(n):
                        acc = None
                        for r in range(n):
                            a, b = Dk[i, r], El[r, j]
                            if a is None or b is None:
                                continue
                            t = a @ b.pushforward(self.geometry, k)
                            acc = t if acc is None else acc + t
                        prod[i, j] = acc
                if k + l in out:
                    out[k + l] = _entrywise(out[k + l], prod, lambda a, b: a + b)
                else:
                    out[k + l] = prod
        return GammaSymbol(self.geometry, {k: _unwrap(v) for k, v in out.items()}, n)


def _entrywise(A: np.ndarray, B: np.ndarray, op) -> np.ndarray:
    out = np.empty_like(A)
    for idx in np.ndindex(A.shape):
        a, b = A[idx], B[idx]
        out[idx] = a if b is None else b if a is None else op(a, b)
    return out


def _unwrap(arr: np.ndarray):
    if arr.shape == (1, 1):
        return arr[0, 0] if arr[0, 0] is not None else BdMSymbol.zero()
    return arr.tolist()


# ---------------------------------------------------------------- projections
@dataclass(frozen=True)
class ProjectionSymbol:
    """Characteristic function of a level band ``lo <= level <= hi`` plus a set ``W``.

    The band's interior part is ``chi_M`` (side-valued on cuts); on a cut
    component at level ``c`` the fiber projection keeps the ``+`` half-line
    iff ``lo <= c < hi`` and the ``-`` half-line iff ``lo < c <= hi``; the
    ``C`` summand is kept iff the component belongs to ``W``.

    ``W`` is ``"inside"`` (components with ``lo <= c <= hi``), ``"all"``,
    ``"none"`` or an explicit tuple of levels.
    """

    geometry: OrbitGeometry
    lo: float = -math.inf
    hi: float = math.inf
    W: object = "inside"
    name: str = "explicit"

    @classmethod
    def full(cls, geometry: OrbitGeometry) -> "ProjectionSymbol":
        return cls(geometry, -math.inf, math.inf, "all", "full")

    @classmethod
    def preset(cls, geometry: OrbitGeometry, name: str) -> "ProjectionSymbol":
        if name == "full":
            return cls.full(geometry)
        if name == "cylinder-restriction":
            return cls(geometry, 0.0, 1.0, "inside", name)
        if name == "disc-example":
            return cls(geometry, 0.0, 1.0, (1.0,), name)
        raise ValueError(f"unknown projection preset {name!r}")

    def interior(self, p: CospherePoint) -> float:
        if p.at_infinity:
            return 1.0 if (math.isinf(self.lo) or math.isinf(self.hi)) and self.W == "all" else 0.0
        lev = self.geometry.level(p.x)
        if p.side is None:
            return float(self.lo <= lev <= self.hi)
        if self.lo < lev < self.hi:
            return 1.0
        if _close(lev, self.lo) and p.side == "+":
            return 1.0
        if _close(lev, self.hi) and p.side == "-":
            return 1.0
        return 0.0

    def _in_W(self, c: float) -> bool:
        if self.W == "all":
            return True
        if self.W == "none":
            return False
        if self.W == "inside":
            return self.lo <= c <= self.hi or _close(c, self.lo) or _close(c, self.hi)
        return any(_close(c, w) for w in self.W)

    def boundary_mask(self, p: BoundaryCospherePoint, grid: FiberGrid) -> np.ndarray:
        c = self.geometry.component_level(p.component)
        plus = (self.lo <= c or _close(c, self.lo)) and c < self.hi and not _close(c, self.hi)
        minus = self.lo < c and not _close(c, self.lo) and (c <= self.hi or _close(c, self.hi))
        mask = np.where(grid.plus_mask, plus, minus)
        return np.append(mask, self._in_W(c))

    def boundary(self, p: BoundaryCospherePoint, grid: FiberGrid) -> FiberOperator:
        return FiberOperator(grid, np.diag(self.boundary_mask(p, grid).astype(float)), {"projection"})

    def describe(self) -> dict:
        W = self.W if isinstance(self.W, str) else list(self.W)
        return {"name": self.name, "lo": self.lo, "hi": self.hi, "W": W}


def _close(a: float, b: float) -> bool:
    return math.isfinite(b) and abs(a - b) <= 1e-9 * (1 + abs(b))


# ---------------------------------------------------------- trajectory values
@dataclass(frozen=True, eq=False)
class TrajectoryOperator:
    """Truncated trajectory symbol.

    ``matrix`` acts from the column slots to the row slots; ``slot_dim`` is
    1 (times ``n``) for interior and ``N+1`` (times ``n``) for boundary.
    ``row_mask``/``col_mask`` are set after compression.
    """

    matrix: np.ndarray
    rows: tuple[int, int]
    cols: tuple[int, int]
    slot_dim: int
    kind: str
    truncation: dict = field(default_factory=dict)
    laurent: bool = False
    ends: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def svdvals(self) -> np.ndarray:
        if self.matrix.size == 0:
            return np.array([])
        return np.linalg.svd(self.matrix, compute_uv=False)

    def sigma_min(self) -> float:
        if min(self.matrix.shape, default=0) == 0:
            return math.inf
        s = self.svdvals()
        if self.matrix.shape[0] != self.matrix.shape[1]:
            return float(s[-1]) if len(s) == min(self.matrix.shape) else 0.0
        return float(s[-1])


def _slots(window: tuple[int, int]) -> np.ndarray:
    lo, hi = window
    if hi < lo:
        raise ValueError("empty window")
    return np.arange(lo, hi + 1)


def _check_band(D: GammaSymbol, rows, cols) -> dict:
    lo, hi = D.band
    width = (rows[1] - rows[0] + 1)
    info = {"band": [lo, hi], "window": [int(rows[0]), int(rows[1])]}
    if hi - lo + 1 > width:
        info["warning"] = "band wider than window"
    return info


def interior_trajectory(
    D: GammaSymbol,
    m: CospherePoint,
    window: tuple[int, int] = (-64, 64),
    col_offset: int = 0,
) -> TrajectoryOperator:
    """Band matrix of the interior trajectory symbol on a window of slots.

    ``col_offset`` shifts the column window, which realizes right
    multiplication by a power of the bilateral shift.
    """
    geo = D.geometry
    n = D.matrix_size
    rows = _slots(window)
    cols = rows + col_offset
    pts = {int(r): geo.act(-int(r), m) for r in rows}
    M = np.zeros((len(rows) * n, len(cols) * n), dtype=complex)
    col_index = {int(c): i for i, c in enumerate(cols)}
    for i, r in enumerate(rows):
        p = pts[int(r)]
        for k, Dk in D.terms.items():
            j = col_index.get(int(r) + k)
            if j is None:
                continue
            for a in range(n):
                for b in range(n):
                    s = Dk[a, b]
                    if s is not None:
                        M[i * n + a, j * n + b] = s.interior(p)
    laurent = _is_laurent(M, n, col_offset, D)
    trunc = _check_band(D, (rows[0], rows[-1]), (cols[0], cols[-1]))
    return TrajectoryOperator(M, (int(rows[0]), int(rows[-1])), (int(cols[0]), int(cols[-1])), n, "interior", trunc, laurent)


def _is_laurent(M: np.ndarray, n: int, offset: int, D: GammaSymbol) -> bool:
    if n != 1 or M.shape[0] < 2:
        return False
    for k in range(-M.shape[0] + 1, M.shape[1]):
        d = np.diagonal(M, k)
        if d.size and np.max(np.abs(d - d[0])) > 1e-12 * (1 + np.abs(d[0])):
            return False
    return True


def boundary_trajectory(
    D: GammaSymbol,
    m: BoundaryCospherePoint,
    window: tuple[int, int],
    grid: FiberGrid,
) -> TrajectoryOperator:
    """Block band matrix of the boundary trajectory symbol with fiber slots.

    Raises
    ------
    ValueError
        If the action is not topologically free at ``m``.
    """
    geo = D.geometry
    if not geo.fixed_point_data(m).topologically_free:
        raise ValueError("point is a non-free fixed point; use fixedpoint_trajectory")
    n = D.matrix_size
    f = grid.dim
    rows = _slots(window)
    M = np.zeros((len(rows) * n * f, len(rows) * n * f), dtype=complex)
    scales = []
    for i, r in enumerate(rows):
        r = int(r)
        src = geo.act(-r, m)
        mu = geo.boundary_fiber_scale(r, m)
        scales.append(mu)
        for k, Dk in D.terms.items():
            j = i + k
            if not 0 <= j < len(rows):
                continue
            for a in range(n):
                for b in range(n):
                    s = Dk[a, b]
                    if s is None:
                        continue
                    blk = s.boundary.evaluate(src, grid, mu, 1.0).matrix
                    r0, c0 = (i * n + a) * f, (j * n + b) * f
                    M[r0:r0 + f, c0:c0 + f] = blk
    trunc = _check_band(D, (rows[0], rows[-1]), (rows[0], rows[-1]))
    trunc.update({"fiber_N": grid.N, "fiber_L": grid.L, "mu_range": [float(min(scales)), float(max(scales))]})
    return TrajectoryOperator(M, (int(rows[0]), int(rows[-1])), (int(rows[0]), int(rows[-1])), n * f, "boundary", trunc)


def fixedpoint_trajectory(
    D: GammaSymbol,
    m: BoundaryCospherePoint,
    grid: FiberGrid,
    kappa_mode: str = "sinc",
) -> FiberOperator:
    """``sum_k sigma_X(D_k)(m') kappa_mu^k`` at a fixed point with trivial quotient.

    Only scalar problems are supported here.
    """
    geo = D.geometry
    data = geo.fixed_point_data(m)
    if data.topologically_free:
        raise ValueError("action is free at this point; use boundary_trajectory")
    if data.Gamma_quotient != "trivial":
        raise NotImplementedError("nontrivial quotient groups are not supported")
    if D.matrix_size != 1:
        raise NotImplementedError("fixed-point symbols are implemented for scalar problems")
    mu = geo.fixed_multiplier_scale(m)
    out = FiberOperator.zero(grid)
    for k, Dk in D.terms.items():
        s = Dk[0, 0]
        if s is None:
            continue
        A = s.boundary.evaluate(m, grid)
        if k != 0:
            A = A @ kappa_xi(grid, mu ** k, kappa_mode, base=mu if kappa_mode == "power" else None)
        out = out + A
    return out


def project_trajectory(
    P: ProjectionSymbol,
    m,
    window: tuple[int, int] | None = None,
    grid: FiberGrid | None = None,
    matrix_size: int = 1,
) -> np.ndarray:
    """Diagonal 0/1 mask of ``P`` along the trajectory slots.

    For a fixed point pass ``window=None`` to obtain the single fiber mask.
    """
    geo = P.geometry
    if isinstance(m, BoundaryCospherePoint):
        if grid is None:
            raise ValueError("boundary masks need a fiber grid")
        if window is None:
            return np.tile(P.boundary_mask(m, grid), matrix_size)
        return np.concatenate([np.tile(P.boundary_mask(geo.act(-int(r), m), grid), matrix_size) for r in _slots(window)])
    return np.concatenate([np.full(matrix_size, P.interior(geo.act(-int(r), m))) for r in _slots(window)]).astype(bool)


def limit_coefficients(D: GammaSymbol, m: CospherePoint, end: int, n_far: int = 200, tol: float = 1e-8):
    """Band coefficients of the interior trajectory far along one end.

    Returns ``(coeffs, converged)`` where ``coeffs[k]`` is the ``n x n``
    coefficient of the shift by ``k`` at slot ``end * n_far``.
    """
    geo = D.geometry
    n = D.matrix_size

    def at(slot):
        p = geo.act(-slot, m)
        out = {}
        for k, Dk in D.terms.items():
            C = np.zeros((n, n), dtype=complex)
            for idx, s in np.ndenumerate(Dk):
                if s is not None:
                    C[idx] = s.interior(p)
            out[k] = C
        return out

    a, b = at(end * n_far), at(end * (n_far + 1))
    c = at(end * 2 * n_far)
    conv = all(np.allclose(a[k], b[k], atol=tol) and np.allclose(a[k], c[k], atol=tol) for k in a)
    return c, conv


# ------------------------------------------------------------------ triples
@dataclass(frozen=True, eq=False)
class Compressed:
    """A trajectory operator compressed between projection ranges."""

    op: TrajectoryOperator
    full: TrajectoryOperator
    row_mask: np.ndarray
    col_mask: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.op.matrix


class GammaTriple:
    """The triple ``(D, P1, P2)`` with compressed trajectory symbols ``P2 sigma(D) P1``."""

    def __init__(self, D: GammaSymbol, P1: ProjectionSymbol, P2: ProjectionSymbol):
        self.D, self.P1, self.P2 = D, P1, P2

    @property
    def geometry(self) -> OrbitGeometry:
        return self.D.geometry

    def _compress(self, T: TrajectoryOperator, rmask: np.ndarray, cmask: np.ndarray, kind: str) -> Compressed:
        sub = T.matrix[np.ix_(rmask, cmask)]
        ends = {}
        if kind in ("interior", "boundary"):
            rs = rmask.reshape(-1, T.slot_dim).any(axis=1)
            cs = cmask.reshape(-1, T.slot_dim).any(axis=1)
            ends = {"-": bool(rs[0] or cs[0]), "+": bool(rs[-1] or cs[-1])}
        trunc = dict(T.truncation)
        trunc.update({"domain_dim": int(cmask.sum()), "codomain_dim": int(rmask.sum())})
        op = TrajectoryOperator(sub, T.rows, T.cols, T.slot_dim, T.kind, trunc, T.laurent and bool(rmask.all() and cmask.all()), ends)
        return Compressed(op, T, rmask, cmask)

    def interior(self, m: CospherePoint, window: tuple[int, int], col_offset: int = 0) -> Compressed:
        T = interior_trajectory(self.D, m, window, col_offset)
        n = self.D.matrix_size
        rmask = project_trajectory(self.P2, m, window, matrix_size=n)
        cwin = (window[0] + col_offset, window[1] + col_offset)
        cmask = project_trajectory(self.P1, m, cwin, matrix_size=n)
        return self._compress(T, rmask, cmask, "interior")

    def boundary(self, m: BoundaryCospherePoint, window: tuple[int, int], grid: FiberGrid) -> Compressed:
        T = boundary_trajectory(self.D, m, window, grid)
        n = self.D.matrix_size
        rmask = project_trajectory(self.P2, m, window, grid, n)
        cmask = project_trajectory(self.P1, m, window, grid, n)
        return self._compress(T, rmask, cmask, "boundary")

    def fixedpoint(self, m: BoundaryCospherePoint, grid: FiberGrid, kappa_mode: str = "sinc") -> Compressed:
        A = fixedpoint_trajectory(self.D, m, grid, kappa_mode)
        T = TrajectoryOperator(A.matrix, (0, 0), (0, 0), grid.dim, "fixedpoint", {"fiber_N": grid.N, "fiber_L": grid.L})
        rmask = project_trajectory(self.P2, m, None, grid)
        cmask = project_trajectory(self.P1, m, None, grid)
        return self._compress(T, rmask, cmask, "fixedpoint")


def restrict(D: GammaSymbol, P1: ProjectionSymbol, P2: ProjectionSymbol | None = None) -> GammaTriple:
    """Form the triple ``(D, P1, P2)``; ``P2`` defaults to ``P1``."""
    return GammaTriple(D, P1, P1 if P2 is None else P2)
