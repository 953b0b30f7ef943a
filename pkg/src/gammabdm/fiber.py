"""Discretized fiber ``L^2(R) + C`` and the building blocks of boundary symbols.

Vectors live in the ``x_n`` representation on a uniform midpoint grid of
``[-L, L]`` (no node at 0).  Operators are stored as complex
``(N+1) x (N+1)`` matrices in *orthonormal coordinates*: the L^2 part is
``sqrt(h) * values`` and the last entry is the scalar summand.  In these
coordinates the half-line projections are exact diagonal 0/1 matrices and
every unitary operator is a unitary matrix.

The dual grid is anti-periodic, ``xi_k = (pi/L)(k - N/2 + 1/2)``, so it is
symmetric and avoids ``xi = 0``.  The discrete Fourier matrix
``V[k, j] = exp(-i xi_k x_j) / sqrt(N)`` is unitary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "FiberGrid",
    "FiberVector",
    "FiberOperator",
    "project_pm",
    "trace_pm",
    "kappa",
    "kappa_xi",
    "kappa_mass_loss",
    "gaussian_probes",
    "isometry_defect",
    "fourier_multiplier",
    "hardy_split",
    "HardySplit",
    "green_operator",
    "multiplication_decomposition",
    "green_kernels",
    "assemble_boundary_symbol",
    "transmission_check",
    "limit_at_infinity",
]

XiFunction = Union[Callable[[np.ndarray], np.ndarray], complex, float]


@dataclass(frozen=True)
class FiberGrid:
    """Uniform grid of ``N`` midpoints on ``[-L, L]``.

    Parameters
    ----------
    N : int
        Number of nodes, a power of two, at least 16.
    L : float
        Half-width of the interval.
    trace_order : int
        Polynomial degree of the one-sided trace extrapolation.
    """

    N: int = 64
    L: float = 10.0
    trace_order: int = 3

    def __post_init__(self) -> None:
        if self.N < 16 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if not 0 <= self.trace_order < self.N // 2:
            raise ValueError("grid too coarse for the trace stencil")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dim(self) -> int:
        return self.N + 1

    @cached_property
    def nodes(self) -> np.ndarray:
        x = -self.L + (np.arange(self.N) + 0.5) * self.h
        x.flags.writeable = False
        return x

    @cached_property
    def dual_nodes(self) -> np.ndarray:
        xi = (math.pi / self.L) * (np.arange(self.N) - self.N / 2 + 0.5)
        xi.flags.writeable = False
        return xi

    @cached_property
    def dft(self) -> np.ndarray:
        """Unitary DFT ``V`` mapping coordinates to dual-grid coefficients."""
        V = np.exp(-1j * np.outer(self.dual_nodes, self.nodes)) / math.sqrt(self.N)
        V.flags.writeable = False
        return V

    @cached_property
    def plus_mask(self) -> np.ndarray:
        m = self.nodes > 0
        m.flags.writeable = False
        return m


@dataclass(frozen=True, eq=False)
class FiberVector:
    """Element ``(u, v)`` of ``L^2(R) + C`` sampled at the grid nodes."""

    values: np.ndarray
    scalar: complex = 0.0

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=complex)
        if not np.all(np.isfinite(vals)) or not np.isfinite(self.scalar):
            raise ValueError("fiber vector entries must be finite")
        object.__setattr__(self, "values", vals)

    def coords(self, grid: FiberGrid) -> np.ndarray:
        return np.append(math.sqrt(grid.h) * self.values, self.scalar)

    @classmethod
    def from_coords(cls, grid: FiberGrid, w: np.ndarray) -> "FiberVector":
        return cls(np.asarray(w[:-1]) / math.sqrt(grid.h), complex(w[-1]))

    def norm(self, grid: FiberGrid) -> float:
        return float(np.linalg.norm(self.coords(grid)))


@dataclass(frozen=True, eq=False)
class FiberOperator:
    """Dense operator on the discretized fiber in orthonormal coordinates."""

    grid: FiberGrid
    matrix: np.ndarray
    tags: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        M = np.asarray(self.matrix, dtype=complex)
        if M.shape != (self.grid.dim, self.grid.dim):
            raise ValueError(f"matrix shape {M.shape} does not match grid dim {self.grid.dim}")
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "tags", frozenset(self.tags))

    @classmethod
    def identity(cls, grid: FiberGrid) -> "FiberOperator":
        return cls(grid, np.eye(grid.dim), {"a+", "a-", "d"})

    @classmethod
    def zero(cls, grid: FiberGrid) -> "FiberOperator":
        return cls(grid, np.zeros((grid.dim, grid.dim)))

    def _check(self, other: "FiberOperator") -> None:
        if other.grid != self.grid:
            raise ValueError("fiber operators live on different grids")

    def __matmul__(self, other):
        if isinstance(other, FiberVector):
            return FiberVector.from_coords(self.grid, self.matrix @ other.coords(self.grid))
        self._check(other)
        return FiberOperator(self.grid, self.matrix @ other.matrix, self.tags | other.tags)

    def __add__(self, other: "FiberOperator") -> "FiberOperator":
        self._check(other)
        return FiberOperator(self.grid, self.matrix + other.matrix, self.tags | other.tags)

    def __sub__(self, other: "FiberOperator") -> "FiberOperator":
        return self + (-1) * other

    def __mul__(self, c: complex) -> "FiberOperator":
        return FiberOperator(self.grid, c * self.matrix, self.tags)

    __rmul__ = __mul__

    def __neg__(self) -> "FiberOperator":
        return -1 * self

    @property
    def H(self) -> "FiberOperator":
        return FiberOperator(self.grid, self.matrix.conj().T, self.tags)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def svdvals(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)

    def is_projection(self, tol: float = 1e-12) -> bool:
        M = self.matrix
        return bool(np.linalg.norm(M @ M - M, 2) <= tol and np.linalg.norm(M - M.conj().T, 2) <= tol)


# --------------------------------------------------------------------- basics
def _sign(sign) -> int:
    if sign in ("+", 1, "plus"):
        return 1
    if sign in ("-", -1, "minus"):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def _half_mask(grid: FiberGrid, sign) -> np.ndarray:
    return grid.plus_mask if _sign(sign) > 0 else ~grid.plus_mask


def project_pm(grid: FiberGrid, sign) -> FiberOperator:
    """Half-line projection (indicator of ``+-x_n > 0``), identity on ``C``."""
    d = np.append(_half_mask(grid, sign).astype(float), 1.0)
    return FiberOperator(grid, np.diag(d), {"projection"})


@lru_cache(maxsize=64)
def _trace_weights(grid: FiberGrid, s: int) -> tuple[np.ndarray, np.ndarray]:
    p = grid.trace_order
    if s > 0:
        idx = np.arange(grid.N // 2, grid.N // 2 + p + 1)
    else:
        idx = np.arange(grid.N // 2 - 1, grid.N // 2 - p - 2, -1)
    x = grid.nodes[idx]
    # Lagrange weights for evaluation at 0
    w = np.ones(p + 1)
    for i in range(p + 1):
        for j in range(p + 1):
            if i != j:
                w[i] *= (0.0 - x[j]) / (x[i] - x[j])
    return idx, w


def trace_pm(grid: FiberGrid, u: FiberVector, sign) -> complex:
    """One-sided value ``u(0+)`` or ``u(0-)`` by polynomial extrapolation."""
    idx, w = _trace_weights(grid, _sign(sign))
    return complex(w @ u.values[idx])


@lru_cache(maxsize=256)
def _kappa_matrix(grid: FiberGrid, lam: float) -> np.ndarray:
    y = lam * grid.nodes
    B = np.exp(1j * np.outer(y, grid.dual_nodes)) / math.sqrt(grid.N)
    B[np.abs(y) > grid.L] = 0.0
    K = np.zeros((grid.dim, grid.dim), dtype=complex)
    K[:-1, :-1] = math.sqrt(lam) * (B @ grid.dft)
    K[-1, -1] = 1.0
    K.flags.writeable = False
    return K


def kappa(grid: FiberGrid, lam: float, mode: str = "sinc", base: float | None = None) -> FiberOperator:
    """Dilation ``u(x) -> lam^{1/2} u(lam x)`` on the L^2 part.

    Parameters
    ----------
    mode : {"sinc", "power"}
        ``"sinc"`` resamples the trigonometric interpolant directly.
        ``"power"`` requires ``lam = base**k`` and returns the k-th power of
        the cached ``kappa(base)`` so that the group law holds exactly along
        powers of ``base``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if lam == 1.0:
        return FiberOperator.identity(grid)
    if mode == "power":
        if base is None:
            raise ValueError("power mode needs a base")
        k = round(math.log(lam) / math.log(base))
        if not math.isclose(base ** k, lam, rel_tol=1e-12):
            raise ValueError(f"lambda={lam} is not a power of {base}")
        K = np.linalg.matrix_power(_kappa_matrix(grid, base if k > 0 else 1.0 / base), abs(k))
        return FiberOperator(grid, K, {"kappa"})
    if mode != "sinc":
        raise ValueError(f"unknown kappa mode {mode!r}")
    return FiberOperator(grid, _kappa_matrix(grid, float(lam)), {"kappa"})


def kappa_xi(grid: FiberGrid, mu: float, mode: str = "sinc", base: float | None = None) -> FiberOperator:
    """Dilation by ``mu`` acting in the frequency variable.

    ``(kappa_mu f)(xi) = mu^{1/2} f(mu xi)`` on the Fourier side equals the
    x-side dilation by ``1/mu``.
    """
    return kappa(grid, 1.0 / mu, mode, None if base is None else 1.0 / base)


def kappa_mass_loss(grid: FiberGrid, lam: float, u: FiberVector) -> float:
    """Relative mass lost by truncation to ``[-L, L]`` when applying ``kappa``."""
    v = kappa(grid, lam) @ u
    nu = u.norm(grid)
    return 0.0 if nu == 0 else max(0.0, 1.0 - (v.norm(grid) / nu) ** 2)


def gaussian_probes(grid: FiberGrid, width: float | None = None, n_freq: int = 3) -> list[FiberVector]:
    """Well-resolved localized test vectors: modulated Gaussians at the centre.

    The default width ``L / 32`` keeps dilations by factors up to 4 inside
    the box and below the grid's Nyquist frequency (for ``N >= 256``).
    """
    s = grid.L / 32 if width is None else width
    x = grid.nodes
    nyq = math.pi / grid.h
    freqs = np.linspace(-nyq / 64, nyq / 64, n_freq) if n_freq > 1 else np.zeros(1)
    return [FiberVector(np.exp(-0.5 * (x / s) ** 2 + 1j * w * x), 0.0) for w in freqs]


def isometry_defect(op: FiberOperator, probes: Sequence[FiberVector]) -> float:
    """``max | ||op u|| / ||u|| - 1 |`` over the probes."""
    grid = op.grid
    worst = 0.0
    for u in probes:
        c = u.coords(grid)
        worst = max(worst, abs(np.linalg.norm(op.matrix @ c) / np.linalg.norm(c) - 1.0))
    return float(worst)


def _sample(grid: FiberGrid, a: XiFunction, xi: np.ndarray | None = None) -> np.ndarray:
    xi = grid.dual_nodes if xi is None else xi
    if callable(a):
        vals = np.asarray(a(xi), dtype=complex)
        return np.broadcast_to(vals, xi.shape).copy()
    return np.full(xi.shape, complex(a))


def _embed(grid: FiberGrid, block: np.ndarray, d: complex = 0.0) -> np.ndarray:
    M = np.zeros((grid.dim, grid.dim), dtype=complex)
    M[:-1, :-1] = block
    M[-1, -1] = d
    return M


def _op(grid: FiberGrid, a: XiFunction) -> np.ndarray:
    V = grid.dft
    return (V.conj().T * _sample(grid, a)) @ V


def fourier_multiplier(grid: FiberGrid, a: XiFunction) -> FiberOperator:
    """``F^{-1} a F`` on the L^2 part, identity on ``C``."""
    return FiberOperator(grid, _embed(grid, _op(grid, a), 1.0), {"multiplier"})


# ----------------------------------------------------------- Hardy splitting
def limit_at_infinity(a: Callable[[np.ndarray], np.ndarray], tol: float = 1e-6) -> complex:
    """Common limit of ``a`` at ``+-infinity``.

    Raises
    ------
    ValueError
        If the limits do not exist numerically or differ.
    """
    far = np.array([1e6, 1e8, -1e6, -1e8])
    v = np.asarray(a(far), dtype=complex) * np.ones(4)
    scale = 1.0 + np.max(np.abs(v))
    if abs(v[0] - v[1]) > 1e-4 * scale or abs(v[2] - v[3]) > 1e-4 * scale:
        raise ValueError("symbol has no limit at infinity")
    if abs(v[1] - v[3]) > tol * scale:
        raise ValueError(f"limits at +inf ({v[1]:.6g}) and -inf ({v[3]:.6g}) differ")
    return complex(0.5 * (v[1] + v[3]))


@dataclass(frozen=True)
class HardySplit:
    """``a = a_inf + a_zero + a_plus + a_minus`` with ``a_plus`` of kernel on ``x > 0``.

    ``coeffs[m]`` is the lattice kernel of ``a - a_inf`` at ``x = m h``;
    ``a_zero`` is its diagonal (``m = 0``) entry.  The parts are
    trigonometric polynomials in ``xi`` evaluable anywhere.
    """

    grid: FiberGrid
    a_inf: complex
    m: np.ndarray
    coeffs: np.ndarray

    def _part(self, sel: np.ndarray, xi: np.ndarray, deriv: bool = False) -> np.ndarray:
        mh = self.m[sel] * self.grid.h
        c = self.coeffs[sel]
        E = np.exp(-1j * np.multiply.outer(np.asarray(xi, dtype=float), mh))
        return E @ (c * (-1j * mh)) if deriv else E @ c

    @property
    def a_zero(self) -> complex:
        return complex(self.coeffs[self.m == 0].sum())

    def a_plus(self, xi, deriv: bool = False):
        return self._part(self.m > 0, xi, deriv)

    def a_minus(self, xi, deriv: bool = False):
        return self._part(self.m < 0, xi, deriv)


def hardy_split(grid: FiberGrid, a: XiFunction, a_inf: complex | None = None) -> HardySplit:
    """Split ``a - a_inf`` on the lattice into parts supported on ``x > 0`` and ``x < 0``.

    The Nyquist term ``m = -N/2`` is dropped so that the parts of a real
    symbol are conjugate-symmetric.
    """
    if a_inf is None:
        a_inf = limit_at_infinity(a) if callable(a) else complex(a)
    N = grid.N
    m = np.arange(-N // 2 + 1, N // 2)
    xi = grid.dual_nodes
    c = np.exp(1j * np.outer(m * grid.h, xi)) @ (_sample(grid, a) - a_inf) / N
    return HardySplit(grid, complex(a_inf), m, c)


def _lattice_quotient(grid: FiberGrid, f, df, xi, eta, kernel: str) -> np.ndarray:
    """Difference quotient ``(f(xi) - f(eta)) / (i (xi - eta))`` and its lattice form."""
    fx, fe = f(xi), f(eta)
    diff = np.subtract.outer(xi, eta)
    if kernel == "lattice":
        den = (2.0 / grid.h) * 1j * np.sin(grid.h * diff / 2.0)
    elif kernel == "continuum":
        den = 1j * diff
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    small = np.abs(diff) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.subtract.outer(fx, fe) / den
    if np.any(small):
        dd = np.broadcast_to(-1j * df(xi)[:, None], g.shape)
        g = np.where(small, dd, g)
    return g


def green_operator(grid: FiberGrid, g: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Matrix of ``u -> (1/2pi) int g(xi, eta) u^(eta) d eta`` in coordinates."""
    xi = grid.dual_nodes
    G = np.asarray(g(xi[:, None], xi[None, :]), dtype=complex)
    G = np.broadcast_to(G, (grid.N, grid.N))
    V = grid.dft
    return V.conj().T @ (G / (2.0 * grid.L)) @ V


def green_kernels(grid: FiberGrid, a: XiFunction, a_inf: complex | None = None, kernel: str = "lattice"):
    """Green kernels ``(g_plus, g_minus)`` making the decomposition exact.

    ``g_plus`` is built from ``a_minus`` and ``g_minus`` from ``a_plus``
    (with a minus sign), both as difference quotients.
    """
    split = hardy_split(grid, a, a_inf)

    def g_plus(xi, eta):
        xi_, eta_ = np.ravel(xi), np.ravel(eta)
        return _lattice_quotient(grid, split.a_minus, lambda z: split.a_minus(z, True), xi_, eta_, kernel)

    def g_minus(xi, eta):
        xi_, eta_ = np.ravel(xi), np.ravel(eta)
        return -_lattice_quotient(grid, split.a_plus, lambda z: split.a_plus(z, True), xi_, eta_, kernel)

    return g_plus, g_minus


def multiplication_decomposition(
    grid: FiberGrid, a: XiFunction, a_inf: complex | None = None, kernel: str = "lattice"
) -> FiberOperator:
    """``Pi+ a Pi+ + Pi- a Pi- + G_plus + G_minus`` with ``d = b = c = 0``.

    Parameters
    ----------
    kernel : {"lattice", "continuum"}
        ``"lattice"`` uses the grid-consistent difference quotient with
        denominator ``(2/h) i sin(h (xi - eta)/2)``, for which the identity
        with :func:`fourier_multiplier` holds exactly away from the box
        edges.  ``"continuum"`` uses ``i (xi - eta)`` and converges at first
        order in ``h``.
    """
    C = _op(grid, a)
    p = grid.plus_mask
    g_plus, g_minus = green_kernels(grid, a, a_inf, kernel)
    xi = grid.dual_nodes
    V = grid.dft
    Vh = V.conj().T
    block = np.zeros_like(C)
    block[np.ix_(p, p)] = C[np.ix_(p, p)]
    block[np.ix_(~p, ~p)] = C[np.ix_(~p, ~p)]
    s = 1.0 / (2 * grid.L)
    block[np.ix_(~p, p)] = (Vh[~p] @ (s * g_plus(xi, xi))) @ V[:, p]
    block[np.ix_(p, ~p)] = (Vh[p] @ (s * g_minus(xi, xi))) @ V[:, ~p]
    return FiberOperator(grid, _embed(grid, block, 0.0), {"a+", "a-", "green+", "green-"})


def assemble_boundary_symbol(
    grid: FiberGrid,
    a_plus: XiFunction = 0.0,
    a_minus: XiFunction = 0.0,
    g_plus=None,
    g_minus=None,
    b_plus: XiFunction | None = None,
    b_minus: XiFunction | None = None,
    c: XiFunction | None = None,
    d: complex = 0.0,
) -> FiberOperator:
    """Block matrix ``[[corner, c], [b, d]]`` of a transmission boundary symbol.

    The trace functional paired with Green kernels and boundary rows is the
    band integral ``(1/2pi) int f(eta) d eta`` over the dual grid.
    """
    V = grid.dft
    p = grid.plus_mask.astype(float)
    q = 1.0 - p
    tags = set()
    block = np.zeros((grid.N, grid.N), dtype=complex)
    if callable(a_plus) or a_plus != 0:
        block += p[:, None] * _op(grid, a_plus) * p[None, :]
        tags.add("a+")
    if callable(a_minus) or a_minus != 0:
        block += q[:, None] * _op(grid, a_minus) * q[None, :]
        tags.add("a-")
    if g_plus is not None:
        block += green_operator(grid, g_plus) * p[None, :]
        tags.add("green+")
    if g_minus is not None:
        block += green_operator(grid, g_minus) * q[None, :]
        tags.add("green-")
    M = _embed(grid, block, complex(d))
    if d != 0:
        tags.add("d")
    s = math.sqrt(2.0 * grid.L)
    if b_plus is not None:
        M[-1, :-1] += (_sample(grid, b_plus) @ V) * p / s
        tags.add("b+")
    if b_minus is not None:
        M[-1, :-1] += (_sample(grid, b_minus) @ V) * q / s
        tags.add("b-")
    if c is not None:
        M[:-1, -1] = V.conj().T @ _sample(grid, c) / s
        tags.add("c")
    return FiberOperator(grid, M, tags)


# ----------------------------------------------------- transmission property
def _fd_weights(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Central difference offsets (in steps) and weights for the given order."""
    if order == 0:
        return np.array([0.0]), np.array([1.0])
    j = np.arange(order + 1)
    offs = order / 2.0 - j
    w = np.array([(-1) ** int(i) * math.comb(order, int(i)) for i in j], dtype=float)
    return offs, w


def _fd_step(order: int, h: float) -> float:
    return max(h, np.finfo(float).eps ** (1.0 / (order + 2)))


def transmission_check(
    components: Mapping[int, Callable],
    K: int = 2,
    tol: float = 1e-6,
    h: float = 1e-4,
    xp: Sequence[float] = (0.0,),
    dim_xip: int = 1,
) -> tuple[bool, float]:
    """Finite-difference test of the transmission parity condition.

    Parameters
    ----------
    components : mapping ``l -> a_l(xp, xn, xip, xin)``
        Homogeneous components of degree ``l``; ``xip`` is a vector of
        length ``dim_xip``.
    K : int
        Maximal total derivative order ``k + |alpha|``.

    Returns
    -------
    passed, worst : bool, float
        ``worst`` is the largest violation, scaled by ``1 + |lhs| + |rhs|``.
    """
    xp = tuple(xp)
    worst = 0.0
    degrees = sorted(components, reverse=True)
    if degrees:
        top = degrees[0]
        degrees = [l for l in degrees if l >= top - K]
    for l in degrees:
        a = components[l]
        for k in range(K + 1):
            for alpha in _multi_indices(dim_xip, K - k):
                vals = []
                for xin in (1.0, -1.0):
                    vals.append(_mixed_derivative(a, xp, xin, k, alpha, h))
                na = sum(alpha)
                expected = (-1) ** (l - na) * vals[1]
                viol = abs(vals[0] - expected) / (1.0 + abs(vals[0]) + abs(vals[1]))
                worst = max(worst, viol)
    return worst <= tol, float(worst)


def _multi_indices(dim: int, max_order: int):
    if dim == 0:
        yield ()
        return
    for first in range(max_order + 1):
        for rest in _multi_indices(dim - 1, max_order - first):
            yield (first,) + rest


def _mixed_derivative(a, xp, xin, k, alpha, h) -> complex:
    """``D^k_{x_n} D^alpha_{xi'} a`` at ``x_n = 0, xi' = 0`` with ``D = -i d``."""
    axes = [(k, _fd_step(k, h))] + [(o, _fd_step(o, h)) for o in alpha]
    stencils = [_fd_weights(o) for o, _ in axes]
    total = 0.0 + 0.0j
    grids = np.meshgrid(*[np.arange(len(s[0])) for s in stencils], indexing="ij")
    for idx in zip(*(g.ravel() for g in grids)):
        w = 1.0
        shifts = []
        for ax, i in enumerate(idx):
            offs, ws = stencils[ax]
            w *= ws[i]
            shifts.append(offs[i] * axes[ax][1])
        xn = shifts[0]
        xip = np.array(shifts[1:])
        total += w * complex(a(xp, xn, xip, xin))
    denom = 1.0
    for o, s in axes:
        denom *= s ** o
    return (-1j) ** (k + sum(alpha)) * total / denom
