"""Dense discretization of the demo operators for end-to-end validation.

The compact piece ``M`` (the cylinder ``S^1 x [0, 1]`` or the unit disc) is
discretized in the log-radial coordinate ``s = log_q(rho)`` where ``rho``
is ``t`` or ``|x|``.  With the unitary weight (``sqrt(rho ln q)`` on the
cylinder, ``rho sqrt(ln q)`` on the disc) the shift becomes an exact index
translation by one level, so the realization is a partial isometry and
unitary before truncation.  Angles are sampled at ``n_angle`` nodes and the
retained cut components are ``rho = q^{-k}``, ``0 <= k <= depth`` (plus the
fixed circle ``t = 0`` on the cylinder).

Multiplication terms do not couple angle nodes or interior and boundary
parts, so the assembled matrix is a direct sum of small blocks.  The
smallest singular value is computed blockwise; :func:`discretize_full_operator`
returns the full matrix for inspection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "DenseTerm",
    "DenseProblem",
    "discretize_blocks",
    "discretize_full_operator",
    "shift_matrix",
    "shift_unitarity",
    "near_kernel_metrics",
    "oracle_curve",
    "compare",
]


@dataclass(frozen=True)
class DenseTerm:
    """Coefficient of ``T^k``: multiplication on ``M`` and on the cut.

    ``interior(theta, rho)`` and ``boundary(theta, level)`` are vectorized
    callables; ``angular(j)`` is an optional Fourier multiplier in the
    angular frequency ``j`` applied after the boundary coefficient.
    """

    interior: Callable[[np.ndarray, np.ndarray], np.ndarray]
    boundary: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    angular: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class DenseProblem:
    """``P (sum_k A_k T^k) P`` on the cylinder piece or the unit disc.

    Parameters
    ----------
    geometry : {"cylinder", "disc"}
    terms : mapping ``k -> DenseTerm``
    W : ``"inside"`` keeps every retained component, otherwise a tuple of
        levels kept in the cut part.
    """

    geometry: str
    terms: dict
    q: float = 2.0
    n_angle: int = 8
    cells_per_level: int = 2
    depth: int = 8
    W: object = "inside"

    def __post_init__(self):
        if self.geometry not in ("cylinder", "disc"):
            raise ValueError(f"unknown oracle geometry {self.geometry!r}")

    def refined(self, level: int) -> "DenseProblem":
        return DenseProblem(self.geometry, self.terms, self.q, self.n_angle * 2 ** level,
                            self.cells_per_level * 2 ** level, self.depth, self.W)

    @property
    def angles(self) -> np.ndarray:
        return 2 * math.pi * (np.arange(self.n_angle) + 0.5) / self.n_angle

    @property
    def cell_levels(self) -> np.ndarray:
        m = self.cells_per_level
        s = -self.depth + (np.arange(m * self.depth) + 0.5) / m
        return self.q ** s

    @property
    def components(self) -> list[tuple[float, bool]]:
        """Retained cut levels and whether each is kept by the projection."""
        levels = [self.q ** (-k) for k in range(self.depth + 1)]
        out = []
        for lev in levels:
            keep = self.W == "inside" or any(abs(lev - w) < 1e-12 for w in self.W)
            out.append((lev, keep))
        if self.geometry == "cylinder":
            keep = self.W == "inside" or any(abs(w) < 1e-12 for w in self.W)
            out.append((0.0, keep))
        return out


def shift_matrix(n: int, step: int) -> np.ndarray:
    """``(S w)_i = w_{i - step}`` with zero outside ``0..n-1``."""
    return np.eye(n, k=-step)


def shift_unitarity(problem: DenseProblem, k: int = 1) -> dict:
    """Unitarity defect of the weighted shift before compression.

    On the untruncated line the shift is an index translation; realized
    cyclically on the retained cells it is a permutation, so
    ``||S^H S - I||`` measures the resampler alone.  ``mass_truncation`` is
    the fraction of cells whose image leaves the window.
    """
    n = problem.cell_levels.size
    step = k * problem.cells_per_level
    S = np.roll(np.eye(n), step, axis=0)
    defect = float(np.linalg.norm(S.conj().T @ S - np.eye(n), 2))
    return {"defect": defect, "mass_truncation": min(abs(step), n) / n}


def _interior_block(problem: DenseProblem, theta: float) -> np.ndarray:
    rho = problem.cell_levels
    n = rho.size
    m = problem.cells_per_level
    A = np.zeros((n, n), dtype=complex)
    for k, term in problem.terms.items():
        c = np.asarray(term.interior(np.full(n, theta), rho), dtype=complex) * np.ones(n)
        A += c[:, None] * shift_matrix(n, k * m)
    return A


def _boundary_shift(problem: DenseProblem, k: int) -> np.ndarray:
    comps = problem.components
    n = len(comps)
    S = np.zeros((n, n))
    for i, (lev, _) in enumerate(comps):
        if lev == 0.0:
            S[i, i] = 1.0
            continue
        # level q^{-i} receives the value from level q^{-i-k}
        j = i + k
        if 0 <= j <= problem.depth:
            S[i, j] = 1.0
    return S


def _boundary_part(problem: DenseProblem) -> np.ndarray:
    comps = problem.components
    levels = np.array([c[0] for c in comps])
    keep = np.array([c[1] for c in comps])
    th = problem.angles
    na, nc = th.size, len(comps)
    F = np.fft.fft(np.eye(na), norm="ortho")
    freqs = np.fft.fftfreq(na, 1.0 / na)
    out = np.zeros((na * nc, na * nc), dtype=complex)
    for k, term in problem.terms.items():
        f = term.boundary or term.interior
        TH, LV = np.meshgrid(th, levels, indexing="ij")
        coeff = np.asarray(f(TH, LV), dtype=complex) * np.ones_like(TH)
        C = np.diag(coeff.ravel())
        S = np.kron(np.eye(na), _boundary_shift(problem, k))
        if term.angular is not None:
            Ang = F.conj().T @ np.diag(np.asarray(term.angular(freqs), dtype=complex)) @ F
            C = C @ np.kron(Ang, np.eye(nc))
        out += C @ S
    mask = np.tile(keep, na)
    return out[np.ix_(mask, mask)]


def discretize_blocks(problem: DenseProblem) -> list[np.ndarray]:
    """Independent blocks: one interior block per angle node plus the cut part."""
    blocks = [_interior_block(problem, th) for th in problem.angles]
    bp = _boundary_part(problem)
    if bp.size:
        blocks.append(bp)
    return blocks


def discretize_full_operator(problem: DenseProblem) -> np.ndarray:
    """Dense matrix of ``P (sum_k A_k T^k) P`` on the compressed grid space."""
    return scipy.linalg.block_diag(*discretize_blocks(problem))


def near_kernel_metrics(matrix: np.ndarray | Sequence[np.ndarray]) -> dict:
    """Smallest singular value, its ratio to the largest, and near-kernel count.

    A sequence of matrices is treated as their direct sum.
    """
    mats = [matrix] if isinstance(matrix, np.ndarray) else list(matrix)
    svals = np.concatenate([np.linalg.svd(M, compute_uv=False) for M in mats if M.size])
    smin, smax = float(svals.min()), float(svals.max())
    return {
        "sigma_min": smin,
        "sigma_max": smax,
        "sigma_min_normalized": smin / smax if smax > 0 else 0.0,
        "n_below_10_sigma_min": int(np.sum(svals <= 10 * smin)),
        "size": int(svals.size),
    }


def oracle_curve(problem: DenseProblem, refinements: int = 3) -> list[dict]:
    """Metrics at successive refinement levels ``0, ..., refinements - 1``."""
    out = []
    for r in range(refinements):
        p = problem.refined(r)
        met = near_kernel_metrics(discretize_blocks(p))
        met.update({"level": r, "n_angle": p.n_angle, "cells_per_level": p.cells_per_level, "depth": p.depth})
        out.append(met)
    return out


@dataclass
class Comparison:
    verdict: str
    checker: str
    sigma_min_curve: list
    reason: str = ""
    floor: float = 0.0

    def to_json_dict(self) -> dict:
        return {"verdict": self.verdict, "checker": self.checker, "reason": self.reason,
                "sigma_min_curve": self.sigma_min_curve}


def compare(overall: str, curve: Sequence[dict], floor: float = 1e-3) -> Comparison:
    """Consistency of the checker verdict with oracle trends.

    ``elliptic`` is consistent when every ``sigma_min`` stays above ``floor``
    and the last is at least half of the first.  ``not_elliptic`` is
    consistent when ``sigma_min`` strictly decreases (or is already below
    ``floor`` throughout).
    """
    s = [c["sigma_min"] for c in curve]
    data = [[c["level"], c["sigma_min"]] for c in curve]
    if len(s) < 3:
        return Comparison("FLAGGED", overall, data, "need at least three refinements")
    if overall == "elliptic":
        ok = min(s) > floor and s[-1] >= 0.5 * s[0]
        return Comparison("CONSISTENT" if ok else "FLAGGED", overall, data,
                          "sigma_min bounded below" if ok else "sigma_min not bounded below", floor)
    if overall == "not_elliptic":
        dec = all(b < a for a, b in zip(s, s[1:]))
        ok = dec or max(s) < floor
        return Comparison("CONSISTENT" if ok else "FLAGGED", overall, data,
                          "sigma_min decreasing toward 0" if ok else "sigma_min not decreasing", floor)
    return Comparison("FLAGGED", overall, data, "checker inconclusive")
