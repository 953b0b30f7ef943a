"""Invertibility of trajectory symbols and the ellipticity report.

Policy
------
* Constant-coefficient scalar bands are decided exactly: a Laurent
  operator on the full line is invertible iff its symbol does not vanish; a
  Toeplitz operator on a half-line additionally needs winding number 0.
* Variable-coefficient bands first consult the limit symbols at each
  infinite end of the window: a vanishing limit symbol, a nonzero winding
  at a half-line end, or different windings at the two ends of a full line
  mean non-invertibility.  An equal nonzero winding at both ends is
  removed by shifting the column window.  Then finite sections decide.
* A Neumann bound ``||T - I|| < 1`` confirms invertibility when the
  compression is square with equal row and column ranges.
"""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fiber import FiberGrid
from .geometry import BoundaryCospherePoint, CospherePoint
from .trajectory import Compressed, GammaTriple, limit_coefficients

__all__ = [
    "InvertibilityVerdict",
    "PointRecord",
    "EllipticityReport",
    "FredholmSettings",
    "SamplingPlan",
    "winding_number",
    "laurent_symbol",
    "toeplitz_matrix",
    "finite_section_invertibility",
    "check_point",
    "check_ellipticity",
    "ASSUMPTIONS",
    "default_plan",
    "fixedpoint_sigma",
]

ASSUMPTIONS = (
    "The group Z is amenable.",
    "The action is assumed topologically free at every sampled point that is "
    "assembled with orbit trajectories; points flagged 'fixedpoint' use the "
    "fixed-point symbol with trivial quotient group instead.",
    "Elliptic (all sampled trajectory symbols invertible) is equivalent to "
    "the Fredholm property, up to completeness of the sampling plan.",
)


class AliasingWarning(UserWarning):
    """Consecutive argument increments exceed pi/2."""


@dataclass
class InvertibilityVerdict:
    """Outcome of an invertibility test for one trajectory symbol."""

    status: str
    sigma_min_sequence: list = field(default_factory=list)
    threshold: float = 1e-6
    oracle_used: str = "none"
    notes: list = field(default_factory=list)

    @property
    def sigma_min(self) -> float:
        if not self.sigma_min_sequence:
            return math.nan
        return float(self.sigma_min_sequence[-1][1])


@dataclass(frozen=True)
class FredholmSettings:
    threshold: float = 1e-6
    window: int = 16
    max_doublings: int = 3
    rel_change: float = 0.1
    n_far: int = 200
    winding_samples: int = 1024


# -------------------------------------------------------------------- winding
def winding_number(samples: Sequence[complex], tol: float = 1e-12) -> int:
    """Winding number of a closed curve sampled in order around the circle.

    Raises
    ------
    ValueError
        If a sample is (numerically) zero.
    """
    z = np.asarray(samples, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(z)))) if z.size else 1.0
    if z.size == 0 or np.min(np.abs(z)) <= tol * scale:
        raise ValueError("symbol vanishes on the circle")
    steps = np.angle(np.roll(z, -1) / z)
    if np.max(np.abs(steps)) > math.pi / 2:
        warnings.warn("argument increments exceed pi/2; winding may be aliased", AliasingWarning, stacklevel=2)
    return int(round(steps.sum() / (2 * math.pi)))


def laurent_symbol(coeffs: dict, theta: np.ndarray) -> np.ndarray:
    """``sum_k c_k e^{i k theta}`` (matrix coefficients allowed)."""
    theta = np.asarray(theta, dtype=float)
    out = None
    for k, c in coeffs.items():
        c = np.asarray(c, dtype=complex)
        term = np.multiply.outer(np.exp(1j * k * theta), c)
        out = term if out is None else out + term
    return out


def toeplitz_matrix(coeffs: dict, size: int, two_sided: bool = False) -> np.ndarray:
    """Finite section with ``M[n, n+k] = c_k`` on ``size`` slots."""
    M = np.zeros((size, size), dtype=complex)
    for k, c in coeffs.items():
        if abs(k) < size:
            M += c * np.eye(size, k=k)
    return M


def _symbol_winding(coeffs: dict, samples: int) -> tuple[float, int | None]:
    """Minimum modulus and winding (of the determinant for matrix symbols)."""
    theta = 2 * math.pi * np.arange(samples) / samples
    vals = laurent_symbol(coeffs, theta)
    if vals.ndim == 3:
        svals = np.linalg.svd(vals, compute_uv=False)
        mn = float(svals[:, -1].min())
        det = np.linalg.det(vals)
    else:
        mn = float(np.abs(vals).min())
        det = vals
    if mn <= 1e-12 * max(1.0, float(np.abs(det).max())):
        return mn, None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        return mn, winding_number(det)


# -------------------------------------------------------------- finite sections
def _sigma(M: np.ndarray) -> float:
    if min(M.shape, default=0) == 0:
        return math.inf
    s = np.linalg.svd(M, compute_uv=False)
    if M.shape[0] != M.shape[1]:
        return 0.0
    return float(s[-1])


def finite_section_invertibility(
    build: Callable[[int], Compressed],
    settings: FredholmSettings = FredholmSettings(),
    limits: dict | None = None,
    K0: int | None = None,
    ends: dict | None = None,
) -> InvertibilityVerdict:
    """Decide invertibility from a window-parametrized family.

    Parameters
    ----------
    build : callable ``K -> Compressed``
        Assembles the compressed trajectory on window half-width ``K``.
    limits : dict, optional
        ``{"-": coeffs, "+": coeffs}`` limit band coefficients for the
        infinite ends (as from :func:`~gammabdm.trajectory.limit_coefficients`).
    ends : dict, optional
        Which ends of the slot set are infinite; defaults to the window
        edges of the compressed operator.
    """
    thr = settings.threshold
    K = settings.window if K0 is None else K0
    first = build(K)
    op = first.op
    ends = op.ends if ends is None else ends
    notes: list[str] = []

    if min(op.matrix.shape, default=0) == 0:
        return InvertibilityVerdict("invertible", [(K, math.inf)], thr, "none", ["empty compression"])

    # exact path for constant-coefficient scalar bands
    if op.kind == "interior" and first.full.laurent and op.slot_dim == 1:
        coeffs = _band_coeffs(first.full.matrix)
        mn, w = _symbol_winding(coeffs, settings.winding_samples)
        seq = [(K, _sigma(op.matrix))]
        half = ends.get("-") != ends.get("+")
        if not (ends.get("-") or ends.get("+")):
            st = "invertible" if seq[0][1] > thr else "not_invertible"
            return InvertibilityVerdict(st, seq, thr, "none", ["finite"])
        if w is None or mn <= thr:
            return InvertibilityVerdict("not_invertible", seq, thr, "winding", [f"symbol min modulus {mn:.3g}"])
        if half and w != 0:
            return InvertibilityVerdict("not_invertible", seq, thr, "winding", [f"half-line winding {w}"])
        notes.append(f"winding {w}, min modulus {mn:.3g}")
        return InvertibilityVerdict("invertible", [(K, mn)] if not half else seq, thr, "winding", notes)

    # limit-operator checks
    offset = 0
    if limits:
        wind = {}
        for end, coeffs in limits.items():
            if not ends.get(end):
                continue
            mn, w = _symbol_winding(coeffs, settings.winding_samples)
            if w is None or mn <= thr:
                return InvertibilityVerdict("not_invertible", [], thr, "winding", [f"limit symbol at {end} end vanishes"])
            wind[end] = w
        if len(wind) == 1 and next(iter(wind.values())) != 0:
            return InvertibilityVerdict("not_invertible", [], thr, "winding", [f"half-line winding {wind}"])
        if len(wind) == 2:
            if wind["-"] != wind["+"]:
                return InvertibilityVerdict("not_invertible", [], thr, "winding", [f"end windings differ {wind}"])
            offset = wind["+"]
            if offset:
                notes.append(f"columns shifted by {offset} to remove winding")

    seq = []
    cur = first if offset == 0 else build_offset(build, K, offset)
    for i in range(settings.max_doublings + 1):
        if i:
            K *= 2
            cur = build(K) if offset == 0 else build_offset(build, K, offset)
        seq.append((K, _sigma(cur.op.matrix)))
        if len(seq) >= 2:
            prev, last = seq[-2][1], seq[-1][1]
            if last < thr and prev < thr:
                return InvertibilityVerdict("not_invertible", seq, thr, "none", notes)
            if last > thr and abs(last - prev) <= settings.rel_change * max(prev, 1e-300):
                oracle = "neumann" if _neumann(cur) else "none"
                return InvertibilityVerdict("invertible", seq, thr, oracle, notes)
        if not (ends.get("-") or ends.get("+")):
            # nothing to truncate: exact
            status = "invertible" if seq[-1][1] > thr else "not_invertible"
            return InvertibilityVerdict(status, seq, thr, "none", notes + ["finite"])
    if _neumann(cur):
        return InvertibilityVerdict("invertible", seq, thr, "neumann", notes)
    if seq[-1][1] < thr:
        return InvertibilityVerdict("not_invertible", seq, thr, "none", notes)
    return InvertibilityVerdict("inconclusive", seq, thr, "none", notes + ["finite sections did not stabilize"])


def build_offset(build, K, offset):
    try:
        return build(K, offset)
    except TypeError:
        raise ValueError("family does not support column offsets") from None


def _resolved_basis(grid: FiberGrid, mask: np.ndarray, w: float, omega: float, leak: float) -> np.ndarray:
    """Orthonormal vectors supported in ``mask & |x| < w`` with band energy ``>= 1 - leak``."""
    V = grid.dft
    n_slots = mask.size // grid.dim
    band = np.abs(grid.dual_nodes) < omega
    cols = []
    for r in range(n_slots):
        m = mask[r * grid.dim:(r + 1) * grid.dim]
        sel = np.flatnonzero(m[:-1] & (np.abs(grid.nodes) < w))
        if sel.size:
            Vs = V[np.ix_(band, sel)]
            lam, U = np.linalg.eigh(Vs.conj().T @ Vs)
            for q in np.flatnonzero(lam >= 1 - leak):
                e = np.zeros(mask.size, dtype=complex)
                e[r * grid.dim + sel] = U[:, q]
                cols.append(e)
        if m[-1]:
            e = np.zeros(mask.size, dtype=complex)
            e[(r + 1) * grid.dim - 1] = 1.0
            cols.append(e)
    return np.array(cols).T if cols else np.zeros((mask.size, 0))


def fixedpoint_sigma(c: Compressed, grid: FiberGrid, scale: float, band: tuple[int, int],
                     leak: float = 1e-6) -> tuple[float, float]:
    """Lower bound of the fixed-point operator and its adjoint on resolved vectors.

    Dilations by ``scale^k`` move mass across the box edge and across the
    Nyquist frequency, so only vectors concentrated in ``|x| < L / s`` and
    ``|xi| < pi / (h s)`` with ``s = scale^kmax`` are represented
    faithfully.  Such vectors (band-energy leak below ``leak``) span the
    test subspaces for the operator and for its adjoint.  Returns
    ``(sigma, window)``.
    """
    s = max(scale, 1.0 / scale) ** max(abs(band[0]), abs(band[1]))
    w, omega = grid.L / s, math.pi / (grid.h * s)
    F = c.full.matrix
    vals = []
    for M, dom, rng in ((F, c.col_mask, c.row_mask), (F.conj().T, c.row_mask, c.col_mask)):
        E = _resolved_basis(grid, dom, w, omega, leak)
        if E.shape[1]:
            A = M[rng] @ E
            vals.append(float(np.linalg.svd(A, compute_uv=False)[-1]) if A.shape[0] >= A.shape[1] else 0.0)
    return (min(vals) if vals else math.inf), float(w)


def _neumann(c: Compressed) -> bool:
    if not np.array_equal(c.row_mask, c.col_mask):
        return False
    M = c.op.matrix
    if M.shape[0] != M.shape[1] or M.size == 0:
        return False
    return bool(np.linalg.norm(M - np.eye(M.shape[0]), 2) < 1.0)


def _band_coeffs(M: np.ndarray) -> dict:
    out = {}
    for k in range(-M.shape[0] + 1, M.shape[1]):
        d = np.diagonal(M, k)
        if d.size and abs(d[0]) > 0:
            out[k] = complex(d[0])
    return out or {0: 0.0}


# ------------------------------------------------------------------- reports
@dataclass
class PointRecord:
    kind: str
    label: str
    coords: dict
    verdict: InvertibilityVerdict
    path: str
    domain_dim: int = 0
    codomain_dim: int = 0


@dataclass
class SamplingPlan:
    """Explicit point sets per stratum."""

    interior: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    description: dict = field(default_factory=dict)


@dataclass
class EllipticityReport:
    per_point: list
    overall: str
    sampling_plan: dict
    parameters: dict
    timing: dict
    assumptions: tuple = ASSUMPTIONS

    def to_json_dict(self) -> dict:
        def rec(r: PointRecord):
            v = r.verdict
            return {
                "kind": r.kind,
                "label": r.label,
                "coords": r.coords,
                "path": r.path,
                "status": v.status,
                "oracle": v.oracle_used,
                "threshold": v.threshold,
                "sigma_min_sequence": [[int(k), _num(s)] for k, s in v.sigma_min_sequence],
                "window_sizes": [int(k) for k, _ in v.sigma_min_sequence],
                "notes": list(v.notes),
                "domain_dim": r.domain_dim,
                "codomain_dim": r.codomain_dim,
            }

        counts = {}
        for r in self.per_point:
            counts[r.verdict.status] = counts.get(r.verdict.status, 0) + 1
        return {
            "overall": self.overall,
            "statement": _statement(self.overall),
            "assumptions": list(self.assumptions),
            "counts": counts,
            "parameters": self.parameters,
            "sampling_plan": self.sampling_plan,
            "timing": self.timing,
            "points": [rec(r) for r in self.per_point],
        }


def _num(x: float):
    return None if x is None or not math.isfinite(x) else float(x)


def _statement(overall: str) -> str:
    if overall == "elliptic":
        return "All sampled trajectory symbols are invertible: trajectory elliptic, hence Fredholm (up to sampling completeness)."
    if overall == "not_elliptic":
        return "Some trajectory symbol is not invertible: not trajectory elliptic, hence not Fredholm."
    return "Some sampled points were inconclusive; no Fredholm verdict."


def aggregate(records: Sequence[PointRecord]) -> str:
    st = [r.verdict.status for r in records]
    if "not_invertible" in st:
        return "not_elliptic"
    if "inconclusive" in st or not st:
        return "inconclusive"
    return "elliptic"


def _point_coords(p) -> dict:
    if isinstance(p, BoundaryCospherePoint):
        return {"component": [p.component.gamma, p.component.j], "x": list(p.x), "xi": list(p.xi)}
    if p.at_infinity:
        return {"at_infinity": True}
    return {"x": list(p.x), "xi": list(p.xi), "side": p.side}


def point_label(p) -> str:
    if isinstance(p, BoundaryCospherePoint):
        return "B[" + ",".join(f"{c:.6g}" for c in p.x) + "|" + ",".join(f"{c:.3g}" for c in p.xi) + "]"
    if p.at_infinity:
        return "inf"
    s = p.side or ""
    return "I[" + ",".join(f"{c:.6g}" for c in p.x) + s + "|" + ",".join(f"{c:.3g}" for c in p.xi) + "]"


def check_point(
    triple: GammaTriple,
    p,
    grid: FiberGrid,
    settings: FredholmSettings = FredholmSettings(),
    kappa_mode: str = "sinc",
) -> PointRecord:
    """Invertibility verdict of the compressed trajectory symbol at one point."""
    geo = triple.geometry
    if isinstance(p, BoundaryCospherePoint):
        if not geo.fixed_point_data(p).topologically_free:
            c = triple.fixedpoint(p, grid, kappa_mode)
            s = _sigma(c.op.matrix)
            notes = [f"plain sigma_min {s:.6g}"]
            if s <= settings.threshold:
                # singular directions may be box or Nyquist artifacts of the dilations
                s, w = fixedpoint_sigma(c, grid, geo.fixed_multiplier_scale(p), triple.D.band)
                notes.append(f"resolved sigma_min {s:.6g} on |x| < {w:.6g}")
            v = InvertibilityVerdict("invertible" if s > settings.threshold else "not_invertible", [(0, s)],
                                     settings.threshold, notes=notes)
            if s > settings.threshold and _neumann(c):
                v.oracle_used = "neumann"
            return PointRecord("boundary", point_label(p), _point_coords(p), v, "fixedpoint",
                               int(c.col_mask.sum()), int(c.row_mask.sum()))
        K0 = max(4, settings.window // 2)
        fam = lambda K, off=0: triple.boundary(p, (-K, K), grid)
        v = finite_section_invertibility(fam, settings, None, K0, _far_ends(triple, p, settings.n_far, grid))
        last = triple.boundary(p, (-K0, K0), grid)
        return PointRecord("boundary", point_label(p), _point_coords(p), v, "orbit",
                           int(last.col_mask.sum()), int(last.row_mask.sum()))
    if p.at_infinity and triple.P1.interior(p) == 0 and triple.P2.interior(p) == 0:
        v = InvertibilityVerdict("invertible", [(0, math.inf)], settings.threshold, "none", ["empty compression"])
        return PointRecord("interior", point_label(p), _point_coords(p), v, "orbit")
    fam = lambda K, off=0: triple.interior(p, (-K, K), off)
    limits = None
    if not p.at_infinity:
        limits = {}
        for end, sgn in (("-", -1), ("+", 1)):
            coeffs, conv = limit_coefficients(triple.D, p, sgn, settings.n_far)
            if conv:
                limits[end] = {k: (v[0, 0] if v.shape == (1, 1) else v) for k, v in coeffs.items()}
    ends = None if p.at_infinity else _far_ends(triple, p, settings.n_far)
    v = finite_section_invertibility(fam, settings, limits, None, ends)
    c = fam(settings.window)
    return PointRecord("interior", point_label(p), _point_coords(p), v, "orbit",
                       int(c.col_mask.sum()), int(c.row_mask.sum()))


def _far_ends(triple: GammaTriple, p, n_far: int, grid: FiberGrid | None = None) -> dict:
    """Whether the projections keep slots far out along each end of the orbit."""
    geo = triple.geometry
    out = {}
    for end, sgn in (("-", -1), ("+", 1)):
        q = geo.act(-sgn * n_far, p)
        if isinstance(p, BoundaryCospherePoint):
            keep = triple.P1.boundary_mask(q, grid).any() or triple.P2.boundary_mask(q, grid).any()
        else:
            keep = triple.P1.interior(q) > 0 or triple.P2.interior(q) > 0
        out[end] = bool(keep)
    return out


def check_ellipticity(
    triple: GammaTriple,
    plan: SamplingPlan,
    grid: FiberGrid,
    settings: FredholmSettings = FredholmSettings(),
    jobs: int = 1,
    kappa_mode: str = "sinc",
    parameters: dict | None = None,
) -> EllipticityReport:
    """Run the point checks of a sampling plan and aggregate them."""
    t0 = time.perf_counter()
    points = list(plan.interior) + list(plan.boundary)
    work = lambda p: check_point(triple, p, grid, settings, kappa_mode)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(work, points))
    else:
        records = [work(p) for p in points]
    params = {
        "fiber": {"N": grid.N, "L": grid.L, "trace_order": grid.trace_order, "kappa_mode": kappa_mode},
        "fredholm": asdict(settings),
        "geometry": triple.geometry.describe(),
        "P1": triple.P1.describe(),
        "P2": triple.P2.describe(),
    }
    if parameters:
        params.update(parameters)
    return EllipticityReport(
        records, aggregate(records), dict(plan.description, n_interior=len(plan.interior), n_boundary=len(plan.boundary)),
        params, {"seconds": time.perf_counter() - t0},
    )


def default_plan(
    triple: GammaTriple,
    interior_count: int = 8,
    boundary_count: int = 8,
    directions: int = 8,
    extra_interior: Sequence[CospherePoint] = (),
    extra_boundary: Sequence[BoundaryCospherePoint] = (),
) -> SamplingPlan:
    """Tensor sampling plan over the strata of a built-in geometry.

    Interior strata: generic levels in a fundamental domain of the orbit
    structure, every cut level of ``Z`` (both sides), the fixed level of a
    dilation (both sides, or the origin) and the point at infinity.
    Boundary strata: one component per orbit of ``Z``, since a trajectory
    already covers its whole orbit.
    """
    geo = triple.geometry
    if geo.dim != 2:
        raise ValueError("default plans are implemented for two-dimensional bases")
    g = geo.group
    P = triple.P1
    angles = [2 * math.pi * i / interior_count for i in range(interior_count)]
    dirs = [(math.cos(2 * math.pi * j / directions), math.sin(2 * math.pi * j / directions)) for j in range(directions)]

    top = P.hi if math.isfinite(P.hi) else 1.0
    low = P.lo if math.isfinite(P.lo) else 0.0
    if g.action == "dilate":
        base = top if top > 0 else 1.0
        generic = [base * g.parameter ** (-f) for f in (0.25, 0.5, 0.75)]
    else:
        generic = [low + g.parameter * f for f in (0.25, 0.5, 0.75)]

    def make(level, ang, xi, side):
        if geo.base == "cylinder":
            return CospherePoint((ang, level), xi, side)
        return CospherePoint((level * math.cos(ang), level * math.sin(ang)), xi, side)

    interior = []
    strata = {"generic_levels": generic, "cut_levels": [], "fixed": None}
    for i, ang in enumerate(angles):
        lev = generic[i % len(generic)]
        interior += [make(lev, ang, d, None) for d in dirs]
    for z in geo.Z:
        if geo.is_fixed_level(z):
            continue
        strata["cut_levels"].append(z)
        for side in ("+", "-"):
            for ang in angles:
                interior += [make(z, ang, d, side) for d in dirs]
    if g.action == "dilate":
        if geo.base == "cylinder":
            strata["fixed"] = 0.0
            for side in ("+", "-"):
                for ang in angles:
                    interior += [make(0.0, ang, d, side) for d in dirs]
        else:
            strata["fixed"] = "origin"
            interior += [CospherePoint((0.0, 0.0), d, None) for d in dirs]
    interior.append(CospherePoint.infinity())
    interior += list(extra_interior)

    b_angles = [2 * math.pi * i / boundary_count for i in range(boundary_count)]
    boundary = []
    for z in geo.Z:
        for ang in b_angles:
            for sgn in (1, -1):
                boundary.append(geo.boundary_point(z, ang, sgn))
    boundary += list(extra_boundary)
    desc = {
        "interior_count": interior_count,
        "boundary_count": boundary_count,
        "directions": directions,
        "strata": strata,
        "boundary_components": list(geo.Z),
        "note": "interior and boundary cosphere points are sampled separately",
    }
    return SamplingPlan(interior, boundary, desc)
