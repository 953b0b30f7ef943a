"""Acceptance criteria 1-9, each at its stated tolerance and time budget."""
import math
import time

import numpy as np
import pytest

from gammabdm.config import DEMOS, build_problem, loads_config
from gammabdm.fiber import (
    FiberGrid,
    fourier_multiplier,
    gaussian_probes,
    isometry_defect,
    kappa,
    kappa_xi,
    multiplication_decomposition,
    project_pm,
)
from gammabdm.fredholm import FredholmSettings, check_point, default_plan, check_ellipticity
from gammabdm.geometry import (
    Arc,
    BoundaryCospherePoint,
    CospherePoint,
    CylinderGeometry,
    EuclideanGeometry,
    GroupSpec,
    closure_of,
    closure_YX,
)
from gammabdm.pipeline import run_check, run_oracle
from gammabdm.symbols import BdMSymbol, ComponentBoundary, InteriorSymbol
from gammabdm.trajectory import (
    GammaSymbol,
    ProjectionSymbol,
    boundary_trajectory,
    fixedpoint_trajectory,
    interior_trajectory,
    restrict,
)


@pytest.fixture(scope="module")
def cylinder():
    return CylinderGeometry(GroupSpec("dilate", 2.0), [0.0, 1.0])


# ---------------------------------------------------------------- 1
@pytest.mark.acceptance(1, "projection algebra")
@pytest.mark.parametrize("N", [128, 256, 512])
def test_projection_algebra(N):
    t0 = time.perf_counter()
    g = FiberGrid(N, 20.0)
    P, M, I = project_pm(g, +1), project_pm(g, -1), np.eye(g.dim)
    L2 = np.eye(g.dim)
    L2[-1, -1] = 0.0  # both projections fix the scalar summand
    nrm = lambda A: np.linalg.norm(A, 2)
    assert nrm((P @ P).matrix - P.matrix) <= 1e-12
    assert nrm((M @ M).matrix - M.matrix) <= 1e-12
    assert nrm(L2 @ (P @ M).matrix @ L2) <= 1e-12
    assert nrm(L2 @ (P + M).matrix @ L2 - L2) <= 1e-12
    assert time.perf_counter() - t0 < 1.0


# ---------------------------------------------------------------- 2
def _decomposition_residual(N, kernel):
    g = FiberGrid(N, 20.0)
    a = lambda x: (x - 1j) / (x + 1j)
    D = multiplication_decomposition(g, a, kernel=kernel).matrix[:-1, :-1]
    C = fourier_multiplier(g, a).matrix[:-1, :-1]
    w = np.abs(g.nodes) < g.L / 2
    return np.linalg.norm((D - C)[np.ix_(w, w)], 2)


@pytest.mark.acceptance(2, "multiplication decomposition identity")
def test_decomposition_identity():
    t0 = time.perf_counter()
    Ns = [128, 256, 512, 1024]
    lattice = [_decomposition_residual(N, "lattice") for N in Ns]
    continuum = [_decomposition_residual(N, "continuum") for N in Ns]
    # exact lattice identity: roundoff only, far below the tolerance at every N
    assert max(lattice) <= 1e-5
    assert lattice[Ns.index(512)] <= 1e-5
    # the continuum Green kernel converges to the same identity
    assert all(b < a for a, b in zip(continuum, continuum[1:]))
    assert time.perf_counter() - t0 < 10.0


# ---------------------------------------------------------------- 3
def _random_term(rng):
    c = rng.normal(size=4) + 1j * rng.normal(size=4)
    f = InteriorSymbol(lambda p: c[0] + c[1] * math.cos(p.x[0]) + c[2] * math.exp(-p.x[1] ** 2) + c[3] * p.xi[1])
    odd = lambda xin: xin / np.sqrt(1 + xin ** 2)
    ap = lambda p: (lambda xin: c[0] + c[1] * math.cos(p.x[0]) + c[3] * odd(xin))
    am = lambda p: (lambda xin: c[0] + c[1] * math.cos(p.x[0]) - c[3] * odd(xin))
    return BdMSymbol(f, ComponentBoundary(a_plus=ap, a_minus=am, d=lambda p: c[0] + c[2]))


def _random_gamma(geo, rng):
    ks = rng.choice(np.arange(-2, 3), size=int(rng.integers(1, 4)), replace=False)
    return GammaSymbol(geo, {int(k): _random_term(rng) for k in ks})


@pytest.mark.acceptance(3, "composition homomorphism")
def test_composition_homomorphism(cylinder):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240501)
    grid = FiberGrid(16, 10.0)
    for _ in range(10):
        A, B = _random_gamma(cylinder, rng), _random_gamma(cylinder, rng)
        AB = A @ B
        m = cylinder.point(rng.uniform(0, 2 * math.pi), rng.uniform(0.1, 0.9), rng.normal(), rng.normal())
        TA, TB, TAB = (interior_trajectory(X, m, (-12, 12)).matrix for X in (A, B, AB))
        c = slice(8, 17)  # slots -4..4, at least the band width from the edges
        assert np.abs((TA @ TB)[c, c] - TAB[c, c]).max() <= 1e-8
        mb = cylinder.boundary_point(1.0, rng.uniform(0, 2 * math.pi), int(rng.choice([-1, 1])))
        TA, TB, TAB = (boundary_trajectory(X, mb, (-6, 6), grid).matrix for X in (A, B, AB))
        c = slice(4 * grid.dim, 9 * grid.dim)
        assert np.abs((TA @ TB)[c, c] - TAB[c, c]).max() <= 1e-8
    assert time.perf_counter() - t0 < 30.0


# ---------------------------------------------------------------- 4
@pytest.mark.acceptance(4, "kappa group law and unitarity")
def test_kappa_group_law():
    t0 = time.perf_counter()
    g = FiberGrid(512, 20.0)
    probes = gaussian_probes(g)
    K = {k: kappa(g, 2.0 ** k).matrix for k in range(-2, 3)}
    for k in K:
        assert isometry_defect(kappa(g, 2.0 ** k), probes) <= 1e-6
    for a in range(-2, 3):
        for b in range(-2, 3):
            if abs(a + b) > 2:
                continue
            for u in probes:
                c = u.coords(g)
                err = np.linalg.norm(K[a] @ (K[b] @ c) - K[a + b] @ c) / np.linalg.norm(c)
                assert err <= 1e-6, (a, b, err)
    assert time.perf_counter() - t0 < 5.0


# ---------------------------------------------------------------- 5
def _random_laurent(rng):
    """Coefficients of ``z^{-p} prod (z - r_i)`` and its exact winding number."""
    q = int(rng.integers(1, 4))
    p = int(rng.integers(0, q + 1))
    roots = []
    for _ in range(q):
        rad = rng.uniform(0.2, 0.7) if rng.random() < 0.5 else rng.uniform(1.4, 3.0)
        roots.append(rad * np.exp(1j * rng.uniform(0, 2 * math.pi)))
    poly = np.poly(roots)[::-1]  # ascending powers of z
    coeffs = {i - p: complex(c) for i, c in enumerate(poly)}
    return coeffs, sum(abs(r) < 1 for r in roots) - p


@pytest.mark.acceptance(5, "winding oracle agreement")
def test_winding_oracle_agreement():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    disc = EuclideanGeometry(GroupSpec("dilate", 2.0), (1.0,))
    P = ProjectionSymbol.preset(disc, "disc-example")
    grid = FiberGrid(16, 10.0)
    agree, windings = 0, []
    for _ in range(20):
        coeffs, wind = _random_laurent(rng)
        # independent count: zeros of z^p a(z) inside the unit circle
        p = -min(coeffs)
        poly = [coeffs[k] for k in sorted(coeffs, reverse=True)]
        assert sum(abs(r) < 1 for r in np.roots(poly)) - p == wind
        terms = {k: BdMSymbol.identity() * c for k, c in coeffs.items()}
        triple = restrict(GammaSymbol(disc, terms), P)
        m = CospherePoint((0.3, 0.4), (1.0, 0.0))  # half-line orbit inside the ball
        rec = check_point(triple, m, grid, FredholmSettings())
        truth = "invertible" if wind == 0 else "not_invertible"
        agree += rec.verdict.status == truth
        windings.append(wind)
    assert agree == 20
    assert 0 in windings and any(w != 0 for w in windings)
    # coefficients uniform in [-1, 1], degree <= 3, away from vanishing
    agree, done = 0, 0
    theta = np.linspace(0, 2 * math.pi, 4096, endpoint=False)
    while done < 20:
        lo = int(rng.integers(-3, 1))
        coeffs = {k: complex(rng.uniform(-1, 1)) for k in range(lo, lo + int(rng.integers(1, 4)) + 1)}
        vals = sum(c * np.exp(1j * k * theta) for k, c in coeffs.items())
        if np.abs(vals).min() < 0.05:
            continue
        p = -min(coeffs)
        poly = [coeffs[k] for k in sorted(coeffs, reverse=True)]
        wind = int(sum(abs(r) < 1 for r in np.roots(poly))) - p
        triple = restrict(GammaSymbol(disc, {k: BdMSymbol.identity() * c for k, c in coeffs.items()}), P)
        rec = check_point(triple, CospherePoint((0.3, 0.4), (1.0, 0.0)), grid, FredholmSettings())
        agree += rec.verdict.status == ("invertible" if wind == 0 else "not_invertible")
        done += 1
    assert agree == 20
    assert time.perf_counter() - t0 < 30.0


# ---------------------------------------------------------------- 6
@pytest.mark.acceptance(6, "end-to-end checker versus dense oracle on the cylinder")
@pytest.mark.parametrize("demo,expected", [("cylinder", "elliptic"), ("cylinder-sin", "not_elliptic")])
def test_end_to_end_cylinder(demo, expected):
    t0 = time.perf_counter()
    problem = build_problem(loads_config(DEMOS[demo]))
    report = run_check(problem)
    assert report.overall == expected
    run = run_oracle(problem, report.overall)
    s = [c["sigma_min"] for c in run.curve]
    assert len(s) >= 3
    if expected == "elliptic":
        assert min(s) >= 0.5
    else:
        assert all(b < a for a, b in zip(s, s[1:]))
    assert run.comparison.verdict == "CONSISTENT"
    assert time.perf_counter() - t0 < 150.0


# ---------------------------------------------------------------- 7
@pytest.mark.acceptance(7, "disc trajectory near the origin converges to the Laurent symbol")
def test_disc_structure():
    t0 = time.perf_counter()
    problem = build_problem(loads_config(DEMOS["disc"]))
    triple = problem.triple
    r = 2.0 ** -40
    near = CospherePoint((r * math.cos(0.7), r * math.sin(0.7)), (0.3, 1.0))
    origin = CospherePoint((0.0, 0.0), (0.3, 1.0))
    window = (-16, 15)  # 32 slots
    A = triple.interior(near, window).op.matrix
    B = triple.interior(origin, window).op.matrix
    assert A.shape == B.shape == (32, 32)
    assert triple.interior(origin, window).full.laurent
    assert np.abs(A - B).max() <= 1e-6
    assert time.perf_counter() - t0 < 10.0


# ---------------------------------------------------------------- 8
@pytest.mark.acceptance(8, "fixed-point symbol on the cylinder")
def test_fixed_point_symbol(cylinder):
    I = BdMSymbol.identity()
    grid = FiberGrid(128, 20.0)
    p = cylinder.boundary_point(0.0, 0.4, 1)
    for preset in ("full", "cylinder-restriction"):
        triple = restrict(GammaSymbol(cylinder, {0: I, 1: 0.3 * I}), ProjectionSymbol.preset(cylinder, preset))
        rec = check_point(triple, p, grid)
        assert rec.path == "fixedpoint"
        assert rec.verdict.sigma_min >= 0.7 - 1e-3
    g2 = FiberGrid(256, 20.0)
    T = fixedpoint_trajectory(GammaSymbol(cylinder, {1: I}), p, g2)
    K = kappa_xi(g2, 2.0)
    assert np.abs(T.matrix - K.matrix).max() == 0.0
    assert isometry_defect(K, gaussian_probes(g2)) <= 1e-6


# ---------------------------------------------------------------- 9
@pytest.mark.acceptance(9, "closure operation")
def test_closure(cylinder):
    v = cylinder.boundary_point(1.0, 0.5, 1)
    c = closure_YX([], [v], cylinder)
    assert c.boundary == frozenset({v})
    assert c.arcs == frozenset({Arc(v)})
    assert c.interior == frozenset()
    n = cylinder.normal(v.x)
    for phi in np.linspace(-math.pi / 2, math.pi / 2, 7):
        for side in ("+", "-"):
            q = cylinder.arc_point(v, float(phi), side)
            expect = math.cos(phi) * np.asarray(v.xi) + math.sin(phi) * n
            assert np.allclose(q.xi, expect / np.linalg.norm(expect)) and q.side == side
    rng = np.random.default_rng(3)
    for _ in range(20):
        V = [cylinder.boundary_point(float(rng.choice([0.0, 1.0, 2.0])), float(rng.uniform(0, 6)), 1)
             for _ in range(int(rng.integers(0, 4)))]
        U = [cylinder.point(float(rng.uniform(0, 6)), float(rng.uniform(-1, 3)), rng.normal(), rng.normal())
             for _ in range(int(rng.integers(0, 4)))]
        if V:  # a point lying on one of the arcs
            U.append(cylinder.arc_point(V[0], float(rng.uniform(-1, 1)), "+"))
        c1 = closure_YX(U, V, cylinder)
        assert closure_of(c1, cylinder) == c1
        assert closure_of(closure_of(c1, cylinder), cylinder) == c1
