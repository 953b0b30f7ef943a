import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gammabdm.fiber import FiberGrid, gaussian_probes, kappa_xi
from gammabdm.geometry import CospherePoint, CylinderGeometry, EuclideanGeometry, GroupSpec
from gammabdm.symbols import BdMSymbol, InteriorSymbol, embed_psdo
from gammabdm.trajectory import (
    GammaSymbol,
    ProjectionSymbol,
    boundary_trajectory,
    fixedpoint_trajectory,
    interior_trajectory,
    project_trajectory,
    restrict,
)

GRID = FiberGrid(32, 6.0)


def fn(f):
    return InteriorSymbol(lambda p: f(np.asarray(p.x), np.asarray(p.xi)), None,
                          lambda X, XI, s: f(np.moveaxis(X, -1, 0), np.moveaxis(XI, -1, 0)))


@pytest.fixture
def cyl():
    return CylinderGeometry(GroupSpec("dilate", 2.0), [0.0, 1.0])


@pytest.fixture
def disc():
    return EuclideanGeometry(GroupSpec("dilate", 2.0), (1.0,))


def test_identity_trajectories(cyl):
    I = GammaSymbol.identity(cyl)
    m = cyl.point(0.3, 0.7, 1.0, 0.5)
    T = interior_trajectory(I, m, (-5, 5))
    np.testing.assert_array_equal(T.matrix, np.eye(11))
    assert T.kind == "interior" and T.laurent
    B = boundary_trajectory(I, cyl.boundary_point(1.0, 0.2), (-2, 2), GRID)
    np.testing.assert_array_equal(B.matrix, np.eye(5 * GRID.dim))
    F = fixedpoint_trajectory(I, cyl.boundary_point(0.0, 0.2), GRID)
    np.testing.assert_array_equal(F.matrix, np.eye(GRID.dim))


def test_cylinder_diagonal_entries(cyl):
    a = lambda x, xi: np.cos(x[0]) + x[1] * xi[1] + 0.1j * xi[0]
    D = GammaSymbol(cyl, {0: BdMSymbol.multiplier(fn(a), cyl)})
    x, t, xi, tau = 0.4, 0.7, 0.6, 0.8
    T = interior_trajectory(D, cyl.point(x, t, xi, tau), (-4, 4))
    assert np.count_nonzero(T.matrix - np.diag(np.diag(T.matrix))) == 0
    for i, n in enumerate(range(-4, 5)):
        cov = np.array([xi, 2.0 ** n * tau])
        want = a(np.array([x, 2.0 ** -n * t]), cov / np.linalg.norm(cov))
        assert T.matrix[i, i] == pytest.approx(want, abs=1e-14)


def test_laurent_flag(disc):
    const = GammaSymbol(disc, {0: BdMSymbol.identity() * 2.0, 1: BdMSymbol.identity() * 0.5})
    m = CospherePoint((2.0 ** -40, 0.0), (1.0, 0.0))
    assert interior_trajectory(const, m, (-6, 6)).laurent
    var = GammaSymbol(disc, {0: BdMSymbol.multiplier(fn(lambda x, xi: 1 + 0.25 * x[0]), disc)})
    assert not interior_trajectory(var, CospherePoint((0.5, 0.0), (1.0, 0.0)), (-6, 6)).laurent


def test_band_warning(cyl):
    D = GammaSymbol(cyl, {-3: BdMSymbol.identity(), 3: BdMSymbol.identity()})
    T = interior_trajectory(D, cyl.point(0.1, 0.7, 1.0, 0.0), (-2, 2))
    assert "warning" in T.truncation


def test_boundary_blocks_multiplier_equal_spectra(cyl):
    A0 = BdMSymbol.multiplier(fn(lambda x, xi: 1.5 + np.cos(x[0]) + 0 * x[1]), cyl)
    T = boundary_trajectory(GammaSymbol(cyl, {0: A0}), cyl.boundary_point(1.0, 0.4), (-2, 2), GRID)
    f = GRID.dim
    blocks = [T.matrix[i * f:(i + 1) * f, i * f:(i + 1) * f] for i in range(5)]
    off = T.matrix.copy()
    for i in range(5):
        off[i * f:(i + 1) * f, i * f:(i + 1) * f] = 0
    assert np.abs(off).max() == 0
    sv = [np.linalg.svd(b, compute_uv=False) for b in blocks]
    for s in sv[1:]:
        np.testing.assert_allclose(s, sv[0], atol=1e-8)


def test_boundary_blocks_kappa_conjugated(cyl):
    g = FiberGrid(256, 40.0)
    A0 = embed_psdo(fn(lambda x, xi: 0.5 + xi[1] ** 2), cyl)
    m = cyl.boundary_point(1.0, 0.4)
    T = boundary_trajectory(GammaSymbol(cyl, {0: A0}), m, (-1, 1), g).matrix
    f = g.dim
    B = {n: T[(n + 1) * f:(n + 2) * f, (n + 1) * f:(n + 2) * f] for n in (-1, 0, 1)}
    for n in (-1, 1):
        mu = cyl.boundary_fiber_scale(n, m)
        conj = kappa_xi(g, mu).matrix @ B[0] @ kappa_xi(g, 1 / mu).matrix
        for u in gaussian_probes(g):
            c = u.coords(g)
            assert np.linalg.norm(B[n] @ c - conj @ c) / np.linalg.norm(c) <= 1e-8


def test_fixedpoint_examples(cyl):
    g = FiberGrid(64, 10.0)
    m = cyl.boundary_point(0.0, 0.9)
    F = fixedpoint_trajectory(GammaSymbol.shift(cyl), m, g)
    np.testing.assert_array_equal(F.matrix, kappa_xi(g, 2.0).matrix)
    D = GammaSymbol.identity(cyl) + 0.3 * GammaSymbol.shift(cyl)
    F = fixedpoint_trajectory(D, m, g)
    np.testing.assert_allclose(F.matrix, np.eye(g.dim) + 0.3 * kappa_xi(g, 2.0).matrix)
    with pytest.raises(ValueError):
        fixedpoint_trajectory(D, cyl.boundary_point(1.0, 0.9), g)
    with pytest.raises(ValueError):
        boundary_trajectory(D, m, (-2, 2), g)


def test_projection_slot_patterns(cyl, disc):
    assert project_trajectory(ProjectionSymbol.full(cyl), cyl.point(0.1, 0.7, 1, 0), (-3, 3)).all()
    P = ProjectionSymbol.preset(disc, "disc-example")
    m = disc.boundary_point(1.0, 0.3)
    mask = project_trajectory(P, m, (-2, 2), GRID).reshape(5, GRID.dim)
    plus = GRID.plus_mask
    # slots -2, -1 lie outside the disc, slot 0 on the unit circle, slots 1, 2 inside
    assert not mask[0].any() and not mask[1].any()
    np.testing.assert_array_equal(mask[2, :-1], ~plus)
    assert mask[2, -1]
    for r in (3, 4):
        assert mask[r, :-1].all() and not mask[r, -1]
    R = ProjectionSymbol.preset(cyl, "cylinder-restriction")
    mask = project_trajectory(R, cyl.boundary_point(1.0, 0.3), (-2, 3), GRID).reshape(6, GRID.dim)
    assert not mask[:2].any()
    np.testing.assert_array_equal(mask[2, :-1], ~plus)
    assert mask[2, -1] and mask[3:].all()


def test_projection_fixed_circle(cyl):
    R = ProjectionSymbol.preset(cyl, "cylinder-restriction")
    mask = project_trajectory(R, cyl.boundary_point(0.0, 0.3), None, GRID)
    np.testing.assert_array_equal(mask[:-1], GRID.plus_mask)
    assert mask[-1]


def test_restrict_identity_and_consistency(cyl):
    D = GammaSymbol(cyl, {0: BdMSymbol.multiplier(fn(lambda x, xi: 1 + np.sin(x[0]) * x[1]), cyl),
                          1: BdMSymbol.identity() * 0.3})
    m = cyl.point(0.4, 0.7, 0.6, 0.8)
    full = restrict(D, ProjectionSymbol.full(cyl)).interior(m, (-4, 4))
    np.testing.assert_array_equal(full.matrix, interior_trajectory(D, m, (-4, 4)).matrix)
    R = ProjectionSymbol.preset(cyl, "cylinder-restriction")
    c = restrict(D, R).interior(m, (-4, 4))
    T = interior_trajectory(D, m, (-4, 4)).matrix
    r = project_trajectory(R, m, (-4, 4))
    np.testing.assert_array_equal(c.matrix, T[np.ix_(r, r)])
    # slots n >= 0 survive for t in (1/2, 1]
    np.testing.assert_array_equal(r, np.arange(-4, 5) >= 0)
    mb = cyl.boundary_point(1.0, 0.2)
    cb = restrict(D, R).boundary(mb, (-2, 2), GRID)
    Tb = boundary_trajectory(D, mb, (-2, 2), GRID).matrix
    rb = project_trajectory(R, mb, (-2, 2), GRID)
    np.testing.assert_array_equal(cb.matrix, Tb[np.ix_(rb, rb)])


def test_restrict_fixed_point_compression(cyl):
    g = FiberGrid(64, 10.0)
    D = GammaSymbol.identity(cyl) + 0.3 * GammaSymbol.shift(cyl)
    R = ProjectionSymbol.preset(cyl, "cylinder-restriction")
    m = cyl.boundary_point(0.0, 0.5)
    c = restrict(D, R).fixedpoint(m, g)
    keep = np.append(g.plus_mask, True)
    np.testing.assert_allclose(c.matrix, (np.eye(g.dim) + 0.3 * kappa_xi(g, 2.0).matrix)[np.ix_(keep, keep)])


def test_shift_symbols_unitary(cyl):
    S = GammaSymbol.shift(cyl)
    m = cyl.point(0.1, 0.7, 1.0, 0.3)
    T = interior_trajectory(S, m, (-6, 6), col_offset=1)
    np.testing.assert_allclose(np.linalg.svd(T.matrix, compute_uv=False), 1.0)
    B = boundary_trajectory(S, cyl.boundary_point(2.0, 0.1), (-3, 3), GRID).matrix
    f = GRID.dim
    np.testing.assert_allclose(np.linalg.svd(B[:-f, f:], compute_uv=False), 1.0, atol=1e-12)


@settings(max_examples=15)
@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6), st.floats(0.05, 3.0), st.floats(0, 6.28))
def test_interior_homomorphism(c, r, ang):
    disc = EuclideanGeometry(GroupSpec("dilate", 2.0), (1.0,))
    f = lambda a, b: BdMSymbol.multiplier(fn(lambda x, xi: a + b * np.exp(-x[0] ** 2 - x[1] ** 2)), disc)
    A = GammaSymbol(disc, {0: f(c[0], c[1]), 1: f(c[2], c[3])})
    B = GammaSymbol(disc, {-1: f(c[4], c[5]), 0: f(1.0, 0.0)})
    m = CospherePoint((r * math.cos(ang), r * math.sin(ang)), (0.0, 1.0))
    TA, TB, TAB = (interior_trajectory(X, m, (-8, 8)).matrix for X in (A, B, A @ B))
    c_ = slice(3, 14)
    assert np.abs((TA @ TB)[c_, c_] - TAB[c_, c_]).max() <= 1e-12


def test_matrix_valued_trajectory(cyl):
    one, zero = BdMSymbol.identity(), None
    D = GammaSymbol(cyl, {0: [[one, zero], [zero, one * 2.0]]}, matrix_size=2)
    T = interior_trajectory(D, cyl.point(0.1, 0.7, 1.0, 0.0), (-1, 1))
    np.testing.assert_array_equal(T.matrix, np.kron(np.eye(3), np.diag([1.0, 2.0])))
    with pytest.raises(ValueError):
        GammaSymbol(cyl, {0: one}, matrix_size=2)
