import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from gammabdm.fiber import (
    FiberGrid,
    FiberOperator,
    FiberVector,
    assemble_boundary_symbol,
    fourier_multiplier,
    gaussian_probes,
    hardy_split,
    isometry_defect,
    kappa,
    kappa_mass_loss,
    kappa_xi,
    limit_at_infinity,
    green_kernels,
    multiplication_decomposition,
    project_pm,
    trace_pm,
    transmission_check,
)


@pytest.fixture(scope="module")
def g512():
    return FiberGrid(512, 20.0)


def nrm(A):
    return np.linalg.norm(A, 2)


def test_grid_layout():
    g = FiberGrid(16, 2.0)
    assert g.dim == 17
    assert 0.0 not in g.nodes and 0.0 not in g.dual_nodes
    np.testing.assert_allclose(g.nodes, -g.nodes[::-1])
    np.testing.assert_allclose(g.dft @ g.dft.conj().T, np.eye(16), atol=1e-14)
    with pytest.raises(ValueError):
        FiberGrid(24, 2.0)


def test_projection_examples(g512):
    x = g512.nodes
    u = FiberVector(np.where(x > 0, np.exp(-x), 0.0), 0.0)
    P, M = project_pm(g512, "+"), project_pm(g512, "-")
    np.testing.assert_allclose((P @ u).values, u.values)
    np.testing.assert_allclose((M @ u).values, 0.0)
    assert nrm((P + M).matrix[:-1, :-1] - np.eye(g512.N)) == 0.0
    gauss = FiberVector(np.exp(-x ** 2))
    assert (P @ gauss).norm(g512) ** 2 == pytest.approx(gauss.norm(g512) ** 2 / 2, abs=1e-10)


@pytest.mark.parametrize("N", [16, 64, 256])
def test_projection_invariants(N):
    g = FiberGrid(N, 5.0)
    P, M = project_pm(g, +1), project_pm(g, -1)
    for Q in (P, M):
        assert Q.is_projection()
    assert nrm((P @ M).matrix[:-1, :-1]) <= 1e-12
    assert P.matrix[-1, -1] == M.matrix[-1, -1] == 1.0


def test_trace_examples(g512):
    x = g512.nodes
    ind = FiberVector(((x > 0) & (x <= 1)).astype(float))
    assert trace_pm(g512, ind, "+") == pytest.approx(1.0, abs=1e-12)
    assert trace_pm(g512, ind, "-") == pytest.approx(0.0, abs=1e-12)
    ramp = FiberVector(np.where(x > 0, x, 0.0))
    assert abs(trace_pm(g512, ramp, "+")) <= 1e-12
    fine = FiberGrid(8192, 20.0)
    even = FiberVector(np.exp(-fine.nodes ** 2))
    assert trace_pm(fine, even, "+") == pytest.approx(1.0, abs=1e-8)
    assert trace_pm(fine, even, "-") == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        trace_pm(g512, ind, "up")


def test_kappa_examples(g512):
    assert nrm(kappa(g512, 1.0).matrix - np.eye(g512.dim)) == 0.0
    # indicator of [0, 1] with an edge resolved on the grid
    x, e = g512.nodes, 0.4
    ind = lambda y: 0.5 * (erf(y / e) - erf((y - 1) / e))
    v = kappa(g512, 2.0) @ FiberVector(ind(x))
    np.testing.assert_allclose(v.values, math.sqrt(2) * ind(2 * x), atol=1e-6)
    assert (kappa(g512, 2.0) @ FiberVector(x * 0, 3.0)).scalar == 3.0
    with pytest.raises(ValueError):
        kappa(g512, -1.0)


@pytest.mark.parametrize("lam", [2.0, 0.5, 3.0])
def test_kappa_inverse_on_probes(g512, lam):
    K = kappa(g512, lam).matrix @ kappa(g512, 1 / lam).matrix
    for u in gaussian_probes(g512):
        c = u.coords(g512)
        assert np.linalg.norm(K @ c - c) / np.linalg.norm(c) <= 1e-6
    assert isometry_defect(kappa(g512, lam), gaussian_probes(g512)) <= 1e-6


def test_kappa_xi_and_power_mode(g512):
    np.testing.assert_array_equal(kappa_xi(g512, 2.0).matrix, kappa(g512, 0.5).matrix)
    K = kappa(g512, 4.0, mode="power", base=2.0).matrix
    np.testing.assert_allclose(K, kappa(g512, 2.0).matrix @ kappa(g512, 2.0).matrix)
    with pytest.raises(ValueError):
        kappa(g512, 3.0, mode="power", base=2.0)


def test_kappa_mass_loss(g512):
    wide = FiberVector(np.exp(-(g512.nodes / 8) ** 2))
    narrow = FiberVector(np.exp(-(g512.nodes) ** 2))
    assert kappa_mass_loss(g512, 0.25, wide) > 0.1
    assert kappa_mass_loss(g512, 0.25, narrow) < 1e-10


def test_fourier_multiplier_examples(g512):
    assert nrm(fourier_multiplier(g512, 1.0).matrix - np.eye(g512.dim)) <= 1e-13
    a = lambda xi: xi / (xi + 1j)
    x = g512.nodes
    v = fourier_multiplier(g512, a) @ FiberVector(np.exp(-x ** 2 / 2))
    # independent quadrature of the inverse Fourier integral
    xi = np.linspace(-40, 40, 200001)
    uh = math.sqrt(2 * math.pi) * np.exp(-xi ** 2 / 2) * a(xi)
    sel = np.flatnonzero(np.abs(x) < 5)[::8]
    exact = np.array([np.trapezoid(uh * np.exp(1j * xi * t), xi) / (2 * math.pi) for t in x[sel]])
    assert np.abs(v.values[sel] - exact).max() <= 1e-6
    S = fourier_multiplier(g512, np.sign).matrix
    assert nrm(S @ S - np.eye(g512.dim)) <= 1e-10


coef = st.floats(-2.0, 2.0)


@given(coef, coef, coef, coef)
def test_fourier_multiplier_homomorphism(a0, a1, b0, b1):
    g = FiberGrid(32, 4.0)
    a = lambda xi: a0 + a1 * np.cos(xi)
    b = lambda xi: b0 + 1j * b1 / (1 + xi ** 2)
    lhs = fourier_multiplier(g, a).matrix @ fourier_multiplier(g, b).matrix
    rhs = fourier_multiplier(g, lambda xi: a(xi) * b(xi)).matrix
    assert np.abs(lhs - rhs).max() <= 1e-12


def test_assemble_examples(g512):
    g = FiberGrid(32, 4.0)
    M = assemble_boundary_symbol(g, d=1.0).matrix
    np.testing.assert_array_equal(M, np.diag(np.append(np.zeros(32), 1.0)))
    M = assemble_boundary_symbol(g, 1.0, 1.0).matrix
    assert nrm(M[:-1, :-1] - np.eye(32)) <= 1e-13 and M[-1, -1] == 0
    a = lambda xi: (xi - 1j) / (xi + 1j)
    gp, gm = green_kernels(g512, a)
    A = assemble_boundary_symbol(g512, a, a, gp, gm).matrix[:-1, :-1]
    C = fourier_multiplier(g512, a).matrix[:-1, :-1]
    w = np.abs(g512.nodes) < g512.L / 2
    assert nrm((A - C)[np.ix_(w, w)]) <= 1e-6


def test_assemble_boundary_rows():
    g = FiberGrid(64, 8.0)
    M = assemble_boundary_symbol(g, b_plus=1.0, c=lambda xi: 1 / (1 + xi ** 2)).matrix
    p = g.plus_mask
    assert np.all(M[-1, :-1][~p] == 0) and np.any(M[-1, :-1][p] != 0)
    assert np.any(M[:-1, -1] != 0)


def test_decomposition_examples(g512):
    D = multiplication_decomposition(g512, 1.0).matrix
    assert nrm(D[:-1, :-1] - np.eye(g512.N)) <= 1e-12
    D = multiplication_decomposition(g512, lambda xi: 0.5 + 1 / (1 + xi ** 2)).matrix
    assert nrm(D - D.conj().T) <= 1e-10


@pytest.mark.parametrize("kernel", ["lattice", "continuum"])
def test_decomposition_residual(kernel):
    a = lambda xi: (xi - 1j) / (xi + 1j)
    res = []
    for N in (128, 256, 512):
        g = FiberGrid(N, 20.0)
        D = multiplication_decomposition(g, a, kernel=kernel).matrix[:-1, :-1]
        C = fourier_multiplier(g, a).matrix[:-1, :-1]
        w = np.abs(g.nodes) < g.L / 2
        res.append(nrm((D - C)[np.ix_(w, w)]))
    if kernel == "lattice":
        assert max(res) <= 1e-12
    else:
        assert res[0] > res[1] > res[2]


def test_hardy_split_reconstructs():
    g = FiberGrid(128, 10.0)
    a = lambda xi: 1 / (1 + xi ** 2) + 0.2
    s = hardy_split(g, a)
    assert s.a_inf == pytest.approx(0.2, abs=1e-9)
    xi = g.dual_nodes
    recon = s.a_inf + s.a_zero + s.a_plus(xi) + s.a_minus(xi)
    # only the dropped Nyquist term separates the two
    assert np.abs(recon - a(xi)).max() <= 1e-5


def test_limit_at_infinity():
    assert limit_at_infinity(lambda xi: xi / np.sqrt(1 + xi ** 2) ** 1 * 0 + 3.0) == 3.0
    with pytest.raises(ValueError):
        limit_at_infinity(np.sign)
    with pytest.raises(ValueError):
        limit_at_infinity(lambda xi: xi)


def test_transmission_examples():
    def even(xp, xn, xip, xin):
        return xin ** 2 / (xip[0] ** 2 + xin ** 2)

    ok, worst = transmission_check({0: even}, K=2)
    assert ok and worst <= 1e-6

    def abs_xi(xp, xn, xip, xin):
        return math.sqrt(xip[0] ** 2 + xin ** 2)

    ok, worst = transmission_check({1: abs_xi}, K=0)
    assert not ok and worst > 0.1

    def rational(xp, xn, xip, xin):
        return xin / (np.linalg.norm(xip) + 1j * xin)

    # restricted to |xi'| = 0, where |xi'| has no derivatives to test
    ok, _ = transmission_check({0: rational}, K=2, dim_xip=0)
    assert ok
    assert rational((0.0,), 0.0, np.zeros(0), 1.0) == pytest.approx(-1j)


def test_operator_shape_and_vector_validation():
    g = FiberGrid(16, 1.0)
    with pytest.raises(ValueError):
        FiberOperator(g, np.eye(3))
    with pytest.raises(ValueError):
        FiberVector(np.array([np.nan]))
    with pytest.raises(ValueError):
        FiberOperator.identity(g) @ FiberOperator.identity(FiberGrid(16, 2.0))
