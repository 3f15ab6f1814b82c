import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from pqgl.errors import DomainError, NonConvergence
from pqgl.exponents import ExponentSet
from pqgl.integrand import make_integrand
from pqgl.solver import (
    Grid,
    GridField,
    assemble_energy,
    boundary_data,
    grad_sup,
    harmonic_extension,
    interpolated_extension,
    minimize,
    read_field,
    solve_sequence,
    write_field,
)

K1_QUAD = make_integrand("K1", ExponentSet(2, 2, 2, 2, 9, mu=0.5))
E_LIMIT = ExponentSet(2, 2, Fraction(5, 2), 4, 1, mu=0.5)


def five_point_solution(m, g):
    """Independent 5-point Laplacian solve on [-1, 1]^2 with Dirichlet data g."""
    x = np.linspace(-1, 1, m)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    U = g(np.stack([X1.ravel(), X2.ravel()], axis=1)).reshape(m, m)
    k = m - 2
    T = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(k, k))
    A = sp.kronsum(T, T).tocsc()
    rhs = np.zeros((k, k))
    rhs[0, :] += U[0, 1:-1]
    rhs[-1, :] += U[-1, 1:-1]
    rhs[:, 0] += U[1:-1, 0]
    rhs[:, -1] += U[1:-1, -1]
    U[1:-1, 1:-1] = spla.spsolve(A, rhs.ravel()).reshape(k, k)
    return U.ravel()


def test_grid_geometry():
    G = Grid(2, 5)
    assert G.h == 0.5 and G.num_nodes == 25 and G.num_simplices == 32
    assert G.volume * G.num_simplices == pytest.approx(4.0)
    assert G.boundary.sum() == 16
    G3 = Grid(3, 5)
    assert G3.volume * G3.num_simplices == pytest.approx(8.0)
    for bad in [(4, 5), (2, 2)]:
        with pytest.raises(DomainError):
            Grid(*bad)


@pytest.mark.parametrize("n", [2, 3])
def test_affine_field_has_exact_gradients_and_energy(n):
    G = Grid(n, 9)
    b = np.array([0.5, -0.25, 0.75][:n])
    Du = G.gradients(G.nodes @ b)
    assert np.all(Du == b)
    I = make_integrand("K1", ExponentSet(n, 2, 2, n, 4 * n + 1, mu=0.0))
    E, g = assemble_energy(G, I, G.nodes @ b)
    assert E == pytest.approx(2.0 ** n * float(b @ b), rel=1e-13)
    assert grad_sup(G, g) <= 1e-12
    assert assemble_energy(G, I, np.zeros(G.num_nodes))[0] == 0.0


def test_energy_gradient_matches_finite_differences():
    G = Grid(2, 9)
    I = make_integrand("K3", E_LIMIT, "sine", 1.0, 2.0)
    u = np.random.default_rng(0).normal(size=G.num_nodes)
    _, g = assemble_energy(G, I, u)
    for i in np.flatnonzero(G.interior)[:6]:
        e = np.zeros_like(u)
        e[i] = 1e-6
        fd = (assemble_energy(G, I, u + e)[0] - assemble_energy(G, I, u - e)[0]) / 2e-6
        assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-8)


def test_extensions_reproduce_multilinear_data():
    G = Grid(2, 17)
    for bd in (boundary_data("harmonic", 2), boundary_data("linear", 2)):
        np.testing.assert_allclose(interpolated_extension(G, bd), bd(G.nodes), atol=1e-15)
        np.testing.assert_allclose(harmonic_extension(G, bd), bd(G.nodes), atol=1e-12)


def test_infinite_tolerance_returns_the_initial_guess():
    G = Grid(2, 9)
    bd = boundary_data("bump", 2)
    fld, rep = minimize(G, K1_QUAD, bd, tol=math.inf)
    assert rep.iterations == 0
    np.testing.assert_array_equal(fld.values, interpolated_extension(G, bd))
    with pytest.raises(DomainError):
        minimize(G, K1_QUAD, bd, tol=0.0)
    with pytest.raises(DomainError):
        minimize(G, K1_QUAD, bd, precondition="jacobi")


@pytest.mark.parametrize("kind, profile", [("K1", "const"), ("K2", "const"), ("K3", "const")])
def test_affine_boundary_data_is_the_minimizer_for_constant_coefficients(kind, profile):
    E = ExponentSet(2, 2, 2, 2, 9, mu=0.5) if kind != "K3" else E_LIMIT
    I = make_integrand(kind, E, profile, 2.0, 2.0)
    G = Grid(2, 17)
    bd = boundary_data("linear", 2, [0.5, -0.25])
    fld, rep = minimize(G, I, bd, tol=1e-10, init=np.zeros(G.num_nodes))
    np.testing.assert_allclose(fld.values, bd(G.nodes), atol=1e-8)


def test_initial_guesses_agree_and_energy_decreases():
    G = Grid(2, 17)
    I = make_integrand("K3", E_LIMIT, "sine", 1.0, 2.0)
    bd = boundary_data("bump", 2)
    a, ra = minimize(G, I, bd, tol=1e-9, init="interp")
    b, rb = minimize(G, I, bd, tol=1e-9, init="harmonic")
    np.testing.assert_allclose(a.values, b.values, atol=1e-8)
    for rep in (ra, rb):
        assert rep.converged and rep.grad_sup <= 1e-9
        h = np.asarray(rep.energy_history)
        assert np.all(np.diff(h) <= 1e-14 * abs(h[0]))


@pytest.mark.parametrize("mode", ["diagonal", "none"])
def test_cheap_preconditioners_make_progress(mode):
    G = Grid(2, 9)
    I = make_integrand("K3", E_LIMIT, "sine", 1.0, 2.0)
    bd = boundary_data("bump", 2)
    fld, rep = minimize(G, I, bd, tol=1e-4, max_iter=5000, precondition=mode)
    ref, _ = minimize(G, I, bd, tol=1e-10)
    assert rep.energy <= rep.energy_history[0]
    np.testing.assert_allclose(fld.values, ref.values, atol=1e-3)


def test_non_convergence_carries_partial_state():
    G = Grid(2, 33)
    I = make_integrand("K3", E_LIMIT, "sine", 1.0, 2.0)
    with pytest.raises(NonConvergence) as info:
        minimize(G, I, boundary_data("bump", 2), tol=1e-12, max_iter=1, precondition="none")
    err = info.value
    assert not err.field.converged and err.report.iterations == 1
    assert err.report.stop_reason == "max_iter"


def test_quadratic_case_matches_independent_five_point_solve():
    G = Grid(2, 33)
    bd = boundary_data("expsin", 2)
    fld, _ = minimize(G, K1_QUAD, bd, tol=1e-10, init=np.zeros(G.num_nodes))
    np.testing.assert_allclose(fld.values, five_point_solution(33, bd), atol=1e-9)


def test_second_order_convergence_for_a_harmonic_function():
    bd = boundary_data("expsin", 2)
    errs = []
    for m in (17, 33, 65):
        G = Grid(2, m)
        fld, _ = minimize(G, K1_QUAD, bd, tol=1e-11)
        errs.append(np.max(np.abs(fld.values - bd(G.nodes))))
    order = np.polyfit(np.log([2 / 16, 2 / 32, 2 / 64]), np.log(errs), 1)[0]
    assert order >= 1.8


def test_ladder_comparison_and_monotone_energies():
    G = Grid(2, 17)
    I = make_integrand("K3", E_LIMIT, "sine", 1.0, 2.0)
    reps, fields = solve_sequence(G, I, boundary_data("bump", 2), [5, 20], [0.1, 0.02], tol=1e-9)
    assert len(reps) == 4 and all(r.converged for r in reps)
    assert all(r.comparison_holds for r in reps)
    by_eps = {}
    for r in reps:
        by_eps.setdefault(r.eps, []).append(r.energy)
    for energies in by_eps.values():
        assert energies[0] <= energies[1] * (1 + 1e-12)
    inner = [r.V_sup_inner for r in reps]
    assert max(inner) <= 2 * min(inner)
    assert set(reps[0].to_dict()) >= {"energy", "comparison_holds", "V_sup_inner"}
    with pytest.raises(DomainError):
        solve_sequence(G, I, boundary_data("bump", 2), [20, 5], [None])


def test_field_round_trip(tmp_path):
    G = Grid(2, 9)
    fld = GridField(G, np.random.default_rng(1).normal(size=G.num_nodes))
    path = tmp_path / "u.bin"
    write_field(path, fld)
    assert path.read_bytes().startswith(b"9 2\n")
    back = read_field(path)
    np.testing.assert_array_equal(back.values, fld.values)
    assert back.grid.m == 9 and back.grid.n == 2
