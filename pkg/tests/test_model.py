import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from balanced_rd import (
    ConsistencyError,
    DomainError,
    assemble,
    build_dec_operators,
    build_mesh,
    closed_field,
    diagnostics,
    diffusion_only_system,
    energy_gradient,
    moiety_totals,
    open_field,
    total_energy,
    uniform_interval_mesh,
    weighted_laplacian,
)
from balanced_rd.model import (
    apply_laplacian,
    boundary_output,
    energy_rate,
    laplacian_matrix,
    linear_diffusion_operator,
    reaction_term,
    supply_rate,
    uniformity,
)

from conftest import D_FIG3, X_STAR, hand_field
from strategies import lattice


def scalar_system(N=3, mode="closed"):
    return diffusion_only_system(uniform_interval_mesh(1.0, N), [1.0], [1.0], mode=mode, scaling="none")


def fig3_states(N=20):
    return arrays(float, 4 * N, elements=st.floats(0.05, 5.0))


def test_closed_field_scalar_example():
    sys = scalar_system()
    np.testing.assert_allclose(closed_field(sys, [1.0, 2.0, 1.0]), [8.0, -8.0, 8.0], rtol=1e-14)


def test_open_field_left_injection():
    sys = scalar_system(mode="open")
    X = np.ones(3)
    out = open_field(sys, X, [0.7, 0.0])
    np.testing.assert_allclose(out, [4 * 0.7, 0, 0], atol=1e-15)


def test_total_energy_example():
    sys = scalar_system()
    assert total_energy(sys, [2.0, 1.0, 1.0]) == pytest.approx(0.25 * (2 * np.log(2) - 1), rel=1e-13)
    assert total_energy(sys, [2.0, 1.0, 1.0]) == pytest.approx(0.096574, abs=1e-6)


def test_energy_gradient_example():
    sys = scalar_system()
    np.testing.assert_allclose(energy_gradient(sys, [np.e, 1.0, 1.0]), [0.25, 0, 0], atol=1e-15)


def test_uniform_ones_field_matches_rate_laws(fig3_system):
    X = np.ones(fig3_system.size)
    F = closed_field(fig3_system, X).reshape(-1, 4)
    np.testing.assert_allclose(F, np.tile([0.1, 0.3, -0.1, -0.2], (20, 1)), atol=1e-13)


def test_equilibrium_is_stationary(fig3_system):
    np.testing.assert_allclose(closed_field(fig3_system, fig3_system.X_star), 0, atol=1e-15)
    d = diagnostics(fig3_system, fig3_system.X_star)
    assert d.G_d == 0 and d.eps_D == 0 and np.all(d.eps_R == 0)


def test_uniform_point_of_equilibria_set(fig3_system):
    x = X_STAR * np.exp(0.3 * np.array([1, 0, 1, 0]) - 0.2 * np.array([0, 1, 1, 1]))
    X = np.tile(x, 20)
    np.testing.assert_allclose(closed_field(fig3_system, X), 0, atol=1e-14)
    d = diagnostics(fig3_system, X)
    assert d.G_d > 0
    assert abs(d.G_d_dot) < 1e-14 and d.eps_D == pytest.approx(0, abs=1e-14)
    assert d.eq_residual.max() < 1e-13


def test_moiety_totals(fig3_system):
    np.testing.assert_allclose(moiety_totals(fig3_system, fig3_system.X_star), [1.25, 1.40], rtol=1e-13)
    x_ss = np.array([2.1856, 1.7557, 0.9602, 0.2638])
    np.testing.assert_allclose(moiety_totals(fig3_system, np.tile(x_ss, 20)), [3.1458, 2.9797], rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(fig3_states())
def test_matrix_free_equals_materialized(fig3_system, X):
    Y = (X.reshape(-1, 4) / X_STAR)
    free = apply_laplacian(fig3_system, Y).ravel()
    L = laplacian_matrix(fig3_system)
    mat = L @ Y.ravel()
    np.testing.assert_allclose(free, mat, rtol=1e-12, atol=1e-12 * abs(L).max() * np.abs(Y).max())


@settings(max_examples=30, deadline=None)
@given(fig3_states())
def test_linear_operator_reproduces_diffusion(fig3_system, X):
    # F is zero at X* only, so compare against the full field minus reactions
    diffusion_part = closed_field(fig3_system, X) - reaction_term(fig3_system, X).ravel()
    np.testing.assert_allclose(linear_diffusion_operator(fig3_system) @ X, diffusion_part, rtol=1e-10, atol=1e-10)


def test_single_species_recovers_weighted_laplacian():
    mesh = uniform_interval_mesh(2.0, 6)
    sys = diffusion_only_system(mesh, [1.0], [0.7], scaling="none")
    ops = build_dec_operators(mesh)
    np.testing.assert_allclose(laplacian_matrix(sys).toarray(),
                               weighted_laplacian(ops, np.full(mesh.n_edges, 0.7)).toarray(), rtol=1e-14)


def test_zero_diffusivity_decouples(net, bf):
    sys = assemble(net, bf, uniform_interval_mesh(1.0, 5), [0.0, 0.0, 0.0, 0.0])
    rng = np.random.default_rng(1)
    X = rng.uniform(0.1, 3, sys.size)
    F = closed_field(sys, X).reshape(5, 4)
    for j, x in enumerate(X.reshape(5, 4)):
        np.testing.assert_allclose(F[j], hand_field([0.1, 0.4, 0.3, 0.5], x), rtol=1e-12, atol=1e-14)
    assert not np.any(sys.diffusing)


@pytest.mark.parametrize("scaling, factor", [("inverse_equilibrium", 1 / X_STAR), ("equilibrium", X_STAR), ("none", 1)])
def test_scalings(net, bf, scaling, factor):
    sys = assemble(net, bf, uniform_interval_mesh(1.0, 4), D_FIG3, scaling=scaling)
    np.testing.assert_allclose(sys.const_weights, 3.0 * np.tile(D_FIG3 * factor, (3, 1)), rtol=1e-14)


def test_unknown_scaling(net, bf):
    with pytest.raises(ValueError):
        assemble(net, bf, uniform_interval_mesh(1.0, 4), D_FIG3, scaling="fick")


def test_wrong_sizes(net, bf, fig3_system):
    with pytest.raises(ConsistencyError):
        assemble(net, bf, uniform_interval_mesh(1.0, 4), D_FIG3[:3])
    with pytest.raises(ConsistencyError):
        closed_field(fig3_system, np.ones(7))
    with pytest.raises(DomainError):
        closed_field(fig3_system, np.zeros(fig3_system.size))


@settings(max_examples=40, deadline=None)
@given(fig3_states(), st.data())
def test_boundary_repulsion(fig3_system, X, data):
    zeros = data.draw(arrays(bool, X.size))
    X = np.where(zeros, 0.0, X)
    F = closed_field(fig3_system, X, allow_zero=True)
    assert np.all(F[X == 0] >= 0)


@settings(max_examples=40, deadline=None)
@given(fig3_states())
def test_energy_chain_rule(fig3_system, X):
    d = diagnostics(fig3_system, X)
    exact = energy_gradient(fig3_system, X) @ closed_field(fig3_system, X)
    assert d.G_d_dot == pytest.approx(exact, rel=1e-10, abs=1e-12)
    assert np.all(d.eps_R <= 1e-14) and d.eps_D >= 0


@settings(max_examples=20, deadline=None)
@given(fig3_states())
def test_energy_gradient_finite_differences(fig3_system, X):
    h = 1e-6
    g = energy_gradient(fig3_system, X)
    idx = np.arange(0, X.size, 7)
    for i in idx:
        e = np.zeros(X.size)
        e[i] = h
        fd = (total_energy(fig3_system, X + e) - total_energy(fig3_system, X - e)) / (2 * h)
        assert g[i] == pytest.approx(fd, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(fig3_states())
def test_moieties_are_invariant_directions(fig3_system, X):
    # d/dt of the weighted totals vanishes for the closed field
    F = closed_field(fig3_system, X).reshape(-1, 4)
    rate = fig3_system.moieties @ (F.T @ fig3_system.ops.star0_diag)
    np.testing.assert_allclose(rate, 0, atol=1e-11 * max(1, np.abs(F).max()))


@settings(max_examples=40, deadline=None)
@given(fig3_states(), arrays(float, 8, elements=st.floats(-2.0, 2.0)))
def test_passivity(net, bf, X, fb):
    sys = assemble(net, bf, uniform_interval_mesh(1.0, 20), D_FIG3, mode="open")
    rate = energy_gradient(sys, X) @ open_field(sys, X, fb)
    assert rate == pytest.approx(energy_rate(sys, X, fb), rel=1e-10, abs=1e-12)
    assert rate <= supply_rate(sys, X, fb) + 1e-12
    inflow = np.abs(fb)
    assert energy_rate(sys, X, inflow) <= boundary_output(sys, X) @ inflow + 1e-12


def test_open_zero_flux_equals_closed(net, bf):
    mesh = uniform_interval_mesh(1.0, 6)
    closed = assemble(net, bf, mesh, D_FIG3)
    opened = assemble(net, bf, mesh, D_FIG3, mode="open")
    X = np.linspace(0.2, 3.0, closed.size)
    np.testing.assert_array_equal(open_field(opened, X, np.zeros(8)), closed_field(closed, X))


def test_state_dependent_diffusion(net, bf):
    mesh = uniform_interval_mesh(1.0, 6)

    def R_d(X):
        x = X.reshape(6, 4)
        edge_mean = 0.5 * (x[:-1] + x[1:])
        return (0.5 + edge_mean).ravel()

    sys = assemble(net, bf, mesh, R_d)
    X = np.linspace(0.2, 3.0, sys.size)
    d = diagnostics(sys, X)
    assert d.eps_D >= 0
    assert d.G_d_dot == pytest.approx(energy_gradient(sys, X) @ closed_field(sys, X), rel=1e-10)


def test_planar_system(net, bf):
    pts, tris = lattice(3, 3)
    sys = assemble(net, bf, build_mesh(pts, triangles=tris), D_FIG3)
    X = np.tile([1.0, 2.0, 0.5, 0.3], 9) * np.repeat(np.linspace(0.8, 1.2, 9), 4)
    d = diagnostics(sys, X)
    assert d.G_d_dot == pytest.approx(energy_gradient(sys, X) @ closed_field(sys, X), rel=1e-10)


def test_uniformity_metric(fig3_system):
    X = np.tile([1.0, 1.0, 1.0, 1.0], 20)
    assert uniformity(fig3_system, X) == 0
    X = X.reshape(20, 4)
    X[0, 2] = 1.5
    assert uniformity(fig3_system, X.ravel()) == pytest.approx(0.5 / (1 + 0.5 / 20))
