"""Solver checks against independently constructed oracles.

The production solver eliminates the interior of each arm through
transfer matrices and solves a small node system. The oracle here keeps
every interior coefficient as an unknown and builds the full matching
system (continuity at the junction, Kirchhoff current balance,
continuity of value and slope at each segment/lead interface) directly
from the plane-wave ansatz, so the two share no linear algebra.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad, solve_ivp

from starscatter import Channel, s_matrix, segment_transfer, solve_star, star_graph
from starscatter.model import segment_wavenumber
from starscatter.solver import channel_amplitude, s_matrix_sweep


def dense_matching_solve(graph, E, incident):
    """Full (3N)x(3N) matching system: per arm A_i, B_i, out_i."""
    n = graph.n_arms
    k = np.sqrt(E - graph.lead_potential)
    qs = [segment_wavenumber(E, a.potential) for a in graph.arms]
    dim = 3 * n
    A = np.zeros((dim, dim), dtype=complex)
    b = np.zeros(dim, dtype=complex)

    def col(arm, which):
        return 3 * arm + {"A": 0, "B": 1, "out": 2}[which]

    row = 0
    # junction continuity: psi_i(0) = psi_{i+1}(0)
    for i in range(n - 1):
        A[row, col(i, "A")] = 1
        A[row, col(i, "B")] = 1
        A[row, col(i + 1, "A")] = -1
        A[row, col(i + 1, "B")] = -1
        row += 1
    # Kirchhoff: sum of outward slopes vanishes
    for i in range(n):
        A[row, col(i, "A")] = 1j * qs[i]
        A[row, col(i, "B")] = -1j * qs[i]
    row += 1
    # interface matching at x = l_i: value then slope
    for i in range(n):
        li, qi = graph.arms[i].length, qs[i]
        ep, em = np.exp(1j * qi * li), np.exp(-1j * qi * li)
        A[row, col(i, "A")] = ep
        A[row, col(i, "B")] = em
        A[row, col(i, "out")] = -1
        b[row] = 1 if i == incident else 0
        row += 1
        A[row, col(i, "A")] = 1j * qi * ep
        A[row, col(i, "B")] = -1j * qi * em
        A[row, col(i, "out")] = -1j * k
        b[row] = -1j * k if i == incident else 0
        row += 1
    x = np.linalg.solve(A, b)
    outs = x[2::3]
    coeffs = [(x[3 * i], x[3 * i + 1]) for i in range(n)]
    return outs, coeffs


REFERENCE_E = 2.7 ** 2


@pytest.mark.parametrize(
    "lengths, potentials",
    [
        ([1.0, 5.0, 1.0], [-1000.0] * 3),
        ([0.0, 5.0, 0.0], [-1000.0] * 3),
        ([0.7, 2.3], [-3.0, 4.0]),
        ([1.0, 2.0, 0.5, 1.5], [-10.0, 2.0, -0.5, 0.0]),
    ],
)
def test_amplitudes_match_dense_oracle(lengths, potentials):
    g = star_graph(lengths, potentials)
    for inc in range(g.n_arms):
        outs, coeffs = dense_matching_solve(g, REFERENCE_E, inc)
        sol = solve_star(g, REFERENCE_E, inc)
        assert_allclose(sol.amplitudes, outs, atol=1e-10)
        assert_allclose(
            np.asarray(sol.segment_coeffs), np.asarray(coeffs), atol=1e-10
        )


def test_amplitudes_match_dense_oracle_below_barrier():
    # E below one arm's potential: evanescent interior, still unitary
    g = star_graph([1.0, 2.0, 1.0], [0.0, 6.0, -2.0])
    outs, _ = dense_matching_solve(g, 4.0, 0)
    sol = solve_star(g, 4.0, 0)
    assert_allclose(sol.amplitudes, outs, atol=1e-10)
    assert sol.unitarity_defect() < 1e-12


def transfer_by_ode(length, V, E):
    def rhs(_, y):
        return [y[1], (V - E) * y[0]]

    cols = []
    for y0 in ([1.0, 0.0], [0.0, 1.0]):
        r = solve_ivp(
            rhs, (0.0, length), y0, method="DOP853", rtol=1e-12, atol=1e-13
        )
        cols.append(r.y[:, -1])
    return np.array(cols).T


@pytest.mark.parametrize(
    "length, V, E",
    [
        (1.0, -1000.0, 7.29),
        (5.0, -1000.0, 7.29),
        (1.0, 5.0, 2.0),  # evanescent
        (0.3, 5.0, 5.0),  # exactly at threshold, q = 0
        (2.0, -3.0, 12.0),
    ],
)
def test_segment_transfer_matches_ode(length, V, E):
    q = segment_wavenumber(E, V)
    M = segment_transfer(length, q)
    assert_allclose(M.real, transfer_by_ode(length, V, E), atol=1e-9)
    assert_allclose(M.imag, np.zeros((2, 2)), atol=1e-9)


def test_segment_transfer_unimodular(rng):
    for _ in range(10_000):
        length = rng.uniform(0.0, 6.0)
        E = rng.uniform(-50.0, 50.0)
        V = rng.uniform(-50.0, 50.0)
        q = segment_wavenumber(E, V)
        M = segment_transfer(length, q)
        # cosh^2 - sinh^2 cancels catastrophically when the entries are
        # huge (deep tunneling), so the bound scales with the entry size
        tol = 1e-12 * max(1.0, float(np.abs(M).max()) ** 2)
        assert abs(np.linalg.det(M) - 1) < tol


def test_segment_transfer_smooth_through_threshold():
    # sinc form: no branch at q -> 0
    M0 = segment_transfer(1.3, 0.0)
    Meps = segment_transfer(1.3, 1e-9)
    assert_allclose(M0, [[1.0, 1.3], [0.0, 1.0]], atol=1e-15)
    assert_allclose(Meps, M0, atol=1e-12)


def test_bare_junction_splits_one_third():
    # all-lead medium: r = -1/3 exactly, transmissions 2/3
    g = star_graph([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    sol = solve_star(g, 3.1, 0)
    assert sol.amplitudes[0] == pytest.approx(-1 / 3, abs=1e-12)
    for j in (1, 2):
        assert sol.amplitudes[j] == pytest.approx(2 / 3, abs=1e-12)


def test_free_segments_only_add_phase():
    g = star_graph([0.8, 1.7, 0.4], [0.0, 0.0, 0.0])
    k = 1.9
    sol = solve_star(g, k ** 2, 0)
    assert abs(sol.amplitudes[0]) == pytest.approx(1 / 3, abs=1e-12)
    assert abs(sol.amplitudes[2]) == pytest.approx(2 / 3, abs=1e-12)
    # transmitted phase is the free flight across both segments
    expected = 2 / 3 * np.exp(1j * k * (0.8 + 0.4))
    assert_allclose(sol.amplitudes[2], expected, atol=1e-12)


def square_well_transmission(k, q, L):
    """Closed-form plane-wave transmission across one constant well."""
    return 2 * k * q / (
        2 * k * q * np.cos(q * L) - 1j * (k ** 2 + q ** 2) * np.sin(q * L)
    )


@pytest.mark.parametrize("V0", [-1000.0, -7.3, 2.5])
def test_two_arm_graph_is_a_square_well(V0):
    l1, l2 = 0.6, 1.1
    g = star_graph([l1, l2], [V0, V0])
    for k in (0.9, 2.7, 8.1):
        E = k ** 2
        q = segment_wavenumber(E, V0)
        t = solve_star(g, E, 0).amplitudes[1]
        assert_allclose(
            t, square_well_transmission(k, q, l1 + l2), atol=1e-8
        )


def test_zero_length_arm_potential_is_immaterial():
    # a zero-length segment is a bare lead whatever its nominal
    # potential, so changing it cannot move any S entry
    E = REFERENCE_E
    a = s_matrix(star_graph([1.0, 0.0, 5.0], [-1000.0, 0.0, -1000.0]), E)
    b = s_matrix(star_graph([1.0, 0.0, 5.0], [-1000.0, 777.0, -1000.0]), E)
    assert_allclose(a.entries, b.entries, atol=1e-12)
    assert a.unitarity_defect() < 1e-12


def test_density_integral_matches_quadrature(thick_graph):
    from starscatter.solver import internal_density_integral

    sol = solve_star(thick_graph, REFERENCE_E, 0)
    by_quad = []
    for (A, B), arm in zip(sol.segment_coeffs, thick_graph.arms):
        q = segment_wavenumber(REFERENCE_E, arm.potential)

        def dens(x):
            psi = A * np.exp(1j * q * x) + B * np.exp(-1j * q * x)
            return abs(psi) ** 2

        val, err = quad(dens, 0.0, arm.length, limit=500)
        by_quad.append(val)
        assert err < 1e-7
    assert_allclose(internal_density_integral(sol), by_quad, rtol=1e-8)


def test_s_matrix_random_graphs_unitary_and_symmetric(rng):
    for _ in range(60):
        n = int(rng.integers(2, 6))
        lengths = rng.uniform(0.0, 4.0, n)
        potentials = rng.uniform(-60.0, 10.0, n)
        E = float(rng.uniform(0.05, 50.0))
        s = s_matrix(star_graph(lengths, potentials), E)
        assert s.unitarity_defect() < 1e-10
        assert s.symmetry_defect() < 1e-10


def test_sweep_matches_pointwise(thick_graph):
    Es = np.linspace(0.5, 40.0, 17)
    block = s_matrix_sweep(thick_graph, Es)
    for i, E in enumerate(Es):
        assert_allclose(block[i], s_matrix(thick_graph, E).entries, atol=1e-12)


def test_channel_amplitude_vector_and_scalar_agree(thick_graph, t31):
    Es = np.linspace(0.3, 30.0, 11)
    vec = channel_amplitude(thick_graph, Es, t31)
    for i, E in enumerate(Es):
        assert vec[i] == pytest.approx(
            channel_amplitude(thick_graph, float(E), t31), abs=1e-13
        )


def test_scattering_solution_records_node_data(thick_graph):
    sol = solve_star(thick_graph, REFERENCE_E, 0)
    # node value is the common boundary value of every arm's interior
    for (A, B) in sol.segment_coeffs:
        assert A + B == pytest.approx(sol.node_value, abs=1e-10)
    assert sum(sol.node_derivatives) == pytest.approx(0.0, abs=1e-10)
