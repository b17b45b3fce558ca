"""Stationary scattering solver for the star graph.

Per arm, the segment solution is carried from the node to the lead
interface by the constant-potential transfer matrix

    M(l, q) = [[cos(ql), sin(ql)/q], [-q sin(ql), cos(ql)]],  det M = 1,

acting on (psi, psi'). Matching each arm's interface values to an
outgoing (plus, on the incident arm, incoming) lead wave and the node to
continuity + Kirchhoff (sum of outward derivatives = 0) gives an
(N+1) x (N+1) linear system in the node value phi and the outward
derivatives d_i. Everything is vectorized over energy batches; the
scalar API wraps the batch of one.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverDegeneracyError
from .model import (
    Channel,
    ScatteringSolution,
    SMatrix,
    StarGraph,
    k_of_energy,
    segment_wavenumber,
)

# residual (relative to the drive 2k) above which the node system is
# treated as degenerate; unreachable for real energies above the lead
_DEGENERACY_RESIDUAL = 1e-6


def segment_transfer(length, q):
    """Transfer matrix of one constant-potential segment.

    q may be complex (evanescent below the barrier). The q -> 0 limit
    [[1, l], [0, 1]] comes out of the sinc form without branching.
    """
    q = complex(q)
    ql = q * length
    return np.array(
        [
            [np.cos(ql), length * np.sinc(ql / np.pi)],
            [-q * np.sin(ql), np.cos(ql)],
        ]
    )


def _transfer_entries(graph: StarGraph, E):
    """Batched transfer entries for all arms.

    E is a 1-D float array (B,); returns M11, M12, M21, M22 each (B, N)
    plus the segment wavenumbers q (B, N).
    """
    lengths = graph.lengths()[None, :]
    q = segment_wavenumber(E[:, None], graph.potentials()[None, :])
    ql = q * lengths
    m11 = np.cos(ql)
    m12 = lengths * np.sinc(ql / np.pi)
    m21 = -q * np.sin(ql)
    return m11, m12, m21, m11, q


def _solve_batch(graph: StarGraph, E, incident):
    """Solve the node system for a batch of energies.

    Returns (amps, phi, d, q, degenerate) where amps is (B, N) outgoing
    amplitudes (incident column has the plane wave removed), phi (B,),
    d (B, N) outward derivatives at the node, q (B, N), and degenerate a
    boolean mask of energies where the system could not be solved (those
    rows are NaN).
    """
    E = np.atleast_1d(np.asarray(E, dtype=float))
    n = graph.n_arms
    nb = E.shape[0]
    k = k_of_energy(E, graph.lead_potential)

    m11, m12, m21, m22, q = _transfer_entries(graph, E)
    ik = 1j * k[:, None]

    A = np.zeros((nb, n + 1, n + 1), dtype=complex)
    b = np.zeros((nb, n + 1), dtype=complex)
    A[:, :n, 0] = m21 - ik * m11
    idx = np.arange(n)
    A[:, idx, 1 + idx] = m22 - ik * m12
    A[:, n, 1:] = 1.0
    b[:, incident] = -2j * k

    degenerate = np.zeros(nb, dtype=bool)
    try:
        x = np.linalg.solve(A, b[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        x = np.full((nb, n + 1), np.nan, dtype=complex)
        for i in range(nb):
            try:
                x[i] = np.linalg.solve(A[i], b[i])
            except np.linalg.LinAlgError:
                degenerate[i] = True

    resid = np.max(np.abs(np.einsum("bij,bj->bi", A, x) - b), axis=1)
    bad = ~degenerate & ~(resid <= _DEGENERACY_RESIDUAL * 2 * k)
    degenerate |= bad
    x[degenerate] = np.nan

    phi = x[:, 0]
    d = x[:, 1:]
    psi_lead = m11 * phi[:, None] + m12 * d
    amps = psi_lead.copy()
    amps[:, incident] -= 1.0
    return amps, phi, d, q, degenerate


def _cond_at(graph: StarGraph, E, incident):
    E = np.atleast_1d(np.asarray(E, dtype=float))
    n = graph.n_arms
    k = k_of_energy(E, graph.lead_potential)
    m11, m12, m21, m22, _ = _transfer_entries(graph, E)
    ik = 1j * k[:, None]
    A = np.zeros((E.shape[0], n + 1, n + 1), dtype=complex)
    A[:, :n, 0] = m21 - ik * m11
    idx = np.arange(n)
    A[:, idx, 1 + idx] = m22 - ik * m12
    A[:, n, 1:] = 1.0
    return float(np.linalg.cond(A[0]))


def solve_star(graph: StarGraph, E, incident):
    """Full stationary solution at one energy, unit wave in on `incident`."""
    graph.validated()
    Channel(incident, incident).validated(graph)
    amps, phi, d, q, degenerate = _solve_batch(graph, float(E), incident)
    if degenerate[0]:
        raise SolverDegeneracyError(float(E), _cond_at(graph, E, incident))

    # psi(x) = A e^{iqx} + B e^{-iqx} from node value and derivative;
    # near q = 0 the pair blows up, density handles that branch from
    # (phi, d) directly.
    qs = q[0]
    q_safe = np.where(np.abs(qs) < 1e-150, 1.0, qs)
    a_coef = 0.5 * (phi[0] + d[0] / (1j * q_safe))
    b_coef = 0.5 * (phi[0] - d[0] / (1j * q_safe))
    return ScatteringSolution(
        graph=graph,
        energy=float(E),
        incident=incident,
        amplitudes=amps[0],
        segment_coeffs=np.stack([a_coef, b_coef], axis=1),
        node_value=complex(phi[0]),
        node_derivatives=d[0],
    )


def channel_amplitude(graph: StarGraph, E, channel: Channel):
    """r or t for one channel; vectorized over E.

    Degenerate energies come back NaN in the array form (sweeps step
    over them); the scalar form raises.
    """
    scalar = np.ndim(E) == 0
    amps, _, _, _, degenerate = _solve_batch(graph, E, channel.incident)
    if scalar:
        if degenerate[0]:
            raise SolverDegeneracyError(
                float(E), _cond_at(graph, E, channel.incident)
            )
        return complex(amps[0, channel.outgoing])
    return amps[:, channel.outgoing]


def s_matrix_sweep(graph: StarGraph, E):
    """S-matrices over an energy batch: (B, N, N), [out, inc] indexing."""
    E = np.atleast_1d(np.asarray(E, dtype=float))
    n = graph.n_arms
    S = np.empty((E.shape[0], n, n), dtype=complex)
    for inc in range(n):
        amps, _, _, _, _ = _solve_batch(graph, E, inc)
        S[:, :, inc] = amps
    return S


def s_matrix(graph: StarGraph, E):
    graph.validated()
    S = s_matrix_sweep(graph, float(E))[0]
    if np.any(np.isnan(S)):
        raise SolverDegeneracyError(float(E), _cond_at(graph, E, 0))
    return SMatrix(graph=graph, energy=float(E), entries=S)


def _int_exp(c, l):
    """integral_0^l e^{c x} dx for complex c, series-stable near c l = 0."""
    c = np.asarray(c, dtype=complex)
    z = c * l
    small = np.abs(z) < 1e-6
    c_safe = np.where(small, 1.0, c)
    exact = (np.exp(z) - 1.0) / c_safe
    series = l * (1.0 + z / 2.0 + z * z / 6.0 + z ** 3 / 24.0)
    return np.where(small, series, exact)


def internal_density_integral(solution: ScatteringSolution):
    """Per-arm integral of |psi|^2 over each finite segment (closed form)."""
    graph = solution.graph
    E = solution.energy
    out = np.zeros(graph.n_arms)
    for j, arm in enumerate(graph.arms):
        l = arm.length
        if l == 0.0:
            continue
        q = complex(segment_wavenumber(E, arm.potential))
        if abs(q) * l < 1e-6:
            # psi ~ phi + d x, error O((ql)^2)
            phi, d = solution.node_value, solution.node_derivatives[j]
            val = (
                abs(phi) ** 2 * l
                + (phi.conjugate() * d).real * l ** 2
                + abs(d) ** 2 * l ** 3 / 3.0
            )
        else:
            a, b = solution.segment_coeffs[j]
            val = (
                abs(a) ** 2 * _int_exp(1j * (q - q.conjugate()), l)
                + abs(b) ** 2 * _int_exp(-1j * (q - q.conjugate()), l)
                + 2.0 * (a * b.conjugate() * _int_exp(1j * (q + q.conjugate()), l)).real
            ).real
        out[j] = val
    return out
