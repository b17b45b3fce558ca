"""Star-graph geometry and the unit system.

Everything downstream works in the dimensionless units hbar = 1, 2m = 1,
with lengths in units of a reference length. Consequences used throughout:

    E = k^2            on a clean lead (lead_potential = 0)
    q = sqrt(E - V)    inside a segment at constant potential V
    v = dE/dk = 2k     group velocity on the lead
    omega = E          time phase is e^{-i E t}

q is taken on the principal branch, so below a barrier (E < V) it is
+i|q| and the segment solutions decay.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import GraphValidationError

HBAR = 1.0


def energy_of_k(k):
    """Lead dispersion E(k) = k^2 (lead at zero potential)."""
    return np.asarray(k) ** 2 if np.ndim(k) else k * k


def k_of_energy(E, lead_potential=0.0):
    """Lead wavenumber k = sqrt(E - V_lead); requires propagating energy."""
    diff = np.asarray(E, dtype=float) - lead_potential
    if np.any(diff <= 0):
        raise ValueError("energy must lie above the lead potential")
    return np.sqrt(diff)


def segment_wavenumber(E, V):
    """q = sqrt(E - V) on the principal branch (decaying below the barrier).

    Vectorized over E and/or V; always returns complex.
    """
    return np.sqrt(np.asarray(E, dtype=complex) - np.asarray(V, dtype=complex))


@dataclass(frozen=True)
class Arm:
    """One arm: a finite segment (length, constant potential) + clean lead."""

    length: float
    potential: float

    def validated(self):
        if not np.isfinite(self.length) or self.length < 0:
            raise GraphValidationError(f"arm length must be finite and >= 0, got {self.length}")
        if not np.isfinite(self.potential):
            raise GraphValidationError(f"arm potential must be finite, got {self.potential}")
        return self


@dataclass(frozen=True)
class StarGraph:
    """N >= 2 arms joined at a single node (continuity + zero current sum).

    lead_potential is a common constant potential on every semi-infinite
    lead. It exists so that a global potential shift (arms and leads
    together) can be expressed exactly; physical presets keep it at 0.
    """

    arms: tuple[Arm, ...]
    lead_potential: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))

    @property
    def n_arms(self):
        return len(self.arms)

    def lengths(self):
        return np.array([a.length for a in self.arms])

    def potentials(self):
        return np.array([a.potential for a in self.arms])

    def validated(self):
        if self.n_arms < 2:
            raise GraphValidationError("a star graph needs at least 2 arms")
        for a in self.arms:
            a.validated()
        if not np.isfinite(self.lead_potential):
            raise GraphValidationError("lead potential must be finite")
        return self

    def with_sample_potential(self, value):
        """All finite segments set to `value`; leads untouched."""
        return replace(
            self, arms=tuple(Arm(a.length, float(value)) for a in self.arms)
        )

    def with_sample_shift(self, delta):
        """All finite segments shifted by `delta`; leads untouched."""
        return replace(
            self, arms=tuple(Arm(a.length, a.potential + delta) for a in self.arms)
        )

    def with_global_shift(self, delta):
        """Segments and leads shifted together by `delta`."""
        return replace(
            self,
            arms=tuple(Arm(a.length, a.potential + delta) for a in self.arms),
            lead_potential=self.lead_potential + delta,
        )


def star_graph(lengths, potentials, lead_potential=0.0):
    """Convenience constructor from parallel sequences."""
    if len(lengths) != len(potentials):
        raise GraphValidationError("lengths and potentials must pair up")
    g = StarGraph(
        tuple(Arm(float(l), float(v)) for l, v in zip(lengths, potentials)),
        float(lead_potential),
    )
    return g.validated()


@dataclass(frozen=True)
class Channel:
    """Scattering channel: wave enters on `incident`, observed on `outgoing`.

    Arm indices are 0-based. incident == outgoing selects the reflection
    amplitude r; otherwise the transmission amplitude into `outgoing`.
    """

    incident: int
    outgoing: int

    def validated(self, graph: StarGraph):
        n = graph.n_arms
        for name, i in (("incident", self.incident), ("outgoing", self.outgoing)):
            if not (0 <= i < n):
                raise GraphValidationError(
                    f"{name} arm index {i} out of range for {n}-arm graph"
                )
        return self

    @property
    def is_reflection(self):
        return self.incident == self.outgoing


@dataclass
class ScatteringSolution:
    """Full stationary solution at one energy for one incident arm.

    amplitudes[j] is t_j for j != incident and r for j == incident (the
    outgoing amplitude on the lead, with the incident plane wave removed).
    segment_coeffs[j] = (A_j, B_j) with psi_j(x) = A e^{i q x} + B e^{-i q x},
    x measured from the node toward the lead.
    """

    graph: StarGraph
    energy: float
    incident: int
    amplitudes: np.ndarray
    segment_coeffs: np.ndarray
    node_value: complex
    node_derivatives: np.ndarray

    @property
    def k(self):
        return float(np.sqrt(self.energy - self.graph.lead_potential))

    def unitarity_defect(self):
        return abs(float(np.sum(np.abs(self.amplitudes) ** 2)) - 1.0)


@dataclass
class SMatrix:
    """On-shell S-matrix; entries[out, inc] follows ScatteringSolution."""

    graph: StarGraph
    energy: float
    entries: np.ndarray

    def unitarity_defect(self):
        n = self.entries.shape[0]
        return float(
            np.max(np.abs(self.entries.conj().T @ self.entries - np.eye(n)))
        )

    def symmetry_defect(self):
        return float(np.max(np.abs(self.entries - self.entries.T)))
