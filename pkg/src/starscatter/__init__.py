"""Stationary scattering on star graphs of 1D quantum wires.

Library layout:

    model       graph geometry, channels, unit conventions
    solver      transfer-matrix node solver, S-matrix, segment densities
    times       phase tracking, Wigner / precession delay times, DOS
    argand      amplitude trajectories, winding, subloops, axis crossings
    wavepacket  Gaussian packet transmission and arrival timing
    cli         batch front end with the preset catalog
"""

from .errors import (
    ConfigError,
    GraphValidationError,
    PhaseSingularityError,
    ResolutionError,
    SingularityOnContourError,
    SolverDegeneracyError,
    StarScatterError,
)
from .model import Arm, Channel, ScatteringSolution, SMatrix, StarGraph, star_graph
from .solver import (
    channel_amplitude,
    internal_density_integral,
    s_matrix,
    segment_transfer,
    solve_star,
)
from .times import (
    DelayRecord,
    PhaseTrack,
    delay_spectrum,
    dos_from_smatrix,
    dos_from_wavefunction,
    flagged_windows,
    larmor_time,
    track_phase,
    wigner_delay,
)
from .argand import (
    ComplexTrajectory,
    Subloop,
    find_subloops,
    loop_phase_integral,
    real_axis_crossings,
    trace,
    winding_number,
)
from .wavepacket import (
    ArrivalMeasurement,
    Wavepacket,
    build_packet,
    measure_delay,
    propagate,
    transmitted_norm,
)

__version__ = "0.1.0"

__all__ = [
    "Arm",
    "ArrivalMeasurement",
    "Channel",
    "ComplexTrajectory",
    "ConfigError",
    "DelayRecord",
    "GraphValidationError",
    "PhaseSingularityError",
    "PhaseTrack",
    "ResolutionError",
    "SMatrix",
    "ScatteringSolution",
    "SingularityOnContourError",
    "SolverDegeneracyError",
    "StarGraph",
    "StarScatterError",
    "Subloop",
    "Wavepacket",
    "build_packet",
    "channel_amplitude",
    "delay_spectrum",
    "dos_from_smatrix",
    "dos_from_wavefunction",
    "find_subloops",
    "flagged_windows",
    "internal_density_integral",
    "larmor_time",
    "loop_phase_integral",
    "measure_delay",
    "propagate",
    "real_axis_crossings",
    "s_matrix",
    "segment_transfer",
    "solve_star",
    "star_graph",
    "trace",
    "track_phase",
    "transmitted_norm",
    "wigner_delay",
    "winding_number",
]
