"""Delay times and density of states from the scattering phase.

Conventions (see model docstring for units):

    theta = arg t, continued along the sweep (no 2 pi jumps)
    wdt   = hbar * d theta / d E            (Wigner delay)
    lpt   = -hbar * d theta / d (eV_sample) (precession-clock delay)

where the sample shift moves every finite segment by the same amount and
leaves the leads alone. Both derivatives use central differences with
one Richardson step, (4 D(h/2) - D(h)) / 3, phase differences taken
wrapped so branch cuts cannot leak in; steps auto-shrink until each
wrapped difference is < pi/4.

The density of states of the sample region comes in two independent
forms used to cross-check each other:

    from the S-matrix:      -(1/2pi) sum_ab Im[ s_ab* d s_ab / d(eV) ]
    from the wavefunctions: sum_inc sum_arms int |psi|^2 / (2 pi * 2k)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PhaseSingularityError, StarScatterError
from .model import HBAR, Channel, StarGraph
from .solver import (
    channel_amplitude,
    internal_density_integral,
    s_matrix_sweep,
    solve_star,
)

SWEEP_KINDS = ("energy", "sample_potential", "global_potential")

_AMP_FLOOR = 1e-12  # |t| below this is treated as a phase singularity


def _wrap(dphi):
    """Wrap phase differences into (-pi, pi]."""
    return (np.asarray(dphi) + np.pi) % (2 * np.pi) - np.pi


def unwrap_track(angles):
    """Continue a sequence of principal-value angles, assuming each true
    step is < pi; first entry kept as is."""
    a = np.asarray(angles, dtype=float)
    return a[0] + np.concatenate(([0.0], np.cumsum(_wrap(np.diff(a)))))


def make_evaluator(graph: StarGraph, channel: Channel, kind, fixed_k=None):
    """Map a sweep parameter to the channel amplitude; vectorized.

    energy:           parameter is k on the lead, amp(k) at E = k^2 + V_lead
    sample_potential: parameter is the common segment potential at fixed k
    global_potential: parameter is a shift of segments and leads together
                      at fixed lead k (so E moves with the shift)
    """
    graph.validated()
    channel.validated(graph)
    if kind not in SWEEP_KINDS:
        raise StarScatterError(f"unknown sweep kind {kind!r}")
    if kind == "energy":
        def ev(p):
            p = np.asarray(p, dtype=float)
            return channel_amplitude(graph, p ** 2 + graph.lead_potential, channel)
        return ev
    if fixed_k is None or fixed_k <= 0:
        raise StarScatterError(f"{kind} sweep needs fixed_k > 0")
    E0 = fixed_k ** 2 + graph.lead_potential
    if kind == "sample_potential":
        def ev(p):
            if np.ndim(p) == 0:
                return channel_amplitude(
                    graph.with_sample_potential(float(p)), E0, channel
                )
            return np.array(
                [
                    channel_amplitude(
                        graph.with_sample_potential(float(v)), E0, channel
                    )
                    for v in np.asarray(p, dtype=float)
                ]
            )
        return ev

    # global shift by delta == same graph at lead energy E0 + delta
    def ev(p):
        p = np.asarray(p, dtype=float)
        return channel_amplitude(graph, E0 + p, channel)
    return ev


@dataclass
class PhaseTrack:
    """A continued scattering phase along one sweep.

    params runs in sweep order (may be descending). thetas is the
    continued phase with theta[0] in (-pi, pi]; amps the amplitudes.
    """

    graph: StarGraph
    channel: Channel
    kind: str
    fixed_k: float | None
    params: np.ndarray
    amps: np.ndarray
    thetas: np.ndarray

    def evaluator(self):
        return make_evaluator(self.graph, self.channel, self.kind, self.fixed_k)

    def theta_at(self, p):
        """Continued phase at an arbitrary parameter by local re-anchor."""
        i = int(np.argmin(np.abs(self.params - p)))
        amp = self.evaluator()(p)
        if abs(amp) < _AMP_FLOOR:
            raise PhaseSingularityError(p, p)
        return self.thetas[i] + _wrap(np.angle(amp) - np.angle(self.amps[i]))


def track_phase(
    graph,
    channel,
    kind,
    start,
    stop,
    *,
    fixed_k=None,
    initial=512,
    max_points=200_000,
    max_step_angle=np.pi / 2,
):
    """Adaptively sample a sweep until consecutive phase steps are < pi/2,
    then unwrap. Refinement bisects offending intervals; running out of
    budget, or bisecting down to nothing because the amplitude passes
    through zero, raises PhaseSingularityError with the bracket.
    """
    if initial < 2:
        raise StarScatterError("need at least 2 initial samples")
    ev = make_evaluator(graph, channel, kind, fixed_k)
    params = list(np.linspace(start, stop, initial))
    amps = list(np.asarray(ev(np.array(params))))

    span = abs(stop - start)
    min_step = max(span, 1.0) * 1e-12
    budget = max_points - len(params)
    i = 0
    while i < len(params) - 1:
        a0, a1 = amps[i], amps[i + 1]
        if abs(a0) < _AMP_FLOOR or abs(a1) < _AMP_FLOOR:
            raise PhaseSingularityError(params[i], params[i + 1])
        step = abs(_wrap(np.angle(a1) - np.angle(a0)))
        if step < max_step_angle:
            i += 1
            continue
        if abs(params[i + 1] - params[i]) < min_step or budget <= 0:
            raise PhaseSingularityError(
                params[i],
                params[i + 1],
                msg=f"phase step {step:.3f} rad not resolvable in "
                    f"({params[i]!r}, {params[i+1]!r})",
            )
        mid = 0.5 * (params[i] + params[i + 1])
        params.insert(i + 1, mid)
        amps.insert(i + 1, complex(ev(mid)))
        budget -= 1

    params = np.array(params)
    amps = np.array(amps)
    thetas = unwrap_track(np.angle(amps))
    return PhaseTrack(
        graph=graph,
        channel=channel,
        kind=kind,
        fixed_k=fixed_k,
        params=params,
        amps=amps,
        thetas=thetas,
    )


def _phase_derivative(ev, p0, h0, min_h=1e-11):
    """d arg(ev)/dp at p0: wrapped central differences, Richardson step,
    auto-shrinking h until both wrapped half-steps are < pi/4."""
    a0 = ev(p0)
    if abs(a0) < _AMP_FLOOR:
        raise PhaseSingularityError(p0, p0)
    th0 = np.angle(a0)

    def central(h):
        dp = _wrap(np.angle(ev(p0 + h)) - th0)
        dm = _wrap(th0 - np.angle(ev(p0 - h)))
        if max(abs(dp), abs(dm)) >= np.pi / 4:
            return None
        return (dp + dm) / (2 * h)

    h = h0
    while h > min_h:
        d1 = central(h)
        d2 = central(h / 2)
        if d1 is not None and d2 is not None:
            return (4 * d2 - d1) / 3
        h /= 4
    raise PhaseSingularityError(
        p0 - h0, p0 + h0, msg=f"phase derivative not resolvable at {p0!r}"
    )


def wigner_delay(track: PhaseTrack, E=None, k=None):
    """hbar d theta / d E from the track's channel.

    Give E or k (k wins if both). Works at any point of the track's
    sweep axis; for potential-sweep tracks the energy axis still means
    the lead energy of the underlying graph.
    """
    graph, channel = track.graph, track.channel
    if k is None:
        if E is None:
            raise StarScatterError("wigner_delay needs E or k")
        k = float(np.sqrt(float(E) - graph.lead_potential))
    k = float(k)

    if track.kind == "energy":
        ev = track.evaluator()
    else:
        ev = make_evaluator(graph, channel, "energy")
    h = min(1e-4 * max(1.0, k), 0.5 * k)  # stay on the k > 0 branch
    dtheta_dk = _phase_derivative(ev, k, h)
    return HBAR * dtheta_dk / (2 * k)


def wigner_delay_identity(graph, channel, E, h=None):
    """Cross-check form: Im[t'(E)/t(E)] by complex-step-free central FD."""
    E = float(E)
    if h is None:
        h = 1e-6 * max(1.0, abs(E))
    t0 = channel_amplitude(graph, E, channel)
    if abs(t0) < _AMP_FLOOR:
        raise PhaseSingularityError(E, E)

    def deriv(hh):
        return (
            channel_amplitude(graph, E + hh, channel)
            - channel_amplitude(graph, E - hh, channel)
        ) / (2 * hh)

    d = (4 * deriv(h / 2) - deriv(h)) / 3
    return HBAR * float(np.imag(d / t0))


def _default_dv(graph: StarGraph):
    vmax = float(np.max(np.abs(graph.potentials()))) if graph.n_arms else 0.0
    return 1e-4 * max(1.0, vmax)


def larmor_time(graph: StarGraph, channel: Channel, E, dv=None):
    """-hbar d theta / d(eV_sample) at fixed E; sample = all segments."""
    graph.validated()
    channel.validated(graph)
    E = float(E)
    if dv is None:
        dv = _default_dv(graph)

    def ev(v_shift):
        return channel_amplitude(graph.with_sample_shift(v_shift), E, channel)

    return -HBAR * _phase_derivative(ev, 0.0, dv)


def _dos_smatrix_batch(graph: StarGraph, E, dv):
    """Sample DOS from the S-matrix, Richardson in dv; vectorized over E."""
    E = np.atleast_1d(np.asarray(E, dtype=float))
    S0 = s_matrix_sweep(graph, E)

    def nu(d):
        Sp = s_matrix_sweep(graph.with_sample_shift(d), E)
        Sm = s_matrix_sweep(graph.with_sample_shift(-d), E)
        dS = (Sp - Sm) / (2 * d)
        return -np.sum(np.imag(np.conj(S0) * dS), axis=(1, 2)) / (2 * np.pi)

    return (4 * nu(dv / 2) - nu(dv)) / 3


def dos_from_smatrix(graph: StarGraph, E, dv=None):
    """Density of states of the sample region from S-matrix sensitivity."""
    graph.validated()
    if dv is None:
        dv = _default_dv(graph)
    out = _dos_smatrix_batch(graph, E, dv)
    return float(out[0]) if np.ndim(E) == 0 else out


def dos_from_wavefunction(graph: StarGraph, E):
    """Same quantity from scattering-state densities integrated over the
    segments, summed over incident channels, /(2 pi v)."""
    graph.validated()
    Es = np.atleast_1d(np.asarray(E, dtype=float))
    out = np.empty(Es.shape[0])
    for i, e in enumerate(Es):
        k = np.sqrt(e - graph.lead_potential)
        tot = 0.0
        for inc in range(graph.n_arms):
            sol = solve_star(graph, float(e), inc)
            tot += float(np.sum(internal_density_integral(sol)))
        out[i] = tot / (2 * np.pi * 2 * k)
    return float(out[0]) if np.ndim(E) == 0 else out


@dataclass
class DelayRecord:
    """One sweep point of the delay comparison."""

    k: float
    energy: float
    amp: complex
    theta: float
    wdt: float
    lpt: float
    dos_smatrix: float
    dos_wavefunction: float
    eq16_flag: bool


def _batched_phase_derivative(ev, p, h0):
    """Vectorized version of _phase_derivative over a parameter grid."""
    p = np.asarray(p, dtype=float)
    a0 = ev(p)
    th0 = np.angle(a0)
    h = np.full(p.shape, h0, dtype=float)

    def halves(hh):
        dp = _wrap(np.angle(ev(p + hh)) - th0)
        dm = _wrap(th0 - np.angle(ev(p - hh)))
        ok = np.maximum(np.abs(dp), np.abs(dm)) < np.pi / 4
        return (dp + dm) / (2 * hh), ok

    out = np.full(p.shape, np.nan)
    todo = np.abs(a0) >= _AMP_FLOOR
    for _ in range(40):
        if not np.any(todo) or np.all(h[todo] < 1e-11):
            break
        d1, ok1 = halves(h)
        d2, ok2 = halves(h / 2)
        good = todo & ok1 & ok2
        out[good] = ((4 * d2 - d1) / 3)[good]
        todo &= ~good
        h = np.where(todo, h / 4, h)
    return out


def delay_spectrum(
    graph: StarGraph,
    channel: Channel,
    k_grid,
    *,
    dv=None,
    agreement_rtol=5e-2,
    agreement_atol=1e-6,
    with_dos=True,
    fd_step=None,
):
    """Delay comparison over a lead-k grid.

    Computes theta (continued along the grid), wdt, lpt, both DOS forms,
    and flags points where the two delays are negative and equal within
    max(agreement_rtol * |wdt|, agreement_atol). Returns a list of
    DelayRecord in grid order. Points where the amplitude is below the
    singularity floor come back NaN-valued and unflagged.
    """
    graph.validated()
    channel.validated(graph)
    ks = np.asarray(k_grid, dtype=float)
    if ks.ndim != 1 or ks.shape[0] < 2:
        raise StarScatterError("k_grid must be 1-D with at least 2 points")
    if dv is None:
        dv = _default_dv(graph)

    ev_k = make_evaluator(graph, channel, "energy")
    amps = ev_k(ks)
    thetas = unwrap_track(np.angle(amps))
    Es = ks ** 2 + graph.lead_potential

    # fd_step lets a caller that splits the grid keep one step size, so
    # results do not depend on how the grid was partitioned
    h0 = fd_step if fd_step is not None else min(
        1e-4 * max(1.0, float(np.max(ks))), 0.5 * float(np.min(ks))
    )
    dth_dk = _batched_phase_derivative(ev_k, ks, h0)
    wdt = HBAR * dth_dk / (2 * ks)

    def lpt_halves(hh):
        ap = channel_amplitude(graph.with_sample_shift(hh), Es, channel)
        am = channel_amplitude(graph.with_sample_shift(-hh), Es, channel)
        dp = _wrap(np.angle(ap) - np.angle(amps))
        dm = _wrap(np.angle(amps) - np.angle(am))
        ok = np.maximum(np.abs(dp), np.abs(dm)) < np.pi / 4
        return (dp + dm) / (2 * hh), ok

    lpt = np.full(ks.shape, np.nan)
    todo = np.abs(amps) >= _AMP_FLOOR
    hh = dv
    for _ in range(40):
        if not np.any(todo) or hh < 1e-11:
            break
        d1, ok1 = lpt_halves(hh)
        d2, ok2 = lpt_halves(hh / 2)
        good = todo & ok1 & ok2
        lpt[good] = (-(4 * d2 - d1) / 3)[good]
        todo &= ~good
        hh /= 4

    if with_dos:
        dos_s = _dos_smatrix_batch(graph, Es, dv)
        dos_psi = dos_from_wavefunction(graph, Es)
    else:
        dos_s = np.full(ks.shape, np.nan)
        dos_psi = np.full(ks.shape, np.nan)

    with np.errstate(invalid="ignore"):
        tol = np.maximum(agreement_rtol * np.abs(wdt), agreement_atol)
        flags = (wdt < 0) & (lpt < 0) & (np.abs(wdt - lpt) <= tol)
    flags &= ~(np.isnan(wdt) | np.isnan(lpt))

    return [
        DelayRecord(
            k=float(ks[i]),
            energy=float(Es[i]),
            amp=complex(amps[i]),
            theta=float(thetas[i]),
            wdt=float(wdt[i]),
            lpt=float(lpt[i]),
            dos_smatrix=float(dos_s[i]),
            dos_wavefunction=float(dos_psi[i]),
            eq16_flag=bool(flags[i]),
        )
        for i in range(ks.shape[0])
    ]


def flagged_windows(records, min_width=0.0):
    """Contiguous k-windows where eq16_flag holds, as (k_lo, k_hi) pairs."""
    out = []
    start = None
    prev = None
    for r in records:
        if r.eq16_flag and start is None:
            start = r.k
        elif not r.eq16_flag and start is not None:
            out.append((start, prev.k))
            start = None
        prev = r
    if start is not None:
        out.append((start, prev.k))
    return [(lo, hi) for lo, hi in out if hi - lo >= min_width]
