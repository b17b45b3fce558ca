"""Geometry and topology of amplitude trajectories in the complex plane.

A sweep of t(parameter) draws a curve in the complex plane. This module
traces such curves adaptively, counts how they wind about the origin,
extracts self-intersection subloops (drawn by sharp resonances), and
locates real-axis crossings. All topology is computed on polylines;
crossings of the curve with itself are assumed transversal, which holds
for generic sweeps; tangential contacts are not counted.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import defaultdict

import numpy as np
from scipy.optimize import brentq

from .errors import SingularityOnContourError, StarScatterError
from .model import Channel, StarGraph
from .times import _wrap, make_evaluator

ORIGIN_RADIUS = 1e-6  # inside this ball the phase is resolution-limited
INTERSECT_TOL = 1e-9  # position tolerance for self-intersections, |t| units


@dataclass
class ComplexTrajectory:
    """Adaptively sampled amplitude curve along one sweep.

    Consecutive vertices subtend an angle < angle_tol about the origin
    unless one of them lies inside the origin ball; such segments are
    treated as breaks by the topology routines (the curve is split
    rather than forced through the singularity).
    """

    graph: StarGraph
    channel: Channel
    kind: str
    fixed_k: float | None
    params: np.ndarray
    points: np.ndarray
    angle_tol: float
    origin_radius: float

    def evaluator(self):
        return make_evaluator(self.graph, self.channel, self.kind, self.fixed_k)

    def broken_segments(self):
        """Boolean mask over segments [i, i+1] touching the origin ball."""
        r = np.abs(self.points)
        near = r <= self.origin_radius
        return near[:-1] | near[1:]

    @property
    def is_closed(self):
        return bool(
            abs(self.points[0] - self.points[-1]) <= max(10 * INTERSECT_TOL, 1e-8)
        )


def trace(
    graph,
    channel,
    kind,
    start,
    stop,
    *,
    fixed_k=None,
    initial=2048,
    max_points=400_000,
    angle_tol=np.pi / 8,
    max_chord=0.02,
    origin_radius=ORIGIN_RADIUS,
):
    """Sample t(parameter) until every step is small in angle about the
    origin and in chord length. The chord bound exists because purely
    radial excursions (narrow resonances shooting outward and back)
    would otherwise stay invisible to the angular criterion.
    """
    if initial < 2:
        raise StarScatterError("need at least 2 initial samples")
    ev = make_evaluator(graph, channel, kind, fixed_k)
    params = list(np.linspace(start, stop, initial))
    pts = list(np.asarray(ev(np.array(params))))

    span = abs(stop - start)
    min_step = max(span, 1.0) * 1e-12
    budget = max_points - len(params)
    i = 0
    while i < len(pts) - 1:
        z0, z1 = pts[i], pts[i + 1]
        ok = abs(z1 - z0) < max_chord and (
            min(abs(z0), abs(z1)) <= origin_radius
            or abs(_wrap(np.angle(z1) - np.angle(z0))) < angle_tol
        )
        if ok or abs(params[i + 1] - params[i]) < min_step or budget <= 0:
            i += 1
            continue
        mid = 0.5 * (params[i] + params[i + 1])
        params.insert(i + 1, mid)
        pts.insert(i + 1, complex(ev(mid)))
        budget -= 1

    return ComplexTrajectory(
        graph=graph,
        channel=channel,
        kind=kind,
        fixed_k=fixed_k,
        params=np.array(params),
        points=np.array(pts),
        angle_tol=angle_tol,
        origin_radius=origin_radius,
    )


def winding_number(points, closure_tol=1e-9):
    """Signed number of turns of a closed polyline about the origin.

    The polyline must be effectively closed (first and last vertex
    within closure_tol) and resolved (every angular step < pi); a vertex
    within 1e-12 of the origin makes the winding undefined.
    """
    z = np.asarray(points, dtype=complex)
    if z.shape[0] < 3:
        raise StarScatterError("winding needs at least 3 vertices")
    if abs(z[0] - z[-1]) > closure_tol:
        raise StarScatterError("contour is not closed")
    if np.min(np.abs(z)) < 1e-12:
        raise SingularityOnContourError("contour passes through the origin")
    inc = _wrap(np.diff(np.angle(z)))
    if np.max(np.abs(inc)) >= np.pi * (1 - 1e-12):
        raise StarScatterError("contour too coarse: an angular step reaches pi")
    total = float(np.sum(inc))
    w = total / (2 * np.pi)
    if abs(w - round(w)) >= 0.01:
        raise StarScatterError(f"winding {w:.6f} does not round cleanly")
    return int(round(w))


@dataclass
class Subloop:
    """A closed cycle cut from a trajectory at one self-intersection."""

    cycle: np.ndarray
    param_interval: tuple
    crossing: complex
    orientation: str  # 'ccw' | 'cw'
    winding: int
    closure_angle_deg: float
    smooth: bool


@dataclass
class LoopIntegral:
    """Angular sweep about the origin accumulated around a closed cycle."""

    total: float
    positive: float
    negative: float
    winding: int


def _segment_hits(z, params, active, closed):
    """All transversal self-intersections of the polyline z.

    Returns a list of dicts with segment indices i < j, local parameters
    (ti, tj in [0, 1]), the crossing point, and sweep parameters.
    """
    n = z.shape[0] - 1
    seg_len = np.abs(z[1:] - z[:-1])
    scale = np.median(seg_len[active]) if np.any(active) else 0.0
    if scale == 0.0:
        return []
    cell = 4.0 * scale

    grid = defaultdict(list)
    for i in range(n):
        if not active[i] or seg_len[i] == 0.0:
            continue
        x0, x1 = sorted((z[i].real, z[i + 1].real))
        y0, y1 = sorted((z[i].imag, z[i + 1].imag))
        for cx in range(int(np.floor(x0 / cell)), int(np.floor(x1 / cell)) + 1):
            for cy in range(int(np.floor(y0 / cell)), int(np.floor(y1 / cell)) + 1):
                grid[(cx, cy)].append(i)

    pairs = set()
    for members in grid.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                i, j = members[a], members[b]
                if j - i <= 1:
                    continue
                if closed and i == 0 and j == n - 1:
                    continue  # shared endpoint of a closed sweep
                pairs.add((i, j))

    hits = []
    for i, j in sorted(pairs):
        p, r = z[i], z[i + 1] - z[i]
        q, s = z[j], z[j + 1] - z[j]
        denom = r.real * s.imag - r.imag * s.real
        if abs(denom) < 1e-14 * abs(r) * abs(s):
            continue  # parallel: tangential contact, not a crossing
        w = q - p
        ti = (w.real * s.imag - w.imag * s.real) / denom
        tj = (w.real * r.imag - w.imag * r.real) / denom
        sl_i = INTERSECT_TOL / abs(r)
        sl_j = INTERSECT_TOL / abs(s)
        if -sl_i <= ti <= 1 + sl_i and -sl_j <= tj <= 1 + sl_j:
            hits.append(
                dict(
                    i=i,
                    j=j,
                    ti=min(max(ti, 0.0), 1.0),
                    tj=min(max(tj, 0.0), 1.0),
                    point=p + ti * r,
                    pi=params[i] + ti * (params[i + 1] - params[i]),
                    pj=params[j] + tj * (params[j + 1] - params[j]),
                )
            )

    # a crossing within tolerance of a shared vertex shows up from both
    # segment pairs; keep one
    dedup = []
    for h in hits:
        dup = False
        for g in dedup:
            if (
                abs(h["point"] - g["point"]) < 10 * INTERSECT_TOL
                and abs(h["i"] - g["i"]) <= 1
                and abs(h["j"] - g["j"]) <= 1
            ):
                dup = True
                break
        if not dup:
            dedup.append(h)
    return dedup


def _cycle_from(z, hit):
    x = hit["point"]
    inner = z[hit["i"] + 1 : hit["j"] + 1]
    return np.concatenate(([x], inner, [x]))


def _complement_cycle(z, hit):
    x = hit["point"]
    outer = np.concatenate((z[hit["j"] + 1 :], z[1 : hit["i"] + 1]))
    return np.concatenate(([x], outer, [x]))


def _loop_record(cycle, p_lo, p_hi, x, in_dir, out_dir):
    area = 0.5 * float(
        np.sum(
            cycle[:-1].real * cycle[1:].imag - cycle[1:].real * cycle[:-1].imag
        )
    )
    w = winding_number(cycle, closure_tol=1e-7)
    ang = abs(_wrap(np.angle(out_dir) - np.angle(in_dir)))
    deg = float(np.degrees(ang))
    return Subloop(
        cycle=cycle,
        param_interval=(float(p_lo), float(p_hi)),
        crossing=complex(x),
        orientation="ccw" if area > 0 else "cw",
        winding=w,
        closure_angle_deg=deg,
        smooth=deg < 5.0,
    )


def find_subloops(traj: ComplexTrajectory, smooth_max_deg=5.0, minimal=False):
    """Self-intersection subloops of a trajectory, in sweep order.

    Each transversal self-crossing X cuts one closed cycle out of the
    curve (the piece between the two passes through X). On a closed
    sweep the complementary piece is a cycle as well and is reported
    too, so a figure-eight yields its two lobes, with opposite
    orientations. Smoothness means the curve's tangent is continuous
    across the closure to within smooth_max_deg degrees.

    With minimal=True only innermost loops are kept: those whose
    parameter interval contains no other loop's interval. On a curve
    that orbits the origin many times every pair of turns crosses, so
    the full list grows quadratically with the turn count; the minimal
    loops are the single resonance petals the curve actually draws,
    one per turn, while the rest are composites of several petals.
    """
    z = traj.points
    if z.shape[0] < 4:
        return []
    active = ~traj.broken_segments()
    closed = traj.is_closed
    hits = _segment_hits(z, traj.params, active, closed)

    loops = []
    for h in hits:
        r = z[h["i"] + 1] - z[h["i"]]
        s = z[h["j"] + 1] - z[h["j"]]
        candidates = [(_cycle_from(z, h), h["pi"], h["pj"], s, r)]
        if closed:
            candidates.append(
                (_complement_cycle(z, h), h["pj"], h["pi"], r, s)
            )
        for cyc, p_lo, p_hi, din, dout in candidates:
            if np.min(np.abs(cyc)) <= traj.origin_radius:
                continue  # cycle dives into the origin ball: not continuable
            try:
                loop = _loop_record(cyc, p_lo, p_hi, h["point"], din, dout)
            except StarScatterError:
                continue
            loop.smooth = loop.closure_angle_deg < smooth_max_deg
            loops.append(loop)
    loops.sort(key=lambda L: L.param_interval[0])
    if minimal:
        spans = [tuple(sorted(L.param_interval)) for L in loops]

        def _holds_other(k):
            lo, hi = spans[k]
            return any(
                spans[m] != spans[k] and lo <= spans[m][0] and spans[m][1] <= hi
                for m in range(len(spans))
            )

        loops = [L for k, L in enumerate(loops) if not _holds_other(k)]
    return loops


def loop_phase_integral(loop):
    """Accumulated angular sweep about the origin around a closed cycle.

    Positive and negative parts are reported separately; their sum is
    2 pi times the winding, so a winding-0 loop shows explicit
    cancellation (residual ~ 0) rather than absence of motion.
    """
    cycle = loop.cycle if isinstance(loop, Subloop) else np.asarray(loop)
    if np.min(np.abs(cycle)) < 1e-12:
        raise SingularityOnContourError("cycle passes through the origin")
    inc = _wrap(np.diff(np.angle(cycle)))
    total = float(np.sum(inc))
    return LoopIntegral(
        total=total,
        positive=float(np.sum(inc[inc > 0])),
        negative=float(np.sum(inc[inc < 0])),
        winding=int(round(total / (2 * np.pi))),
    )


def real_axis_crossings(traj: ComplexTrajectory, param_tol=1e-6):
    """Parameters where Im t changes sign, refined by bisection.

    Only transversal crossings on unbroken segments are counted;
    tangential touches of the axis are not. Returns the crossing
    parameters in sweep order.
    """
    z = traj.points
    params = traj.params
    active = ~traj.broken_segments()
    ev = traj.evaluator()

    out = []
    im = z.imag
    for i in range(z.shape[0] - 1):
        if not active[i]:
            continue
        a, b = im[i], im[i + 1]
        if a == 0.0:
            # vertex exactly on the axis: count once if the sign flips
            prev = im[i - 1] if i > 0 else 0.0
            if prev * b < 0:
                out.append(float(params[i]))
            continue
        if a * b < 0:
            lo, hi = sorted((float(params[i]), float(params[i + 1])))
            f = lambda p: float(np.imag(ev(p)))
            try:
                root = brentq(f, lo, hi, xtol=param_tol)
            except ValueError:
                root = 0.5 * (lo + hi)  # endpoint signs moved under re-eval
            out.append(float(root))
    return np.array(out)
