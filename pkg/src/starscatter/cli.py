"""Command-line front end: sweep configs in, CSV/JSON tables out.

Subcommands:

    starscatter run <config> [--out DIR]     run a config file
    starscatter preset <name> [--out DIR]    run a named preset
    starscatter list-presets                 show the preset catalog

Config files are flat key = value text; see parse_config for the keys.
Outputs are deterministic: the same config writes byte-identical files.
STARSCATTER_THREADS (default 1) splits delay-spectrum grids across a
thread pool; results are merged in sweep order so the output does not
depend on the thread count.

Exit codes: 0 ok, 1 domain error (solver/phase/resolution), 2 bad
config or usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import argand, times, wavepacket as wp
from .errors import ConfigError, StarScatterError
from .model import Channel, star_graph
from .solver import channel_amplitude
from .times import unwrap_track

OPERATIONS = (
    "trace",
    "phases",
    "delays",
    "dos",
    "winding",
    "subloops",
    "wavepacket",
)


@dataclass
class RunConfig:
    """One batch run: a graph, a channel, a sweep, an operation."""

    lengths: tuple
    potentials: tuple
    incident: int  # 0-based
    outgoing: int
    operation: str
    sweep: str = "energy"
    start: float = 0.0
    stop: float = 0.0
    lead_potential: float = 0.0
    fixed_k: float | None = None
    points: int = 2048
    step: float = 0.005
    agreement_rtol: float = 5e-2
    agreement_atol: float = 1e-6
    k0: float | None = None
    sigma: float | None = None
    detector: float = 20.0
    nodes: int = 4096

    def graph(self):
        return star_graph(self.lengths, self.potentials, self.lead_potential)

    def channel(self):
        return Channel(self.incident, self.outgoing)

    def validate(self):
        try:
            g = self.graph()
            self.channel().validated(g)
        except StarScatterError as e:
            raise ConfigError(str(e)) from e
        if self.operation not in OPERATIONS:
            raise ConfigError(f"unknown operation {self.operation!r}")
        if self.sweep not in times.SWEEP_KINDS:
            raise ConfigError(f"unknown sweep {self.sweep!r}")
        if self.operation == "wavepacket":
            if self.k0 is None or self.sigma is None:
                raise ConfigError("wavepacket runs need k0 and sigma")
            if self.k0 <= 0 or self.sigma <= 0 or self.detector <= 0:
                raise ConfigError("k0, sigma, detector must be positive")
            if self.nodes < 64:
                raise ConfigError("packet nodes must be >= 64")
            return self
        if self.start == self.stop:
            raise ConfigError("sweep range is empty (start == stop)")
        if self.sweep == "energy" and (self.start <= 0 or self.stop <= 0):
            raise ConfigError("energy sweeps need k > 0 at both ends")
        if self.sweep != "energy":
            if self.fixed_k is None or self.fixed_k <= 0:
                raise ConfigError(f"{self.sweep} sweeps need fixed_k > 0")
        if self.points < 2:
            raise ConfigError("points must be >= 2")
        if self.step <= 0:
            raise ConfigError("step must be positive")
        if self.agreement_rtol <= 0 or self.agreement_atol <= 0:
            raise ConfigError("agreement tolerances must be positive")
        return self


_FLOAT_KEYS = {
    "start", "stop", "lead_potential", "fixed_k", "step",
    "agreement_rtol", "agreement_atol", "k0", "sigma", "detector",
}
_INT_KEYS = {"incident", "outgoing", "points", "nodes"}


def parse_config(text):
    """Flat key = value lines; '#' starts a comment.

    arms holds comma-separated length:potential pairs; incident and
    outgoing are 1-based arm numbers, as in channel labels like t31
    (in on 1, out on 3).
    """
    raw = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or not val:
            raise ConfigError(f"line {ln}: empty key or value")
        if key in raw:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        raw[key] = val

    for req in ("arms", "incident", "outgoing", "operation"):
        if req not in raw:
            raise ConfigError(f"missing required key {req!r}")

    lengths, potentials = [], []
    for part in raw.pop("arms").split(","):
        part = part.strip()
        if ":" not in part:
            raise ConfigError(f"arm {part!r}: expected length:potential")
        l_s, v_s = part.split(":", 1)
        try:
            lengths.append(float(l_s))
            potentials.append(float(v_s))
        except ValueError as e:
            raise ConfigError(f"arm {part!r}: {e}") from e

    kwargs = {"lengths": tuple(lengths), "potentials": tuple(potentials)}
    for key, val in raw.items():
        if key in _FLOAT_KEYS:
            try:
                kwargs[key] = float(val)
            except ValueError as e:
                raise ConfigError(f"{key}: not a number: {val!r}") from e
        elif key in _INT_KEYS:
            try:
                kwargs[key] = int(val)
            except ValueError as e:
                raise ConfigError(f"{key}: not an integer: {val!r}") from e
        elif key in ("operation", "sweep"):
            kwargs[key] = val
        else:
            raise ConfigError(f"unknown key {key!r}")

    for side in ("incident", "outgoing"):
        if kwargs[side] < 1:
            raise ConfigError(f"{side} is 1-based, must be >= 1")
        kwargs[side] -= 1
    return RunConfig(**kwargs).validate()


# ---------------------------------------------------------------------------
# preset catalog

@dataclass(frozen=True)
class Preset:
    name: str
    config: RunConfig
    description: str


def _thick_graph():
    return dict(lengths=(1.0, 5.0, 1.0), potentials=(-1000.0,) * 3)


def _stub_graph():
    return dict(lengths=(0.0, 5.0, 0.0), potentials=(-1000.0,) * 3)


def _presets():
    t31 = dict(incident=0, outgoing=2)
    cat = [
        Preset(
            "fig2",
            RunConfig(**_thick_graph(), **t31, operation="trace",
                      sweep="energy", start=1e-3, stop=5.0, points=2048),
            "t31 trajectory, arms 1/5/1 at V=-1000, kl 0..5 (leaves the origin)",
        ),
        Preset(
            "fig3",
            RunConfig(**_thick_graph(), **t31, operation="phases",
                      sweep="energy", start=1e-3, stop=5.0, points=2048),
            "continued phase of t31 on the same sweep as fig2",
        ),
        Preset(
            "fig4",
            RunConfig(**_thick_graph(), **t31, operation="trace",
                      sweep="sample_potential", start=0.0, stop=-25.0,
                      fixed_k=2.7, points=2048),
            "t31 trajectory under segment-potential sweep 0..-25 at kl=2.7",
        ),
        Preset(
            "fig5",
            RunConfig(**_thick_graph(), **t31, operation="phases",
                      sweep="sample_potential", start=0.0, stop=-25.0,
                      fixed_k=2.7, points=2048),
            "continued phase along the fig4 potential sweep",
        ),
        Preset(
            "fig6",
            RunConfig(**_thick_graph(), **t31, operation="delays",
                      sweep="energy", start=0.05, stop=12.5, step=0.005),
            "wdt/lpt/DOS comparison for arms 1/5/1, kl 0.05..12.5",
        ),
        Preset(
            "fig7",
            RunConfig(**_thick_graph(), **t31, operation="subloops",
                      sweep="energy", start=1e-3, stop=20.0, points=4096),
            "subloops of the t31 trajectory, kl 0..20",
        ),
        Preset(
            "fig8",
            RunConfig(**_thick_graph(), **t31, operation="subloops",
                      sweep="sample_potential", start=-1.0, stop=-1000.0,
                      fixed_k=4.0, points=4096),
            "subloops under segment-potential sweep -1..-1000 at kl=4",
        ),
        Preset(
            "fig9",
            RunConfig(**_stub_graph(), **t31, operation="trace",
                      sweep="energy", start=1e-3, stop=12.5, points=4096),
            "side-stub trajectory (arms 0/5/0), kl 0..12.5, with axis crossings",
        ),
        Preset(
            "fig10",
            RunConfig(**_stub_graph(), **t31, operation="trace",
                      sweep="sample_potential", start=-1000.0, stop=-1050.0,
                      fixed_k=8.22, points=2048),
            "side-stub trajectory under potential sweep -1000..-1050 at kl=8.22",
        ),
        Preset(
            "fig11",
            RunConfig(**_stub_graph(), **t31, operation="delays",
                      sweep="energy", start=0.05, stop=16.0, step=0.005),
            "wdt/lpt/DOS comparison for the side stub, kl 0.05..16",
        ),
        Preset(
            "fig12",
            RunConfig(**_stub_graph(), **t31, operation="phases",
                      sweep="energy", start=1e-3, stop=12.5, points=4096),
            "continued phase of the side-stub t31, kl 0..12.5",
        ),
    ]
    return {p.name: p for p in cat}


PRESETS = _presets()


def list_presets():
    lines = []
    for name in sorted(PRESETS, key=lambda s: int(s[3:])):
        p = PRESETS[name]
        lines.append(f"{name:7s} {p.config.operation:10s} {p.description}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# output writers

def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return len(rows)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _thread_count():
    val = os.environ.get("STARSCATTER_THREADS", "1")
    try:
        n = int(val)
    except ValueError as e:
        raise ConfigError(f"STARSCATTER_THREADS must be an integer: {val!r}") from e
    if n < 1:
        raise ConfigError("STARSCATTER_THREADS must be >= 1")
    return n


def _delay_records(cfg: RunConfig):
    graph, channel = cfg.graph(), cfg.channel()
    lo, hi = sorted((cfg.start, cfg.stop))
    n = int(np.floor((hi - lo) / cfg.step + 1e-9)) + 1
    ks = lo + cfg.step * np.arange(n)
    threads = _thread_count()
    # one step size for the whole grid, so chunking cannot leak into
    # the derivative columns
    fd_step = min(1e-4 * max(1.0, float(ks[-1])), 0.5 * float(ks[0]))
    kwargs = dict(
        agreement_rtol=cfg.agreement_rtol,
        agreement_atol=cfg.agreement_atol,
        fd_step=fd_step,
    )
    if threads == 1 or n < 4 * threads:
        recs = times.delay_spectrum(graph, channel, ks, **kwargs)
    else:
        chunks = np.array_split(ks, threads)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(
                ex.map(
                    lambda c: times.delay_spectrum(graph, channel, c, **kwargs),
                    chunks,
                )
            )
        recs = [r for part in parts for r in part]
        # re-anchor the continued phase across chunk boundaries
        thetas = unwrap_track(np.angle([r.amp for r in recs]))
        for r, th in zip(recs, thetas):
            r.theta = float(th)
    return recs


def _run_trace(cfg, outdir):
    traj = argand.trace(
        cfg.graph(), cfg.channel(), cfg.sweep, cfg.start, cfg.stop,
        fixed_k=cfg.fixed_k, initial=cfg.points,
    )
    files = {}
    rows = [
        (p, z.real, z.imag)
        for p, z in zip(traj.params, traj.points)
    ]
    files["trajectory.csv"] = _write_csv(
        os.path.join(outdir, "trajectory.csv"),
        ("parameter", "Re_t", "Im_t"),
        rows,
    )
    ev = traj.evaluator()
    crossings = argand.real_axis_crossings(traj)
    files["crossings.csv"] = _write_csv(
        os.path.join(outdir, "crossings.csv"),
        ("parameter", "Re_t"),
        [(p, float(np.real(ev(p)))) for p in crossings],
    )
    return traj, files


def run_config(cfg: RunConfig, outdir):
    """Execute one run; returns {filename: row count or None}."""
    cfg.validate()
    os.makedirs(outdir, exist_ok=True)
    op = cfg.operation

    if op == "trace":
        _, files = _run_trace(cfg, outdir)
        return files

    if op == "phases":
        track = times.track_phase(
            cfg.graph(), cfg.channel(), cfg.sweep, cfg.start, cfg.stop,
            fixed_k=cfg.fixed_k, initial=cfg.points,
        )
        n = _write_csv(
            os.path.join(outdir, "phases.csv"),
            ("parameter", "Re_t", "Im_t", "theta"),
            [
                (p, a.real, a.imag, th)
                for p, a, th in zip(track.params, track.amps, track.thetas)
            ],
        )
        return {"phases.csv": n}

    if op in ("delays", "dos"):
        recs = _delay_records(cfg)
        if op == "dos":
            n = _write_csv(
                os.path.join(outdir, "dos.csv"),
                ("kl", "dos_s", "dos_psi"),
                [(r.k, r.dos_smatrix, r.dos_wavefunction) for r in recs],
            )
            return {"dos.csv": n}
        n = _write_csv(
            os.path.join(outdir, "delays.csv"),
            ("kl", "Re_t", "Im_t", "theta", "wdt", "lpt",
             "dos_s", "dos_psi", "eq16_flag"),
            [
                (r.k, r.amp.real, r.amp.imag, r.theta, r.wdt, r.lpt,
                 r.dos_smatrix, r.dos_wavefunction, r.eq16_flag)
                for r in recs
            ],
        )
        windows = times.flagged_windows(recs)
        _write_json(
            os.path.join(outdir, "eq16_windows.json"),
            {
                "agreement_rtol": cfg.agreement_rtol,
                "agreement_atol": cfg.agreement_atol,
                "windows": [[lo, hi] for lo, hi in windows],
            },
        )
        return {"delays.csv": n, "eq16_windows.json": None}

    if op in ("winding", "subloops"):
        traj, files = _run_trace(cfg, outdir)
        loops = argand.find_subloops(traj)
        loop_objs = []
        for L in loops:
            integral = argand.loop_phase_integral(L)
            loop_objs.append(
                {
                    "param_interval": list(L.param_interval),
                    "crossing": [L.crossing.real, L.crossing.imag],
                    "orientation": L.orientation,
                    "winding": L.winding,
                    "closure_angle_deg": L.closure_angle_deg,
                    "smooth": L.smooth,
                    "angle_positive": integral.positive,
                    "angle_negative": integral.negative,
                }
            )
        if op == "subloops":
            _write_json(
                os.path.join(outdir, "subloops.json"),
                {"count": len(loop_objs), "subloops": loop_objs},
            )
            files["subloops.json"] = None
            return files
        inc = np.diff(np.angle(traj.points))
        inc = (inc + np.pi) % (2 * np.pi) - np.pi
        _write_json(
            os.path.join(outdir, "winding.json"),
            {
                "accumulated_angle": float(np.sum(inc)),
                "net_turns": float(np.sum(inc) / (2 * np.pi)),
                "subloop_windings": [o["winding"] for o in loop_objs],
            },
        )
        files["winding.json"] = None
        return files

    # wavepacket
    graph, channel = cfg.graph(), cfg.channel()
    packet = wp.build_packet(cfg.k0, cfg.sigma, n_nodes=cfg.nodes)

    def response(kk):
        return channel_amplitude(graph, np.asarray(kk) ** 2 + cfg.lead_potential,
                                 channel)

    meas = wp.measure_delay(packet, response, cfg.detector)
    track = times.track_phase(
        graph, channel, "energy",
        max(cfg.k0 - 2 * cfg.sigma, cfg.k0 / 2), cfg.k0 + 2 * cfg.sigma,
        initial=64,
    )
    wdt_ref = times.wigner_delay(track, k=cfg.k0)
    _write_json(
        os.path.join(outdir, "arrival.json"),
        {
            "k0": cfg.k0,
            "sigma": cfg.sigma,
            "detector": cfg.detector,
            "tau_peak": meas.tau_peak,
            "tau_peak_free": meas.tau_peak_free,
            "delay": meas.delay,
            "spread": meas.spread,
            "peaks": [[t, y] for t, y in meas.peaks],
            "stationary_phase_breakdown": meas.stationary_phase_breakdown,
            "wdt_reference": wdt_ref,
        },
    )
    tau_free = cfg.detector / packet.group_velocity()
    sig_tau = packet.spatial_width(tau_free) / packet.group_velocity()
    taus = np.linspace(max(tau_free - 10 * sig_tau, 0.0),
                       tau_free + 10 * sig_tau, 1024)
    us = wp.propagate(packet, response, cfg.detector, taus)
    n = _write_csv(
        os.path.join(outdir, "packet_tau.csv"),
        ("tau", "re_u", "im_u", "abs2_u"),
        [(t, u.real, u.imag, abs(u) ** 2) for t, u in zip(taus, us)],
    )
    return {"arrival.json": None, "packet_tau.csv": n}


# ---------------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="starscatter",
        description="star-graph scattering sweeps: delays, trajectories, packets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="out")

    p_pre = sub.add_parser("preset", help="run a named preset")
    p_pre.add_argument("name")
    p_pre.add_argument("--out", default=None)

    sub.add_parser("list-presets", help="show the preset catalog")

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0

    try:
        if args.command == "list-presets":
            print(list_presets())
            return 0
        if args.command == "preset":
            if args.name not in PRESETS:
                raise ConfigError(
                    f"unknown preset {args.name!r}; see list-presets"
                )
            cfg = PRESETS[args.name].config
            outdir = args.out or f"out-{args.name}"
        else:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as e:
                raise ConfigError(f"cannot read config: {e}") from e
            cfg = parse_config(text)
            outdir = args.out
        files = run_config(cfg, outdir)
        for name in sorted(files):
            rows = files[name]
            suffix = "" if rows is None else f" ({rows} rows)"
            print(f"wrote {os.path.join(outdir, name)}{suffix}")
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except StarScatterError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
