"""Shared fixtures and the acceptance report hook.

Heavy sweeps (adaptive traces at two refinement levels, delay spectra)
are session-scoped so the topology, crossing, and acceptance tests can
share them instead of re-tracing.
"""

import numpy as np
import pytest

from starscatter import Channel, star_graph
from starscatter.argand import trace

V_WIRE = -1000.0


@pytest.fixture(scope="session")
def thick_graph():
    # arms 1 and 3 of unit length, side arm of length 5, common well depth
    return star_graph([1.0, 5.0, 1.0], [V_WIRE] * 3)


@pytest.fixture(scope="session")
def stub_graph():
    # arms 1 and 3 contracted to bare leads; only the side arm remains
    return star_graph([0.0, 5.0, 0.0], [V_WIRE] * 3)


@pytest.fixture(scope="session")
def t31():
    return Channel(incident=0, outgoing=2)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260822)


def _trace_pair(graph, channel, kind, start, stop, fixed_k):
    """One trajectory at shipped tolerances and one with both halved."""
    coarse = trace(
        graph, channel, kind, start, stop, fixed_k=fixed_k, initial=4096
    )
    fine = trace(
        graph,
        channel,
        kind,
        start,
        stop,
        fixed_k=fixed_k,
        initial=4096,
        angle_tol=np.pi / 16,
        max_chord=0.01,
    )
    return coarse, fine


@pytest.fixture(scope="session")
def energy_sweep_traces(thick_graph, t31):
    """t31 under the wide energy sweep (kl 0 -> 20), both refinements."""
    return _trace_pair(thick_graph, t31, "energy", 1e-3, 20.0, None)


@pytest.fixture(scope="session")
def potential_sweep_traces(thick_graph, t31):
    """t31 under the deep potential sweep at kl = 4, both refinements."""
    return _trace_pair(
        thick_graph, t31, "sample_potential", -1.0, -1000.0, 4.0
    )


@pytest.fixture(scope="session")
def stub_sweep_traces(stub_graph, t31):
    """Stub-graph t31 energy sweep (kl 0 -> 12.5), both refinements."""
    return _trace_pair(stub_graph, t31, "energy", 1e-3, 12.5, None)


# --- acceptance report -------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(key, label): tag a test as one acceptance criterion",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    key, label = mark.args
    if report.when == "call":
        _ACCEPTANCE[key] = (label, "PASS" if report.passed else "FAIL")
    elif report.when == "setup" and not report.passed:
        _ACCEPTANCE[key] = (label, "FAIL")


def _criterion_order(key):
    digits = "".join(c for c in key if c.isdigit())
    return (int(digits), key)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=_criterion_order):
        label, outcome = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<3} {label}: {outcome}")
