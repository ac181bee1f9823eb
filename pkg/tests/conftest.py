import math

import numpy as np
import pytest

from geoflock.config import preset
from geoflock.dynamics import energy, integrate

_GATE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one numbered acceptance criterion")


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("acceptance")
    if marker is None:
        return
    number, title = marker
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.failed:
        _GATE[number] = (title, report.outcome, detail or (report.longreprtext.splitlines() or [""])[-1])


@pytest.fixture(autouse=True)
def _tag_acceptance(request):
    m = request.node.get_closest_marker("acceptance")
    if m is not None:
        request.node.user_properties.append(("acceptance", tuple(m.args)))


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary."""

    def note(text):
        request.node.user_properties.append(("detail", text))

    return note


def pytest_terminal_summary(terminalreporter):
    if not _GATE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_GATE):
        title, outcome, text = _GATE[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {number:2d}. {title}: {text}")


class PresetRun:
    def __init__(self, name):
        self.config = preset(name)
        self.energies = []
        self.momenta = []
        self.states = []

        def on_step(state):
            self.energies.append(energy(state))
            self.momenta.append(state.velocities.sum(axis=0))
            if self.config.n_particles == 1:
                self.states.append(state)

        self.trajectory = integrate(self.config, on_step=on_step)
        self.final = self.trajectory.records[-1]
        self.momenta = np.array(self.momenta)

    @property
    def speed_bound(self):
        return math.sqrt(2.0 * self.energies[0])


@pytest.fixture(scope="session")
def preset_runs():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = PresetRun(name)
        return cache[name]

    return get
