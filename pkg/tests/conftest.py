import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scatmesh import _backend
from scatmesh.geometry import Box, ContrastField, Illumination, MeasurementSurface, WaveContext

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run a test once per kernel backend."""
    previous = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)


def eight_point_surface():
    pts = [[math.cos(4 * math.pi * n / 14), 4 * math.sin(2 * math.pi * n / 14)] for n in range(8)]
    return MeasurementSurface(np.array(pts))


@pytest.fixture
def gamma8():
    return eight_point_surface()


def two_square_setup():
    ctx = WaveContext(math.pi**2)
    dom = Box([-0.35, -0.35], [0.05, 0.05])
    q = ContrastField.from_boxes(
        dom,
        [(Box([-0.275, -0.275], [-0.175, -0.175]), 2.0), (Box([-0.15, -0.15], [-0.05, -0.05]), 2.0)],
    )
    surf = MeasurementSurface.circle(20, 0.5)
    ill = Illumination.plane_angle(math.pi / 4)
    return ctx, dom, q, surf, ill


def random_surface(rng, n, radius=None, dim=2):
    """Points on a perturbed circle (or sphere) so configurations stay generic."""
    r = rng.uniform(2.0, 5.0) if radius is None else radius
    if dim == 2:
        t = np.sort(rng.uniform(0, 2 * np.pi, n))
        rad = r * (1 + 0.1 * rng.uniform(-1, 1, n))
        return MeasurementSurface(np.c_[rad * np.cos(t), rad * np.sin(t)])
    v = rng.normal(size=(n, 3))
    return MeasurementSurface(r * v / np.linalg.norm(v, axis=1)[:, None])


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines.items()):
            terminalreporter.write_line(line)
