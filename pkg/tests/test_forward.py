import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import two_square_setup
from scatmesh import forward as fw
from scatmesh.distinguish import svd_oracle
from scatmesh.errors import CoincidentPointError, DomainError, PreconditionError
from scatmesh.geometry import Box, ContrastField, Grid, Illumination, MeasurementSurface, WaveContext
from scatmesh.meshgen import uniform_grid
from scatmesh.specfun import GreenKernel, green, green_matrix


def unit_box_q(val=1.0):
    dom = Box([0, 0], [1, 1])
    return ContrastField.from_boxes(dom, [(Box([0.3, 0.3], [0.7, 0.7]), val)])


def test_wavecontext():
    ctx = WaveContext(2.0)
    assert ctx.wavelength * ctx.k == 2 * math.pi
    with pytest.raises(DomainError):
        WaveContext(-1.0)
    with pytest.raises(DomainError):
        WaveContext(1.0, 4)


def test_geometry_validation():
    with pytest.raises(DomainError):
        MeasurementSurface(np.array([[0.0, 0.0]]))
    with pytest.raises(DomainError):
        MeasurementSurface(np.array([[0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(DomainError):
        MeasurementSurface(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([1.0, 0.0]))
    with pytest.raises(DomainError):
        Illumination("plane", direction=(1.0, 1.0))
    with pytest.raises(DomainError):
        ContrastField.from_boxes(Box([0, 0], [1, 1]), [(Box([0.5, 0.5], [1.5, 0.9]), 1.0)])
    ring = np.zeros((4, 4))
    ring[0, 1] = 1.0
    with pytest.raises(DomainError):
        ContrastField(Box([0, 0], [1, 1]), values=ring)


def test_incident_fields():
    ctx = WaveContext(3.0)
    ill = Illumination.plane_angle(0.7)
    assert fw.incident_field(ctx, ill, [0.0, 0.0]) == 1.0
    pts = np.random.default_rng(0).normal(size=(50, 2))
    assert np.allclose(np.abs(fw.incident_fields(ctx, ill, pts)), 1.0, atol=1e-15)
    src = np.array([2.0, -1.0])
    pt = Illumination.point(src)
    for p in pts[:10]:
        assert fw.incident_field(ctx, pt, p) == green(GreenKernel(2, 3.0), p, src)
    with pytest.raises(CoincidentPointError):
        fw.incident_field(ctx, pt, src)


def test_born_zero_and_linearity():
    ctx = WaveContext(4.0)
    dom = Box([0, 0], [1, 1])
    surf = MeasurementSurface.circle(12, 2.0, center=(0.5, 0.5))
    ill = Illumination.plane_angle(0.2)
    assert np.all(fw.born_scattered(ctx, ContrastField.zero(dom), ill, surf) == 0)
    rng = np.random.default_rng(1)
    for _ in range(5):
        b1 = Box(*np.sort(rng.uniform(0, 1, (2, 2)), axis=0))
        b2 = Box(*np.sort(rng.uniform(0, 1, (2, 2)), axis=0))
        w1, w2 = rng.normal(size=2)
        q1 = ContrastField.from_boxes(dom, [(b1, w1)])
        q2 = ContrastField.from_boxes(dom, [(b2, w2)])
        q12 = ContrastField.from_boxes(dom, [(b1, w1), (b2, w2)])
        lhs = fw.born_scattered(ctx, q12, ill, surf)
        rhs = fw.born_scattered(ctx, q1, ill, surf) + fw.born_scattered(ctx, q2, ill, surf)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


def test_born_point_limit():
    ctx = WaveContext(5.0)
    lam = ctx.wavelength
    z0 = np.array([0.4, 0.6])
    dom = Box([0, 0], [1, 1])
    q = ContrastField.from_boxes(dom, [(Box(z0 - lam / 200, z0 + lam / 200), 1.0)])
    surf = MeasurementSurface.circle(16, 3.0, center=(0.5, 0.5))
    ill = Illumination.plane_angle(1.1)
    us = fw.born_scattered(ctx, q, ill, surf)
    ref = ctx.k**2 * (lam / 100) ** 2 * green_matrix(GreenKernel(2, ctx.k), surf.points, z0[None])[:, 0]
    ref = ref * fw.incident_field(ctx, ill, z0)
    assert np.max(np.abs(us / ref - 1)) < 5e-3


def test_born_receiver_in_support():
    ctx = WaveContext(1.0)
    q = unit_box_q()
    surf = MeasurementSurface(np.array([[0.5, 0.5], [3.0, 3.0]]))
    with pytest.raises(DomainError):
        fw.born_scattered(ctx, q, Illumination.plane_angle(0), surf)


def test_born_quadrature_refinement():
    ctx = WaveContext(6.0)
    q = unit_box_q(0.7)
    surf = MeasurementSurface.circle(10, 2.0, center=(0.5, 0.5))
    ill = Illumination.plane_angle(0.4)
    a = fw.born_scattered(ctx, q, ill, surf)
    b = fw.born_scattered(ctx, q, ill, surf, h=fw.default_quadrature_step(ctx) / 2)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) < 0.01


def test_far_field_examples():
    ctx = WaveContext(1.0)
    dom = Box([0, 0], [1, 1])
    q = ContrastField.from_boxes(dom, [(dom, 1.0)])
    c = fw.far_field_constant(ctx)
    # d_x - d_y = (1, 0)
    dx, dy = np.array([0.5, math.sqrt(3) / 2]), np.array([-0.5, math.sqrt(3) / 2])
    val = fw.far_field_born(ctx, q, dx, dy)
    assert abs(val - c * (np.exp(1j) - 1) / 1j) < 1e-15
    d = np.array([0.6, 0.8])
    assert fw.far_field_born(ctx, q, d, d) == c * ctx.k**2 * q.mass()
    with pytest.raises(DomainError):
        fw.far_field_born(ctx, q, np.array([1.0, 1e-3]), d)
    c3 = fw.far_field_constant(WaveContext(2 * math.pi, 3))
    assert abs(c3 - (-1j) / math.sqrt(8 * math.pi) * np.exp(-0.5j * math.pi)) < 1e-16


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(0.2, 8))
def test_far_field_reciprocity(a, b, k):
    ctx = WaveContext(k)
    q = ContrastField.from_boxes(
        Box([0, 0], [1, 1]), [(Box([0.1, 0.2], [0.5, 0.9]), 1.5), (Box([0.6, 0.1], [0.8, 0.3]), -0.5)]
    )
    dx, dy = np.array([math.cos(a), math.sin(a)]), np.array([math.cos(b), math.sin(b)])
    assert fw.far_field_born(ctx, q, dx, dy) == fw.far_field_born(ctx, q, -dy, -dx)


def test_msr_properties():
    ctx = WaveContext(3.0)
    surf = MeasurementSurface.circle(24, 3.0)
    dom = Box([-1, -1], [1, 1])
    assert np.all(fw.msr_matrix(ctx, ContrastField.zero(dom), surf).entries == 0)
    q = ContrastField.from_boxes(dom, [(Box([-0.5, -0.2], [0.1, 0.3]), 1.2)])
    a = fw.msr_matrix(ctx, q, surf).entries
    assert np.linalg.norm(a - a.T) <= 1e-13 * np.linalg.norm(a)
    one = fw.msr_point_scatterers(ctx, [[0.2, 0.1]], [1.0], surf)
    s = svd_oracle(one.entries)
    assert s[1] <= 1e-12 * s[0]
    two = fw.msr_point_scatterers(ctx, [[0.2, 0.1], [-0.4, 0.3]], [1.0, 1.0], surf)
    s = svd_oracle(two.entries)
    assert s[1] > 1e-3 * s[0] and s[2] <= 1e-12 * s[0]


def test_ls_zero_contrast():
    ctx = WaveContext(2.0)
    dom = Box([0, 0], [1, 1])
    r = fw.ls_total_field(ctx, ContrastField.zero(dom), Illumination.plane_angle(0.3), uniform_grid(dom, 0.05))
    assert np.array_equal(r.total, r.incident)


def test_ls_preconditions():
    ctx = WaveContext(10.0)
    q = unit_box_q()
    with pytest.raises(PreconditionError):
        fw.ls_total_field(ctx, q, Illumination.plane_angle(0), uniform_grid(q.domain, 0.1))
    inner = Grid(uniform_grid(Box([0.4, 0.4], [0.6, 0.6]), 0.02).points, "uniform", np.array([0.02, 0.02]))
    with pytest.raises(PreconditionError):
        fw.ls_total_field(ctx, q, Illumination.plane_angle(0), inner)


def test_ls_two_squares_residual_and_born_gap():
    ctx, dom, q, surf, ill = two_square_setup()
    fine = uniform_grid(dom, 0.01)
    r = fw.ls_total_field(ctx, q, ill, fine)
    assert r.residual <= 1e-10
    # residual of the discrete equation recomputed independently
    act = r.contrast != 0
    z, vol, qc, u = fine.points[act], fine.cell_volumes[act], r.contrast[act], r.total[act]
    g = np.zeros((z.shape[0],) * 2, complex)
    off = ~np.eye(z.shape[0], dtype=bool)
    d = np.linalg.norm(z[:, None] - z[None], axis=-1)
    from scipy.special import hankel1

    g[off] = 0.25j * hankel1(0, ctx.k * d[off]) * vol[np.nonzero(off)[1]]
    np.fill_diagonal(g, fw.self_cell_integral(ctx, vol[0]))
    res = u - r.incident[act] - ctx.k**2 * g @ (qc * u)
    assert np.linalg.norm(res) / np.linalg.norm(r.incident[act]) < 1e-10
    ub = fw.born_scattered(ctx, q, ill, surf, h=0.01)
    ul = r.scattered(surf)
    assert np.linalg.norm(ul - ub) / np.linalg.norm(ul) > 0.01


def test_self_cell_integral_small_cell_limit():
    # for a tiny disk the integral of (i/4)H0 tends to the log-singular closed form
    ctx = WaveContext(1.0)
    a = 1e-3
    s = fw.self_cell_integral(ctx, math.pi * a * a)
    ref = -(a * a) / 2 * (math.log(ctx.k * a / 2) + np.euler_gamma - 0.5) + 1j * math.pi * a * a / 4
    assert abs(s - ref) < 1e-9
    s3 = fw.self_cell_integral(WaveContext(1.0, 3), 4 / 3 * math.pi * a**3)
    assert abs(s3 - a * a / 2) < 1e-8


def test_scatterdata_roundtrip(tmp_path):
    ctx, dom, q, surf, ill = two_square_setup()
    fields = fw.born_scattered(ctx, q, [ill, Illumination.plane_angle(0.1)], surf)
    data = fw.ScatterData(ctx, q, surf, [ill, Illumination.plane_angle(0.1)], fields, {"solver": "born"})
    p = tmp_path / "d.json"
    data.save(p)
    back = fw.ScatterData.load(p)
    assert np.array_equal(back.fields, data.fields)
    assert np.array_equal(back.surface.points, surf.points)
    assert back.dumps() == data.dumps()
    with pytest.raises(DomainError):
        fw.ScatterData(ctx, q, surf, [ill], fields)


def test_noise_seeded():
    x = np.ones(10, complex)
    assert np.array_equal(fw.add_noise(x, 0.1, 5), fw.add_noise(x, 0.1, 5))
    assert not np.array_equal(fw.add_noise(x, 0.1, 5), fw.add_noise(x, 0.1, 6))
