import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import two_square_setup
from scatmesh import forward as fw
from scatmesh import recon as rc
from scatmesh.errors import DomainError, ProvenanceError
from scatmesh.geometry import Box, ContrastField, Grid, Illumination, MeasurementSurface, WaveContext
from scatmesh.meshgen import uniform_grid
from scatmesh.specfun import GreenKernel, green_matrix


@pytest.fixture(scope="module")
def ls_data():
    ctx, dom, q, surf, ill = two_square_setup()
    r = fw.ls_total_field(ctx, q, ill, uniform_grid(dom, 0.01))
    return ctx, dom, q, surf, ill, r.scattered(surf)


def cplx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_dsm_extremes():
    ctx = WaveContext(3.0)
    surf = MeasurementSurface.circle(16, 2.0)
    x = np.array([0.2, -0.3])
    g = green_matrix(GreenKernel(2, 3.0), surf.points, x[None])[:, 0]
    assert abs(rc.dsm_index(ctx, g, x, surf) - 1) < 1e-14
    rng = np.random.default_rng(0)
    u = cplx(rng, 16)
    w = surf.weights
    u = u - np.sum(w * u * np.conj(g)) / np.sum(w * np.abs(g) ** 2) * g
    assert rc.dsm_index(ctx, u, x, surf) < 1e-14
    with pytest.raises(rc.ZeroDataError):
        rc.dsm_index(ctx, np.zeros(16), x, surf)


@given(st.floats(-50, 50).filter(lambda v: abs(v) > 1e-3), st.floats(0, 2 * math.pi))
def test_dsm_bounds_and_scale_invariance(mag, phase):
    rng = np.random.default_rng(1)
    ctx = WaveContext(2.5)
    surf = MeasurementSurface.circle(12, 3.0)
    us = cplx(rng, 12)
    pts = rng.uniform(-1, 1, (40, 2))
    a = rc.dsm_values(ctx, us, pts, surf)
    b = rc.dsm_values(ctx, mag * np.exp(1j * phase) * us, pts, surf)
    assert np.all((a >= 0) & (a <= 1))
    assert np.max(np.abs(a - b)) < 1e-13


def test_dsm_two_maxima_with_dip(ls_data):
    ctx, dom, q, surf, ill, us = ls_data
    s = np.linspace(-0.32, 0.0, 65)
    vals = rc.dsm_values(ctx, us, np.c_[s, s], surf)
    inner = np.flatnonzero((vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])) + 1
    assert len(inner) == 2
    lo = vals[inner[0]:inner[1] + 1].min()
    assert lo < vals[inner].min() - 0.05
    assert s[inner[0]] < -0.2 < s[inner[1]]


def test_dsm_field_and_combined(tmp_path):
    rng = np.random.default_rng(2)
    ctx = WaveContext(2.0)
    surf = MeasurementSurface.circle(10, 3.0)
    grid = uniform_grid(Box([-1, -1], [1, 1]), 0.25)
    fields = [rc.dsm_field(ctx, cplx(rng, 10), grid, surf, Illumination.plane_angle(a)) for a in (0, 1, 2)]
    comb = rc.dsm_combined(fields)
    assert np.all(comb.values >= np.max([f.values for f in fields], axis=0))
    assert np.array_equal(rc.dsm_combined(fields[::-1]).values, comb.values)
    assert np.array_equal(rc.dsm_combined(fields[:1]).values, fields[0].values)
    assert len(comb.provenance["illuminations"]) == 3
    other = rc.dsm_field(ctx, cplx(rng, 10), uniform_grid(Box([-1, -1], [1, 1]), 0.5), surf)
    with pytest.raises(DomainError):
        rc.dsm_combined([fields[0], other])
    with pytest.raises(DomainError):
        rc.dsm_combined([])
    p = tmp_path / "ind.csv"
    comb.write(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,y,value,value_sq"
    back = np.loadtxt(p, delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 2], comb.values)
    side = json.loads((tmp_path / "ind.csv.json").read_text())
    assert side["kind"] == "dsm" and side["surface_hash"] == surf.fingerprint()
    rc.check_provenance(side, ctx, surf)
    with pytest.raises(ProvenanceError):
        rc.check_provenance(side, ctx, MeasurementSurface.circle(11, 3.0))
    with pytest.raises(ProvenanceError):
        rc.check_provenance(side, WaveContext(2.5), surf)


def test_operators_linear_and_single_cell():
    rng = np.random.default_rng(3)
    ctx = WaveContext(4.0)
    surf = MeasurementSurface.circle(9, 2.0, arclength=True)
    grid = uniform_grid(Box([-0.5, -0.5], [0.5, 0.5]), 0.1)
    assert np.all(rc.op_Pr(ctx, np.zeros(len(grid)), grid, surf) == 0)
    assert np.all(rc.op_Pr_star(ctx, np.zeros(9), grid, surf) == 0)
    a, b = cplx(rng, len(grid)), cplx(rng, len(grid))
    lhs = rc.op_Pr(ctx, 2 * a - 3j * b, grid, surf)
    rhs = 2 * rc.op_Pr(ctx, a, grid, surf) - 3j * rc.op_Pr(ctx, b, grid, surf)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13)
    delta = np.zeros(len(grid), complex)
    delta[17] = 1
    g = green_matrix(GreenKernel(2, 4.0), surf.points, grid.points[17:18])[:, 0]
    assert np.allclose(rc.op_Pr(ctx, delta, grid, surf), grid.cell_volumes[17] * g, rtol=1e-15, atol=0)


def test_adjoint_identity():
    rng = np.random.default_rng(4)
    for dim in (2, 3):
        ctx = WaveContext(3.0, dim)
        if dim == 2:
            surf = MeasurementSurface.circle(13, 2.0, arclength=True)
            grid = uniform_grid(Box([-0.5, -0.5], [0.5, 0.6]), 0.07)
        else:
            surf = MeasurementSurface.sphere(20, 2.0)
            grid = uniform_grid(Box([-0.4] * 3, [0.4] * 3), 0.15)
        for _ in range(5):
            phi, g = cplx(rng, len(grid)), cplx(rng, len(surf))
            left = np.sum(surf.weights * rc.op_Pr(ctx, phi, grid, surf) * np.conj(g))
            right = np.sum(grid.cell_volumes * phi * np.conj(rc.op_Pr_star(ctx, g, grid, surf)))
            assert abs(left - right) <= 1e-12 * max(1.0, abs(left))


def test_backprop_closed_form_tiny():
    ctx = WaveContext(2.0)
    surf = MeasurementSurface(np.array([[2.0, 0.0], [0.0, 3.0]]), np.array([0.7, 1.3]))
    grid = Grid(np.array([[0.1, 0.2]]), "file", np.array([[0.05, 0.05]]))
    us = np.array([1 + 2j, -0.5j])
    g = green_matrix(GreenKernel(2, 2.0), surf.points, grid.points)[:, 0]
    s = np.sum(surf.weights * np.conj(g) * us)
    expect = s / (grid.cell_volumes[0] * np.sum(surf.weights * np.abs(g) ** 2))
    phi = rc.msm_backprop(ctx, us, grid, surf)
    assert abs(phi.values[0, 0] - expect) < 1e-13 * abs(expect)


@given(st.floats(-20, 20).filter(lambda v: abs(v) > 1e-2), st.floats(0, 2 * math.pi))
def test_backprop_homogeneous(mag, phase):
    rng = np.random.default_rng(5)
    ctx = WaveContext(3.0)
    surf = MeasurementSurface.circle(10, 2.0)
    grid = uniform_grid(Box([-0.5, -0.5], [0.5, 0.5]), 0.2)
    us = cplx(rng, 10, 2)
    c = mag * np.exp(1j * phase)
    a = rc.msm_backprop(ctx, us, grid, surf).values
    b = rc.msm_backprop(ctx, c * us, grid, surf).values
    assert np.allclose(b, c * a, rtol=1e-12, atol=1e-14 * np.abs(c * a).max())


def test_backprop_drops_zero_columns():
    rng = np.random.default_rng(6)
    ctx = WaveContext(3.0)
    surf = MeasurementSurface.circle(10, 2.0)
    grid = uniform_grid(Box([-0.5, -0.5], [0.5, 0.5]), 0.25)
    us = cplx(rng, 10, 3)
    us[:, 1] = 0
    with pytest.warns(rc.DroppedIlluminationWarning):
        src = rc.msm_backprop(ctx, us, grid, surf)
    assert src.kept == (0, 2) and src.values.shape == (len(grid), 2)
    with pytest.warns(rc.DroppedIlluminationWarning):
        empty = rc.msm_backprop(ctx, np.zeros((10, 2)), grid, surf)
    with pytest.warns(rc.DroppedIlluminationWarning):
        eta = rc.msm_eta(ctx, empty, [Illumination.plane_angle(0)] * 2, grid)
    assert np.all(eta == 0)


def test_eta_single_equation():
    ctx = WaveContext(2.0)
    grid = uniform_grid(Box([0, 0], [0.2, 0.2]), 0.1)
    ill = Illumination.plane_angle(0.3)
    ui = fw.incident_fields(ctx, ill, grid.points)
    rng = np.random.default_rng(7)
    u = ui + cplx(rng, len(grid))
    c = 1.7
    phi = c * u
    pw = u - ui  # supply P_Omega phi so that u^i + P_Omega phi = u
    src = rc.ContrastSource(phi[:, None], grid, (0,))
    eta = rc.msm_eta(ctx, src, [ill], grid, phi_omega=pw[:, None])
    assert np.allclose(eta, c, rtol=1e-14)


def test_eta_recovers_contrast_from_true_source():
    ctx = WaveContext(math.pi**2)
    dom = Box([-0.35, -0.35], [0.05, 0.05])
    q = ContrastField.from_boxes(dom, [(Box([-0.275, -0.275], [-0.175, -0.175]), 2.0)])
    grid = uniform_grid(dom, 0.01)
    ill = Illumination.plane_angle(math.pi / 4)
    r = fw.ls_total_field(ctx, q, ill, grid)
    src = rc.ContrastSource(r.contrast_source()[:, None], grid, (0,))
    eta = rc.msm_eta(ctx, src, [ill], grid)
    # contrast is cell-averaged; interior cells are the fully covered ones
    interior = np.isclose(r.contrast, 2.0, rtol=1e-12, atol=0)
    truth = ctx.k**2 * 2.0
    assert interior.sum() >= 64
    assert np.max(np.abs(eta[interior] / truth - 1)) < 0.10
    assert np.allclose(eta, ctx.k**2 * r.contrast, rtol=1e-10, atol=1e-10 * truth)


def test_msm_smoke(ls_data):
    ctx, dom, q, surf, ill, us = ls_data
    grid = uniform_grid(dom, 0.04)
    src = rc.msm_backprop(ctx, us, grid, surf)
    assert np.all(np.isfinite(src.values)) and np.any(src.values != 0)
    eta = rc.msm_eta(ctx, src, [ill], grid)
    assert np.all(np.isfinite(eta))


def test_indicator_shape_check():
    grid = uniform_grid(Box([0, 0], [1, 1]), 0.5)
    with pytest.raises(DomainError):
        rc.IndicatorField(grid, np.zeros(3), "dsm")
