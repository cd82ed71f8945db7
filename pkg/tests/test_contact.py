import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbtsim import preset
from vbtsim.contact import (
    DEFAULT_SHAPES,
    INDENTER_KINDS,
    ContactPose,
    DepthField,
    IndenterShape,
    compute_depth_field,
    compute_displacement_field,
    contact_support,
    displace_markers,
    indenter_height,
    sample_bilinear,
)
from vbtsim.core import Stiffness, mm_to_px, pixel_grid, raster_origin
from vbtsim.errors import PoseOutOfAreaError
from vbtsim.markers import (
    Disk,
    MarkerLayout,
    RandomArrangement,
    Uniform,
    build_layout,
    gen_dot_layout,
    gen_double_layer,
)

CTAC = preset("c-tac")
# dyadic pixel pitch: every pixel coordinate and integer-pixel shift is exact
DYADIC = replace(CTAC, camera=replace(CTAC.camera, mm_per_px=0.125, resolution=(288, 232)))


def test_indenter_height_examples():
    sph = IndenterShape("sphere", radius=4.0)
    assert indenter_height(sph, ContactPose((0, 0), 1.0), (0.0, 0.0)) == -1.0
    assert indenter_height(sph, ContactPose((0, 0), 1.0), (4.0, 0.0)) >= 0
    ring = IndenterShape("ring", inner_radius=3.0, outer_radius=5.0)
    assert indenter_height(ring, ContactPose((0, 0), 0.5), (4.0, 0.0)) == -0.5
    assert indenter_height(ring, ContactPose((0, 0), 0.5), (0.0, 0.0)) > 0


def test_shape_validation():
    with pytest.raises(ValueError):
        IndenterShape("ring", inner_radius=5.0, outer_radius=3.0)
    with pytest.raises(ValueError):
        IndenterShape("cone")
    with pytest.raises(ValueError):
        IndenterShape("dot", radius=0.0)


def test_zero_press_gives_zero_field():
    d = compute_depth_field(DEFAULT_SHAPES["sphere"], ContactPose((17, 13.5), 0.0), CTAC)
    assert not d.grid.any()
    u = compute_displacement_field(d, CTAC.elastomer, CTAC.mechanics)
    assert not u.u.any()


def test_sphere_contact_radius_sqrt7():
    # oracle: circle-sphere intersection r = sqrt(2 R p - p^2) = sqrt(7) for R=4, p=1
    shape, pose = IndenterShape("sphere", radius=4.0), ContactPose((17.0, 13.5), 1.0)
    d = compute_depth_field(shape, pose, CTAC)
    X, Y = pixel_grid(CTAC)
    r = np.hypot(X - 17.0, Y - 13.5)
    s = CTAC.camera.mm_per_px
    assert r[d.grid > 0].max() <= math.sqrt(7) + 1e-12
    assert r[d.grid > 0].max() >= math.sqrt(7) - s
    assert np.all(d.grid[r < math.sqrt(7) - s] > 0)


def test_ring_has_zero_depth_at_centre():
    d = compute_depth_field(DEFAULT_SHAPES["ring"], ContactPose((17.05, 13.55), 0.8), CTAC)
    col, row = mm_to_px(CTAC, 17.05, 13.55)
    assert d.grid[int(round(float(row))), int(round(float(col)))] == 0.0
    assert d.grid.max() == 0.8


def test_pose_out_of_area():
    with pytest.raises(PoseOutOfAreaError):
        compute_depth_field(DEFAULT_SHAPES["dot"], ContactPose((-10.0, 5.0), 0.5), CTAC)
    with pytest.raises(ValueError):
        compute_depth_field(DEFAULT_SHAPES["dot"], ContactPose((10.0, 5.0), 9.0), CTAC)


def test_sphere_displacement_points_outward():
    pose = ContactPose((17.0, 13.5), 0.8)
    d = compute_depth_field(DEFAULT_SHAPES["sphere"], pose, CTAC)
    u = compute_displacement_field(d, CTAC.elastomer, CTAC.mechanics)
    X, Y = pixel_grid(CTAC)
    rx, ry = X - 17.0, Y - 13.5
    r = np.hypot(rx, ry)
    lat = u.u[..., :2]
    mag = np.hypot(lat[..., 0], lat[..., 1])
    sel = (r > 0.3) & (mag > 1e-9)
    radial = (lat[..., 0] * rx + lat[..., 1] * ry)[sel] / (r[sel] * mag[sel])
    assert radial.min() > 0  # outward everywhere
    strong = mag[sel] > 0.01 * mag.max()
    assert radial[strong].min() > 0.999


def test_flat_dot_linearity():
    a = compute_depth_field(DEFAULT_SHAPES["dot"], ContactPose((17.0, 13.5), 0.4), CTAC)
    b = compute_depth_field(DEFAULT_SHAPES["dot"], ContactPose((17.0, 13.5), 0.8), CTAC)
    ua = compute_displacement_field(a, CTAC.elastomer, CTAC.mechanics)
    ub = compute_displacement_field(b, CTAC.elastomer, CTAC.mechanics)
    assert np.allclose(ub.u, 2 * ua.u, atol=1e-15)
    c = (240, 240)
    assert ub.uz[c] == 2 * ua.uz[c] == -0.8


def test_flexible_disk_scales_rigid_keeps():
    bounds = (10.0, 10.0, 24.0, 17.0)
    flex = gen_dot_layout(bounds, Uniform(1, 2), 0.5, Stiffness.flexible)
    rigid = gen_dot_layout(bounds, Uniform(1, 2), 0.5, Stiffness.rigid)
    depth = DepthField(np.ones(CTAC.shape), CTAC.camera.mm_per_px, raster_origin(CTAC))
    u = np.zeros(CTAC.shape + (3,))
    u[..., 2] = -1.0
    from vbtsim.contact import DeformationField
    field = DeformationField(u, depth.mm_per_px, depth.origin)
    k = CTAC.mechanics.flex_gain
    assert k == 0.2
    assert all(math.isclose(m.geometry.radius, 0.5 * 1.2) for m in displace_markers(flex, field, CTAC).markers)
    assert all(m.geometry.radius == 0.5 for m in displace_markers(rigid, field, CTAC).markers)


def test_double_layer_deeper_moves_less(victac):
    lay = build_layout(victac)
    d = compute_depth_field(DEFAULT_SHAPES["sphere"], ContactPose((16.0, 13.0), 0.9), victac)
    field = compute_displacement_field(d, victac.elastomer, victac.mechanics)
    moved = displace_markers(lay, field, victac)
    shift = {m.id: np.subtract(b.center, m.center) for m, b in zip(lay.markers, moved.markers)}
    lam = victac.mechanics.layer_decay
    # the same field sampled at both layers' columns: layer 0 sees lam times the layer-1 motion
    for m in lay.layer(0):
        top = sample_bilinear(field.u[..., :2], field.origin, field.mm_per_px, *m.center)[0]
        assert np.linalg.norm(shift[m.id]) <= np.linalg.norm(top) + 1e-15
        assert np.allclose(shift[m.id], lam * top)


# ---------------------------------------------------------------------------
# invariants

KIND = st.sampled_from(INDENTER_KINDS)
POSE = st.builds(lambda x, y, p, yaw: ContactPose((x, y), p, yaw),
                 st.floats(8.0, 26.0), st.floats(7.0, 20.0), st.floats(0.05, 1.5), st.floats(0, 2 * math.pi))


@given(KIND, POSE)
def test_depth_support_and_maximum(kind, pose):
    shape = DEFAULT_SHAPES[kind]
    d = compute_depth_field(shape, pose, CTAC)
    assert d.grid.min() >= 0
    support = contact_support(shape, pose, CTAC)
    assert not np.any((d.grid > 0) & ~support)
    if kind == "sphere":
        s = CTAC.camera.mm_per_px
        # deepest sample within one pixel of the apex
        assert 0 <= pose.press_depth - d.grid.max() <= s * s / shape.radius
    elif support.any():
        assert d.grid.max() == pose.press_depth


@given(KIND, st.integers(0, 64 * 8), st.integers(0, 64 * 6), st.integers(-40, 40), st.integers(-30, 30),
       st.floats(0.1, 1.2), st.floats(0, 2 * math.pi))
def test_translation_equivariance_integer_pixels(kind, cx64, cy64, kx, ky, press, yaw):
    c = (12.0 + cx64 / 64.0, 9.0 + cy64 / 64.0)
    s = DYADIC.camera.mm_per_px
    shape = DEFAULT_SHAPES[kind]
    a = compute_depth_field(shape, ContactPose(c, press, yaw), DYADIC).grid
    b = compute_depth_field(shape, ContactPose((c[0] + kx * s, c[1] + ky * s), press, yaw), DYADIC).grid
    rows, cols = a.shape
    sa = a[max(0, -ky):rows - max(0, ky), max(0, -kx):cols - max(0, kx)]
    sb = b[max(0, ky):rows - max(0, -ky), max(0, kx):cols - max(0, -kx)]
    assert np.array_equal(sa, sb)


@given(KIND, POSE)
def test_uz_equals_minus_depth_and_marker_ids_kept(kind, pose):
    d = compute_depth_field(DEFAULT_SHAPES[kind], pose, CTAC)
    f = compute_displacement_field(d, CTAC.elastomer, CTAC.mechanics)
    assert np.all(f.uz + d.grid == 0)
    lay = build_layout(CTAC)
    moved = displace_markers(lay, f, CTAC)
    assert [m.id for m in moved.markers] == [m.id for m in lay.markers]


@given(st.sampled_from(["c-tac", "vi-c-tac"]), st.integers(0, 2**31 - 1), st.integers(2, 30))
def test_zero_field_is_identity(name, seed, count):
    cfg = preset(name)
    lay = gen_dot_layout((2.0, 2.0, 32.0, 25.0), RandomArrangement(count, 1.5, seed), 0.5)
    if name == "vi-c-tac":
        lay = gen_double_layer((2.0, 2.0, 32.0, 25.0), Uniform(1 + seed % 6, 1 + count % 6), 1.5)
    zero = compute_displacement_field(DepthField(np.zeros(cfg.shape), cfg.camera.mm_per_px, raster_origin(cfg)),
                                      cfg.elastomer)
    assert displace_markers(lay, zero, cfg) == lay


def test_far_field_vanishes():
    pose = ContactPose((17.0, 13.5), 1.0)
    d = compute_depth_field(DEFAULT_SHAPES["dot"], pose, CTAC)
    f = compute_displacement_field(d, CTAC.elastomer, CTAC.mechanics)
    X, Y = pixel_grid(CTAC)
    far = np.hypot(X - 17.0, Y - 13.5) > 12.0
    assert np.abs(f.u[far]).max() < 1e-6


def test_single_layout_markers_match_field():
    lay = MarkerLayout(markers=build_layout(CTAC).markers[:1], kind=build_layout(CTAC).kind,
                       bounds=build_layout(CTAC).bounds)
    m = lay.markers[0]
    pose = ContactPose((m.center[0] + 1.0, m.center[1]), 0.8)
    d = compute_depth_field(DEFAULT_SHAPES["dot"], pose, CTAC)
    f = compute_displacement_field(d, CTAC.elastomer, CTAC.mechanics)
    moved = displace_markers(lay, f, CTAC).markers[0]
    u = sample_bilinear(f.u, f.origin, f.mm_per_px, *m.center)[0]
    assert isinstance(moved.geometry, Disk)
    assert np.allclose(np.subtract(moved.center, m.center), u[:2])
    assert moved.center[0] < m.center[0]  # pushed away from the contact on its +x side
