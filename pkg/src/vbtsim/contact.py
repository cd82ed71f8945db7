"""Rigid indenters pressed into the elastomer: depth and displacement fields.

The lateral displacement model is a smoothed-gradient heuristic: the depth
field is blurred with a Gaussian and the surface moves down its gradient,

    u_xy = -kappa * (30 / stiffness) * grad(G_sigma * d),    u_z = -d.

It is linear in ``d``, smooth, and points away from the contact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .core import MechanicsParams, SensorConfig, Stiffness, pixel_grid, raster_origin
from .errors import PoseOutOfAreaError
from .geometry import closest_rotation
from .markers import Disk, Frame, Marker, MarkerLayout, Polygon

INDENTER_KINDS = ("dot", "ring", "sphere", "curve", "waves", "multi_dot")


@dataclass(frozen=True)
class IndenterShape:
    """Analytic indenter; which fields matter depends on ``kind``.

    dot: radius | ring: inner_radius, outer_radius | sphere: radius |
    curve: radius (arc), stroke_width, arc_half_angle |
    waves: wavelength, amplitude, stroke_width, length |
    multi_dot: radius (per dot), count, spacing (dots on a circle of that radius)
    """

    kind: str
    radius: float = 1.5
    inner_radius: float = 3.0
    outer_radius: float = 5.0
    stroke_width: float = 1.2
    arc_half_angle: float = math.radians(50.0)
    wavelength: float = 5.0
    amplitude: float = 1.5
    length: float = 12.0
    count: int = 3
    spacing: float = 3.5

    def __post_init__(self):
        if self.kind not in INDENTER_KINDS:
            raise ValueError(f"unknown indenter kind {self.kind!r}")
        dims = (self.radius, self.inner_radius, self.outer_radius, self.stroke_width,
                self.arc_half_angle, self.wavelength, self.amplitude, self.length, self.spacing)
        if min(dims) <= 0 or self.count < 1:
            raise ValueError("indenter dimensions must be > 0")
        if self.kind == "ring" and not self.inner_radius < self.outer_radius:
            raise ValueError("ring inner radius must be below outer radius")

    @property
    def flat(self) -> bool:
        return self.kind != "sphere"

    def reach(self, press_depth: float) -> float:
        """Radius around the pose centre that contains the whole footprint."""
        k = self.kind
        if k == "dot":
            return self.radius
        if k == "ring":
            return self.outer_radius
        if k == "sphere":
            p = min(press_depth, self.radius)
            return math.sqrt(max(0.0, 2 * self.radius * p - p * p))
        if k == "curve":
            return 2 * self.radius * math.sin(self.arc_half_angle / 2) + self.stroke_width / 2
        if k == "waves":
            return math.hypot(self.length / 2, self.amplitude) + self.stroke_width
        return self.spacing + self.radius


DEFAULT_SHAPES = {
    "dot": IndenterShape("dot", radius=1.5),
    "ring": IndenterShape("ring", inner_radius=3.0, outer_radius=5.0),
    "sphere": IndenterShape("sphere", radius=10.0),
    "curve": IndenterShape("curve", radius=6.0, stroke_width=1.2, arc_half_angle=math.radians(60.0)),
    "waves": IndenterShape("waves", wavelength=7.0, amplitude=2.0, stroke_width=1.2, length=14.0),
    "multi_dot": IndenterShape("multi_dot", radius=1.0, count=3, spacing=3.5),
}


@dataclass(frozen=True)
class ContactPose:
    center: tuple[float, float]
    press_depth: float
    yaw: float = 0.0

    def __post_init__(self):
        if self.press_depth < 0:
            raise ValueError("press_depth must be >= 0")


@dataclass(frozen=True, eq=False)
class DepthField:
    grid: np.ndarray  # (rows, cols) mm, >= 0
    mm_per_px: float
    origin: tuple[float, float]  # mm coordinates of pixel (0, 0)
    saturated: np.ndarray | None = None  # set by intensity inversion: values are lower bounds

    @property
    def shape(self):
        return self.grid.shape


@dataclass(frozen=True, eq=False)
class DeformationField:
    u: np.ndarray  # (rows, cols, 3) mm
    mm_per_px: float
    origin: tuple[float, float]

    @property
    def uz(self) -> np.ndarray:
        return self.u[..., 2]


def _local(shape_yaw, center, x, y):
    c, s = math.cos(shape_yaw), math.sin(shape_yaw)
    dx = x - center[0]
    dy = y - center[1]
    return c * dx + s * dy, -s * dx + c * dy


def _height_local(shape: IndenterShape, press: float, u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    inf = np.inf
    k = shape.kind
    if k == "sphere":
        R = shape.radius
        r2 = u * u + v * v
        with np.errstate(invalid="ignore"):
            h = (R - press) - np.sqrt(R * R - r2)
        return np.where(r2 <= R * R, h, inf)
    if k == "dot":
        inside = u * u + v * v <= shape.radius ** 2
    elif k == "ring":
        r2 = u * u + v * v
        inside = (r2 >= shape.inner_radius ** 2) & (r2 <= shape.outer_radius ** 2)
    elif k == "multi_dot":
        inside = np.zeros(np.broadcast(u, v).shape, dtype=bool)
        for n in range(shape.count):
            a = 2 * math.pi * n / shape.count + math.pi / 2
            cu, cv = shape.spacing * math.cos(a), shape.spacing * math.sin(a)
            inside |= (u - cu) ** 2 + (v - cv) ** 2 <= shape.radius ** 2
    elif k == "curve":
        # arc of radius R with its apex at the pose centre, bulging towards +v
        R, half = shape.radius, shape.arc_half_angle
        cv = v + R  # arc centre at (0, -R)
        phi = np.arctan2(u, cv)  # 0 at the apex
        rad = np.hypot(u, cv)
        on_span = np.abs(phi) <= half
        d_arc = np.abs(rad - R)
        eu, ev = R * math.sin(half), R * math.cos(half) - R
        d_end = np.minimum(np.hypot(u - eu, v - ev), np.hypot(u + eu, v - ev))
        dist = np.where(on_span, d_arc, d_end)
        inside = dist <= shape.stroke_width / 2
    else:  # waves: sinusoidal stroke along u
        k2 = 2 * math.pi / shape.wavelength
        f = shape.amplitude * np.sin(k2 * u)
        fp = shape.amplitude * k2 * np.cos(k2 * u)
        dist = np.abs(v - f) / np.sqrt(1.0 + fp * fp)
        inside = (dist <= shape.stroke_width / 2) & (np.abs(u) <= shape.length / 2)
    return np.where(inside, -press, inf)


def indenter_height(shape: IndenterShape, pose: ContactPose, p) -> np.ndarray | float:
    """Height (mm) of the indenter underside above the undeformed surface at ``p``.

    ``+inf`` where the indenter has no material above the point.
    """
    x, y = p
    u, v = _local(pose.yaw, pose.center, np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    h = _height_local(shape, pose.press_depth, u, v)
    return float(h) if np.ndim(h) == 0 else h


def _check_pose(shape: IndenterShape, pose: ContactPose, cfg: SensorConfig):
    if pose.press_depth > cfg.elastomer.thickness:
        raise ValueError(f"press depth {pose.press_depth} mm exceeds elastomer thickness "
                         f"{cfg.elastomer.thickness} mm")
    W, H = cfg.sensing_area
    cx, cy = pose.center
    r = shape.reach(pose.press_depth)
    nx = min(max(cx, 0.0), W)
    ny = min(max(cy, 0.0), H)
    if (nx - cx) ** 2 + (ny - cy) ** 2 > r * r:
        raise PoseOutOfAreaError(f"contact at {pose.center} (reach {r:.3g} mm) lies outside the "
                                 f"{W:g}x{H:g} mm sensing area")


def compute_depth_field(shape: IndenterShape, pose: ContactPose, cfg: SensorConfig) -> DepthField:
    _check_pose(shape, pose, cfg)
    s = cfg.camera.mm_per_px
    origin = raster_origin(cfg)
    rows, cols = cfg.shape
    grid = np.zeros((rows, cols))
    if pose.press_depth > 0:
        r = shape.reach(pose.press_depth) + 2 * s
        c0 = max(0, int(math.floor((pose.center[0] - r - origin[0]) / s)))
        c1 = min(cols, int(math.ceil((pose.center[0] + r - origin[0]) / s)) + 1)
        r0 = max(0, int(math.floor((pose.center[1] - r - origin[1]) / s)))
        r1 = min(rows, int(math.ceil((pose.center[1] + r - origin[1]) / s)) + 1)
        if c1 > c0 and r1 > r0:
            xs = origin[0] + np.arange(c0, c1) * s
            ys = origin[1] + np.arange(r0, r1) * s
            X, Y = np.meshgrid(xs, ys)
            h = indenter_height(shape, pose, (X, Y))
            grid[r0:r1, c0:c1] = np.maximum(0.0, -h)
    return DepthField(grid=grid, mm_per_px=s, origin=origin)


def contact_support(shape: IndenterShape, pose: ContactPose, cfg: SensorConfig) -> np.ndarray:
    """Boolean raster of the analytic contact region (indenter below the surface)."""
    X, Y = pixel_grid(cfg)
    return np.asarray(indenter_height(shape, pose, (X, Y))) < 0


def compute_displacement_field(depth: DepthField, elastomer, mechanics: MechanicsParams | None = None,
                               truncate: float = 4.0) -> DeformationField:
    mp = mechanics or MechanicsParams()
    d = depth.grid
    s = depth.mm_per_px
    u = np.zeros(d.shape + (3,))
    u[..., 2] = -d
    nz = np.nonzero(d)
    if len(nz[0]) == 0:
        return DeformationField(u=u, mm_per_px=s, origin=depth.origin)
    sig_px = mp.sigma_mm / s
    pad = int(math.ceil(truncate * sig_px)) + 2
    r0, r1 = max(0, nz[0].min() - pad), min(d.shape[0], nz[0].max() + pad + 1)
    c0, c1 = max(0, nz[1].min() - pad), min(d.shape[1], nz[1].max() + pad + 1)
    sm = ndimage.gaussian_filter(d[r0:r1, c0:c1], sig_px, mode="constant", cval=0.0, truncate=truncate)
    gy, gx = np.gradient(sm, s)
    comp = mp.kappa * 30.0 / elastomer.stiffness
    u[r0:r1, c0:c1, 0] = -comp * gx
    u[r0:r1, c0:c1, 1] = -comp * gy
    return DeformationField(u=u, mm_per_px=s, origin=depth.origin)


def sample_bilinear(grid: np.ndarray, origin, mm_per_px: float, x, y) -> np.ndarray:
    """Sample ``grid`` (rows, cols[, k]) at mm positions; zero outside the raster."""
    col = (np.atleast_1d(np.asarray(x, dtype=np.float64)) - origin[0]) / mm_per_px
    row = (np.atleast_1d(np.asarray(y, dtype=np.float64)) - origin[1]) / mm_per_px
    coords = np.vstack([row, col])
    if grid.ndim == 2:
        return ndimage.map_coordinates(grid, coords, order=1, mode="constant", cval=0.0)
    return np.stack([ndimage.map_coordinates(grid[..., k], coords, order=1, mode="constant", cval=0.0)
                     for k in range(grid.shape[-1])], axis=-1)


def layer_attenuation(layout: MarkerLayout, layer: int, decay: float) -> float:
    """``decay ** depth`` where depth counts layers below the top one."""
    return decay ** (layout.n_layers - 1 - layer)


def displace_markers(layout: MarkerLayout, field: DeformationField, cfg: SensorConfig) -> MarkerLayout:
    mp = cfg.mechanics
    s, org = field.mm_per_px, field.origin
    centers = np.array([m.center for m in layout.markers]) if layout.markers else np.zeros((0, 2))
    if len(centers) == 0:
        return layout
    uvals = sample_bilinear(field.u, org, s, centers[:, 0], centers[:, 1])
    jac = None
    out: list[Marker] = []
    for k, m in enumerate(layout.markers):
        att = layer_attenuation(layout, m.layer, mp.layer_decay)
        ux, uy, uz = (att * uvals[k]).tolist()
        d_local = -uz
        scale = 1.0 + mp.flex_gain * d_local if m.stiffness is Stiffness.flexible else 1.0
        g = m.geometry
        if isinstance(g, Disk):
            geo = Disk((g.center[0] + ux, g.center[1] + uy), g.radius * scale)
        elif isinstance(g, Polygon):
            cx, cy = g.centroid
            geo = Polygon(tuple((cx + (vx - cx) * scale + ux, cy + (vy - cy) * scale + uy)
                                for vx, vy in g.vertices))
        else:
            if jac is None:
                jac = _jacobian_fields(field)
            J = att * sample_bilinear(jac, org, s, [g.origin[0]], [g.origin[1]])[0].reshape(3, 2)
            o = np.asarray(g.origin) + np.array([ux, uy, uz])
            if np.any(J != 0):
                F = np.eye(3)
                F[:, :2] += J
                R = closest_rotation(F)
                axes = g.axes @ R.T
            else:
                axes = g.axes
            geo = Frame(tuple(map(float, o)), tuple(tuple(map(float, o + a)) for a in axes), g.axis_colors)
        out.append(replace(m, geometry=geo))
    return replace(layout, markers=tuple(out))


def _jacobian_fields(field: DeformationField) -> np.ndarray:
    """``d(ux, uy, uz)/d(x, y)`` per pixel, flattened to 6 channels (row-major 3x2)."""
    s = field.mm_per_px
    chans = []
    for c in range(3):
        gy, gx = np.gradient(field.u[..., c], s)
        chans += [gx, gy]
    return np.stack(chans, axis=-1)
