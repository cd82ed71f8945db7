"""Marker families: dot, double-layer, polygonal tessellation and coordinate frames."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .core import (
    RGB,
    WHITE,
    LayoutKind,
    SensorConfig,
    Severity,
    Stiffness,
    Violation,
)
from .errors import InfeasiblePackingError, PitchError
from .geometry import clip_polygon_to_rect, is_convex, polygon_area

Vec3 = tuple[float, float, float]
Bounds = tuple[float, float, float, float]  # x0, y0, x1, y1

RANDOM_RETRY_BUDGET = 10_000
ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"disk radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) < 3 or not is_convex(self.vertices):
            raise ValueError("polygon markers must be simple, convex and have >= 3 vertices")

    @property
    def area(self) -> float:
        return abs(polygon_area(self.vertices))

    @property
    def centroid(self) -> tuple[float, float]:
        v = np.asarray(self.vertices)
        x, y = v[:, 0], v[:, 1]
        cr = x * np.roll(y, -1) - np.roll(x, -1) * y
        a = cr.sum() / 2.0
        return (float(((x + np.roll(x, -1)) * cr).sum() / (6 * a)),
                float(((y + np.roll(y, -1)) * cr).sum() / (6 * a)))


@dataclass(frozen=True)
class Frame:
    """Gyroscope-like marker: hub at ``origin`` plus three pointer tips."""

    origin: Vec3
    endpoints: tuple[Vec3, Vec3, Vec3]
    axis_colors: tuple[RGB, RGB, RGB] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        ax = self.axes
        lens = np.linalg.norm(ax, axis=1)
        if not np.all(lens > 0):
            raise ValueError("frame pointers must have positive length")
        if np.ptp(lens) > ORTHO_TOL * max(1.0, lens.max()):
            raise ValueError("frame pointers must have equal length")
        g = ax @ ax.T
        off = g - np.diag(np.diag(g))
        if np.abs(off).max() > ORTHO_TOL * lens.max() ** 2:
            raise ValueError("frame pointers must be mutually orthogonal")

    @property
    def axes(self) -> np.ndarray:
        """Pointer vectors (tip - origin), one per row."""
        return np.asarray(self.endpoints, dtype=np.float64) - np.asarray(self.origin, dtype=np.float64)

    @property
    def pointer_len(self) -> float:
        return float(np.linalg.norm(self.axes[0]))


Geometry = Union[Disk, Polygon, Frame]


@dataclass(frozen=True)
class Marker:
    id: int
    layer: int
    geometry: Geometry
    color: RGB = WHITE
    stiffness: Stiffness = Stiffness.rigid

    @property
    def center(self) -> tuple[float, float]:
        g = self.geometry
        if isinstance(g, Disk):
            return g.center
        if isinstance(g, Polygon):
            return g.centroid
        return (g.origin[0], g.origin[1])


@dataclass(frozen=True)
class MarkerLayout:
    markers: tuple[Marker, ...]
    kind: LayoutKind
    bounds: Bounds
    min_clearance: float = 0.0
    layer_separation: float = 0.0

    def __len__(self):
        return len(self.markers)

    @property
    def n_layers(self) -> int:
        return 1 + max((m.layer for m in self.markers), default=0)

    def layer(self, k: int) -> list[Marker]:
        return [m for m in self.markers if m.layer == k]


@dataclass(frozen=True)
class Uniform:
    rows: int
    cols: int


@dataclass(frozen=True)
class RandomArrangement:
    count: int
    min_spacing: float
    seed: int = 0


Arrangement = Union[Uniform, RandomArrangement]


def _check_bounds(bounds: Bounds):
    x0, y0, x1, y1 = bounds
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate bounds {bounds}")


def _grid_centers(bounds: Bounds, rows: int, cols: int, radius: float):
    x0, y0, x1, y1 = bounds
    px = (x1 - x0) / cols
    py = (y1 - y0) / rows
    if min(px, py) <= 2 * radius:
        raise PitchError(f"pitch {min(px, py):.4g} mm must exceed marker diameter {2 * radius:.4g} mm")
    pts = [(x0 + (i + 0.5) * px, y0 + (j + 0.5) * py) for j in range(rows) for i in range(cols)]
    return pts, min(px, py)


def _random_centers(bounds: Bounds, arr: RandomArrangement, radius: float):
    if arr.min_spacing < 2 * radius:
        raise PitchError(f"min_spacing {arr.min_spacing} mm below marker diameter {2 * radius} mm")
    x0, y0, x1, y1 = bounds
    a, b = x1 - x0 - 2 * radius, y1 - y0 - 2 * radius
    if a < 0 or b < 0:
        raise PitchError("markers do not fit in bounds")
    s = arr.min_spacing
    # disks of diameter s packed in the inflated rectangle: density <= pi / sqrt(12)
    capacity = (a + s) * (b + s) / (s * s * math.sqrt(3) / 2) if s > 0 else math.inf
    if arr.count > capacity:
        raise InfeasiblePackingError(f"{arr.count} markers with spacing {s} mm exceed the area bound "
                                     f"({capacity:.1f})")
    rng = np.random.default_rng(arr.seed)
    pts: list[tuple[float, float]] = []
    tries = 0
    while len(pts) < arr.count:
        if tries >= RANDOM_RETRY_BUDGET:
            raise InfeasiblePackingError(f"placed {len(pts)}/{arr.count} markers within "
                                         f"{RANDOM_RETRY_BUDGET} rejection samples")
        tries += 1
        x = x0 + radius + a * rng.random()
        y = y0 + radius + b * rng.random()
        if all((x - px) ** 2 + (y - py) ** 2 >= s * s for px, py in pts):
            pts.append((float(x), float(y)))
    return pts, s - 2 * radius


def gen_dot_layout(bounds: Bounds, arrangement: Arrangement, radius: float = 0.5,
                   stiffness: Stiffness = Stiffness.rigid, layer: int = 0,
                   color: RGB = WHITE) -> MarkerLayout:
    _check_bounds(bounds)
    if isinstance(arrangement, Uniform):
        pts, pitch = _grid_centers(bounds, arrangement.rows, arrangement.cols, radius)
        clearance = pitch - 2 * radius
    else:
        pts, clearance = _random_centers(bounds, arrangement, radius)
    markers = tuple(Marker(id=k, layer=layer, geometry=Disk(c, radius), color=color, stiffness=stiffness)
                    for k, c in enumerate(pts))
    return MarkerLayout(markers=markers, kind=LayoutKind.dot, bounds=tuple(map(float, bounds)),
                        min_clearance=clearance)


def gen_double_layer(bounds: Bounds, arrangement: Arrangement | tuple[Arrangement, Arrangement],
                     separation_mm: float, colors: tuple[RGB, RGB] = (WHITE, (1.0, 0.0, 1.0)),
                     stiffness: Stiffness = Stiffness.rigid, radius: float = 0.5,
                     stagger: bool = False) -> MarkerLayout:
    """Two marker layers; layer 0 is the deeper one.

    With ``stagger`` (uniform grids only) layer 0 is shifted by ``-pitch/4``
    and layer 1 by ``+pitch/4`` on both axes, so the layers are offset by
    half a pitch relative to each other.
    """
    _check_bounds(bounds)
    if not separation_mm > 0:
        raise ValueError("separation_mm must be > 0")
    if isinstance(arrangement, tuple):
        arrs = arrangement
    elif isinstance(arrangement, RandomArrangement):
        arrs = (arrangement, replace(arrangement, seed=arrangement.seed + 1))
    else:
        arrs = (arrangement, arrangement)
    markers: list[Marker] = []
    clear = math.inf
    for layer, arr in enumerate(arrs):
        if isinstance(arr, Uniform):
            pts, pitch = _grid_centers(bounds, arr.rows, arr.cols, radius)
            if stagger:
                x0, y0, x1, y1 = bounds
                qx = (x1 - x0) / arr.cols / 4 * (1 if layer else -1)
                qy = (y1 - y0) / arr.rows / 4 * (1 if layer else -1)
                pts = [(x + qx, y + qy) for x, y in pts]
                if min(abs(qx), abs(qy)) < radius:
                    raise PitchError("staggered markers would leave the bounds")
            c = pitch - 2 * radius
        else:
            pts, c = _random_centers(bounds, arr, radius)
        clear = min(clear, c)
        base = len(markers)
        markers += [Marker(id=base + k, layer=layer, geometry=Disk(p, radius), color=colors[layer],
                           stiffness=stiffness) for k, p in enumerate(pts)]
    return MarkerLayout(markers=tuple(markers), kind=LayoutKind.double_layer,
                        bounds=tuple(map(float, bounds)), min_clearance=clear,
                        layer_separation=float(separation_mm))


# ---------------------------------------------------------------------------
# regular tessellations; vertices come from integer lattices so shared
# corners are bit-identical between neighbouring cells

def _square_cells(x0, y0, w, h, p):
    nx, ny = math.ceil(w / p - 1e-12), math.ceil(h / p - 1e-12)
    for j in range(ny):
        for i in range(nx):
            X = lambda k: x0 + k * p  # noqa: E731
            Y = lambda k: y0 + k * p  # noqa: E731
            yield [(X(i), Y(j)), (X(i + 1), Y(j)), (X(i + 1), Y(j + 1)), (X(i), Y(j + 1))]


def _triangle_cells(x0, y0, w, h, p):
    hp = p / 2.0
    rh = p * math.sqrt(3) / 2.0
    nrows = math.ceil(h / rh - 1e-12)
    ncols = math.ceil(w / p) + 2

    def v(i, j):
        return (x0 + (2 * i + (j % 2)) * hp, y0 + j * rh)

    for j in range(nrows):
        for i in range(-1, ncols):
            if j % 2 == 0:
                yield [v(i, j), v(i + 1, j), v(i, j + 1)]
                yield [v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]
            else:
                yield [v(i, j), v(i + 1, j), v(i + 1, j + 1)]
                yield [v(i, j), v(i + 1, j + 1), v(i, j + 1)]


def _hexagon_cells(x0, y0, w, h, p):
    # pointy-top hexagons, centre spacing p; circumradius a = p / sqrt(3)
    hp = p / 2.0
    qa = p / math.sqrt(3) / 2.0  # a / 2
    nrows = math.ceil(h / (3 * qa)) + 2
    ncols = math.ceil(w / p) + 2

    def v(kx, my):
        return (x0 + kx * hp, y0 + my * qa)

    for r in range(-1, nrows):
        for c in range(-1, ncols):
            kx = 2 * c + (r % 2)
            my = 3 * r
            yield [v(kx, my - 2), v(kx + 1, my - 1), v(kx + 1, my + 1),
                   v(kx, my + 2), v(kx - 1, my + 1), v(kx - 1, my - 1)]


_TILINGS = {"square": _square_cells, "triangle": _triangle_cells, "hexagon": _hexagon_cells}


def gen_voronoi(bounds: Bounds, cell: str = "square", pitch_mm: float = 2.5,
                edge_color: RGB = WHITE, stiffness: Stiffness = Stiffness.rigid) -> MarkerLayout:
    """Regular polygonal tessellation of ``bounds`` stored as polygon markers.

    ``pitch_mm`` is the side length for squares and triangles and the
    centre-to-centre spacing for hexagons.
    """
    _check_bounds(bounds)
    if cell not in _TILINGS:
        raise ValueError(f"cell must be one of {sorted(_TILINGS)}")
    x0, y0, x1, y1 = map(float, bounds)
    w, h = x1 - x0, y1 - y0
    if not (0 < pitch_mm <= min(w, h) / 2):
        raise PitchError(f"pitch {pitch_mm} mm must lie in (0, {min(w, h) / 2:g}]")
    rect = (x0, y0, x1, y1)
    markers = []
    for verts in _TILINGS[cell](x0, y0, w, h, pitch_mm):
        clipped = clip_polygon_to_rect(verts, rect)
        if len(clipped) < 3 or polygon_area(clipped) <= 1e-12:
            continue
        if polygon_area(clipped) < 0:
            clipped = clipped[::-1]
        markers.append(Marker(id=len(markers), layer=0, geometry=Polygon(tuple(clipped)),
                              color=edge_color, stiffness=stiffness))
    return MarkerLayout(markers=tuple(markers), kind=LayoutKind.voronoi, bounds=rect)


DEFAULT_AXIS_COLORS: tuple[RGB, RGB, RGB] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.4, 1.0))


def gen_coordinate_markers(bounds: Bounds, rows: int, cols: int, pointer_len_mm: float,
                           colors: tuple[RGB, RGB, RGB] = DEFAULT_AXIS_COLORS,
                           hub_color: RGB = WHITE, stiffness: Stiffness = Stiffness.rigid) -> MarkerLayout:
    _check_bounds(bounds)
    if not pointer_len_mm > 0:
        raise ValueError("pointer_len_mm must be > 0")
    x0, y0, x1, y1 = bounds
    px, py = (x1 - x0) / cols, (y1 - y0) / rows
    # tips must stay clear of the neighbouring hub
    if min(px, py) <= 1.25 * pointer_len_mm:
        raise PitchError(f"pitch {min(px, py):.4g} mm too small for {pointer_len_mm} mm pointers")
    L = float(pointer_len_mm)
    markers = []
    for j in range(rows):
        for i in range(cols):
            o = (x0 + (i + 0.5) * px, y0 + (j + 0.5) * py, 0.0)
            ends = ((o[0] + L, o[1], 0.0), (o[0], o[1] + L, 0.0), (o[0], o[1], L))
            markers.append(Marker(id=len(markers), layer=0, geometry=Frame(o, ends, tuple(colors)),
                                  color=hub_color, stiffness=stiffness))
    return MarkerLayout(markers=tuple(markers), kind=LayoutKind.coordinate,
                        bounds=tuple(map(float, bounds)), min_clearance=min(px, py) - L)


def transform_coordinate_marker(marker: Marker, rotation, translation=(0.0, 0.0, 0.0)) -> Marker:
    """Rotate a frame about its hub, then translate it."""
    g = marker.geometry
    if not isinstance(g, Frame):
        raise TypeError("transform_coordinate_marker needs a Frame marker")
    R = np.asarray(rotation, dtype=np.float64)
    t = np.asarray(translation, dtype=np.float64)
    o = np.asarray(g.origin) + t
    axes = g.axes @ R.T
    ends = tuple(tuple(map(float, o + a)) for a in axes)
    return replace(marker, geometry=Frame(tuple(map(float, o)), ends, g.axis_colors))


# ---------------------------------------------------------------------------

def region_for(cfg: SensorConfig) -> Bounds:
    """Marker region centred in the sensing area, ``cols*pitch`` by ``rows*pitch``."""
    ms = cfg.markers
    w, h = cfg.sensing_area
    mw, mh = ms.cols * ms.pitch_mm, ms.rows * ms.pitch_mm
    return ((w - mw) / 2, (h - mh) / 2, (w + mw) / 2, (h + mh) / 2)


def build_layout(cfg: SensorConfig) -> MarkerLayout:
    """Generate the layout described by ``cfg.markers``."""
    ms = cfg.markers
    if ms is None:
        raise ValueError(f"{cfg.name} has no markers")
    bounds = region_for(cfg)
    if ms.kind is LayoutKind.dot:
        return gen_dot_layout(bounds, Uniform(ms.rows, ms.cols), ms.radius_mm, ms.stiffness,
                              color=ms.colors[0])
    if ms.kind is LayoutKind.double_layer:
        return gen_double_layer(bounds, Uniform(ms.rows, ms.cols), ms.separation_mm,
                                (ms.colors[0], ms.colors[1]), ms.stiffness, ms.radius_mm, stagger=True)
    if ms.kind is LayoutKind.voronoi:
        return gen_voronoi(bounds, ms.cell, ms.pitch_mm, ms.colors[0], ms.stiffness)
    hub, *axes = ms.colors if len(ms.colors) == 4 else (WHITE, *DEFAULT_AXIS_COLORS)
    return gen_coordinate_markers(bounds, ms.rows, ms.cols, ms.pointer_len_mm, tuple(axes), hub,
                                  ms.stiffness)


def _extent(m: Marker) -> tuple[float, float, float, float]:
    g = m.geometry
    if isinstance(g, Disk):
        (x, y), r = g.center, g.radius
        return (x - r, y - r, x + r, y + r)
    pts = np.asarray(g.vertices if isinstance(g, Polygon) else (g.origin, *g.endpoints))[:, :2]
    return (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())


def validate_layout(layout: MarkerLayout, cfg: SensorConfig, tol: float = 1e-9) -> list[Violation]:
    out: list[Violation] = []
    W, H = cfg.sensing_area
    bx0, by0, bx1, by1 = layout.bounds
    for m in layout.markers:
        x0, y0, x1, y1 = _extent(m)
        if x0 < -tol or y0 < -tol or x1 > W + tol or y1 > H + tol:
            out.append(Violation(Severity.error, f"marker {m.id} extends outside the sensing area"))
        elif x0 < bx0 - tol or y0 < by0 - tol or x1 > bx1 + tol or y1 > by1 + tol:
            out.append(Violation(Severity.error, f"marker {m.id} extends outside the layout bounds"))
    thickness = cfg.elastomer.thickness
    if layout.n_layers > 1:
        sep = layout.layer_separation
        if not sep < thickness:
            out.append(Violation(Severity.error,
                                 f"layer separation {sep:g} mm is not below elastomer thickness {thickness:g} mm"))
        elif (layout.n_layers - 1) * sep >= thickness:
            out.append(Violation(Severity.error, "marker layers do not fit inside the elastomer"))
    for k in range(layout.n_layers):
        disks = [m for m in layout.layer(k) if isinstance(m.geometry, Disk)]
        if len(disks) < 2:
            continue
        c = np.array([m.geometry.center for m in disks])
        r = np.array([m.geometry.radius for m in disks])
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1)) - r[:, None] - r[None, :]
        np.fill_diagonal(d, np.inf)
        if d.min() < layout.min_clearance - 1e-9:
            out.append(Violation(Severity.error,
                                 f"layer {k} clearance {d.min():.4g} mm below minimum {layout.min_clearance:.4g} mm"))
    if layout.kind is LayoutKind.voronoi and layout.markers:
        area = sum(m.geometry.area for m in layout.markers)
        target = (bx1 - bx0) * (by1 - by0)
        if abs(area - target) > 1e-6 * max(1.0, len(layout.markers)):
            out.append(Violation(Severity.error, f"tessellation area {area:.9g} != bounds area {target:.9g}"))
    return out
