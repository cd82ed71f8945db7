"""Rendering of tactile images for each sensing mechanism, plus optical helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _backend
from .contact import DepthField
from .core import Mechanism, SensorConfig, mm_to_px
from .errors import DimensionMismatchError, MechanismMismatchError, TotalInternalReflection
from .markers import Disk, Frame, Marker, MarkerLayout, Polygon

SUPERSAMPLE = 8
POLYGON_EDGE_MM = 0.3
# tips wider than the hub so the z tip always shows as a rim around it
FRAME_HUB_MM = 0.25
FRAME_TIP_MM = 0.4
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class TactileImage:
    pixels: np.ndarray  # (rows, cols, 3) in [0, 1]
    mechanism: str = ""
    frame_id: int = 0

    @property
    def shape(self):
        return self.pixels.shape[:2]

    def luma(self) -> np.ndarray:
        return to_luma(self.pixels)


@dataclass(frozen=True, eq=False)
class BackgroundScene:
    image: np.ndarray  # (rows, cols, 3) in [0, 1]
    distance_factor: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.distance_factor <= 1.0:
            raise ValueError("distance_factor must lie in [0, 1]")
        if self.image.min() < 0 or self.image.max() > 1:
            raise ValueError("background channels must lie in [0, 1]")

    @property
    def radiance(self) -> np.ndarray:
        return self.image * self.distance_factor


@dataclass(frozen=True)
class LensTextureParams:
    stripe_pitch_px: float
    amplitude_px: float
    orientation: str = "x"
    seed: int = 0

    def __post_init__(self):
        if not self.stripe_pitch_px > 0:
            raise ValueError("stripe_pitch_px must be > 0")
        if not 0 <= self.amplitude_px < self.stripe_pitch_px:
            raise ValueError("amplitude_px must lie in [0, stripe_pitch_px)")
        if self.orientation not in ("x", "y"):
            raise ValueError("orientation must be 'x' or 'y'")


def to_luma(pixels: np.ndarray) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim == 2:
        return pixels
    return pixels @ LUMA


def quantize8(pixels: np.ndarray) -> np.ndarray:
    """Round-trip through 8-bit channels, as a PNG write/read would."""
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0) / 255.0


def refract_angle(theta_incident: float, n_ratio: float) -> float:
    """Refraction angle for ``sin(theta) / sin(theta_l) = n_ratio``.

    Raises :class:`TotalInternalReflection` when ``sin(theta) > n_ratio``.
    """
    if not n_ratio > 0:
        raise ValueError("n_ratio must be > 0")
    s = math.sin(theta_incident)
    if s > n_ratio:
        raise TotalInternalReflection(theta_incident, n_ratio)
    return math.asin(s / n_ratio)


# ---------------------------------------------------------------------------
# intensity mapping

def _require(cfg: SensorConfig, allowed, what):
    if Mechanism(cfg.mechanism) not in allowed:
        raise MechanismMismatchError(f"{what} does not apply to {cfg.name} ({cfg.mechanism.value})")


def render_imm(depth: DepthField, cfg: SensorConfig, frame_id: int = 0) -> TactileImage:
    """Translucent-layer darkening: ``I = clamp(I_bg - gain * d, 0, 1)`` per channel."""
    _require(cfg, (Mechanism.IMM, Mechanism.IMM_MDM), "render_imm")
    i_bg = np.asarray(cfg.illumination.base_intensity, dtype=np.float64)
    d = depth.grid[:, :, None]
    pix = np.clip(i_bg[None, None, :] - cfg.imm.gain * d, 0.0, 1.0)
    # exact black from d = I_bg / gain on, whatever the rounding of the product
    pix[d >= i_bg / cfg.imm.gain] = 0.0
    return TactileImage(pix, cfg.mechanism.value, frame_id)


def render_tir(depth: DepthField, cfg: SensorConfig, background: BackgroundScene,
               frame_id: int = 0) -> TactileImage:
    """Clear-elastomer rendering: see-through background plus frustrated-TIR brightening.

    Inside the contact (``d > threshold``) the image is lifted by a constant
    and by ``gain * |grad d|``, so texture edges light up strongest.
    """
    _require(cfg, (Mechanism.IMM_MFM,), "render_tir")
    _check_shape(background.image.shape[:2], cfg.shape)
    tp = cfg.tir
    pix = background.radiance * cfg.elastomer.clarity
    d = depth.grid
    contact = d > tp.threshold_mm
    if contact.any():
        gy, gx = np.gradient(d, depth.mm_per_px)
        boost = tp.contact_lift + tp.gain * np.hypot(gx, gy)
        pix = pix + np.where(contact, boost, 0.0)[:, :, None]
    return TactileImage(np.clip(pix, 0.0, 1.0), cfg.mechanism.value, frame_id)


def tir_boost(depth: DepthField, cfg: SensorConfig) -> np.ndarray:
    """The gradient term of :func:`render_tir` alone (zero outside contact)."""
    d = depth.grid
    gy, gx = np.gradient(d, depth.mm_per_px)
    return np.where(d > cfg.tir.threshold_mm, cfg.tir.gain * np.hypot(gx, gy), 0.0)


# ---------------------------------------------------------------------------
# marker rasterisation

def _check_shape(a, b):
    if tuple(a) != tuple(b):
        raise DimensionMismatchError(f"raster shapes differ: {tuple(a)} vs {tuple(b)}")


def _splat(pix: np.ndarray, cov_fn, bbox, color):
    rows, cols = pix.shape[:2]
    i0, j0, i1, j1 = bbox
    i0, j0 = max(i0, 0), max(j0, 0)
    i1, j1 = min(i1, cols), min(j1, rows)
    if i1 <= i0 or j1 <= j0:
        return
    cov = cov_fn(i0, j0, i1 - i0, j1 - j0)
    if not cov.any():
        return
    win = pix[j0:j1, i0:i1]
    c = cov[:, :, None]
    win *= 1.0 - c
    win += c * np.asarray(color, dtype=np.float64)


def draw_disk(pix, cx, cy, r, color):
    bbox = (int(math.floor(cx - r)) - 1, int(math.floor(cy - r)) - 1,
            int(math.ceil(cx + r)) + 2, int(math.ceil(cy + r)) + 2)
    _splat(pix, lambda i0, j0, nx, ny: _backend.disk_coverage(cx, cy, r, i0, j0, nx, ny, SUPERSAMPLE),
           bbox, color)


def draw_segment(pix, ax, ay, bx, by, hw, color):
    bbox = (int(math.floor(min(ax, bx) - hw)) - 1, int(math.floor(min(ay, by) - hw)) - 1,
            int(math.ceil(max(ax, bx) + hw)) + 2, int(math.ceil(max(ay, by) + hw)) + 2)
    _splat(pix, lambda i0, j0, nx, ny: _backend.capsule_coverage(ax, ay, bx, by, hw, i0, j0, nx, ny,
                                                                 SUPERSAMPLE),
           bbox, color)


def project_frame(frame: Frame, cfg: SensorConfig) -> np.ndarray:
    """Scaled-orthographic image of a coordinate marker.

    Returns ``(4, 2)`` pixel positions: hub, then x/y/z tips.  The pointer
    vectors are magnified by ``W / (W + z)`` where ``z`` is the hub height
    above the rest plane and ``W`` the camera working distance.
    """
    s = cfg.camera.mm_per_px
    W = cfg.camera.working_distance_mm
    ox, oy = mm_to_px(cfg, frame.origin[0], frame.origin[1])
    m = W / (W + frame.origin[2])
    tips = np.array([float(ox), float(oy)]) + m * frame.axes[:, :2] / s
    return np.vstack([[float(ox), float(oy)], tips])


def _draw_marker(pix, m: Marker, cfg: SensorConfig):
    s = cfg.camera.mm_per_px
    g = m.geometry
    if isinstance(g, Disk):
        cx, cy = mm_to_px(cfg, *g.center)
        draw_disk(pix, float(cx), float(cy), g.radius / s, m.color)
    elif isinstance(g, Polygon):
        v = np.asarray(g.vertices)
        px, py = mm_to_px(cfg, v[:, 0], v[:, 1])
        hw = POLYGON_EDGE_MM / 2 / s
        n = len(v)
        for k in range(n):
            draw_segment(pix, px[k], py[k], px[(k + 1) % n], py[(k + 1) % n], hw, m.color)
    else:
        pts = project_frame(g, cfg)
        z = np.array([g.origin[2], *(e[2] for e in g.endpoints)])
        radii = (FRAME_HUB_MM / s,) + (FRAME_TIP_MM / s,) * 3
        colors = (m.color,) + tuple(g.axis_colors)
        # farthest from the camera first
        for k in sorted(range(4), key=lambda k: (-z[k], k)):
            draw_disk(pix, pts[k, 0], pts[k, 1], radii[k], colors[k])


def _draw_layout(pix, layout: MarkerLayout, cfg: SensorConfig):
    # deeper layers first so shallower ones occlude them
    for m in sorted(layout.markers, key=lambda m: (m.layer, m.id)):
        _draw_marker(pix, m, cfg)


def render_mdm(layout: MarkerLayout, cfg: SensorConfig, background: BackgroundScene | None = None,
               frame_id: int = 0, base: np.ndarray | None = None) -> TactileImage:
    """Rasterise (displaced) markers over the skin or the see-through scene.

    ``base`` replaces the skin/background composite; used for IMM+MDM where
    markers sit over the intensity-mapped layer.
    """
    if cfg.markers is None or not Mechanism(cfg.mechanism).has_mdm:
        raise MechanismMismatchError(f"render_mdm needs a marker-bearing mechanism, got {cfg.mechanism.value}")
    t = cfg.skin.transparency
    if background is not None and t <= 0:
        raise MechanismMismatchError("a background scene needs a transparent skin")
    rows, cols = cfg.shape
    if base is not None:
        _check_shape(base.shape[:2], cfg.shape)
        pix = np.array(base, dtype=np.float64, copy=True)
    else:
        skin = np.asarray(cfg.skin.color, dtype=np.float64)
        pix = np.empty((rows, cols, 3))
        pix[...] = (1.0 - t) * skin
        if background is not None:
            _check_shape(background.image.shape[:2], cfg.shape)
            pix += t * (background.radiance * cfg.elastomer.clarity)
    _draw_layout(pix, layout, cfg)
    return TactileImage(np.clip(pix, 0.0, 1.0), cfg.mechanism.value, frame_id)


def render_frame(cfg: SensorConfig, depth: DepthField, layout: MarkerLayout | None = None,
                 background: BackgroundScene | None = None, frame_id: int = 0) -> TactileImage:
    """Render whatever the sensor's mechanism produces for one contact state."""
    mech = Mechanism(cfg.mechanism)
    if mech is Mechanism.IMM:
        return render_imm(depth, cfg, frame_id)
    if mech is Mechanism.IMM_MDM:
        base = render_imm(depth, cfg, frame_id).pixels
        return render_mdm(layout, cfg, None, frame_id, base=base)
    if mech is Mechanism.IMM_MFM:
        if background is None:
            background = BackgroundScene(np.full(cfg.shape + (3,), 0.5))
        return render_tir(depth, cfg, background, frame_id)
    return render_mdm(layout, cfg, background, frame_id)


# ---------------------------------------------------------------------------
# lens texture and image similarity

def lens_shifts(n: int, params: LensTextureParams) -> np.ndarray:
    phase = np.random.default_rng(params.seed).uniform(0.0, 2 * math.pi)
    return params.amplitude_px * np.sin(2 * math.pi * np.arange(n) / params.stripe_pitch_px + phase)


def apply_lens_distortion(img: TactileImage, params: LensTextureParams) -> TactileImage:
    """Shift every scanline sideways by a sinusoid, mimicking printed lens striations."""
    pix = img.pixels
    if params.amplitude_px == 0:
        return TactileImage(pix.copy(), img.mechanism, img.frame_id)
    if params.orientation == "x":
        out = _backend.shift_rows_linear(pix, lens_shifts(pix.shape[0], params))
    else:
        t = np.ascontiguousarray(np.swapaxes(pix, 0, 1))
        out = np.swapaxes(_backend.shift_rows_linear(t, lens_shifts(t.shape[0], params)), 0, 1)
    return TactileImage(np.ascontiguousarray(out), img.mechanism, img.frame_id)


def ssim(a, b, window_px: int = 7) -> float:
    """Mean local SSIM over a ``window_px`` box window (valid region only), L = 1."""
    pa = a.pixels if isinstance(a, TactileImage) else np.asarray(a)
    pb = b.pixels if isinstance(b, TactileImage) else np.asarray(b)
    if pa.shape != pb.shape:
        raise DimensionMismatchError(f"image shapes differ: {pa.shape} vs {pb.shape}")
    if window_px < 3 or window_px % 2 == 0:
        raise ValueError("window_px must be odd and >= 3")
    x = to_luma(pa)
    y = to_luma(pb)
    if min(x.shape) < window_px:
        raise DimensionMismatchError("image smaller than the SSIM window")
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2
    f = lambda z: ndimage.uniform_filter(z, size=window_px, mode="reflect")  # noqa: E731
    mx, my = f(x), f(y)
    sxx = f(x * x) - mx * mx
    syy = f(y * y) - my * my
    sxy = f(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    h = window_px // 2
    smap = (num / den)[h:-h, h:-h]
    return float(smap.mean())
