"""Shared domain types, sensor presets and config validation.

Coordinates
-----------
Everything geometric lives in the *sensing-area frame*: millimetres, origin
at one corner of the sensing area, ``x`` along its width and ``y`` along its
height, ``z`` pointing out of the skin (away from the camera).  The camera
raster is centred on the sensing area; pixel ``(row j, col i)`` has its centre
at ``origin + (i, j) * mm_per_px`` (see :func:`raster_origin`).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

RGB = tuple[float, float, float]

WHITE: RGB = (1.0, 1.0, 1.0)
BLACK: RGB = (0.0, 0.0, 0.0)
MAGENTA: RGB = (1.0, 0.0, 1.0)


class Mechanism(str, enum.Enum):
    IMM = "IMM"
    MDM = "MDM"
    IMM_MDM = "IMM_MDM"
    MDM_MFM = "MDM_MFM"
    IMM_MFM = "IMM_MFM"

    @property
    def has_imm(self) -> bool:
        return "IMM" in self.value

    @property
    def has_mdm(self) -> bool:
        return "MDM" in self.value

    @property
    def has_mfm(self) -> bool:
        return "MFM" in self.value


class Variant(str, enum.Enum):
    C_Tac = "c-tac"
    C_Sight = "c-sight"
    C_SighTac = "c-sightac"
    Vi_C_Tac = "vi-c-tac"
    Vi_C_Sight = "vi-c-sight"

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key or v.name.lower().replace("_", "-") == key:
                return v
        raise ValueError(f"unknown sensor variant {text!r}; choose from "
                         + ", ".join(v.value for v in cls))


class Stiffness(str, enum.Enum):
    rigid = "rigid"
    flexible = "flexible"


class LayoutKind(str, enum.Enum):
    dot = "dot"
    double_layer = "double_layer"
    voronoi = "voronoi"
    coordinate = "coordinate"


class Severity(str, enum.Enum):
    error = "error"
    warning = "warning"


@dataclass(frozen=True)
class Violation:
    severity: Severity
    message: str

    def __str__(self) -> str:
        return f"{self.severity.value}: {self.message}"


@dataclass(frozen=True)
class ElastomerSpec:
    thickness: float
    clarity: float
    stiffness: float  # Shore-A-like; only scales lateral compliance
    refractive_ratio: float


@dataclass(frozen=True)
class SkinSpec:
    thickness: float
    transparency: float
    color: RGB


@dataclass(frozen=True)
class IlluminationSpec:
    mode: str  # "white" | "rgb"
    base_intensity: RGB


@dataclass(frozen=True)
class CameraSpec:
    resolution: tuple[int, int]  # (px_w, px_h)
    mm_per_px: float
    # distance from the camera to the rest surface plane; only used by the
    # scaled-orthographic projection of coordinate markers
    working_distance_mm: float = 20.0


@dataclass(frozen=True)
class ImmParams:
    """Layered-intensity (translucent layer) response: I = I_bg - gain * depth."""

    d_max: float
    gain: float


@dataclass(frozen=True)
class TirParams:
    gain: float  # brightness per unit depth gradient
    contact_lift: float  # uniform brightening where TIR is frustrated
    threshold_mm: float  # depth above which a pixel counts as in contact


@dataclass(frozen=True)
class MechanicsParams:
    sigma_mm: float = 2.0
    kappa: float = 1.0
    layer_decay: float = 0.6
    flex_gain: float = 0.2


@dataclass(frozen=True)
class MarkerSpec:
    """Recipe for the marker layout embedded in a sensor.

    ``colors`` holds one color per layer (dot / double layer), the edge color
    (voronoi) or ``(hub, x, y, z)`` (coordinate).
    """

    kind: LayoutKind
    rows: int
    cols: int
    pitch_mm: float
    radius_mm: float = 0.5
    stiffness: Stiffness = Stiffness.rigid
    colors: tuple[RGB, ...] = (WHITE,)
    separation_mm: float = 1.5
    cell: str = "square"
    pointer_len_mm: float = 3.0


@dataclass(frozen=True)
class SensorConfig:
    name: str
    mechanism: Mechanism
    sensing_area: tuple[float, float]
    elastomer: ElastomerSpec
    skin: SkinSpec
    illumination: IlluminationSpec
    camera: CameraSpec
    markers: MarkerSpec | None = None
    imm: ImmParams | None = None
    tir: TirParams | None = None
    mechanics: MechanicsParams = field(default_factory=MechanicsParams)

    @property
    def shape(self) -> tuple[int, int]:
        """Raster shape as ``(rows, cols)``."""
        w, h = self.camera.resolution
        return (h, w)


# ---------------------------------------------------------------------------
# raster geometry

def raster_origin(cfg: SensorConfig) -> tuple[float, float]:
    """Sensing-area coordinates (mm) of the centre of pixel (0, 0)."""
    s = cfg.camera.mm_per_px
    w_px, h_px = cfg.camera.resolution
    ox = (cfg.sensing_area[0] - w_px * s) / 2.0 + 0.5 * s
    oy = (cfg.sensing_area[1] - h_px * s) / 2.0 + 0.5 * s
    return (ox, oy)


def pixel_grid(cfg: SensorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X, Y)`` mm coordinates of every pixel centre, shape ``(rows, cols)``."""
    ox, oy = raster_origin(cfg)
    s = cfg.camera.mm_per_px
    w_px, h_px = cfg.camera.resolution
    xs = ox + np.arange(w_px) * s
    ys = oy + np.arange(h_px) * s
    return np.meshgrid(xs, ys)


def mm_to_px(cfg: SensorConfig, x, y):
    ox, oy = raster_origin(cfg)
    s = cfg.camera.mm_per_px
    return (np.asarray(x) - ox) / s, (np.asarray(y) - oy) / s


def px_to_mm(cfg: SensorConfig, px, py):
    ox, oy = raster_origin(cfg)
    s = cfg.camera.mm_per_px
    return ox + np.asarray(px) * s, oy + np.asarray(py) * s


# ---------------------------------------------------------------------------
# presets

_CAMERA = CameraSpec(resolution=(480, 480), mm_per_px=0.1)
_DIGIT_RGB = IlluminationSpec(mode="rgb", base_intensity=(0.9, 0.86, 0.82))
_SIX_WHITE = IlluminationSpec(mode="white", base_intensity=(0.9, 0.9, 0.9))
_BLACK_SKIN = SkinSpec(thickness=0.5, transparency=0.0, color=BLACK)
# multi-layer grid core lowers the effective hardness below solid Agilus30 (30A)
_GRID_CORE = ElastomerSpec(thickness=4.0, clarity=0.95, stiffness=10.0, refractive_ratio=1.47)

RED: RGB = (0.85, 0.1, 0.1)


def _imm_for(illum: IlluminationSpec, d_max: float = 1.5) -> ImmParams:
    i_bg = float(np.mean(illum.base_intensity))
    return ImmParams(d_max=d_max, gain=i_bg / d_max)


def preset(variant: Variant | str) -> SensorConfig:
    """Return the default config for one of the five sensor variants."""
    variant = Variant.parse(variant) if isinstance(variant, str) else variant
    if variant is Variant.C_Tac:
        return SensorConfig(
            name="C-Tac",
            mechanism=Mechanism.MDM,
            sensing_area=(34.0, 27.0),
            elastomer=_GRID_CORE,
            skin=_BLACK_SKIN,
            illumination=_DIGIT_RGB,
            camera=_CAMERA,
            markers=MarkerSpec(kind=LayoutKind.dot, rows=7, cols=7, pitch_mm=2.5,
                               radius_mm=0.5, stiffness=Stiffness.flexible, colors=(WHITE,)),
        )
    if variant is Variant.C_Sight:
        return SensorConfig(
            name="C-Sight",
            mechanism=Mechanism.IMM,
            sensing_area=(26.5, 26.5),
            elastomer=ElastomerSpec(thickness=3.0, clarity=0.95, stiffness=10.0, refractive_ratio=1.47),
            skin=_BLACK_SKIN,
            illumination=_SIX_WHITE,
            camera=_CAMERA,
            imm=_imm_for(_SIX_WHITE),
        )
    if variant is Variant.C_SighTac:
        return SensorConfig(
            name="C-SighTac",
            mechanism=Mechanism.IMM_MDM,
            sensing_area=(26.5, 26.5),
            elastomer=ElastomerSpec(thickness=3.0, clarity=0.95, stiffness=10.0, refractive_ratio=1.47),
            skin=_BLACK_SKIN,
            illumination=_SIX_WHITE,
            camera=_CAMERA,
            markers=MarkerSpec(kind=LayoutKind.dot, rows=7, cols=7, pitch_mm=2.5,
                               radius_mm=0.5, stiffness=Stiffness.rigid, colors=(RED,)),
            imm=_imm_for(_SIX_WHITE),
        )
    if variant is Variant.Vi_C_Tac:
        return SensorConfig(
            name="Vi-C-Tac",
            mechanism=Mechanism.MDM_MFM,
            sensing_area=(34.0, 27.0),
            elastomer=ElastomerSpec(thickness=4.0, clarity=0.9, stiffness=10.0, refractive_ratio=1.47),
            skin=SkinSpec(thickness=0.5, transparency=1.0, color=WHITE),
            illumination=_DIGIT_RGB,
            camera=_CAMERA,
            markers=MarkerSpec(kind=LayoutKind.double_layer, rows=7, cols=7, pitch_mm=2.5,
                               radius_mm=0.5, stiffness=Stiffness.flexible,
                               colors=(WHITE, MAGENTA), separation_mm=1.5),
        )
    # Vi_C_Sight: pure Agilus30 Clear, no skin layer to speak of
    return SensorConfig(
        name="Vi-C-Sight",
        mechanism=Mechanism.IMM_MFM,
        sensing_area=(34.0, 27.0),
        elastomer=ElastomerSpec(thickness=3.0, clarity=0.97, stiffness=30.0, refractive_ratio=1.47),
        skin=SkinSpec(thickness=0.0, transparency=1.0, color=WHITE),
        illumination=_DIGIT_RGB,
        camera=_CAMERA,
        tir=TirParams(gain=0.3, contact_lift=0.2, threshold_mm=0.02),
    )


# ---------------------------------------------------------------------------
# validation

# (component, required-for predicate); presence outside the predicate is an error too
_COMPONENT_RULES = (
    ("markers", lambda m: m.has_mdm),
    ("imm", lambda m: m in (Mechanism.IMM, Mechanism.IMM_MDM)),
    ("tir", lambda m: m is Mechanism.IMM_MFM),
)

ELASTOMER_RECOMMENDED_MM = (2.0, 5.0)
ELASTOMER_OPTIMAL_MM = (2.0, 3.0)


def _in01(v: float) -> bool:
    return 0.0 <= v <= 1.0


def validate_config(cfg: SensorConfig) -> list[Violation]:
    """Check every invariant of ``cfg``; returns errors and advisory warnings."""
    out: list[Violation] = []

    def err(msg):
        out.append(Violation(Severity.error, msg))

    def warn(msg):
        out.append(Violation(Severity.warning, msg))

    try:
        mech = Mechanism(cfg.mechanism)
    except ValueError:
        err(f"unknown mechanism {cfg.mechanism!r}")
        return out

    for attr, required in _COMPONENT_RULES:
        present = getattr(cfg, attr) is not None
        if required(mech) and not present:
            err(f"{mech.value} requires {attr}")
        elif present and not required(mech):
            err(f"{mech.value} forbids {attr}")
    transparent = cfg.skin.transparency > 0
    if mech.has_mfm and not transparent:
        err(f"{mech.value} requires skin transparency > 0")
    elif transparent and not mech.has_mfm:
        err(f"{mech.value} requires an opaque skin (transparency 0)")

    w, h = cfg.sensing_area
    if not (w > 0 and h > 0):
        err(f"sensing_area must be positive, got {cfg.sensing_area}")

    el = cfg.elastomer
    if not (0 < el.thickness <= 30):
        err(f"elastomer thickness {el.thickness} mm outside (0, 30]")
    elif not (ELASTOMER_RECOMMENDED_MM[0] <= el.thickness <= ELASTOMER_RECOMMENDED_MM[1]):
        lo, hi = ELASTOMER_RECOMMENDED_MM
        warn(f"elastomer thickness {el.thickness} mm outside the recommended {lo:g}-{hi:g} mm range "
             "(image quality drops for thicker printed elastomers)")
    if not _in01(el.clarity):
        err(f"elastomer clarity {el.clarity} outside [0, 1]")
    if not el.stiffness > 0:
        err(f"elastomer stiffness must be > 0, got {el.stiffness}")
    if not el.refractive_ratio > 1:
        err(f"refractive_ratio must be > 1, got {el.refractive_ratio}")

    sk = cfg.skin
    if not sk.thickness >= 0:
        err(f"skin thickness must be >= 0, got {sk.thickness}")
    if not _in01(sk.transparency):
        err(f"skin transparency {sk.transparency} outside [0, 1]")
    if not all(_in01(c) for c in sk.color):
        err("skin color channels must lie in [0, 1]")

    il = cfg.illumination
    if il.mode not in ("white", "rgb"):
        err(f"illumination mode must be 'white' or 'rgb', got {il.mode!r}")
    if len(il.base_intensity) != 3 or not all(_in01(c) for c in il.base_intensity):
        err("illumination base_intensity must be three values in [0, 1]")

    cam = cfg.camera
    px_w, px_h = cam.resolution
    if px_w < 16 or px_h < 16:
        err(f"camera resolution {cam.resolution} below 16x16")
    if not cam.mm_per_px > 0:
        err(f"camera mm_per_px must be > 0, got {cam.mm_per_px}")
    elif px_w * cam.mm_per_px < w or px_h * cam.mm_per_px < h:
        err(f"camera field {px_w * cam.mm_per_px:g}x{px_h * cam.mm_per_px:g} mm does not cover "
            f"sensing area {w:g}x{h:g} mm")
    if not cam.working_distance_mm > 0:
        err("camera working_distance_mm must be > 0")

    if cfg.imm is not None:
        if not cfg.imm.gain > 0:
            err("imm gain must be > 0")
        if not cfg.imm.d_max > 0:
            err("imm d_max must be > 0")
    if cfg.tir is not None:
        if cfg.tir.gain < 0 or cfg.tir.contact_lift < 0 or cfg.tir.threshold_mm < 0:
            err("tir parameters must be non-negative")

    mp = cfg.mechanics
    if not (mp.sigma_mm > 0 and mp.kappa >= 0 and 0 < mp.layer_decay <= 1 and mp.flex_gain >= 0):
        err("mechanics parameters out of range (sigma>0, kappa>=0, 0<layer_decay<=1, flex_gain>=0)")

    ms = cfg.markers
    if ms is not None:
        if ms.rows < 1 or ms.cols < 1 or not ms.pitch_mm > 0 or not ms.radius_mm > 0:
            err("marker rows/cols must be >= 1 and pitch/radius > 0")
        else:
            if ms.kind in (LayoutKind.dot, LayoutKind.double_layer) and ms.pitch_mm <= 2 * ms.radius_mm:
                err(f"marker pitch {ms.pitch_mm} mm must exceed the diameter {2 * ms.radius_mm} mm")
            if ms.cols * ms.pitch_mm > w or ms.rows * ms.pitch_mm > h:
                err("marker grid does not fit in the sensing area")
        if ms.kind is LayoutKind.double_layer and not (0 < ms.separation_mm < el.thickness):
            err(f"double-layer separation {ms.separation_mm} mm must lie in (0, elastomer thickness)")
    return out


def errors_only(violations: list[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity is Severity.error]
