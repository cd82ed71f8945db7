"""End-to-end runs: one simulated contact, and seeded synthetic datasets."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contact import (
    DEFAULT_SHAPES,
    INDENTER_KINDS,
    ContactPose,
    DeformationField,
    DepthField,
    IndenterShape,
    compute_depth_field,
    compute_displacement_field,
    contact_support,
    displace_markers,
)
from .core import WHITE, LayoutKind, Mechanism, SensorConfig, mm_to_px, raster_origin
from .errors import ConfigError, InsufficientDataError, SchemaVersionError
from .markers import DEFAULT_AXIS_COLORS, Frame, MarkerLayout, build_layout
from .optics import BackgroundScene, TactileImage, project_frame, quantize8, render_frame
from .perception import (
    FEATURE_NAMES,
    OBJECT_FEATURES,
    TEXTURE_FEATURES,
    FeatureVector,
    classify,
    confusion_matrix,
    detect_markers,
    estimate_depth_from_intensity,
    extract_features,
    match_markers,
    segment_contact_tir,
    train_classifier,
)
from .scenes import FABRICS, fabric


@dataclass(eq=False)
class SimulationResult:
    cfg: SensorConfig
    reference: TactileImage
    contact: TactileImage
    depth: DepthField
    deformation: DeformationField
    layout: MarkerLayout | None
    displaced: MarkerLayout | None
    contact_mask: np.ndarray
    background: BackgroundScene | None = None

    def marker_displacements_px(self) -> np.ndarray:
        """Ground-truth rows ``(id, layer, ref_x, ref_y, cur_x, cur_y)`` in pixels."""
        if self.layout is None:
            return np.zeros((0, 6))
        return _marker_rows(self.layout, self.displaced, self.cfg)


def _marker_px(m, cfg):
    g = m.geometry
    if isinstance(g, Frame):
        return tuple(project_frame(g, cfg)[0])
    x, y = mm_to_px(cfg, *m.center)
    return float(x), float(y)


def _marker_rows(ref: MarkerLayout, cur: MarkerLayout, cfg: SensorConfig) -> np.ndarray:
    rows = []
    for a, b in zip(ref.markers, cur.markers):
        rows.append((a.id, a.layer, *_marker_px(a, cfg), *_marker_px(b, cfg)))
    return np.array(rows, dtype=np.float64).reshape(-1, 6)


def simulate(cfg: SensorConfig, shape: IndenterShape, pose: ContactPose, layout: MarkerLayout | None = None,
             background: BackgroundScene | None = None) -> SimulationResult:
    """Render the rest frame and the contact frame for one press."""
    mech = Mechanism(cfg.mechanism)
    if mech.has_mdm and layout is None:
        layout = build_layout(cfg)
    if mech is Mechanism.IMM_MFM and background is None:
        background = BackgroundScene(np.full(cfg.shape + (3,), 0.5))
    depth = compute_depth_field(shape, pose, cfg)
    rest = DepthField(np.zeros(cfg.shape), cfg.camera.mm_per_px, raster_origin(cfg))
    deform = compute_displacement_field(depth, cfg.elastomer, cfg.mechanics)
    displaced = displace_markers(layout, deform, cfg) if layout is not None else None
    ref = render_frame(cfg, rest, layout, background, frame_id=0)
    cur = render_frame(cfg, depth, displaced, background, frame_id=1)
    return SimulationResult(cfg=cfg, reference=ref, contact=cur, depth=depth, deformation=deform, layout=layout,
                            displaced=displaced, contact_mask=contact_support(shape, pose, cfg),
                            background=background)


def quantized(img: TactileImage) -> TactileImage:
    """What an 8-bit PNG round trip returns."""
    return TactileImage(quantize8(img.pixels), img.mechanism, img.frame_id)


# ---------------------------------------------------------------------------
# features from images

def max_pointer_px(cfg: SensorConfig) -> float | None:
    ms = cfg.markers
    if ms is None or ms.pointer_len_mm is None:
        return None
    return 1.5 * ms.pointer_len_mm / cfg.camera.mm_per_px


def detection_colors(cfg: SensorConfig) -> tuple:
    """Colors handed to the detector: layer colors, edge color or ``(hub, x, y, z)``."""
    ms = cfg.markers
    if ms.kind is LayoutKind.coordinate and len(ms.colors) != 4:
        return (WHITE, *DEFAULT_AXIS_COLORS)
    return tuple(ms.colors)


def features_from_images(cfg: SensorConfig, ref_img, cur_img, background: BackgroundScene | None = None,
                         ref_detections=None) -> FeatureVector:
    """Feature vector for one contact using only what a camera would see."""
    mech = Mechanism(cfg.mechanism)
    corr = None
    depth = None
    if mech.has_mdm:
        ms = cfg.markers
        ref_det = ref_detections
        if ref_det is None:
            ref_det = detect_markers(ref_img, ms.kind, detection_colors(cfg), max_pointer_px=max_pointer_px(cfg))
        cur_det = detect_markers(cur_img, ms.kind, detection_colors(cfg), max_pointer_px=max_pointer_px(cfg))
        corr = match_markers(ref_det, cur_det)
    if mech.has_imm and cfg.imm is not None:
        depth = estimate_depth_from_intensity(cur_img,
                                              cfg.illumination.base_intensity, cfg.imm.gain,
                                              cfg.camera.mm_per_px, raster_origin(cfg))
    elif mech is Mechanism.IMM_MFM:
        if background is None:
            background = BackgroundScene(np.full(cfg.shape + (3,), 0.5))
        mask = segment_contact_tir(cur_img, background, cfg.elastomer.clarity, 0.5 * cfg.tir.contact_lift)
        depth = DepthField(mask.astype(np.float64), cfg.camera.mm_per_px, raster_origin(cfg))
    return extract_features(corr, depth, cur_img)


# ---------------------------------------------------------------------------
# datasets

MANIFEST_MAGIC = "# vbtsim-manifest"
MANIFEST_VERSION = "1.0"
MANIFEST_COLUMNS = ("sample_id", "sensor_variant", "indenter_kind", "texture_id", "center_x", "center_y",
                    "press_depth", "yaw", "seed", "label_object", "label_texture", "ref_image", "image")


@dataclass(frozen=True)
class Recipe:
    classes: tuple[str, ...] = INDENTER_KINDS
    samples_per_class: int = 200
    textures: tuple[str, ...] = ()
    jitter_mm: float = 3.0
    press_range: tuple[float, float] = (0.3, 1.0)
    seed: int = 0

    def __post_init__(self):
        bad = [c for c in self.classes if c not in INDENTER_KINDS]
        if bad:
            raise ConfigError(f"unknown indenter kinds {bad}; choose from {INDENTER_KINDS}")
        badt = [t for t in self.textures if t not in FABRICS]
        if badt:
            raise ConfigError(f"unknown textures {badt}; choose from {FABRICS}")
        if self.samples_per_class < 1:
            raise ConfigError("samples_per_class must be >= 1")

    @property
    def hybrid(self) -> bool:
        return bool(self.textures)


@dataclass(frozen=True)
class SamplePlan:
    sample_id: str
    index: int
    kind: str
    texture: str | None
    pose: ContactPose
    seed: int  # sub-seed for every stochastic choice of this sample


def sample_rng(master: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master, spawn_key=(index,)))


def plan_dataset(cfg: SensorConfig, recipe: Recipe) -> list[SamplePlan]:
    W, H = cfg.sensing_area
    combos = [(k, t) for k in recipe.classes for t in (recipe.textures or (None,))]
    plans = []
    idx = 0
    for kind, tex in combos:
        for _ in range(recipe.samples_per_class):
            rng = sample_rng(recipe.seed, idx)
            jx, jy = rng.uniform(-recipe.jitter_mm, recipe.jitter_mm, size=2)
            press = rng.uniform(*recipe.press_range)
            yaw = rng.uniform(0.0, 2 * math.pi)
            sub = int(rng.integers(0, 2**31 - 1))
            plans.append(SamplePlan(sample_id=f"s{idx:05d}", index=idx, kind=kind, texture=tex,
                                    pose=ContactPose((float(W / 2 + jx), float(H / 2 + jy)), float(press),
                                                     float(yaw)), seed=sub))
            idx += 1
    return plans


def _background_for(cfg: SensorConfig, plan: SamplePlan) -> BackgroundScene | None:
    if plan.texture is None:
        return None
    return fabric(plan.texture, cfg.shape, seed=plan.seed)


@dataclass(eq=False)
class RenderedSample:
    plan: SamplePlan
    reference: TactileImage
    contact: TactileImage
    background: BackgroundScene | None


def render_sample(cfg: SensorConfig, plan: SamplePlan, layout: MarkerLayout | None = None) -> RenderedSample:
    bg = _background_for(cfg, plan)
    res = simulate(cfg, DEFAULT_SHAPES[plan.kind], plan.pose, layout, bg)
    return RenderedSample(plan, quantized(res.reference), quantized(res.contact), bg)


def iter_samples(cfg: SensorConfig, recipe: Recipe):
    layout = build_layout(cfg) if Mechanism(cfg.mechanism).has_mdm else None
    for plan in plan_dataset(cfg, recipe):
        yield render_sample(cfg, plan, layout)


def build_feature_table(cfg: SensorConfig, recipe: Recipe):
    """In-memory dataset: ``[(plan, FeatureVector), ...]``."""
    out = []
    ref_cache: dict = {}
    for s in iter_samples(cfg, recipe):
        key = s.plan.texture, s.plan.seed if s.plan.texture else None
        ref_det = ref_cache.get(key) if s.plan.texture is None else None
        if ref_det is None and Mechanism(cfg.mechanism).has_mdm:
            ms = cfg.markers
            ref_det = detect_markers(s.reference, ms.kind, detection_colors(cfg), max_pointer_px=max_pointer_px(cfg))
            if s.plan.texture is None:
                ref_cache[key] = ref_det
        out.append((s.plan, features_from_images(cfg, s.reference, s.contact, s.background, ref_det)))
    return out


def split_indices(labels, train_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified shuffle split; every class keeps at least one training sample."""
    if not 0 < train_frac <= 1:
        raise ValueError("train_frac must lie in (0, 1]")
    labels = list(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for lab in sorted(set(labels), key=str):
        idx = np.array([i for i, x in enumerate(labels) if x == lab])
        idx = idx[rng.permutation(len(idx))]
        n_tr = max(1, int(round(train_frac * len(idx))))
        train += idx[:n_tr].tolist()
        test += idx[n_tr:].tolist()
    if not test:
        raise InsufficientDataError("evaluation set is empty (train_frac leaves no test samples)")
    return np.array(sorted(train)), np.array(sorted(test))


@dataclass
class EvalReport:
    task: str
    labels: tuple
    correct: int
    total: int
    confusion: np.ndarray = field(repr=False)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    def line(self) -> str:
        return f"{self.task} accuracy: {100 * self.accuracy:.4f}% ({self.correct}/{self.total})"


HEAD_FEATURES = {"object": OBJECT_FEATURES, "texture": TEXTURE_FEATURES}


def evaluate(features, labels, train_frac: float = 0.7, seed: int = 0, k: int = 5, task: str = "object",
             columns="auto"):
    """Split, train one k-NN head and score it.

    ``columns="auto"`` picks the head's feature group (``HEAD_FEATURES``) for
    full-length feature vectors; ``None`` uses every entry.
    """
    X = [f.values if isinstance(f, FeatureVector) else np.asarray(f) for f in features]
    if columns == "auto":
        columns = HEAD_FEATURES.get(task) if X and len(X[0]) == len(FEATURE_NAMES) else None
    tr, te = split_indices(labels, train_frac, seed)
    model = train_classifier([(X[i], labels[i]) for i in tr], k=k, features=columns)
    pred = [classify(model, X[i]) for i in te]
    truth = [labels[i] for i in te]
    correct = sum(p == t for p, t in zip(pred, truth))
    return EvalReport(task, model.labels, correct, len(te), confusion_matrix(model.labels, truth, pred))


def format_confusion(rep: EvalReport) -> str:
    w = max(len(str(x)) for x in rep.labels) + 1
    head = " " * w + "".join(f"{str(x):>{w}}" for x in rep.labels)
    rows = [f"{str(lab):>{w}}" + "".join(f"{v:>{w}d}" for v in rep.confusion[i])
            for i, lab in enumerate(rep.labels)]
    return "\n".join([head, *rows])


# ---------------------------------------------------------------------------
# manifests on disk

def manifest_text(rows: list[dict], master_seed: int) -> str:
    buf = io.StringIO()
    buf.write(f"{MANIFEST_MAGIC} {MANIFEST_VERSION} master_seed={master_seed}\n")
    w = csv.DictWriter(buf, fieldnames=MANIFEST_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def read_manifest(path: str | Path) -> list[dict]:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.startswith(MANIFEST_MAGIC):
            raise SchemaVersionError(f"{path}: not a dataset manifest")
        version = first[len(MANIFEST_MAGIC):].split()[0]
        if version.split(".")[0] != MANIFEST_VERSION.split(".")[0]:
            raise SchemaVersionError(f"{path}: unsupported manifest version {version}")
        rows = list(csv.DictReader(fh))
    missing = [c for c in MANIFEST_COLUMNS if rows and c not in rows[0]]
    if missing:
        raise ConfigError(f"{path}: manifest lacks columns {missing}")
    ids = [r["sample_id"] for r in rows]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{path}: duplicate sample ids")
    for r in rows:
        for col in ("ref_image", "image"):
            if not (path.parent / r[col]).exists():
                raise InsufficientDataError(f"{path}: missing file {r[col]} for {r['sample_id']}")
    return rows
