"""Recover contact information from rendered tactile images."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from . import _backend
from .contact import DepthField
from .core import RGB, LayoutKind
from .errors import (
    CardinalityMismatchError,
    DegeneratePoseError,
    DimensionMismatchError,
    InsufficientDataError,
)
from .geometry import closest_rotation
from .optics import BackgroundScene, TactileImage, to_luma

STATIONARY_EPS_PX = 0.75
CORE_LEVEL = 0.5
SUPPORT_DILATION = 2
MIN_BLOB_WEIGHT = 1.0


@dataclass(frozen=True)
class Detection:
    centroid: tuple[float, float]
    apparent_radius: float | None = None
    vertices: tuple[tuple[float, float], ...] | None = None
    endpoints: tuple[tuple[float, float] | None, ...] | None = None
    color_class: int = 0
    layer_guess: int | None = None


@dataclass(frozen=True)
class DisplacementVector:
    ref: tuple[float, float]
    cur: tuple[float, float]
    stretch: float = 1.0
    ref_index: int = -1
    cur_index: int = -1
    color_class: int = 0

    def __post_init__(self):
        if not self.stretch > 0:
            raise ValueError("stretch must be > 0")

    @property
    def delta(self) -> tuple[float, float]:
        return (self.cur[0] - self.ref[0], self.cur[1] - self.ref[1])

    @property
    def magnitude(self) -> float:
        return math.hypot(*self.delta)


# ---------------------------------------------------------------------------
# detection

def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, TactileImage) else np.asarray(img, dtype=np.float64)


def _is_chromatic(c, tol=0.15) -> bool:
    c = np.asarray(c, dtype=np.float64)
    return float(np.abs(c - c.mean()).max()) > tol


def class_memberships(pix: np.ndarray, colors, background=None) -> np.ndarray:
    """Fractional coverage estimate of each expected color, shape ``(k, rows, cols)``.

    Coverage is the projection of ``pixel - bg`` on ``color - bg``.  Chromatic
    colors are projected in the chroma plane, which makes them insensitive to
    grey-level shading of the background (intensity-mapped layers).
    """
    if background is None:
        bg = np.median(pix[::4, ::4].reshape(-1, 3), axis=0)
    else:
        bg = np.asarray(background, dtype=np.float64)
    diff = pix - bg
    chromatic = [_is_chromatic(c) for c in colors]
    out = [None] * len(colors)
    for i, c in enumerate(colors):
        if chromatic[i]:
            d = np.asarray(c, dtype=np.float64) - bg
            d = d - d.mean()
            n2 = float(d @ d)
            x = diff - diff.mean(axis=-1, keepdims=True)
            out[i] = x @ d / n2 if n2 > 1e-12 else np.zeros(pix.shape[:2])
    # achromatic classes see the residual after removing chromatic coverage,
    # so a white hub rimmed by a colored tip is not inflated by the tip
    resid = diff
    for i, c in enumerate(colors):
        if chromatic[i]:
            d = np.asarray(c, dtype=np.float64) - bg
            resid = resid - np.clip(out[i], 0.0, 1.0)[..., None] * d
    for i, c in enumerate(colors):
        if not chromatic[i]:
            d = np.asarray(c, dtype=np.float64) - bg
            n2 = float(d @ d)
            out[i] = resid @ d / n2 if n2 > 1e-12 else np.zeros(pix.shape[:2])
    return np.stack(out)


def _assign(memb: np.ndarray) -> np.ndarray:
    """Per-pixel class index (argmax membership) or -1 when nothing is present."""
    best = np.argmax(memb, axis=0)
    top = np.take_along_axis(memb, best[None], axis=0)[0]
    return np.where(top > 0.02, best, -1)


_EIGHT = np.ones((3, 3), dtype=bool)


def _blobs(memb_c: np.ndarray, owner: np.ndarray, c: int):
    core = (owner == c) & (memb_c > CORE_LEVEL)
    if not core.any():
        return []
    support = ndimage.maximum_filter(core.view(np.uint8), size=2 * SUPPORT_DILATION + 1).view(bool)
    labels, n = ndimage.label(support, structure=_EIGHT)
    # drop support components without a core pixel
    has_core = np.zeros(n + 1, dtype=bool)
    has_core[np.unique(labels[core])] = True
    weights = np.clip(memb_c, 0.0, 1.0)
    mom = _backend.label_moments(labels.astype(np.int64), weights, n)
    out = []
    for k in range(n):
        w = mom[k, 0]
        if not has_core[k + 1] or w < MIN_BLOB_WEIGHT:
            continue
        out.append(((mom[k, 1] / w, mom[k, 2] / w), math.sqrt(w / math.pi)))
    return out


def _row_major(dets: list[Detection]) -> list[Detection]:
    return sorted(dets, key=lambda d: (round(d.centroid[1], 6), round(d.centroid[0], 6), d.color_class))


def detect_markers(img, kind: LayoutKind | str, expected_colors, background: RGB | None = None,
                   max_pointer_px: float | None = None) -> list[Detection]:
    """Connected-component detection after per-color-class thresholding.

    ``expected_colors``: one color per layer for dots, the edge color for
    voronoi cells, ``(hub, x, y, z)`` for coordinate frames.  Centroids are
    weighted by the per-pixel coverage estimate.
    """
    kind = LayoutKind(kind)
    pix = _pixels(img)
    colors = [tuple(c) for c in expected_colors]
    memb = class_memberships(pix, colors, background)
    owner = _assign(memb)

    if kind is LayoutKind.voronoi:
        return _detect_cells(memb[0])

    per_class = [_blobs(memb[c], owner, c) for c in range(len(colors))]
    if kind is LayoutKind.coordinate:
        return _assemble_frames(per_class, max_pointer_px)
    dets = [Detection(centroid=(float(x), float(y)), apparent_radius=float(r), color_class=c,
                      layer_guess=c if kind is LayoutKind.double_layer else 0)
            for c, blobs in enumerate(per_class) for (x, y), r in blobs]
    return _row_major(dets)


def _detect_cells(edge: np.ndarray) -> list[Detection]:
    interior = edge <= CORE_LEVEL
    four = ndimage.generate_binary_structure(2, 1)
    labels, n = ndimage.label(interior, structure=four)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    weights = 1.0 - np.clip(edge, 0.0, 1.0)
    mom = _backend.label_moments(labels.astype(np.int64), weights, n)
    objs = ndimage.find_objects(labels)
    out = []
    for k in range(n):
        if (k + 1) in border or mom[k, 3] < 4:
            continue
        w = mom[k, 0]
        sl = objs[k]
        rr, cc = np.nonzero(labels[sl] == k + 1)
        pts = np.column_stack([cc + sl[1].start, rr + sl[0].start]).astype(np.float64)
        try:
            hull = ConvexHull(pts)
            verts = tuple((float(pts[i, 0]), float(pts[i, 1])) for i in hull.vertices)
        except QhullError:
            verts = None
        out.append(Detection(centroid=(mom[k, 1] / w, mom[k, 2] / w),
                             apparent_radius=math.sqrt(mom[k, 3] / math.pi), vertices=verts))
    return _row_major(out)


def _circle_overlap(r1: float, r2: float, d: float) -> tuple[float, float]:
    """Area of the intersection of two disks ``d`` apart and its centroid's
    distance from the first center, measured toward the second."""
    if d >= r1 + r2:
        return 0.0, 0.0
    if d <= abs(r1 - r2):
        return (math.pi * r1 * r1, 0.0) if r1 <= r2 else (math.pi * r2 * r2, d)
    a = (d * d + r1 * r1 - r2 * r2) / (2 * d)

    def segment(r, h):
        al = math.acos(max(-1.0, min(1.0, h / r)))
        area = r * r * (al - math.sin(al) * math.cos(al))
        dist = 2 * r * math.sin(al) ** 3 / (3 * (al - math.sin(al) * math.cos(al))) if area > 0 else r
        return area, dist

    a1, d1 = segment(r1, a)
    a2, d2 = segment(r2, d - a)
    area = a1 + a2
    return area, (a1 * d1 + a2 * (d - d2)) / area if area > 0 else 0.0


def unocclude_tip(visible: tuple[float, float], tip_radius: float, hub: tuple[float, float],
                  hub_radius: float, iters: int = 100) -> tuple[float, float]:
    """Center of a disk of ``tip_radius`` whose part outside the hub disk has
    centroid ``visible`` (the hub is drawn on top of the tip)."""
    g = np.asarray(visible, dtype=np.float64)
    h = np.asarray(hub, dtype=np.float64)
    full = math.pi * tip_radius ** 2
    t = g.copy()
    for _ in range(iters):
        v = h - t
        d = float(np.hypot(*v))
        u = v / d if d > 1e-12 else (g - h) / max(float(np.hypot(*(g - h))), 1e-12) * -1.0
        area, dist = _circle_overlap(tip_radius, hub_radius, d)
        if area >= full * (1 - 1e-9):
            break  # tip fully hidden; no information
        lens = t + dist * u
        new = ((full - area) * g + area * lens) / full
        if np.hypot(*(new - t)) < 1e-10:
            t = new
            break
        t = new
    return float(t[0]), float(t[1])


def _assemble_frames(per_class, max_pointer_px):
    hubs = per_class[0]
    tips = per_class[1:4]
    if max_pointer_px is None:
        max_pointer_px = math.inf
    out = []
    for (hx, hy), r in hubs:
        ends, radii = [], []
        for cls in tips:
            best, bd, br = None, max_pointer_px, None
            for (tx, ty), tr in cls:
                d = math.hypot(tx - hx, ty - hy)
                if d <= bd:
                    best, bd, br = (float(tx), float(ty)), d, tr
            ends.append(best)
            radii.append(br)
        full = [rr for rr in radii[:2] if rr is not None]
        if ends[2] is not None and full:
            # the z tip sits behind the hub; undo the occlusion bias
            ends[2] = unocclude_tip(ends[2], float(np.mean(full)), (hx, hy), float(r))
        out.append(Detection(centroid=(float(hx), float(hy)), apparent_radius=float(r),
                             endpoints=tuple(ends), color_class=0))
    return _row_major(out)


# ---------------------------------------------------------------------------
# matching

def _cost_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)


def _greedy_mutual(C: np.ndarray) -> np.ndarray:
    n = C.shape[0]
    perm = -np.ones(n, dtype=np.intp)
    rows = list(range(n))
    cols = list(range(n))
    while rows:
        sub = C[np.ix_(rows, cols)]
        best_c = np.argmin(sub, axis=1)
        best_r = np.argmin(sub, axis=0)
        pairs = [(i, best_c[i]) for i in range(len(rows)) if best_r[best_c[i]] == i]
        for i, j in pairs:
            perm[rows[i]] = cols[j]
        taken_r = {rows[i] for i, _ in pairs}
        taken_c = {cols[j] for _, j in pairs}
        rows = [r for r in rows if r not in taken_r]
        cols = [c for c in cols if c not in taken_c]
    return perm


def _cancel_negative_cycles(C: np.ndarray, perm: np.ndarray, max_rounds: int = 10_000) -> np.ndarray:
    """Improve an assignment until no cyclic exchange lowers its cost.

    Exchange graph on rows: edge ``i -> j`` means row ``i`` takes row ``j``'s
    column, with weight ``C[i, perm[j]] - C[i, perm[i]]``.  An assignment is
    optimal iff this graph has no negative cycle.
    """
    n = len(perm)
    perm = perm.copy()
    tol = 1e-12 * (1.0 + float(np.abs(C).max()))
    for _ in range(max_rounds):
        W = C[:, perm] - C[np.arange(n), perm][:, None]
        dist = np.zeros(n)
        pred = -np.ones(n, dtype=np.intp)
        updated = -1
        for _it in range(n + 1):
            cand = dist[:, None] + W
            arg = np.argmin(cand, axis=0)
            best = cand[arg, np.arange(n)]
            better = best < dist - tol
            if not better.any():
                updated = -1
                break
            dist = np.where(better, best, dist)
            pred = np.where(better, arg, pred)
            updated = int(np.flatnonzero(better)[0])
        if updated < 0:
            return perm
        v = updated
        for _ in range(n):
            v = int(pred[v])
        cycle = [v]
        u = int(pred[v])
        while u != v:
            cycle.append(u)
            u = int(pred[u])
        new = perm.copy()
        for w in cycle:
            new[pred[w]] = perm[w]
        if C[np.arange(n), new].sum() >= C[np.arange(n), perm].sum() - tol:
            return perm
        perm = new
    return perm


def assign_min_cost(C: np.ndarray) -> np.ndarray:
    """Row -> column assignment minimising total cost (square matrix)."""
    C = np.asarray(C, dtype=np.float64)
    if C.size == 0:
        return np.zeros(0, dtype=np.intp)
    return _cancel_negative_cycles(C, _greedy_mutual(C))


def match_markers(ref: list[Detection], cur: list[Detection]) -> list[DisplacementVector]:
    """One-to-one matching minimising total squared centroid distance per color class."""
    if len(ref) != len(cur):
        raise CardinalityMismatchError(f"{len(ref)} reference vs {len(cur)} current detections")
    out: list[DisplacementVector] = []
    for c in sorted({d.color_class for d in ref} | {d.color_class for d in cur}):
        ri = [i for i, d in enumerate(ref) if d.color_class == c]
        ci = [j for j, d in enumerate(cur) if d.color_class == c]
        if len(ri) != len(ci):
            raise CardinalityMismatchError(f"color class {c}: {len(ri)} vs {len(ci)} detections")
        a = np.array([ref[i].centroid for i in ri], dtype=np.float64).reshape(-1, 2)
        b = np.array([cur[j].centroid for j in ci], dtype=np.float64).reshape(-1, 2)
        perm = assign_min_cost(_cost_matrix(a, b))
        for k, i in enumerate(ri):
            j = ci[perm[k]]
            r0, r1 = ref[i].apparent_radius, cur[j].apparent_radius
            stretch = r1 / r0 if r0 and r1 else 1.0
            out.append(DisplacementVector(ref=ref[i].centroid, cur=cur[j].centroid, stretch=stretch,
                                          ref_index=i, cur_index=j, color_class=c))
    out.sort(key=lambda v: v.ref_index)
    return out


def matching_cost(corr: list[DisplacementVector]) -> float:
    return float(sum(v.delta[0] ** 2 + v.delta[1] ** 2 for v in corr))


# ---------------------------------------------------------------------------
# overlays and intensity inversion

OVERLAY_RED = (1.0, 0.0, 0.0)
OVERLAY_BLUE = (0.0, 0.0, 1.0)


def displacement_overlay(ref_img, cur_img, correspondences, eps: float = STATIONARY_EPS_PX,
                         mark_radius_px: float = 3.0) -> TactileImage:
    """Dimmed grey frame with red at original and blue at final positions of moved markers."""
    cur = _pixels(cur_img)
    if _pixels(ref_img).shape != cur.shape:
        raise DimensionMismatchError("reference and current frames differ in size")
    base = 0.5 * to_luma(cur)
    pix = np.repeat(base[:, :, None], 3, axis=2)
    rows, cols = base.shape
    yy, xx = np.mgrid[0:rows, 0:cols]
    moved = [v for v in correspondences if v.magnitude > eps]
    for color, attr in ((OVERLAY_RED, "ref"), (OVERLAY_BLUE, "cur")):
        for v in moved:
            x, y = getattr(v, attr)
            r = mark_radius_px
            j0, j1 = max(0, int(y - r) - 1), min(rows, int(y + r) + 2)
            i0, i1 = max(0, int(x - r) - 1), min(cols, int(x + r) + 2)
            m = (xx[j0:j1, i0:i1] - x) ** 2 + (yy[j0:j1, i0:i1] - y) ** 2 <= r * r
            pix[j0:j1, i0:i1][m] = color
    return TactileImage(pix, "overlay", getattr(cur_img, "frame_id", 0))


def estimate_depth_from_intensity(img, i_bg, gain: float, mm_per_px: float = 1.0,
                                  origin=(0.0, 0.0)) -> DepthField:
    """Invert ``I = I_bg - gain * d`` per channel; saturated pixels give a lower bound."""
    if not gain > 0:
        raise ValueError("gain must be > 0")
    pix = _pixels(img)
    ibg = np.broadcast_to(np.asarray(i_bg, dtype=np.float64), (3,))
    est = (ibg[None, None, :] - pix) / gain
    valid = pix > 0
    nvalid = valid.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(nvalid > 0, (est * valid).sum(axis=-1) / np.maximum(nvalid, 1), 0.0)
    saturated = nvalid == 0
    d = np.where(saturated, ibg.max() / gain, d)
    d = np.maximum(d, 0.0)
    return DepthField(grid=d, mm_per_px=mm_per_px, origin=tuple(origin), saturated=saturated)


def segment_contact_tir(img, background, clarity: float, threshold: float) -> np.ndarray:
    """Contact mask: luma deviation from the see-through background, then 3x3 open/close."""
    pix = _pixels(img)
    bg = background.radiance if isinstance(background, BackgroundScene) else np.asarray(background)
    if bg.shape != pix.shape:
        raise DimensionMismatchError(f"image {pix.shape} vs background {bg.shape}")
    if threshold <= 0:
        warnings.warn("segment_contact_tir: non-positive threshold marks nearly every pixel", stacklevel=2)
    mask = np.abs(to_luma(pix) - to_luma(bg * clarity)) > threshold
    k = np.ones((3, 3), dtype=bool)
    mask = ndimage.binary_opening(mask, structure=k)
    return ndimage.binary_closing(mask, structure=k)


# ---------------------------------------------------------------------------
# coordinate-marker pose

@dataclass(frozen=True, eq=False)
class Pose6D:
    translation: np.ndarray  # (3,) mm; z positive away from the camera
    rotation: np.ndarray  # (3, 3)
    magnification: float


def estimate_marker_pose6d(endpoints_px, pointer_len_mm: float, mm_per_px: float,
                           working_distance_mm: float = 20.0, rest_origin_px=None) -> Pose6D:
    """Pose of one coordinate marker from its hub and three tips (pixels).

    Scaled orthographic model: the projected pointer matrix is
    ``L * m * R[:2, :]``.  The x/y tips fix ``m`` and the first two rows of
    ``R`` up to the sign of their third entries.  When the z tip is seen (it
    may be ``None``) the full 2x3 projection is fitted instead, which keeps
    small tilts first-order observable.  ``R`` is snapped to the closest
    rotation.
    """
    hub = np.asarray(endpoints_px[0], dtype=np.float64)
    tx, ty = (np.asarray(endpoints_px[k], dtype=np.float64) for k in (1, 2))
    tz = endpoints_px[3] if len(endpoints_px) > 3 else None
    a = (tx - hub) * mm_per_px
    b = (ty - hub) * mm_per_px
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12 or abs(a[0] * b[1] - a[1] * b[0]) <= 1e-6 * na * nb:
        raise DegeneratePoseError("projected x and y pointers are parallel")
    if tz is not None:
        # all three pointers seen: fit s * (orthonormal 2x3) to the projection
        c = (np.asarray(tz, dtype=np.float64) - hub) * mm_per_px
        U, _, Vt = np.linalg.svd(np.column_stack([a, b, c]), full_matrices=False)
        Q = U @ Vt
        r1, r2 = Q[0], Q[1]
    else:
        p = np.array([a[0], b[0]])
        q = np.array([a[1], b[1]])
        pp, qq, pq = p @ p, q @ q, p @ q
        s2 = 0.5 * ((pp + qq) + math.sqrt((pp - qq) ** 2 + 4 * pq * pq))
        cx = math.sqrt(max(0.0, s2 - pp))
        cy = -math.sqrt(max(0.0, s2 - qq)) if pq > 0 else math.sqrt(max(0.0, s2 - qq))  # cx * cy = -p.q
        r1 = np.array([p[0], p[1], cx]) / math.sqrt(s2)
        r2 = np.array([q[0], q[1], cy]) / math.sqrt(s2)
    R = closest_rotation(np.vstack([r1, r2, np.cross(r1, r2)]))
    # scale from the unoccluded x/y tips only
    P = R[:2, :2]
    s = float((a @ P[:, 0] + b @ P[:, 1]) / (P[:, 0] @ P[:, 0] + P[:, 1] @ P[:, 1]))
    m = s / pointer_len_mm
    z = working_distance_mm / m - working_distance_mm
    rest = hub if rest_origin_px is None else np.asarray(rest_origin_px, dtype=np.float64)
    t = np.array([(hub[0] - rest[0]) * mm_per_px, (hub[1] - rest[1]) * mm_per_px, z])
    return Pose6D(translation=t, rotation=R, magnification=m)


# ---------------------------------------------------------------------------
# features and classification

N_DIR_BINS = 8
N_RINGS = 4
FEATURE_NAMES = (
    tuple(f"dir_{k * 45}" for k in range(N_DIR_BINS))
    + ("mean_mag", "max_mag")
    + tuple(f"ring_{k}" for k in range(N_RINGS))
    + ("mean_stretch", "contact_area")
    + ("max_stretch", "moved_frac", "mag_rms_radius", "mag_anisotropy",
       "stretch_rms_radius", "stretch_anisotropy")
    + tuple(f"ring_norm_{k}" for k in range(N_RINGS))
    + ("radial_alignment", "stretched_frac")
    + ("mag_major", "mag_minor", "peak_major", "peak_minor", "peak_ratio", "inward_frac", "bend", "bend_peak")
    + ("depth_max", "depth_mean", "depth_major", "depth_minor", "depth_bend", "depth_center_frac")
    + ("mean_r", "mean_g", "mean_b", "luma_std", "grad_x", "grad_y", "grad_y_share", "laplace")
)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(FEATURE_NAMES),) or not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector must be finite with fixed dimensionality")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def _second_moments(pts: np.ndarray, w: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Eigenvalues (ascending) of the ``w``-weighted scatter about ``center``."""
    tot = w.sum()
    if tot <= 0:
        return np.zeros(2)
    d = pts - center
    cov = (w[:, None, None] * d[:, :, None] * d[:, None, :]).sum(0) / tot
    return np.maximum(np.linalg.eigvalsh(cov), 0.0)


def _bend(pts: np.ndarray, w: np.ndarray, center: np.ndarray) -> float:
    """|corr(v, u^2)| in the principal frame: ~1 for an arc, ~0 for straight or point-symmetric shapes."""
    tot = w.sum()
    if tot <= 0:
        return 0.0
    d = pts - center
    cov = (w[:, None, None] * d[:, :, None] * d[:, None, :]).sum(0) / tot
    _, vec = np.linalg.eigh(cov)
    v = d @ vec[:, 0]
    u2 = (d @ vec[:, 1]) ** 2
    v = v - (w * v).sum() / tot
    u2 = u2 - (w * u2).sum() / tot
    den = math.sqrt((w * v * v).sum() * (w * u2 * u2).sum())
    return float(abs((w * v * u2).sum()) / den) if den > 0 else 0.0


def _weighted_spread(pts: np.ndarray, w: np.ndarray, center: np.ndarray):
    ev = _second_moments(pts, w, center)
    rms = math.sqrt(ev.sum())
    aniso = 1.0 - ev[0] / ev[1] if ev[1] > 1e-12 else 0.0
    return rms, aniso


_IX = {name: k for k, name in enumerate(FEATURE_NAMES)}
N_MOTION = _IX["depth_max"]
N_SHAPE = _IX["mean_r"]

# column groups used by the decoupled classifier heads: the absolute direction
# histogram depends on indenter yaw, intensity statistics on the scene behind
# clear skin
OBJECT_FEATURES = tuple(n for n in FEATURE_NAMES[:N_SHAPE] if not n.startswith("dir_"))
TEXTURE_FEATURES = FEATURE_NAMES[N_SHAPE:]


def _motion_features(corr, eps, ring_px, center_hint):
    """Entries ``[0, N_MOTION)`` of the feature vector; ``contact_area`` is left at 0."""
    f = np.zeros(N_MOTION)
    if not corr:
        return f
    ref = np.array([v.ref for v in corr], dtype=np.float64)
    dlt = np.array([v.delta for v in corr], dtype=np.float64)
    st = np.array([v.stretch for v in corr], dtype=np.float64) - 1.0
    mag = np.hypot(dlt[:, 0], dlt[:, 1])
    if mag.sum() > 0:
        ang = np.mod(np.arctan2(dlt[:, 1], dlt[:, 0]) + np.pi / N_DIR_BINS, 2 * np.pi)
        bins = np.minimum((ang / (2 * np.pi / N_DIR_BINS)).astype(int), N_DIR_BINS - 1)
        f[0:8] = np.bincount(bins, weights=mag, minlength=N_DIR_BINS) / mag.sum()
    f[8] = mag.mean()
    f[9] = mag.max()
    if center_hint is not None:
        center = np.asarray(center_hint, dtype=np.float64)
    else:
        w = mag ** 2 + np.clip(st, 0, None) ** 2
        center = (ref * w[:, None]).sum(0) / w.sum() if w.sum() > 0 else ref.mean(0)
    rad = np.hypot(*(ref - center).T)
    ring = np.minimum((rad / ring_px).astype(int), N_RINGS - 1)
    for k in range(N_RINGS):
        sel = ring == k
        f[10 + k] = mag[sel].mean() if sel.any() else 0.0
    f[_IX["mean_stretch"]] = st.mean()  # excess over 1, so a rest frame gives 0
    f[_IX["max_stretch"]] = st.max()
    f[_IX["moved_frac"]] = float((mag > eps).mean())
    f[_IX["mag_rms_radius"]], f[_IX["mag_anisotropy"]] = _weighted_spread(ref, mag, center)
    f[_IX["stretch_rms_radius"]], f[_IX["stretch_anisotropy"]] = _weighted_spread(
        ref, np.clip(st, 0, None), center)
    f[_IX["stretched_frac"]] = float((st > 0.02).mean())
    top = f[10:14].max()
    if top > 0:
        f[_IX["ring_norm_0"]:_IX["ring_norm_0"] + N_RINGS] = f[10:14] / top
    if mag.sum() > 0:
        out = ref - center
        n = np.hypot(out[:, 0], out[:, 1])
        ok = n > 1e-9
        cosang = np.zeros_like(mag)
        cosang[ok] = (dlt[ok] * out[ok]).sum(1) / (n[ok] * np.maximum(mag[ok], 1e-12))
        f[_IX["radial_alignment"]] = float((cosang * mag).sum() / mag.sum())
        f[_IX["inward_frac"]] = float(mag[cosang < 0].sum() / mag.sum())
        f[_IX["mag_minor"]], f[_IX["mag_major"]] = np.sqrt(_second_moments(ref, mag, center))
        f[_IX["peak_minor"]], f[_IX["peak_major"]] = np.sqrt(_second_moments(ref, mag ** 2, center))
        f[_IX["peak_ratio"]] = float(mag.mean() / mag.max())
        f[_IX["bend"]] = _bend(ref, mag, center)
        f[_IX["bend_peak"]] = _bend(ref, mag ** 2, center)
    return f


def _depth_features(depth: DepthField, step: int = 2) -> np.ndarray:
    f = np.zeros(N_SHAPE - N_MOTION)
    d = depth.grid[::step, ::step]
    if not (d > 0).any():
        return f
    rows, cols = np.nonzero(d > 0)
    w = d[rows, cols]
    pts = np.column_stack([cols, rows]).astype(np.float64) * step
    center = (pts * w[:, None]).sum(0) / w.sum()
    f[0] = w.max()
    f[1] = w.mean()
    f[3], f[2] = np.sqrt(_second_moments(pts, w, center))
    f[4] = _bend(pts, w, center)
    j, i = (int(round(c / step)) for c in center[::-1])
    f[5] = d[min(j, d.shape[0] - 1), min(i, d.shape[1] - 1)] / w.max()
    return f


def _intensity_features(pix: np.ndarray) -> np.ndarray:
    f = np.zeros(8)
    f[0:3] = pix.reshape(-1, 3).mean(0)
    lum = to_luma(pix)
    f[3] = lum.std()
    gx = np.abs(np.diff(lum, axis=1)).mean()
    gy = np.abs(np.diff(lum, axis=0)).mean()
    f[4], f[5] = gx, gy
    f[6] = gy / (gx + gy) if gx + gy > 0 else 0.0
    f[7] = np.abs(ndimage.laplace(lum)).mean()
    return f


def extract_features(correspondences=None, depth: DepthField | None = None, image=None,
                     eps: float = STATIONARY_EPS_PX, ring_px: float = 25.0,
                     center_px=None) -> FeatureVector:
    """Fixed-length descriptor of one contact (see ``FEATURE_NAMES``)."""
    if not correspondences and depth is None and image is None:
        raise InsufficientDataError("extract_features needs correspondences, a depth field or an image")
    v = np.zeros(len(FEATURE_NAMES))
    m = _motion_features(list(correspondences or []), eps, ring_px, center_px)
    v[:N_MOTION] = m
    if depth is not None:
        v[_IX["contact_area"]] = float((depth.grid > 0).mean())
        v[N_MOTION:N_SHAPE] = _depth_features(depth)
    if image is not None:
        v[N_SHAPE:] = _intensity_features(_pixels(image))
    return FeatureVector(v)


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    labels: tuple
    X: np.ndarray  # z-scored training features
    y: np.ndarray  # label indices
    mean: np.ndarray
    std: np.ndarray
    k: int
    columns: np.ndarray | None = None  # feature columns the model looks at (all when None)

    def view(self, v) -> np.ndarray:
        a = _as_array(v)
        return a if self.columns is None else a[self.columns]


def _as_array(v) -> np.ndarray:
    return v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64)


def feature_columns(names) -> np.ndarray:
    return np.array([_IX[n] for n in names], dtype=np.intp)


def train_classifier(samples, k: int = 5, features=None) -> ClassifierModel:
    """z-scored k-nearest-neighbour model.

    ``features``: names of the ``FeatureVector`` entries to use (all when
    None); only meaningful for full-length feature vectors.
    """
    samples = list(samples)
    if k < 1:
        raise ValueError("k must be >= 1")
    labels = tuple(sorted({lab for _, lab in samples}, key=str))
    if len(labels) < 2:
        raise InsufficientDataError("need at least two classes")
    counts = {lab: 0 for lab in labels}
    for _, lab in samples:
        counts[lab] += 1
    short = [lab for lab, n in counts.items() if n < k]
    if short:
        raise InsufficientDataError(f"classes with fewer than k={k} samples: {short}")
    cols = None if features is None else feature_columns(features)
    X = np.vstack([_as_array(v) if cols is None else _as_array(v)[cols] for v, _ in samples])
    index = {lab: i for i, lab in enumerate(labels)}
    y = np.array([index[lab] for _, lab in samples], dtype=np.intp)
    mean = X.mean(0)
    std = X.std(0)
    std = np.where(std > 0, std, 1.0)
    return ClassifierModel(labels=labels, X=(X - mean) / std, y=y, mean=mean, std=std, k=k, columns=cols)


def classify(model: ClassifierModel, v):
    z = (model.view(v) - model.mean) / model.std
    d2 = ((model.X - z) ** 2).sum(1)
    nn = np.argsort(d2, kind="stable")[: model.k]
    votes = np.bincount(model.y[nn], minlength=len(model.labels))
    return model.labels[int(np.argmax(votes))]  # argmax picks the lowest index on ties


def confusion_matrix(model_labels, truth, pred) -> np.ndarray:
    idx = {lab: i for i, lab in enumerate(model_labels)}
    cm = np.zeros((len(model_labels), len(model_labels)), dtype=int)
    for t, p in zip(truth, pred):
        cm[idx[t], idx[p]] += 1
    return cm
