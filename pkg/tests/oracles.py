"""Independent reference computations shared by the test modules."""
import itertools
import math
from dataclasses import replace

import numpy as np

from vbtsim import pipeline, preset
from vbtsim.contact import DEFAULT_SHAPES, ContactPose
from vbtsim.core import LayoutKind, MarkerSpec
from vbtsim.geometry import rotation_from_ypr, ypr_from_rotation
from vbtsim.markers import build_layout, transform_coordinate_marker
from vbtsim.optics import render_mdm
from vbtsim.perception import detect_markers, estimate_marker_pose6d, match_markers


def brute_force_assignment(C):
    """Exhaustive minimum-cost permutation (n! candidates)."""
    n = len(C)
    best, best_perm = math.inf, None
    for perm in itertools.permutations(range(n)):
        cost = sum(C[i][perm[i]] for i in range(n))
        if cost < best:
            best, best_perm = cost, perm
    return best, best_perm


def random_ctac_contact(rng):
    """Seeded random contact on the C-Tac preset: (shape, pose)."""
    cfg = preset("c-tac")
    W, H = cfg.sensing_area
    kind = str(rng.choice(list(DEFAULT_SHAPES)))
    c = (W / 2 + rng.uniform(-4, 4), H / 2 + rng.uniform(-4, 4))
    return DEFAULT_SHAPES[kind], ContactPose((float(c[0]), float(c[1])), float(rng.uniform(0.2, 1.2)),
                                             float(rng.uniform(0, 2 * math.pi)))


def tracking_errors(cfg, shape, pose):
    """Per-marker |recovered - true| displacement (px) through 8-bit frames."""
    res = pipeline.simulate(cfg, shape, pose)
    ref, cur = pipeline.quantized(res.reference), pipeline.quantized(res.contact)
    kind, colors = cfg.markers.kind, pipeline.detection_colors(cfg)
    corr = match_markers(detect_markers(ref, kind, colors), detect_markers(cur, kind, colors))
    gt = res.marker_displacements_px()
    assert len(corr) == len(gt)
    err = []
    for v in corr:
        k = int(np.argmin(np.hypot(gt[:, 2] - v.ref[0], gt[:, 3] - v.ref[1])))
        true = gt[k, 4] - gt[k, 2], gt[k, 5] - gt[k, 3]
        err.append(math.hypot(v.delta[0] - true[0], v.delta[1] - true[1]))
    return np.asarray(err)


POINTER_MM = 3.0


def single_frame_config():
    cfg = preset("c-tac")
    return replace(cfg, markers=MarkerSpec(kind=LayoutKind.coordinate, rows=1, cols=1, pitch_mm=10.0,
                                           pointer_len_mm=POINTER_MM))


def pose_round_trip(cfg, ypr_deg, t_mm, rest_px=None):
    """Render one coordinate marker at a pose, detect it, estimate its pose.

    Returns ``(Pose6D, recovered yaw/pitch/roll in degrees)``.
    """
    lay = build_layout(cfg)
    m = transform_coordinate_marker(lay.markers[0], rotation_from_ypr(*np.radians(ypr_deg)), t_mm)
    img = pipeline.quantized(render_mdm(replace(lay, markers=(m,)), cfg))
    det = detect_markers(img, LayoutKind.coordinate, pipeline.detection_colors(cfg),
                         max_pointer_px=pipeline.max_pointer_px(cfg))
    assert len(det) == 1
    d = det[0]
    pose = estimate_marker_pose6d((d.centroid, *d.endpoints), POINTER_MM, cfg.camera.mm_per_px,
                                  cfg.camera.working_distance_mm, rest_px)
    return pose, np.degrees(ypr_from_rotation(pose.rotation))


def rest_hub_px(cfg):
    img = pipeline.quantized(render_mdm(build_layout(cfg), cfg))
    det = detect_markers(img, LayoutKind.coordinate, pipeline.detection_colors(cfg),
                         max_pointer_px=pipeline.max_pointer_px(cfg))
    return det[0].centroid


def iou(a, b):
    return float((a & b).sum() / (a | b).sum())
