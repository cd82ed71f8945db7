import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbtsim import pipeline, preset
from vbtsim.contact import DEFAULT_SHAPES, INDENTER_KINDS, ContactPose
from vbtsim.errors import ConfigError, InsufficientDataError, SchemaVersionError

CTAC = preset("c-tac")


def test_simulate_outputs():
    res = pipeline.simulate(CTAC, DEFAULT_SHAPES["sphere"], ContactPose((17.0, 13.5), 0.8))
    assert res.reference.pixels.shape == res.contact.pixels.shape == (480, 480, 3)
    rows = res.marker_displacements_px()
    assert rows.shape == (49, 6)
    assert res.contact_mask.any()
    assert np.array_equal(res.depth.grid > 0, res.contact_mask & (res.depth.grid > 0))


def test_zero_press_leaves_frame_unchanged():
    for name in ("c-tac", "c-sight", "vi-c-tac", "vi-c-sight", "c-sightac"):
        cfg = preset(name)
        res = pipeline.simulate(cfg, DEFAULT_SHAPES["dot"], ContactPose((12.0, 12.0), 0.0))
        assert np.array_equal(res.reference.pixels, res.contact.pixels)


def test_recipe_validation():
    with pytest.raises(ConfigError):
        pipeline.Recipe(classes=("cone",))
    with pytest.raises(ConfigError):
        pipeline.Recipe(textures=("silk",))
    with pytest.raises(ConfigError):
        pipeline.Recipe(samples_per_class=0)


def test_dataset_sizes():
    assert len(pipeline.plan_dataset(CTAC, pipeline.Recipe(samples_per_class=200))) == 1200
    hybrid = pipeline.Recipe(classes=("curve", "waves", "multi_dot"), textures=("cotton", "fibre", "hemp"))
    plans = pipeline.plan_dataset(preset("vi-c-tac"), hybrid)
    assert len(plans) == 1800
    assert len({(p.kind, p.texture) for p in plans}) == 9
    assert len({p.sample_id for p in plans}) == 1800


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_plans_are_seeded_and_within_recipe(seed, n):
    r = pipeline.Recipe(samples_per_class=n, seed=seed)
    a, b = pipeline.plan_dataset(CTAC, r), pipeline.plan_dataset(CTAC, r)
    assert a == b
    W, H = CTAC.sensing_area
    for p in a:
        assert abs(p.pose.center[0] - W / 2) <= r.jitter_mm and abs(p.pose.center[1] - H / 2) <= r.jitter_mm
        assert r.press_range[0] <= p.pose.press_depth <= r.press_range[1]
        assert 0 <= p.pose.yaw < 2 * np.pi
    # sub-seeds depend only on (master seed, index): a longer recipe extends a shorter one
    longer = pipeline.plan_dataset(CTAC, pipeline.Recipe(classes=INDENTER_KINDS[:1], samples_per_class=n + 2,
                                                        seed=seed))
    assert [p.pose for p in longer[:n]] == [p.pose for p in a[:n]]


def test_split_is_stratified_and_deterministic():
    labels = ["a"] * 10 + ["b"] * 20
    tr, te = pipeline.split_indices(labels, 0.7, 3)
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(30))
    assert sum(labels[i] == "a" for i in tr) == 7 and sum(labels[i] == "b" for i in tr) == 14
    tr2, te2 = pipeline.split_indices(labels, 0.7, 3)
    assert np.array_equal(tr, tr2) and np.array_equal(te, te2)
    with pytest.raises(InsufficientDataError):
        pipeline.split_indices(labels, 1.0, 0)
    with pytest.raises(ValueError):
        pipeline.split_indices(labels, 0.0, 0)


def test_manifest_versioning(tmp_path):
    text = pipeline.manifest_text([], 7)
    assert text.startswith("# vbtsim-manifest 1.0 master_seed=7")
    p = tmp_path / "m.csv"
    p.write_text(text.replace("1.0", "2.0", 1))
    with pytest.raises(SchemaVersionError):
        pipeline.read_manifest(p)
    p.write_text("sample_id,image\n")
    with pytest.raises(SchemaVersionError):
        pipeline.read_manifest(p)
    p.write_text(text.replace("1.0", "1.3", 1))
    assert pipeline.read_manifest(p) == []


def test_small_object_benchmark():
    tab = pipeline.build_feature_table(CTAC, pipeline.Recipe(samples_per_class=10, seed=2))
    rep = pipeline.evaluate([f for _, f in tab], [p.kind for p, _ in tab], 0.7, 0, k=3)
    assert rep.total == 18 and rep.confusion.sum() == 18
    assert rep.accuracy >= 0.8
    assert rep.line().startswith("object accuracy: ")
    assert len(pipeline.format_confusion(rep).splitlines()) == 7
