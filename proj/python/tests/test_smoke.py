"""Smoke tests for the python bindings: every exposed operation gets one
exercise against known values or basic invariants. Plain asserts, no test
framework, so the file runs directly under ctest."""

import json
import math
import os
import sys
import tempfile

import numpy as np

import geossl


def test_hashing():
    # FNV-1a offset basis: hash of the empty string.
    assert geossl.fnv1a64("") == 14695981039346656037
    assert geossl.derive_seed(42, ["a", "b"]) == geossl.derive_seed(42, ["a", "b"])
    assert geossl.derive_seed(42, ["a", "b"]) != geossl.derive_seed(42, ["b", "a"])
    assert geossl.derive_seed(42, ["ab"]) != geossl.derive_seed(42, ["a", "b"])


def test_nt_xent_frozen_values():
    # Two identical positive pairs: values frozen from the library's oracle.
    e1 = [1.0, 0.0, 0.0, 0.0]
    e2 = [0.0, 1.0, 0.0, 0.0]
    z = np.array([e1, e2, e1, e2])
    assert abs(geossl.nt_xent(z, tau=0.5) - 0.2395447662218845) < 1e-12
    assert abs(geossl.nt_xent(z, tau=0.5, normalization="strict_over_samples")
               - 0.47908953244376901) < 1e-12
    per_pair = geossl.nt_xent_per_pair(z, tau=0.5)
    assert per_pair.shape == (4,)
    assert abs(per_pair.sum() / 4 - 0.2395447662218845) < 1e-12

    # Huge temperature flattens the softmax: each pair term approaches
    # log(2N - 1) = log 3.
    assert abs(geossl.nt_xent(z, tau=1e6) - math.log(3.0)) < 1e-3


def test_nt_xent_gradient_descends():
    rng = np.random.default_rng(7)
    z = rng.standard_normal((8, 16))
    g = geossl.nt_xent_gradient(z, tau=0.5)
    assert g.shape == z.shape
    assert np.all(np.isfinite(g))
    before = geossl.nt_xent(z, tau=0.5)
    after = geossl.nt_xent(z - 1e-3 * g, tau=0.5)
    assert after < before

    s = geossl.cosine_similarity(z)
    assert s.shape == (8, 8)
    assert np.allclose(np.diag(s), 1.0)


def test_dataset_splits(tmp):
    manifest = geossl.synth_dataset(
        os.path.join(tmp, "ds"), num_classes=3, per_class=10, image_size=32,
        seed=5, dataset_id="demo")
    assert manifest.dataset_id == "demo"
    assert manifest.num_classes == 3
    assert len(manifest) == 30
    assert manifest.classes == ["class00", "class01", "class02"]
    assert os.path.exists(manifest.path_of(0))
    assert manifest.label_of(0) in (0, 1, 2)

    split = geossl.make_splits(manifest, ratios=(0.7, 0.2, 0.1), seed=42)
    train = split.indices(split="train")
    test = split.indices(split="test")
    val = split.indices(split="val")
    # Per class of 10: floor(7.5)=7 train, floor(2.5)=2 test, 1 val.
    assert (len(train), len(test), len(val)) == (21, 6, 3)
    assert not (set(train) & set(test)) and not (set(train) & set(val))

    small = geossl.subsample_labels(manifest, split, 0.3, 11)
    large = geossl.subsample_labels(manifest, split, 0.8, 11)
    assert set(small.retained_train_indices()) <= set(large.retained_train_indices())
    assert set(large.retained_train_indices()) <= set(train)
    return manifest


def test_images_and_augment(manifest, tmp):
    img = geossl.load_image(manifest.path_of(0))
    assert img.dtype == np.uint8 and img.ndim == 3 and img.shape[2] == 3

    out = os.path.join(tmp, "copy.png")
    geossl.save_png(img, out)
    assert np.array_equal(geossl.load_image(out), img)

    cfg = geossl.AugmentationConfig()
    cfg.resize_height = cfg.resize_width = 32
    a, b = geossl.pretext_views(img, cfg, seed=3, source_index=0)
    assert a.shape == (3, 32, 32) and b.shape == (3, 32, 32)
    assert 0.0 <= a.min() and a.max() <= 1.0
    assert not np.array_equal(a, b)  # independent draws
    a2, _ = geossl.pretext_views(img, cfg, seed=3, source_index=0)
    assert np.array_equal(a, a2)  # deterministic per (seed, index, view)
    assert np.array_equal(a, geossl.augment_view(img, cfg, seed=3, source_index=0, view_index=0))

    x = geossl.downstream_transform(img, train_mode=False, target_size=48)
    assert x.shape == (3, 48, 48)


def test_metrics():
    r = geossl.evaluate([0, 1, 2], [0, 1, 2], 3)
    assert r["accuracy"] == 1.0 and r["f1"] == 1.0 and r["auc"] is None

    # 2 classes, one error; perfectly separating scores give AUC 1.
    scores = [0.9, 0.1, 0.8, 0.2, 0.4, 0.6, 0.3, 0.7]
    r = geossl.evaluate([0, 0, 1, 1], [0, 1, 1, 1], 2, scores)
    assert r["n_samples"] == 4
    assert abs(r["accuracy"] - 0.75) < 1e-12
    assert r["auc"] == 1.0


def test_pipeline(tmp):
    roots = {}
    for seed, name in ((101, "src_a"), (202, "tgt_b")):
        geossl.synth_dataset(os.path.join(tmp, name), num_classes=3, per_class=6,
                             image_size=32, seed=seed, dataset_id=name)
        roots[name] = os.path.join(tmp, name)

    config = {
        "datasets": [{"id": k, "root": v} for k, v in roots.items()],
        "encoder": {"backbone": "small_conv", "feature_dim": 32, "input_size": 32},
        "projection": {"hidden_dim": 32, "out_dim": 16},
        "classifier": {"hidden_dim": 16},
        "augment": {"resize_height": 32, "resize_width": 32},
        "pretext": {"batch_size": 8, "epochs": 1, "lr": 0.01, "seed": 1},
        "downstream": {"batch_size": 8, "epochs": 1},
        "matrix": {"datasets": ["src_a", "tgt_b"], "fractions": [1.0],
                   "modes": ["linear"], "seeds": [1], "cross_domain": True,
                   "diagonal": False},
        "output_dir": os.path.join(tmp, "out"),
        "cache_dir": os.path.join(tmp, "cache"),
    }

    digest = geossl.config_digest(config)
    assert len(digest) == 16
    cells = geossl.plan_cells(config)
    assert len(cells) == 2  # cross-domain pairs of two datasets

    info = geossl.pretrain(config, "src_a")
    assert info["trained"]
    again = geossl.pretrain(config, "src_a")
    assert not again["trained"] and again["digest"] == info["digest"]

    meta = geossl.checkpoint_info(info["checkpoint"])
    assert meta["kind"] == "pretext"
    assert meta["source_dataset"] == "src_a"
    assert meta["parameter_count"] > 0

    cell = geossl.run_downstream(config, "src_a", "tgt_b", 1.0, "linear", seed=1)
    assert os.path.exists(cell["checkpoint"])
    assert 0.0 <= cell["metrics"]["accuracy"] <= 1.0

    heat, cls = geossl.activation_map(cell["checkpoint"], roots["tgt_b"] + "/class01/img_000.png")
    assert heat.shape == (32, 32)
    assert 0.0 <= heat.min() and heat.max() <= 1.0
    assert 0 <= cls < 3

    overlay_path = os.path.join(tmp, "cam.png")
    cls2 = geossl.cam_overlay(cell["checkpoint"], roots["tgt_b"] + "/class01/img_000.png",
                              overlay_path)
    assert cls2 == cls and os.path.exists(overlay_path)

    matrix = geossl.run_matrix(config)
    assert matrix["complete"] and len(matrix["cells"]) == 2

    md = geossl.report(matrix, "markdown")
    assert "tgt_b" in md
    csv = geossl.report(matrix, "csv")
    assert csv.splitlines()[0].startswith("pretext,downstream,fraction,mode")

    published = {"label": "reference", "tables": []}
    md2 = geossl.report(matrix, "markdown", published=published)
    assert "reference" in md2


def test_errors():
    try:
        geossl.nt_xent(np.zeros((3, 4)))  # odd row count
    except geossl.Error as e:
        assert "2N rows" in str(e)
    else:
        raise AssertionError("expected geossl.Error")

    try:
        geossl.scan_dataset("/nonexistent/nowhere")
    except geossl.Error:
        pass
    else:
        raise AssertionError("expected geossl.Error")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        test_hashing()
        test_nt_xent_frozen_values()
        test_nt_xent_gradient_descends()
        manifest = test_dataset_splits(tmp)
        test_images_and_augment(manifest, tmp)
        test_metrics()
        test_errors()
        test_pipeline(tmp)
    print("python smoke: all checks passed")


if __name__ == "__main__":
    sys.exit(main())
