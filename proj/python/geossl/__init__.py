"""Self-supervised contrastive learning for remote-sensing imagery.

Thin wrapper over the compiled _geossl module: functions that cross the
boundary as JSON strings are re-exposed here returning dicts/lists.
"""

import json as _json

from ._geossl import (  # noqa: F401
    AugmentationConfig,
    DatasetManifest,
    Error,
    SplitSpec,
    __version__,
    activation_map,
    augment_view,
    cam_overlay,
    cosine_similarity,
    derive_seed,
    downstream_transform,
    fnv1a64,
    load_image,
    make_splits,
    nt_xent,
    nt_xent_gradient,
    nt_xent_per_pair,
    pretext_views,
    render_report,
    save_png,
    scan_dataset,
    subsample_labels,
    synth_dataset,
)
from . import _geossl


def evaluate(pred, truth, num_classes, scores=()):
    """Classification metrics as a dict; scores (row-major n*C) enable AUC."""
    return _json.loads(_geossl.evaluate_json(list(pred), list(truth), num_classes, list(scores)))


def checkpoint_info(path):
    """Checkpoint header and tensor inventory as a dict."""
    return _json.loads(_geossl.checkpoint_info_json(str(path)))


def config_digest(config):
    """Canonical digest of a run config (dict or JSON string)."""
    return _geossl.config_digest(_as_json(config))


def plan_cells(config):
    """The experiment cells a config's matrix expands to, as a list of dicts."""
    return _json.loads(_geossl.plan_cells_json(_as_json(config)))


def pretrain(config, dataset_id):
    """Contrastive pretext training for one dataset (digest-cached)."""
    return _json.loads(_geossl.pretrain(_as_json(config), dataset_id))


def run_downstream(config, source, target, fraction=1.0, mode="linear", seed=1):
    """Train one downstream cell; saves checkpoint + metrics under output_dir."""
    return _json.loads(_geossl.run_downstream(_as_json(config), source, target, fraction, mode, seed))


def run_matrix(config):
    """Run the full adaptation matrix; returns the matrix as a dict."""
    return _json.loads(_geossl.run_matrix(_as_json(config)))


def report(matrix, format="markdown", published=None):
    """Render a matrix (dict or JSON string) as csv or markdown text."""
    published_text = "" if published is None else _as_json(published)
    return _geossl.render_report(_as_json(matrix), format, published_text)


def _as_json(value):
    return value if isinstance(value, str) else _json.dumps(value)
