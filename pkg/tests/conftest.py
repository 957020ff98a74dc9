import numpy as np
import pytest

from exammon.classifier import TrainConfig, init_model, save_model, train
from exammon.dataset import SynthSpec, featurize_dataset, split, synthesize
from exammon.landmarks import MESH_POINTS


@pytest.fixture
def valid_record():
    """A well-formed frame record factory."""
    def make(frame_id="f1", ts_ms=0, width=640, height=480, points=None):
        if points is None:
            rng = np.random.default_rng(0)
            points = rng.uniform(0.05, 0.95, size=(MESH_POINTS, 2))
        return {
            "id": frame_id,
            "ts_ms": ts_ms,
            "width": width,
            "height": height,
            "landmarks": np.asarray(points).tolist(),
        }
    return make


@pytest.fixture(scope="session")
def model_path(tmp_path_factory):
    """A fully-trained model file; classifies synthetic streams essentially
    perfectly, so end-to-end scenarios are deterministic."""
    ds = synthesize(SynthSpec(n=1200, seed=1))
    train_set, val_set = split(ds, 0.8, seed=0)
    x, y = featurize_dataset(train_set)
    xv, yv = featurize_dataset(val_set)
    trained, history = train(init_model(seed=0), x, y, xv, yv, TrainConfig(epochs=100))
    assert history[-1].val_accuracy == 1.0, "fixture model must be perfect on the synthetic task"
    path = tmp_path_factory.mktemp("model") / "model.json"
    save_model(trained, path)
    return path
