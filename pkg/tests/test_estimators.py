import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from exammon.dataset import SynthSpec, featurize_dataset, split, synthesize
from exammon.estimators import AbnormalBehaviorClassifier, LandmarkFeaturizer
from exammon.landmarks import FeatureMode, featurize


@pytest.fixture(scope="module")
def synth():
    ds = synthesize(SynthSpec(n=300, seed=6))
    return split(ds, 0.8, seed=0)


class TestLandmarkFeaturizer:
    def test_transform_matches_featurize(self, synth):
        train_set, _ = synth
        frames = [s.frame for s in train_set.samples[:10]]
        out = LandmarkFeaturizer(mode="dist171").fit(frames).transform(frames)
        assert out.shape == (10, 171)
        for i, frame in enumerate(frames):
            np.testing.assert_array_equal(out[i], featurize(frame, FeatureMode.DIST171).values)

    def test_accepts_dataset_and_records(self, synth, valid_record):
        train_set, _ = synth
        assert LandmarkFeaturizer().transform(train_set).shape == (len(train_set), 171)
        assert LandmarkFeaturizer(mode="raw478").transform([valid_record()]).shape == (1, 956)

    def test_get_params_and_clone(self):
        t = LandmarkFeaturizer(mode="raw19", selection=tuple(range(19)))
        assert t.get_params()["mode"] == "raw19"
        c = clone(t)
        assert c.get_params() == t.get_params()

    def test_bad_mode_rejected_at_fit(self):
        with pytest.raises(ValueError):
            LandmarkFeaturizer(mode="bogus").fit([])


class TestAbnormalBehaviorClassifier:
    def test_fit_predict_on_synthetic(self, synth):
        train_set, val_set = synth
        x, y = featurize_dataset(train_set)
        xv, yv = featurize_dataset(val_set)
        est = AbnormalBehaviorClassifier(epochs=60, seed=0)
        est.fit(x, y)
        assert est.score(xv, yv) >= 0.95
        proba = est.predict_proba(xv)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)
        assert len(est.history_) == 60

    def test_pipeline_composition(self, synth):
        train_set, val_set = synth
        frames = [s.frame for s in train_set.samples]
        y = np.array([s.label.index for s in train_set.samples])
        pipe = Pipeline([
            ("features", LandmarkFeaturizer(mode="dist171")),
            ("clf", AbnormalBehaviorClassifier(epochs=60, seed=0)),
        ])
        pipe.fit(frames, y)
        val_frames = [s.frame for s in val_set.samples]
        yv = np.array([s.label.index for s in val_set.samples])
        assert pipe.score(val_frames, yv) >= 0.95

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            AbnormalBehaviorClassifier().predict(np.zeros((1, 171)))

    def test_bad_labels(self):
        est = AbnormalBehaviorClassifier(epochs=1)
        with pytest.raises(ValueError):
            est.fit(np.zeros((4, 171)), np.array([0, 1, 2, 1]))

    def test_params_round_trip(self):
        est = AbnormalBehaviorClassifier(hidden_dims=(32,), epochs=5, threshold=0.7)
        c = clone(est)
        assert c.get_params() == est.get_params()
        assert c.get_params()["threshold"] == 0.7

    def test_deterministic_fits(self, synth):
        train_set, _ = synth
        x, y = featurize_dataset(train_set)
        a = AbnormalBehaviorClassifier(epochs=5, seed=3).fit(x, y)
        b = AbnormalBehaviorClassifier(epochs=5, seed=3).fit(x, y)
        assert a.model_ == b.model_
