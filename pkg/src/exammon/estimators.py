"""Scikit-learn adapters so the featurizer and classifier compose with
pipelines, grid search, and the rest of the estimator ecosystem.

The numerics stay in `classifier`; these classes only adapt fit/transform/
predict conventions (get_params/set_params come from BaseEstimator).
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .classifier import TrainConfig, init_model, predict_batch, train
from .dataset import Dataset
from .landmarks import (
    DEFAULT_SELECTION,
    FeatureMode,
    KeypointSelection,
    LandmarkFrame,
    featurize,
    validate_frame,
)


def _as_frames(X: Iterable) -> list[LandmarkFrame]:
    if isinstance(X, Dataset):
        return [s.frame for s in X.samples]
    frames = []
    for item in X:
        if isinstance(item, LandmarkFrame):
            frames.append(item)
        elif isinstance(item, dict):
            frames.append(validate_frame(item))
        else:
            raise TypeError(f"expected LandmarkFrame or frame record, got {type(item).__name__}")
    return frames


class LandmarkFeaturizer(BaseEstimator, TransformerMixin):
    """Stateless transformer: landmark frames -> feature matrix.

    Parameters
    ----------
    mode : str, one of "raw478", "raw19", "dist171"
    selection : sequence of 19 mesh indices, or None for the default set
    """

    def __init__(self, mode: str = "dist171", selection: Sequence[int] | None = None):
        self.mode = mode
        self.selection = selection

    def _resolved(self) -> tuple[FeatureMode, KeypointSelection]:
        mode = FeatureMode(self.mode)
        sel = DEFAULT_SELECTION if self.selection is None else KeypointSelection(tuple(self.selection))
        return mode, sel

    def fit(self, X, y=None):
        self._resolved()  # validate params
        return self

    def transform(self, X) -> np.ndarray:
        mode, sel = self._resolved()
        frames = _as_frames(X)
        out = np.empty((len(frames), mode.dims))
        for i, frame in enumerate(frames):
            out[i] = featurize(frame, mode, sel).values
        return out


class AbnormalBehaviorClassifier(BaseEstimator, ClassifierMixin):
    """Fully-connected binary classifier with the sklearn estimator API.

    fit expects a feature matrix whose width matches `feature_mode`
    (e.g. the output of LandmarkFeaturizer with the same mode) and labels
    in {0, 1} with 1 = abnormal.
    """

    def __init__(
        self,
        hidden_dims: Sequence[int] = (128, 64),
        feature_mode: str = "dist171",
        epochs: int = 100,
        learning_rate: float = 0.01,
        momentum: float = 0.9,
        batch_size: int = 32,
        seed: int = 0,
        shuffle_seed: int = 0,
        threshold: float = 0.5,
    ):
        self.hidden_dims = hidden_dims
        self.feature_mode = feature_mode
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.seed = seed
        self.shuffle_seed = shuffle_seed
        self.threshold = threshold

    def fit(self, X, y):
        mode = FeatureMode(self.feature_mode)
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        if set(np.unique(y)) - {0, 1}:
            raise ValueError("labels must be 0 (normal) or 1 (abnormal)")
        cfg = TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            batch_size=self.batch_size,
            shuffle_seed=self.shuffle_seed,
            threshold=self.threshold,
        )
        dims = (mode.dims, *tuple(int(d) for d in self.hidden_dims), 2)
        model = init_model(dims, seed=self.seed, feature_mode=mode)
        self.model_, self.history_ = train(model, X, y.astype(np.intp), cfg=cfg)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = mode.dims
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predicting")

    def predict_proba(self, X) -> np.ndarray:
        self._require_fitted()
        X = check_array(X, dtype=np.float64)
        _, p_abnormal = predict_batch(self.model_, X, threshold=self.threshold)
        return np.column_stack([1.0 - p_abnormal, p_abnormal])

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        X = check_array(X, dtype=np.float64)
        labels, _ = predict_batch(self.model_, X, threshold=self.threshold)
        return labels
