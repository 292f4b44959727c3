"""Scikit-learn estimator facade over the training strategies.

``FriendlyTrainingClassifier`` wraps the full pipeline (architecture
build, strategy dispatch, epoch-wise evaluation, best-epoch selection)
behind the familiar fit/predict/predict_proba/score surface, so it can
sit in sklearn pipelines, grids, and cross-validation unchanged.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .curriculum import TrainerConfig, train
from .data import Dataset, split_dataset
from .errors import ConfigError
from .evaluation import select_best
from .nn.layers import MODE_EVAL
from .nn.losses import softmax
from .optim import AdamSettings


class FriendlyTrainingClassifier(ClassifierMixin, BaseEstimator):
    """Neural-network classifier trained with an input-simplifying curriculum.

    Parameters
    ----------
    strategy : "FT", "CT", or "EEF"
        FT perturbs hard examples toward lower loss before each weight
        update, CT is plain mini-batch training, EEF keeps only the
        easiest examples of each batch early on.
    architecture : preset name, descriptor path, parsed descriptor, or None
        None builds a single hidden layer of ``hidden_units`` tanh units.
    hidden_units : width of the default architecture's hidden layer.
    epochs, batch_size : outer-loop shape.
    eta : learning rate of the inner perturbation steps (FT only).
    tau1 : initial inner-step budget; 0 makes FT identical to CT.
    confidence : early-stop threshold in (0, 1]; confidently correct
        examples are never perturbed.
    gamma_max_simp_fraction : fraction of all iterations after which the
        perturbation budget has decayed to zero, in (0, 1).
    alpha, beta1, beta2, epsilon : Adam settings for the weight updates.
    validation_fraction : share of the training data held out to pick
        the best epoch; 0 keeps the final-epoch weights instead.
    random_state : seed for initialization, shuffling, and dropout.

    Attributes
    ----------
    classes_ : array of class labels as seen in ``y``.
    network_ : the trained network (best epoch when validation is on).
    history_ : list of per-epoch records.
    best_epoch_ : 1-based epoch the kept weights come from.
    """

    def __init__(self, strategy="FT", architecture=None, hidden_units=10,
                 epochs=20, batch_size=32, eta=0.1, tau1=10, confidence=0.95,
                 gamma_max_simp_fraction=0.5, alpha=1e-3, beta1=0.9,
                 beta2=0.999, epsilon=1e-8, validation_fraction=0.1,
                 random_state=0):
        self.strategy = strategy
        self.architecture = architecture
        self.hidden_units = hidden_units
        self.epochs = epochs
        self.batch_size = batch_size
        self.eta = eta
        self.tau1 = tau1
        self.confidence = confidence
        self.gamma_max_simp_fraction = gamma_max_simp_fraction
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _architecture(self):
        if self.architecture is not None:
            return self.architecture
        return {
            "name": "default-fc",
            "layers": [
                {"kind": "linear", "units": self.hidden_units},
                {"kind": "tanh"},
                {"kind": "linear", "units": None},
            ],
        }

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("classifier needs at least 2 classes in y")
        dataset = Dataset(
            features=X, labels=encoded.astype(np.int64),
            class_count=len(self.classes_),
        )
        vf = self.validation_fraction
        if not (0.0 <= vf < 1.0):
            raise ConfigError(f"validation_fraction: must be in [0, 1), got {vf!r}")
        if vf > 0 and dataset.n >= 2:
            train_ds, val_ds = split_dataset(dataset, vf, self.random_state)
            splits = {"train": train_ds, "val": val_ds}
        else:
            splits = {"train": dataset}

        cfg = TrainerConfig(
            architecture=self._architecture(),
            strategy=self.strategy,
            epochs=self.epochs,
            batch_size=self.batch_size,
            eta=self.eta,
            tau1=self.tau1,
            confidence=self.confidence,
            gamma_max_simp_fraction=self.gamma_max_simp_fraction,
            adam=AdamSettings(alpha=self.alpha, beta1=self.beta1,
                              beta2=self.beta2, epsilon=self.epsilon),
            seed=self.random_state,
            record_seconds=False,
        )
        result = train(splits, cfg)
        net = result.network
        if "val" in splits and result.history:
            best_idx = select_best(result.history)
            net.load_parameters(result.best_params)
            if result.best_buffers:
                net.load_buffers(result.best_buffers)
            self.best_epoch_ = result.history[best_idx].epoch
        else:
            self.best_epoch_ = result.history[-1].epoch if result.history else 0
        self.network_ = net
        self.history_ = result.history
        self.n_features_in_ = X.shape[1]
        return self

    def _check_ready(self, X):
        if not hasattr(self, "network_"):
            raise NotFittedError(
                "This FriendlyTrainingClassifier instance is not fitted yet; "
                "call fit before predicting."
            )
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but the classifier was fitted "
                f"with {self.n_features_in_}"
            )
        return X

    def decision_function(self, X):
        X = self._check_ready(X)
        logits, _ = self.network_.forward(X, MODE_EVAL)
        return logits

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]
