"""scikit-learn compatible wrappers.

``SpectralProfiler`` and ``SpectralLayerSelector`` expose the spectral
analysis as estimators over a *sequence of layers* (one feature map per
layer). ``TinyViTClassifier`` is a regular classifier over
``(n_samples, size, size)`` images that can be distilled from another
fitted ``TinyViTClassifier``.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .distill import DistillConfig
from .exceptions import ConfigError, ShapeMismatch
from .spectral import (
    LayerSelection,
    ModelProfile,
    map_student_layers,
    model_profile,
    profile_distance,
    select_layers_topk,
)
from .tensor import as_feature_map, tokens_to_spatial
from .tinyvit.checkpoint import load_checkpoint, save_checkpoint
from .tinyvit.model import ModelConfig, forward, init_params
from .tinyvit.train import alignment_loss, feature_maps, train


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class SpectralProfiler(TransformerMixin, BaseEstimator):
    """Channel-spectrum profile of a stack of layer feature maps.

    Parameters
    ----------
    tokens : tuple of int, optional
        ``(H, W)`` grid for rank-3 ``(B, N, C)`` token maps. Required when
        any layer is token-shaped.
    drop_class : bool, default=False
        Drop the first token of token maps before arranging them on the grid.

    Attributes
    ----------
    profile_ : ModelProfile
        Spectra and intensities of the layers seen in ``fit``.
    intensities_ : ndarray of shape (n_layers,)
    n_layers_ : int
    """

    def __init__(self, tokens=None, drop_class=False):
        self.tokens = tokens
        self.drop_class = drop_class

    def _spatial(self, X):
        layers = []
        for i, x in enumerate(X):
            x = np.asarray(x, dtype=np.float64)
            if x.ndim == 3:
                if self.tokens is None:
                    raise ShapeMismatch(f"layer {i + 1} is token-shaped; set tokens=(H, W)")
                x = tokens_to_spatial(x, *self.tokens, drop_class=self.drop_class)
            layers.append(as_feature_map(x, f"layer {i + 1}"))
        return layers

    def _profile(self, X):
        return model_profile(self._spatial(X))

    def fit(self, X, y=None):
        self.profile_ = self._profile(X)
        self.intensities_ = self.profile_.intensities
        self.n_layers_ = self.profile_.layer_count
        return self

    def transform(self, X):
        """Layer intensities of ``X``, shape ``(n_layers,)``."""
        check_is_fitted(self, "profile_")
        return self._profile(X).intensities

    def score(self, X, y=None):
        """Negative profile distance between ``X`` and the fitted layers."""
        check_is_fitted(self, "profile_")
        return -profile_distance(self.profile_, self._profile(X))


class SpectralLayerSelector(BaseEstimator):
    """Pick the ``k`` most intense layers and map them onto a student.

    Parameters
    ----------
    k : int, default=8
    student_depth : int, optional
        Student layer count; when given, ``student_layers_`` is filled by
        the head/tail mapping.
    """

    def __init__(self, k=8, student_depth=None):
        self.k = k
        self.student_depth = student_depth

    def fit(self, X, y=None):
        if isinstance(X, ModelProfile):
            intensities = X.intensities
        else:
            intensities = check_array(np.asarray(X, dtype=np.float64).reshape(1, -1)).ravel()
        self.n_layers_ = len(intensities)
        self.teacher_layers_ = select_layers_topk(intensities, self.k)
        if self.student_depth is not None:
            self.selection_ = map_student_layers(self.teacher_layers_, self.n_layers_, self.student_depth)
            self.student_layers_ = self.selection_.student_layers
        return self

    def get_support(self, indices=False):
        check_is_fitted(self, "teacher_layers_")
        if indices:
            return np.array(self.teacher_layers_) - 1
        mask = np.zeros(self.n_layers_, dtype=bool)
        mask[np.array(self.teacher_layers_) - 1] = True
        return mask

    def transform(self, X):
        """Keep only the selected entries of a per-layer sequence."""
        X = list(X)
        if len(X) != self.n_layers_:
            raise ShapeMismatch(f"expected {self.n_layers_} layers, got {len(X)}")
        return [X[i] for i in self.get_support(indices=True)]


class TinyViTClassifier(ClassifierMixin, BaseEstimator):
    """Small vision transformer trained with AdamW, optionally distilled.

    Parameters
    ----------
    patch_size, embed_dim, depth, heads, mlp_ratio : int
        Architecture; the image size is taken from the training data.
    epochs, batch_size : int
    lr, weight_decay : float
    seed : int
        Seeds both the parameter initialization and the batch order.
    teacher : TinyViTClassifier, optional
        Fitted, frozen teacher. When set, training minimizes soft KD plus
        ``beta`` times the frequency-alignment loss on the planned pairs.
    plan : LayerSelection, optional
        Explicit ``teacher -> student`` layer pairing. Derived from the
        teacher's spectral profile (top ``top_k``) when omitted.
    top_k : int
    temperature, alpha, beta : float
        Distillation hyperparameters.
    probe_size : int
        Leading training samples used for the teacher profile and the
        before/after alignment loss.

    Attributes
    ----------
    classes_ : ndarray
    config_ : ModelConfig
    params_ : dict of ndarray
    run_ : TrainRun
    plan_ : LayerSelection or None
    fft_initial_, fft_final_ : float
        Mean alignment loss on the probe batch before and after training
        (distillation only).
    """

    def __init__(self, patch_size=4, embed_dim=16, depth=4, heads=2, mlp_ratio=4,
                 epochs=5, batch_size=64, lr=1e-3, weight_decay=0.05, seed=0,
                 teacher=None, plan=None, top_k=4, temperature=1.0, alpha=0.9, beta=0.2,
                 probe_size=256):
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        self.depth = depth
        self.heads = heads
        self.mlp_ratio = mlp_ratio
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.seed = seed
        self.teacher = teacher
        self.plan = plan
        self.top_k = top_k
        self.temperature = temperature
        self.alpha = alpha
        self.beta = beta
        self.probe_size = probe_size

    def _validate_images(self, X):
        X = check_array(X, allow_nd=True, dtype=np.float64)
        if X.ndim != 3 or X.shape[1] != X.shape[2]:
            raise ShapeMismatch(f"images must be (n, size, size), got {X.shape}")
        return X

    def _plan_for(self, teacher, X_probe):
        if self.plan is not None:
            plan = self.plan
            if not isinstance(plan, LayerSelection):
                t, s = zip(*plan)
                plan = LayerSelection(tuple(t), tuple(s))
            return plan
        profile = teacher.spectral_profile(X_probe)
        sel = select_layers_topk(profile, min(self.top_k, teacher.config_.depth))
        return map_student_layers(sel, teacher.config_.depth, self.depth)

    def fit(self, X, y):
        X, y = check_X_y(X, y, allow_nd=True, dtype=np.float64)
        X = self._validate_images(X)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ConfigError("need at least two classes")
        self.config_ = ModelConfig(image_size=X.shape[1], patch_size=self.patch_size,
                                   embed_dim=self.embed_dim, depth=self.depth, heads=self.heads,
                                   mlp_ratio=self.mlp_ratio, class_count=len(self.classes_),
                                   seed=self.seed)
        params = init_params(self.config_)
        teacher = plan = None
        distill = DistillConfig(self.temperature, self.alpha, self.beta)
        probe = X[: self.probe_size]
        if self.teacher is not None:
            check_is_fitted(self.teacher, "params_")
            if not np.array_equal(self.teacher.classes_, self.classes_):
                raise ConfigError("teacher was fitted on different classes")
            teacher = (self.teacher.params_, self.teacher.config_)
            plan = self._plan_for(self.teacher, probe)
            self.fft_initial_ = alignment_loss((params, self.config_), teacher, plan, probe)
        self.plan_ = plan
        self.params_, self.run_ = train(params, self.config_, X, y_enc, self.epochs, self.lr,
                                        batch_size=self.batch_size, seed=self.seed,
                                        teacher=teacher, plan=plan, distill=distill,
                                        weight_decay=self.weight_decay)
        if teacher is not None:
            self.fft_final_ = alignment_loss((self.params_, self.config_), teacher, plan, probe)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        return forward(self.params_, self._validate_images(X), self.config_)[0]

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

    def feature_maps(self, X):
        """Per-layer block outputs as ``(B, C, H, W)`` maps."""
        check_is_fitted(self, "params_")
        _, cache = forward(self.params_, self._validate_images(X), self.config_)
        return feature_maps(cache, self.config_)

    def spectral_profile(self, X):
        return model_profile(self.feature_maps(X))

    def save(self, directory):
        check_is_fitted(self, "params_")
        extra = {"classes": self.classes_.tolist()}
        if self.plan_ is not None:
            extra["plan"] = {"teacher_layers": list(self.plan_.teacher_layers),
                             "student_layers": list(self.plan_.student_layers)}
        save_checkpoint(directory, self.params_, self.config_, extra)

    @classmethod
    def from_checkpoint(cls, directory):
        params, cfg, manifest = load_checkpoint(directory)
        est = cls(patch_size=cfg.patch_size, embed_dim=cfg.embed_dim, depth=cfg.depth,
                  heads=cfg.heads, mlp_ratio=cfg.mlp_ratio, seed=cfg.seed)
        est.config_ = cfg
        est.params_ = params
        est.classes_ = np.asarray(manifest.get("classes", list(range(cfg.class_count))))
        est.plan_ = None
        return est
