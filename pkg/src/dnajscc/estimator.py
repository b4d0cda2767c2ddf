"""scikit-learn style wrapper around the codec network.

``fit`` trains end to end, ``transform`` encodes images to base sequences,
``inverse_transform`` reads sequences back through the channel and decodes
them, and ``predict`` runs the whole store-and-retrieve pipeline.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import training
from .bio import BioReport, bio_report
from .channel import transmit
from .metrics import batch_metrics
from .network import decode, encode
from .validation import check_images

_CHUNK = 256


class DNAImageCodec(TransformerMixin, BaseEstimator):
    """Learned image-to-DNA codec.

    Parameters mirror :class:`dnajscc.training.TrainConfig`. ``c`` sets the
    sequence length ``k = 64c`` per 32x32x3 image, i.e. ``c / 48``
    nucleotides per pixel.
    """

    def __init__(self, c=8, v=2, d=8, s=256, alpha=75.0, gamma_train=0.005,
                 iterations=50_000, batch_size=64, lr_initial=5e-3, lr_final=5e-4,
                 seed=0, variance_ddof=0, checkpoint_interval=0, out_dir=None):
        self.c = c
        self.v = v
        self.d = d
        self.s = s
        self.alpha = alpha
        self.gamma_train = gamma_train
        self.iterations = iterations
        self.batch_size = batch_size
        self.lr_initial = lr_initial
        self.lr_final = lr_final
        self.seed = seed
        self.variance_ddof = variance_ddof
        self.checkpoint_interval = checkpoint_interval
        self.out_dir = out_dir

    def _make_config(self) -> training.TrainConfig:
        return training.TrainConfig(
            iterations=self.iterations, lr_initial=self.lr_initial, lr_final=self.lr_final,
            batch_size=self.batch_size, alpha=self.alpha, c=self.c, v=self.v, d=self.d,
            s=self.s, gamma_train=self.gamma_train, seed=self.seed,
            checkpoint_interval=self.checkpoint_interval, variance_ddof=self.variance_ddof,
        )

    def fit(self, X, y=None):
        """Train on ``(N, 32, 32, 3)`` uint8 images. ``y`` is ignored."""
        X = check_images(X)
        cfg = self._make_config()
        self.model_, self.history_ = training.fit(X, cfg, out_dir=self.out_dir)
        self.config_ = cfg
        return self

    @classmethod
    def from_checkpoint(cls, path) -> "DNAImageCodec":
        model, cfg = training.load_checkpoint(path)
        params = cfg.to_dict()
        for key in ("log_interval",):
            params.pop(key)
        est = cls(**params)
        est.model_, est.config_, est.history_ = model, cfg, []
        return est

    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        training.save_checkpoint(self.model_, self.config_, path)

    @property
    def k_(self) -> int:
        check_is_fitted(self, "model_")
        return self.model_.k

    def transform(self, X) -> np.ndarray:
        """Encode images into ``(N, k)`` int8 base codes (A=0, C=1, G=2, T=3)."""
        check_is_fitted(self, "model_")
        X = check_images(X)
        if len(X) == 0:
            return np.zeros((0, self.k_), dtype=np.int8)
        return np.concatenate([encode(X[i:i + _CHUNK], self.model_) for i in range(0, len(X), _CHUNK)])

    def transmit(self, Z, gamma=None, seed=0) -> np.ndarray:
        """Store ``(N, k)`` sequences and read ``v`` noisy copies back as ``(N, v, K)`` bundles."""
        check_is_fitted(self, "model_")
        gamma = self.config_.gamma_train if gamma is None else gamma
        return transmit(np.asarray(Z), self.config_.channel(gamma), rng=np.random.default_rng([seed, 3]))

    def decode(self, bundles) -> np.ndarray:
        check_is_fitted(self, "model_")
        bundles = np.asarray(bundles)
        return np.concatenate([decode(bundles[i:i + _CHUNK], self.model_)
                               for i in range(0, len(bundles), _CHUNK)])

    def inverse_transform(self, Z, gamma=0.0, seed=0) -> np.ndarray:
        """Decode sequences after a channel pass at ``gamma`` (error-free by default)."""
        return self.decode(self.transmit(Z, gamma, seed))

    def predict(self, X, gamma=None, seed=0) -> np.ndarray:
        """Reconstruct images after encoding, a channel pass at ``gamma`` and decoding."""
        return self.inverse_transform(self.transform(X), self._gamma(gamma), seed)

    def evaluate(self, X, gamma=None, seed=0) -> dict:
        """Mean PSNR/SSIM of reconstructions plus biological statistics of the codes."""
        X = check_images(X)
        Z = self.transform(X)
        X_hat = self.inverse_transform(Z, self._gamma(gamma), seed)
        p, s = batch_metrics(X, X_hat)
        report = bio_report(Z, s=self.config_.s)
        return {
            "psnr": float(p.mean()),
            "ssim": float(s.mean()),
            "gc_fraction": report.gc_fraction,
            "frac_runs_gt5": report.frac_runs_gt,
            "p": report.p.tolist(),
        }

    def bio_report(self, X, L: int = 5) -> BioReport:
        return bio_report(self.transform(X), L=L, s=self.config_.s)

    def score(self, X, y=None, gamma=None, seed=0) -> float:
        """Mean per-image PSNR (dB) of the full pipeline at ``gamma``."""
        X = check_images(X)
        p, _ = batch_metrics(X, self.predict(X, gamma, seed))
        return float(p.mean())

    def _gamma(self, gamma):
        check_is_fitted(self, "model_")
        return self.config_.gamma_train if gamma is None else gamma

    def n_parameters(self) -> int:
        check_is_fitted(self, "model_")
        return sum(p.numel() for p in self.model_.parameters())

    def __sklearn_is_fitted__(self):
        return hasattr(self, "model_")
