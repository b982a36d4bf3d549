"""Multitask encoder/decoder with a shared convolutional backbone.

The encoder is `encoder_levels` stages of conv3x3 + ReLU + 2x2 max-pool.
Its bottleneck is consumed twice: flattened and concatenated with the
clinical vector it feeds a fully connected branch ending in a sigmoid
(binary recurrence probability), and it seeds a decoder that upsamples,
concatenates the matching encoder feature map (skip connection), and
convolves back up to a linear 3x3 output conv producing the
reconstruction.

Volumes are channels-last (B, H, W, C) everywhere, matching how they
are stored on disk; arithmetic is float64.  All gradients are computed
in closed form by `backward`, which walks the two heads back through
the shared encoder and requires a preceding `forward` on the same
batch.

A model instance caches activations between forward and backward, so it
must be exclusively owned while training; independent models (one per
fold) can train concurrently without shared state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..entropy import EPSILON, BinaryBatch, binary_thc_loss_grad, _as_alpha
from ..errors import InvalidConfig, ShapeMismatch, StaleTape
from .layers import (
    ConcatChannels,
    Conv2d,
    Dense,
    Flatten,
    MaxPool2,
    ReLU,
    Sigmoid,
    UpsampleNearest2,
)


@dataclass
class ModelConfig:
    input_shape: tuple[int, int, int] = (32, 32, 1)  # (H, W, C)
    encoder_levels: int = 3
    channels_per_level: tuple[int, ...] = (2, 4, 8)
    clinical_dim: int = 23
    dense_widths: tuple[int, ...] = (16,)
    seed: int = 0

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        self.channels_per_level = tuple(int(v) for v in self.channels_per_level)
        self.dense_widths = tuple(int(v) for v in self.dense_widths)

    def validate(self):
        if len(self.input_shape) != 3 or any(v < 1 for v in self.input_shape):
            raise InvalidConfig(f"input_shape must be 3 positive ints, got {self.input_shape}")
        if self.encoder_levels < 1:
            raise InvalidConfig("encoder_levels must be >= 1")
        if len(self.channels_per_level) != self.encoder_levels:
            raise InvalidConfig(
                "channels_per_level must have one entry per encoder level "
                f"({self.encoder_levels}), got {len(self.channels_per_level)}"
            )
        if any(c < 1 for c in self.channels_per_level):
            raise InvalidConfig("channel counts must be positive")
        h, w, _ = self.input_shape
        div = 1 << self.encoder_levels
        if h % div or w % div:
            raise InvalidConfig(
                f"H and W must be divisible by 2^{self.encoder_levels} = {div}, "
                f"got {h}x{w}"
            )
        if self.clinical_dim < 0:
            raise InvalidConfig("clinical_dim must be >= 0")
        if any(d < 1 for d in self.dense_widths):
            raise InvalidConfig("dense widths must be positive")


@dataclass
class MultitaskOutput:
    reconstruction: np.ndarray   # (B, H, W, C), same layout as the input
    recurrence_prob: np.ndarray  # (B,), sigmoid output in (0, 1)


@dataclass
class Batch:
    volumes: np.ndarray   # (B, H, W, C)
    clinical: np.ndarray  # (B, clinical_dim)
    labels: np.ndarray    # (B,) in {0, 1}

    def __len__(self) -> int:
        return int(self.volumes.shape[0])


@dataclass
class _Cache:
    volumes: np.ndarray
    clinical: np.ndarray
    recon: np.ndarray  # (B, H, W, C)
    probs: np.ndarray  # (B,)


class MultitaskModel:
    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = config
        rng = np.random.default_rng(config.seed)
        h, w, c_in = config.input_shape
        levels = config.encoder_levels
        chans = config.channels_per_level

        self.enc_convs, self.enc_relus, self.pools = [], [], []
        prev = c_in
        for ch in chans:
            self.enc_convs.append(Conv2d(prev, ch, rng))
            self.enc_relus.append(ReLU())
            self.pools.append(MaxPool2())
            prev = ch

        self.bottleneck_hw = (h >> levels, w >> levels)
        self.flat_dim = chans[-1] * self.bottleneck_hw[0] * self.bottleneck_hw[1]
        self.flatten = Flatten()

        self.denses, self.dense_relus = [], []
        d_prev = self.flat_dim + config.clinical_dim
        for width in config.dense_widths:
            self.denses.append(Dense(d_prev, width, rng))
            self.dense_relus.append(ReLU())
            d_prev = width
        self.head = Dense(d_prev, 1, rng)
        self.sigmoid = Sigmoid()

        # Decoder runs deepest-first: upsample, concat the encoder feature
        # at the same resolution, then conv back to that level's width.
        self.ups, self.concats, self.dec_convs, self.dec_relus = [], [], [], []
        self.dec_levels = list(reversed(range(levels)))
        prev = chans[-1]
        for lvl in self.dec_levels:
            concat_ch = prev + chans[lvl]
            conv = Conv2d(concat_ch, chans[lvl], rng)
            assert conv.in_ch == prev + chans[lvl]  # skip-connection contract
            self.ups.append(UpsampleNearest2())
            self.concats.append(ConcatChannels())
            self.dec_convs.append(conv)
            self.dec_relus.append(ReLU())
            prev = chans[lvl]
        self.out_conv = Conv2d(chans[0], c_in, rng)

        self._blocks: list[tuple[str, Conv2d | Dense]] = []
        for i, conv in enumerate(self.enc_convs):
            self._blocks.append((f"enc{i}", conv))
        for i, dense in enumerate(self.denses):
            self._blocks.append((f"fc{i}", dense))
        self._blocks.append(("head", self.head))
        for lvl, conv in zip(self.dec_levels, self.dec_convs):
            self._blocks.append((f"dec{lvl}", conv))
        self._blocks.append(("out", self.out_conv))

        self._cache: _Cache | None = None

    # -- parameters ----------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Parameter blocks in build order (the checkpoint order)."""
        params: dict[str, np.ndarray] = {}
        for name, layer in self._blocks:
            params[f"{name}.w"] = layer.w
            params[f"{name}.b"] = layer.b
        return params

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def zero_grad(self):
        for _, layer in self._blocks:
            layer.zero_grad()

    # -- forward / backward --------------------------------------------

    def forward(self, volumes, clinical) -> MultitaskOutput:
        vols = np.asarray(volumes)
        clin = np.asarray(clinical, dtype=np.float64)
        h, w, c_in = self.config.input_shape
        if vols.ndim != 4 or vols.shape[1:] != (h, w, c_in):
            raise ShapeMismatch(
                f"expected volumes of shape (B, {h}, {w}, {c_in}), got {vols.shape}"
            )
        if clin.ndim != 2 or clin.shape != (vols.shape[0], self.config.clinical_dim):
            raise ShapeMismatch(
                f"expected clinical of shape ({vols.shape[0]}, "
                f"{self.config.clinical_dim}), got {clin.shape}"
            )

        x = vols.astype(np.float64)
        self._feats = []
        for conv, relu, pool in zip(self.enc_convs, self.enc_relus, self.pools):
            f = relu.forward(conv.forward(x))
            self._feats.append(f)
            x = pool.forward(f)
        bott = x

        z = np.concatenate([self.flatten.forward(bott), clin], axis=1)
        for dense, relu in zip(self.denses, self.dense_relus):
            z = relu.forward(dense.forward(z))
        probs = self.sigmoid.forward(self.head.forward(z)[:, 0])

        d = bott
        for up, cat, conv, relu, lvl in zip(
            self.ups, self.concats, self.dec_convs, self.dec_relus, self.dec_levels
        ):
            d = up.forward(d)
            d = cat.forward(d, self._feats[lvl])
            d = relu.forward(conv.forward(d))
        recon = self.out_conv.forward(d)

        self._cache = _Cache(vols, clin, recon, probs)
        return MultitaskOutput(recon, probs)

    def _check_cache(self, batch: Batch) -> _Cache:
        cache = self._cache
        if cache is None:
            raise StaleTape("backward() requires a preceding forward() pass")
        same_vol = cache.volumes is batch.volumes or np.array_equal(
            cache.volumes, batch.volumes
        )
        same_clin = cache.clinical is batch.clinical or np.array_equal(
            cache.clinical, batch.clinical
        )
        if not (same_vol and same_clin):
            raise StaleTape("cached forward pass does not match this batch")
        return cache

    def backward(self, batch: Batch, alpha, weights=(1.0, 1.0)) -> dict[str, np.ndarray]:
        """Gradient of the weighted total loss w.r.t. every parameter block."""
        cache = self._check_cache(batch)
        a = _as_alpha(alpha)
        w_rec, w_pred = float(weights[0]), float(weights[1])
        self.zero_grad()
        n = len(batch)

        # Prediction head: THC/Shannon loss grad w.r.t. the clamped
        # probability, zeroed where the clamp binds, chained through the
        # sigmoid.
        q = cache.probs
        dq = binary_thc_loss_grad(BinaryBatch(batch.labels, q), a)
        interior = (q > EPSILON) & (q < 1.0 - EPSILON)
        dq = w_pred * dq * interior
        dlogit = self.sigmoid.backward(dq)
        dz = self.head.backward(dlogit[:, None])
        for dense, relu in zip(reversed(self.denses), reversed(self.dense_relus)):
            dz = dense.backward(relu.backward(dz))
        dbott_pred = self.flatten.backward(dz[:, : self.flat_dim])

        # Reconstruction head, back through the decoder; skip gradients
        # accumulate per encoder level.
        target = batch.volumes.astype(np.float64)
        drec = w_rec * 2.0 / n * (cache.recon - target)
        dd = self.out_conv.backward(drec)
        dskips = [None] * self.config.encoder_levels
        for up, cat, conv, relu, lvl in zip(
            reversed(self.ups),
            reversed(self.concats),
            reversed(self.dec_convs),
            reversed(self.dec_relus),
            reversed(self.dec_levels),
        ):
            dcat = conv.backward(relu.backward(dd))
            dup, dskips[lvl] = cat.backward(dcat)
            dd = up.backward(dup)

        # Shared encoder: both heads meet at the bottleneck.
        dx = dd + dbott_pred
        for lvl in reversed(range(self.config.encoder_levels)):
            dfeat = self.pools[lvl].backward(dx) + dskips[lvl]
            dx = self.enc_convs[lvl].backward(self.enc_relus[lvl].backward(dfeat))

        grads: dict[str, np.ndarray] = {}
        for name, layer in self._blocks:
            grads[f"{name}.w"] = layer.gw.copy()
            grads[f"{name}.b"] = layer.gb.copy()
        return grads


def build_model(config: ModelConfig) -> MultitaskModel:
    return MultitaskModel(config)
