"""Six-layer LSTM autoencoder: encoder LSTM, dropout, repeat of the latent
vector, decoder LSTM, dropout, and a time-distributed dense output layer.

A window of k seconds and m channels is compressed into the encoder's final
hidden state and reconstructed back to a k x m matrix; training minimizes
the mean absolute reconstruction error with Adam.

The public `forward` / `reconstruction_errors` path processes windows one at
a time through the serial cell ops, so batch results are bitwise identical
to per-window calls. Training uses the batched fast path from `nn`, which is
deterministic run to run for fixed seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import nn
from .data import ChannelStats
from .errors import ConfigError, DataError, ParseError, ShapeError, VersionError
from .ioutil import atomic_write_text

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AutoencoderConfig:
    """Architecture hyperparameters; defaults follow the reference setup
    (30-second window, three channels, 64 hidden units, dropout 0.2)."""

    window_k: int = 30
    feature_m: int = 3
    hidden_dim: int = 64
    dropout_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.window_k < 1 or self.feature_m < 1 or self.hidden_dim < 1:
            raise ConfigError("window_k, feature_m, and hidden_dim must all be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.shuffle_seed < 0:
            raise ConfigError(f"shuffle_seed must be nonnegative, got {self.shuffle_seed}")


@dataclass(frozen=True)
class ModelArtifact:
    """Weights plus the normalization stats and threshold needed to apply
    the model to new data. Immutable; training returns updated copies."""

    schema_version: int
    config: AutoencoderConfig
    encoder_lstm: nn.LstmLayerParams
    decoder_lstm: nn.LstmLayerParams
    output_dense: nn.DenseParams
    channel_stats: ChannelStats | None = None
    threshold: float | None = None

    def __post_init__(self):
        cfg = self.config
        if (self.encoder_lstm.input_dim, self.encoder_lstm.hidden_dim) != \
                (cfg.feature_m, cfg.hidden_dim):
            raise ShapeError("encoder dimensions do not match config")
        if (self.decoder_lstm.input_dim, self.decoder_lstm.hidden_dim) != \
                (cfg.hidden_dim, cfg.hidden_dim):
            raise ShapeError("decoder dimensions do not match config")
        if (self.output_dense.in_dim, self.output_dense.out_dim) != \
                (cfg.hidden_dim, cfg.feature_m):
            raise ShapeError("dense dimensions do not match config")
        if self.channel_stats is not None and \
                len(self.channel_stats.channels) != cfg.feature_m:
            raise ShapeError("channel_stats do not match feature count")
        if self.threshold is not None and not self.threshold >= 0:
            raise ConfigError(f"threshold must be nonnegative, got {self.threshold}")

    def parameters(self) -> dict[str, np.ndarray]:
        """Flat name -> tensor dict for the optimizer and gradient oracle."""
        out: dict[str, np.ndarray] = {}
        out.update(self.encoder_lstm.tensors("encoder"))
        out.update(self.decoder_lstm.tensors("decoder"))
        out.update(self.output_dense.tensors("dense"))
        return out

    def with_parameters(self, tensors: dict[str, np.ndarray]) -> "ModelArtifact":
        return replace(
            self,
            encoder_lstm=self.encoder_lstm.with_tensors("encoder", tensors),
            decoder_lstm=self.decoder_lstm.with_tensors("decoder", tensors),
            output_dense=self.output_dense.with_tensors("dense", tensors),
        )

    def parameter_count(self) -> int:
        return sum(t.size for t in self.parameters().values())


def _glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng, dim):
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def _init_lstm(rng, input_dim: int, hidden_dim: int) -> nn.LstmLayerParams:
    # Glorot-uniform input kernel (fan over the full packed kernel),
    # per-gate orthogonal recurrent kernel, forget-gate bias 1.
    h4 = 4 * hidden_dim
    input_kernel = _glorot_uniform(rng, (h4, input_dim), input_dim, h4)
    recurrent_kernel = np.vstack([_orthogonal(rng, hidden_dim) for _ in range(4)])
    bias = np.zeros(h4)
    bias[hidden_dim:2 * hidden_dim] = 1.0
    return nn.LstmLayerParams(input_dim, hidden_dim, input_kernel, recurrent_kernel, bias)


def init_model(config: AutoencoderConfig) -> ModelArtifact:
    """Build an untrained artifact with seeded initialization."""
    rng = np.random.default_rng(config.seed)
    encoder = _init_lstm(rng, config.feature_m, config.hidden_dim)
    decoder = _init_lstm(rng, config.hidden_dim, config.hidden_dim)
    dense_w = _glorot_uniform(rng, (config.feature_m, config.hidden_dim),
                              config.hidden_dim, config.feature_m)
    dense = nn.DenseParams(weight=dense_w, bias=np.zeros(config.feature_m))
    return ModelArtifact(SCHEMA_VERSION, config, encoder, decoder, dense)


def _check_batch(config: AutoencoderConfig, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[1:] != (config.window_k, config.feature_m):
        raise ShapeError(
            f"batch shape {batch.shape} does not match "
            f"[n, {config.window_k}, {config.feature_m}]"
        )
    return batch


def _forward_window(model: ModelArtifact, window: np.ndarray,
                    latent_mask: np.ndarray | None,
                    dec_mask: np.ndarray | None) -> np.ndarray:
    k = model.config.window_k
    h = np.zeros(model.config.hidden_dim)
    c = np.zeros(model.config.hidden_dim)
    for t in range(k):
        h, c, _ = nn.lstm_cell_forward(window[t], h, c, model.encoder_lstm)
    latent = h if latent_mask is None else h * latent_mask
    h = np.zeros(model.config.hidden_dim)
    c = np.zeros(model.config.hidden_dim)
    out = np.empty((k, model.config.feature_m))
    for t in range(k):
        h, c, _ = nn.lstm_cell_forward(latent, h, c, model.decoder_lstm)
        hd = h if dec_mask is None else h * dec_mask[t]
        out[t] = nn.dense_forward(hd, model.output_dense)
    return out


def forward(model: ModelArtifact, batch: np.ndarray, mode: str = "eval",
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Reconstruct a [n, k, m] batch of windows.

    Eval mode is deterministic (dropout off). Train mode draws one dropout
    mask per window from `rng`. Windows are processed independently, so
    results do not depend on batch composition.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    batch = _check_batch(model.config, batch)
    n = batch.shape[0]
    rate = model.config.dropout_rate
    if mode == "train" and rate > 0.0:
        if rng is None:
            raise ConfigError("train-mode forward requires a seeded rng")
        k, hd = model.config.window_k, model.config.hidden_dim
        latent_masks = nn.dropout_mask((n, hd), rate, rng)
        dec_masks = nn.dropout_mask((n, k, hd), rate, rng)
    else:
        latent_masks = dec_masks = None
    recon = np.empty_like(batch)
    for idx in range(n):
        recon[idx] = _forward_window(
            model, batch[idx],
            None if latent_masks is None else latent_masks[idx],
            None if dec_masks is None else dec_masks[idx],
        )
    return recon


def reconstruction_errors(model: ModelArtifact, windows: np.ndarray) -> np.ndarray:
    """Per-window mean absolute reconstruction error, eval mode."""
    windows = _check_batch(model.config, windows)
    recon = forward(model, windows, mode="eval")
    return np.mean(np.abs(recon - windows), axis=(1, 2))


# ---------------------------------------------------------------------------
# Training (batched fast path, time-major internals)


def _forward_batch_cached(model: ModelArtifact, batch_tm: np.ndarray,
                          latent_mask: np.ndarray | None,
                          dec_mask: np.ndarray | None):
    """Batched forward on a time-major [k, n, m] batch with cached
    intermediates; dropout masks are latent_mask [n, h] and dec_mask
    [k, n, h] (None = off)."""
    k = model.config.window_k
    enc_seq, enc_cache = nn.lstm_forward_batch(batch_tm, model.encoder_lstm)
    latent = enc_seq[-1]
    latent_d = latent if latent_mask is None else latent * latent_mask
    dec_seq, dec_cache = nn.lstm_forward_repeat(latent_d, k, model.decoder_lstm)
    dec_d = dec_seq if dec_mask is None else dec_seq * dec_mask
    n = batch_tm.shape[1]
    hd = model.config.hidden_dim
    flat = dec_d.reshape(k * n, hd)
    recon_tm = (flat @ model.output_dense.weight.T + model.output_dense.bias) \
        .reshape(k, n, model.config.feature_m)
    cache = {
        "enc_cache": enc_cache, "dec_cache": dec_cache,
        "latent_mask": latent_mask, "dec_mask": dec_mask, "dec_d": dec_d,
    }
    return recon_tm, cache


def _backward_batch(model: ModelArtifact, d_recon_tm: np.ndarray, cache) -> dict[str, np.ndarray]:
    k, n, m = d_recon_tm.shape
    hd = model.config.hidden_dim
    flat_d = d_recon_tm.reshape(k * n, m)
    flat_dec = cache["dec_d"].reshape(k * n, hd)
    g_dense_w = flat_d.T @ flat_dec
    g_dense_b = flat_d.sum(axis=0)
    d_dec_d = (flat_d @ model.output_dense.weight).reshape(k, n, hd)
    d_dec_seq = d_dec_d if cache["dec_mask"] is None else d_dec_d * cache["dec_mask"]
    d_latent_d, dec_grads = nn.lstm_backward_repeat(cache["dec_cache"],
                                                    model.decoder_lstm, d_dec_seq)
    d_latent = d_latent_d if cache["latent_mask"] is None \
        else d_latent_d * cache["latent_mask"]
    _, enc_grads = nn.lstm_backward_batch(cache["enc_cache"], model.encoder_lstm,
                                          d_h_last=d_latent, need_input_grads=False)
    return {
        "encoder.input_kernel": enc_grads["input_kernel"],
        "encoder.recurrent_kernel": enc_grads["recurrent_kernel"],
        "encoder.bias": enc_grads["bias"],
        "decoder.input_kernel": dec_grads["input_kernel"],
        "decoder.recurrent_kernel": dec_grads["recurrent_kernel"],
        "decoder.bias": dec_grads["bias"],
        "dense.weight": g_dense_w,
        "dense.bias": g_dense_b,
    }


def batch_loss_and_grads(model: ModelArtifact, batch: np.ndarray,
                         latent_mask: np.ndarray | None = None,
                         dec_mask: np.ndarray | None = None
                         ) -> tuple[float, dict[str, np.ndarray]]:
    """MAE of reconstructing `batch` [n, k, m] against itself, with BPTT
    gradients for every parameter tensor."""
    batch = _check_batch(model.config, batch)
    batch_tm = np.ascontiguousarray(np.swapaxes(batch, 0, 1))
    recon_tm, cache = _forward_batch_cached(model, batch_tm, latent_mask, dec_mask)
    loss, d_recon_tm = nn.mae_loss(recon_tm, batch_tm)
    return loss, _backward_batch(model, d_recon_tm, cache)


def train_epochs(model: ModelArtifact, windows: np.ndarray,
                 tcfg: TrainConfig) -> tuple[ModelArtifact, list[float]]:
    """Minibatch training with Adam; each window is its own target.

    Windows are reshuffled every epoch from a dedicated seeded stream, and
    dropout masks come from a second stream, so runs with identical seeds
    produce identical loss histories. Returns the trained artifact and the
    per-epoch mean of batch losses.
    """
    windows = _check_batch(model.config, windows)
    n = windows.shape[0]
    if n == 0:
        raise DataError("no windows to train on")
    if tcfg.epochs == 0:
        return model, []
    shuffle_rng = np.random.default_rng([tcfg.shuffle_seed, 0])
    dropout_rng = np.random.default_rng([tcfg.shuffle_seed, 1])
    rate = model.config.dropout_rate
    k, hd = model.config.window_k, model.config.hidden_dim

    params = model.parameters()
    state = nn.AdamState.init(params)
    history: list[float] = []
    current = model
    for _ in range(tcfg.epochs):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for lo in range(0, n, tcfg.batch_size):
            idx = order[lo:lo + tcfg.batch_size]
            batch = windows[idx]
            if rate > 0.0:
                latent_mask = nn.dropout_mask((len(idx), hd), rate, dropout_rng)
                dec_mask = nn.dropout_mask((k, len(idx), hd), rate, dropout_rng)
            else:
                latent_mask = dec_mask = None
            loss, grads = batch_loss_and_grads(current, batch, latent_mask, dec_mask)
            params, state = nn.adam_step(params, grads, state)
            current = current.with_parameters(params)
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))
    return current, history


# ---------------------------------------------------------------------------
# Serialization


def _lstm_to_doc(p: nn.LstmLayerParams) -> dict:
    return {
        "input_dim": p.input_dim,
        "hidden_dim": p.hidden_dim,
        "input_kernel": p.input_kernel.tolist(),
        "recurrent_kernel": p.recurrent_kernel.tolist(),
        "bias": p.bias.tolist(),
    }


def _lstm_from_doc(doc: dict) -> nn.LstmLayerParams:
    return nn.LstmLayerParams(
        input_dim=int(doc["input_dim"]),
        hidden_dim=int(doc["hidden_dim"]),
        input_kernel=np.asarray(doc["input_kernel"], dtype=np.float64),
        recurrent_kernel=np.asarray(doc["recurrent_kernel"], dtype=np.float64),
        bias=np.asarray(doc["bias"], dtype=np.float64),
    )


def model_to_json(model: ModelArtifact) -> str:
    """Serialize to a JSON document; float repr round-trips exactly."""
    stats = model.channel_stats
    doc = {
        "schema_version": model.schema_version,
        "config": {
            "window_k": model.config.window_k,
            "feature_m": model.config.feature_m,
            "hidden_dim": model.config.hidden_dim,
            "dropout_rate": model.config.dropout_rate,
            "seed": model.config.seed,
        },
        "channel_stats": None if stats is None else {
            "channels": list(stats.channels),
            "mean": stats.mean.tolist(),
            "std": stats.std.tolist(),
        },
        "threshold": model.threshold,
        "encoder_lstm": _lstm_to_doc(model.encoder_lstm),
        "decoder_lstm": _lstm_to_doc(model.decoder_lstm),
        "output_dense": {
            "weight": model.output_dense.weight.tolist(),
            "bias": model.output_dense.bias.tolist(),
        },
    }
    return json.dumps(doc, indent=1, allow_nan=False)


def model_from_json(text: str) -> ModelArtifact:
    """Parse a model document; schema mismatches and malformed content are
    rejected outright (no partially loaded model)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed model document: {exc}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ParseError("model document missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise VersionError(
            f"unsupported schema_version {doc['schema_version']!r}, "
            f"expected {SCHEMA_VERSION}"
        )
    try:
        cfg_doc = doc["config"]
        config = AutoencoderConfig(
            window_k=int(cfg_doc["window_k"]),
            feature_m=int(cfg_doc["feature_m"]),
            hidden_dim=int(cfg_doc["hidden_dim"]),
            dropout_rate=float(cfg_doc["dropout_rate"]),
            seed=int(cfg_doc["seed"]),
        )
        stats_doc = doc["channel_stats"]
        stats = None if stats_doc is None else ChannelStats(
            channels=tuple(stats_doc["channels"]),
            mean=np.asarray(stats_doc["mean"], dtype=np.float64),
            std=np.asarray(stats_doc["std"], dtype=np.float64),
        )
        threshold = doc["threshold"]
        dense_doc = doc["output_dense"]
        return ModelArtifact(
            schema_version=SCHEMA_VERSION,
            config=config,
            encoder_lstm=_lstm_from_doc(doc["encoder_lstm"]),
            decoder_lstm=_lstm_from_doc(doc["decoder_lstm"]),
            output_dense=nn.DenseParams(
                weight=np.asarray(dense_doc["weight"], dtype=np.float64),
                bias=np.asarray(dense_doc["bias"], dtype=np.float64),
            ),
            channel_stats=stats,
            threshold=None if threshold is None else float(threshold),
        )
    except (KeyError, TypeError, ValueError, ShapeError) as exc:
        raise ParseError(f"malformed model document: {exc}") from None


def save_model(model: ModelArtifact, destination: str | Path) -> None:
    """Write the artifact atomically (complete file or no file)."""
    atomic_write_text(destination, model_to_json(model))


def load_model(source: str | Path) -> ModelArtifact:
    return model_from_json(Path(source).read_text())
