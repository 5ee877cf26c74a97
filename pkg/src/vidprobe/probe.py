"""Two-logit linear classifier trained with cross-entropy and Adam.

The probe is a single linear layer over embedding features: logits =
W x + b with W of shape (2, dim). Class index 0 is real, 1 is fake,
matching the store's label byte. Parameters start at zero (the objective
is convex, so only the optimization path depends on it) and all training
arithmetic runs in float64. The seed drives batch shuffling only.

VAPM probe file layout, little-endian:

    magic   4 bytes ASCII "VAPM"
    version u32 = 1
    model_id u16 length + UTF-8 bytes
    dim     u32
    params  (2 * dim + 2) x f64: W row 0, W row 1, b[0], b[1]
    epochs  u32
    batch   u32
    lr      f64
    seed    u64
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .store import (
    ClassLabel,
    EmbeddingRecord,
    EmbeddingStore,
    _atomic_write_bytes,
    l2_normalize_rows,
)

PROBE_MAGIC = b"VAPM"
PROBE_FORMAT_VERSION = 1

DEFAULT_LR = 1e-4
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ProbeFileError(Exception):
    """Bad probe file bytes."""


@dataclass
class LinearProbe:
    weights: np.ndarray  # (2, dim) float64
    bias: np.ndarray  # (2,) float64
    model_id: str = ""

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[0] != 2:
            raise ValueError(f"weights must have shape (2, dim), got {self.weights.shape}")
        if self.bias.shape != (2,):
            raise ValueError(f"bias must have shape (2,), got {self.bias.shape}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("probe parameters must be finite")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class AdamState:
    m_w: np.ndarray
    v_w: np.ndarray
    m_b: np.ndarray
    v_b: np.ndarray
    t: int = 0
    lr: float = DEFAULT_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def init_probe(dim: int, seed: int = 0, model_id: str = "") -> LinearProbe:
    """Zero-initialized probe; `seed` is accepted for interface symmetry
    but parameters are deterministic regardless."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    del seed
    return LinearProbe(np.zeros((2, dim)), np.zeros(2), model_id=model_id)


def init_adam(probe: LinearProbe, lr: float = DEFAULT_LR) -> AdamState:
    return AdamState(
        m_w=np.zeros_like(probe.weights),
        v_w=np.zeros_like(probe.weights),
        m_b=np.zeros_like(probe.bias),
        v_b=np.zeros_like(probe.bias),
        lr=float(lr),
    )


def forward(probe: LinearProbe, x) -> np.ndarray:
    """Logits W x + b for one feature vector."""
    vec = np.asarray(x, dtype=np.float64).reshape(-1)
    if vec.shape[0] != probe.dim:
        raise ValueError(f"dimension mismatch: input dim {vec.shape[0]}, probe dim {probe.dim}")
    return probe.weights @ vec + probe.bias


def forward_batch(probe: LinearProbe, features: np.ndarray) -> np.ndarray:
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape[1] != probe.dim:
        raise ValueError(f"dimension mismatch: input dim {feats.shape[1]}, probe dim {probe.dim}")
    return feats @ probe.weights.T + probe.bias


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=1, keepdims=True)


def softmax_cross_entropy(logits, true_class: int) -> tuple[float, np.ndarray]:
    """Loss and probabilities for one sample; max-shifted for stability."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite logits")
    if true_class not in (0, 1):
        raise ValueError(f"true_class must be 0 or 1, got {true_class}")
    probs = _softmax_rows(z.reshape(1, -1))[0]
    with np.errstate(divide="ignore"):
        loss = float(-np.log(probs[true_class]))
    return loss, probs


def gradients(probe: LinearProbe, features: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy gradients over a batch.

    Per sample the logit error is p - onehot(y); dW averages its outer
    product with the features, db averages the error itself.
    """
    feats = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValueError("empty batch")
    if feats.shape[0] != y.shape[0]:
        raise ValueError(f"batch size mismatch: {feats.shape[0]} features, {y.shape[0]} labels")
    n = feats.shape[0]
    logits = forward_batch(probe, feats)
    probs = _softmax_rows(logits)
    with np.errstate(divide="ignore"):
        losses = -np.log(probs[np.arange(n), y])
    err = probs.copy()
    err[np.arange(n), y] -= 1.0
    d_weights = err.T @ feats / n
    d_bias = err.mean(axis=0)
    return d_weights, d_bias, float(losses.mean())


def adam_step(probe: LinearProbe, state: AdamState, d_weights: np.ndarray, d_bias: np.ndarray):
    """One Adam update, in place; returns the probe and state."""
    if not (np.all(np.isfinite(d_weights)) and np.all(np.isfinite(d_bias))):
        raise ValueError("non-finite gradients")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for param, grad, m, v in (
        (probe.weights, d_weights, state.m_w, state.v_w),
        (probe.bias, d_bias, state.m_b, state.v_b),
    ):
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        m_hat = m / (1.0 - b1 ** state.t)
        v_hat = v / (1.0 - b2 ** state.t)
        param -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return probe, state


@dataclass
class TrainResult:
    probe: LinearProbe
    loss_history: list[float]
    epochs: int
    batch_size: int
    lr: float
    seed: int


def _records_to_arrays(records: Iterable[EmbeddingRecord]):
    recs = list(records)
    if not recs:
        raise ValueError("empty training set")
    dim = recs[0].dim
    for rec in recs:
        if rec.dim != dim:
            raise ValueError(f"dimension mismatch: record {rec.id!r} has dim {rec.dim}")
    feats = np.stack([rec.vector for rec in recs]).astype(np.float64)
    labels = np.array([int(rec.class_label) for rec in recs], dtype=np.int64)
    return feats, labels, dim


def train(
    data: Union[EmbeddingStore, Iterable[EmbeddingRecord]],
    config: TrainConfig = TrainConfig(),
    lr: float = DEFAULT_LR,
    model_id: str | None = None,
    normalize: bool = False,
) -> TrainResult:
    """Train a probe; deterministic for fixed (data, config, seed).

    Batches are consecutive slices of a per-epoch permutation drawn from a
    generator seeded with (seed, epoch); the final short batch runs at its
    natural size. The loss history holds one mean loss per batch. With
    normalize=True feature rows are L2-normalized first (callers must then
    normalize at inference too; the probe file does not carry the flag,
    though run provenance does).
    """
    if isinstance(data, EmbeddingStore):
        if model_id is None:
            model_id = data.model_id
        records: Iterable[EmbeddingRecord] = data.records
    else:
        records = data
    feats, labels, dim = _records_to_arrays(records)
    if normalize:
        feats = l2_normalize_rows(feats)
    classes = set(np.unique(labels).tolist())
    if classes != {0, 1}:
        raise ValueError(f"degenerate labels: training set contains only {sorted(classes)}")

    probe = init_probe(dim, model_id=model_id or "")
    state = init_adam(probe, lr=lr)
    n = feats.shape[0]
    history: list[float] = []
    for epoch in range(config.epochs):
        if config.shuffle:
            order = np.random.default_rng((config.seed, epoch)).permutation(n)
        else:
            order = np.arange(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            d_w, d_b, loss = gradients(probe, feats[batch], labels[batch])
            adam_step(probe, state, d_w, d_b)
            history.append(loss)
    return TrainResult(
        probe=probe,
        loss_history=history,
        epochs=config.epochs,
        batch_size=config.batch_size,
        lr=lr,
        seed=config.seed,
    )


@dataclass(frozen=True)
class PredictResult:
    label: ClassLabel
    p_fake: float


def predict(probe: LinearProbe, x) -> PredictResult:
    """Argmax label; exactly equal logits resolve to real (index 0)."""
    logits = forward(probe, x)
    _, probs = softmax_cross_entropy(logits, 0)
    return PredictResult(ClassLabel(int(np.argmax(logits))), float(probs[1]))


def predict_batch(probe: LinearProbe, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels (uint8) and fake-class probabilities for a feature matrix."""
    logits = forward_batch(probe, np.asarray(features, dtype=np.float64))
    labels = np.argmax(logits, axis=1).astype(np.uint8)
    probs = _softmax_rows(logits)
    return labels, probs[:, 1]


def probe_to_bytes(probe: LinearProbe, epochs: int, batch_size: int, lr: float, seed: int) -> bytes:
    raw_model = probe.model_id.encode("utf-8")
    if len(raw_model) > 0xFFFF:
        raise ValueError("model_id too long for format")
    out = bytearray()
    out += PROBE_MAGIC
    out += struct.pack("<I", PROBE_FORMAT_VERSION)
    out += struct.pack("<H", len(raw_model)) + raw_model
    out += struct.pack("<I", probe.dim)
    params = np.concatenate([probe.weights[0], probe.weights[1], probe.bias])
    out += params.astype("<f8", copy=False).tobytes()
    out += struct.pack("<IIdQ", int(epochs), int(batch_size), float(lr), int(seed))
    return bytes(out)


@dataclass(frozen=True)
class LoadedProbe:
    probe: LinearProbe
    epochs: int
    batch_size: int
    lr: float
    seed: int


def save_probe(path, probe: LinearProbe, epochs: int, batch_size: int, lr: float, seed: int) -> int:
    """Write a VAPM file atomically; returns the byte count."""
    payload = probe_to_bytes(probe, epochs, batch_size, lr, seed)
    _atomic_write_bytes(Path(path), payload, suffix=".vapm.tmp")
    return len(payload)


def save_probe_result(path, result: TrainResult) -> int:
    return save_probe(
        path, result.probe, result.epochs, result.batch_size, result.lr, result.seed
    )


def load_probe(path) -> LoadedProbe:
    data = Path(path).read_bytes()
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise ProbeFileError(f"corrupt probe file: truncated at byte {pos}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if len(data) < 4 or take(4) != PROBE_MAGIC:
        raise ProbeFileError("unsupported format: bad magic bytes")
    version = struct.unpack("<I", take(4))[0]
    if version != PROBE_FORMAT_VERSION:
        raise ProbeFileError(f"unsupported format: version {version}")
    (model_len,) = struct.unpack("<H", take(2))
    model_id = take(model_len).decode("utf-8")
    (dim,) = struct.unpack("<I", take(4))
    if dim < 1:
        raise ProbeFileError(f"corrupt probe file: dim {dim}")
    params = np.frombuffer(take(8 * (2 * dim + 2)), dtype="<f8")
    epochs, batch_size, lr, seed = struct.unpack("<IIdQ", take(24))
    if pos != len(data):
        raise ProbeFileError(f"corrupt probe file: {len(data) - pos} trailing bytes")
    probe = LinearProbe(
        weights=np.stack([params[:dim], params[dim:2 * dim]]).copy(),
        bias=params[2 * dim:].copy(),
        model_id=model_id,
    )
    return LoadedProbe(probe=probe, epochs=epochs, batch_size=batch_size, lr=lr, seed=seed)


def check_store_compat(probe: LinearProbe, store: EmbeddingStore) -> None:
    """Dim mismatch is fatal; model_id mismatch only warns."""
    if probe.dim != store.dim:
        raise ValueError(
            f"dimension mismatch: probe dim {probe.dim}, store dim {store.dim}"
        )
    if probe.model_id and store.model_id and probe.model_id != store.model_id:
        warnings.warn(
            f"probe was trained on model {probe.model_id!r} but store carries "
            f"{store.model_id!r}; proceeding (dimensions agree)"
        )
