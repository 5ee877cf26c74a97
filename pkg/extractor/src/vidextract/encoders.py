"""Encoder registry.

An encoder wraps a frozen pretrained model. Image encoders embed single
frames (the clip feature is the frame average, computed by the caller);
video encoders embed a fixed-size clip of frames in one pass. Embedding
dimensionality is discovered from the loaded model, never hardcoded.

The built-in ids are "siglip-base" and "videomae"; both need the
`encoders` extra (torch + transformers) and checkpoint access. Tests and
custom pipelines can register their own factories.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class EncoderError(Exception):
    pass


class ImageEncoder:
    """Embeds individual frames; output shape (n_frames, dim)."""

    kind = "image"
    model_id: str
    dim: int

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class VideoEncoder:
    """Embeds a native_frames-long clip in one pass; output shape (dim,)."""

    kind = "video"
    model_id: str
    dim: int
    native_frames: int = 16

    def embed_clip(self, frames: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SiglipImageEncoder(ImageEncoder):
    DEFAULT_CHECKPOINT = "google/siglip-base-patch16-224"

    def __init__(self, checkpoint: str | None = None, device: str | None = None,
                 batch_size: int = 64):
        try:
            import torch
            from transformers import SiglipImageProcessor, SiglipVisionModel
        except ImportError as exc:
            raise EncoderError(
                "siglip-base needs the 'encoders' extra (torch + transformers)"
            ) from exc
        self._torch = torch
        checkpoint = checkpoint or self.DEFAULT_CHECKPOINT
        self._processor = SiglipImageProcessor.from_pretrained(checkpoint)
        self._model = SiglipVisionModel.from_pretrained(checkpoint).eval()
        self._device = device or "cpu"
        self._model.to(self._device)
        self._batch_size = batch_size
        self.dim = int(self._model.config.hidden_size)
        size = self._processor.size.get("height", "na")
        self.model_id = f"siglip-base+{checkpoint.rsplit('/', 1)[-1]}+res{size}"

    def embed_frames(self, frames: np.ndarray) -> np.ndarray:
        chunks = []
        with self._torch.no_grad():
            for start in range(0, len(frames), self._batch_size):
                batch = list(frames[start:start + self._batch_size])
                inputs = self._processor(images=batch, return_tensors="pt").to(self._device)
                out = self._model(**inputs).pooler_output
                chunks.append(out.cpu().numpy().astype(np.float32))
        return np.concatenate(chunks, axis=0)


class VideoMaeEncoder(VideoEncoder):
    DEFAULT_CHECKPOINT = "MCG-NJU/videomae-base"

    def __init__(self, checkpoint: str | None = None, device: str | None = None,
                 batch_size: int = 64):
        try:
            import torch
            from transformers import VideoMAEImageProcessor, VideoMAEModel
        except ImportError as exc:
            raise EncoderError(
                "videomae needs the 'encoders' extra (torch + transformers)"
            ) from exc
        self._torch = torch
        checkpoint = checkpoint or self.DEFAULT_CHECKPOINT
        self._processor = VideoMAEImageProcessor.from_pretrained(checkpoint)
        self._model = VideoMAEModel.from_pretrained(checkpoint).eval()
        self._device = device or "cpu"
        self._model.to(self._device)
        self.dim = int(self._model.config.hidden_size)
        self.native_frames = int(self._model.config.num_frames)
        self.model_id = f"videomae+{checkpoint.rsplit('/', 1)[-1]}+f{self.native_frames}"

    def embed_clip(self, frames: np.ndarray) -> np.ndarray:
        with self._torch.no_grad():
            inputs = self._processor(list(frames), return_tensors="pt").to(self._device)
            tokens = self._model(**inputs).last_hidden_state
            return tokens.mean(dim=1)[0].cpu().numpy().astype(np.float32)


_REGISTRY: dict[str, Callable[..., ImageEncoder | VideoEncoder]] = {
    "siglip-base": SiglipImageEncoder,
    "videomae": VideoMaeEncoder,
}


def register_encoder(encoder_id: str, factory: Callable[..., ImageEncoder | VideoEncoder]):
    _REGISTRY[encoder_id] = factory


def available_encoders() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def load_encoder(encoder_id: str, device: str | None = None,
                 batch_size: int = 64) -> ImageEncoder | VideoEncoder:
    if encoder_id not in _REGISTRY:
        raise EncoderError(
            f"unknown encoder {encoder_id!r}; available: {available_encoders()}"
        )
    encoder = _REGISTRY[encoder_id](device=device, batch_size=batch_size)
    if getattr(encoder, "dim", 0) < 1:
        raise EncoderError(f"encoder {encoder_id!r} reported no embedding dimension")
    return encoder
