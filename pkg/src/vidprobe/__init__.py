"""vidprobe: detect AI-generated videos from visual-encoder embeddings.

Two classifiers over precomputed per-clip feature vectors: a training-free
nearest-reference rule under Euclidean distance, and a trained two-logit
linear probe. Cross-generator evaluation protocols (one-to-many and
many-to-many) produce per-test-source F1-Real / F1-Fake reports.
"""

__version__ = "0.1.0"

from .store import (  # noqa: F401
    ClassLabel,
    CorruptStoreError,
    DuplicateRecordError,
    EmbeddingRecord,
    EmbeddingStore,
    StoreError,
    UnsupportedFormatError,
    average_frame_features,
    euclidean_distance,
    read_store,
    write_store,
)
