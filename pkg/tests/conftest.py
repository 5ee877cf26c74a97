import numpy as np
import pytest

from vidprobe.store import ClassLabel, EmbeddingRecord, EmbeddingStore


def make_record(rec_id, label, source, vector):
    return EmbeddingRecord(rec_id, ClassLabel(label), source, np.asarray(vector, np.float32))


def random_store(rng, n, dim, model_id="test-encoder", sources=("youtube-vos", "latte")):
    records = []
    for i in range(n):
        label = int(rng.random() < 0.5)
        records.append(
            make_record(
                f"clip-{i:05d}",
                label,
                sources[label % len(sources)],
                rng.normal(size=dim).astype(np.float32),
            )
        )
    return EmbeddingStore(model_id, dim, records)


def gaussian_records(rng, n_per_class, dim, separation=3.0, sources=("youtube-vos", "fake-gen")):
    """Two well-separated Gaussian clusters at -/+ separation * ones."""
    records = []
    for label, sign in ((0, -1.0), (1, 1.0)):
        mean = sign * separation * np.ones(dim)
        feats = rng.normal(loc=mean, scale=1.0, size=(n_per_class, dim))
        for i in range(n_per_class):
            records.append(
                make_record(f"{sources[label]}-{i:05d}", label, sources[label], feats[i])
            )
    return records


def reference_dataset_listing():
    """A listing shaped like the benchmark dataset's published statistics.

    Per-source clip counts: youtube-vos 4005, each open-source model 1000,
    sora 3988, veo 238, dreammachine 631, videopoet 272. Sources whose
    videos run longer than one clip are modeled as multi-clip parents.
    """
    listing = []

    def add(source, count, duration, fps_cycle):
        for i in range(count):
            listing.append(
                {
                    "video_id": f"{source}-{i:05d}",
                    "source": source,
                    "duration": duration,
                    "fps": fps_cycle[i % len(fps_cycle)],
                }
            )

    add("youtube-vos", 4005, 2.0, (24, 30))
    for src in ("modelscope", "text2video", "zeroscope", "latte", "opensora"):
        add(src, 1000, 2.0, (8,))
    add("sora", 1994, 4.0, (24, 25, 30))  # 2 clips per parent -> 3988
    add("veo", 119, 4.0, (24, 30))  # -> 238
    add("dreammachine", 631, 2.0, (24, 30))
    add("videopoet", 136, 4.0, (8,))  # -> 272
    return listing


@pytest.fixture(scope="session")
def reference_manifest():
    from vidprobe.ingest import build_manifest

    return build_manifest(reference_dataset_listing())


def synthetic_protocol_dataset(
    rng,
    fake_sources=("gen-a", "gen-b", "gen-c", "gen-d", "gen-e"),
    clips_per_fake=60,
    real_clips=150,
    dim=16,
    model_id="enc-test",
):
    """Matched manifest + store: real and fake clusters sit symmetrically
    at -/+ 3 per component, and each fake source is further shifted along
    its own axis so sources are distinct but share the fake offset."""
    from vidprobe.ingest import IngestConfig, build_manifest

    listing = []
    records = []
    real_mean = np.full(dim, -3.0)
    for i in range(real_clips):
        vid = f"real-{i:04d}"
        listing.append({"video_id": vid, "source": "youtube-vos", "duration": 2.0, "fps": 24})
        records.append(
            make_record(f"{vid}:0000", 0, "youtube-vos", rng.normal(loc=real_mean, scale=1.0))
        )
    for k, src in enumerate(fake_sources):
        mean = np.full(dim, 3.0)
        mean[k % dim] += 2.0
        for i in range(clips_per_fake):
            vid = f"{src}-{i:04d}"
            listing.append({"video_id": vid, "source": src, "duration": 2.0, "fps": 8})
            records.append(make_record(f"{vid}:0000", 1, src, rng.normal(loc=mean, scale=1.0)))
    manifest = build_manifest(listing, IngestConfig(allow_unknown_source=True))
    store = EmbeddingStore(model_id, dim, records)
    return manifest, store
