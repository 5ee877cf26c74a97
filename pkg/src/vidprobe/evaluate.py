"""Cross-generator evaluation: leakage-free splits, F1 metrics, protocols.

Two protocols mirror the benchmark tables this toolkit reports:

* one-to-many: the model trains on (or references) all fakes from a single
  source plus half of the real pool; every other fake source is a test
  column, paired with the held-out reals.
* many-to-many: each training source is split in half by origin video, the
  model uses the train halves plus half the reals, and test columns cover
  the held-out halves plus sources that were never trained on.

Splits group clips by origin_video_id so no parent video contributes to
both sides.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import probe as probe_mod
from . import reference
from .ingest import KNOWN_FAKE_SOURCES, SOURCE_DISPLAY_NAMES, ClipView, Manifest
from .store import ClassLabel, EmbeddingStore, l2_normalize_rows


class EvalError(Exception):
    """Protocol misuse or data that cannot support the requested run."""


class Protocol(enum.Enum):
    ONE_TO_MANY = "one-to-many"
    MANY_TO_MANY = "many-to-many"


@dataclass(frozen=True)
class SplitSpec:
    protocol: Protocol
    train_sources: frozenset[str]
    seed: int
    train_fraction: float = 0.5
    test_sources: frozenset[str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "train_sources", frozenset(self.train_sources))
        if self.test_sources is not None:
            object.__setattr__(self, "test_sources", frozenset(self.test_sources))
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")


@dataclass(frozen=True)
class SplitResult:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    train_by_source: Mapping[str, tuple[str, ...]]
    test_by_source: Mapping[str, tuple[str, ...]]
    train_origins: frozenset[str]
    test_origins: frozenset[str]


def canonical_source_order(sources: Iterable[str]) -> list[str]:
    """Known fake sources in report order, then anything else alphabetically."""
    present = set(sources)
    ordered = [s for s in KNOWN_FAKE_SOURCES if s in present]
    ordered += sorted(present - set(KNOWN_FAKE_SOURCES))
    return ordered


def display_name(source: str) -> str:
    return SOURCE_DISPLAY_NAMES.get(source, source)


def _source_rng(seed: int, source: str) -> np.random.Generator:
    digest = int.from_bytes(hashlib.sha256(source.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng((int(seed), digest))


def split_source_clips(
    views: Sequence[ClipView], seed: int, fraction: float, source: str
) -> tuple[list[str], list[str]]:
    """Split one source's clips by origin group.

    Origin groups are shuffled with a (seed, source)-keyed generator and
    assigned to the train side until it holds `fraction` of the clips; the
    remainder is the test side. Output id lists keep manifest order.
    """
    groups: dict[str, list[str]] = {}
    order: list[str] = []
    for view in views:
        if view.origin_video_id not in groups:
            order.append(view.origin_video_id)
        groups.setdefault(view.origin_video_id, []).append(view.clip_id)
    total = sum(len(g) for g in groups.values())
    target = fraction * total
    perm = _source_rng(seed, source).permutation(len(order))
    train_origins: set[str] = set()
    count = 0
    for k in perm:
        if count >= target:
            break
        origin = order[int(k)]
        train_origins.add(origin)
        count += len(groups[origin])
    train_ids = [v.clip_id for v in views if v.origin_video_id in train_origins]
    test_ids = [v.clip_id for v in views if v.origin_video_id not in train_origins]
    return train_ids, test_ids


def make_split(manifest: Manifest, spec: SplitSpec) -> SplitResult:
    """Assign every manifest clip to train or test per the protocol.

    Real sources are always split at the train fraction. In many-to-many,
    requested fake train sources are split too; in one-to-many the single
    train source contributes all of its clips to the train side. All other
    fake sources are test-only.
    """
    by_source: dict[str, list[ClipView]] = {}
    for view in manifest.clip_views():
        by_source.setdefault(view.source, []).append(view)

    missing = sorted(spec.train_sources - set(by_source))
    if missing:
        raise EvalError(f"requested source(s) not in manifest: {', '.join(missing)}")

    fake_train = {
        s for s in spec.train_sources
        if by_source[s][0].class_label is ClassLabel.FAKE
    }
    if spec.protocol is Protocol.ONE_TO_MANY and len(fake_train) != 1:
        raise EvalError(
            f"one-to-many needs exactly one fake train source, got {sorted(fake_train)}"
        )

    train_by_source: dict[str, tuple[str, ...]] = {}
    test_by_source: dict[str, tuple[str, ...]] = {}
    for source, views in by_source.items():
        is_real = views[0].class_label is ClassLabel.REAL
        if is_real or (spec.protocol is Protocol.MANY_TO_MANY and source in fake_train):
            train_ids, test_ids = split_source_clips(
                views, spec.seed, spec.train_fraction, source
            )
        elif spec.protocol is Protocol.ONE_TO_MANY and source in fake_train:
            train_ids, test_ids = [v.clip_id for v in views], []
        else:
            train_ids, test_ids = [], [v.clip_id for v in views]
        train_by_source[source] = tuple(train_ids)
        test_by_source[source] = tuple(test_ids)

    train_set = {i for ids in train_by_source.values() for i in ids}
    origin_of = {v.clip_id: v.origin_video_id for v in manifest.clip_views()}
    train_ids = tuple(v.clip_id for v in manifest.clip_views() if v.clip_id in train_set)
    test_ids = tuple(v.clip_id for v in manifest.clip_views() if v.clip_id not in train_set)
    return SplitResult(
        train_ids=train_ids,
        test_ids=test_ids,
        train_by_source=train_by_source,
        test_by_source=test_by_source,
        train_origins=frozenset(origin_of[i] for i in train_ids),
        test_origins=frozenset(origin_of[i] for i in test_ids),
    )


@dataclass(frozen=True)
class ConfusionCounts:
    """Counts with fake as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionCounts":
        """The same outcomes with real treated as positive."""
        return ConfusionCounts(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


def f1(counts: ConfusionCounts) -> float:
    """Harmonic mean of precision and recall; zero denominators give 0."""
    if counts.tp + counts.fp == 0 or counts.tp + counts.fn == 0:
        return 0.0
    precision = counts.tp / (counts.tp + counts.fp)
    recall = counts.tp / (counts.tp + counts.fn)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class CellMetrics:
    f1_real: float
    f1_fake: float
    accuracy: float
    counts: ConfusionCounts


def per_class_f1(preds: Sequence, labels: Sequence) -> CellMetrics:
    """F1 for each class as positive, plus accuracy, from paired outcomes."""
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(labels)} labels")
    tp = fp = tn = fn = 0
    for p, y in zip(preds, labels):
        p, y = int(p), int(y)
        if p == 1 and y == 1:
            tp += 1
        elif p == 1 and y == 0:
            fp += 1
        elif p == 0 and y == 0:
            tn += 1
        else:
            fn += 1
    counts = ConfusionCounts(tp, fp, tn, fn)
    accuracy = (tp + tn) / counts.total if counts.total else 0.0
    return CellMetrics(
        f1_real=f1(counts.swapped()),
        f1_fake=f1(counts),
        accuracy=accuracy,
        counts=counts,
    )


@dataclass
class ReportRow:
    train_label: str
    model_id: str
    cells: dict[str, CellMetrics] = field(default_factory=dict)


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)

    def columns(self) -> list[str]:
        keys: set[str] = set()
        for row in self.rows:
            keys.update(row.cells)
        return canonical_source_order(keys)


@dataclass(frozen=True)
class EvalConfig:
    seed: int
    train_fraction: float = 0.5
    epochs: int = 100
    batch_size: int = 32
    lr: float = probe_mod.DEFAULT_LR
    shuffle: bool = True
    threads: int = 1
    include_diagonal: bool = False
    allow_leakage: bool = False
    normalize: bool = False

    def train_config(self) -> probe_mod.TrainConfig:
        return probe_mod.TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            shuffle=self.shuffle,
        )


def train_set_label(sources: Iterable[str]) -> str:
    """Human-readable train-side label matching the benchmark row names."""
    src = set(sources)
    open_source = {"latte", "modelscope", "opensora", "zeroscope", "text2video"}
    if src == open_source:
        return "Open-source models"
    if src == open_source | {"sora"}:
        return "Open-source models + Sora"
    return " + ".join(display_name(s) for s in canonical_source_order(src))


def _subset_records(store: EmbeddingStore, clip_ids: Sequence[str]):
    try:
        return store.subset(clip_ids).records
    except KeyError as exc:
        raise EvalError(f"store {store.model_id!r}: {exc.args[0]}") from None


def _labels_of(records) -> list[int]:
    return [int(rec.class_label) for rec in records]


def _predict_with(method: str, model, records, config: EvalConfig) -> list[int]:
    if method == "distance":
        preds = reference.classify_batch(
            records, model, threads=config.threads, normalize=config.normalize
        )
        return [int(p.label) for p in preds]
    feats = np.stack([rec.vector for rec in records]).astype(np.float64)
    if config.normalize:
        feats = l2_normalize_rows(feats)
    labels, _ = probe_mod.predict_batch(model, feats)
    return labels.tolist()


def _fit_model(method: str, records, config: EvalConfig, model_id: str):
    if method == "distance":
        return reference.build_index(records, normalize=config.normalize)
    return probe_mod.train(
        records,
        config.train_config(),
        lr=config.lr,
        model_id=model_id,
        normalize=config.normalize,
    ).probe


def _check_method(method: str) -> None:
    if method not in ("distance", "probe"):
        raise EvalError(f"unknown method {method!r}; expected 'distance' or 'probe'")


def _as_store_list(stores) -> list[EmbeddingStore]:
    if isinstance(stores, EmbeddingStore):
        return [stores]
    return list(stores)


def _real_sources_of(manifest: Manifest) -> list[str]:
    seen: dict[str, None] = {}
    for view in manifest.clip_views():
        if view.class_label is ClassLabel.REAL:
            seen.setdefault(view.source, None)
    if not seen:
        raise EvalError("manifest has no real clips")
    return list(seen)


def run_one_to_many(
    stores,
    manifest: Manifest,
    train_source: str,
    method: str,
    config: EvalConfig,
) -> EvalReport:
    """Train/reference on one fake source; test on every other fake source.

    Reals are split in half by origin: one half joins the train side, the
    other half appears in every test cell. The train source has no test
    column unless include_diagonal is set, in which case a second model
    fitted on half of the source fills it without leakage.
    """
    _check_method(method)
    spec = SplitSpec(
        Protocol.ONE_TO_MANY,
        frozenset({train_source}),
        seed=config.seed,
        train_fraction=config.train_fraction,
    )
    split = make_split(manifest, spec)
    real_sources = _real_sources_of(manifest)
    real_train = [i for s in real_sources for i in split.train_by_source[s]]
    real_test = [i for s in real_sources for i in split.test_by_source[s]]
    fake_train = list(split.train_by_source[train_source])

    test_sources = [
        s
        for s in canonical_source_order(split.test_by_source)
        if s != train_source and s not in real_sources and split.test_by_source[s]
    ]

    report = EvalReport()
    for store in _as_store_list(stores):
        train_records = _subset_records(store, fake_train + real_train)
        model = _fit_model(method, train_records, config, store.model_id)
        row = ReportRow(train_label=display_name(train_source), model_id=store.model_id)
        for source in test_sources:
            test_records = _subset_records(
                store, list(split.test_by_source[source]) + real_test
            )
            preds = _predict_with(method, model, test_records, config)
            row.cells[source] = per_class_f1(preds, _labels_of(test_records))
        if config.include_diagonal:
            row.cells[train_source] = _diagonal_cell(
                store, manifest, train_source, method, config, real_train, real_test
            )
        report.rows.append(row)
    return report


def _diagonal_cell(
    store: EmbeddingStore,
    manifest: Manifest,
    train_source: str,
    method: str,
    config: EvalConfig,
    real_train: list[str],
    real_test: list[str],
) -> CellMetrics:
    views = [v for v in manifest.clip_views() if v.source == train_source]
    half_train, half_test = split_source_clips(
        views, config.seed, config.train_fraction, train_source
    )
    records = _subset_records(store, half_train + real_train)
    model = _fit_model(method, records, config, store.model_id)
    test_records = _subset_records(store, half_test + real_test)
    preds = _predict_with(method, model, test_records, config)
    return per_class_f1(preds, _labels_of(test_records))


def run_many_to_many(
    stores,
    manifest: Manifest,
    train_sources: Iterable[str],
    method: str,
    config: EvalConfig,
) -> EvalReport:
    """Train/reference on half of each requested source; test everywhere.

    Sources outside the train set are test-only. With allow_leakage (a
    diagnostic mode) test cells reuse the train halves instead of the
    held-out halves.
    """
    _check_method(method)
    train_sources = frozenset(train_sources)
    spec = SplitSpec(
        Protocol.MANY_TO_MANY,
        train_sources,
        seed=config.seed,
        train_fraction=config.train_fraction,
    )
    split = make_split(manifest, spec)
    real_sources = _real_sources_of(manifest)
    real_train = [i for s in real_sources for i in split.train_by_source[s]]
    real_test = [i for s in real_sources for i in split.test_by_source[s]]

    train_ids = [
        i
        for s in canonical_source_order(train_sources)
        for i in split.train_by_source[s]
    ] + real_train

    fake_sources = [
        s for s in canonical_source_order(split.test_by_source) if s not in real_sources
    ]

    real_eval = real_train if config.allow_leakage else real_test
    report = EvalReport()
    for store in _as_store_list(stores):
        train_records = _subset_records(store, train_ids)
        model = _fit_model(method, train_records, config, store.model_id)
        row = ReportRow(train_label=train_set_label(train_sources), model_id=store.model_id)
        for source in fake_sources:
            if config.allow_leakage and source in train_sources:
                fake_eval = list(split.train_by_source[source])
            else:
                fake_eval = list(split.test_by_source[source])
            if not fake_eval:
                continue
            test_records = _subset_records(store, fake_eval + real_eval)
            preds = _predict_with(method, model, test_records, config)
            row.cells[source] = per_class_f1(preds, _labels_of(test_records))
        report.rows.append(row)
    return report


def run_reference_eval(
    refs: EmbeddingStore,
    tests: EmbeddingStore,
    per_source: bool = False,
    threads: int = 1,
    normalize: bool = False,
) -> EvalReport:
    """Directly score one store against a reference store (no protocol)."""
    if refs.dim != tests.dim:
        raise EvalError(f"dimension mismatch: refs dim {refs.dim}, tests dim {tests.dim}")
    index = reference.build_index(refs.records, normalize=normalize)
    preds = reference.classify_batch(
        tests.records, index, threads=threads, normalize=normalize
    )
    pred_labels = [int(p.label) for p in preds]
    true_labels = [int(r.class_label) for r in tests.records]
    row = ReportRow(train_label="reference", model_id=refs.model_id)
    row.cells["overall"] = per_class_f1(pred_labels, true_labels)
    if per_source:
        by_source: dict[str, list[int]] = {}
        for i, rec in enumerate(tests.records):
            by_source.setdefault(rec.source, []).append(i)
        for source in canonical_source_order(by_source):
            idx = by_source[source]
            row.cells[source] = per_class_f1(
                [pred_labels[i] for i in idx], [true_labels[i] for i in idx]
            )
    return EvalReport(rows=[row])


# --- rendering ---------------------------------------------------------

REPORT_FORMATS = ("table", "csv", "jsonl")


def _score(value: float) -> str:
    """Scores render as percentages with one decimal."""
    return f"{value * 100.0:.1f}"


def _ordered_columns(report: EvalReport) -> list[str]:
    cols = report.columns()
    if "overall" in cols:
        cols.remove("overall")
        cols.insert(0, "overall")
    return cols


def render_report(report: EvalReport, fmt: str = "table") -> bytes:
    """Deterministic bytes for a report in table, csv, or jsonl form."""
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "jsonl":
        return _render_jsonl(report)
    return _render_table(report)


def _render_csv(report: EvalReport) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["train", "model", "test", "f1_real", "f1_fake", "accuracy", "tp", "fp", "tn", "fn"]
    )
    for row in report.rows:
        for col in _ordered_columns(report):
            cell = row.cells.get(col)
            if cell is None:
                continue
            writer.writerow(
                [
                    row.train_label,
                    row.model_id,
                    display_name(col),
                    _score(cell.f1_real),
                    _score(cell.f1_fake),
                    _score(cell.accuracy),
                    cell.counts.tp,
                    cell.counts.fp,
                    cell.counts.tn,
                    cell.counts.fn,
                ]
            )
    return buf.getvalue().encode("utf-8")


def _render_jsonl(report: EvalReport) -> bytes:
    lines = []
    for row in report.rows:
        for col in _ordered_columns(report):
            cell = row.cells.get(col)
            if cell is None:
                continue
            lines.append(
                json.dumps(
                    {
                        "train": row.train_label,
                        "model": row.model_id,
                        "test": col,
                        "f1_real": float(_score(cell.f1_real)),
                        "f1_fake": float(_score(cell.f1_fake)),
                        "accuracy": float(_score(cell.accuracy)),
                        "counts": {
                            "tp": cell.counts.tp,
                            "fp": cell.counts.fp,
                            "tn": cell.counts.tn,
                            "fn": cell.counts.fn,
                        },
                    }
                )
            )
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def _render_table(report: EvalReport) -> bytes:
    columns = _ordered_columns(report)
    header = ["Train", "Model", "Metric"] + [display_name(c) for c in columns]
    body: list[list[str]] = []
    for row in report.rows:
        for metric, getter in (
            ("F1-Real", lambda c: _score(c.f1_real)),
            ("F1-Fake", lambda c: _score(c.f1_fake)),
            ("Acc", lambda c: _score(c.accuracy)),
        ):
            line = [row.train_label, row.model_id, metric]
            for col in columns:
                cell = row.cells.get(col)
                line.append(getter(cell) if cell is not None else "-")
            body.append(line)
    widths = [
        max(len(header[i]), *(len(line[i]) for line in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    def fmt_line(parts):
        return "  ".join(p.ljust(widths[i]) for i, p in enumerate(parts)).rstrip()
    lines = [fmt_line(header), fmt_line(["-" * w for w in widths])]
    lines += [fmt_line(line) for line in body]
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_report_jsonl(data: bytes) -> EvalReport:
    """Rebuild a report from its jsonl rendering (rendering precision)."""
    rows: dict[tuple[str, str], ReportRow] = {}
    order: list[tuple[str, str]] = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            counts = ConfusionCounts(
                tp=int(obj["counts"]["tp"]),
                fp=int(obj["counts"]["fp"]),
                tn=int(obj["counts"]["tn"]),
                fn=int(obj["counts"]["fn"]),
            )
            cell = CellMetrics(
                f1_real=float(obj["f1_real"]) / 100.0,
                f1_fake=float(obj["f1_fake"]) / 100.0,
                accuracy=float(obj["accuracy"]) / 100.0,
                counts=counts,
            )
            key = (str(obj["train"]), str(obj["model"]))
            test = str(obj["test"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise EvalError(f"bad report line {lineno}: {exc}") from None
        if key not in rows:
            rows[key] = ReportRow(train_label=key[0], model_id=key[1])
            order.append(key)
        rows[key].cells[test] = cell
    return EvalReport(rows=[rows[k] for k in order])
