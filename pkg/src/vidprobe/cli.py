"""vidprobe command-line interface.

Subcommands: ingest, stats, train, eval-distance, eval, report,
verify-store. Exit codes: 0 success, 1 usage error, 2 data error.
Results go to declared output paths or stdout; diagnostics to stderr.

A JSON config file (one flat object, keys matching flag names with
underscores) can supply any option; explicit flags override it. Every
command that writes an output also writes `<out>.provenance.json` holding
the fully resolved config plus SHA-256 digests of its inputs, and that
file can itself be passed back via --config.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__, evaluate, ingest, probe, store
from .evaluate import EvalConfig, EvalError

PROVENANCE_VERSION = 1


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="vidprobe", description=__doc__)
    parser.add_argument("--version", action="version", version=f"vidprobe {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--quiet", action="store_true", default=None,
                       help="suppress progress messages")
        p.add_argument("--threads", type=int, help="cap parallelism (default: all cores)")

    p = sub.add_parser("ingest", help="build a clip manifest from a video listing")
    common(p)
    p.add_argument("--listing", help="JSONL video listing")
    p.add_argument("--out", help="output manifest path")
    p.add_argument("--clip-length", type=float, dest="clip_length")
    p.add_argument("--allow-unknown-source", action="store_true", default=None,
                   dest="allow_unknown_source")
    p.add_argument("--real-sources", dest="real_sources",
                   help="comma-separated real-corpus source names")

    p = sub.add_parser("stats", help="per-source clip counts and minutes")
    common(p)
    p.add_argument("--manifest")
    p.add_argument("--format", dest="format", choices=("table", "csv", "jsonl"))

    p = sub.add_parser("train", help="train the linear probe on a store")
    common(p)
    p.add_argument("--store")
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-shuffle", action="store_true", default=None, dest="no_shuffle")
    p.add_argument("--normalize", action="store_true", default=None,
                   help="L2-normalize features first (experimental)")

    p = sub.add_parser("eval-distance", help="score a test store against a reference store")
    common(p)
    p.add_argument("--refs")
    p.add_argument("--tests")
    p.add_argument("--per-source", action="store_true", default=None, dest="per_source")
    p.add_argument("--normalize", action="store_true", default=None)
    p.add_argument("--report", dest="report")
    p.add_argument("--format", dest="format", choices=evaluate.REPORT_FORMATS)

    p = sub.add_parser("eval", help="run a generalization protocol")
    common(p)
    p.add_argument("--protocol", choices=("one-to-many", "many-to-many"))
    p.add_argument("--method", choices=("distance", "probe"))
    p.add_argument("--train-source", dest="train_source")
    p.add_argument("--train-sources", dest="train_sources",
                   help="comma-separated source names (many-to-many)")
    p.add_argument("--store", action="append",
                   help="embedding store; repeat for several encoders")
    p.add_argument("--manifest")
    p.add_argument("--seed", type=int)
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--report", dest="report")
    p.add_argument("--format", dest="format", choices=evaluate.REPORT_FORMATS)
    p.add_argument("--include-diagonal", action="store_true", default=None,
                   dest="include_diagonal")
    p.add_argument("--allow-leakage", action="store_true", default=None,
                   dest="allow_leakage")
    p.add_argument("--normalize", action="store_true", default=None)

    p = sub.add_parser("report", help="re-render a jsonl report")
    common(p)
    p.add_argument("--in", dest="in_path")
    p.add_argument("--format", dest="format", choices=evaluate.REPORT_FORMATS)
    p.add_argument("--out")

    p = sub.add_parser("verify-store", help="validate a VAEB store file")
    common(p)
    p.add_argument("path", nargs="?")

    return parser


_DEFAULTS: dict[str, dict] = {
    "ingest": {
        "listing": None,
        "out": None,
        "clip_length": ingest.DEFAULT_CLIP_LENGTH,
        "allow_unknown_source": False,
        "real_sources": ",".join(sorted(ingest.DEFAULT_REAL_SOURCES)),
    },
    "stats": {"manifest": None, "format": "table"},
    "train": {
        "store": None,
        "out": None,
        "epochs": 100,
        "batch": 32,
        "lr": probe.DEFAULT_LR,
        "seed": None,
        "no_shuffle": False,
        "normalize": False,
    },
    "eval-distance": {
        "refs": None,
        "tests": None,
        "per_source": False,
        "normalize": False,
        "report": None,
        "format": "csv",
    },
    "eval": {
        "protocol": None,
        "method": None,
        "train_source": None,
        "train_sources": None,
        "store": None,
        "manifest": None,
        "seed": None,
        "train_fraction": 0.5,
        "epochs": 100,
        "batch": 32,
        "lr": probe.DEFAULT_LR,
        "report": None,
        "format": "csv",
        "include_diagonal": False,
        "allow_leakage": False,
        "normalize": False,
    },
    "report": {"in_path": None, "format": "table", "out": None},
    "verify-store": {"path": None},
}

_COMMON_DEFAULTS = {"quiet": False, "threads": None}


def load_config(path) -> dict:
    """Parse a JSON config file; provenance records are accepted too."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "provenance_version" in obj:
        obj = obj.get("config")
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: provenance record has no config object")
    return obj


def _resolve(command: str, args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    effective = dict(_COMMON_DEFAULTS)
    effective.update(_DEFAULTS[command])
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        known = set(effective)
        for key, value in cfg.items():
            if key not in known:
                raise ConfigError(f"{args.config}: unknown config key {key!r} for {command}")
            effective[key] = value
    for key in effective:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            effective[key] = flag_value
    return effective


def _sha256_hex(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_provenance(out_path, command: str, config: dict, inputs) -> None:
    record = {
        "provenance_version": PROVENANCE_VERSION,
        "tool": f"vidprobe {__version__}",
        "command": command,
        "config": {k: config[k] for k in sorted(config)},
        "inputs": {str(p): _sha256_hex(p) for p in inputs},
        "output": str(out_path),
    }
    Path(f"{out_path}.provenance.json").write_text(
        json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _say(cfg: dict, message: str) -> None:
    if not cfg.get("quiet"):
        print(message, file=sys.stderr)


def _require(cfg: dict, command: str, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"vidprobe {command}: missing required option(s): {flags}")


def _threads(cfg: dict) -> int:
    value = cfg.get("threads")
    if value is None:
        return os.cpu_count() or 1
    if value < 1:
        raise UsageError(f"--threads must be >= 1, got {value}")
    return value


def _cmd_ingest(cfg: dict) -> int:
    _require(cfg, "ingest", "listing", "out")
    real = frozenset(s for s in str(cfg["real_sources"]).split(",") if s)
    listing = ingest.read_listing(cfg["listing"])
    manifest = ingest.build_manifest(
        listing,
        ingest.IngestConfig(
            clip_length=float(cfg["clip_length"]),
            real_sources=real,
            allow_unknown_source=bool(cfg["allow_unknown_source"]),
        ),
    )
    ingest.write_manifest(manifest, cfg["out"])
    _write_provenance(cfg["out"], "ingest", cfg, [cfg["listing"]])
    _say(cfg, f"wrote {len(manifest.clips)} clips from {len(manifest.videos)} videos "
              f"to {cfg['out']}")
    return 0


def _cmd_stats(cfg: dict) -> int:
    _require(cfg, "stats", "manifest")
    manifest = ingest.read_manifest(cfg["manifest"])
    stats = ingest.manifest_stats(manifest)
    real_first = [s for s in stats if s not in ingest.KNOWN_FAKE_SOURCES]
    ordered = real_first + [s for s in ingest.KNOWN_FAKE_SOURCES if s in stats]
    ordered += [s for s in stats if s not in ordered]
    total = ingest.SourceStats(
        clips=sum(s.clips for s in stats.values()),
        minutes=sum(s.minutes for s in stats.values()),
    )
    fmt = cfg["format"]
    if fmt == "jsonl":
        for source in ordered:
            print(json.dumps({"source": source, "clips": stats[source].clips,
                              "minutes": round(stats[source].minutes, 4)}))
        print(json.dumps({"source": "total", "clips": total.clips,
                          "minutes": round(total.minutes, 4)}))
    elif fmt == "csv":
        print("source,clips,minutes")
        for source in ordered:
            print(f"{source},{stats[source].clips},{stats[source].minutes:.2f}")
        print(f"total,{total.clips},{total.minutes:.2f}")
    else:
        width = max([len("source"), len("total")] + [len(s) for s in ordered])
        print(f"{'source'.ljust(width)}  {'clips':>7}  {'minutes':>8}")
        for source in ordered:
            print(f"{source.ljust(width)}  {stats[source].clips:>7}  "
                  f"{stats[source].minutes:>8.2f}")
        print(f"{'total'.ljust(width)}  {total.clips:>7}  {total.minutes:>8.2f}")
    return 0


def _cmd_train(cfg: dict) -> int:
    _require(cfg, "train", "store", "out", "seed")
    data = store.read_store(cfg["store"])
    config = probe.TrainConfig(
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch"]),
        seed=int(cfg["seed"]),
        shuffle=not cfg["no_shuffle"],
    )
    result = probe.train(data, config, lr=float(cfg["lr"]),
                         normalize=bool(cfg["normalize"]))
    probe.save_probe_result(cfg["out"], result)
    _write_provenance(cfg["out"], "train", cfg, [cfg["store"]])
    _say(cfg, f"trained on {len(data)} records for {config.epochs} epochs; "
              f"final loss {result.loss_history[-1]:.6f}; wrote {cfg['out']}")
    return 0


def _cmd_eval_distance(cfg: dict) -> int:
    _require(cfg, "eval-distance", "refs", "tests", "report")
    refs = store.read_store(cfg["refs"])
    tests = store.read_store(cfg["tests"])
    report = evaluate.run_reference_eval(
        refs, tests, per_source=bool(cfg["per_source"]), threads=_threads(cfg),
        normalize=bool(cfg["normalize"])
    )
    payload = evaluate.render_report(report, cfg["format"])
    Path(cfg["report"]).write_bytes(payload)
    _write_provenance(cfg["report"], "eval-distance", cfg, [cfg["refs"], cfg["tests"]])
    _say(cfg, f"classified {len(tests)} records against {len(refs)} references; "
              f"wrote {cfg['report']}")
    return 0


def _cmd_eval(cfg: dict) -> int:
    _require(cfg, "eval", "protocol", "method", "store", "manifest", "seed", "report")
    stores_arg = cfg["store"]
    store_paths = [stores_arg] if isinstance(stores_arg, str) else list(stores_arg)
    stores = [store.read_store(p) for p in store_paths]
    manifest = ingest.read_manifest(cfg["manifest"])
    config = EvalConfig(
        seed=int(cfg["seed"]),
        train_fraction=float(cfg["train_fraction"]),
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch"]),
        lr=float(cfg["lr"]),
        threads=_threads(cfg),
        include_diagonal=bool(cfg["include_diagonal"]),
        allow_leakage=bool(cfg["allow_leakage"]),
        normalize=bool(cfg["normalize"]),
    )
    if cfg["protocol"] == "one-to-many":
        if not cfg["train_source"]:
            raise UsageError("vidprobe eval: one-to-many needs --train-source")
        report = evaluate.run_one_to_many(
            stores, manifest, cfg["train_source"], cfg["method"], config
        )
    else:
        raw = cfg["train_sources"] or cfg["train_source"]
        if not raw:
            raise UsageError("vidprobe eval: many-to-many needs --train-sources")
        sources = [s for s in str(raw).split(",") if s]
        report = evaluate.run_many_to_many(stores, manifest, sources, cfg["method"], config)
    payload = evaluate.render_report(report, cfg["format"])
    Path(cfg["report"]).write_bytes(payload)
    _write_provenance(cfg["report"], "eval", cfg, store_paths + [cfg["manifest"]])
    _say(cfg, f"wrote {cfg['report']}")
    return 0


def _cmd_report(cfg: dict) -> int:
    _require(cfg, "report", "in_path")
    report = evaluate.load_report_jsonl(Path(cfg["in_path"]).read_bytes())
    payload = evaluate.render_report(report, cfg["format"])
    if cfg["out"]:
        Path(cfg["out"]).write_bytes(payload)
        _write_provenance(cfg["out"], "report", cfg, [cfg["in_path"]])
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


def _cmd_verify_store(cfg: dict) -> int:
    _require(cfg, "verify-store", "path")
    data = store.read_store(cfg["path"])
    warnings_found = []
    if len(data) == 0:
        warnings_found.append("store has no records")
    else:
        labels = {int(r.class_label) for r in data}
        if labels != {0, 1}:
            only = "real" if labels == {0} else "fake"
            warnings_found.append(f"store holds only {only} records")
    print(f"model_id: {data.model_id}")
    print(f"dim: {data.dim}")
    print(f"records: {len(data)}")
    for message in warnings_found:
        print(f"warning: {message}", file=sys.stderr)
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "train": _cmd_train,
    "eval-distance": _cmd_eval_distance,
    "eval": _cmd_eval,
    "report": _cmd_report,
    "verify-store": _cmd_verify_store,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_usage())
        cfg = _resolve(args.command, args)
        return _HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)
    except (
        store.StoreError,
        ingest.ManifestError,
        EvalError,
        probe.ProbeFileError,
        ConfigError,
        ValueError,
        KeyError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
