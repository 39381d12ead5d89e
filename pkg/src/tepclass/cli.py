"""Command-line front end: ``tepclass {synth,preprocess,features,evaluate,run-all}``.

Option values resolve in the order: command-line flag, ``TEPCLASS_<NAME>``
environment variable, ``--config`` JSON file, built-in default. Usage
errors exit with status 2, data and pipeline errors with status 1; both
print a ``<stage>: <message>`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io as _io
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .classify import CLASSIFIERS, ClassifierSpec
from .datamodel import METRIC_KEYS, SubjectRecord
from .errors import ConfigError, TepError
from .evaluate import repeated_evaluation
from .features import PeakWindows
from .io import (
    load_manifest,
    read_features_csv,
    read_recording,
    write_epochs,
    write_features_csv,
    write_manifest,
    write_recording,
    write_report,
)
from .montage import DENSITIES, Montage, resolve_montage
from .pipeline import by_montage, manifest_features, synth_features
from .preprocess import PreprocessConfig, ProcessingLog, preprocess_pipeline
from .synth import SynthSpec, generate_dataset

log = logging.getLogger("tepclass")

ENV_PREFIX = "TEPCLASS_"


class UsageError(ConfigError):
    stage = "usage"


# --- option resolution -----------------------------------------------------

# name -> (default, converter); every entry may come from flag, env or config
OPTIONS: dict[str, tuple[Any, Callable[[str], Any]]] = {
    "seed": (0, int),
    "workers": (1, int),
    "runs": (100, int),
    "montage": ("all", str),
    "classifier": ("all", str),
    "n_trees": (100, int),
    "k": (7, int),
    "min_leaf": (10, int),
    "criterion": ("entropy", str),
    "mtry": (None, int),
    "ad": (17, int),
    "hc": (17, int),
    "effect_amp": (0.0, float),
    "latency_shift": (0.0, float),
    "effect_component": (2, int),
}


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    known = set(OPTIONS) | {"preprocess", "peak_windows", "synth"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"config {path}: unknown keys {', '.join(unknown)}")
    return doc


def _resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Fill every option the subcommand defines from flag, env, config or default."""
    cfg = _load_config(getattr(args, "config", None))
    out = dict(cfg)
    for name, (default, conv) in OPTIONS.items():
        if not hasattr(args, name):
            continue
        value = getattr(args, name)
        if value is None:
            env = os.environ.get(ENV_PREFIX + name.upper())
            if env is not None:
                try:
                    value = conv(env)
                except ValueError:
                    raise UsageError(f"{ENV_PREFIX}{name.upper()}={env!r} is not a valid {conv.__name__}") from None
            elif name in cfg:
                value = cfg[name]
            else:
                value = default
        out[name] = value
    if "workers" in out:
        w = int(out["workers"])
        out["workers"] = (os.cpu_count() or 1) if w == 0 else w
        if out["workers"] < 0:
            raise UsageError("--workers must be >= 0")
    return out


def _dataclass_from(cls, overrides: dict | None, what: str):
    overrides = overrides or {}
    names = {f.name for f in fields(cls)}
    bad = sorted(set(overrides) - names)
    if bad:
        raise ConfigError(f"unknown {what} keys: {', '.join(bad)}")
    doc = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    return cls(**doc)


def _preprocess_config(opts, args=None) -> PreprocessConfig:
    doc = dict(opts.get("preprocess") or {})
    lo, hi = getattr(args, "excise_lo", None), getattr(args, "excise_hi", None)
    if lo is not None or hi is not None:
        base = doc.get("excise_ms", PreprocessConfig.excise_ms)
        doc["excise_ms"] = [base[0] if lo is None else lo, base[1] if hi is None else hi]
    if getattr(args, "order", None) is not None:
        doc["filter_order"] = args.order
    return _dataclass_from(PreprocessConfig, doc, "preprocess")


def _peak_windows(opts) -> PeakWindows:
    return _dataclass_from(PeakWindows, opts.get("peak_windows"), "peak_windows")


def _synth_spec(opts) -> SynthSpec:
    doc = dict(opts.get("synth") or {})
    doc.update(
        n_ad=opts["ad"],
        n_hc=opts["hc"],
        master_seed=opts["seed"],
        effect={
            **doc.get("effect", {}),
            "component": opts["effect_component"],
            "amp_shift": opts["effect_amp"],
            "latency_shift_ms": opts["latency_shift"],
        },
    )
    spec = SynthSpec.from_dict(doc)
    spec.validate()
    return spec


def _classifier_spec(name: str, opts) -> ClassifierSpec:
    return ClassifierSpec(
        name=name,
        min_leaf=opts["min_leaf"],
        criterion=opts["criterion"],
        k=opts["k"],
        n_trees=opts["n_trees"],
        mtry=opts["mtry"],
    )


def _selection(value: str, allowed: tuple[str, ...], what: str, free: bool = False) -> list[str]:
    items = list(allowed) if value == "all" else [v.strip() for v in value.split(",") if v.strip()]
    for v in items:
        if v not in allowed and not (free and v.startswith("@")):
            raise UsageError(f"unknown {what} {v!r} (expected one of {', '.join(allowed)} or all)")
    if len(set(items)) != len(items) or not items:
        raise UsageError(f"{what} list must be non-empty without repeats")
    return items


def _montage_echo(m: Montage) -> dict:
    return {"name": m.name, "labels": list(m.labels)}


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: Path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _log_timings(sid: str, plog: ProcessingLog) -> None:
    if plog.timings_s:
        log.info("%s: %s", sid, ", ".join(f"{k} {v:.3f}s" for k, v in plog.timings_s.items()))


# --- subcommands -----------------------------------------------------------


def cmd_synth(args) -> int:
    opts = _resolve(args)
    spec = _synth_spec(opts)
    manifest = generate_dataset(spec, _out_dir(args.out))
    print(manifest)
    return 0


def cmd_preprocess(args) -> int:
    opts = _resolve(args)
    pre = _preprocess_config(opts, args)
    manifest = load_manifest(args.manifest)
    out = _out_dir(args.out)
    records, subjects_log = [], []
    fs_out = manifest.fs_hz / pre.decim_factor
    for s in manifest.subjects:
        raw = read_recording(manifest.resolve(s))
        plog = ProcessingLog()
        epochs = preprocess_pipeline(raw, pre, plog)
        name = f"{s.id}.tepe"
        write_epochs(epochs, out / name)
        records.append(SubjectRecord(s.id, s.label, name))
        _log_timings(s.id, plog)
        entry = {"id": s.id, "n_pulses": plog.n_pulses, "n_dropped": plog.n_dropped, "n_trials": epochs.n_trials}
        if args.timings:
            entry["timings_s"] = plog.timings_s
        subjects_log.append(entry)
        fs_out = epochs.fs_hz
    write_manifest(out / "manifest.json", fs_out, manifest.channel_labels, records)
    _write_json(
        out / "preprocess_log.json",
        {"software": {"name": "tepclass", "version": __version__}, "preprocess": asdict(pre), "subjects": subjects_log},
    )
    print(out / "manifest.json")
    return 0


def cmd_features(args) -> int:
    opts = _resolve(args)
    manifest = load_manifest(args.manifest)
    if opts["montage"] == "all" or "," in opts["montage"]:
        raise UsageError("features takes a single --montage (low, medium, high or @file.json)")
    montage = resolve_montage(opts["montage"], manifest.channel_labels)
    results = manifest_features(
        manifest, [montage], _preprocess_config(opts, args), _peak_windows(opts), workers=opts["workers"]
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_features_csv(by_montage(results, montage.name), out)
    print(out)
    return 0


def cmd_evaluate(args) -> int:
    opts = _resolve(args)
    if opts["classifier"] == "all" or "," in opts["classifier"]:
        raise UsageError("evaluate takes a single --classifier (dt, knn or rf)")
    feats = read_features_csv(args.features)
    spec = _classifier_spec(opts["classifier"], opts)
    echo = {"features": {"path": str(args.features), "sha256": _sha256(args.features)}}
    report = repeated_evaluation(feats, spec, opts["runs"], opts["seed"], echo, workers=opts["workers"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, out, "csv" if args.csv else "json")
    _print_summary([(opts["classifier"], report)])
    return 0


def _print_summary(rows) -> None:
    for name, report in rows:
        vals = " ".join(f"{k}={report.averaged[k]:.4f}" for k in METRIC_KEYS)
        print(f"{name}: {vals}")


def _summary_csv(rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["montage", "classifier", "runs", *METRIC_KEYS])
    for montage, clf, report in rows:
        w.writerow([montage, clf, len(report.runs), *(f"{report.averaged[k]:.12f}" for k in METRIC_KEYS)])
    return buf.getvalue()


def cmd_run_all(args) -> int:
    opts = _resolve(args)
    if args.synth == bool(args.manifest):
        raise UsageError("run-all needs exactly one of --synth or --manifest")
    pre, windows = _preprocess_config(opts, args), _peak_windows(opts)
    classifiers = _selection(opts["classifier"], CLASSIFIERS, "classifier")
    selectors = _selection(opts["montage"], DENSITIES, "montage", free=True)
    out = _out_dir(args.out)
    workers = opts["workers"]

    if args.synth:
        spec = _synth_spec(opts)
        channels = spec.channels
        montages = [resolve_montage(s, channels) for s in selectors]
        pairs = synth_features(spec, montages, pre, windows, workers, keep=args.save_intermediate)
        results = [r for r, _ in pairs]
        source = {"synth": spec.to_dict()}
        if args.save_intermediate:
            data_dir = _out_dir(out / "data")
            for r, raw in pairs:
                write_recording(raw, data_dir / f"{r.id}.tepr")
            write_manifest(
                data_dir / "manifest.json",
                spec.fs_hz,
                channels,
                [SubjectRecord(r.id, r.label, f"{r.id}.tepr") for r in results],
            )
    else:
        manifest = load_manifest(args.manifest)
        montages = [resolve_montage(s, manifest.channel_labels) for s in selectors]
        results = manifest_features(manifest, montages, pre, windows, workers, keep=args.save_intermediate)
        source = {"manifest": {"path": str(args.manifest), "sha256": _sha256(args.manifest)}}
    for r in results:
        _log_timings(r.id, r.plog)
    if args.save_intermediate:
        ep_dir = _out_dir(out / "epochs")
        for r in results:
            if r.epochs is not None:
                write_epochs(r.epochs, ep_dir / f"{r.id}.tepe")

    names = [m.name for m in montages]
    if len(set(names)) != len(names):
        raise UsageError("montage names must be distinct")
    rows = []
    for m in montages:
        feats = by_montage(results, m.name)
        write_features_csv(feats, out / f"features_{m.name}.csv")
        for clf in classifiers:
            spec_c = _classifier_spec(clf, opts)
            echo = {
                **source,
                "montage": _montage_echo(m),
                "preprocess": asdict(pre),
                "peak_windows": asdict(windows),
            }
            report = repeated_evaluation(feats, spec_c, opts["runs"], opts["seed"], echo, workers=workers)
            write_report(report, out / f"report_{m.name}_{clf}.json")
            if args.csv:
                write_report(report, out / f"report_{m.name}_{clf}.csv", "csv")
            rows.append((m.name, clf, report))
    (out / "summary.csv").write_text(_summary_csv(rows))
    _print_summary([(f"{m}/{c}", r) for m, c, r in rows])
    if args.plot:
        from .plotting import plot_grid

        plot_grid(rows, out / "summary.png")
    return 0


# --- parser ----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, workers: bool = True) -> None:
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--config", metavar="FILE", help="JSON file with option values and stage overrides")
    if workers:
        p.add_argument("--workers", type=int, help="worker processes, 0 = all cores (default 1)")


def _preprocess_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--excise-lo", dest="excise_lo", type=float, help="excision start in ms (default -2)")
    p.add_argument("--excise-hi", dest="excise_hi", type=float, help="excision end in ms (default 10)")
    p.add_argument("--order", type=int, help="Butterworth order before forward-backward filtering (default 3)")


def _classifier_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--runs", type=int, help="repetitions of the leave-one-subject-out protocol (default 100)")
    p.add_argument("--n-trees", dest="n_trees", type=int, help="random forest size (default 100)")
    p.add_argument("--k", type=int, help="kNN neighbours (default 7)")
    p.add_argument("--min-leaf", dest="min_leaf", type=int, help="minimum samples per leaf (default 10)")
    p.add_argument("--criterion", choices=("entropy", "gini"), help="split criterion (default entropy)")
    p.add_argument("--mtry", type=int, help="features tried per split (default floor(sqrt(d)))")


def _synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ad", type=int, help="number of AD subjects (default 17)")
    p.add_argument("--hc", type=int, help="number of HC subjects (default 17)")
    p.add_argument("--effect-amp", dest="effect_amp", type=float, help="AD amplitude reduction in uV (default 0)")
    p.add_argument("--latency-shift", dest="latency_shift", type=float, help="AD latency delay in ms (default 0)")
    p.add_argument("--effect-component", dest="effect_component", type=int, help="target component (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tepclass", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tepclass {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and timings to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _common(p, workers=False)
    _synth_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="epoch and filter raw recordings")
    _common(p, workers=False)
    p.add_argument("--manifest", required=True, help="manifest of raw .tepr recordings")
    p.add_argument("--out", required=True, help="output directory for .tepe files")
    _preprocess_flags(p)
    p.add_argument("--timings", action="store_true", help="include wall-clock stage timings in the log file")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("features", help="compute per-subject feature vectors")
    _common(p)
    p.add_argument("--manifest", required=True, help="manifest of .tepe epochs or .tepr recordings")
    _preprocess_flags(p)
    p.add_argument("--montage", help="low, medium, high or @montage.json (default high)")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_features, montage_default="high")

    p = sub.add_parser("evaluate", help="repeated leave-one-subject-out evaluation")
    _common(p)
    _classifier_flags(p)
    p.add_argument("--features", required=True, help="feature CSV")
    p.add_argument("--classifier", help="dt, knn or rf (default rf)")
    p.add_argument("--out", required=True, help="report path")
    p.add_argument("--csv", action="store_true", help="write the report as CSV instead of JSON")
    p.set_defaults(func=cmd_evaluate, classifier_default="rf")

    p = sub.add_parser("run-all", help="full pipeline over a montage x classifier grid")
    _common(p)
    _classifier_flags(p)
    _preprocess_flags(p)
    _synth_flags(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--synth", action="store_true", help="generate the input dataset")
    src.add_argument("--manifest", help="manifest of raw recordings")
    p.add_argument("--montage", help="comma list of low, medium, high, @file.json or all (default all)")
    p.add_argument("--classifier", help="comma list of dt, knn, rf or all (default all)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--csv", action="store_true", help="also write CSV reports")
    p.add_argument("--save-intermediate", dest="save_intermediate", action="store_true",
                   help="write synthetic recordings and preprocessed epochs")  # fmt: skip
    p.add_argument("--plot", action="store_true", help="render summary.png of the averaged metrics")
    p.set_defaults(func=cmd_run_all)
    return parser


def _apply_command_defaults(args) -> None:
    # single-item commands have their own defaults for montage/classifier
    for name in ("montage", "classifier"):
        default = getattr(args, f"{name}_default", None)
        if default and getattr(args, name, None) is None and not os.environ.get(ENV_PREFIX + name.upper()):
            cfg = _load_config(getattr(args, "config", None))
            if name not in cfg:
                setattr(args, name, default)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _apply_command_defaults(args)
        return args.func(args)
    except UsageError as exc:
        print(f"tepclass: {exc}", file=sys.stderr)
        return 2
    except TepError as exc:
        print(f"tepclass: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        where = f" {exc.filename}" if exc.filename else ""
        print(f"tepclass: io:{where}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except (TypeError, ValueError) as exc:
        # malformed config values surface here
        print(f"tepclass: config: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
