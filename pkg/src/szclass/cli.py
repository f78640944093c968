"""Command-line entry point: ``szclass <command> [options]``.

Commands: stats, synth, featurize, cv, sweep, search, report.  Options come
from a JSON config file (``--config``) and are overridden by flags of the
same name.  Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
Logs go to stderr as JSON lines; tables go to stdout.
"""

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import jsonschema

from . import hpo
from .errors import DataError, NumericError, SearchFailedError
from .evaluation import make_folds, run_cv
from .featurize import (FeatureSpec, WindowSpec, featurize_clips, load_clips, montage_hash,
                        read_cache, write_cache)
from .ingest import dataset_stats, load_manifest, stats_csv, stats_table
from .synthgen import GenSpec, default_montage, generate_corpus

log = logging.getLogger("szclass")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
CLASSIFIER_LABELS = {"knn": "k-NN", "sgd": "SGD", "gbt": "GBT"}


class UsageError(Exception):
    pass


CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "montage": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "fs": {"type": "number", "exclusiveMinimum": 0},
        "method": {"oneOf": [{"enum": [1, 2]},
                             {"type": "array", "items": {"enum": [1, 2]}, "minItems": 1}]},
        "fmax": {"type": "integer", "minimum": 2},
        "wl": {"type": "number", "exclusiveMinimum": 0},
        "overlap": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "preproc": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["fmax", "wl", "overlap"],
            "properties": {"fmax": {"type": "integer", "minimum": 2},
                           "wl": {"type": "number", "exclusiveMinimum": 0},
                           "overlap": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}}}},
        "classifier": {"oneOf": [{"enum": ["knn", "sgd", "gbt"]},
                                 {"type": "array", "items": {"enum": ["knn", "sgd", "gbt"]},
                                  "minItems": 1}]},
        "params": {"type": "object", "additionalProperties": False,
                   "properties": {k: {"type": "object"} for k in ("knn", "sgd", "gbt")}},
        "cv": {"enum": ["seizure", "patient"]},
        "folds": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "manifest": {"type": "string"},
        "out": {"type": "string"},
        "cache_dir": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
        "standardize": {"type": "boolean"},
        "budget": {"type": "integer", "minimum": 1},
        "fold": {"type": "integer", "minimum": 0},
        "top": {"type": "integer", "minimum": 1},
        "sweep": {"type": "string"},
        "genspec": {"type": "string"},
        "shared_patients": {"type": "boolean"},
        "bucket_norm": {"enum": ["channel", "bucket"]},
    },
}


@dataclasses.dataclass
class RunConfig:
    montage: list = None
    fs: float = 250.0
    method: list = dataclasses.field(default_factory=lambda: [1])
    fmax: int = 48
    wl: float = 1.0
    overlap: float = 0.75
    preproc: list = None
    classifier: list = dataclasses.field(default_factory=lambda: ["knn"])
    params: dict = dataclasses.field(default_factory=dict)
    cv: str = "seizure"
    folds: int = None
    seed: int = 0
    manifest: str = None
    out: str = None
    cache_dir: str = None
    workers: int = 1
    standardize: bool = True
    budget: int = 100
    fold: int = 0
    top: int = 4
    sweep: str = None
    genspec: str = None
    shared_patients: bool = False
    bucket_norm: str = "channel"

    @property
    def k(self):
        return self.folds or (5 if self.cv == "seizure" else 3)

    def preproc_points(self):
        """``(fmax, wl, O seconds)`` triples to evaluate."""
        if self.preproc:
            return [(p["fmax"], float(p["wl"]), p["overlap"] * p["wl"]) for p in self.preproc]
        return [(self.fmax, float(self.wl), self.overlap * self.wl)]

    def to_dict(self):
        return dataclasses.asdict(self)


def _error_path(err):
    path = "/".join(str(p) for p in err.absolute_path)
    return f"config{'/' + path if path else ''}: {err.message}"


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise UsageError("; ".join(_error_path(e) for e in errors))
    return data


def resolve_config(args):
    """Defaults, then the config file, then explicit flags."""
    cfg = RunConfig()
    explicit = set()
    if getattr(args, "config", None):
        for key, value in load_config(args.config).items():
            setattr(cfg, key, value)
            explicit.add(key)
    for field in dataclasses.fields(RunConfig):
        value = getattr(args, field.name, None)
        if value is not None:
            setattr(cfg, field.name, value)
            explicit.add(field.name)
    cfg.explicit = explicit
    if getattr(args, "no_standardize", False):
        cfg.standardize = False
    if getattr(args, "shared_patients_flag", False):
        cfg.shared_patients = True
    if isinstance(cfg.method, int):
        cfg.method = [cfg.method]
    if isinstance(cfg.classifier, str):
        cfg.classifier = [cfg.classifier]
    return cfg


# --------------------------------------------------------------------------
# helpers


def _out_dir(cfg):
    if not cfg.out:
        raise UsageError("--out is required")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(cfg, out, command):
    doc = {"command": command, **cfg.to_dict()}
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _manifest(cfg):
    if not cfg.manifest:
        raise UsageError("--manifest is required")
    return load_manifest(cfg.manifest)


def _montage(cfg):
    if cfg.montage:
        return list(cfg.montage)
    log.warning("no montage configured; using the default 20-channel list")
    return default_montage(20)


def _cache_name(method, fmax, wl, ov, bucket_norm="channel"):
    norm = f"_{bucket_norm}" if method == 2 else ""
    return f"features_m{method}_f{fmax}_w{wl:g}_o{ov:g}{norm}.szft"


def _features(cfg, manifest, montage, method, fmax, wl, ov, out, clips=None):
    """Load features from the cache directory or compute and store them."""
    cache_dir = Path(cfg.cache_dir) if cfg.cache_dir else out / "cache"
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / _cache_name(method, fmax, wl, ov, cfg.bucket_norm)
    fspec = FeatureSpec(method, fmax, bucket_norm=cfg.bucket_norm)
    expect = dict(method=method, f_max=fmax, window=wl, overlap=ov,
                  montage_hash=montage_hash(montage))
    if path.exists():
        fm = read_cache(path, expect=expect)
        log.info("cache hit %s", path)
        return fm, clips
    if clips is None:
        clips, skipped = load_clips(manifest, montage, fs=cfg.fs, workers=cfg.workers)
    else:
        skipped = []
    fm = featurize_clips(manifest, clips, montage, WindowSpec(wl, ov), fspec, skipped)
    write_cache(path, fm)
    log.info("wrote %s (%d rows, %d features)", path, len(fm), fm.n_features)
    return fm, clips


# --------------------------------------------------------------------------
# result tables


def render_cv_table(doc):
    """Text table: one row per (method, f_max, W_l, O), one column per classifier."""
    runs = doc["runs"]
    classifiers = []
    for r in runs:
        if r["classifier"] not in classifiers:
            classifiers.append(r["classifier"])
    keys = []
    scores = {}
    for r in runs:
        key = (r["method"], r["f_max"], r["W_l"], r["O"])
        if key not in keys:
            keys.append(key)
        scores[key, r["classifier"]] = r["report"]["mean_weighted_f1"]
    head = ["Method", "f_max", "W_l", "O"] + [CLASSIFIER_LABELS[c] for c in classifiers]
    body = []
    for key in keys:
        method, fmax, wl, ov = key
        ratio = ov / wl
        row = [str(method), str(fmax), f"{wl:g}", f"{ratio:g}W_l"]
        for c in classifiers:
            s = scores.get((key, c))
            row.append("NA" if s is None else f"{s:.3f}")
        body.append(row)
    widths = [max(len(head[i]), *(len(b[i]) for b in body)) for i in range(len(head))]
    lines = ["  ".join(h.rjust(w) for h, w in zip(head, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.rjust(w) for c, w in zip(b, widths)) for b in body]
    title = f"{doc['cv']['k']}-fold {doc['cv']['mode']}-wise cross-validation, mean weighted F1"
    return title + "\n" + "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# commands


def cmd_stats(cfg):
    manifest = _manifest(cfg)
    rows = dataset_stats(manifest)
    table = stats_table(rows)
    if cfg.out:
        out = _out_dir(cfg)
        (out / "stats.csv").write_text(stats_csv(rows), encoding="utf-8")
        (out / "stats.txt").write_text(table, encoding="utf-8")
        _echo(cfg, out, "stats")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_synth(cfg):
    out = _out_dir(cfg)
    data = json.loads(Path(cfg.genspec).read_text()) if cfg.genspec else {}
    if "seed" in getattr(cfg, "explicit", ()) or "seed" not in data:
        data["seed"] = cfg.seed
    if cfg.shared_patients:
        data["shared_patients"] = True
    try:
        spec = GenSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"genspec: {exc}") from None
    manifest = generate_corpus(spec, out)
    log.info("generated %d clips under %s", len(manifest), out)
    sys.stdout.write(stats_table(dataset_stats(manifest)))
    return EXIT_OK


def cmd_featurize(cfg):
    out = _out_dir(cfg)
    manifest = _manifest(cfg)
    montage = _montage(cfg)
    clips = None
    for method in cfg.method:
        for fmax, wl, ov in cfg.preproc_points():
            fm, clips = _features(cfg, manifest, montage, method, fmax, wl, ov, out, clips)
            for i, path, reason in fm.skipped:
                log.warning("skipped event %d (%s): %s", i, path, reason)
            sys.stdout.write(f"method={method} f_max={fmax} W_l={wl:g} O={ov:g}: "
                             f"{len(fm)} rows x {fm.n_features} features\n")
    _echo(cfg, out, "featurize")
    return EXIT_OK


def _cv_points(cfg):
    if cfg.sweep:
        rows = hpo.read_sweep_csv(Path(cfg.sweep).read_text())
        points = []
        for method in cfg.method:
            sub = [r for r in rows if r.method == method]
            if not sub:
                raise DataError(f"sweep table has no rows for method {method}")
            # best score per grid point across classifiers
            best = {}
            for r in sub:
                key = (r.f_max, r.window, r.overlap)
                if not math.isnan(r.weighted_f1):
                    best[key] = max(best.get(key, -1.0), r.weighted_f1)
                else:
                    best.setdefault(key, float("nan"))
            merged = [hpo.SweepRow(method, "any", k[0], k[1], k[2], v) for k, v in best.items()]
            points += [(method, *p) for p in hpo.select_top_configs(merged, cfg.top)]
        return points
    return [(m, *p) for m in cfg.method for p in cfg.preproc_points()]


def cmd_cv(cfg):
    out = _out_dir(cfg)
    manifest = _manifest(cfg)
    montage = _montage(cfg)
    folds = make_folds(manifest.events, cfg.cv, cfg.k, cfg.seed)
    runs = []
    clips = None
    for method, fmax, wl, ov in _cv_points(cfg):
        fm, clips = _features(cfg, manifest, montage, method, fmax, wl, ov, out, clips)
        for kind in cfg.classifier:
            params = cfg.params.get(kind, {})
            rep = run_cv(fm, kind, params, folds, seed=cfg.seed, standardize=cfg.standardize,
                         spec={"method": method, "f_max": fmax, "W_l": wl, "O": ov})
            log.info("cv method=%d f_max=%d W_l=%g O=%g %s -> %.4f",
                     method, fmax, wl, ov, kind, rep.mean_weighted_f1)
            runs.append({"method": method, "f_max": fmax, "W_l": wl, "O": ov,
                         "classifier": kind, "report": rep.to_dict()})
    doc = {"cv": {"mode": cfg.cv, "k": cfg.k, "seed": cfg.seed},
           "fold_sizes": folds.sizes().tolist(), "runs": runs}
    (out / "metrics.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    table = render_cv_table(json.loads((out / "metrics.json").read_text()))
    (out / "table.txt").write_text(table)
    _echo(cfg, out, "cv")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_sweep(cfg):
    out = _out_dir(cfg)
    manifest = _manifest(cfg)
    montage = _montage(cfg)
    clips, skipped = load_clips(manifest, montage, fs=cfg.fs, workers=cfg.workers)
    for i, path, reason in skipped:
        log.warning("skipped event %d (%s): %s", i, path, reason)
    rows = []
    for method in cfg.method:
        for kind in cfg.classifier:
            rows += hpo.sweep_preproc_grid(
                manifest, kind, montage, method=method, fold=cfg.fold, budget=cfg.budget,
                cv_mode=cfg.cv, k=cfg.k, seed=cfg.seed, fs=cfg.fs,
                standardize=cfg.standardize, clips=clips, workers=cfg.workers,
            )
    text = hpo.sweep_csv(rows)
    (out / "sweep.csv").write_text(text)
    _echo(cfg, out, "sweep")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_search(cfg):
    out = _out_dir(cfg)
    manifest = _manifest(cfg)
    montage = _montage(cfg)
    folds = make_folds(manifest.events, cfg.cv, cfg.k, cfg.seed)
    method = cfg.method[0]
    fmax, wl, ov = cfg.preproc_points()[0]
    fm, _ = _features(cfg, manifest, montage, method, fmax, wl, ov, out)
    results = {}
    with open(out / "trials.jsonl", "w") as fh:
        for kind in cfg.classifier:
            def objective(params, kind=kind):
                return run_cv(fm, kind, params, folds, seed=cfg.seed,
                              standardize=cfg.standardize).mean_weighted_f1

            res = hpo.random_search(hpo.default_spaces()[kind], objective, budget=cfg.budget,
                                    seed=cfg.seed, workers=cfg.workers)
            for t in res.trials:
                fh.write(json.dumps({"classifier": kind, **t.to_dict()}, sort_keys=True) + "\n")
            results[kind] = {"sampler": res.sampler, "budget": res.budget, "seed": res.seed,
                             "best_index": res.best.index, "best_config": res.best.config,
                             "best_weighted_f1": res.best.objective}
            sys.stdout.write(f"{kind}: best weighted F1 {res.best.objective:.4f} "
                             f"(trial {res.best.index}) {json.dumps(res.best.config)}\n")
    doc = {"method": method, "f_max": fmax, "W_l": wl, "O": ov,
           "cv": {"mode": cfg.cv, "k": cfg.k, "seed": cfg.seed}, "results": results,
           "params": {k: v["best_config"] for k, v in results.items()}}
    (out / "search.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _echo(cfg, out, "search")
    return EXIT_OK


def cmd_report(cfg, run_dir):
    path = Path(run_dir) / "metrics.json"
    if not path.exists():
        raise DataError(f"{path} not found")
    table = render_cv_table(json.loads(path.read_text()))
    (Path(run_dir) / "table.txt").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _shared(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--manifest", help="seizure manifest CSV")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--method", type=int, choices=(1, 2), action="append")
    p.add_argument("--fmax", type=int)
    p.add_argument("--wl", type=float)
    p.add_argument("--overlap", type=float, choices=(0.5, 0.75))
    p.add_argument("--classifier", choices=("knn", "sgd", "gbt"), action="append")
    p.add_argument("--cv", choices=("seizure", "patient"))
    p.add_argument("--folds", type=int)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--cache-dir", dest="cache_dir")


def build_parser():
    parser = _Parser(prog="szclass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    for name, help_text in (
        ("stats", "per-type seizure statistics of a manifest"),
        ("synth", "generate a synthetic corpus"),
        ("featurize", "compute and cache feature matrices"),
        ("cv", "cross-validate classifiers"),
        ("sweep", "preprocessing grid sweep"),
        ("search", "random hyperparameter search"),
        ("report", "re-render the table of a cv run"),
    ):
        p = sub.add_parser(name, help=help_text)
        _shared(p)
        if name == "synth":
            p.add_argument("--genspec", help="GenSpec JSON file")
            p.add_argument("--shared-patients", dest="shared_patients_flag", action="store_true")
        if name in ("sweep", "search"):
            p.add_argument("--budget", type=int)
        if name == "sweep":
            p.add_argument("--fold", type=int)
        if name == "cv":
            p.add_argument("--sweep", help="sweep CSV to take the top configs from")
            p.add_argument("--top", type=int)
        if name == "report":
            p.add_argument("run", help="cv output directory")
    return parser


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name,
                           "msg": record.getMessage()})


def _setup_logging():
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter())
    root = logging.getLogger()
    root.handlers = [h for h in root.handlers if not isinstance(h.formatter, _JsonFormatter)]
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    logging.getLogger("numba").setLevel(logging.WARNING)


COMMANDS = {"stats": cmd_stats, "synth": cmd_synth, "featurize": cmd_featurize,
            "cv": cmd_cv, "sweep": cmd_sweep, "search": cmd_search}


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "report":
            return cmd_report(cfg, args.run)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        log.error("%s", exc)
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (DataError, OSError, SearchFailedError) as exc:
        log.error("%s", exc)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA
    except NumericError as exc:
        log.error("%s", exc)
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("%s", exc)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
