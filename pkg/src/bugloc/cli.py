"""Command-line pipeline: ``bugloc <command>`` with a shared config file.

Commands run in order ingest -> extract -> featurize -> regions -> train ->
rank -> evaluate (dissect and overlap branch off). Each writes its artifacts
into the cache directory together with ``<command>.manifest.json`` holding
the content hashes of its inputs and outputs, the hash of the settings it
depends on and the digests of the upstream manifests it consumed.

Exit codes: 0 success, 2 input error, 3 stale or missing artifact, 4 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path


from . import __version__
from .codeextract import SourceDocument, build_source_documents
from .corpus import (
    curate,
    filter_prefix,
    load_snapshot,
    read_bug_export,
    read_history,
    write_bug_export,
)
from .dnc import (
    Ensemble,
    ensemble_rank,
    leakage_violations,
    read_ranking,
    timeline_split,
    train_regions,
    write_ranking,
)
from .errors import BugLocError
from .evaluation import (
    baseline_comparison,
    dissect_pairs,
    evaluate_rankings,
    format_table,
    grid_csv,
    group_by,
    region_vs_multi,
    to_json,
)
from .learner import TrainConfig, load_model, save_model
from .regions import Region, build_regions, exclusive_counts, overlap_table, read_tool_results
from .textprep import BugReportFeatures, build_bug_features
from .vsm import FeatureStore, featurize_project, read_store, write_store, write_store_csv

log = logging.getLogger("bugloc")

EXIT_OK, EXIT_INPUT, EXIT_STALE, EXIT_INTERNAL = 0, 2, 3, 4
STALE_CODES = {"stale-cache", "missing-upstream"}

COMMANDS = ("ingest", "extract", "featurize", "regions", "train", "rank", "evaluate", "dissect", "overlap")
UPSTREAM = {
    "ingest": (),
    "extract": ("ingest",),
    "featurize": ("extract",),
    "regions": ("ingest",),
    "train": ("featurize", "regions"),
    "rank": ("train",),
    "evaluate": ("rank",),
    "dissect": ("featurize",),
    "overlap": ("ingest",),
}
# settings each command's output depends on (beyond its upstream artifacts)
SETTINGS = {
    "ingest": ("bugs", "snapshots"),
    "extract": ("snapshots", "history"),
    "featurize": (),
    "regions": ("tools", "topn"),
    "train": ("cutoff_year", "seed", "mode", "per_project", "regions"),
    "rank": ("normalize",),
    "evaluate": ("tools",),
    "dissect": (),
    "overlap": ("tools",),
}


# -- configuration ----------------------------------------------------------

@dataclass
class RunConfig:
    bugs: str = "bugs.jsonl"
    snapshots: str = "snapshots"
    history: str = "history"
    tools: str = "tools"
    cache: str = ".bugloc-cache"
    cutoff_year: int = 2014
    seed: int = 0
    mode: str = "quick"
    per_project: bool = False
    regions: str = "all"
    normalize: bool = False
    topn: int = 1
    jobs: int = 1
    base_dir: str = field(default=".", repr=False)

    PATH_KEYS = ("bugs", "snapshots", "history", "tools", "cache")

    def path(self, key: str) -> Path:
        p = Path(getattr(self, key))
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def cache_dir(self) -> Path:
        return self.path("cache")

    def train_config(self) -> TrainConfig:
        if self.mode not in ("quick", "faithful"):
            raise BugLocError("input", f"mode must be quick or faithful, not {self.mode!r}")
        return TrainConfig(seed=self.seed) if self.mode == "faithful" else TrainConfig.quick(seed=self.seed)

    def region_selection(self):
        if self.regions.strip().lower() in ("", "all"):
            return None
        return [r.strip() for r in self.regions.split(",") if r.strip()]

    def settings_for(self, command: str) -> dict:
        # paths are covered by content hashes of the inputs, not by name
        return {key: str(getattr(self, key)) for key in SETTINGS[command] if key not in self.PATH_KEYS}

    def require(self, *keys: str) -> None:
        for key in keys:
            if not self.path(key).exists():
                raise BugLocError("input", f"{key} path {self.path(key)} does not exist")


def _as_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise BugLocError("input", f"not a boolean: {text!r}")


def load_config(path: str | None) -> RunConfig:
    """Read ``[paths]`` and ``[run]`` sections of an INI file."""
    cfg = RunConfig()
    if not path:
        return cfg
    p = Path(path)
    if not p.is_file():
        raise BugLocError("input", f"config file {p} not found")
    parser = configparser.ConfigParser()
    parser.read(p, encoding="utf-8")
    cfg.base_dir = str(p.parent)
    known = {f.name: f for f in fields(RunConfig)}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in known or key == "base_dir":
                raise BugLocError("input", f"unknown config key {section}.{key}")
            setattr(cfg, key, _coerce(key, raw))
    return cfg


def _coerce(key: str, raw):
    default = getattr(RunConfig, key)
    if isinstance(default, bool):
        return _as_bool(raw)
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise BugLocError("input", f"{key} must be an integer") from None
    return raw


# -- manifests --------------------------------------------------------------

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_tree(path: Path) -> str:
    """Content hash of a file, or of every file below a directory (sorted by relative path)."""
    if path.is_file():
        return sha256_file(path)
    h = hashlib.sha256()
    for p in sorted(q for q in path.rglob("*") if q.is_file()):
        h.update(p.relative_to(path).as_posix().encode() + b"\0" + sha256_file(p).encode())
    return h.hexdigest()


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def manifest_path(cache: Path, command: str) -> Path:
    return cache / f"{command}.manifest.json"


def read_manifest(cache: Path, command: str) -> dict | None:
    p = manifest_path(cache, command)
    if not p.is_file():
        return None
    return json.loads(p.read_text(encoding="utf-8"))


def manifest_digest(cache: Path, command: str) -> str:
    return hashlib.sha256(manifest_path(cache, command).read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, command: str, inputs: dict, outputs: list, extra: dict | None = None) -> dict:
    cache = cfg.cache_dir
    settings = cfg.settings_for(command)
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config_hash": hashlib.sha256(_canonical(settings)).hexdigest()[:16],
        "settings": settings,
        "inputs": inputs,
        "upstream": {u: manifest_digest(cache, u) for u in UPSTREAM[command]},
        "outputs": {str(p.relative_to(cache).as_posix()): sha256_file(p) for p in sorted(outputs)},
    }
    if extra:
        manifest.update(extra)
    manifest_path(cache, command).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def validate_upstream(cfg: RunConfig, command: str, force: bool = False, _seen=None) -> None:
    """Check every artifact ``command`` consumes, walking the chain back to ingest."""
    cache = cfg.cache_dir
    seen = set() if _seen is None else _seen
    for up in UPSTREAM[command]:
        if up in seen:
            continue
        seen.add(up)
        manifest = read_manifest(cache, up)
        if manifest is None:
            raise BugLocError("missing-upstream",
                              f"missing upstream artifact for {command}: run `bugloc {up}` first")
        if not force:
            for rel, digest in manifest["outputs"].items():
                p = cache / rel
                if not p.is_file():
                    raise BugLocError("missing-upstream",
                                      f"{rel} is gone: run `bugloc {up}` again")
                if sha256_file(p) != digest:
                    raise BugLocError("stale-cache", f"{rel} changed since `bugloc {up}` wrote it (use --force)")
            expected = hashlib.sha256(_canonical(cfg.settings_for(up))).hexdigest()[:16]
            if manifest["config_hash"] != expected:
                raise BugLocError("stale-cache",
                                  f"settings changed since `bugloc {up}` ran: rerun it (or use --force)")
            for name, digest in manifest.get("inputs", {}).items():
                if name in RunConfig.PATH_KEYS and cfg.path(name).exists() and sha256_tree(cfg.path(name)) != digest:
                    raise BugLocError("stale-cache", f"{name} input changed since `bugloc {up}` ran (use --force)")
            for name, digest in manifest.get("upstream", {}).items():
                if not manifest_path(cache, name).is_file() or manifest_digest(cache, name) != digest:
                    raise BugLocError("stale-cache",
                                      f"`bugloc {name}` was rerun after `bugloc {up}`: rerun {up} (or use --force)")
        validate_upstream(cfg, up, force, seen)


# -- shared loaders ---------------------------------------------------------

def _read_corpus(cache: Path):
    reports, errors = read_bug_export(cache / "corpus.jsonl")
    if errors:
        raise BugLocError("stale-cache", "cached corpus is unreadable: rerun `bugloc ingest`")
    return reports


def _projects(cache: Path) -> list:
    return json.loads((cache / "ingest.json").read_text())["projects"]


def _load_store(cache: Path) -> FeatureStore:
    return FeatureStore.concat(read_store(cache / "features" / f"{p}.blfc") for p in _projects(cache))


def _load_regions(cache: Path) -> list:
    data = json.loads((cache / "regions.json").read_text())
    return [Region(r["name"], frozenset(r["bug_ids"])) for r in data["regions"]]


def _tool_results(cfg: RunConfig):
    path = cfg.path("tools")
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    results = []
    for f in files:
        with open(f, encoding="utf-8", newline="") as fh:
            results.extend(read_tool_results(fh))
    return results


def _load_ensemble(cache: Path) -> dict:
    manifest = read_manifest(cache, "train")
    return {name: load_model(cache / "models" / f"{name}.blgb") for name in manifest["trained"]}


# -- commands ---------------------------------------------------------------

def cmd_ingest(cfg: RunConfig, args) -> dict:
    cfg.require("bugs", "snapshots")
    cache = cfg.cache_dir
    cache.mkdir(parents=True, exist_ok=True)
    reports, errors = read_bug_export(cfg.path("bugs"))
    for e in errors:
        log.warning("bug export line %d: %s", e.line, e.message)
    by_project = {}
    for r in reports:
        by_project.setdefault(r.project, []).append(r)
    kept, dropped = [], {}
    projects = []
    for project in sorted(by_project):
        root = cfg.path("snapshots") / project
        if not root.is_dir():
            raise BugLocError("input", f"no snapshot directory for project {project} under {cfg.path('snapshots')}")
        snap = load_snapshot(root, project)
        good, bad = curate(by_project[project], snap)
        for report, reason in bad:
            dropped[report.id] = reason
        prefix, postfix = filter_prefix(good)
        for report in postfix:
            dropped[report.id] = "postfix"
        kept.extend(prefix)
        projects.append(project)
    kept.sort(key=lambda r: (r.created_at, r.id))
    write_bug_export(kept, cache / "corpus.jsonl")
    summary = {
        "projects": projects,
        "reports_read": len(reports),
        "ingest_errors": [{"line": e.line, "message": e.message} for e in errors],
        "kept": len(kept),
        "dropped": dict(sorted(dropped.items())),
    }
    (cache / "ingest.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(cfg, "ingest", {"bugs": sha256_tree(cfg.path("bugs")), "snapshots": sha256_tree(cfg.path("snapshots"))},
                   [cache / "corpus.jsonl", cache / "ingest.json"])
    print(f"ingest: kept {len(kept)} of {len(reports)} reports ({len(dropped)} dropped, {len(errors)} malformed)")
    return summary


def cmd_extract(cfg: RunConfig, args) -> None:
    cfg.require("snapshots")
    cache = cfg.cache_dir
    reports = _read_corpus(cache)
    out_dir = cache / "extract"
    out_dir.mkdir(exist_ok=True)
    outputs = []
    inputs = {"snapshots": sha256_tree(cfg.path("snapshots"))}
    if cfg.path("history").exists():
        inputs["history"] = sha256_tree(cfg.path("history"))
    for project in _projects(cache):
        hist_file = cfg.path("history") / f"{project}.txt"
        history = read_history(hist_file) if hist_file.is_file() else {}
        snap = load_snapshot(cfg.path("snapshots") / project, project, history)
        docs = build_source_documents(snap)
        degraded = sum(d.degraded for d in docs)
        if degraded:
            log.warning("%s: %d file(s) only partially parsed", project, degraded)
        target = out_dir / f"{project}.docs.jsonl"
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            for d in docs:
                fh.write(json.dumps(d.to_json(), sort_keys=True) + "\n")
        outputs.append(target)
        bug_target = out_dir / f"{project}.bugs.jsonl"
        with open(bug_target, "w", encoding="utf-8", newline="\n") as fh:
            for r in reports:
                if r.project == project:
                    fh.write(json.dumps(build_bug_features(r).to_json(), sort_keys=True) + "\n")
        outputs.append(bug_target)
    write_manifest(cfg, "extract", inputs, outputs)
    print(f"extract: {len(reports)} reports, {len(outputs) // 2} project(s)")


def _read_jsonl(path: Path, cls):
    with open(path, encoding="utf-8") as fh:
        return [cls.from_json(json.loads(line)) for line in fh if line.strip()]


def cmd_featurize(cfg: RunConfig, args) -> None:
    cache = cfg.cache_dir
    reports = _read_corpus(cache)
    out_dir = cache / "features"
    out_dir.mkdir(exist_ok=True)
    outputs = []
    total = 0
    for project in _projects(cache):
        docs = _read_jsonl(cache / "extract" / f"{project}.docs.jsonl", SourceDocument)
        feats = _read_jsonl(cache / "extract" / f"{project}.bugs.jsonl", BugReportFeatures)
        reps = [r for r in reports if r.project == project]
        if [f.bug_id for f in feats] != [r.id for r in reps]:
            raise BugLocError("stale-cache", "extracted features do not match the corpus: rerun `bugloc extract`")
        store = featurize_project(project, reps, feats, docs)
        target = out_dir / f"{project}.blfc"
        write_store(store, project, target)
        outputs.append(target)
        if getattr(args, "csv", False):
            csv_target = out_dir / f"{project}.csv"
            with open(csv_target, "w", encoding="utf-8", newline="") as fh:
                write_store_csv(store, fh)
            outputs.append(csv_target)
        total += len(store)
    write_manifest(cfg, "featurize", {}, outputs)
    print(f"featurize: {total} pairs")


def cmd_regions(cfg: RunConfig, args) -> None:
    cfg.require("tools")
    cache = cfg.cache_dir
    reports = _read_corpus(cache)
    truths = {r.id: r.fixed_files for r in reports}
    regions = build_regions(_tool_results(cfg), truths, truths.keys(), cfg.topn)
    data = {"topn": cfg.topn, "regions": [{"name": r.name, "size": len(r), "bug_ids": sorted(r.bug_ids)} for r in regions]}
    target = cache / "regions.json"
    target.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    write_manifest(cfg, "regions", {"tools": sha256_tree(cfg.path("tools"))}, [target])
    print(format_table([{"region": r.name, "size": len(r)} for r in regions]), end="")


def cmd_train(cfg: RunConfig, args) -> Ensemble:
    cache = cfg.cache_dir
    reports = _read_corpus(cache)
    store = _load_store(cache)
    regions = _load_regions(cache)
    split = timeline_split(reports, cfg.cutoff_year)
    created = {r.id: r.created_at for r in reports}
    tcfg = cfg.train_config()
    ensemble = train_regions(regions, store, split, tcfg, created, cfg.region_selection(),
                             jobs=cfg.jobs, per_project=cfg.per_project)
    violations = leakage_violations(ensemble.models, created)
    if violations:
        raise AssertionError(f"temporal leakage in trained models: {violations[:5]}")
    model_dir = cache / "models"
    model_dir.mkdir(exist_ok=True)
    for old in model_dir.glob("*.blgb"):
        old.unlink()
    outputs = []
    for name in sorted(ensemble.models):
        target = model_dir / f"{name}.blgb"
        save_model(ensemble.models[name], target)
        outputs.append(target)
    extra = {
        "cutoff_year": cfg.cutoff_year,
        "train_config": tcfg.digest(),
        "train_bugs": len(split.train),
        "test_bugs": len(split.test),
        "trained": sorted(ensemble.models),
        "skipped": dict(sorted(ensemble.skipped.items())),
        "models": {name: {k: m.meta[k] for k in ("region", "project", "seed", "max_created_at")}
                   | {"best_iteration": m.best_iteration, "trees": len(m.trees)}
                   for name, m in sorted(ensemble.models.items())},
    }
    write_manifest(cfg, "train", {}, outputs, extra)
    print(f"train: {len(ensemble.models)} model(s), {len(ensemble.skipped)} skipped; "
          f"{len(split.train)} training / {len(split.test)} test reports")
    return ensemble


def _test_store(cache: Path, cutoff_year: int) -> FeatureStore:
    reports = _read_corpus(cache)
    split = timeline_split(reports, cutoff_year)
    store = _load_store(cache)
    return store.subset(store.rows(split.test))


def cmd_rank(cfg: RunConfig, args) -> None:
    cache = cfg.cache_dir
    train_manifest = read_manifest(cache, "train")
    models = _load_ensemble(cache)
    test = _test_store(cache, train_manifest["cutoff_year"])
    if len(test) == 0:
        raise BugLocError("input", f"no reports created on or after {train_manifest['cutoff_year']}-01-01")
    ranked = ensemble_rank(models, test, normalize=cfg.normalize)
    target = cache / "ranking.csv"
    with open(target, "w", encoding="utf-8", newline="") as fh:
        write_ranking(ranked, fh)
    run = {
        "cutoff_year": train_manifest["cutoff_year"],
        "regions_trained": train_manifest["trained"],
        "regions_skipped": train_manifest["skipped"],
        "seeds": {k: v["seed"] for k, v in train_manifest["models"].items()},
        "config_hash": train_manifest["config_hash"],
        "normalize": cfg.normalize,
        "reports_ranked": len(ranked),
    }
    run_target = cache / "rank.json"
    run_target.write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
    write_manifest(cfg, "rank", {}, [target, run_target])
    print(f"rank: {len(ranked)} report(s) ranked by {len(models)} model(s)")


def cmd_evaluate(cfg: RunConfig, args) -> dict:
    cache = cfg.cache_dir
    reports = {r.id: r for r in _read_corpus(cache)}
    with open(cache / "ranking.csv", encoding="utf-8", newline="") as fh:
        rankings = read_ranking(fh)
    truths = {b: r.fixed_files for b, r in reports.items()}
    keys = {b: {"year": reports[b].year, "project": reports[b].project} for b in rankings}
    overall = evaluate_rankings(rankings, truths, sorted(rankings), "test", keys)
    result = {"overall": overall.summary(),
              "by_year": [g.summary() for g in group_by(overall.per_bug, "year").values()],
              "by_project": [g.summary() for g in group_by(overall.per_bug, "project").values()],
              "per_bug": overall.to_json()["per_bug"]}
    text = ["Overall", format_table([overall.summary()]), "By year", format_table(result["by_year"]),
            "By project", format_table(result["by_project"])]
    if getattr(args, "per_region", False):
        models = _load_ensemble(cache)
        test = _test_store(cache, read_manifest(cache, "train")["cutoff_year"])
        per_region = {name: {b: rl.paths for b, rl in ensemble_rank([m], test, cfg.normalize).items()}
                      for name, m in models.items()}
        rows = region_vs_multi(per_region, rankings, truths, sorted(rankings))
        result["region_vs_multi"] = rows
        text += ["Region classifiers vs multi-classifier", format_table(rows)]
    if getattr(args, "compare_tools", False):
        cfg.require("tools")
        tools = {}
        for res in _tool_results(cfg):
            tools.setdefault(res.tool, {})[res.bug_id] = list(res.ranked_files)
        rows = baseline_comparison(rankings, tools, truths)
        result["baselines"] = rows
        text += ["Against baseline tools (shared reports only)", format_table(rows)]
    (cache / "report.json").write_text(to_json(result))
    (cache / "report.txt").write_text("\n".join(text))
    write_manifest(cfg, "evaluate", {}, [cache / "report.json", cache / "report.txt"])
    print("\n".join(text), end="")
    return result


def cmd_dissect(cfg: RunConfig, args) -> dict:
    cache = cfg.cache_dir
    store = _load_store(cache)
    bugs = None
    if getattr(args, "bugs_file", None):
        bugs = [line.strip() for line in Path(args.bugs_file).read_text().splitlines() if line.strip()]
    grid = dissect_pairs(store, bugs=bugs)
    (cache / "dissect.csv").write_text(grid_csv(grid))
    rows = [{"bug_channel": bc, "code_channel": cc, "MAP": m, "MRR": r}
            for (bc, cc), (m, r) in sorted(grid.items(), key=lambda kv: -kv[1][0])]
    (cache / "dissect.txt").write_text(format_table(rows))
    write_manifest(cfg, "dissect", {}, [cache / "dissect.csv", cache / "dissect.txt"])
    print(format_table(rows[:10]), end="")
    return grid


def cmd_overlap(cfg: RunConfig, args) -> dict:
    cfg.require("tools")
    cache = cfg.cache_dir
    reports = _read_corpus(cache)
    truths = {r.id: r.fixed_files for r in reports}
    results = _tool_results(cfg)
    table = overlap_table(results, truths, truths.keys())
    rows = []
    for a, b, cells in table:
        row = {"tool_a": a, "tool_b": b}
        for n, (both, only_a, only_b) in cells.items():
            row.update({f"both@{n}": both, f"only_a@{n}": only_a, f"only_b@{n}": only_b})
        rows.append(row)
    counts = exclusive_counts(results, truths, truths.keys())
    data = {"pairs": rows, "regions": {str(n): c for n, c in counts.items()}}
    (cache / "overlap.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    text = format_table(rows) + "\n" + format_table(
        [{"region": name, **{f"Top{n}": counts[n][name] for n in counts}} for name in counts[1]])
    (cache / "overlap.txt").write_text(text)
    write_manifest(cfg, "overlap", {"tools": sha256_tree(cfg.path("tools"))},
                   [cache / "overlap.json", cache / "overlap.txt"])
    print(text, end="")
    return data


def cmd_fixture(cfg: RunConfig, args) -> None:
    """Write the synthetic desk-scale corpus plus a ready config file."""
    from .synthetic import generate

    root = Path(args.directory)
    corpus = generate(seed=cfg.seed)
    corpus.write(root)
    (root / "bugloc.ini").write_text(
        "[paths]\nbugs = bugs.jsonl\nsnapshots = snapshots\nhistory = history\ntools = tools\n"
        "cache = cache\n\n[run]\n"
        f"cutoff_year = {corpus.cutoff_year}\nseed = {cfg.seed}\nmode = quick\nper_project = false\n"
        "regions = all\nnormalize = false\ntopn = 1\njobs = 1\n")
    print(f"fixture: {len(corpus.reports)} reports, {sum(len(s.files) for s in corpus.snapshots.values())} files -> {root}")


HANDLERS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "featurize": cmd_featurize,
    "regions": cmd_regions,
    "train": cmd_train,
    "rank": cmd_rank,
    "evaluate": cmd_evaluate,
    "dissect": cmd_dissect,
    "overlap": cmd_overlap,
}


# -- argument parsing -------------------------------------------------------

def _shared_options() -> argparse.ArgumentParser:
    """Flags accepted before or after the subcommand; they override the config file."""
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    g = p.add_argument_group("configuration")
    g.add_argument("--config", default=S, help="INI file with [paths] and [run] sections")
    g.add_argument("--cache", default=S, help="cache directory for artifacts and manifests")
    g.add_argument("--bugs", default=S, help="bug export (one JSON record per line)")
    g.add_argument("--snapshots", default=S, help="directory of <PROJECT>/MANIFEST snapshots")
    g.add_argument("--history", default=S, help="directory of <PROJECT>.txt history exports")
    g.add_argument("--tools", default=S, help="baseline tool results: CSV file or directory of CSVs")
    g.add_argument("--cutoff", dest="cutoff_year", type=int, default=S, help="timeline split year (Jan 1)")
    g.add_argument("--seed", type=int, default=S, help="random seed recorded in every manifest")
    m = g.add_mutually_exclusive_group()
    m.add_argument("--faithful", dest="mode", action="store_const", const="faithful", default=S,
                   help="10000-tree cap with early stopping")
    m.add_argument("--quick", dest="mode", action="store_const", const="quick", default=S,
                   help="100-tree cap (default)")
    pp = g.add_mutually_exclusive_group()
    pp.add_argument("--per-project", dest="per_project", action="store_const", const=True, default=S,
                    help="one model per region and project")
    pp.add_argument("--cross-project", dest="per_project", action="store_const", const=False, default=S,
                    help="one model per region over all projects (default)")
    g.add_argument("--regions", default=S, help="comma-separated region names to train, or 'all'")
    nm = g.add_mutually_exclusive_group()
    nm.add_argument("--normalize", dest="normalize", action="store_const", const=True, default=S,
                    help="min-max normalize each model's probabilities per report before averaging")
    nm.add_argument("--no-normalize", dest="normalize", action="store_const", const=False, default=S)
    g.add_argument("--topn", type=int, default=S, help="TopN defining tool success for regions")
    g.add_argument("--jobs", type=int, default=S, help="worker processes for region training")
    g.add_argument("--force", action="store_true", default=S, help="ignore stale-cache checks")
    g.add_argument("-v", "--verbose", action="store_true", default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    shared = _shared_options()
    parser = argparse.ArgumentParser(
        prog="bugloc", parents=[shared],
        description="Bug localization pipeline: per-region boosted classifiers over a 7x10 tf-idf similarity grid.",
        epilog="exit codes: 0 success, 2 input error, 3 stale or missing artifact, 4 internal error")
    parser.add_argument("--version", action="version", version=f"bugloc {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    helps = {
        "ingest": "validate the bug export, curate against snapshots, drop post-fix reports",
        "extract": "token bags for reports and source files",
        "featurize": "70-cell similarity grid for every (report, file) pair",
        "regions": "region family from baseline tool results",
        "train": "one boosted classifier per region on pre-cutoff reports",
        "rank": "rank post-cutoff reports' files by averaged probability",
        "evaluate": "MAP, MRR and TopN of the ranking",
        "dissect": "MAP/MRR of ranking by each grid cell alone",
        "overlap": "pairwise overlap of tool success sets",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[shared], help=helps[name])
        if name == "featurize":
            sp.add_argument("--csv", action="store_true", help="also export the pair features as CSV")
        if name == "evaluate":
            sp.add_argument("--per-region", action="store_true", help="also score each region classifier alone")
            sp.add_argument("--compare-tools", action="store_true", help="compare against baseline tool rankings")
        if name == "dissect":
            sp.add_argument("--bugs-file", help="restrict to report ids listed one per line")
    fx = sub.add_parser("fixture", parents=[shared], help="write the synthetic demo corpus")
    fx.add_argument("directory")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    for f in fields(RunConfig):
        if f.name != "base_dir" and hasattr(args, f.name):
            value = getattr(args, f.name)
            if f.name in RunConfig.PATH_KEYS:
                value = str(Path(value).resolve())
            setattr(cfg, f.name, value)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.command:
        parser.print_help()
        return EXIT_INPUT
    try:
        cfg = config_from_args(args)
        if args.command == "fixture":
            cmd_fixture(cfg, args)
            return EXIT_OK
        validate_upstream(cfg, args.command, force=getattr(args, "force", False))
        HANDLERS[args.command](cfg, args)
        return EXIT_OK
    except BugLocError as exc:
        print(f"bugloc {args.command}: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_STALE if exc.code in STALE_CODES else EXIT_INPUT
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"bugloc {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # invariant violations and bugs
        log.debug("internal error", exc_info=True)
        print(f"bugloc {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
