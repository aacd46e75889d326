"""Deterministic desk-scale corpus with planted signals.

Three projects of Java-like files, a bug export, per-file history and six
baseline-tool result files. Each tool succeeds (Top1) exactly on its own
cluster of reports plus a shared cluster every tool gets right; one more
cluster defeats every tool. The reports of each tool cluster carry their
signal in one (bug channel, code channel) cell:

    ToolA  summaryHints x className        class name written in the summary
    ToolB  stackTraces x methodNames       frame naming the buggy method (caller's class)
    ToolC  codeElements x hunks            code block quoting lines a past commit removed
    ToolD  description x commitLogs        words from the file's commit messages
    ToolE  summary x documentation         words from the file's doc comment
    ToolF  descriptionHints x memberReference  a field identifier in the description

Decoys keep the catch-all channels honest: collaborator files repeat a
file's identifiers in comments (so rawSource points elsewhere) and each
report mentions a different file in the channels that feed rawBugReport.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .corpus import (
    Attachment,
    BugReport,
    CommitRef,
    HistoryEntry,
    ProjectSnapshot,
    format_history,
    write_bug_export,
    write_snapshot,
)
from .regions import ToolResult, write_tool_results
from .textprep import DEFAULT, Preprocessor, in_dictionary, stem

PROJECTS = ("ALPHA", "BRAVO", "CHARLIE")
TOOLS = ("ToolA", "ToolB", "ToolC", "ToolD", "ToolE", "ToolF")
PLANTED = {
    "ToolA": ("summaryHints", "className"),
    "ToolB": ("stackTraces", "methodNames"),
    "ToolC": ("codeElements", "hunks"),
    "ToolD": ("description", "commitLogs"),
    "ToolE": ("summary", "documentation"),
    "ToolF": ("descriptionHints", "memberReference"),
}
CLUSTERS = TOOLS + ("INTER", "NOT-UNION")
CUTOFF_YEAR = 2014
TRAIN_YEARS = (2010, 2011, 2012, 2013)
TEST_YEAR = 2014
# Each tool localizes ~40% of reports, the union ~70%: exclusive successes are
# rare and easy reports (every tool right) are common.
CLUSTER_SIZES = {**{t: 4 for t in TOOLS}, "INTER": 20, "NOT-UNION": 16}
TEST_SHARE = 0.4

# shared vocabulary: makes every similarity column dense, as in real projects
SUFFIXES = ("Manager", "Handler", "Builder", "Reader", "Writer", "Service")
VERBS = ("update", "create", "handle", "check", "reset", "build", "parse", "apply")
NOUNS = ("value", "state", "event", "index", "buffer", "record", "result", "entry",
         "option", "cache", "context", "signal")

_ONSETS = "b c d f g h j k l m n p r s t v z br dr gr kr pl tr vl zh".split()
_VOWELS = "a e i o u".split()
_CODAS = "k l m n r s t x z rk rn".split()


class _Words:
    """Unique pseudo-words and dictionary words with pairwise distinct stems."""

    def __init__(self, rng: random.Random, prep: Preprocessor):
        self.rng = rng
        self.prep = prep
        self.used: set[str] = {stem(w.lower()) for w in SUFFIXES + VERBS + NOUNS}
        vocab = sorted(w for w in prep.words if w.isalpha() and w.islower() and 5 <= len(w) <= 9)
        rng.shuffle(vocab)
        self._vocab = iter(vocab)

    def _claim(self, word: str) -> bool:
        s = stem(word)
        if len(s) < 3 or s in self.used or word in self.prep.stopwords or s in self.prep.stopwords:
            return False
        self.used.add(s)
        return True

    def pseudo(self) -> str:
        while True:
            w = "".join(self.rng.choice(_ONSETS) + self.rng.choice(_VOWELS) for _ in range(2)) + self.rng.choice(_CODAS)
            if not in_dictionary(w, self.prep.words) and self._claim(w):
                return w

    def real(self) -> str:
        for w in self._vocab:
            if self._claim(w):
                return w
        raise RuntimeError("dictionary exhausted")


def _cap(w: str) -> str:
    return w[0].upper() + w[1:]


@dataclass
class FileSpec:
    index: int
    project: str
    package: str
    cls: str
    methods: list
    fields: list
    params: list
    variables: list
    doc_words: list
    log_words: list
    hunk_removed: list
    hunk_added: list
    common_methods: list = field(default_factory=list)
    common_field: str = "value"
    common_param: str = "value"
    common_doc: list = field(default_factory=list)
    common_log: list = field(default_factory=list)

    @property
    def path(self) -> str:
        return f"src/org/{self.project.lower()}/{self.package}/{self.cls}.java"


@dataclass
class SyntheticCorpus:
    reports: list
    snapshots: dict
    tool_results: list
    clusters: dict  # bug id -> cluster name
    noise: dict  # bug id -> expected drop reason
    files: dict = field(default_factory=dict)  # project -> [FileSpec]
    cutoff_year: int = CUTOFF_YEAR
    seed: int = 0

    @property
    def curated_ids(self) -> list:
        return [r.id for r in self.reports if r.id in self.clusters]

    def manifest(self) -> dict:
        created = {r.id: r.created_at for r in self.reports}
        kept = self.curated_ids
        return {
            "seed": self.seed,
            "cutoff_year": self.cutoff_year,
            "projects": {p: len(s.files) for p, s in self.snapshots.items()},
            "reports_total": len(self.reports),
            "reports_kept": len(kept),
            "dropped": dict(sorted(self.noise.items())),
            "train": sum(1 for b in kept if created[b].year < self.cutoff_year),
            "test": sum(1 for b in kept if created[b].year >= self.cutoff_year),
            "clusters": {c: sorted(b for b in kept if self.clusters[b] == c) for c in CLUSTERS},
            "planted": {t: list(cell) for t, cell in PLANTED.items()},
            "tools": list(TOOLS),
        }

    def write(self, root) -> Path:
        """Lay the corpus out on disk in the external formats."""
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        write_bug_export(self.reports, root / "bugs.jsonl")
        (root / "history").mkdir(exist_ok=True)
        for project, snap in self.snapshots.items():
            write_snapshot(snap, root / "snapshots" / project)
            (root / "history" / f"{project}.txt").write_text(format_history(snap.history), encoding="utf-8")
        (root / "tools").mkdir(exist_ok=True)
        for tool in TOOLS:
            with open(root / "tools" / f"{tool}.csv", "w", encoding="utf-8", newline="") as fh:
                write_tool_results([r for r in self.tool_results if r.tool == tool], fh)
        (root / "fixture.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return root


def _java_source(f: FileSpec, targets: list) -> str:
    lines = [f"package org.{f.project.lower()}.{f.package};", "", "/**",
             f" * {_cap(f.doc_words[0])} {f.doc_words[1]} {f.doc_words[2]}.",
             f" * Keeps the {' '.join(f.common_doc)} in order.", " */",
             f"public class {f.cls} {{"]
    for fld in [*f.fields, f.common_field]:
        lines.append(f"    private int {fld};")
    for t, var in zip(targets, f.variables):
        lines.append(f"    private {t.cls} {var};")
    for t in targets:
        d0, d1, d2 = t.doc_words
        lines.append(f"    private int {d0}{_cap(d1)}{_cap(d2)};")
        lines.append(f"    private int {d2}{_cap(d1)}{_cap(d0)};")
    lines.append("")
    for t in targets:
        idents = " ".join([t.cls, *t.methods, *t.fields])
        lines.extend([f"    // {idents}"] * 3)
    t1, t2 = targets
    v1, v2 = f.variables
    m0, m1, m2 = f.methods
    p0, p1 = f.params
    lines += [
        "",
        f"    public void {m0}(int {p0}) {{",
        f"        this.{f.fields[0]} = {p0};",
        f"        {v1}.{t1.methods[0]}();",
        "    }",
        "",
        f"    public int {m1}(int {p1}) {{",
        f"        {v2}.{t2.methods[0]}();",
        f"        return this.{f.fields[1]};",
        "    }",
        "",
        f"    public void {m2}() {{",
        f"        {v1}.{t1.methods[1]}({v2}.{t2.methods[2]}());",
        "    }",
        "",
        f"    public int {f.common_methods[0]}(int {f.common_param}) {{",
        f"        this.{f.common_field} = {f.common_param};",
        f"        return {v1}.{t1.common_methods[1]}({f.common_param});",
        "    }",
        "",
        f"    public int {f.common_methods[1]}(int {f.common_param}) {{",
        f"        return this.{f.common_field};",
        "    }",
        "}",
        "",
    ]
    return "\n".join(lines)


def _history(f: FileSpec, rng: random.Random, base: datetime) -> tuple:
    entries = []
    for k in range(2):
        removed = f.hunk_removed[k]
        added = f.hunk_added[k]
        hunk = (f"@@ -{10 + k},2 +{10 + k},2 @@\n"
                f"-        int {removed} = {f.hunk_removed[1 - k]};\n"
                f"+        int {added} = 0;\n"
                f"         return {f.common_field};")
        ts = base + timedelta(days=rng.randrange(0, 300), seconds=rng.randrange(86400))
        log = f"{_cap(f.log_words[k])} {f.log_words[2]}" if k == 0 else f"{_cap(f.log_words[1])} {f.log_words[0]}"
        log += f"; {f.common_log[k]} {f.common_field}"
        entries.append(HistoryEntry(f"{f.project.lower()}{f.index:03d}{k}", f"dev{f.index % 7}@example.org",
                                    ts, log, (hunk,)))
    entries.sort(key=lambda e: e.timestamp)
    return tuple(entries)


def _filler(rng, pool, k):
    return " ".join(rng.sample(pool, k))


def generate(seed: int = 0, files_per_project: int = 100, cluster_sizes=None,
             prep: Preprocessor = DEFAULT) -> SyntheticCorpus:
    rng = random.Random(seed)
    words = _Words(rng, prep)
    filler = [words.real() for _ in range(120)]

    files: dict[str, list] = {}
    snapshots = {}
    for project in PROJECTS:
        packages = [words.pseudo() for _ in range(10)]
        specs = []
        for i in range(files_per_project):
            specs.append(FileSpec(
                index=i, project=project, package=packages[i % len(packages)],
                cls=_cap(words.pseudo()) + _cap(words.real()) + rng.choice(SUFFIXES),
                methods=[words.pseudo() + _cap(words.real()) for _ in range(3)],
                fields=[words.pseudo() + _cap(words.real()) for _ in range(2)],
                params=[words.pseudo() for _ in range(2)],
                variables=[words.pseudo() for _ in range(2)],
                doc_words=[words.real() for _ in range(3)],
                log_words=[words.real() for _ in range(3)],
                hunk_removed=[words.pseudo() for _ in range(2)],
                hunk_added=[words.real() for _ in range(2)],
                common_methods=[v + _cap(rng.choice(NOUNS)) for v in rng.sample(VERBS, 2)],
                common_field=rng.choice(NOUNS),
                common_param=rng.choice(NOUNS),
                common_doc=rng.sample(NOUNS, 3),
                common_log=rng.sample(VERBS, 2),
            ))
        n = len(specs)
        sources, history = {}, {}
        base = datetime(2008, 1, 1, tzinfo=timezone.utc)
        for f in specs:
            targets = [specs[(f.index - 1) % n], specs[(f.index - 2) % n]]
            sources[f.path] = _java_source(f, targets)
            history[f.path] = _history(f, rng, base)
        files[project] = specs
        snapshots[project] = ProjectSnapshot(project, sources, history)

    reports, clusters, noise = [], {}, {}
    tool_results = []
    counters = {p: 0 for p in PROJECTS}

    def new_id(project):
        counters[project] += 1
        return f"{project}-{counters[project]}"

    for c_idx, cluster in enumerate(CLUSTERS):
        size = (cluster_sizes or CLUSTER_SIZES)[cluster]
        n_test = int(round(size * TEST_SHARE))
        years = [TRAIN_YEARS[k % len(TRAIN_YEARS)] for k in range(size - n_test)] + [TEST_YEAR] * n_test
        for k in range(size):
            project = PROJECTS[(k + c_idx) % len(PROJECTS)]
            specs = files[project]
            n = len(specs)
            t_idx = rng.randrange(10, n)
            forbidden = {t_idx, (t_idx + 1) % n, (t_idx + 2) % n, (t_idx - 1) % n, (t_idx - 2) % n}
            d_idx = rng.choice([i for i in range(10, n) if i not in forbidden])
            T, D = specs[t_idx], specs[d_idx]
            summary, description = _bug_text(cluster, T, D, specs, rng, filler)
            created = datetime(years[k], 1, 1, tzinfo=timezone.utc) + timedelta(
                days=rng.randrange(0, 350), seconds=rng.randrange(86400))
            bug_id = new_id(project)
            commit = CommitRef(f"fix{bug_id.lower().replace('-', '')}", f"dev{k % 5}@example.org",
                               created + timedelta(days=2), frozenset({T.path}))
            reports.append(BugReport(bug_id, project, summary, description, created, "fixed",
                                     f"user{rng.randrange(1000)}@example.com", (), (), (commit,),
                                     frozenset({T.path})))
            clusters[bug_id] = cluster
            for tool in TOOLS:
                success = cluster == tool or cluster == "INTER"
                tool_results.append(_tool_ranking(tool, bug_id, T, specs, success, rng))

    # reports the curation steps must drop
    for reason in ("status", "missing-file", "postfix-email", "postfix-patch"):
        project = PROJECTS[len(noise) % len(PROJECTS)]
        T = files[project][rng.randrange(10, files_per_project)]
        created = datetime(2012, 6, 1, tzinfo=timezone.utc) + timedelta(days=len(noise))
        bug_id = new_id(project)
        path = T.path if reason != "missing-file" else "src/org/gone/Missing.java"
        committer = f"dev{len(noise)}@example.org"
        reporter = committer.upper() + " " if reason == "postfix-email" else "someone@example.com"
        attachments = (Attachment(created + timedelta(seconds=3600), True),) if reason == "postfix-patch" else ()
        reports.append(BugReport(
            bug_id, project, f"{_cap(_filler(rng, filler, 4))}", _filler(rng, filler, 10), created,
            "other" if reason == "status" else "fixed", reporter, (), attachments,
            (CommitRef(f"fix{bug_id.lower().replace('-', '')}", committer, created + timedelta(days=1),
                       frozenset({path})),), frozenset({path})))
        noise[bug_id] = reason

    order = sorted(range(len(reports)), key=lambda i: (reports[i].created_at, reports[i].id))
    reports = [reports[i] for i in order]
    return SyntheticCorpus(reports, snapshots, tool_results, clusters, noise, files, CUTOFF_YEAR, seed)


def _bug_text(cluster, T: FileSpec, D: FileSpec, specs, rng, filler):
    n = len(specs)
    caller = specs[(T.index + 1) % n]
    lead = f"{_cap(_filler(rng, filler, 2))} {rng.choice(VERBS)} {rng.choice(NOUNS)}"
    summary = f"{lead} {_filler(rng, filler, 2)}"
    ident = rng.choice(VERBS) + _cap(rng.choice(NOUNS))
    body = [f"{_cap(_filler(rng, filler, 6))} {' '.join(rng.sample(NOUNS, 3))} {rng.choice(VERBS)}.",
            f"Calling {ident} {_filler(rng, filler, 2)}."]

    def repeat(ws, times):
        return " ".join(w for w in ws for _ in range(times))

    if cluster == "ToolA":
        summary = f"{lead} {T.cls} {_filler(rng, filler, 2)}"
    elif cluster == "ToolB":
        dict_halves = [_dict_half(m) for m in D.methods[:2]]
        body.append(f"{_cap(_filler(rng, filler, 3))} {repeat(dict_halves, 4)}.")
        body.append(
            f"java.lang.IllegalStateException: {_filler(rng, filler, 2)}\n"
            f"\tat org.{T.project.lower()}.{caller.package}.{caller.cls}.{T.methods[0]}({caller.cls}.java:{rng.randrange(20, 400)})\n"
            f"\tat java.lang.Thread.run(Thread.java:745)"
        )
    elif cluster == "ToolC":
        body.append(f"{_cap(_filler(rng, filler, 3))} {repeat(D.hunk_added, 4)}.")
        body.append(f"\n    {rng.choice(NOUNS)}.{rng.choice(VERBS)}({T.hunk_removed[0]}, {T.hunk_removed[1]});\n")
    elif cluster == "ToolD":
        summary = f"{lead} {repeat(D.log_words[:2], 2)}"
        body.append(f"{_cap(_filler(rng, filler, 2))} {T.log_words[0]} {_filler(rng, filler, 2)} {T.log_words[1]}.")
    elif cluster == "ToolE":
        summary = f"{lead} {T.doc_words[0]} {T.doc_words[1]}"
        body.append(f"{_cap(_filler(rng, filler, 2))} {repeat(D.doc_words[:2], 3)}.")
    elif cluster == "ToolF":
        body.append(f"{_cap(_filler(rng, filler, 2))} {T.fields[0]} {_filler(rng, filler, 3)}.")
    elif cluster == "INTER":  # every tool succeeds, so every planted clue is present
        summary = f"{lead} {T.cls} {T.doc_words[0]} {T.doc_words[1]}"
        body.append(f"{_cap(_filler(rng, filler, 2))} {T.log_words[0]} {T.log_words[1]} {T.fields[0]}.")
        body.append(
            f"java.lang.IllegalStateException: {_filler(rng, filler, 2)}\n"
            f"\tat org.{T.project.lower()}.{caller.package}.{caller.cls}.{T.methods[0]}({caller.cls}.java:{rng.randrange(20, 400)})"
        )
        body.append(f"\n    {rng.choice(NOUNS)}.{rng.choice(VERBS)}({T.hunk_removed[0]}, {T.hunk_removed[1]});\n")
    else:  # NOT-UNION: one faint clue among two equally faint wrong ones
        others = rng.sample([s for s in specs if s.index != T.index], 2)
        clues = [T.doc_words[2], others[0].doc_words[2], others[1].doc_words[2]]
        rng.shuffle(clues)
        body.append(f"{_cap(_filler(rng, filler, 4))} {' '.join(clues)}.")
    return summary, "\n".join(body) + "\n"


def _dict_half(identifier: str) -> str:
    """``quellinLantern`` -> ``lantern``."""
    for i, ch in enumerate(identifier):
        if ch.isupper():
            return identifier[i:].lower()
    return identifier


def _tool_ranking(tool, bug_id, T: FileSpec, specs, success, rng, k=10) -> ToolResult:
    others = [s.path for s in specs if s.path != T.path]
    picks = rng.sample(others, k - 1)
    if success:
        ranked = [T.path] + picks
    else:
        pos = rng.randrange(1, k + 1)  # k means "not retrieved"
        ranked = picks[:]
        if pos < k:
            ranked.insert(pos, T.path)
    return ToolResult(tool, bug_id, tuple(ranked))


def curated_store(corpus: SyntheticCorpus, prep: Preprocessor = DEFAULT):
    """Curate, drop post-fix reports and featurize every project.

    Returns ``(kept reports, FeatureStore over all projects)``.
    """
    from .codeextract import build_source_documents
    from .corpus import curate, filter_prefix
    from .textprep import build_bug_features
    from .vsm import FeatureStore, featurize_project

    kept_all, stores = [], []
    for project, snap in corpus.snapshots.items():
        reports = [r for r in corpus.reports if r.project == project]
        kept, _ = curate(reports, snap)
        prefix, _ = filter_prefix(kept)
        docs = build_source_documents(snap, prep)
        features = [build_bug_features(r, prep) for r in prefix]
        stores.append(featurize_project(project, prefix, features, docs))
        kept_all.extend(prefix)
    return kept_all, FeatureStore.concat(stores)
