"""Bug-tracker exports, source snapshots, history exports and tool results.

Everything here is plain data: reports and commits are frozen dataclasses,
and the two curation filters (:func:`curate`, :func:`filter_prefix`) only
sort reports into buckets.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping

from .errors import BugLocError

log = logging.getLogger(__name__)

STATUSES = ("resolved", "fixed", "closed", "other")
PREFIX_WINDOW = timedelta(seconds=3600)

RECORD_FIELDS = (
    "id", "project", "summary", "description", "created_at", "status",
    "reporter_email", "comments", "attachments", "fix_commits", "fixed_files",
)


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp into an aware UTC datetime."""
    if not isinstance(text, str):
        raise ValueError(f"timestamp must be a string, got {type(text).__name__}")
    value = text.strip()
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    ts = datetime.fromisoformat(value.replace(" ", "T", 1))
    if ts.tzinfo is None:
        raise ValueError(f"timestamp without offset: {text!r}")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def normalize_status(value: str) -> str:
    value = (value or "").strip().lower()
    return value if value in STATUSES else "other"


def normalize_email(value: str) -> str:
    return (value or "").strip().lower()


@dataclass(frozen=True)
class CommitRef:
    hash: str
    committer_email: str
    timestamp: datetime
    touched_files: frozenset

    def __post_init__(self):
        if not self.touched_files:
            raise ValueError(f"commit {self.hash} touches no files")


@dataclass(frozen=True)
class Comment:
    author_email: str
    timestamp: datetime
    has_patch_attachment: bool = False


@dataclass(frozen=True)
class Attachment:
    timestamp: datetime
    is_patch: bool = False


@dataclass(frozen=True)
class BugReport:
    id: str
    project: str
    summary: str
    description: str
    created_at: datetime
    status: str = "fixed"
    reporter_email: str = ""
    comments: tuple = ()
    attachments: tuple = ()
    fix_commits: tuple = ()
    fixed_files: frozenset = frozenset()

    def __post_init__(self):
        for commit in self.fix_commits:
            if not self.created_at < commit.timestamp:
                raise ValueError(
                    f"fix commit {commit.hash} is not after report {self.id} creation"
                )

    @property
    def year(self) -> int:
        return self.created_at.year

    def to_record(self) -> dict:
        """Inverse of :func:`report_from_record` (one export line)."""
        return {
            "id": self.id,
            "project": self.project,
            "summary": self.summary,
            "description": self.description,
            "created_at": format_timestamp(self.created_at),
            "status": self.status,
            "reporter_email": self.reporter_email,
            "comments": [
                {
                    "author_email": c.author_email,
                    "timestamp": format_timestamp(c.timestamp),
                    "has_patch_attachment": c.has_patch_attachment,
                }
                for c in self.comments
            ],
            "attachments": [
                {"timestamp": format_timestamp(a.timestamp), "is_patch": a.is_patch}
                for a in self.attachments
            ],
            "fix_commits": [
                {
                    "hash": c.hash,
                    "committer_email": c.committer_email,
                    "timestamp": format_timestamp(c.timestamp),
                    "touched_files": sorted(c.touched_files),
                }
                for c in self.fix_commits
            ],
            "fixed_files": sorted(self.fixed_files),
        }


@dataclass(frozen=True)
class IngestError:
    line: int
    message: str


def report_from_record(record: Mapping) -> BugReport:
    """Build a report from one decoded export record; raises ValueError."""
    if not isinstance(record, Mapping):
        raise ValueError("record is not a JSON object")
    missing = [name for name in RECORD_FIELDS if name not in record]
    if missing:
        raise ValueError(f"missing field(s): {', '.join(missing)}")
    unknown = sorted(set(record) - set(RECORD_FIELDS))
    if unknown:
        raise ValueError(f"unknown field(s): {', '.join(unknown)}")
    for name in ("id", "project", "summary", "description", "status", "reporter_email"):
        if not isinstance(record[name], str):
            raise ValueError(f"field {name!r} must be a string")
    for name in ("comments", "attachments", "fix_commits", "fixed_files"):
        if not isinstance(record[name], list):
            raise ValueError(f"field {name!r} must be a list")
    if not record["id"].strip():
        raise ValueError("empty id")

    comments = tuple(
        Comment(
            author_email=c.get("author_email", ""),
            timestamp=parse_timestamp(c["timestamp"]),
            has_patch_attachment=bool(c.get("has_patch_attachment", False)),
        )
        for c in record["comments"]
    )
    attachments = tuple(
        Attachment(timestamp=parse_timestamp(a["timestamp"]), is_patch=bool(a.get("is_patch", False)))
        for a in record["attachments"]
    )
    commits = tuple(
        CommitRef(
            hash=c["hash"],
            committer_email=c.get("committer_email", ""),
            timestamp=parse_timestamp(c["timestamp"]),
            touched_files=frozenset(c["touched_files"]),
        )
        for c in record["fix_commits"]
    )
    return BugReport(
        id=record["id"],
        project=record["project"],
        summary=record["summary"],
        description=record["description"],
        created_at=parse_timestamp(record["created_at"]),
        status=normalize_status(record["status"]),
        reporter_email=record["reporter_email"],
        comments=comments,
        attachments=attachments,
        fix_commits=commits,
        fixed_files=frozenset(record["fixed_files"]),
    )


def ingest_bug_reports(lines: Iterable[str]) -> tuple[list[BugReport], list[IngestError]]:
    """Parse a line-delimited JSON export.

    Blank lines are skipped. A malformed record yields an :class:`IngestError`
    carrying its 1-based line number; the remaining records are unaffected.
    """
    reports, errors = [], []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            reports.append(report_from_record(record))
        except (ValueError, KeyError, TypeError) as exc:
            message = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
            errors.append(IngestError(lineno, message))
    return reports, errors


def read_bug_export(path) -> tuple[list[BugReport], list[IngestError]]:
    with open(path, encoding="utf-8") as fh:
        return ingest_bug_reports(fh)


def write_bug_export(reports: Iterable[BugReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_record(), sort_keys=True, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class HistoryEntry:
    hash: str
    committer_email: str
    timestamp: datetime
    log: str
    hunks: tuple = ()


@dataclass(frozen=True)
class ProjectSnapshot:
    project: str
    files: Mapping[str, str]
    history: Mapping[str, tuple] = field(default_factory=dict)

    @property
    def paths(self) -> list[str]:
        """Candidate files in enumeration order (manifest order)."""
        return list(self.files)


def curate(reports: Iterable[BugReport], snapshot: ProjectSnapshot):
    """Keep reports whose status qualifies and whose fixed files all exist.

    Returns ``(kept, dropped)`` where ``dropped`` holds ``(report, reason)``
    pairs; reasons are ``status``, ``no-fixed-files`` and ``missing-file``.
    """
    kept, dropped = [], []
    for report in reports:
        if report.status not in ("resolved", "fixed", "closed"):
            dropped.append((report, "status"))
        elif not report.fixed_files:
            dropped.append((report, "no-fixed-files"))
        elif any(path not in snapshot.files for path in report.fixed_files):
            dropped.append((report, "missing-file"))
        else:
            kept.append(report)
    return kept, dropped


def is_postfix(report: BugReport) -> bool:
    if not report.fix_commits:
        raise BugLocError("uncurated-report", f"report {report.id} has no fix commits")
    reporter = normalize_email(report.reporter_email)
    if reporter and any(normalize_email(c.committer_email) == reporter for c in report.fix_commits):
        return True
    stamps = [a.timestamp for a in report.attachments if a.is_patch]
    stamps += [c.timestamp for c in report.comments if c.has_patch_attachment]
    return any(timedelta(0) <= ts - report.created_at <= PREFIX_WINDOW for ts in stamps)


def filter_prefix(reports: Iterable[BugReport]):
    """Split reports into ``(prefix, postfix)``.

    Post-fix: reporter and fix committer share an email, or a patch shows up
    (attachment or patch-bearing comment) within the first hour, boundary
    included.
    """
    prefix, postfix = [], []
    for report in reports:
        (postfix if is_postfix(report) else prefix).append(report)
    return prefix, postfix


# -- snapshots --------------------------------------------------------------

MANIFEST_NAME = "MANIFEST"


def load_snapshot(root, project: str | None = None, history=None) -> ProjectSnapshot:
    """Load a snapshot directory: a ``MANIFEST`` of repo-relative paths plus the files."""
    root = Path(root)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise BugLocError("input", f"snapshot {root} has no {MANIFEST_NAME}")
    files = {}
    for line in manifest.read_text(encoding="utf-8").splitlines():
        rel = line.strip()
        if not rel or rel.startswith("#"):
            continue
        target = root / rel
        if not target.is_file():
            raise BugLocError("input", f"manifest entry {rel!r} not found under {root}")
        files[rel] = target.read_text(encoding="utf-8", errors="replace")
    return ProjectSnapshot(project or root.name, files, history or {})


def write_snapshot(snapshot: ProjectSnapshot, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for rel, text in snapshot.files.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8", newline="\n")
    (root / MANIFEST_NAME).write_text("".join(p + "\n" for p in snapshot.files), encoding="utf-8")


# -- history export ---------------------------------------------------------

_FILE_HEADER = re.compile(r"^=== (?P<path>\S.*?)\s*$")
_COMMIT_HEADER = re.compile(r"^--- commit (?P<hash>[0-9A-Za-z]+) (?P<email>\S+) (?P<ts>\S+)\s*$")


def parse_history(lines: Iterable[str]) -> dict[str, tuple[HistoryEntry, ...]]:
    """Parse the per-file history export.

    Layout::

        === path/to/File.java
        --- commit <hash> <committer_email> <rfc3339>
        log:
        <message lines>
        hunk:
        <unified diff hunk lines>
        hunk:
        ...
    """
    history: dict[str, list[HistoryEntry]] = {}
    path = None
    commit = None  # (hash, email, ts)
    log_lines: list[str] = []
    hunks: list[list[str]] = []
    section = None

    def flush():
        if commit is not None:
            history[path].append(
                HistoryEntry(
                    hash=commit[0],
                    committer_email=commit[1],
                    timestamp=commit[2],
                    log="\n".join(log_lines).strip(),
                    hunks=tuple("\n".join(h) for h in hunks),
                )
            )

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        header = _FILE_HEADER.match(line)
        if header:
            flush()
            path, commit, log_lines, hunks, section = header["path"], None, [], [], None
            history.setdefault(path, [])
            continue
        head = _COMMIT_HEADER.match(line)
        if head:
            if path is None:
                raise BugLocError("input", f"history line {lineno}: commit before any '=== <path>'")
            flush()
            try:
                ts = parse_timestamp(head["ts"])
            except ValueError as exc:
                raise BugLocError("input", f"history line {lineno}: {exc}") from None
            commit, log_lines, hunks, section = (head["hash"], head["email"], ts), [], [], None
            continue
        if commit is None:
            if line.strip():
                raise BugLocError("input", f"history line {lineno}: content outside a commit")
            continue
        if line == "log:":
            section = "log"
        elif line == "hunk:":
            section = "hunk"
            hunks.append([])
        elif section == "log":
            log_lines.append(line)
        elif section == "hunk":
            hunks[-1].append(line)
        elif line.strip():
            raise BugLocError("input", f"history line {lineno}: expected 'log:' or 'hunk:'")
    flush()
    return {p: tuple(entries) for p, entries in history.items()}


def read_history(path) -> dict[str, tuple[HistoryEntry, ...]]:
    with open(path, encoding="utf-8") as fh:
        return parse_history(fh)


def format_history(history: Mapping[str, Iterable[HistoryEntry]]) -> str:
    out = []
    for path, entries in history.items():
        out.append(f"=== {path}")
        for e in entries:
            out.append(f"--- commit {e.hash} {e.committer_email} {format_timestamp(e.timestamp)}")
            out.append("log:")
            out.extend(e.log.splitlines())
            for hunk in e.hunks:
                out.append("hunk:")
                out.extend(hunk.splitlines())
    return "\n".join(out) + "\n"
