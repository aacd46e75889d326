"""Bug export ingestion, curation, the pre-fix filter and on-disk formats."""
from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugloc.corpus import (
    Attachment,
    BugReport,
    Comment,
    CommitRef,
    HistoryEntry,
    ProjectSnapshot,
    curate,
    filter_prefix,
    format_history,
    ingest_bug_reports,
    load_snapshot,
    normalize_status,
    parse_history,
    parse_timestamp,
    read_bug_export,
    write_bug_export,
    write_snapshot,
)
from bugloc.errors import BugLocError

T0 = datetime(2012, 3, 4, 5, 6, 7, tzinfo=timezone.utc)


def commit(email="dev@example.org", files=("a/Foo.java",), delay=timedelta(days=1)):
    return CommitRef("c0ffee", email, T0 + delay, frozenset(files))


def report(bug_id="P-1", status="fixed", fixed=("a/Foo.java",), reporter="user@example.com",
           attachments=(), comments=(), commits=None):
    return BugReport(bug_id, "P", "summary", "description", T0, status, reporter, tuple(comments),
                     tuple(attachments), tuple(commits if commits is not None else [commit(files=fixed)]),
                     frozenset(fixed))


def record(**overrides):
    rec = report().to_record()
    rec.update(overrides)
    return json.dumps(rec)


SNAPSHOT = ProjectSnapshot("P", {"a/Foo.java": "class Foo {}", "a/Bar.java": "class Bar {}"})


class TestIngest:
    def test_single_valid_record(self):
        reports, errors = ingest_bug_reports([record()])
        assert len(reports) == 1 and errors == []
        assert reports[0] == report()

    def test_missing_summary_is_a_record_error(self):
        rec = json.loads(record())
        del rec["summary"]
        reports, errors = ingest_bug_reports([record(id="P-2"), json.dumps(rec)])
        assert [r.id for r in reports] == ["P-2"]
        assert errors[0].line == 2 and "summary" in errors[0].message

    def test_three_records_one_malformed(self):
        lines = [record(id="P-1"), "{not json", record(id="P-3")]
        reports, errors = ingest_bug_reports(lines)
        assert len(reports) == 2 and len(errors) == 1
        assert errors[0].line == 2

    def test_empty_stream(self):
        assert ingest_bug_reports([]) == ([], [])

    def test_status_mapping_is_case_insensitive(self):
        assert normalize_status("RESOLVED") == "resolved"
        assert normalize_status(" Fixed ") == "fixed"
        assert normalize_status("Won't Fix") == "other"

    def test_export_round_trip(self, tmp_path):
        original = [report("P-1"), report("P-2", attachments=[Attachment(T0 + timedelta(hours=2), True)])]
        write_bug_export(original, tmp_path / "bugs.jsonl")
        back, errors = read_bug_export(tmp_path / "bugs.jsonl")
        assert errors == [] and back == original

    def test_fix_commit_must_follow_creation(self):
        with pytest.raises(ValueError):
            report(commits=[commit(delay=timedelta(0))])

    def test_timestamps_are_utc(self):
        assert parse_timestamp("2012-03-04T06:06:07+01:00") == T0.replace(hour=5)


class TestCurate:
    def test_existing_file_kept(self):
        kept, dropped = curate([report()], SNAPSHOT)
        assert kept == [report()] and dropped == []

    def test_one_missing_file_drops_report(self):
        r = report(fixed=("a/Foo.java", "a/Gone.java"))
        kept, dropped = curate([r], SNAPSHOT)
        assert kept == [] and dropped == [(r, "missing-file")]

    def test_other_status_dropped(self):
        r = report(status="other")
        assert curate([r], SNAPSHOT) == ([], [(r, "status")])

    def test_closed_is_kept(self):
        assert curate([report(status="closed")], SNAPSHOT)[0]

    @given(st.lists(st.tuples(st.sampled_from(["fixed", "resolved", "closed", "other"]),
                              st.sampled_from(["a/Foo.java", "a/Bar.java", "a/Gone.java"])), max_size=12))
    def test_idempotent_and_subset(self, specs):
        reports = [report(f"P-{i}", status=s, fixed=(p,)) for i, (s, p) in enumerate(specs)]
        kept, dropped = curate(reports, SNAPSHOT)
        assert set(kept) <= set(reports)
        assert len(kept) + len(dropped) == len(reports)
        assert curate(kept, SNAPSHOT) == (kept, [])


class TestPrefixFilter:
    def test_reporter_is_committer(self):
        r = report(reporter="Dev@Example.org ")
        assert filter_prefix([r]) == ([], [r])

    def test_patch_within_half_hour(self):
        r = report(attachments=[Attachment(T0 + timedelta(minutes=30), True)])
        assert filter_prefix([r]) == ([], [r])

    def test_patch_at_two_hours_is_prefix(self):
        r = report(attachments=[Attachment(T0 + timedelta(hours=2), True)])
        assert filter_prefix([r]) == ([r], [])

    def test_hour_boundary_is_inclusive(self):
        at = report(attachments=[Attachment(T0 + timedelta(seconds=3600), True)])
        after = report(attachments=[Attachment(T0 + timedelta(seconds=3601), True)])
        assert filter_prefix([at, after]) == ([after], [at])

    def test_patch_comment_counts_but_plain_attachment_does_not(self):
        by_comment = report(comments=[Comment("x@y.z", T0 + timedelta(minutes=5), True)])
        plain = report(attachments=[Attachment(T0 + timedelta(minutes=5), False)])
        assert filter_prefix([by_comment, plain]) == ([plain], [by_comment])

    def test_no_fix_commits_is_an_error(self):
        r = BugReport("P-9", "P", "s", "d", T0)
        with pytest.raises(BugLocError) as err:
            filter_prefix([r])
        assert err.value.code == "uncurated-report"

    @given(st.lists(st.tuples(st.integers(0, 7200), st.booleans(), st.booleans()), max_size=10))
    def test_partition(self, specs):
        reports = [report(f"P-{i}", reporter="dev@example.org" if same else "u@x.org",
                          attachments=[Attachment(T0 + timedelta(seconds=s), True)])
                   for i, (s, same, _) in enumerate(specs)]
        prefix, postfix = filter_prefix(reports)
        assert len(prefix) + len(postfix) == len(reports)
        assert not {r.id for r in prefix} & {r.id for r in postfix}


class TestFiles:
    def test_snapshot_round_trip(self, tmp_path):
        write_snapshot(SNAPSHOT, tmp_path / "P")
        back = load_snapshot(tmp_path / "P", "P")
        assert dict(back.files) == dict(SNAPSHOT.files)
        assert back.paths == SNAPSHOT.paths

    def test_history_round_trip(self):
        history = {
            "a/Foo.java": (
                HistoryEntry("abc123", "dev@example.org", T0, "Fix null check\nsecond line",
                             ("@@ -1,2 +1,2 @@\n-old()\n+if (x == null)",)),
                HistoryEntry("def456", "dev@example.org", T0 + timedelta(days=1), "Tidy", ()),
            )
        }
        assert parse_history(format_history(history).splitlines(keepends=True)) == history

    @settings(max_examples=25)
    @given(st.lists(st.text(alphabet="abc xyz\n+-", max_size=30), min_size=1, max_size=3))
    def test_history_hunks_survive(self, hunks):
        hunks = tuple(h for h in hunks if h.strip())
        history = {"f.java": (HistoryEntry("abc", "d@e.f", T0, "log", hunks),)}
        back = parse_history(format_history(history).splitlines(keepends=True))
        assert [h.strip() for h in back["f.java"][0].hunks] == [h.strip() for h in hunks]
