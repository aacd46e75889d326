"""tf-idf weighting, cosine similarity and the 70-cell pair feature vector.

Scalar functions (:func:`tf`, :func:`idf`, :func:`vectorize`, :func:`cosine`)
define the arithmetic. :func:`featurize_project` computes the same numbers
for every (report, file) pair at once with sparse matrices; the test-suite
checks one against the other.

Weighting, per code channel ``j``: the document space is the project's
source files as seen through channel ``j``. A bug-report bag compared with
channel ``j`` is weighted with that same index, so query and document share
idf values within a grid cell.
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .codeextract import CODE_CHANNELS
from .errors import BugLocError
from .textprep import BUG_CHANNELS, TokenBag

N_FEATURES = len(BUG_CHANNELS) * len(CODE_CHANNELS)
GRID_MANIFEST = BUG_CHANNELS + CODE_CHANNELS


def cell_name(index: int) -> str:
    """``summaryHints2className`` style name of grid cell ``index`` (row-major)."""
    i, j = divmod(index, len(CODE_CHANNELS))
    return f"{BUG_CHANNELS[i]}2{CODE_CHANNELS[j]}"


def cell_index(bug_channel: str, code_channel: str) -> int:
    return BUG_CHANNELS.index(bug_channel) * len(CODE_CHANNELS) + CODE_CHANNELS.index(code_channel)


FEATURE_NAMES = tuple(cell_name(k) for k in range(N_FEATURES))


# -- scalar arithmetic ------------------------------------------------------

def tf(count: float) -> float:
    """Sublinear term frequency ``1 + ln(count)``; ``count`` must be >= 1."""
    if count < 1:
        raise ValueError("tf is only defined for terms that occur (count >= 1)")
    return 1.0 + math.log(count)


@dataclass
class CorpusIndex:
    """Document frequencies over one channel of a document collection."""

    n: int = 0
    df: dict = field(default_factory=dict)
    dictionary: dict = field(default_factory=dict)

    @classmethod
    def build(cls, bags: Iterable[TokenBag]) -> "CorpusIndex":
        index = cls()
        for bag in bags:
            index.add(bag)
        return index

    def add(self, bag: TokenBag) -> None:
        self.n += 1
        for term in bag.counts:
            if term not in self.dictionary:
                self.dictionary[term] = len(self.dictionary)
            self.df[term] = self.df.get(term, 0) + 1

    def idf(self, term: str) -> float:
        return idf(term, self)


def idf(term: str, index: CorpusIndex) -> float:
    """``ln((1 + n) / (1 + df)) + 1``; unseen terms use ``df = 0``."""
    return math.log((1 + index.n) / (1 + index.df.get(term, 0))) + 1.0


def vectorize(bag: TokenBag, index: CorpusIndex) -> dict:
    """Sparse tf-idf vector ``{term: weight}`` of a bag."""
    return {term: tf(count) * idf(term, index) for term, count in bag.counts.items() if count > 0}


def cosine(q: Mapping[str, float], d: Mapping[str, float]) -> float:
    """Cosine of two sparse vectors; 0 when either is empty or all-zero.

    Sums are correctly rounded, so the result does not depend on argument
    or iteration order.
    """
    if len(q) > len(d):
        q, d = d, q
    dot = math.fsum(w * d[t] for t, w in q.items() if t in d)
    nq = math.sqrt(math.fsum(w * w for w in q.values()))
    nd = math.sqrt(math.fsum(w * w for w in d.values()))
    if nq == 0.0 or nd == 0.0:
        return 0.0
    return min(max(dot / (nq * nd), 0.0), 1.0)


# -- pair features ----------------------------------------------------------

@dataclass(frozen=True)
class PairFeatureVector:
    bug_id: str
    file_path: str
    scores: tuple
    label: int
    project: str = ""
    year: int = 0


def build_indexes(docs) -> dict[str, CorpusIndex]:
    """One index per code channel over the project's source documents."""
    docs = list(docs)
    return {c: CorpusIndex.build(doc.channel(c) for doc in docs) for c in CODE_CHANNELS}


def featurize_pair(bf, sd, indexes: Mapping[str, CorpusIndex], fixed_files=(), project="", year=0):
    """70 cosine scores of one (report, file) pair, computed cell by cell."""
    scores = []
    for b in BUG_CHANNELS:
        bag = bf.channel(b)
        for c in CODE_CHANNELS:
            index = indexes[c]
            scores.append(cosine(vectorize(bag, index), vectorize(sd.channel(c), index)))
    return PairFeatureVector(
        bug_id=bf.bug_id,
        file_path=sd.path,
        scores=tuple(scores),
        label=int(sd.path in set(fixed_files)),
        project=project,
        year=year,
    )


def _weight_matrix(bags: Sequence[TokenBag], index: CorpusIndex, idf_vec: np.ndarray):
    """Row-normalized tf-idf matrix over indexed terms, plus each row's full norm.

    Terms outside the index still count toward the norm (they have
    ``df = 0``) but can never contribute to a dot product.
    """
    rows, cols, vals = [], [], []
    norms = np.zeros(len(bags))
    unseen_idf = math.log(1 + index.n) + 1.0
    for r, bag in enumerate(bags):
        sq = 0.0
        for term, count in bag.counts.items():
            col = index.dictionary.get(term)
            w = tf(count) * (idf_vec[col] if col is not None else unseen_idf)
            sq += w * w
            if col is not None:
                rows.append(r)
                cols.append(col)
                vals.append(w)
        norms[r] = math.sqrt(sq)
    m = sparse.csr_matrix((vals, (rows, cols)), shape=(len(bags), len(index.dictionary)))
    safe = np.where(norms > 0, norms, 1.0)
    return sparse.diags(1.0 / safe) @ m


def similarity_grid(bug_features, docs, indexes=None) -> np.ndarray:
    """Array ``(n_bugs, n_docs, 70)`` of cosine scores for every pair."""
    docs = list(docs)
    bug_features = list(bug_features)
    indexes = indexes or build_indexes(docs)
    out = np.zeros((len(bug_features), len(docs), N_FEATURES))
    for j, c in enumerate(CODE_CHANNELS):
        index = indexes[c]
        terms = sorted(index.dictionary, key=index.dictionary.get)
        idf_vec = np.array([idf(t, index) for t in terms])
        dmat = _weight_matrix([d.channel(c) for d in docs], index, idf_vec)
        for i, b in enumerate(BUG_CHANNELS):
            qmat = _weight_matrix([bf.channel(b) for bf in bug_features], index, idf_vec)
            out[:, :, i * len(CODE_CHANNELS) + j] = (qmat @ dmat.T).toarray()
    np.clip(out, 0.0, 1.0, out=out)
    return out


# -- feature store ----------------------------------------------------------

@dataclass
class FeatureStore:
    """Columnar pair features: one row per (report, candidate file)."""

    bug_ids: list
    paths: list
    X: np.ndarray
    y: np.ndarray
    years: np.ndarray
    projects: list

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, N_FEATURES)
        self.y = np.asarray(self.y, dtype=np.int8)
        self.years = np.asarray(self.years, dtype=np.int32)
        n = len(self.X)
        if not (len(self.bug_ids) == len(self.paths) == len(self.y) == len(self.years) == len(self.projects) == n):
            raise ValueError("feature store columns differ in length")

    def __len__(self):
        return len(self.X)

    def rows(self, bug_ids) -> np.ndarray:
        wanted = set(bug_ids)
        return np.array([i for i, b in enumerate(self.bug_ids) if b in wanted], dtype=np.int64)

    def subset(self, idx) -> "FeatureStore":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureStore(
            [self.bug_ids[i] for i in idx],
            [self.paths[i] for i in idx],
            self.X[idx],
            self.y[idx],
            self.years[idx],
            [self.projects[i] for i in idx],
        )

    def pairs(self):
        for i in range(len(self)):
            yield PairFeatureVector(self.bug_ids[i], self.paths[i], tuple(self.X[i]),
                                    int(self.y[i]), self.projects[i], int(self.years[i]))

    @classmethod
    def concat(cls, stores) -> "FeatureStore":
        stores = list(stores)
        if not stores:
            return cls([], [], np.zeros((0, N_FEATURES)), [], [], [])
        return cls(
            [b for s in stores for b in s.bug_ids],
            [p for s in stores for p in s.paths],
            np.vstack([s.X for s in stores]),
            np.concatenate([s.y for s in stores]),
            np.concatenate([s.years for s in stores]),
            [p for s in stores for p in s.projects],
        )

    def bug_order(self) -> list:
        """Distinct bug ids in first-seen order."""
        return list(dict.fromkeys(self.bug_ids))


def featurize_project(project, reports, bug_features, docs) -> FeatureStore:
    """Every (report, file) pair of one project; files in snapshot order."""
    reports = list(reports)
    docs = list(docs)
    grid = similarity_grid(bug_features, docs)
    bug_ids, paths, years, labels = [], [], [], []
    for report in reports:
        fixed = report.fixed_files
        for doc in docs:
            bug_ids.append(report.id)
            paths.append(doc.path)
            years.append(report.year)
            labels.append(int(doc.path in fixed))
    X = grid.reshape(len(reports) * len(docs), N_FEATURES)
    return FeatureStore(bug_ids, paths, X, labels, years, [project] * len(bug_ids))


# -- cache files ------------------------------------------------------------

MAGIC = b"BLFC"
VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _unpack_str(buf: memoryview, pos: int):
    (n,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    return bytes(buf[pos:pos + n]).decode("utf-8"), pos + n


def dumps_store(store: FeatureStore, project: str) -> bytes:
    """Binary cache: header (magic, version, project, 17 channel names, row count) then rows."""
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<H", VERSION))
    out.write(_pack_str(project))
    out.write(struct.pack("<H", len(GRID_MANIFEST)))
    for name in GRID_MANIFEST:
        out.write(_pack_str(name))
    out.write(struct.pack("<Q", len(store)))
    for i in range(len(store)):
        out.write(_pack_str(store.bug_ids[i]))
        out.write(_pack_str(store.paths[i]))
        out.write(store.X[i].astype("<f8").tobytes())
        out.write(struct.pack("<Bi", int(store.y[i]), int(store.years[i])))
    return out.getvalue()


def loads_store(data: bytes) -> FeatureStore:
    buf = memoryview(data)
    if bytes(buf[:4]) != MAGIC:
        raise BugLocError("bad-cache", "not a feature cache (bad magic)")
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != VERSION:
        raise BugLocError("bad-cache", f"unsupported feature cache version {version}")
    project, pos = _unpack_str(buf, 6)
    (n_names,) = struct.unpack_from("<H", buf, pos)
    pos += 2
    names = []
    for _ in range(n_names):
        name, pos = _unpack_str(buf, pos)
        names.append(name)
    if tuple(names) != GRID_MANIFEST:
        raise BugLocError("feature-grid-mismatch", "cache grid order differs from this build")
    (n_rows,) = struct.unpack_from("<Q", buf, pos)
    pos += 8
    bug_ids, paths, labels, years = [], [], [], []
    X = np.empty((n_rows, N_FEATURES))
    for r in range(n_rows):
        bug, pos = _unpack_str(buf, pos)
        path, pos = _unpack_str(buf, pos)
        X[r] = np.frombuffer(buf, dtype="<f8", count=N_FEATURES, offset=pos)
        pos += 8 * N_FEATURES
        label, year = struct.unpack_from("<Bi", buf, pos)
        pos += 5
        bug_ids.append(bug)
        paths.append(path)
        labels.append(label)
        years.append(year)
    return FeatureStore(bug_ids, paths, X, labels, years, [project] * n_rows)


def write_store(store: FeatureStore, project: str, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_store(store, project))


def read_store(path) -> FeatureStore:
    with open(path, "rb") as fh:
        return loads_store(fh.read())


CSV_HEADER = ("project", "bug_id", "path", *FEATURE_NAMES, "label", "year")


def write_store_csv(store: FeatureStore, fh) -> None:
    """Text export; floats written with ``repr`` so values round-trip exactly."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i in range(len(store)):
        w.writerow([store.projects[i], store.bug_ids[i], store.paths[i],
                    *(repr(float(v)) for v in store.X[i]), int(store.y[i]), int(store.years[i])])


def read_store_csv(fh) -> FeatureStore:
    r = csv.reader(fh)
    header = next(r)
    if tuple(header) != CSV_HEADER:
        raise BugLocError("feature-grid-mismatch", "CSV columns differ from this build's grid")
    projects, bug_ids, paths, rows, labels, years = [], [], [], [], [], []
    for rec in r:
        projects.append(rec[0])
        bug_ids.append(rec[1])
        paths.append(rec[2])
        rows.append([float(v) for v in rec[3:3 + N_FEATURES]])
        labels.append(int(rec[3 + N_FEATURES]))
        years.append(int(rec[4 + N_FEATURES]))
    X = np.array(rows, dtype=np.float64).reshape(-1, N_FEATURES)
    return FeatureStore(bug_ids, paths, X, labels, years, projects)
