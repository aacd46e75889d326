"""Tokenizers that turn bug-report and source text into token bags.

Three pathways share one normalization tail (lowercase, drop numbers and
single characters, stopword filter, Porter stemming):

* natural language: whitespace split, punctuation stripped, unknown words
  discarded against a flat dictionary file;
* code: split on punctuation, camelCase and snake_case, no dictionary check;
* stack traces: frames are cut out of the text with a regex and their
  qualified names are code-tokenized.
"""
from __future__ import annotations

import gzip
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from nltk.stem.porter import PorterStemmer

BUG_CHANNELS = (
    "summary",
    "description",
    "rawBugReport",
    "stackTraces",
    "codeElements",
    "summaryHints",
    "descriptionHints",
)


@dataclass(frozen=True, eq=True)
class TokenBag:
    """Multiset of normalized terms."""

    counts: Mapping[str, int] = field(default_factory=dict)
    kind: str = "natural"

    @classmethod
    def of(cls, tokens: Iterable[str], kind: str = "natural") -> "TokenBag":
        return cls(dict(Counter(tokens)), kind)

    def __len__(self):
        return sum(self.counts.values())

    def __iter__(self):
        for term, n in self.counts.items():
            for _ in range(n):
                yield term

    def __add__(self, other: "TokenBag") -> "TokenBag":
        merged = Counter(self.counts)
        merged.update(other.counts)
        return TokenBag(dict(merged), self.kind)

    def __bool__(self):
        return bool(self.counts)

    def terms(self) -> set:
        return set(self.counts)

    def to_json(self) -> dict:
        return {"kind": self.kind, "counts": dict(sorted(self.counts.items()))}

    @classmethod
    def from_json(cls, data) -> "TokenBag":
        return cls(dict(data["counts"]), data["kind"])


EMPTY_NATURAL = TokenBag({}, "natural")


# -- word lists -------------------------------------------------------------

def read_word_file(path) -> frozenset:
    """Read a one-token-per-line list; ``#`` starts a comment; ``.gz`` allowed."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        words = set()
        for line in fh:
            word = line.split("#", 1)[0].strip().lower()
            if word:
                words.add(word)
    return frozenset(words)


def _bundled(name):
    return resources.files("bugloc").joinpath("data").joinpath(name)


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset:
    with resources.as_file(_bundled("stopwords_en.txt")) as english, \
            resources.as_file(_bundled("java_keywords.txt")) as keywords:
        return read_word_file(english) | read_word_file(keywords)


@lru_cache(maxsize=None)
def default_dictionary() -> frozenset:
    with resources.as_file(_bundled("words.txt.gz")) as path:
        return read_word_file(path)


# WordNet-style detachment rules: a surface form is known when it, or a form
# obtained by one of these suffix substitutions, is in the word list.
_DETACHMENTS = (
    ("s", ""), ("ses", "s"), ("xes", "x"), ("zes", "z"), ("ches", "ch"),
    ("shes", "sh"), ("men", "man"), ("ies", "y"), ("es", "e"), ("es", ""),
    ("ed", "e"), ("ed", ""), ("ing", "e"), ("ing", ""), ("er", ""),
    ("est", ""), ("er", "e"), ("est", "e"),
)


def in_dictionary(word: str, dictionary: frozenset) -> bool:
    if word in dictionary:
        return True
    for suffix, repl in _DETACHMENTS:
        if word.endswith(suffix) and len(word) > len(suffix):
            if word[: -len(suffix)] + repl in dictionary:
                return True
    # doubled consonant before -ing/-ed: "stopped" -> "stop"
    for suffix in ("ing", "ed"):
        stem = word[: -len(suffix)]
        if word.endswith(suffix) and len(stem) > 2 and stem[-1] == stem[-2] and stem[:-1] in dictionary:
            return True
    return False


# -- stemming ---------------------------------------------------------------

_porter = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)


def porter_stem(word: str) -> str:
    """One pass of the original Porter algorithm."""
    return _porter.stem(word, to_lowercase=False)


@lru_cache(maxsize=200_000)
def stem(word: str) -> str:
    """Porter stem iterated to a fixpoint, so ``stem(stem(w)) == stem(w)``."""
    current = word
    for _ in range(8):
        nxt = porter_stem(current)
        if nxt == current:
            return current
        current = nxt
    return current


# -- pipeline ---------------------------------------------------------------

@dataclass(frozen=True)
class Preprocessor:
    """Normalization settings shared by all tokenizers."""

    stopwords: frozenset = field(default_factory=default_stopwords)
    dictionary: frozenset | None = None

    @classmethod
    def from_files(cls, stopword_files=(), dictionary_file=None, extra_stopwords=()):
        words = set(default_stopwords())
        for path in stopword_files:
            words |= read_word_file(path)
        words |= {w.lower() for w in extra_stopwords}
        dictionary = read_word_file(dictionary_file) if dictionary_file else None
        return cls(frozenset(words), dictionary)

    @property
    def words(self) -> frozenset:
        return self.dictionary if self.dictionary is not None else default_dictionary()

    def normalize(self, pieces: Iterable[str], check_dictionary: bool) -> list[str]:
        out = []
        stop = self.stopwords
        words = self.words if check_dictionary else None
        for piece in pieces:
            token = piece.lower()
            if len(token) < 2 or token.isdigit() or token in stop:
                continue
            if words is not None and not in_dictionary(token, words):
                continue
            token = stem(token)
            if len(token) < 2 or token in stop:
                continue
            out.append(token)
        return out


DEFAULT = Preprocessor()

_ALNUM_RUN = re.compile(r"[^\W_]+")
_CAMEL_PART = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


def natural_pieces(text: str) -> list[str]:
    pieces = []
    for chunk in text.split():
        pieces.extend(_ALNUM_RUN.findall(chunk))
    return pieces


def code_pieces(text: str) -> list[str]:
    pieces = []
    for run in _ALNUM_RUN.findall(text):
        pieces.extend(_CAMEL_PART.findall(run) or [run])
    return pieces


def tokenize_natural(text: str, prep: Preprocessor = DEFAULT) -> TokenBag:
    return TokenBag.of(prep.normalize(natural_pieces(text or ""), True), "natural")


def tokenize_code(text: str, prep: Preprocessor = DEFAULT) -> TokenBag:
    return TokenBag.of(prep.normalize(code_pieces(text or ""), False), "code")


# -- stack traces -----------------------------------------------------------

_FRAME = re.compile(
    r"""^[ \t]*at[ \t]+
        (?P<qualified>[A-Za-z_$][\w$]*(?:\.[\w$<>]+)*)\.(?P<method>[\w$<>]+)
        [ \t]*\((?:(?P<file>[\w$-]+)\.(?P<ext>\w+)(?::(?P<line>\d+))?|[^()\n]*)\)
        [^\n]*$\n?""",
    re.VERBOSE | re.MULTILINE,
)
_EXCEPTION_HEADER = re.compile(
    r"""^[ \t]*(?:Caused[ \t]by:[ \t]*|Exception[ \t]in[ \t]thread[ \t]"[^"\n]*"[ \t]*)?
        (?P<name>[A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*(?:Exception|Error|Throwable))
        (?::[^\n]*)?$\n?""",
    re.VERBOSE | re.MULTILINE,
)
_MORE = re.compile(r"^[ \t]*\.\.\.[ \t]*\d+[ \t]+more[ \t]*$\n?", re.MULTILINE)


def extract_stack_traces(text: str, prep: Preprocessor = DEFAULT):
    """Cut stack-trace frames out of ``text``.

    Returns ``(trace_bag, remainder)``. Exception header lines and
    ``... N more`` markers are removed too, but only when at least one frame
    is present; text without frames comes back unchanged.
    """
    text = text or ""
    frames = list(_FRAME.finditer(text))
    if not frames:
        return TokenBag({}, "stacktrace"), text
    pieces = []
    for m in frames:
        for name in ("qualified", "method", "file", "ext"):
            if m[name]:
                pieces.append(m[name])
    remainder = _FRAME.sub("", text)
    for m in _EXCEPTION_HEADER.finditer(remainder):
        pieces.append(m["name"])
    remainder = _EXCEPTION_HEADER.sub("", remainder)
    remainder = _MORE.sub("", remainder)
    bag = tokenize_code(" ".join(pieces), prep)
    return TokenBag(bag.counts, "stacktrace"), remainder


# -- hints ------------------------------------------------------------------

_CANDIDATE = re.compile(r"(?<![\w$.])[A-Za-z_$][\w$]*(?:\.[A-Za-z_$][\w$]*)*")
_CAMEL = re.compile(r"[a-z0-9][A-Z]|[A-Z]{2}[a-z]")
_SNAKE = re.compile(r"[A-Za-z0-9]_[A-Za-z0-9]")


def is_code_identifier(word: str) -> bool:
    """camelCase, snake_case or dotted qualified name (``Foo.java`` included)."""
    return "." in word or bool(_CAMEL.search(word)) or bool(_SNAKE.search(word))


def extract_hints(text: str, prep: Preprocessor = DEFAULT) -> TokenBag:
    found = [m.group() for m in _CANDIDATE.finditer(text or "") if is_code_identifier(m.group())]
    return tokenize_code(" ".join(found), prep)


# -- code blocks ------------------------------------------------------------

_FENCED = re.compile(r"^```[^\n]*\n(.*?)^```[ \t]*$\n?", re.MULTILINE | re.DOTALL)
_JIRA = re.compile(r"\{(code|noformat)(?::[^}]*)?\}(.*?)\{\1\}", re.DOTALL)
_INDENTED = re.compile(r"(?:^(?: {4}|\t)[^\n]*\S[^\n]*(?:\n|$))+", re.MULTILINE)


def extract_code_blocks(text: str):
    """Split out fenced, ``{code}``/``{noformat}`` and indented blocks.

    Returns ``(blocks, remainder)``.
    """
    blocks = []

    def grab(group):
        def repl(m):
            blocks.append(m.group(group))
            return "\n"
        return repl

    rest = _FENCED.sub(grab(1), text or "")
    rest = _JIRA.sub(grab(2), rest)
    rest = _INDENTED.sub(grab(0), rest)
    return blocks, rest


# -- bug report features ----------------------------------------------------

@dataclass(frozen=True)
class BugReportFeatures:
    bug_id: str
    summary: TokenBag
    description: TokenBag
    rawBugReport: TokenBag
    stackTraces: TokenBag
    codeElements: TokenBag
    summaryHints: TokenBag
    descriptionHints: TokenBag

    def channel(self, name: str) -> TokenBag:
        return getattr(self, name)

    def to_json(self) -> dict:
        return {"bug_id": self.bug_id, **{c: self.channel(c).to_json() for c in BUG_CHANNELS}}

    @classmethod
    def from_json(cls, data) -> "BugReportFeatures":
        return cls(data["bug_id"], **{c: TokenBag.from_json(data[c]) for c in BUG_CHANNELS})


def build_bug_features(report, prep: Preprocessor = DEFAULT) -> BugReportFeatures:
    """The seven bug-report bags.

    The description bag covers the whole description. Stack traces are cut
    first; code blocks come from the trace-free text; description hints are
    taken from the trace-free text. ``rawBugReport`` is the natural bag of
    summary plus description, topped up with the trace and code-element bags.
    """
    summary = tokenize_natural(report.summary, prep)
    description = tokenize_natural(report.description, prep)
    traces, remainder = extract_stack_traces(report.description, prep)
    blocks, _ = extract_code_blocks(remainder)
    code = tokenize_code("\n".join(blocks), prep)
    raw = tokenize_natural(f"{report.summary}\n{report.description}", prep) + traces + code
    return BugReportFeatures(
        bug_id=report.id,
        summary=summary,
        description=description,
        rawBugReport=TokenBag(raw.counts, "natural"),
        stackTraces=traces,
        codeElements=code,
        summaryHints=extract_hints(report.summary, prep),
        descriptionHints=extract_hints(remainder, prep),
    )
