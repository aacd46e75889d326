"""Source-side token bags from a lexical scan of C-family (Java) files.

No parser is involved: comments and literals are lexed out, and the
remaining identifier/punctuation stream is matched against a handful of
structural patterns (package clause, type headers, method headers, call
sites, dotted accesses). Broken files degrade gracefully.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .textprep import DEFAULT, Preprocessor, TokenBag, tokenize_code, tokenize_natural

CODE_CHANNELS = (
    "packageNames",
    "className",
    "methodNames",
    "methodInvocation",
    "formalParameter",
    "memberReference",
    "documentation",
    "rawSource",
    "hunks",
    "commitLogs",
)

STRUCTURE_CHANNELS = CODE_CHANNELS[:8]

CONTROL_WORDS = frozenset(
    "if for while switch catch synchronized return new throw else case do try "
    "finally assert super this class interface enum instanceof default".split()
)
TYPE_KEYWORDS = frozenset("class interface enum record".split())
MODIFIERS = frozenset(
    "public protected private static final abstract native synchronized transient "
    "volatile strictfp default".split()
)
PRIMITIVES = frozenset("void boolean byte char short int long float double var".split())


@dataclass(frozen=True)
class SourceDocument:
    path: str
    packageNames: TokenBag
    className: TokenBag
    methodNames: TokenBag
    methodInvocation: TokenBag
    formalParameter: TokenBag
    memberReference: TokenBag
    documentation: TokenBag
    rawSource: TokenBag
    hunks: TokenBag = field(default_factory=lambda: TokenBag({}, "code"))
    commitLogs: TokenBag = field(default_factory=lambda: TokenBag({}, "natural"))
    degraded: bool = False

    def channel(self, name: str) -> TokenBag:
        return getattr(self, name)

    def to_json(self) -> dict:
        data = {"path": self.path, "degraded": self.degraded}
        data.update({c: self.channel(c).to_json() for c in CODE_CHANNELS})
        return data

    @classmethod
    def from_json(cls, data) -> "SourceDocument":
        return cls(
            path=data["path"],
            degraded=data["degraded"],
            **{c: TokenBag.from_json(data[c]) for c in CODE_CHANNELS},
        )


# -- lexer ------------------------------------------------------------------

_LEX = re.compile(
    r"""
    (?P<block>/\*.*?(?:\*/|\Z))
  | (?P<line>//[^\n]*)
  | (?P<text>\"\"\".*?(?:\"\"\"|\Z))
  | (?P<string>"(?:\\.|[^"\\\n])*"?)
  | (?P<char>'(?:\\.|[^'\\\n])*'?)
  | (?P<ident>[A-Za-z_$][\w$]*)
  | (?P<number>\d[\w.]*)
  | (?P<punct>[^\s\w])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class _Scan:
    tokens: list = field(default_factory=list)  # (kind, text)
    comments: list = field(default_factory=list)


def _lex(text: str) -> _Scan:
    scan = _Scan()
    for m in _LEX.finditer(text):
        kind = m.lastgroup
        if kind in ("block", "line"):
            body = m.group()
            body = body[2:-2] if kind == "block" and body.endswith("*/") else body[2:]
            scan.comments.append(body)
        elif kind in ("string", "char", "text"):
            scan.tokens.append(("literal", m.group()))
        elif kind == "ident":
            scan.tokens.append(("ident", m.group()))
        elif kind == "punct":
            scan.tokens.append(("punct", m.group()))
    return scan


def _balanced(tokens) -> bool:
    pairs = {")": "(", "]": "[", "}": "{"}
    stack = []
    for kind, text in tokens:
        if kind != "punct":
            continue
        if text in "([{":
            stack.append(text)
        elif text in pairs:
            if not stack or stack.pop() != pairs[text]:
                return False
    return not stack


def _matching_paren(tokens, start):
    return _matching(tokens, start, "(", ")")


def _matching(tokens, start, open_, close_):
    depth = 0
    for i in range(start, len(tokens)):
        kind, text = tokens[i]
        if kind != "punct":
            continue
        if text == open_:
            depth += 1
        elif text == close_:
            depth -= 1
            if depth == 0:
                return i
    return None


def _anonymous_mask(tokens) -> list[bool]:
    """True for tokens inside anonymous class bodies and lambda bodies."""
    n = len(tokens)
    mask = [False] * n
    for i, (kind, text) in enumerate(tokens):
        if mask[i]:
            continue
        start = None
        if kind == "ident" and text == "new":
            j = i + 1
            while j < n and (tokens[j][0] == "ident" or tokens[j][1] in ".<>?,"):
                j += 1
            if j < n and tokens[j][1] == "(":
                close = _matching_paren(tokens, j)
                if close is not None and close + 1 < n and tokens[close + 1][1] == "{":
                    start = close + 1
        elif text == "-" and i + 1 < n and tokens[i + 1][1] == ">":
            start = i + 2
        if start is None or start >= n:
            continue
        if tokens[start][1] == "{":
            end = _matching(tokens, start, "{", "}")
            end = n - 1 if end is None else end
        else:
            # expression lambda: up to the first unmatched closer or separator
            depth, end = 0, start
            while end < n:
                t = tokens[end][1] if tokens[end][0] == "punct" else ""
                if t in ("(", "[", "{"):
                    depth += 1
                elif t in (")", "]", "}"):
                    if depth == 0:
                        break
                    depth -= 1
                elif t in (",", ";") and depth == 0:
                    break
                end += 1
            end -= 1
        for k in range(start, end + 1):
            mask[k] = True
    return mask


def _parameter_names(tokens) -> list[str]:
    """Last identifier of each comma-separated parameter (generics skipped)."""
    names, current, angle, paren = [], None, 0, 0
    skip_next = False
    for kind, text in tokens:
        if kind == "punct":
            if text == "@":
                skip_next = True
                continue
            if text == "<":
                angle += 1
            elif text == ">":
                angle = max(angle - 1, 0)
            elif text == "(":
                paren += 1
            elif text == ")":
                paren = max(paren - 1, 0)
            elif text == "," and angle == 0 and paren == 0:
                if current:
                    names.append(current)
                current = None
            continue
        if kind == "ident":
            if skip_next:
                skip_next = False
                continue
            if angle == 0 and paren == 0 and text not in MODIFIERS:
                current = text
    if current:
        names.append(current)
    return names


def _is_declaration(tokens, i, close) -> bool:
    """``tokens[i]`` is an identifier followed by ``(``; decide declaration vs call."""
    prev_kind, prev = tokens[i - 1] if i > 0 else ("punct", ";")
    if prev_kind == "ident":
        if prev in CONTROL_WORDS - {"default", "synchronized"}:
            return False
    elif prev not in (">", "]"):
        return False
    j = close + 1
    while j < len(tokens) and tokens[j] == ("punct", "["):
        j += 2
    if j < len(tokens) and tokens[j] == ("ident", "throws"):
        j += 1
        while j < len(tokens) and (tokens[j][0] == "ident" or tokens[j][1] in ",.<>?"):
            j += 1
    if j < len(tokens) and tokens[j] == ("ident", "default"):
        return True  # annotation member
    return j < len(tokens) and tokens[j][1] in ("{", ";")


def extract_structure(text: str, prep: Preprocessor = DEFAULT, path: str = "") -> SourceDocument:
    """Eight structural bags of one file (history bags left empty)."""
    scan = _lex(text or "")
    toks = scan.tokens
    degraded = not _balanced(toks)

    packages, classes, methods, calls, params, members = [], [], [], [], [], []
    skip_until_semicolon = False
    n = len(toks)
    hidden = _anonymous_mask(toks)
    for i, (kind, word) in enumerate(toks):
        if hidden[i]:
            continue
        if kind == "ident" and word in ("package", "import") and (i == 0 or toks[i - 1][1] in (";", "}", "{")):
            if word == "package":
                j = i + 1
                parts = []
                while j < n and toks[j][1] != ";":
                    if toks[j][0] == "ident":
                        parts.append(toks[j][1])
                    j += 1
                packages.append(".".join(parts))
            skip_until_semicolon = True
            continue
        if skip_until_semicolon:
            if word == ";":
                skip_until_semicolon = False
            continue
        if kind != "ident":
            continue
        prev = toks[i - 1][1] if i > 0 else ""
        nxt = toks[i + 1][1] if i + 1 < n else ""
        if word in TYPE_KEYWORDS and prev != "." and i + 1 < n and toks[i + 1][0] == "ident":
            classes.append(toks[i + 1][1])
            continue
        if prev == "@":
            continue  # annotations
        if nxt == "(":
            close = _matching_paren(toks, i + 1)
            if word in CONTROL_WORDS or prev == "new":
                continue
            if close is not None and _is_declaration(toks, i, close):
                methods.append(word)
                params.extend(_parameter_names(toks[i + 2:close]))
            else:
                calls.append(word)
            continue
        if (prev == "." or nxt == ".") and word not in ("this", "super", "class"):
            if not (nxt == "." and i + 2 < n and toks[i + 2][1] == "class"):
                members.append(word)  # Foo.class literals excluded

    documentation = tokenize_natural("\n".join(scan.comments), prep)
    code = lambda words: tokenize_code(" ".join(words), prep)
    return SourceDocument(
        path=path,
        packageNames=code(packages),
        className=code(classes),
        methodNames=code(methods),
        methodInvocation=code(calls),
        formalParameter=code(params),
        memberReference=code(members),
        documentation=documentation,
        rawSource=tokenize_code(text or "", prep),
        degraded=degraded,
    )


_HUNK_RANGE = re.compile(r"^@@ [^@]* @@ ?")


def hunk_text(hunk: str) -> str:
    """Hunk body without diff markers; removed lines are kept."""
    lines = []
    for line in hunk.splitlines():
        if line.startswith("@@"):
            line = _HUNK_RANGE.sub("", line)
        elif line[:1] in ("+", "-", " "):
            line = line[1:]
        elif line.startswith("\\"):
            continue  # "\ No newline at end of file"
        lines.append(line)
    return "\n".join(lines)


def extract_history(path: str, history, prep: Preprocessor = DEFAULT):
    """``(hunks, commitLogs)`` bags aggregated over every commit touching ``path``.

    ``history`` maps paths to sequences of entries carrying ``log`` and
    ``hunks`` attributes (see :func:`bugloc.corpus.parse_history`).
    """
    hunks, logs = TokenBag({}, "code"), TokenBag({}, "natural")
    for entry in history.get(path, ()):
        logs = logs + tokenize_natural(entry.log, prep)
        for hunk in entry.hunks:
            hunks = hunks + tokenize_code(hunk_text(hunk), prep)
    return hunks, logs


StructureExtractor = Callable[[str, Preprocessor, str], SourceDocument]


def build_source_document(path: str, text: str, history=None, prep: Preprocessor = DEFAULT,
                          extractor: StructureExtractor = extract_structure) -> SourceDocument:
    doc = extractor(text, prep, path)
    hunks, logs = extract_history(path, history or {}, prep)
    return SourceDocument(
        path=path,
        **{c: doc.channel(c) for c in STRUCTURE_CHANNELS},
        hunks=hunks,
        commitLogs=logs,
        degraded=doc.degraded,
    )


def build_source_documents(snapshot, prep: Preprocessor = DEFAULT,
                           extractor: StructureExtractor = extract_structure) -> list[SourceDocument]:
    """Documents for every snapshot file, in manifest order."""
    return [
        build_source_document(path, text, snapshot.history, prep, extractor)
        for path, text in snapshot.files.items()
    ]


def iter_channel(docs: Iterable[SourceDocument], name: str):
    for doc in docs:
        yield doc.channel(name)
