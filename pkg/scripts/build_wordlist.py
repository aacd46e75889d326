"""Regenerate the bundled dictionary file from the ``english-words`` package.

Run once from the repository root::

    python scripts/build_wordlist.py

Only lowercase alphabetic entries are kept (web2 + gcide word lists).
"""
import gzip
from pathlib import Path

from english_words import get_english_words_set

OUT = Path(__file__).resolve().parents[1] / "src" / "bugloc" / "data" / "words.txt.gz"


def main():
    words = get_english_words_set(["web2", "gcide"], lower=True, alpha=True)
    words = sorted(w for w in words if w.isascii() and w.isalpha() and len(w) > 1)
    # mtime=0 keeps the archive byte-stable across regenerations
    with open(OUT, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
        fh.write(("\n".join(words) + "\n").encode("utf-8"))
    print(f"wrote {len(words)} words to {OUT}")


if __name__ == "__main__":
    main()
