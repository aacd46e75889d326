"""How a bug report and a Java file turn into token bags.

A report yields seven bags (summary, description, the raw text, stack
traces, code blocks and identifier-looking "hints"); a source file yields
ten (package, class, methods, calls, parameters, fields, comments, the raw
source, plus hunks and commit logs from its history).

    python demos/01_text_channels.py
"""
from datetime import datetime, timezone

from bugloc.codeextract import extract_structure
from bugloc.corpus import BugReport
from bugloc.textprep import BUG_CHANNELS, build_bug_features, porter_stem, stem

REPORT = BugReport(
    id="DEMO-1",
    project="DEMO",
    summary="NullPointerException in CacheManager.evictEntry when the cache is closed",
    description="""After closing the cache, evicting an entry throws:

java.lang.NullPointerException
    at org.demo.cache.CacheManager.evictEntry(CacheManager.java:88)
    at org.demo.cache.CacheManager.close(CacheManager.java:120)

Calling entry_store.clear() first avoids it:

    store.clear();
    manager.evictEntry(key);
""",
    created_at=datetime(2013, 4, 2, tzinfo=timezone.utc),
)

SOURCE = """package org.demo.cache;

import java.util.Map;

/** Keeps recently used entries in memory. */
public class CacheManager {
    private Map<String, Object> entryStore;

    public void evictEntry(String key) {
        // closed caches have no store
        entryStore.remove(key);
    }

    public void close() {
        Runnable hook = () -> entryStore.clear();
        hook.run();
        entryStore = null;
    }
}
"""


def show(title, bag):
    terms = sorted(bag.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    print(f"  {title:<18} {len(bag):>3} tokens  " + " ".join(f"{t}x{n}" if n > 1 else t for t, n in terms[:10]))


print("Stemming goes through the Porter stemmer and is then run to a fixpoint,")
print("so stemming a stem never changes it again:")
for word in ("evicting", "agreed", "caching"):
    print(f"  {word:<10} porter={porter_stem(word):<8} stem={stem(word)}")

print("\nBug report channels:")
features = build_bug_features(REPORT)
for name in BUG_CHANNELS:
    show(name, features.channel(name))

print("\nSource file channels. The lambda body only reaches rawSource:")
doc = extract_structure(SOURCE, path="org/demo/cache/CacheManager.java")
for name in ("packageNames", "className", "methodNames", "methodInvocation",
             "formalParameter", "memberReference", "documentation", "rawSource"):
    show(name, doc.channel(name))
