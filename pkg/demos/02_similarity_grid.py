"""The 70-cell similarity grid for one report against a small project.

Every bug channel is compared with every code channel by tf-idf cosine.
The idf of a code channel comes from that channel's bags across the
project, so "className" and "rawSource" weigh the same term differently.

    python demos/02_similarity_grid.py
"""
import numpy as np

from bugloc import synthetic
from bugloc.codeextract import build_source_documents
from bugloc.textprep import build_bug_features
from bugloc.vsm import build_indexes, cell_name, featurize_pair

corpus = synthetic.generate(0)
report = next(r for r in corpus.reports if corpus.clusters.get(r.id) == "ToolA")
docs = build_source_documents(corpus.snapshots[report.project])
indexes = build_indexes(docs)
features = build_bug_features(report)

print(f"report {report.id} ({report.project}): {report.summary!r}")
print(f"fixed in {sorted(report.fixed_files)}\n")

pairs = [featurize_pair(features, d, indexes, report.fixed_files) for d in docs]
fixed = next(p for p in pairs if p.label)
others = np.array([p.scores for p in pairs if not p.label])

print("Nonzero cells for the fixed file, by how far it beats every other file:")
gap = np.array(fixed.scores) - others.max(axis=0)
for i in [i for i in np.argsort(-gap, kind="stable") if fixed.scores[i] > 0][:8]:
    print(f"  {cell_name(i):<34} fixed={fixed.scores[i]:.3f}  best other={others[:, i].max():.3f}")

print("\nThis report comes from the cluster only ToolA localizes; its planted clue")
print(f"sits in {synthetic.PLANTED['ToolA']}.")
