"""Train one classifier per region, average their probabilities, rank files.

Reports created before the cutoff year train; the rest are held out. Each
region's classifier sees only its own training reports. This uses the
100-tree quick configuration; pass --faithful for the full one (about a
minute on a laptop).

    python demos/04_train_and_rank.py [--faithful]
"""
import sys
import time

from bugloc import synthetic
from bugloc.dnc import ensemble_rank, leakage_violations, timeline_split, train_regions
from bugloc.evaluation import evaluate_rankings, format_table, store_truths
from bugloc.learner import TrainConfig
from bugloc.regions import build_regions

cfg = TrainConfig() if "--faithful" in sys.argv else TrainConfig.quick()
corpus = synthetic.generate(0)
kept, store = synthetic.curated_store(corpus)
created = {r.id: r.created_at for r in kept}
split = timeline_split(kept, corpus.cutoff_year)
regions = build_regions(corpus.tool_results, {r.id: r.fixed_files for r in kept}, [r.id for r in kept])
print(f"{len(split.train)} training reports, {len(split.test)} held out (cutoff {corpus.cutoff_year})")

start = time.perf_counter()
ensemble = train_regions(regions, store, split, cfg, created)
print(f"trained {len(ensemble.models)} region models in {time.perf_counter() - start:.1f}s; "
      f"skipped {ensemble.skipped or 'none'}")
print(f"leakage audit: {leakage_violations(ensemble.models, created) or 'clean'}\n")

test = store.subset(store.rows(split.test))
truths = store_truths(test)
rows = []
for name, model in ensemble.models.items():
    rep = evaluate_rankings({b: r.paths for b, r in ensemble_rank([model], test).items()}, truths)
    rows.append({"classifier": name, "trees": len(model.trees), "MAP": rep.map, "MRR": rep.mrr})
multi = evaluate_rankings({b: r.paths for b, r in ensemble_rank(ensemble.models, test).items()}, truths)
rows.append({"classifier": "multi (average)", "trees": "", "MAP": multi.map, "MRR": multi.mrr})
print(format_table(rows))

bug = sorted(split.test)[0]
top = ensemble_rank(ensemble.models, test)[bug]
print(f"\ntop 3 for {bug} (truth {sorted(truths[bug])}):")
for path, p, rank in list(top.entries())[:3]:
    print(f"  {rank}. {path}  p={p:.3f}")
