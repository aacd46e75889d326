"""Rank source files for bug reports with per-region boosted classifiers.

Bug reports and source files are reduced to token bags, compared pairwise
with tf-idf cosine similarity (7 bug channels x 10 code channels = 70
scores per pair), and region-specific gradient-boosted classifiers are
trained on subsets of bug reports defined by which baseline tools localize
them. Their probabilities are averaged into one ranked list per report.
"""

__version__ = "0.1.0"
