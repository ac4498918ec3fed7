"""A quick tour of the caption metrics on hand-picked pairs.

Run:  python3 demos/03_metrics_tour.py
"""

import math

from objcap import metrics
from objcap.corpus import tokenize


def pair(cand, refs):
    return metrics.make_pair(tuple(tokenize(cand)),
                             [tuple(tokenize(r)) for r in refs])


# Brevity penalty: perfect n-gram precision but one word short.
p = pair("the cat", ["the cat sat"])
print("B@2 for 'the cat' vs 'the cat sat':",
      metrics.bleu([p])[1], "=", math.exp(-0.5))

# ROUGE-L rewards in-order overlap even with gaps (LCS = 'a c d').
p = pair("a c d", ["a b c d"])
print("ROUGE-L with one dropped token:", round(metrics.rouge_l(p), 4))

# METEOR-lite penalizes fragmentation: same unigrams, scrambled order.
good = pair("the red car moves right", ["the red car moves right"])
scrambled = pair("right moves car red the", ["the red car moves right"])
print("METEOR in order / scrambled:",
      round(metrics.meteor_lite(good), 4),
      round(metrics.meteor_lite(scrambled), 4))

# CIDEr-D downweights n-grams every reference uses ('the ... in the').
pairs = [
    pair("the red vehicle moves rightward in the top west area",
         ["the red vehicle moves rightward in the top west area"]),
    pair("the blue animal stays still in the bottom east area",
         ["the blue animal stays still in the bottom east area"]),
    pair("the green human jumps in the top east area",
         ["the yellow human jumps in the bottom east area"]),
]
print("CIDEr-D corpus score (2 exact + 1 partial):",
      round(metrics.cider_d(pairs), 4))

report = metrics.score_pairs(pairs)
print("full report:", report.to_json())
