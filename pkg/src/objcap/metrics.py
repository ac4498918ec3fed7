"""Caption evaluation metrics, implemented from scratch.

BLEU@1-4 (corpus-level, clipped n-gram precision, brevity penalty),
ROUGE-L (LCS F-measure, beta=1.2), CIDEr-D (TF-IDF n-gram cosine with
length penalty, n=1..4, sigma=6, factor 10), and an exact-match METEOR
("meteor-lite": no stemming or synonym resources, so scores are fully
deterministic and self-contained).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

CIDER_SIGMA = 6.0
CIDER_MAX_N = 4
ROUGE_BETA = 1.2


@dataclass(frozen=True)
class ScoredPair:
    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.references:
            raise ValueError("at least one reference is required")


def make_pair(candidate, references) -> ScoredPair:
    return ScoredPair(
        candidate=tuple(candidate),
        references=tuple(tuple(r) for r in references),
    )


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------- BLEU


def bleu(pairs, max_n: int = 4) -> list[float]:
    """Corpus-level BLEU@1..max_n.

    Clipped n-gram precision pooled over the corpus, geometric mean over
    orders, brevity penalty exp(1 - r/c) with r the closest reference
    length per pair (shorter wins ties).
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty corpus")
    matched = [0] * max_n
    total = [0] * max_n
    cand_len = 0
    ref_len = 0
    for pair in pairs:
        c = pair.candidate
        cand_len += len(c)
        ref_len += min(
            (len(r) for r in pair.references),
            key=lambda L: (abs(L - len(c)), L),
        )
        for n in range(1, max_n + 1):
            counts = _ngrams(c, n)
            clip = Counter()
            for r in pair.references:
                rc = _ngrams(r, n)
                for g in rc:
                    clip[g] = max(clip[g], rc[g])
            matched[n - 1] += sum(min(cnt, clip[g]) for g, cnt in counts.items())
            total[n - 1] += sum(counts.values())
    bp = 1.0 if cand_len > ref_len else (
        0.0 if cand_len == 0 else math.exp(1.0 - ref_len / cand_len)
    )
    scores = []
    for n in range(1, max_n + 1):
        if any(matched[i] == 0 or total[i] == 0 for i in range(n)):
            scores.append(0.0)
            continue
        log_p = sum(math.log(matched[i] / total[i]) for i in range(n)) / n
        scores.append(bp * math.exp(log_p))
    return scores


def sentence_bleu(candidate, references, max_n: int = 4, smooth: float = 1.0):
    """Per-sentence BLEU with additive smoothing; debugging aid only."""
    c = tuple(candidate)
    refs = [tuple(r) for r in references]
    if not c:
        return [0.0] * max_n
    r = min((len(x) for x in refs), key=lambda L: (abs(L - len(c)), L))
    bp = 1.0 if len(c) > r else math.exp(1.0 - r / len(c))
    precisions = []
    for n in range(1, max_n + 1):
        counts = _ngrams(c, n)
        clip = Counter()
        for ref in refs:
            rc = _ngrams(ref, n)
            for g in rc:
                clip[g] = max(clip[g], rc[g])
        m = sum(min(cnt, clip[g]) for g, cnt in counts.items())
        t = sum(counts.values())
        precisions.append((m + smooth) / (t + smooth) if t else 0.0)
    out = []
    for n in range(1, max_n + 1):
        if any(p == 0.0 for p in precisions[:n]):
            out.append(0.0)
        else:
            out.append(bp * math.exp(sum(math.log(p) for p in precisions[:n]) / n))
    return out


# ---------------------------------------------------------------- ROUGE-L


def _lcs_length(a, b) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pair: ScoredPair, beta: float = ROUGE_BETA) -> float:
    """LCS-based F-measure; maximum over references."""
    c = pair.candidate
    best = 0.0
    for r in pair.references:
        if not c or not r:
            continue
        lcs = _lcs_length(c, r)
        if lcs == 0:
            continue
        p = lcs / len(c)
        rec = lcs / len(r)
        f = (1 + beta**2) * p * rec / (rec + beta**2 * p)
        best = max(best, f)
    return best


# ---------------------------------------------------------------- CIDEr-D


def _cider_vec(tokens, idf: dict, default_idf: float, max_n: int):
    vecs = []
    norms = []
    for n in range(1, max_n + 1):
        counts = _ngrams(tokens, n)
        vec = {g: cnt * idf.get(g, default_idf) for g, cnt in counts.items()}
        vecs.append(vec)
        norms.append(math.sqrt(sum(v * v for v in vec.values())))
    return vecs, norms


def cider_idf(pairs, max_n: int = CIDER_MAX_N) -> dict:
    """IDF over reference documents: idf(g) = ln N - ln max(1, df(g)).

    Key None holds the default for n-grams absent from every reference
    (df floored at 1, so they still weigh in the candidate norm).
    """
    pairs = list(pairs)
    df = Counter()
    for pair in pairs:
        seen = set()
        for r in pair.references:
            for n in range(1, max_n + 1):
                seen.update(_ngrams(r, n))
        df.update(seen)
    n_docs = len(pairs)
    idf = {g: math.log(n_docs) - math.log(max(1.0, df[g])) for g in df}
    idf[None] = math.log(n_docs)
    return idf


def cider_d(pairs, idf: dict | None = None, sigma: float = CIDER_SIGMA,
            max_n: int = CIDER_MAX_N) -> float:
    """Corpus CIDEr-D in [0, 10].

    By default IDF is computed from the evaluation set's own references;
    pass ``idf`` to weight by an external (e.g. training) corpus instead.
    """
    pairs = list(pairs)
    if len(pairs) < 2 and idf is None:
        raise ValueError("CIDEr-D needs >= 2 reference documents for IDF")
    if idf is None:
        idf = cider_idf(pairs, max_n)
    default_idf = idf.get(None, 0.0)
    total = 0.0
    for pair in pairs:
        cvecs, cnorms = _cider_vec(pair.candidate, idf, default_idf, max_n)
        pair_score = 0.0
        for r in pair.references:
            rvecs, rnorms = _cider_vec(r, idf, default_idf, max_n)
            penalty = math.exp(
                -((len(pair.candidate) - len(r)) ** 2) / (2 * sigma**2)
            )
            for n in range(max_n):
                num = sum(
                    min(cvecs[n][g], rvecs[n].get(g, 0.0)) * rvecs[n].get(g, 0.0)
                    for g in cvecs[n]
                )
                if cnorms[n] > 0 and rnorms[n] > 0:
                    pair_score += penalty * num / (cnorms[n] * rnorms[n])
        total += 10.0 * pair_score / (max_n * len(pair.references))
    return total / len(pairs)


# ---------------------------------------------------------------- METEOR


def _min_chunks(cand, ref, matched_count: int) -> int:
    """Minimal chunk count over all maximum exact-unigram alignments.

    Branch-and-bound over candidate positions; same-word reference
    occurrences are interchangeable so branching stays small for
    natural sentences.
    """
    ref_counts = Counter(ref)
    positions = {}
    for j, w in enumerate(ref):
        positions.setdefault(w, []).append(j)

    best = [matched_count + 1]

    def recurse(i, remaining, used, last_j, chunks, matched_left):
        # chunks never decreases, so an equal-or-worse partial can't improve
        if chunks >= best[0]:
            return
        if matched_left == 0:
            best[0] = chunks
            return
        if i >= len(cand):
            return
        w = cand[i]
        can_skip = True
        if remaining.get(w, 0) > 0:
            # skipping this occurrence is only legal if enough occurrences
            # of w remain to keep the matching maximum
            cand_rest = sum(1 for k in range(i + 1, len(cand)) if cand[k] == w)
            can_skip = cand_rest >= remaining[w]
            for j in positions[w]:
                if j in used:
                    continue
                new_chunks = chunks + (0 if last_j == j - 1 else 1)
                remaining[w] -= 1
                used.add(j)
                recurse(i + 1, remaining, used, j, new_chunks, matched_left - 1)
                used.discard(j)
                remaining[w] += 1
        if can_skip:
            recurse(i + 1, remaining, used, -2, chunks, matched_left)

    # remaining[w]: how many occurrences of w still need to be matched
    remaining = {
        w: min(c, ref_counts[w]) for w, c in Counter(cand).items() if w in ref_counts
    }
    recurse(0, remaining, set(), None, 0, matched_count)
    return best[0]


def meteor_lite(pair: ScoredPair) -> float:
    """Exact-match METEOR: F_mean * (1 - 0.5*(chunks/m)^3), max over refs."""
    best = 0.0
    c = pair.candidate
    for r in pair.references:
        m = sum((Counter(c) & Counter(r)).values())
        if m == 0 or not c or not r:
            continue
        p = m / len(c)
        rec = m / len(r)
        f_mean = 10 * p * rec / (rec + 9 * p)
        chunks = _min_chunks(c, r, m)
        penalty = 0.5 * (chunks / m) ** 3
        best = max(best, f_mean * (1 - penalty))
    return best


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class MetricReport:
    b1: float
    b2: float
    b3: float
    b4: float
    meteor: float
    rouge_l: float
    cider_d: float

    def to_json(self) -> dict:
        return {
            "b1": self.b1, "b2": self.b2, "b3": self.b3, "b4": self.b4,
            "meteor": self.meteor, "rouge_l": self.rouge_l,
            "cider_d": self.cider_d,
        }


def score_pairs(pairs) -> MetricReport:
    pairs = list(pairs)
    b = bleu(pairs)
    return MetricReport(
        b1=b[0], b2=b[1], b3=b[2], b4=b[3],
        meteor=sum(meteor_lite(p) for p in pairs) / len(pairs),
        rouge_l=sum(rouge_l(p) for p in pairs) / len(pairs),
        cider_d=cider_d(pairs) if len(pairs) >= 2 else 0.0,
    )
