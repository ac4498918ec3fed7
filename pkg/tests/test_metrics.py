import math

import numpy as np
import pytest

from objcap import metrics
from objcap.metrics import bleu, cider_d, make_pair, meteor_lite, rouge_l

import oracles


def toks(s):
    return tuple(s.split())


# ---------------------------------------------------------------- BLEU


def test_bleu_perfect_match():
    pairs = [make_pair(toks("a b c d e"), [toks("a b c d e")]),
             make_pair(toks("f g h i"), [toks("f g h i")])]
    assert bleu(pairs) == pytest.approx([1.0] * 4)


def test_bleu_the_cat():
    # p1 = p2 = 1, BP = exp(1 - 3/2)
    pairs = [make_pair(toks("the cat"), [toks("the cat sat")])]
    b = bleu(pairs)
    assert b[1] == pytest.approx(math.exp(-0.5), abs=1e-9)


def test_bleu_empty_candidate():
    pairs = [make_pair((), [toks("a b")])]
    assert bleu(pairs) == [0.0] * 4


def test_bleu_monotone_deletion():
    # removing a matched token never raises clipped n-gram counts
    ref = toks("a b c d e")
    from itertools import combinations
    for k in range(1, 6):
        for cand in combinations(ref, k):
            full = oracles.bleu_bf([(list(cand), [list(ref)])])
            for drop in range(len(cand)):
                smaller = cand[:drop] + cand[drop + 1:]
                for n in range(1, 5):
                    c_full = sum(min(cnt, metrics._ngrams(ref, n)[g])
                                 for g, cnt in metrics._ngrams(cand, n).items())
                    c_small = sum(min(cnt, metrics._ngrams(ref, n)[g])
                                  for g, cnt in metrics._ngrams(smaller, n).items())
                    assert c_small <= c_full


def test_sentence_bleu_smoothed_nonzero():
    b = metrics.sentence_bleu(toks("a b"), [toks("a c")])
    assert 0 < b[0] < 1


# ---------------------------------------------------------------- ROUGE-L


def test_rouge_identical():
    assert rouge_l(make_pair(toks("a b c"), [toks("a b c")])) == 1.0


def test_rouge_disjoint():
    assert rouge_l(make_pair(toks("a b"), [toks("c d")])) == 0.0


def test_rouge_derived_value():
    # LCS=3, P=1, R=0.75, beta=1.2
    f = rouge_l(make_pair(toks("a c d"), [toks("a b c d")]))
    expected = (1 + 1.2**2) * 1.0 * 0.75 / (0.75 + 1.2**2 * 1.0)
    assert f == pytest.approx(expected, abs=1e-9)
    assert f == pytest.approx(0.8356, abs=1e-4)


def test_rouge_empty():
    assert rouge_l(make_pair((), [()])) == 0.0


# ---------------------------------------------------------------- CIDEr-D


def test_cider_identical_pairs():
    pairs = [make_pair(toks("a b c d e"), [toks("a b c d e")]),
             make_pair(toks("f g h i j"), [toks("f g h i j")])]
    assert cider_d(pairs) == pytest.approx(10.0, abs=1e-6)


def test_cider_no_overlap():
    pairs = [make_pair(toks("x y"), [toks("a b")]),
             make_pair(toks("c d"), [toks("c d")])]
    # first pair shares no n-gram with its reference
    per_pair = oracles.cider_d_bf([(list(toks("x y")), [list(toks("a b"))]),
                                   (list(toks("c d")), [list(toks("c d"))])])
    assert cider_d(pairs) == pytest.approx(per_pair, abs=1e-12)


def test_cider_single_document_error():
    with pytest.raises(ValueError):
        cider_d([make_pair(toks("a"), [toks("a")])])


def test_cider_bounded():
    rng = np.random.default_rng(0)
    vocab = "a b c d e".split()
    pairs = []
    for _ in range(6):
        c = tuple(rng.choice(vocab, rng.integers(1, 6)))
        r = tuple(rng.choice(vocab, rng.integers(1, 6)))
        pairs.append(make_pair(c, [r]))
    assert 0.0 <= cider_d(pairs) <= 10.0


# ---------------------------------------------------------------- METEOR


def test_meteor_identical_two_tokens():
    assert meteor_lite(make_pair(toks("a b"), [toks("a b")])) == pytest.approx(
        0.9375, abs=0)


def test_meteor_disjoint():
    assert meteor_lite(make_pair(toks("a b"), [toks("c d")])) == 0.0


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_meteor_identical_closed_form(k):
    sent = tuple(f"w{i}" for i in range(k))
    assert meteor_lite(make_pair(sent, [sent])) == pytest.approx(
        1 - 0.5 / k**3, abs=1e-12)


# ------------------------------------------------- brute-force agreement


def _random_sentence(rng, vocab, max_len=6):
    return tuple(rng.choice(vocab, size=rng.integers(1, max_len + 1)))


def test_all_metrics_match_brute_force():
    rng = np.random.default_rng(42)
    vocab = np.array("a b c d e f g h".split())
    for _ in range(100):
        cand = _random_sentence(rng, vocab)
        refs = [_random_sentence(rng, vocab)
                for _ in range(int(rng.integers(1, 3)))]
        pair = make_pair(cand, refs)
        assert rouge_l(pair) == pytest.approx(
            oracles.rouge_l_bf(cand, refs), abs=1e-9)
        assert meteor_lite(pair) == pytest.approx(
            oracles.meteor_bf(cand, refs), abs=1e-9)
    for trial in range(25):
        corpus = []
        for _ in range(4):
            cand = _random_sentence(rng, vocab)
            refs = [_random_sentence(rng, vocab)]
            corpus.append((cand, refs))
        pairs = [make_pair(c, rs) for c, rs in corpus]
        bf = oracles.bleu_bf([(list(c), [list(r) for r in rs])
                              for c, rs in corpus])
        for got, want in zip(bleu(pairs), bf):
            assert got == pytest.approx(want, abs=1e-9)
        assert cider_d(pairs) == pytest.approx(
            oracles.cider_d_bf([(list(c), [list(r) for r in rs])
                                for c, rs in corpus]), abs=1e-9)


def test_order_invariance():
    pairs = [make_pair(toks("a b c"), [toks("a b d")]),
             make_pair(toks("x y"), [toks("x z")]),
             make_pair(toks("c a"), [toks("c a")])]
    rev = list(reversed(pairs))
    assert bleu(pairs) == bleu(rev)
    assert cider_d(pairs) == pytest.approx(cider_d(rev), abs=1e-12)


def test_score_pairs_report_schema():
    pairs = [make_pair(toks("a b"), [toks("a b")]),
             make_pair(toks("c d"), [toks("c d")])]
    report = metrics.score_pairs(pairs).to_json()
    assert set(report) == {"b1", "b2", "b3", "b4", "meteor", "rouge_l",
                           "cider_d"}
    assert all(np.isfinite(v) for v in report.values())
