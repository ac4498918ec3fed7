import json

import pytest
from hypothesis import given, strategies as st

from objcap import corpus
from objcap.corpus import (BOS, EOS, PAD, UNK, Caption, DatasetError,
                           Trajectory, build_vocabulary, decode, encode,
                           load_dataset, save_dataset, tokenize)


def cap(text):
    return Caption.from_text(text)


# ------------------------------------------------------------- tokenize


def test_tokenize_strips_punctuation_and_lowercases():
    assert tokenize("A boy, in RED.") == ["a", "boy", "in", "red"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_truncates_to_25():
    assert tokenize(" ".join(["w"] * 30)) == ["w"] * 25


def test_tokenize_keeps_digits():
    assert tokenize("object 42!") == ["object", "42"]


@given(st.text(max_size=80))
def test_tokenize_idempotent(text):
    once = tokenize(text)
    assert tokenize(" ".join(once)) == once


@given(st.text(max_size=200))
def test_tokenize_invariants(text):
    toks = tokenize(text)
    assert len(toks) <= 25
    for t in toks:
        assert t == t.lower()
        assert t.isalnum()


# ------------------------------------------------------------ vocabulary


def test_vocab_size_counts_distinct_tokens():
    v = build_vocabulary([cap("a boy"), cap("a girl")])
    assert len(v) == 7


def test_vocab_min_count_filters_everything():
    v = build_vocabulary([cap("a a")], min_count=3)
    assert len(v) == 4


def test_vocab_deterministic():
    caps = [cap("a boy runs"), cap("a girl")]
    v1 = build_vocabulary(caps)
    v2 = build_vocabulary(caps)
    assert v1.token_to_index == v2.token_to_index


def test_vocab_order_of_captions_irrelevant():
    caps = [cap("a boy runs"), cap("a girl"), cap("boy boy")]
    v1 = build_vocabulary(caps)
    v2 = build_vocabulary(list(reversed(caps)))
    assert v1.token_to_index == v2.token_to_index


def test_vocab_empty_corpus_errors():
    with pytest.raises(DatasetError):
        build_vocabulary([])


def test_vocab_reserved_indices():
    v = build_vocabulary([cap("a")])
    assert [v.word(i) for i in range(4)] == list(corpus.RESERVED_TOKENS)


# ---------------------------------------------------------------- encode


def test_encode_known_tokens():
    v = build_vocabulary([cap("a boy")])
    ids = encode(cap("a boy"), v)
    assert ids[0] == BOS and ids[-1] == EOS
    assert len(ids) == 4


def test_encode_empty_caption():
    v = build_vocabulary([cap("a")])
    assert encode(cap(""), v) == [BOS, EOS]


def test_encode_unknown_is_unk():
    v = build_vocabulary([cap("a")])
    assert encode(cap("zzz"), v) == [BOS, UNK, EOS]


def test_encode_decode_roundtrip():
    v = build_vocabulary([cap("the red car moves fast")])
    tokens = ("the", "red", "car")
    ids = encode(Caption(raw="the red car", tokens=tokens), v)
    assert tuple(decode(ids, v)) == tokens


# --------------------------------------------------------------- dataset


def make_obj(oid="o1", n_frames=3, video="v0"):
    traj = Trajectory(
        object_id=oid,
        timestamps=tuple(range(n_frames)),
        boxes=tuple((2.0, 3.0, 8.0, 8.0) for _ in range(n_frames)),
        frame_size=(64, 64),
    )
    return corpus.AnnotatedObject(
        object_id=oid, super_class="animal", trajectory=traj,
        caption=cap("the red dog stands still"), video_id=video)


def test_dataset_roundtrip(tmp_path):
    objs = [make_obj("a"), make_obj("b", n_frames=5)]
    path = tmp_path / "data.jsonl"
    save_dataset(objs, path)
    loaded = load_dataset(path)
    assert loaded == objs
    # save(load(f)) is byte-identical to the canonical serialization
    path2 = tmp_path / "data2.jsonl"
    save_dataset(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_dataset_two_lines(tmp_path):
    path = tmp_path / "d.jsonl"
    save_dataset([make_obj("a"), make_obj("b")], path)
    assert len(load_dataset(path)) == 2


def test_dataset_bad_box_dimension(tmp_path):
    rec = {"object_id": "x", "super_class": "male", "caption": "a man",
           "frames": [0], "boxes": [[1, 2, 3]], "frame_size": [64, 64],
           "video_id": "v"}
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(DatasetError, match="box"):
        load_dataset(path)


def test_dataset_malformed_line_numbered(tmp_path):
    path = tmp_path / "bad.jsonl"
    save_dataset([make_obj()], path)
    with open(path, "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(DatasetError, match="line 2"):
        load_dataset(path)


def test_box_outside_frame_rejected(tmp_path):
    rec = {"object_id": "x", "super_class": "male", "caption": "a man",
           "frames": [0], "boxes": [[60, 60, 10, 10]], "frame_size": [64, 64],
           "video_id": "v"}
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(DatasetError):
        load_dataset(path)


def test_loaded_objects_satisfy_invariants(tmp_path):
    path = tmp_path / "d.jsonl"
    save_dataset([make_obj("a", 4), make_obj("b", 1)], path)
    for obj in load_dataset(path):
        assert len(obj.trajectory.timestamps) == len(obj.trajectory.boxes) >= 1
        assert len(obj.caption.tokens) <= 25


def test_trajectory_rejects_nonincreasing_timestamps():
    with pytest.raises(ValueError):
        Trajectory("o", (0, 0), ((0, 0, 4, 4), (0, 0, 4, 4)), (64, 64))
