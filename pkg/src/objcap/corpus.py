"""Caption tokenization, vocabulary, and dataset file I/O.

The dataset file format is JSON Lines, one tracked object per line:

    {"object_id": str, "super_class": "male"|"female"|"vehicle"|"animal",
     "caption": str, "frames": [int, ...], "boxes": [[x, y, w, h], ...],
     "frame_size": [W, H], "video_id": str}

Boxes are pixel units, x/y top-left. Files are UTF-8, newline terminated.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field

MAX_CAPTION_TOKENS = 25

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")

SUPER_CLASSES = ("male", "female", "vehicle", "animal")

_NON_WORD = re.compile(r"[^0-9a-z\s]+")


class DatasetError(ValueError):
    """Malformed or inconsistent dataset file contents."""


def tokenize(raw: str, max_len: int = MAX_CAPTION_TOKENS) -> list[str]:
    """Lower-case, strip non-alphanumerics, split on whitespace, truncate.

    Digits are kept. Empty input yields an empty list.
    """
    cleaned = _NON_WORD.sub(" ", raw.lower())
    return cleaned.split()[:max_len]


@dataclass(frozen=True)
class Caption:
    raw: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, raw: str, max_len: int = MAX_CAPTION_TOKENS) -> "Caption":
        return cls(raw=raw, tokens=tuple(tokenize(raw, max_len)))

    def __post_init__(self):
        if len(self.tokens) > MAX_CAPTION_TOKENS:
            raise ValueError(f"caption exceeds {MAX_CAPTION_TOKENS} tokens")


class Vocabulary:
    """Token/index bijection with reserved indices PAD=0, BOS=1, EOS=2, UNK=3."""

    def __init__(self, words: list[str] | None = None):
        self.token_to_index: dict[str, int] = {
            tok: i for i, tok in enumerate(RESERVED_TOKENS)
        }
        self.index_to_token: dict[int, str] = {
            i: tok for i, tok in enumerate(RESERVED_TOKENS)
        }
        for w in words or []:
            self._add(w)

    def _add(self, word: str):
        if word in self.token_to_index:
            return
        idx = len(self.token_to_index)
        self.token_to_index[word] = idx
        self.index_to_token[idx] = word

    def __len__(self) -> int:
        return len(self.token_to_index)

    def __contains__(self, word: str) -> bool:
        return word in self.token_to_index

    def index(self, word: str) -> int:
        return self.token_to_index.get(word, UNK)

    def word(self, idx: int) -> str:
        return self.index_to_token[idx]

    def words(self) -> list[str]:
        """Non-reserved words in index order."""
        return [self.index_to_token[i] for i in range(4, len(self))]

    def to_json(self) -> dict:
        return {"words": self.words()}

    @classmethod
    def from_json(cls, data: dict) -> "Vocabulary":
        return cls(words=list(data["words"]))


def build_vocabulary(captions, min_count: int = 1) -> Vocabulary:
    """Vocabulary over all tokens with frequency >= min_count.

    Ordering is frequency descending, ties lexicographic, so the result is a
    pure function of the token multiset.
    """
    captions = list(captions)
    if not captions:
        raise DatasetError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for cap in captions:
        counts.update(cap.tokens)
    kept = sorted(
        (w for w, c in counts.items() if c >= min_count),
        key=lambda w: (-counts[w], w),
    )
    return Vocabulary(words=kept)


def encode(caption: Caption, vocab: Vocabulary) -> list[int]:
    """[BOS] ++ token indices (UNK for unknown) ++ [EOS]."""
    return [BOS] + [vocab.index(t) for t in caption.tokens] + [EOS]


def decode(indices, vocab: Vocabulary) -> list[str]:
    """Token strings for non-reserved indices; stops at EOS."""
    out = []
    for i in indices:
        if i == EOS:
            break
        if i in (PAD, BOS):
            continue
        out.append(vocab.word(i))
    return out


@dataclass(frozen=True)
class Trajectory:
    """Occurrence timestamps and per-frame boxes of one tracked object."""

    object_id: str
    timestamps: tuple[int, ...]
    boxes: tuple[tuple[float, float, float, float], ...]
    frame_size: tuple[int, int]

    def __post_init__(self):
        if len(self.timestamps) != len(self.boxes) or not self.timestamps:
            raise ValueError("timestamps and boxes must be equal length >= 1")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be strictly increasing")
        W, H = self.frame_size
        for t, (x, y, w, h) in zip(self.timestamps, self.boxes):
            if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > W or y + h > H:
                raise ValueError(
                    f"box {(x, y, w, h)} at frame {t} outside {W}x{H} frame"
                )

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class AnnotatedObject:
    """One object-sentence pair: trajectory, super-class label, caption."""

    object_id: str
    super_class: str
    trajectory: Trajectory
    caption: Caption
    video_id: str = ""

    def __post_init__(self):
        if self.super_class not in SUPER_CLASSES:
            raise ValueError(f"unknown super_class {self.super_class!r}")

    @property
    def label(self) -> int:
        return SUPER_CLASSES.index(self.super_class)


def _record_to_object(rec: dict, lineno: int) -> AnnotatedObject:
    try:
        boxes = rec["boxes"]
        for b in boxes:
            if len(b) != 4:
                raise DatasetError(
                    f"line {lineno}: field 'box' must have 4 elements, got {len(b)}"
                )
        traj = Trajectory(
            object_id=rec["object_id"],
            timestamps=tuple(int(t) for t in rec["frames"]),
            boxes=tuple(tuple(float(v) for v in b) for b in boxes),
            frame_size=(int(rec["frame_size"][0]), int(rec["frame_size"][1])),
        )
        return AnnotatedObject(
            object_id=rec["object_id"],
            super_class=rec["super_class"],
            trajectory=traj,
            caption=Caption.from_text(rec["caption"]),
            video_id=rec.get("video_id", ""),
        )
    except DatasetError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"line {lineno}: {exc}") from exc


def _object_to_record(obj: AnnotatedObject) -> dict:
    return {
        "object_id": obj.object_id,
        "super_class": obj.super_class,
        "caption": obj.caption.raw,
        "frames": list(obj.trajectory.timestamps),
        "boxes": [list(b) for b in obj.trajectory.boxes],
        "frame_size": list(obj.trajectory.frame_size),
        "video_id": obj.video_id,
    }


def load_dataset(path) -> list[AnnotatedObject]:
    objects = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON: {exc}") from exc
            objects.append(_record_to_object(rec, lineno))
    return objects


def save_dataset(objects, path):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(_object_to_record(obj)) + "\n")
