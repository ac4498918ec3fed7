"""Deterministic synthetic multi-object scenes.

Each scene renders a handful of colored shapes moving on a textured
background, and emits one annotated object-sentence pair per shape. The
caption is produced from the object's program by a fixed template, so the
generator doubles as its own labeling oracle: color, class and activity
words are recoverable from the program.

Raster archives use a simple binary layout: magic b"OVCR1", then W, H, T
as little-endian uint32, then T*H*W*3 bytes of row-major RGB.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import AnnotatedObject, Caption, Trajectory

# Saturated palette; every channel value sits in a 16-wide histogram bin
# distinct from the background's (background is (40, 40, 40), bin 2).
PALETTE = {
    "red": (230, 20, 20),
    "green": (20, 230, 20),
    "blue": (20, 20, 230),
    "yellow": (230, 230, 20),
    "orange": (230, 130, 20),
    "purple": (150, 20, 230),
    "pink": (230, 100, 180),
    "white": (230, 230, 230),
}
COLOR_NAMES = tuple(PALETTE)
BACKGROUND = (40, 40, 40)

SHAPES = ("square", "circle", "triangle")
MOTIONS = ("static", "move_right", "move_left", "move_up", "move_down",
           "jump", "zigzag")

CLASS_WORDS = {"male": "man", "female": "woman", "vehicle": "car",
               "animal": "dog"}

ACTIVITY_PHRASES = {
    "static": "stands still",
    "move_right": "moves rightward",
    "move_left": "moves leftward",
    "move_up": "moves upward",
    "move_down": "moves downward",
    "jump": "jumps repeatedly",
    "zigzag": "zigzags sideways",
}

# super-class is a deterministic function of shape (+ color for humans):
# triangles are humans (male for the first half of the palette), squares
# are vehicles, circles are animals.
_MALE_COLORS = frozenset(COLOR_NAMES[:4])


def class_for(shape: str, color: str) -> str:
    if shape == "square":
        return "vehicle"
    if shape == "circle":
        return "animal"
    return "male" if color in _MALE_COLORS else "female"


class SceneSpecError(ValueError):
    """Invalid scene specification (e.g. motion exits the frame)."""


@dataclass(frozen=True)
class ObjectProgram:
    shape: str
    color: str
    motion: str
    start_box: tuple[int, int, int, int]
    visible_range: tuple[int, int]  # [first, last] frame, inclusive
    speed: int = 2

    @property
    def super_class(self) -> str:
        return class_for(self.shape, self.color)


@dataclass(frozen=True)
class SceneSpec:
    frame_size: tuple[int, int] = (64, 64)
    num_frames: int = 24
    objects: tuple[ObjectProgram, ...] = ()
    seed: int = 0
    video_id: str = "scene"

    def __post_init__(self):
        W, H = self.frame_size
        if self.num_frames < 1 or W < 16 or H < 16:
            raise SceneSpecError("need num_frames >= 1 and frame >= 16x16")
        if not 1 <= len(self.objects) <= 8:
            raise SceneSpecError("need between 1 and 8 objects")


def _box_at(program: ObjectProgram, t: int) -> tuple[int, int, int, int]:
    """Box of the object at frame t (t within visible_range)."""
    x, y, w, h = program.start_box
    k = t - program.visible_range[0]
    s = program.speed
    if program.motion == "move_right":
        x += s * k
    elif program.motion == "move_left":
        x -= s * k
    elif program.motion == "move_down":
        y += s * k
    elif program.motion == "move_up":
        y -= s * k
    elif program.motion == "jump":
        y -= s * (k % 4 if (k % 8) < 4 else 4 - (k % 4))
    elif program.motion == "zigzag":
        x += s * (k % 4 if (k % 8) < 4 else 4 - (k % 4))
    return (x, y, w, h)


def trajectory_of(program: ObjectProgram, frame_size, object_id: str) -> Trajectory:
    first, last = program.visible_range
    W, H = frame_size
    boxes = []
    for t in range(first, last + 1):
        x, y, w, h = _box_at(program, t)
        if x < 0 or y < 0 or x + w > W or y + h > H:
            raise SceneSpecError(
                f"object {object_id}: motion {program.motion} exits the "
                f"{W}x{H} frame at frame {t}"
            )
        boxes.append((float(x), float(y), float(w), float(h)))
    return Trajectory(
        object_id=object_id,
        timestamps=tuple(range(first, last + 1)),
        boxes=tuple(boxes),
        frame_size=(W, H),
    )


def _location_phrase(start_box, frame_size) -> str:
    x, y, w, h = start_box
    cx = (x + w / 2) / frame_size[0]
    cy = (y + h / 2) / frame_size[1]
    vert = "top" if cy < 0.5 else "bottom"
    horiz = "west" if cx < 0.5 else "east"
    return f"in the {vert} {horiz} area"


def caption_from_program(program: ObjectProgram, frame_size=(64, 64)) -> Caption:
    """Template caption: the <color> <class> <activity> <location>."""
    text = " ".join([
        "the", program.color, CLASS_WORDS[program.super_class],
        ACTIVITY_PHRASES[program.motion],
        _location_phrase(program.start_box, frame_size),
    ])
    return Caption.from_text(text)


def _paint(frame: np.ndarray, program: ObjectProgram, box) -> None:
    x, y, w, h = (int(v) for v in box)
    rgb = np.array(PALETTE[program.color], dtype=np.uint8)
    if program.shape == "square":
        frame[y : y + h, x : x + w] = rgb
        return
    yy, xx = np.mgrid[0:h, 0:w]
    if program.shape == "circle":
        cy, cx = (h - 1) / 2, (w - 1) / 2
        mask = ((yy - cy) / (h / 2)) ** 2 + ((xx - cx) / (w / 2)) ** 2 <= 1.0
    else:  # triangle pointing up, widening toward the bottom
        mask = np.abs(xx - (w - 1) / 2) <= (yy + 1) * w / (2 * h)
    frame[y : y + h, x : x + w][mask] = rgb


def _background(frame_size, num_frames, seed) -> np.ndarray:
    W, H = frame_size
    rng = np.random.default_rng(seed)
    base = np.full((H, W, 3), BACKGROUND, dtype=np.uint8)
    # static speckle texture keeps projected frame features non-trivial
    noise = rng.integers(-6, 7, size=(H, W, 1), dtype=np.int16)
    base = np.clip(base.astype(np.int16) + noise, 0, 255).astype(np.uint8)
    return np.repeat(base[None], num_frames, axis=0)


def generate_scene(spec: SceneSpec):
    """Render a scene; returns (frames [T,H,W,3] uint8, annotated objects)."""
    # validate every trajectory before any rendering
    trajectories = [
        trajectory_of(prog, spec.frame_size, f"{spec.video_id}_obj{i}")
        for i, prog in enumerate(spec.objects)
    ]
    frames = _background(spec.frame_size, spec.num_frames, spec.seed)
    for prog, traj in zip(spec.objects, trajectories):
        for t, box in zip(traj.timestamps, traj.boxes):
            _paint(frames[t], prog, box)
    objects = [
        AnnotatedObject(
            object_id=traj.object_id,
            super_class=prog.super_class,
            trajectory=traj,
            caption=caption_from_program(prog, spec.frame_size),
            video_id=spec.video_id,
        )
        for prog, traj in zip(spec.objects, trajectories)
    ]
    return frames, objects


def render_crop(frame: np.ndarray, box) -> np.ndarray:
    """Exact crop; out-of-bounds boxes are an error, never clamped."""
    x, y, w, h = (int(round(v)) for v in box)
    H, W = frame.shape[:2]
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > W or y + h > H:
        raise ValueError(f"box {(x, y, w, h)} outside {W}x{H} frame")
    return frame[y : y + h, x : x + w]


def inject_id_switch(a: Trajectory, b: Trajectory, frame: int):
    """Swap the tails of two trajectories from `frame` on (tracking-failure
    model). Off by default everywhere; returns two new trajectories."""
    def split(t):
        k = sum(1 for ts in t.timestamps if ts < frame)
        return k
    ka, kb = split(a), split(b)
    new_a = Trajectory(a.object_id, a.timestamps[:ka] + b.timestamps[kb:],
                       a.boxes[:ka] + b.boxes[kb:], a.frame_size)
    new_b = Trajectory(b.object_id, b.timestamps[:kb] + a.timestamps[ka:],
                       b.boxes[:kb] + a.boxes[ka:], b.frame_size)
    return new_a, new_b


# ---------------------------------------------------------------- archives

RASTER_MAGIC = b"OVCR1"


def save_rasters(frames: np.ndarray, path) -> None:
    T, H, W, C = frames.shape
    assert C == 3 and frames.dtype == np.uint8
    with open(path, "wb") as fh:
        fh.write(RASTER_MAGIC)
        fh.write(struct.pack("<III", W, H, T))
        fh.write(frames.tobytes())


def load_rasters(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != RASTER_MAGIC:
            raise ValueError(f"bad raster magic {magic!r}, expected {RASTER_MAGIC!r}")
        W, H, T = struct.unpack("<III", fh.read(12))
        data = fh.read(T * H * W * 3)
    if len(data) != T * H * W * 3:
        raise ValueError("truncated raster archive")
    return np.frombuffer(data, dtype=np.uint8).reshape(T, H, W, 3)


# ---------------------------------------------------------------- corpora


def random_scene_spec(rng: np.random.Generator, video_id: str,
                      frame_size=(64, 64), num_frames: int = 24,
                      num_objects: int | None = None) -> SceneSpec:
    """Random well-formed scene. Objects live in disjoint horizontal bands
    so crops never mix colors (keeps caption-feature consistency exact)."""
    W, H = frame_size
    if num_objects is None:
        num_objects = int(rng.integers(2, 5))
    num_objects = max(1, min(num_objects, H // 16))
    band = H // num_objects
    programs = []
    for i in range(num_objects):
        size = int(rng.integers(8, min(13, band - 1)))
        motion = MOTIONS[rng.integers(0, len(MOTIONS))]
        y_lo, y_hi = i * band, (i + 1) * band - size  # inclusive y0 range
        first, last = 0, num_frames - 1
        speed = 1
        x0 = int(rng.integers(0, W - size + 1))
        y0 = int(rng.integers(y_lo, y_hi + 1))
        if motion == "move_right":
            speed = int(rng.integers(1, 3))
            travel = speed * (num_frames - 1)
            if W - size - travel < 1:
                speed, travel = 1, num_frames - 1
            x0 = int(rng.integers(0, W - size - travel + 1))
        elif motion == "move_left":
            speed = int(rng.integers(1, 3))
            travel = speed * (num_frames - 1)
            if travel > W - size - 1:
                speed, travel = 1, num_frames - 1
            x0 = int(rng.integers(travel, W - size + 1))
        elif motion == "zigzag":
            # x oscillates rightward with amplitude <= 4*speed
            x0 = int(rng.integers(0, W - size - 4 * speed + 1))
        elif motion == "jump":
            # y oscillates upward with amplitude <= 4*speed
            if y_hi - y_lo < 4:
                motion = "static"
            else:
                y0 = int(rng.integers(y_lo + 4, y_hi + 1))
        elif motion == "move_up":
            room = y_hi - y_lo
            if room < 2:
                motion = "static"
            else:
                y0 = y_hi
                last = min(num_frames - 1, room)
        elif motion == "move_down":
            room = y_hi - y_lo
            if room < 2:
                motion = "static"
            else:
                y0 = y_lo
                last = min(num_frames - 1, room)
        color = COLOR_NAMES[rng.integers(0, len(COLOR_NAMES))]
        shape = SHAPES[rng.integers(0, len(SHAPES))]
        programs.append(ObjectProgram(
            shape=shape, color=color, motion=motion,
            start_box=(x0, y0, size, size),
            visible_range=(int(first), int(last)), speed=speed,
        ))
    return SceneSpec(frame_size=frame_size, num_frames=num_frames,
                     objects=tuple(programs), seed=int(rng.integers(2**31)),
                     video_id=video_id)


def generate_corpus(num_scenes: int, seed: int, frame_size=(64, 64),
                    num_frames: int = 24):
    """Deterministic corpus: list of (SceneSpec, frames, objects)."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(num_scenes):
        spec = random_scene_spec(rng, video_id=f"vid{i:04d}",
                                 frame_size=frame_size, num_frames=num_frames)
        frames, objects = generate_scene(spec)
        out.append((spec, frames, objects))
    return out
