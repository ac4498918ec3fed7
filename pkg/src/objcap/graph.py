"""Per-object temporal graphs: frame sampling, local/global features,
normalized boxes, node assembly.

A graph node pairs three views of the object at one sampled timestamp:
local features of the crop (projected pixels plus a 48-dim color
histogram), global features of the full frame it occurs in, and its
normalized box. The default feature extractor is a seeded fixed random
projection of the bilinearly resized raster, so the whole pipeline is
deterministic and cheap enough for gradient checking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import Trajectory
from .synthgen import render_crop

HIST_BINS = 16
HIST_DIM = 3 * HIST_BINS  # 48


def sample_frames(m: int, T_s: int = 40) -> list[int]:
    """T_s equally spaced indices into a length-m trajectory.

    index_j = round(j*(m-1)/(T_s-1)), round half away from zero; indices
    repeat when m < T_s.
    """
    if m < 1:
        raise ValueError("empty trajectory (m = 0)")
    if T_s < 1:
        raise ValueError("T_s must be >= 1")
    if T_s == 1:
        return [0]
    step = (m - 1) / (T_s - 1)
    return [int(np.floor(j * step + 0.5)) for j in range(T_s)]


def color_histogram(crop: np.ndarray) -> np.ndarray:
    """Concatenated per-channel 16-bin intensity histograms, each channel
    normalized to sum 1. Output dim 48."""
    if crop.size == 0:
        raise ValueError("empty crop")
    out = np.empty(HIST_DIM, dtype=np.float64)
    n = crop.shape[0] * crop.shape[1]
    for ch in range(3):
        counts = np.bincount(crop[:, :, ch].ravel() // 16, minlength=HIST_BINS)
        out[ch * HIST_BINS : (ch + 1) * HIST_BINS] = counts / n
    return out


def _resize_bilinear(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize to size x size, align-corners sampling."""
    H, W = img.shape[:2]
    ys = np.linspace(0, H - 1, size)
    xs = np.linspace(0, W - 1, size)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, H - 1)
    x1 = np.minimum(x0 + 1, W - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    img = img.astype(np.float64)
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


class FeatureExtractor:
    """Deterministic raster -> feature vector map.

    Default implementation: resize to 16x16, scale to [0,1], flatten, and
    project with a fixed seeded Gaussian matrix. Subclass or pass a
    different `project` to swap in other extractors behind the same
    interface.
    """

    def __init__(self, output_dim: int = 64, seed: int = 0, resize: int = 16):
        self.name = f"randproj{output_dim}"
        self.output_dim = output_dim
        self.resize = resize
        rng = np.random.default_rng(seed)
        in_dim = resize * resize * 3
        self.matrix = rng.standard_normal((output_dim, in_dim)) / np.sqrt(in_dim)

    def __call__(self, raster: np.ndarray) -> np.ndarray:
        small = _resize_bilinear(raster, self.resize) / 255.0
        return self.matrix @ small.ravel()


def extract_local(crop: np.ndarray, extractor: FeatureExtractor) -> np.ndarray:
    """[extractor(crop) || color_histogram(crop)], dim D+48."""
    return np.concatenate([extractor(crop), color_histogram(crop)])


def extract_global(frame: np.ndarray, extractor: FeatureExtractor) -> np.ndarray:
    return extractor(frame)


def normalize_box(box, frame_size) -> np.ndarray:
    W, H = frame_size
    if W == 0 or H == 0:
        raise ValueError("degenerate frame size")
    x, y, w, h = box
    return np.array([x / W, y / H, w / W, h / H], dtype=np.float64)


@dataclass(frozen=True)
class TemporalGraph:
    object_id: str
    local: np.ndarray   # [T_s, D+48]
    global_: np.ndarray  # [T_s, D]
    boxes: np.ndarray   # [T_s, 4], normalized
    sampled_timestamps: tuple[int, ...]

    @property
    def num_nodes(self) -> int:
        return self.local.shape[0]

    @property
    def node_dim(self) -> int:
        return self.local.shape[1] + self.global_.shape[1] + 4


def build_graph(trajectory: Trajectory, frames: np.ndarray,
                extractor: FeatureExtractor, T_s: int = 40) -> TemporalGraph:
    """Assemble the temporal graph for one trajectory.

    `frames` is indexed by absolute frame number and must cover every
    trajectory timestamp.
    """
    idx = sample_frames(len(trajectory), T_s)
    local_rows, global_rows, box_rows, stamps = [], [], [], []
    global_cache: dict[int, np.ndarray] = {}
    local_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for j in idx:
        t = trajectory.timestamps[j]
        if t >= len(frames):
            raise ValueError(f"no frame for timestamp {t}")
        if j not in local_cache:
            crop = render_crop(frames[t], trajectory.boxes[j])
            local_cache[j] = (
                extract_local(crop, extractor),
                normalize_box(trajectory.boxes[j], trajectory.frame_size),
            )
        if t not in global_cache:
            global_cache[t] = extract_global(frames[t], extractor)
        loc, nbox = local_cache[j]
        local_rows.append(loc)
        global_rows.append(global_cache[t])
        box_rows.append(nbox)
        stamps.append(t)
    return TemporalGraph(
        object_id=trajectory.object_id,
        local=np.array(local_rows),
        global_=np.array(global_rows),
        boxes=np.array(box_rows),
        sampled_timestamps=tuple(stamps),
    )


# ------------------------------------------------- precomputed features

def save_features(graphs, path) -> None:
    """Write graphs as JSON Lines, one node per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            for t in range(g.num_nodes):
                fh.write(json.dumps({
                    "object_id": g.object_id,
                    "t": int(g.sampled_timestamps[t]),
                    "local": g.local[t].tolist(),
                    "global": g.global_[t].tolist(),
                    "box": g.boxes[t].tolist(),
                }) + "\n")


def load_features(path) -> dict[str, TemporalGraph]:
    """Read precomputed node features; returns graphs keyed by object_id."""
    rows: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rows.setdefault(rec["object_id"], []).append(
                    (int(rec["t"]), rec["local"], rec["global"], rec["box"])
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"line {lineno}: bad feature record: {exc}")
    graphs = {}
    for oid, node_rows in rows.items():
        graphs[oid] = TemporalGraph(
            object_id=oid,
            local=np.array([r[1] for r in node_rows], dtype=np.float64),
            global_=np.array([r[2] for r in node_rows], dtype=np.float64),
            boxes=np.array([r[3] for r in node_rows], dtype=np.float64),
            sampled_timestamps=tuple(r[0] for r in node_rows),
        )
    return graphs
