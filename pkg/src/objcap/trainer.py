"""Joint training of the enhancement branch and the captioning decoder.

The two losses are combined as L = L_CAP + lambda * L_DE and optimized
with Adam. All arithmetic is float64 and every source of randomness goes
through the config seed, so identical (config, dataset) runs produce
identical loss logs and checkpoints.

Checkpoint format: magic b"OVCK1", version uint32, header-length uint32,
JSON header (vocabulary words, config, parameter names and shapes), then
the parameter arrays as little-endian float64 in header order.

Config files are flat `key = value` text, one field per line.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, asdict, replace

import numpy as np

from . import captioner, enhance, graph, metrics
from .corpus import Vocabulary, build_vocabulary, encode

CHECKPOINT_MAGIC = b"OVCK1"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 8
    epochs: int = 200
    lam: float = 0.1
    T_s: int = 40
    use_global: bool = True
    use_local: bool = True
    use_color: bool = True
    use_spatial: bool = True
    use_de: bool = True
    seed: int = 0
    # toy-scale model dims; the published system used 512/1024/256
    feature_dim: int = 64
    embed_dim: int = 64
    hidden_dim: int = 128
    attn_dim: int = 64
    enh_hidden: int = 128
    grad_clip: float = 5.0  # global norm; 0 disables
    min_count: int = 1
    extractor_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (self.use_global or self.use_local):
            raise ValueError("need use_global or use_local")

    @property
    def local_dim(self) -> int:
        return self.feature_dim + graph.HIST_DIM

    @property
    def node_dim(self) -> int:
        return self.local_dim + self.feature_dim + 4 + enhance.N_CLASSES


def save_config(config: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in asdict(config).items():
            fh.write(f"{k} = {v}\n")


def load_config(path, **overrides) -> TrainConfig:
    fields = {f: t for f, t in TrainConfig.__annotations__.items()}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#")[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in fields:
                raise ValueError(f"line {lineno}: unknown config key {k!r}")
            typ = fields[k]
            if typ == "bool":
                values[k] = v.lower() in ("1", "true", "yes")
            elif typ == "int":
                values[k] = int(v)
            else:
                values[k] = float(v)
    values.update(overrides)
    return TrainConfig(**values)


# ---------------------------------------------------------------- samples


@dataclass
class Sample:
    object_id: str
    local: np.ndarray
    global_: np.ndarray
    boxes: np.ndarray
    label: int
    token_ids: list[int]
    caption_tokens: tuple[str, ...]


def apply_flags(local, global_, boxes, config: TrainConfig):
    """Zero-mask disabled feature segments (copies; inputs untouched)."""
    D = config.feature_dim
    local = local.copy()
    if not config.use_local:
        local[:, :D] = 0.0
    if not config.use_color:
        local[:, D:] = 0.0
    global_ = global_ if config.use_global else np.zeros_like(global_)
    boxes = boxes if config.use_spatial else np.zeros_like(boxes)
    return local, global_, boxes


def prepare_samples(dataset, frames_by_video, config: TrainConfig,
                    vocab: Vocabulary) -> list[Sample]:
    """Build graphs and encode captions once; features are fixed."""
    extractor = graph.FeatureExtractor(config.feature_dim,
                                       seed=config.extractor_seed)
    samples = []
    for obj in dataset:
        g = graph.build_graph(obj.trajectory, frames_by_video[obj.video_id],
                              extractor, T_s=config.T_s)
        local, global_, boxes = apply_flags(g.local, g.global_, g.boxes, config)
        samples.append(Sample(
            object_id=obj.object_id,
            local=local, global_=global_, boxes=boxes,
            label=obj.label,
            token_ids=encode(obj.caption, vocab),
            caption_tokens=obj.caption.tokens,
        ))
    return samples


def init_params(config: TrainConfig, vocab_size: int,
                rng: np.random.Generator) -> dict[str, np.ndarray]:
    params = enhance.init_enhancer(
        config.local_dim, hidden=(config.enh_hidden, config.enh_hidden),
        rng=rng)
    params.update(captioner.init_decoder(
        vocab_size, config.node_dim, embed_dim=config.embed_dim,
        hidden_dim=config.hidden_dim, attn_dim=config.attn_dim, rng=rng))
    return params


def zero_grads(params) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def forward_sample(params: dict, sample: Sample, config: TrainConfig):
    """Teacher-forced losses for one sample; returns values plus caches."""
    pooled = enhance.mean_pool_local(sample.local)
    gamma, enh_cache = enhance.enhance_forward(pooled, params)
    fused_gamma = gamma if config.use_de else np.zeros_like(gamma)
    H = enhance.fuse(sample.local, sample.global_, sample.boxes, fused_gamma)
    l_cap, dec_caches = captioner.decode_forward(params, H, sample.token_ids)
    l_de = enhance.de_loss(gamma, sample.label)
    return l_cap, l_de, enh_cache, dec_caches


def loss_and_grads(params: dict, sample: Sample, config: TrainConfig,
                   grads: dict) -> tuple[float, float]:
    """Accumulate dL/dparams for L = L_CAP + lambda * L_DE into grads."""
    l_cap, l_de, enh_cache, dec_caches = forward_sample(params, sample, config)
    dH = captioner.decode_backward(params, dec_caches, grads)
    if config.use_de:
        d_gamma = dH[:, -enhance.N_CLASSES:].sum(axis=0)
        enhance.enhance_backward(enh_cache, params, d_gamma, sample.label,
                                 config.lam, grads)
    return l_cap, l_de


# ---------------------------------------------------------------- Adam


class Adam:
    def __init__(self, params: dict, config: TrainConfig):
        self.m = zero_grads(params)
        self.v = zero_grads(params)
        self.t = 0
        self.config = config

    def step(self, params: dict, grads: dict) -> None:
        c = self.config
        self.t += 1
        if c.grad_clip > 0:
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > c.grad_clip:
                scale = c.grad_clip / norm
                for g in grads.values():
                    g *= scale
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for k, g in grads.items():
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            params[k] -= (c.learning_rate * (self.m[k] / bc1)
                          / (np.sqrt(self.v[k] / bc2) + c.adam_eps))
        params["emb"][0] = 0.0  # PAD row stays frozen


# ---------------------------------------------------------------- training


@dataclass
class Checkpoint:
    params: dict
    vocab: Vocabulary
    config: TrainConfig
    epoch: int
    history: list  # rows (epoch, l_cap, l_de, total)


def train(config: TrainConfig, dataset, frames_by_video,
          vocab: Vocabulary | None = None,
          log_path=None) -> Checkpoint:
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty training set")
    if vocab is None:
        vocab = build_vocabulary([o.caption for o in dataset],
                                 min_count=config.min_count)
    samples = prepare_samples(dataset, frames_by_video, config, vocab)
    rng = np.random.default_rng(config.seed)
    params = init_params(config, len(vocab), rng)
    opt = Adam(params, config)
    history = []
    n = len(samples)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        ep_cap = ep_de = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = zero_grads(params)
            for i in batch:
                l_cap, l_de = loss_and_grads(params, samples[i], config, grads)
                ep_cap += l_cap
                ep_de += l_de
                if not (np.isfinite(l_cap) and np.isfinite(l_de)):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, sample "
                        f"{samples[i].object_id}")
            for g in grads.values():
                g /= len(batch)
            opt.step(params, grads)
        total = ep_cap / n + (config.lam * ep_de / n if config.use_de else 0.0)
        history.append((epoch, ep_cap / n, ep_de / n, total))
    if log_path is not None:
        write_log(history, log_path)
    return Checkpoint(params=params, vocab=vocab, config=config,
                      epoch=config.epochs, history=history)


def write_log(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "l_cap", "l_de", "total"])
        for row in history:
            w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def teacher_forced_accuracy(checkpoint: Checkpoint, samples) -> float:
    """Fraction of non-PAD target tokens predicted by teacher forcing."""
    correct = total = 0
    for s in samples:
        _, _, _, caches = forward_sample(checkpoint.params, s, checkpoint.config)
        for step in caches["steps"]:
            if step["w_tgt"] == 0:
                continue
            total += 1
            correct += int(np.argmax(step["logits"]) == step["w_tgt"])
    return correct / max(total, 1)


# ---------------------------------------------------------------- eval


def generate_for_sample(checkpoint: Checkpoint, sample: Sample,
                        mode: str = "greedy", beam_width: int = 3):
    pooled = enhance.mean_pool_local(sample.local)
    gamma, _ = enhance.enhance_forward(pooled, checkpoint.params)
    fused_gamma = gamma if checkpoint.config.use_de else np.zeros_like(gamma)
    H = enhance.fuse(sample.local, sample.global_, sample.boxes, fused_gamma)
    caption = captioner.generate(H, checkpoint.params, checkpoint.vocab,
                                 mode=mode, beam_width=beam_width)
    return caption, int(np.argmax(gamma))


def evaluate(checkpoint: Checkpoint, dataset, frames_by_video,
             mode: str = "greedy") -> dict:
    """Greedy generation per object; caption metrics plus DE accuracy."""
    samples = prepare_samples(dataset, frames_by_video, checkpoint.config,
                              checkpoint.vocab)
    pairs = []
    correct = 0
    for s in samples:
        caption, pred = generate_for_sample(checkpoint, s, mode=mode)
        pairs.append(metrics.make_pair(caption.tokens, [s.caption_tokens]))
        correct += int(pred == s.label)
    report = metrics.score_pairs(pairs).to_json()
    report["de_accuracy"] = correct / len(samples)
    return report


# ---------------------------------------------------------------- ablation

ABLATION_LADDER = [
    ("global", dict(use_global=True, use_local=False, use_color=False,
                    use_spatial=False, use_de=False)),
    ("local", dict(use_global=False, use_local=True, use_color=False,
                   use_spatial=False, use_de=False)),
    ("global+local", dict(use_global=True, use_local=True, use_color=False,
                          use_spatial=False, use_de=False)),
    ("+color", dict(use_global=True, use_local=True, use_color=True,
                    use_spatial=False, use_de=False)),
    ("+spatial", dict(use_global=True, use_local=True, use_color=True,
                      use_spatial=True, use_de=False)),
    ("+de", dict(use_global=True, use_local=True, use_color=True,
                 use_spatial=True, use_de=True)),
]

# published full-pipeline reference points, recorded for context only
# (different dataset and backbone; not asserted anywhere)
REFERENCE_ROWS = {"global": {"b4": 16.1}, "+de": {"b4": 20.2, "meteor": 20.0,
                                                  "rouge_l": 45.1,
                                                  "cider_d": 50.4}}


def ablate(base_config: TrainConfig, train_set, test_set, frames_by_video,
           seeds=(0, 1, 2)) -> list[dict]:
    """Train and evaluate the 6-row feature ladder; median metrics per row."""
    rows = []
    for name, flags in ABLATION_LADDER:
        per_seed = []
        for seed in seeds:
            config = replace(base_config, seed=seed, **flags)
            ckpt = train(config, train_set, frames_by_video)
            per_seed.append(evaluate(ckpt, test_set, frames_by_video))
        row = {"row": name, "seeds": len(per_seed)}
        for key in ("b4", "meteor", "rouge_l", "cider_d"):
            row[key] = float(np.median([r[key] for r in per_seed]))
        row["per_seed"] = per_seed
        if name in REFERENCE_ROWS:
            row["reference_paper_scale"] = REFERENCE_ROWS[name]
        rows.append(row)
    return rows


def split_by_video(dataset, num_test_videos: int):
    """Leakage-free split: the last N video ids (sorted) form the test set."""
    videos = sorted({o.video_id for o in dataset})
    test_videos = set(videos[len(videos) - num_test_videos :])
    train = [o for o in dataset if o.video_id not in test_videos]
    test = [o for o in dataset if o.video_id in test_videos]
    return train, test


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    names = sorted(checkpoint.params)
    header = json.dumps({
        "vocab": checkpoint.vocab.to_json(),
        "config": asdict(checkpoint.config),
        "epoch": checkpoint.epoch,
        "history": checkpoint.history,
        "params": [[n, list(checkpoint.params[n].shape)] for n in names],
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        fh.write(header)
        for n in names:
            fh.write(np.ascontiguousarray(
                checkpoint.params[n], dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {version}, "
                f"expected {CHECKPOINT_VERSION}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        params = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError("truncated checkpoint file")
            params[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return Checkpoint(
        params=params,
        vocab=Vocabulary.from_json(header["vocab"]),
        config=TrainConfig(**header["config"]),
        epoch=header["epoch"],
        history=[tuple(r) for r in header["history"]],
    )
