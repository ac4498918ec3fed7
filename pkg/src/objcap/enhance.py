"""Detail-enhancement branch.

Mean-pools an object's local features over its graph nodes, maps them
through three fully-connected layers (ReLU between) to a 4-way softmax
over {male, female, vehicle, animal}, and fuses the resulting probability
vector gamma into every graph node. Trained with categorical
cross-entropy; backward passes are hand-written so the whole model is
finite-difference checkable.
"""

from __future__ import annotations

import numpy as np

N_CLASSES = 4
LOG_EPS = 1e-12  # clamp inside the cross-entropy log


def init_enhancer(in_dim: int, hidden: tuple[int, int] = (128, 128),
                  rng: np.random.Generator | None = None,
                  scale: float = 0.1) -> dict[str, np.ndarray]:
    rng = rng or np.random.default_rng(0)
    h1, h2 = hidden
    dims = [(h1, in_dim), (h2, h1), (N_CLASSES, h2)]
    params = {}
    for i, (out_d, in_d) in enumerate(dims, start=1):
        params[f"enh_W{i}"] = scale * rng.standard_normal((out_d, in_d))
        params[f"enh_b{i}"] = np.zeros(out_d)
    return params


def mean_pool_local(local: np.ndarray) -> np.ndarray:
    """Mean of per-node local features, [T, Dl] -> [Dl]."""
    if local.shape[0] < 1:
        raise ValueError("graph has no nodes")
    return local.mean(axis=0)


def softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def enhance_forward(pooled: np.ndarray, params: dict):
    """Class probabilities gamma plus a cache for the backward pass."""
    if pooled.shape[0] != params["enh_W1"].shape[1]:
        raise ValueError(
            f"pooled dim {pooled.shape[0]} != enhancer input "
            f"{params['enh_W1'].shape[1]}"
        )
    a1 = params["enh_W1"] @ pooled + params["enh_b1"]
    h1 = np.maximum(a1, 0.0)
    a2 = params["enh_W2"] @ h1 + params["enh_b2"]
    h2 = np.maximum(a2, 0.0)
    a3 = params["enh_W3"] @ h2 + params["enh_b3"]
    gamma = softmax(a3)
    cache = {"pooled": pooled, "a1": a1, "h1": h1, "a2": a2, "h2": h2,
             "gamma": gamma}
    return gamma, cache


def de_loss(gamma: np.ndarray, label: int) -> float:
    """Categorical cross-entropy -log gamma[label]."""
    if not 0 <= label < N_CLASSES:
        raise ValueError(f"label {label} outside 0..{N_CLASSES - 1}")
    return float(-np.log(max(gamma[label], LOG_EPS)))


def fuse(local: np.ndarray, global_: np.ndarray, boxes: np.ndarray,
         gamma: np.ndarray) -> np.ndarray:
    """Per-node decoder input H^t = [local || global || box || gamma]."""
    T = local.shape[0]
    return np.concatenate(
        [local, global_, boxes, np.tile(gamma, (T, 1))], axis=1
    )


def enhance_backward(cache: dict, params: dict, d_gamma: np.ndarray,
                     label: int, lam: float, grads: dict) -> np.ndarray:
    """Accumulate enhancer gradients into `grads`; returns d_pooled.

    d_gamma is the gradient reaching gamma through the fusion path; the
    lam-weighted cross-entropy contributes directly at the logits.
    """
    gamma = cache["gamma"]
    # softmax jacobian applied to the fusion-path gradient
    d_a3 = gamma * (d_gamma - np.dot(gamma, d_gamma))
    if lam != 0.0:
        onehot = np.zeros(N_CLASSES)
        onehot[label] = 1.0
        d_a3 = d_a3 + lam * (gamma - onehot)
    grads["enh_W3"] += np.outer(d_a3, cache["h2"])
    grads["enh_b3"] += d_a3
    d_h2 = params["enh_W3"].T @ d_a3
    d_a2 = d_h2 * (cache["a2"] > 0)
    grads["enh_W2"] += np.outer(d_a2, cache["h1"])
    grads["enh_b2"] += d_a2
    d_h1 = params["enh_W2"].T @ d_a2
    d_a1 = d_h1 * (cache["a1"] > 0)
    grads["enh_W1"] += np.outer(d_a1, cache["pooled"])
    grads["enh_b1"] += d_a1
    return params["enh_W1"].T @ d_a1
