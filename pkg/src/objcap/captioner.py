"""Attention GRU decoder over fused graph nodes.

Two-layer GRU with additive temporal attention: at each word step the
previous top-layer state scores every graph node, the softmax-weighted
context is concatenated with the previous word's embedding as the GRU
input, and the top state is projected to vocabulary logits. Forward and
backward passes are written out by hand (float64 throughout) so the full
loss gradient can be verified against finite differences.

Gate convention (normative for all tests):
    r = sigmoid(Wr x + Ur z + br)
    u = sigmoid(Wu x + Uu z + bu)
    n = tanh(Wn x + bn + r * (Un z))
    z' = (1 - u) * n + u * z
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import BOS, EOS, PAD, Caption, Vocabulary

NUM_LAYERS = 2

# scale used by the published system; the toy defaults live in TrainConfig
PAPER_EMBED_DIM = 512
PAPER_HIDDEN_DIM = 1024
PAPER_ATTN_DIM = 256


def init_decoder(vocab_size: int, node_dim: int, embed_dim: int = 64,
                 hidden_dim: int = 128, attn_dim: int = 64,
                 rng: np.random.Generator | None = None,
                 scale: float = 0.1) -> dict[str, np.ndarray]:
    rng = rng or np.random.default_rng(0)
    p = {"emb": scale * rng.standard_normal((vocab_size, embed_dim))}
    p["emb"][PAD] = 0.0  # PAD row stays frozen at zero
    x_dim = embed_dim + attn_dim
    for layer in range(NUM_LAYERS):
        in_dim = x_dim if layer == 0 else hidden_dim
        for gate in ("r", "u", "n"):
            p[f"W{gate}{layer}"] = scale * rng.standard_normal((hidden_dim, in_dim))
            p[f"U{gate}{layer}"] = scale * rng.standard_normal((hidden_dim, hidden_dim))
            p[f"b{gate}{layer}"] = np.zeros(hidden_dim)
    p["Wa"] = scale * rng.standard_normal((attn_dim, node_dim))
    p["Ua"] = scale * rng.standard_normal((attn_dim, hidden_dim))
    p["wa"] = scale * rng.standard_normal(attn_dim)
    p["Wo"] = scale * rng.standard_normal((vocab_size, hidden_dim))
    p["bo"] = np.zeros(vocab_size)
    return p


def dims_of(params: dict) -> dict:
    return {
        "vocab_size": params["emb"].shape[0],
        "embed_dim": params["emb"].shape[1],
        "hidden_dim": params["Ua"].shape[1],
        "attn_dim": params["wa"].shape[0],
        "node_dim": params["Wa"].shape[1],
    }


@dataclass
class DecoderState:
    """Per-layer hidden vectors."""
    z: list[np.ndarray]

    @classmethod
    def zeros(cls, hidden_dim: int) -> "DecoderState":
        return cls(z=[np.zeros(hidden_dim) for _ in range(NUM_LAYERS)])

    @property
    def top(self) -> np.ndarray:
        return self.z[-1]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def attend(H: np.ndarray, z_top: np.ndarray, params: dict,
           P: np.ndarray | None = None):
    """Additive attention over nodes.

    e_t = wa . tanh(P_t + Ua z_top), alpha = softmax(e),
    context = sum_t alpha_t P_t, where P_t = Wa H_t (precomputable).
    Returns (context, alpha, cache).
    """
    if P is None:
        P = H @ params["Wa"].T
    q = params["Ua"] @ z_top
    th = np.tanh(P + q)
    e = th @ params["wa"]
    e = e - e.max()
    alpha = np.exp(e)
    alpha /= alpha.sum()
    context = alpha @ P
    cache = {"P": P, "th": th, "alpha": alpha, "z_top": z_top}
    return context, alpha, cache


def gru_cell_forward(x: np.ndarray, z_prev: np.ndarray, params: dict,
                     layer: int):
    l = layer
    r = _sigmoid(params[f"Wr{l}"] @ x + params[f"Ur{l}"] @ z_prev + params[f"br{l}"])
    u = _sigmoid(params[f"Wu{l}"] @ x + params[f"Uu{l}"] @ z_prev + params[f"bu{l}"])
    unz = params[f"Un{l}"] @ z_prev
    n = np.tanh(params[f"Wn{l}"] @ x + params[f"bn{l}"] + r * unz)
    z_new = (1.0 - u) * n + u * z_prev
    cache = {"x": x, "z_prev": z_prev, "r": r, "u": u, "n": n, "unz": unz}
    return z_new, cache


def gru_cell_backward(d_z: np.ndarray, cache: dict, params: dict, layer: int,
                      grads: dict):
    """Returns (d_x, d_z_prev); accumulates parameter grads."""
    l = layer
    x, z_prev = cache["x"], cache["z_prev"]
    r, u, n, unz = cache["r"], cache["u"], cache["n"], cache["unz"]
    d_n = d_z * (1.0 - u)
    d_u = d_z * (z_prev - n)
    d_z_prev = d_z * u
    d_an = d_n * (1.0 - n * n)
    grads[f"Wn{l}"] += np.outer(d_an, x)
    grads[f"bn{l}"] += d_an
    d_r = d_an * unz
    grads[f"Un{l}"] += np.outer(d_an * r, z_prev)
    d_z_prev = d_z_prev + params[f"Un{l}"].T @ (d_an * r)
    d_x = params[f"Wn{l}"].T @ d_an
    d_au = d_u * u * (1.0 - u)
    grads[f"Wu{l}"] += np.outer(d_au, x)
    grads[f"Uu{l}"] += np.outer(d_au, z_prev)
    grads[f"bu{l}"] += d_au
    d_x += params[f"Wu{l}"].T @ d_au
    d_z_prev += params[f"Uu{l}"].T @ d_au
    d_ar = d_r * r * (1.0 - r)
    grads[f"Wr{l}"] += np.outer(d_ar, x)
    grads[f"Ur{l}"] += np.outer(d_ar, z_prev)
    grads[f"br{l}"] += d_ar
    d_x += params[f"Wr{l}"].T @ d_ar
    d_z_prev += params[f"Ur{l}"].T @ d_ar
    return d_x, d_z_prev


def gru_step(x: np.ndarray, state: DecoderState, params: dict) -> DecoderState:
    """Stacked GRU update; layer 2 consumes layer 1's output."""
    z = []
    inp = x
    for layer in range(NUM_LAYERS):
        z_new, _ = gru_cell_forward(inp, state.z[layer], params, layer)
        z.append(z_new)
        inp = z_new
    return DecoderState(z=z)


def decode_step(word_index: int, state: DecoderState, H: np.ndarray,
                params: dict, P: np.ndarray | None = None):
    """One teacher-forced / generation step: (logits, new_state, alpha)."""
    vocab_size = params["emb"].shape[0]
    if not 0 <= word_index < vocab_size:
        raise ValueError(f"word index {word_index} out of range 0..{vocab_size - 1}")
    context, alpha, _ = attend(H, state.top, params, P)
    x = np.concatenate([params["emb"][word_index], context])
    new_state = gru_step(x, state, params)
    logits = params["Wo"] @ new_state.top + params["bo"]
    return logits, new_state, alpha


def caption_loss(logits_seq, targets) -> float:
    """Negative log likelihood summed over non-PAD positions."""
    logits_seq = list(logits_seq)
    targets = list(targets)
    if len(logits_seq) != len(targets):
        raise ValueError("logits/targets length mismatch")
    total = 0.0
    for logits, t in zip(logits_seq, targets):
        if t == PAD:
            continue
        shifted = logits - logits.max()
        total += float(np.log(np.exp(shifted).sum()) - shifted[t])
    return total


def total_loss(l_cap: float, l_de: float, lam: float = 0.1) -> float:
    return l_cap + lam * l_de


def decode_forward(params: dict, H: np.ndarray, token_ids: list[int]):
    """Teacher-forced pass over one encoded caption.

    token_ids is the encoded sequence [BOS, w_1..w_K, EOS]; step k feeds
    token_ids[k] and is scored against token_ids[k+1]. Returns
    (loss, caches) where caches carry everything backward needs.
    """
    d = dims_of(params)
    P = H @ params["Wa"].T
    state = DecoderState.zeros(d["hidden_dim"])
    inputs = token_ids[:-1]
    targets = token_ids[1:]
    steps = []
    loss = 0.0
    for k, (w_in, w_tgt) in enumerate(zip(inputs, targets)):
        context, alpha, att_cache = attend(H, state.top, params, P)
        x = np.concatenate([params["emb"][w_in], context])
        layer_caches = []
        inp = x
        z = []
        for layer in range(NUM_LAYERS):
            z_new, c = gru_cell_forward(inp, state.z[layer], params, layer)
            layer_caches.append(c)
            z.append(z_new)
            inp = z_new
        state = DecoderState(z=z)
        logits = params["Wo"] @ state.top + params["bo"]
        if w_tgt != PAD:
            shifted = logits - logits.max()
            log_probs = shifted - np.log(np.exp(shifted).sum())
            loss += -float(log_probs[w_tgt])
            probs = np.exp(log_probs)
        else:
            probs = None
        steps.append({
            "w_in": w_in, "w_tgt": w_tgt, "att": att_cache,
            "gru": layer_caches, "z_top": state.top, "probs": probs,
            "logits": logits,
        })
    caches = {"steps": steps, "P": P, "H": H}
    return loss, caches


def decode_backward(params: dict, caches: dict, grads: dict) -> np.ndarray:
    """Backward through the teacher-forced pass; returns dLoss/dH."""
    steps = caches["steps"]
    P, H = caches["P"], caches["H"]
    d = dims_of(params)
    dP = np.zeros_like(P)
    d_z = [np.zeros(d["hidden_dim"]) for _ in range(NUM_LAYERS)]
    for step in reversed(steps):
        if step["probs"] is not None:
            d_logits = step["probs"].copy()
            d_logits[step["w_tgt"]] -= 1.0
            grads["Wo"] += np.outer(d_logits, step["z_top"])
            grads["bo"] += d_logits
            d_z[-1] = d_z[-1] + params["Wo"].T @ d_logits
        # stacked GRU backward, top layer first
        d_inp = None
        new_d_z = [None] * NUM_LAYERS
        for layer in reversed(range(NUM_LAYERS)):
            d_out = d_z[layer] if d_inp is None else d_z[layer] + d_inp
            d_inp, d_prev = gru_cell_backward(d_out, step["gru"][layer],
                                              params, layer, grads)
            new_d_z[layer] = d_prev
        d_x = d_inp
        d_emb_row = d_x[: d["embed_dim"]]
        if step["w_in"] != PAD:
            grads["emb"][step["w_in"]] += d_emb_row
        d_ctx = d_x[d["embed_dim"]:]
        # attention backward
        att = step["att"]
        alpha, th = att["alpha"], att["th"]
        d_alpha = P @ d_ctx
        dP += np.outer(alpha, d_ctx)
        d_e = alpha * (d_alpha - np.dot(alpha, d_alpha))
        grads["wa"] += th.T @ d_e
        d_arg = (d_e[:, None] * params["wa"][None, :]) * (1.0 - th * th)
        dP += d_arg
        d_q = d_arg.sum(axis=0)
        grads["Ua"] += np.outer(d_q, att["z_top"])
        new_d_z[-1] = new_d_z[-1] + params["Ua"].T @ d_q
        d_z = new_d_z
    grads["Wa"] += dP.T @ H
    return dP @ params["Wa"]


def generate(H: np.ndarray, params: dict, vocab: Vocabulary,
             mode: str = "greedy", beam_width: int = 3,
             max_len: int = 25) -> Caption:
    """Decode a caption from fused nodes; greedy or beam search.

    Beam search returns the completed hypothesis with the highest
    accumulated log-probability; ties break by earlier EOS, then
    lexicographic token order.
    """
    if mode == "greedy" or (mode == "beam" and beam_width == 1):
        return _greedy(H, params, vocab, max_len)
    if mode != "beam":
        raise ValueError(f"unknown decoding mode {mode!r}")
    return _beam(H, params, vocab, beam_width, max_len)


def _log_softmax(logits):
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def _tokens_to_caption(token_ids, vocab: Vocabulary) -> Caption:
    words = [vocab.word(i) for i in token_ids]
    return Caption(raw=" ".join(words), tokens=tuple(words))


def _greedy(H, params, vocab, max_len):
    d = dims_of(params)
    P = H @ params["Wa"].T
    state = DecoderState.zeros(d["hidden_dim"])
    token = BOS
    out = []
    for _ in range(max_len):
        logits, state, _ = decode_step(token, state, H, params, P)
        token = int(np.argmax(logits))
        if token == EOS:
            break
        out.append(token)
    return _tokens_to_caption(out, vocab)


def _beam(H, params, vocab, width, max_len):
    d = dims_of(params)
    P = H @ params["Wa"].T
    init = DecoderState.zeros(d["hidden_dim"])
    # live hypotheses: (logprob, tokens, state)
    live = [(0.0, (), init)]
    done = []  # (logprob, eos_step, tokens)
    for step in range(max_len + 1):
        if not live:
            break
        expanded = []
        for logprob, tokens, state in live:
            last = tokens[-1] if tokens else BOS
            logits, new_state, _ = decode_step(last, state, H, params, P)
            log_probs = _log_softmax(logits)
            order = np.argsort(-log_probs)[: width + 1]
            for tok in order:
                tok = int(tok)
                lp = logprob + float(log_probs[tok])
                if tok == EOS:
                    done.append((lp, step, tokens))
                elif len(tokens) < max_len:
                    expanded.append((lp, tokens + (tok,), new_state))
                else:
                    done.append((lp, max_len, tokens))
        expanded.sort(key=lambda h: -h[0])
        live = expanded[:width]
    if not done:
        done = [(lp, max_len, tokens) for lp, tokens, _ in live]
    words = {t: vocab.word(t) for _, _, toks in done for t in toks}
    done.sort(key=lambda h: (-h[0], h[1], tuple(words[t] for t in h[2])))
    return _tokens_to_caption(list(done[0][2]), vocab)
