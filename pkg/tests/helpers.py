"""Shared test utilities, including a naive numpy re-implementation of the
model forward pass used as an independent oracle."""

from __future__ import annotations

import numpy as np

from svfend.encoders import FeatureSequence, ModalityBundle, SequenceCaps

TINY_CAPS = SequenceCaps(text=4, audio=3, frames=3, clips=3, comments=3)
TINY_DIMS = {"text": 5, "audio": 4, "frame": 6, "clip": 6, "comment": 5, "user": 4}


def random_sequence(rng: np.random.Generator, length: int, valid: int, dim: int
                    ) -> FeatureSequence:
    values = np.zeros((length, dim), dtype=np.float32)
    values[:valid] = rng.normal(size=(valid, dim))
    mask = np.arange(length) < valid
    return FeatureSequence(values, mask, valid)


def random_bundle(rng: np.random.Generator, caps: SequenceCaps = TINY_CAPS,
                  dims: dict = TINY_DIMS, sample_id: str = "s0",
                  presence: dict | None = None) -> ModalityBundle:
    presence = presence or {m: True for m in
                            ("text", "audio", "frame", "clip", "comment", "user")}

    def seq(cap, dim, present):
        valid = int(rng.integers(1, cap + 1)) if present else 0
        return random_sequence(rng, cap, valid, dim)

    def vec(dim, present):
        return (rng.normal(size=dim).astype(np.float32) if present
                else np.zeros(dim, dtype=np.float32))

    return ModalityBundle(
        sample_id=sample_id,
        text=seq(caps.text, dims["text"], presence["text"]),
        audio=seq(caps.audio, dims["audio"], presence["audio"]),
        frames=seq(caps.frames, dims["frame"], presence["frame"]),
        clip_vec=vec(dims["clip"], presence["clip"]),
        comment_vec=vec(dims["comment"], presence["comment"]),
        user_vec=vec(dims["user"], presence["user"]),
        presence=dict(presence),
    )


# --- naive forward oracle ---------------------------------------------------

def _linear(x, state, name):
    return x @ state[f"{name}.weight"].T + state[f"{name}.bias"]


def _layer_norm(x, state, name, eps=1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * state[f"{name}.weight"] + state[f"{name}.bias"]


def _relu(x):
    return np.maximum(x, 0.0)


def _attention(state, prefix, query, keyvalue, kv_mask, heads):
    """Explicit per-head attention over one (unbatched) sequence pair."""
    q = _linear(query, state, f"{prefix}.wq")
    k = _linear(keyvalue, state, f"{prefix}.wk")
    v = _linear(keyvalue, state, f"{prefix}.wv")
    tq, hidden = q.shape
    head_dim = hidden // heads
    context = np.zeros((tq, hidden))
    for h in range(heads):
        sl = slice(h * head_dim, (h + 1) * head_dim)
        qh, kh, vh = q[:, sl], k[:, sl], v[:, sl]
        for i in range(tq):
            scores = np.array([qh[i] @ kh[j] / np.sqrt(head_dim)
                               for j in range(kh.shape[0])])
            scores[~kv_mask] = -1e9
            weights = np.exp(scores - scores.max())
            weights /= weights.sum()
            context[i, sl] = sum(weights[j] * vh[j] for j in range(kh.shape[0]))
    out = _linear(context, state, f"{prefix}.wo")
    if not kv_mask.any():
        out = np.zeros_like(out)
    return out


def _feed_forward(state, prefix, x):
    return _linear(_relu(_linear(x, state, f"{prefix}.0")), state, f"{prefix}.2")


def _coattention(state, prefix, h_a, mask_a, h_b, mask_b, heads):
    a = _layer_norm(h_a + _attention(state, f"{prefix}.attn_a", h_a, h_b, mask_b, heads),
                    state, f"{prefix}.norm_a1")
    a = _layer_norm(a + _feed_forward(state, f"{prefix}.ff_a", a), state, f"{prefix}.norm_a2")
    b = _layer_norm(h_b + _attention(state, f"{prefix}.attn_b", h_b, h_a, mask_a, heads),
                    state, f"{prefix}.norm_b1")
    b = _layer_norm(b + _feed_forward(state, f"{prefix}.ff_b", b), state, f"{prefix}.norm_b2")
    return a, b


def _masked_mean(values, mask):
    if not mask.any():
        return np.zeros(values.shape[1])
    return values[mask].mean(axis=0)


def _softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def numpy_forward(state: dict, config, bundle: ModalityBundle) -> np.ndarray:
    """Stage-by-stage single-sample forward pass with explicit loops."""
    state = {k: np.asarray(v, dtype=np.float64) for k, v in state.items()}

    projected = {}
    for key, seq in (("text", bundle.text), ("audio", bundle.audio),
                     ("frame", bundle.frames)):
        x = _linear(seq.values.astype(np.float64), state, f"proj.{key}")
        x = x * seq.mask[:, None]
        projected[key] = x
    vectors = {}
    for key, vec in (("clip", bundle.clip_vec), ("comment", bundle.comment_vec),
                     ("user", bundle.user_vec)):
        x = _linear(vec.astype(np.float64), state, f"proj.{key}")
        vectors[key] = x * float(bundle.presence[key])

    tm, am, fm = bundle.text.mask, bundle.audio.mask, bundle.frames.mask
    t1, a1 = _coattention(state, "text_audio", projected["text"], tm,
                          projected["audio"], am, config.coattn_heads)
    t2, f1 = _coattention(state, "text_frame", t1, tm,
                          projected["frame"], fm, config.coattn_heads)

    x_t = _masked_mean(t2, tm)
    x_a = _masked_mean(a1, am)
    x_i = _masked_mean(f1, fm)

    slots = np.stack([x_t, x_a, x_i, vectors["clip"], vectors["comment"],
                      vectors["user"]])
    all_valid = np.ones(slots.shape[0], dtype=bool)
    h = _layer_norm(slots + _attention(state, "fusion.attn", slots, slots, all_valid,
                                       config.fusion_heads),
                    state, "fusion.norm1")
    fused = _layer_norm(h + _feed_forward(state, "fusion.ff", h), state, "fusion.norm2")
    x_m = fused.mean(axis=0)
    return _softmax(_linear(x_m, state, "classifier"))
