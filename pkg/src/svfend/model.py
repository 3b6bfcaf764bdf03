"""SV-FEND: co-attention fusion network for fake news short-video classification.

Pipeline: project the six modality inputs to a shared hidden size, run a
text/audio co-attention block, feed the audio-enhanced text into a second
co-attention block against the keyframes, average each enhanced sequence over
valid steps, fuse the six resulting vectors with one self-attention layer, and
classify the mean of the fused slots with a softmax head.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .encoders import ModalityBundle, SequenceCaps

LOSS_EPS = 1e-7


class ModelError(RuntimeError):
    """Configuration error or a non-finite intermediate during the forward pass."""


@dataclass
class ModelConfig:
    """Architecture hyperparameters; defaults match the reference configuration."""

    hidden_dim: int = 128
    coattn_heads: int = 4
    fusion_heads: int = 2
    dropout: float = 0.1
    text_dim: int = 768
    audio_dim: int = 128
    frame_dim: int = 4096
    clip_dim: int = 4096
    comment_dim: int = 768
    user_dim: int = 768
    ff_expansion: int = 4
    use_positional_encoding: bool = False
    caps: SequenceCaps = field(default_factory=SequenceCaps)

    def __post_init__(self):
        if self.hidden_dim % self.coattn_heads != 0 or self.hidden_dim % self.fusion_heads != 0:
            raise ModelError("hidden_dim must be divisible by both head counts")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        data = dict(data)
        if isinstance(data.get("caps"), dict):
            data["caps"] = SequenceCaps(**data["caps"])
        return cls(**data)


class MaskedAttention(nn.Module):
    """Multi-head attention assigning exactly zero weight to masked key positions.

    Masked scores are filled with -1e9, which underflows to a zero softmax
    weight while keeping the all-keys-masked case finite; in that case the
    attention output is zeroed so the residual path alone carries through.
    """

    def __init__(self, hidden: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.wq = nn.Linear(hidden, hidden)
        self.wk = nn.Linear(hidden, hidden)
        self.wv = nn.Linear(hidden, hidden)
        self.wo = nn.Linear(hidden, hidden)

    def forward(self, query: torch.Tensor, keyvalue: torch.Tensor,
                kv_mask: torch.Tensor) -> torch.Tensor:
        b, tq, hidden = query.shape
        tk = keyvalue.shape[1]
        q = self.wq(query).view(b, tq, self.heads, self.head_dim).transpose(1, 2)
        k = self.wk(keyvalue).view(b, tk, self.heads, self.head_dim).transpose(1, 2)
        v = self.wv(keyvalue).view(b, tk, self.heads, self.head_dim).transpose(1, 2)
        scores = (q @ k.transpose(-1, -2)) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~kv_mask[:, None, None, :], -1e9)
        weights = torch.softmax(scores, dim=-1)
        context = (weights @ v).transpose(1, 2).reshape(b, tq, hidden)
        out = self.wo(context)
        any_valid = kv_mask.any(dim=-1).to(out.dtype)
        return out * any_valid[:, None, None]


class _FeedForward(nn.Sequential):
    def __init__(self, hidden: int, expansion: int):
        super().__init__(
            nn.Linear(hidden, expansion * hidden),
            nn.ReLU(),
            nn.Linear(expansion * hidden, hidden),
        )


class CoAttentionBlock(nn.Module):
    """Two-stream cross-modal transformer: each stream's queries attend to the other."""

    def __init__(self, hidden: int, heads: int, dropout: float, ff_expansion: int):
        super().__init__()
        self.attn_a = MaskedAttention(hidden, heads)
        self.attn_b = MaskedAttention(hidden, heads)
        self.norm_a1 = nn.LayerNorm(hidden)
        self.norm_a2 = nn.LayerNorm(hidden)
        self.norm_b1 = nn.LayerNorm(hidden)
        self.norm_b2 = nn.LayerNorm(hidden)
        self.ff_a = _FeedForward(hidden, ff_expansion)
        self.ff_b = _FeedForward(hidden, ff_expansion)
        self.drop = nn.Dropout(dropout)

    def forward(self, h_a, mask_a, h_b, mask_b):
        a = self.norm_a1(h_a + self.drop(self.attn_a(h_a, h_b, mask_b)))
        a = self.norm_a2(a + self.drop(self.ff_a(a)))
        b = self.norm_b1(h_b + self.drop(self.attn_b(h_b, h_a, mask_a)))
        b = self.norm_b2(b + self.drop(self.ff_b(b)))
        return a, b


class FusionLayer(nn.Module):
    """Standard self-attention transformer layer over the six modality slots."""

    def __init__(self, hidden: int, heads: int, dropout: float, ff_expansion: int):
        super().__init__()
        self.attn = MaskedAttention(hidden, heads)
        self.norm1 = nn.LayerNorm(hidden)
        self.norm2 = nn.LayerNorm(hidden)
        self.ff = _FeedForward(hidden, ff_expansion)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        mask = torch.ones(x.shape[:2], dtype=torch.bool, device=x.device)
        h = self.norm1(x + self.drop(self.attn(x, x, mask)))
        return self.norm2(h + self.drop(self.ff(h)))


def sinusoidal_encoding(length: int, dim: int, dtype=torch.float32) -> torch.Tensor:
    position = torch.arange(length, dtype=dtype)[:, None]
    div = torch.exp(torch.arange(0, dim, 2, dtype=dtype) * (-math.log(10_000.0) / dim))
    pe = torch.zeros(length, dim, dtype=dtype)
    pe[:, 0::2] = torch.sin(position * div)
    pe[:, 1::2] = torch.cos(position * div[: dim // 2])
    return pe


def masked_mean(values: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean over mask-true steps of [B, T, H]; all-false rows yield zeros."""
    m = mask.to(values.dtype)
    total = (values * m[..., None]).sum(dim=1)
    count = m.sum(dim=1).clamp(min=1.0)
    mean = total / count[..., None]
    return mean * mask.any(dim=1).to(values.dtype)[..., None]


class SVFEND(nn.Module):
    """Co-attention multimodal classifier; forward returns class probabilities."""

    _SEQ_KEYS = ("text", "audio", "frame")
    _VEC_KEYS = ("clip", "comment", "user")

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        h = config.hidden_dim
        self.proj = nn.ModuleDict({
            "text": nn.Linear(config.text_dim, h),
            "audio": nn.Linear(config.audio_dim, h),
            "frame": nn.Linear(config.frame_dim, h),
            "clip": nn.Linear(config.clip_dim, h),
            "comment": nn.Linear(config.comment_dim, h),
            "user": nn.Linear(config.user_dim, h),
        })
        self.text_audio = CoAttentionBlock(h, config.coattn_heads, config.dropout,
                                           config.ff_expansion)
        self.text_frame = CoAttentionBlock(h, config.coattn_heads, config.dropout,
                                           config.ff_expansion)
        self.fusion = FusionLayer(h, config.fusion_heads, config.dropout,
                                  config.ff_expansion)
        self.classifier = nn.Linear(h, 2)

    @staticmethod
    def _check_finite(tensor: torch.Tensor, stage: str) -> None:
        if not torch.isfinite(tensor).all():
            raise ModelError(f"non-finite values at stage: {stage}")

    def forward(self, batch: dict) -> torch.Tensor:
        cfg = self.config
        seqs = {}
        for key in self._SEQ_KEYS:
            mask = batch[f"{key}_mask"]
            x = self.proj[key](batch[key])
            if cfg.use_positional_encoding:
                x = x + sinusoidal_encoding(x.shape[1], cfg.hidden_dim,
                                            dtype=x.dtype).to(x.device)
            # padded rows stay exactly zero regardless of projection bias
            x = x * mask[..., None].to(x.dtype)
            seqs[key] = x
        vecs = {}
        for key in self._VEC_KEYS:
            x = self.proj[key](batch[f"{key}_vec"])
            x = x * batch[f"{key}_present"][..., None].to(x.dtype)
            vecs[key] = x
        for key, tensor in {**seqs, **vecs}.items():
            self._check_finite(tensor, f"project[{key}]")

        text_mask, audio_mask, frame_mask = (batch[f"{k}_mask"] for k in self._SEQ_KEYS)
        t1, a1 = self.text_audio(seqs["text"], text_mask, seqs["audio"], audio_mask)
        self._check_finite(t1, "coattention_text_audio")
        t2, f1 = self.text_frame(t1, text_mask, seqs["frame"], frame_mask)
        self._check_finite(t2, "coattention_text_frame")

        x_t = masked_mean(t2, text_mask)
        x_a = masked_mean(a1, audio_mask)
        x_i = masked_mean(f1, frame_mask)
        self._check_finite(torch.stack([x_t, x_a, x_i]), "temporal_mean")

        slots = torch.stack([x_t, x_a, x_i, vecs["clip"], vecs["comment"], vecs["user"]],
                            dim=1)
        fused = self.fusion(slots)
        self._check_finite(fused, "fusion")
        x_m = fused.mean(dim=1)
        probs = torch.softmax(self.classifier(x_m), dim=-1)
        self._check_finite(probs, "classify")
        return probs


def bce_loss(p: torch.Tensor, y) -> torch.Tensor:
    """Binary cross-entropy on [p_real, p_fake]; probabilities clamped to avoid log(0)."""
    p = torch.clamp(p, LOSS_EPS, 1.0 - LOSS_EPS)
    y = torch.as_tensor(y, dtype=p.dtype, device=p.device)
    per_sample = -((1.0 - y) * torch.log(p[..., 0]) + y * torch.log(p[..., 1]))
    return per_sample.mean()


def predict_label(p) -> np.ndarray | int:
    """Argmax with ties resolved to the real (0) class."""
    arr = p.detach().cpu().numpy() if isinstance(p, torch.Tensor) else np.asarray(p)
    labels = (arr[..., 1] > arr[..., 0]).astype(int)
    return labels if labels.ndim else int(labels)


def collate_bundles(bundles: list[ModalityBundle], dtype=torch.float32) -> dict:
    """Stack bundles into the batch-dict the model consumes."""
    def stack(values, np_dtype=np.float32):
        return torch.as_tensor(np.stack(values).astype(np_dtype, copy=False))

    batch = {}
    for key, attr in (("text", "text"), ("audio", "audio"), ("frame", "frames")):
        batch[key] = stack([getattr(b, attr).values for b in bundles]).to(dtype)
        batch[f"{key}_mask"] = torch.as_tensor(
            np.stack([getattr(b, attr).mask for b in bundles]))
    for key, attr in (("clip", "clip_vec"), ("comment", "comment_vec"), ("user", "user_vec")):
        batch[f"{key}_vec"] = stack([getattr(b, attr) for b in bundles]).to(dtype)
        batch[f"{key}_present"] = torch.as_tensor(
            np.array([b.presence.get(key, True) for b in bundles], dtype=bool))
    return batch


def config_for_bundle(bundle: ModalityBundle, **overrides) -> ModelConfig:
    """A ModelConfig whose input dims match an already-built bundle."""
    params = dict(
        text_dim=bundle.text.dim,
        audio_dim=bundle.audio.dim,
        frame_dim=bundle.frames.dim,
        clip_dim=len(bundle.clip_vec),
        comment_dim=len(bundle.comment_vec),
        user_dim=len(bundle.user_vec),
    )
    params.update(overrides)
    return ModelConfig(**params)


def save_checkpoint(model: SVFEND, path: str | Path) -> None:
    """Flat name->f32 array checkpoint (.npz) with the config as a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {name: t.detach().cpu().numpy().astype(np.float32)
              for name, t in model.state_dict().items()}
    with path.open("wb") as fh:
        np.savez(fh, **arrays)
    sidecar = path.with_suffix(".config.json")
    sidecar.write_text(json.dumps(model.config.to_dict(), indent=2, sort_keys=True),
                       encoding="utf-8")


def load_checkpoint(path: str | Path) -> SVFEND:
    path = Path(path)
    config = ModelConfig.from_dict(
        json.loads(path.with_suffix(".config.json").read_text(encoding="utf-8")))
    model = SVFEND(config)
    with np.load(path) as arrays:
        state = {name: torch.as_tensor(arrays[name]) for name in arrays.files}
    model.load_state_dict(state)
    return model
