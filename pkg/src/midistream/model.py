"""Decoder-only transformer (GPT-2 layout) in numpy, with KV-cached decoding.

Pre-layernorm blocks, tanh-approximated GELU, learned positional embeddings,
tied input/output embeddings by default.  All math is float32.  Weights live
in a flat name -> tensor store backed by a raw float32 blob (``.wtm``) plus a
JSON manifest (``.wtm.json``) so any language can read them.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .vocab import DEFAULT_VOCAB


class ContextOverflow(RuntimeError):
    """More positions requested than the model context holds."""


class WeightError(RuntimeError):
    pass


class MissingTensor(WeightError):
    """A tensor the configuration requires is absent from the store."""


class ShapeMismatch(WeightError):
    """A tensor is present but has the wrong shape."""


class CorruptFile(WeightError):
    """Weight container failed structural validation before tensor checks."""


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    n_heads: int
    d_model: int
    d_ff: int = 0  # 0 = use the GPT-2 ratio 4*d_model
    context_len: int = 1024
    vocab_size: int = DEFAULT_VOCAB.vocab_size
    layernorm_eps: float = 1e-5
    tie_embeddings: bool = True

    def __post_init__(self):
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_model": self.d_model,
            "d_ff": self.d_ff,
            "context_len": self.context_len,
            "vocab_size": self.vocab_size,
            "layernorm_eps": self.layernorm_eps,
            "tie_embeddings": self.tie_embeddings,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})


# GPT-2 small/medium shapes; "toy" is the desk-scale preset every test uses.
PRESETS = {
    "toy": dict(n_layers=2, n_heads=4, d_model=64),
    "small": dict(n_layers=12, n_heads=12, d_model=768),
    "medium": dict(n_layers=24, n_heads=16, d_model=1024),
}


def preset_config(name: str, **overrides) -> ModelConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ModelConfig(**{**PRESETS[name], **overrides})


def required_tensors(config: ModelConfig) -> "dict[str, tuple[int, ...]]":
    """Tensor name -> shape for everything the forward pass touches."""
    d, f = config.d_model, config.d_ff
    shapes = {
        "tok_emb": (config.vocab_size, d),
        "pos_emb": (config.context_len, d),
    }
    for i in range(config.n_layers):
        p = f"layers.{i}."
        shapes[p + "ln1.g"] = (d,)
        shapes[p + "ln1.b"] = (d,)
        shapes[p + "attn.w_qkv"] = (d, 3 * d)
        shapes[p + "attn.b_qkv"] = (3 * d,)
        shapes[p + "attn.w_out"] = (d, d)
        shapes[p + "attn.b_out"] = (d,)
        shapes[p + "ln2.g"] = (d,)
        shapes[p + "ln2.b"] = (d,)
        shapes[p + "mlp.w_in"] = (d, f)
        shapes[p + "mlp.b_in"] = (f,)
        shapes[p + "mlp.w_out"] = (f, d)
        shapes[p + "mlp.b_out"] = (d,)
    shapes["ln_f.g"] = (d,)
    shapes["ln_f.b"] = (d,)
    if not config.tie_embeddings:
        shapes["lm_head"] = (config.vocab_size, d)
    return shapes


class WeightStore:
    """Immutable named-tensor container, validated against a ModelConfig."""

    def __init__(self, config: ModelConfig, tensors: "dict[str, np.ndarray]"):
        expected = required_tensors(config)
        checked = {}
        for name, shape in expected.items():
            if name not in tensors:
                raise MissingTensor(f"weight store is missing tensor {name!r}")
            arr = np.asarray(tensors[name], dtype=np.float32)
            if arr.shape != shape:
                raise ShapeMismatch(f"tensor {name!r} has shape {arr.shape}, expected {shape}")
            checked[name] = arr
        self.config = config
        self.tensors = checked

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    @property
    def lm_head(self) -> np.ndarray:
        """Output projection rows: the tied token embedding unless untied."""
        return self["tok_emb"] if self.config.tie_embeddings else self["lm_head"]


def init_random(config: ModelConfig, seed: int) -> WeightStore:
    """Fresh weights: N(0, 0.02) matrices, zero biases, unit layernorm gains."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in required_tensors(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            tensors[name] = np.ones(shape, dtype=np.float32)
        elif leaf.startswith("b"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        else:
            tensors[name] = rng.normal(0.0, 0.02, size=shape).astype(np.float32)
    return WeightStore(config, tensors)


# ---------------------------------------------------------------------------
# weight container: `path.wtm` raw little-endian float32 blob,
# `path.wtm.json` manifest {format, config, tensors: {name: {shape, dtype, offset}}}

WTM_FORMAT = "wtm-v1"


def save_weights(store: WeightStore, path: str) -> None:
    manifest = {"format": WTM_FORMAT, "config": store.config.to_dict(), "tensors": {}}
    offset = 0
    chunks = []
    for name in sorted(store.tensors):
        arr = np.ascontiguousarray(store.tensors[name], dtype="<f4")
        manifest["tensors"][name] = {
            "shape": list(arr.shape),
            "dtype": "float32",
            "offset": offset,
        }
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))
    with open(path + ".json", "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_weights(path: str) -> WeightStore:
    manifest_path = path + ".json"
    if not os.path.exists(manifest_path):
        raise CorruptFile(f"no manifest at {manifest_path}")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as err:
        raise CorruptFile(f"manifest is not valid JSON: {err}") from err
    if manifest.get("format") != WTM_FORMAT:
        raise CorruptFile(f"unknown container format {manifest.get('format')!r}")
    if "config" not in manifest or "tensors" not in manifest:
        raise CorruptFile("manifest lacks config/tensors sections")
    try:
        config = ModelConfig.from_dict(manifest["config"])
    except (TypeError, ValueError) as err:
        raise CorruptFile(f"bad model config in manifest: {err}") from err

    with open(path, "rb") as fh:
        blob = fh.read()
    tensors = {}
    for name, meta in manifest["tensors"].items():
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = meta["offset"] + 4 * count
        if meta.get("dtype", "float32") != "float32":
            raise CorruptFile(f"tensor {name!r} has unsupported dtype {meta.get('dtype')!r}")
        if end > len(blob):
            raise CorruptFile(f"blob too short for tensor {name!r} ({end} > {len(blob)} bytes)")
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=count, offset=meta["offset"]).reshape(shape)
    return WeightStore(config, tensors)


# ---------------------------------------------------------------------------
# forward pass

_debug_checks = False


def set_debug_checks(flag: bool) -> None:
    """Enable internal assertions (attention softmax normalization)."""
    global _debug_checks
    _debug_checks = bool(flag)


_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    # tanh approximation, GPT-2 convention
    return 0.5 * x * (1.0 + np.tanh(_SQRT_2_OVER_PI * (x + 0.044715 * x * x * x)))


def layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray, eps: float) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * g + b


def _softmax_last(x: np.ndarray) -> np.ndarray:
    x = x - x.max(axis=-1, keepdims=True)
    e = np.exp(x)
    p = e / e.sum(axis=-1, keepdims=True)
    if _debug_checks:
        assert np.allclose(p.sum(axis=-1), 1.0, atol=1e-5), "attention rows not normalized"
    return p


class KVCache:
    """Per-layer key/value history for incremental decoding.  Single-owner."""

    def __init__(self, config: ModelConfig):
        self.config = config
        shape = (config.n_layers, config.context_len, config.n_heads, config.d_head)
        self.k = np.zeros(shape, dtype=np.float32)
        self.v = np.zeros(shape, dtype=np.float32)
        self.length = 0

    def reset(self) -> None:
        self.length = 0


def _block_batch(x, w, layer, cache, start):
    """One transformer block over a (T, d_model) slab, filling the cache."""
    cfg = w.config
    T = x.shape[0]
    H, Dh = cfg.n_heads, cfg.d_head
    p = f"layers.{layer}."

    h = layer_norm(x, w[p + "ln1.g"], w[p + "ln1.b"], cfg.layernorm_eps)
    qkv = h @ w[p + "attn.w_qkv"] + w[p + "attn.b_qkv"]
    q, k, v = np.split(qkv, 3, axis=-1)
    q = q.reshape(T, H, Dh)
    cache.k[layer, start : start + T] = k.reshape(T, H, Dh)
    cache.v[layer, start : start + T] = v.reshape(T, H, Dh)

    S = start + T
    k_all = cache.k[layer, :S]  # (S, H, Dh)
    v_all = cache.v[layer, :S]
    # (H, T, S) attention scores; row i may see cache positions <= start+i
    scores = np.einsum("thd,shd->hts", q, k_all) / math.sqrt(Dh)
    cols = np.arange(S)
    mask = cols[None, :] > (start + np.arange(T))[:, None]
    scores = np.where(mask[None, :, :], np.float32(-1e30), scores)
    probs = _softmax_last(scores)
    ctx = np.einsum("hts,shd->thd", probs, v_all).reshape(T, cfg.d_model)
    x = x + ctx @ w[p + "attn.w_out"] + w[p + "attn.b_out"]

    h = layer_norm(x, w[p + "ln2.g"], w[p + "ln2.b"], cfg.layernorm_eps)
    x = x + gelu(h @ w[p + "mlp.w_in"] + w[p + "mlp.b_in"]) @ w[p + "mlp.w_out"] + w[p + "mlp.b_out"]
    return x


def _hidden_full(tokens, weights: WeightStore, cache: KVCache) -> np.ndarray:
    """Final-layernormed hidden states for a token slab, advancing the cache."""
    cfg = weights.config
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or tokens.size == 0:
        raise ValueError("tokens must be a non-empty 1-D sequence")
    start = cache.length
    if start + tokens.size > cfg.context_len:
        raise ContextOverflow(
            f"{start}+{tokens.size} positions exceed context_len {cfg.context_len}"
        )
    x = weights["tok_emb"][tokens] + weights["pos_emb"][start : start + tokens.size]
    for layer in range(cfg.n_layers):
        x = _block_batch(x, weights, layer, cache, start)
    cache.length = start + tokens.size
    return layer_norm(x, weights["ln_f.g"], weights["ln_f.b"], cfg.layernorm_eps)


def forward_full(tokens, weights: WeightStore, cache: "KVCache | None" = None) -> np.ndarray:
    """Causal forward over a whole sequence -> (len, vocab_size) logits.

    Pass a cache to keep the keys/values for incremental continuation
    (prefill); otherwise a throwaway cache is used.
    """
    if cache is None:
        cache = KVCache(weights.config)
    hidden = _hidden_full(tokens, weights, cache)
    return hidden @ weights.lm_head.T


def forward_step(token: int, cache: KVCache, weights: WeightStore) -> np.ndarray:
    """Append one token -> (vocab_size,) logits for the next position."""
    cfg = weights.config
    pos = cache.length
    if pos >= cfg.context_len:
        raise ContextOverflow(f"cache is full at context_len {cfg.context_len}")
    H, Dh = cfg.n_heads, cfg.d_head

    x = weights["tok_emb"][token] + weights["pos_emb"][pos]
    for layer in range(cfg.n_layers):
        p = f"layers.{layer}."
        h = layer_norm(x, weights[p + "ln1.g"], weights[p + "ln1.b"], cfg.layernorm_eps)
        qkv = h @ weights[p + "attn.w_qkv"] + weights[p + "attn.b_qkv"]
        q, k, v = np.split(qkv, 3)
        cache.k[layer, pos] = k.reshape(H, Dh)
        cache.v[layer, pos] = v.reshape(H, Dh)

        S = pos + 1
        q = q.reshape(H, Dh)
        scores = np.einsum("hd,shd->hs", q, cache.k[layer, :S]) / math.sqrt(Dh)
        probs = _softmax_last(scores)
        ctx = np.einsum("hs,shd->hd", probs, cache.v[layer, :S]).reshape(cfg.d_model)
        x = x + ctx @ weights[p + "attn.w_out"] + weights[p + "attn.b_out"]

        h = layer_norm(x, weights[p + "ln2.g"], weights[p + "ln2.b"], cfg.layernorm_eps)
        x = x + gelu(h @ weights[p + "mlp.w_in"] + weights[p + "mlp.b_in"]) @ weights[p + "mlp.w_out"] + weights[p + "mlp.b_out"]

    cache.length = pos + 1
    hidden = layer_norm(x, weights["ln_f.g"], weights["ln_f.b"], cfg.layernorm_eps)
    return weights.lm_head @ hidden


class Model:
    """A weight store paired with its own cache: the unit one stream owns."""

    def __init__(self, weights: WeightStore):
        self.weights = weights
        self.config = weights.config
        self.cache = KVCache(weights.config)

    @property
    def position(self) -> int:
        return self.cache.length

    def reset(self) -> None:
        self.cache.reset()

    def prefill(self, tokens) -> np.ndarray:
        """Consume a token slab, return logits for the final position only."""
        hidden = _hidden_full(tokens, self.weights, self.cache)
        return self.weights.lm_head @ hidden[-1]

    def step(self, token: int) -> np.ndarray:
        return forward_step(token, self.cache, self.weights)
