"""Minimal decoder-only transformer with slice-friendly weights.

The model exists so vocabulary trimming can be measured without a real
LLM checkpoint. It is built so that trimming the vocabulary dimension
provably leaves every kept logit bit-identical: the output projection
reduces each row independently of all others, and no interior layer ever
sees the vocabulary dimension. Everything runs in float32.

Architecture: pre-norm blocks (LayerNorm -> causal multi-head attention
-> residual, LayerNorm -> GELU MLP with 4x expansion -> residual),
sinusoidal position encoding, a final LayerNorm, and a V x H output
projection that aliases the embedding when tied. Linear layers carry no
bias; LayerNorms carry weight and bias. Decoding recomputes the forward
pass per step (no KV cache), which keeps full and trimmed runs on the
exact same code path.
"""
from __future__ import annotations

import math
import struct
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import VtError
from .subvocab import SubVocabulary

MAGIC = b"VTLM"
FORMAT_VERSION = 1
_INIT_STD = 0.02
_U32_MAX = 2**32 - 1


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    hidden: int
    layers: int
    heads: int
    max_context: int
    tied_embeddings: bool = True

    def __post_init__(self) -> None:
        for name in ("vocab_size", "hidden", "heads", "max_context"):
            value = getattr(self, name)
            if value < 1:
                raise VtError(f"{name} must be >= 1, got {value}")
            if value > _U32_MAX:
                raise VtError(f"{name} {value} exceeds the u32 format limit")
        if self.layers < 0:
            raise VtError(f"layers must be >= 0, got {self.layers}")
        if self.hidden % self.heads != 0:
            raise VtError(
                f"hidden ({self.hidden}) must be divisible by heads ({self.heads})"
            )


@dataclass
class BlockWeights:
    """One transformer block. Linear maps use the y = x @ W convention,
    so W has shape (in_features, out_features)."""

    ln1_w: np.ndarray
    ln1_b: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    ln2_w: np.ndarray
    ln2_b: np.ndarray
    w1: np.ndarray
    w2: np.ndarray


@dataclass
class ModelWeights:
    config: ModelConfig
    embedding: np.ndarray
    blocks: list[BlockWeights]
    lnf_w: np.ndarray
    lnf_b: np.ndarray
    output: np.ndarray | None = None  # None iff tied_embeddings
    _positions: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def output_matrix(self) -> np.ndarray:
        return self.embedding if self.config.tied_embeddings else self.output  # type: ignore[return-value]

    def positions(self) -> np.ndarray:
        # Parameter-free, so computed on demand and never serialized.
        if self._positions is None:
            self._positions = _sinusoidal_positions(
                self.config.max_context, self.config.hidden
            )
        return self._positions


def _sinusoidal_positions(max_context: int, hidden: int) -> np.ndarray:
    pos = np.arange(max_context, dtype=np.float64)[:, None]
    half = (hidden + 1) // 2
    freqs = np.exp(np.arange(half, dtype=np.float64) * (-2.0 * math.log(10000.0) / hidden))
    angles = pos * freqs[None, :]
    table = np.zeros((max_context, hidden), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles[:, : hidden // 2])
    return table.astype(np.float32)


def _tensor_specs(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Serialization order and expected shapes, derived from the config."""
    v, h = config.vocab_size, config.hidden
    specs: list[tuple[str, tuple[int, ...]]] = [("embedding", (v, h))]
    for i in range(config.layers):
        specs += [
            (f"block{i}.ln1_w", (h,)),
            (f"block{i}.ln1_b", (h,)),
            (f"block{i}.wq", (h, h)),
            (f"block{i}.wk", (h, h)),
            (f"block{i}.wv", (h, h)),
            (f"block{i}.wo", (h, h)),
            (f"block{i}.ln2_w", (h,)),
            (f"block{i}.ln2_b", (h,)),
            (f"block{i}.w1", (h, 4 * h)),
            (f"block{i}.w2", (4 * h, h)),
        ]
    specs += [("lnf_w", (h,)), ("lnf_b", (h,))]
    if not config.tied_embeddings:
        specs.append(("output", (v, h)))
    return specs


def count_params(config: ModelConfig) -> tuple[int, int]:
    """(vocabulary_params, total_params) from the serialized tensor shapes."""
    v, h, layers = config.vocab_size, config.hidden, config.layers
    vocab_params = v * h * (1 if config.tied_embeddings else 2)
    per_block = 4 * h * h + 8 * h * h + 4 * h  # attention + MLP + two norms
    return vocab_params, vocab_params + layers * per_block + 2 * h


def init_random(config: ModelConfig, seed: int) -> ModelWeights:
    """Deterministic weights from a seed.

    Uses numpy's default generator (PCG64). Matrix weights are drawn as
    N(0, 0.02) float32 in serialization order; LayerNorm weights are ones
    and biases zeros (not drawn). Identical (config, seed) pairs produce
    bit-identical weights.
    """
    rng = np.random.default_rng(seed)
    h = config.hidden

    def draw(*shape: int) -> np.ndarray:
        return rng.standard_normal(shape, dtype=np.float32) * np.float32(_INIT_STD)

    embedding = draw(config.vocab_size, h)
    blocks = []
    for _ in range(config.layers):
        blocks.append(
            BlockWeights(
                ln1_w=np.ones(h, dtype=np.float32),
                ln1_b=np.zeros(h, dtype=np.float32),
                wq=draw(h, h),
                wk=draw(h, h),
                wv=draw(h, h),
                wo=draw(h, h),
                ln2_w=np.ones(h, dtype=np.float32),
                ln2_b=np.zeros(h, dtype=np.float32),
                w1=draw(h, 4 * h),
                w2=draw(4 * h, h),
            )
        )
    output = None if config.tied_embeddings else draw(config.vocab_size, h)
    return ModelWeights(
        config=config,
        embedding=embedding,
        blocks=blocks,
        lnf_w=np.ones(h, dtype=np.float32),
        lnf_b=np.zeros(h, dtype=np.float32),
        output=output,
    )


def _named_tensors(model: ModelWeights) -> list[np.ndarray]:
    tensors = [model.embedding]
    for blk in model.blocks:
        tensors += [
            blk.ln1_w, blk.ln1_b, blk.wq, blk.wk, blk.wv, blk.wo,
            blk.ln2_w, blk.ln2_b, blk.w1, blk.w2,
        ]
    tensors += [model.lnf_w, model.lnf_b]
    if not model.config.tied_embeddings:
        tensors.append(model.output)  # type: ignore[arg-type]
    return tensors


def save_model(path: str, model: ModelWeights) -> None:
    """Write the documented binary format.

    Layout: magic "VTLM"; format version u32; vocab_size, hidden, layers,
    heads, max_context as little-endian u32; tied flag u8; then each
    tensor in the fixed order as rank u32, dims u32 each, raw float32
    little-endian data.
    """
    cfg = model.config
    specs = _tensor_specs(cfg)
    tensors = _named_tensors(model)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(
            struct.pack(
                "<IIIIIIB",
                FORMAT_VERSION,
                cfg.vocab_size,
                cfg.hidden,
                cfg.layers,
                cfg.heads,
                cfg.max_context,
                1 if cfg.tied_embeddings else 0,
            )
        )
        for (name, shape), arr in zip(specs, tensors):
            if tuple(arr.shape) != shape:
                raise VtError(f"tensor {name} has shape {arr.shape}, expected {shape}")
            data = np.ascontiguousarray(arr, dtype="<f4")
            f.write(struct.pack("<I", data.ndim))
            f.write(struct.pack(f"<{data.ndim}I", *data.shape))
            data.tofile(f)


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise VtError(f"model file truncated while reading {what}")
    return data


def load_model(path: str) -> ModelWeights:
    try:
        f = open(path, "rb")
    except FileNotFoundError:
        raise VtError(f"model file not found: {path}") from None
    with f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise VtError(f"{path} is not a model file (bad magic)")
        version, v, h, layers, heads, max_context, tied = struct.unpack(
            "<IIIIIIB", _read_exact(f, 25, "header")
        )
        if version != FORMAT_VERSION:
            raise VtError(f"unsupported format version {version}")
        config = ModelConfig(
            vocab_size=v,
            hidden=h,
            layers=layers,
            heads=heads,
            max_context=max_context,
            tied_embeddings=bool(tied),
        )
        arrays: list[np.ndarray] = []
        for name, shape in _tensor_specs(config):
            (rank,) = struct.unpack("<I", _read_exact(f, 4, f"{name} rank"))
            if rank != len(shape):
                raise VtError(f"tensor {name}: rank {rank}, expected {len(shape)}")
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, f"{name} dims"))
            if tuple(dims) != shape:
                raise VtError(f"tensor {name}: shape {dims}, expected {shape}")
            count = math.prod(dims)
            data = np.fromfile(f, dtype="<f4", count=count)
            if data.size != count:
                raise VtError(f"model file truncated while reading {name} data")
            arrays.append(data.reshape(dims))
        if f.read(1):
            raise VtError("trailing data after the last tensor")

    it = iter(arrays)
    embedding = next(it)
    blocks = [
        BlockWeights(*(next(it) for _ in range(10))) for _ in range(config.layers)
    ]
    lnf_w = next(it)
    lnf_b = next(it)
    output = next(it) if not config.tied_embeddings else None
    return ModelWeights(
        config=config,
        embedding=embedding,
        blocks=blocks,
        lnf_w=lnf_w,
        lnf_b=lnf_b,
        output=output,
    )


def _layer_norm(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True, dtype=np.float32)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True, dtype=np.float32)
    return centered / np.sqrt(var + np.float32(1e-5)) * w + b


def _gelu(x: np.ndarray) -> np.ndarray:
    # tanh approximation
    c = np.float32(math.sqrt(2.0 / math.pi))
    return np.float32(0.5) * x * (
        np.float32(1.0) + np.tanh(c * (x + np.float32(0.044715) * x * x * x))
    )


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True, dtype=np.float32)


def _attention(x: np.ndarray, blk: BlockWeights, heads: int) -> np.ndarray:
    t, h = x.shape
    dh = h // heads
    q = (x @ blk.wq).reshape(t, heads, dh).transpose(1, 0, 2)
    k = (x @ blk.wk).reshape(t, heads, dh).transpose(1, 0, 2)
    v = (x @ blk.wv).reshape(t, heads, dh).transpose(1, 0, 2)
    scores = q @ k.transpose(0, 2, 1) / np.float32(math.sqrt(dh))
    causal = np.triu(np.full((t, t), -np.inf, dtype=np.float32), k=1)
    attn = _softmax(scores + causal)
    out = (attn @ v).transpose(1, 0, 2).reshape(t, h)
    return out @ blk.wo


def project_rows(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Output projection: logit[t] = matrix[t] . vec.

    Uses einsum without path optimization so each output element is an
    independent reduction over the hidden axis. BLAS GEMV kernels pick
    blocking strategies based on the row count, which changes summation
    order and breaks bitwise equality between a matrix and its row
    subset; this kernel keeps every surviving row's value unchanged when
    rows are deleted.
    """
    return np.einsum("vh,h->v", matrix, vec, optimize=False)


def forward_logits(model: ModelWeights, context: list[int]) -> np.ndarray:
    """Next-token logits for the last position, length = model vocab size."""
    cfg = model.config
    if len(context) == 0:
        raise VtError("context must be non-empty")
    if len(context) > cfg.max_context:
        raise VtError(f"context length {len(context)} exceeds max_context {cfg.max_context}")
    ctx = np.asarray(context, dtype=np.int64)
    if ctx.min() < 0 or ctx.max() >= cfg.vocab_size:
        raise VtError(f"context ids must lie in [0, {cfg.vocab_size})")
    x = model.embedding[ctx] + model.positions()[: len(ctx)]
    for blk in model.blocks:
        x = x + _attention(_layer_norm(x, blk.ln1_w, blk.ln1_b), blk, cfg.heads)
        x = x + _gelu(_layer_norm(x, blk.ln2_w, blk.ln2_b) @ blk.w1) @ blk.w2
    x = _layer_norm(x, model.lnf_w, model.lnf_b)
    return project_rows(model.output_matrix, x[-1])


def trim_model(model: ModelWeights, sub: SubVocabulary) -> ModelWeights:
    """Slice the vocabulary-dimension matrices down to the kept rows.

    Row j of the result is a bit-identical copy of row kept[j]. All other
    parameters are shared with the source model (treated as immutable).
    """
    cfg = model.config
    if sub.vocab_size != cfg.vocab_size:
        raise VtError(
            f"sub-vocabulary was built for |V|={sub.vocab_size}, "
            f"model has |V|={cfg.vocab_size}"
        )
    if sub.size == 0:
        raise VtError("refusing to trim to an empty sub-vocabulary")
    index = np.asarray(sub.kept, dtype=np.int64)
    return ModelWeights(
        config=replace(cfg, vocab_size=sub.size),
        embedding=model.embedding[index],
        blocks=model.blocks,
        lnf_w=model.lnf_w,
        lnf_b=model.lnf_b,
        output=None if cfg.tied_embeddings else model.output[index],  # type: ignore[index]
    )


@dataclass
class DecodeResult:
    """Greedy decode output. ``ids`` includes the prompt and is always in
    original-id space, even when the model was trimmed."""

    ids: list[int]
    step_seconds: list[float]
    steps: int


def remap_output(ids: list[int], sub: SubVocabulary) -> list[int]:
    """Elementwise new-id to original-id translation."""
    return [sub.to_old(i) for i in ids]


def greedy_decode(
    model: ModelWeights,
    prompt: list[int],
    max_new: int,
    eos: int,
    sub: SubVocabulary | None = None,
) -> DecodeResult:
    """Beam-1 decoding: append the argmax token until eos or max_new.

    Argmax ties break toward the lowest id. ``prompt`` and ``eos`` are
    always given in original-id space; pass ``sub`` when the model was
    trimmed with it, and the internal new-id sequence is remapped before
    return.
    """
    if max_new < 0:
        raise VtError(f"max_new must be >= 0, got {max_new}")
    if sub is not None:
        if model.config.vocab_size != sub.size:
            raise VtError(
                f"model vocab size {model.config.vocab_size} does not match "
                f"sub-vocabulary size {sub.size}"
            )
        context = [sub.to_new(i) for i in prompt]
        if not sub.contains(eos):
            raise VtError(f"eos token {eos} is not in the sub-vocabulary")
        eos_internal = sub.to_new(eos)
    else:
        context = list(prompt)
        eos_internal = eos

    step_seconds: list[float] = []
    for _ in range(max_new):
        t0 = time.perf_counter()
        logits = forward_logits(model, context)
        nxt = int(np.argmax(logits))  # first occurrence wins: lowest id
        step_seconds.append(time.perf_counter() - t0)
        context.append(nxt)
        if nxt == eos_internal:
            break

    ids = remap_output(context, sub) if sub is not None else context
    return DecodeResult(ids=ids, step_seconds=step_seconds, steps=len(step_seconds))
