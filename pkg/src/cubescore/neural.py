"""From-scratch recurrent sequence classifier with exact analytic gradients.

Architecture: stacked (optionally bidirectional) LSTM layers -> scaled
dot-product self-attention -> mean pooling over time -> dropout -> dense
softmax head over the four score classes. Everything, including
backpropagation through time and the Adam optimizer, is implemented here on
plain numpy arrays and verified against central finite differences.

Conventions:
  * Gate order along the stacked 4h axis is (input i, forget f, cell g,
    output o).
  * Per direction, input weights are (4h, d_in), recurrent weights (4h, h),
    bias (4h,). Attention projections are (d_model, d_attn) where d_model is
    the width of the top LSTM output (2h bidirectional, h otherwise).
  * The backward-direction scan runs over the time-reversed input; its output
    is flipped back so row t of a layer's output always describes time step t.
  * Training noise (shuffling, dropout) comes from a caller-supplied
    numpy Generator, so a fixed seed reproduces runs bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch

NUM_CLASSES = 4
LOSS_EPS = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PRECISIONS = {"f32": np.float32, "f64": np.float64}


@dataclass
class TrainConfig:
    """Hyperparameters; the first four mirror the tuned reference setting."""

    num_layers: int = 2
    hidden_dim: int = 128
    attention_dim: int = 256
    learning_rate: float = 0.005
    epochs: int = 100
    batch_size: int = 16
    dropout_rate: float = 0.3
    seed: int = 0
    precision: str = "f32"
    bidirectional: bool = True
    attention: bool = True

    def __post_init__(self):
        if self.precision not in PRECISIONS:
            raise DimensionMismatch(f"precision must be one of {tuple(PRECISIONS)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise DimensionMismatch("dropout_rate must be in [0, 1)")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    @property
    def num_directions(self) -> int:
        return 2 if self.bidirectional else 1


@dataclass
class LstmDirectionParams:
    w: np.ndarray  # (4h, d_in)
    u: np.ndarray  # (4h, h)
    b: np.ndarray  # (4h,)

    @property
    def hidden_dim(self) -> int:
        return self.u.shape[1]


@dataclass
class LstmLayerParams:
    directions: list[LstmDirectionParams]  # [forward] or [forward, backward]

    @property
    def hidden_dim(self) -> int:
        return self.directions[0].hidden_dim

    @property
    def output_dim(self) -> int:
        return self.hidden_dim * len(self.directions)


@dataclass
class AttentionParams:
    w_q: np.ndarray  # (d_model, d_attn)
    w_k: np.ndarray
    w_v: np.ndarray

    @property
    def attention_dim(self) -> int:
        return self.w_q.shape[1]


@dataclass
class ModelParams:
    layers: list[LstmLayerParams]
    attention: AttentionParams | None
    head_w: np.ndarray  # (pooled_dim, NUM_CLASSES)
    head_b: np.ndarray  # (NUM_CLASSES,)
    dropout_rate: float = 0.0

    @property
    def input_dim(self) -> int:
        return self.layers[0].directions[0].w.shape[1]

    @property
    def dtype(self):
        return self.head_w.dtype


def param_blocks(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    """All trainable arrays with stable names, in a fixed order."""
    blocks = []
    for li, layer in enumerate(params.layers):
        for dname, d in zip(("fwd", "bwd"), layer.directions):
            blocks.append((f"layers.{li}.{dname}.w", d.w))
            blocks.append((f"layers.{li}.{dname}.u", d.u))
            blocks.append((f"layers.{li}.{dname}.b", d.b))
    if params.attention is not None:
        blocks.append(("attention.w_q", params.attention.w_q))
        blocks.append(("attention.w_k", params.attention.w_k))
        blocks.append(("attention.w_v", params.attention.w_v))
    blocks.append(("head.w", params.head_w))
    blocks.append(("head.b", params.head_b))
    return blocks


def init_params(config: TrainConfig, input_dim: int, rng_seed) -> ModelParams:
    """Glorot-uniform weights (|w| <= sqrt(6/(fan_in+fan_out))), zero biases
    except the forget gates, which start at 1 so early cell state persists."""
    if input_dim < 1:
        raise DimensionMismatch(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng(rng_seed)
    dtype = config.dtype
    h = config.hidden_dim

    def glorot(rows, cols):
        lim = math.sqrt(6.0 / (rows + cols))
        return rng.uniform(-lim, lim, size=(rows, cols)).astype(dtype)

    layers = []
    d_in = input_dim
    for _ in range(config.num_layers):
        directions = []
        for _ in range(config.num_directions):
            b = np.zeros(4 * h, dtype=dtype)
            b[h : 2 * h] = 1.0
            directions.append(
                LstmDirectionParams(w=glorot(4 * h, d_in), u=glorot(4 * h, h), b=b)
            )
        layers.append(LstmLayerParams(directions=directions))
        d_in = h * config.num_directions

    attention = None
    pooled_dim = d_in
    if config.attention:
        attention = AttentionParams(
            w_q=glorot(d_in, config.attention_dim),
            w_k=glorot(d_in, config.attention_dim),
            w_v=glorot(d_in, config.attention_dim),
        )
        pooled_dim = config.attention_dim

    return ModelParams(
        layers=layers,
        attention=attention,
        head_w=glorot(pooled_dim, NUM_CLASSES),
        head_b=np.zeros(NUM_CLASSES, dtype=dtype),
        dropout_rate=config.dropout_rate,
    )


# ---------------------------------------------------------------------------
# Forward pass


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def softmax(z, axis=-1):
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def lstm_cell_forward(x_t, h_prev, c_prev, params: LstmDirectionParams):
    """One LSTM step on vectors: returns (h_t, c_t)."""
    h = params.hidden_dim
    z = params.w @ np.asarray(x_t) + params.u @ np.asarray(h_prev) + params.b
    i = _sigmoid(z[:h])
    f = _sigmoid(z[h : 2 * h])
    g = np.tanh(z[2 * h : 3 * h])
    o = _sigmoid(z[3 * h :])
    c_t = f * np.asarray(c_prev) + i * g
    h_t = o * np.tanh(c_t)
    return h_t, c_t


@dataclass
class _DirectionCache:
    x: np.ndarray  # scan-order input (B, n, d_in)
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tc: np.ndarray  # tanh(c)
    h: np.ndarray


def _direction_forward(x: np.ndarray, p: LstmDirectionParams) -> tuple[np.ndarray, _DirectionCache]:
    B, n, _ = x.shape
    h = p.hidden_dim
    dtype = x.dtype
    pre = x @ p.w.T + p.b  # all input projections at once
    I = np.empty((B, n, h), dtype=dtype)
    F = np.empty_like(I)
    G = np.empty_like(I)
    O = np.empty_like(I)
    C = np.empty_like(I)
    TC = np.empty_like(I)
    H = np.empty_like(I)
    h_prev = np.zeros((B, h), dtype=dtype)
    c_prev = np.zeros((B, h), dtype=dtype)
    ut = p.u.T
    for t in range(n):
        z = pre[:, t] + h_prev @ ut
        I[:, t] = _sigmoid(z[:, :h])
        F[:, t] = _sigmoid(z[:, h : 2 * h])
        G[:, t] = np.tanh(z[:, 2 * h : 3 * h])
        O[:, t] = _sigmoid(z[:, 3 * h :])
        c_prev = F[:, t] * c_prev + I[:, t] * G[:, t]
        C[:, t] = c_prev
        TC[:, t] = np.tanh(c_prev)
        h_prev = O[:, t] * TC[:, t]
        H[:, t] = h_prev
    return H, _DirectionCache(x=x, i=I, f=F, g=G, o=O, c=C, tc=TC, h=H)


def _direction_backward(dh_seq: np.ndarray, p: LstmDirectionParams, cache: _DirectionCache):
    B, n, h = dh_seq.shape
    dtype = dh_seq.dtype
    dZ = np.empty((B, n, 4 * h), dtype=dtype)
    dh_next = np.zeros((B, h), dtype=dtype)
    dc_next = np.zeros((B, h), dtype=dtype)
    I, F, G, O, C, TC = cache.i, cache.f, cache.g, cache.o, cache.c, cache.tc
    for t in range(n - 1, -1, -1):
        dh = dh_seq[:, t] + dh_next
        i, f, g, o, tc = I[:, t], F[:, t], G[:, t], O[:, t], TC[:, t]
        dc = dc_next + dh * o * (1.0 - tc * tc)
        c_prev = C[:, t - 1] if t > 0 else 0.0
        dZ[:, t, :h] = dc * g * i * (1.0 - i)
        dZ[:, t, h : 2 * h] = dc * c_prev * f * (1.0 - f)
        dZ[:, t, 2 * h : 3 * h] = dc * i * (1.0 - g * g)
        dZ[:, t, 3 * h :] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = dZ[:, t] @ p.u
    h_prev = np.concatenate([np.zeros((B, 1, h), dtype=dtype), cache.h[:, :-1]], axis=1)
    flat_dz = dZ.reshape(B * n, 4 * h)
    dw = flat_dz.T @ cache.x.reshape(B * n, -1)
    du = flat_dz.T @ h_prev.reshape(B * n, h)
    db = flat_dz.sum(axis=0)
    dx = dZ @ p.w
    return dx, dw, du, db


@dataclass
class _LayerCache:
    directions: list[_DirectionCache]


def _layer_forward(x: np.ndarray, layer: LstmLayerParams):
    outs = []
    caches = []
    for di, p in enumerate(layer.directions):
        xin = x if di == 0 else np.ascontiguousarray(x[:, ::-1])
        h_seq, dc = _direction_forward(xin, p)
        outs.append(h_seq if di == 0 else h_seq[:, ::-1])
        caches.append(dc)
    out = outs[0] if len(outs) == 1 else np.concatenate(outs, axis=2)
    return out, _LayerCache(directions=caches)


def _layer_backward(d_out: np.ndarray, layer: LstmLayerParams, cache: _LayerCache, grads, prefix):
    h = layer.hidden_dim
    dx_total = None
    for di, (p, dc) in enumerate(zip(layer.directions, cache.directions)):
        dh_seq = d_out[:, :, di * h : (di + 1) * h]
        if di == 1:
            dh_seq = np.ascontiguousarray(dh_seq[:, ::-1])
        else:
            dh_seq = np.ascontiguousarray(dh_seq)
        dx, dw, du, db = _direction_backward(dh_seq, p, dc)
        if di == 1:
            dx = dx[:, ::-1]
        dname = "fwd" if di == 0 else "bwd"
        grads[f"{prefix}.{dname}.w"] = dw
        grads[f"{prefix}.{dname}.u"] = du
        grads[f"{prefix}.{dname}.b"] = db
        dx_total = dx if dx_total is None else dx_total + dx
    return dx_total


@dataclass
class _AttentionCache:
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    a: np.ndarray  # softmax attention weights (B, n, n)


def _attention_forward(h_top: np.ndarray, p: AttentionParams):
    scale = 1.0 / math.sqrt(p.attention_dim)
    q = h_top @ p.w_q
    k = h_top @ p.w_k
    v = h_top @ p.w_v
    scores = (q @ k.transpose(0, 2, 1)) * np.asarray(scale, dtype=h_top.dtype)
    a = softmax(scores, axis=-1)
    weighted = a @ v  # (B, n, d_attn)
    pooled = weighted.mean(axis=1)
    return pooled, _AttentionCache(q=q, k=k, v=v, a=a)


def _attention_backward(dpooled, h_top, p: AttentionParams, cache: _AttentionCache, grads):
    B, n, _ = h_top.shape
    scale = 1.0 / math.sqrt(p.attention_dim)
    d_weighted = np.broadcast_to(dpooled[:, None, :] / n, (B, n, dpooled.shape[1]))
    da = d_weighted @ cache.v.transpose(0, 2, 1)
    dv = cache.a.transpose(0, 2, 1) @ d_weighted
    # softmax rows backward
    ds = cache.a * (da - (da * cache.a).sum(axis=-1, keepdims=True))
    ds = ds * np.asarray(scale, dtype=ds.dtype)
    dq = ds @ cache.k
    dk = ds.transpose(0, 2, 1) @ cache.q
    flat_h = h_top.reshape(B * n, -1)
    grads["attention.w_q"] = flat_h.T @ dq.reshape(B * n, -1)
    grads["attention.w_k"] = flat_h.T @ dk.reshape(B * n, -1)
    grads["attention.w_v"] = flat_h.T @ dv.reshape(B * n, -1)
    return dq @ p.w_q.T + dk @ p.w_k.T + dv @ p.w_v.T


@dataclass
class ForwardCache:
    x: np.ndarray
    layer_caches: list[_LayerCache]
    layer_inputs: list[np.ndarray]
    h_top: np.ndarray
    attn: _AttentionCache | None
    pooled: np.ndarray
    dropout_mask: np.ndarray | None
    dropped: np.ndarray
    probs: np.ndarray


def forward_batch(x: np.ndarray, params: ModelParams, training: bool = False, rng=None):
    """Batched forward pass. x is (batch, time, features) in the model dtype.

    Returns (logits, probs, cache); the cache feeds `backward`. Dropout is
    applied to the pooled vector only, and only when training is True.
    """
    if x.ndim != 3:
        raise DimensionMismatch(f"expected (batch, time, features), got shape {x.shape}")
    if x.shape[2] != params.input_dim:
        raise DimensionMismatch(
            f"model expects {params.input_dim} features, input has {x.shape[2]}"
        )
    x = np.ascontiguousarray(x, dtype=params.dtype)
    cur = x
    layer_inputs = []
    layer_caches = []
    for layer in params.layers:
        layer_inputs.append(cur)
        cur, lc = _layer_forward(cur, layer)
        layer_caches.append(lc)
    h_top = cur

    if params.attention is not None:
        pooled, attn_cache = _attention_forward(h_top, params.attention)
    else:
        pooled, attn_cache = h_top.mean(axis=1), None

    mask = None
    dropped = pooled
    if training and params.dropout_rate > 0.0:
        if rng is None:
            raise DimensionMismatch("training-mode forward with dropout needs an rng")
        keep = 1.0 - params.dropout_rate
        mask = (rng.random(pooled.shape) < keep).astype(params.dtype) / np.asarray(
            keep, dtype=params.dtype
        )
        dropped = pooled * mask

    logits = dropped @ params.head_w + params.head_b
    probs = softmax(logits, axis=-1)
    cache = ForwardCache(
        x=x,
        layer_caches=layer_caches,
        layer_inputs=layer_inputs,
        h_top=h_top,
        attn=attn_cache,
        pooled=pooled,
        dropout_mask=mask,
        dropped=dropped,
        probs=probs,
    )
    return logits, probs, cache


def bilstm_forward(x: np.ndarray, params: ModelParams):
    """Recurrent trunk only, for one (time, features) sequence: returns the
    top layer's (time, d_model) hidden matrix."""
    cur = np.ascontiguousarray(x, dtype=params.dtype)[None]
    for layer in params.layers:
        cur, _ = _layer_forward(cur, layer)
    return cur[0]


def attention_forward(h_seq: np.ndarray, params: AttentionParams):
    """Attention block for one (time, d_model) matrix: returns (pooled, weights)."""
    pooled, cache = _attention_forward(np.ascontiguousarray(h_seq)[None], params)
    return pooled[0], cache.a[0]


def model_forward(x: np.ndarray, params: ModelParams, training: bool = False, rng=None):
    """Single-sequence forward: x is (time, features); returns (logits, probs, cache)."""
    logits, probs, cache = forward_batch(np.asarray(x)[None], params, training=training, rng=rng)
    return logits[0], probs[0], cache


def cross_entropy_loss(probs, label: int) -> float:
    """Negative log-likelihood of the true class, with a small floor for 0."""
    return float(-math.log(float(probs[label]) + LOSS_EPS))


def mean_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    picked = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(picked + LOSS_EPS)))


# ---------------------------------------------------------------------------
# Backward pass


def backward(labels, params: ModelParams, cache: ForwardCache) -> dict[str, np.ndarray]:
    """Exact gradients of the mean batch cross-entropy w.r.t. every block."""
    probs = cache.probs
    B = probs.shape[0]
    labels = np.asarray(labels)
    # d(mean loss)/d(probs): nonzero only at the true class
    gp = np.zeros_like(probs)
    rows = np.arange(B)
    gp[rows, labels] = -1.0 / ((probs[rows, labels] + LOSS_EPS) * B)
    dlogits = probs * (gp - (gp * probs).sum(axis=1, keepdims=True))

    grads: dict[str, np.ndarray] = {}
    grads["head.w"] = cache.dropped.T @ dlogits
    grads["head.b"] = dlogits.sum(axis=0)
    ddropped = dlogits @ params.head_w.T
    dpooled = ddropped if cache.dropout_mask is None else ddropped * cache.dropout_mask

    if params.attention is not None:
        dh = _attention_backward(dpooled, cache.h_top, params.attention, cache.attn, grads)
    else:
        n = cache.h_top.shape[1]
        dh = np.broadcast_to(dpooled[:, None, :] / n, cache.h_top.shape).astype(
            cache.h_top.dtype
        )

    for li in range(len(params.layers) - 1, -1, -1):
        dh = _layer_backward(dh, params.layers[li], cache.layer_caches[li], grads, f"layers.{li}")
    return grads


# ---------------------------------------------------------------------------
# Optimizer


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in param_blocks(params)},
            v={name: np.zeros_like(arr) for name, arr in param_blocks(params)},
        )


def optimizer_step(
    params: ModelParams, grads: dict[str, np.ndarray], state: AdamState, lr: float
) -> ModelParams:
    """One Adam update (beta1=0.9, beta2=0.999, eps=1e-8, bias-corrected),
    applied in place; returns params for convenience."""
    state.step += 1
    bc1 = 1.0 - ADAM_BETA1**state.step
    bc2 = 1.0 - ADAM_BETA2**state.step
    for name, arr in param_blocks(params):
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        arr -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return params


# ---------------------------------------------------------------------------
# Finite-difference verification


def gradient_check(
    config: TrainConfig,
    input_dim: int,
    seed,
    batch_size: int = 3,
    seq_len: int = 6,
    step: float = 1e-5,
) -> dict[str, float]:
    """Max relative error |ga-gn| / max(|ga|, |gn|, 1e-8) per parameter block,
    comparing analytic gradients with central finite differences in f64."""
    cfg = replace(config, precision="f64", dropout_rate=0.0)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((batch_size, seq_len, input_dim))
    labels = rng.integers(0, NUM_CLASSES, size=batch_size)
    params = init_params(cfg, input_dim, seed)

    def loss_now():
        _, probs, _ = forward_batch(x, params, training=False)
        return mean_loss(probs, labels)

    _, probs, cache = forward_batch(x, params, training=False)
    analytic = backward(labels, params, cache)

    report: dict[str, float] = {}
    for name, arr in param_blocks(params):
        ga = analytic[name]
        worst = 0.0
        flat = arr.reshape(-1)
        ga_flat = ga.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = loss_now()
            flat[idx] = orig - step
            down = loss_now()
            flat[idx] = orig
            gn = (up - down) / (2.0 * step)
            denom = max(abs(ga_flat[idx]), abs(gn), 1e-8)
            worst = max(worst, abs(ga_flat[idx] - gn) / denom)
        report[name] = worst
    return report
