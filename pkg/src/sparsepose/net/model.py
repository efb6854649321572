"""The pose network: ReLU embedding, stacked bidirectional LSTM, linear head."""

from dataclasses import dataclass, field

import numpy as np

from . import lstm


class ShapeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 60
    embed_dim: int = 512
    hidden_dim: int = 512
    layers: int = 2
    bidirectional: bool = True
    output_dim: int = 144

    def __post_init__(self):
        if min(self.input_dim, self.embed_dim, self.hidden_dim,
               self.layers, self.output_dim) <= 0:
            raise ValueError("all dimensions must be positive")
        if self.output_dim != 24 * 6:
            raise ValueError("output must be 24 joints x 6D")

    @property
    def directions(self) -> int:
        return 2 if self.bidirectional else 1

    def layer_input_dim(self, layer: int) -> int:
        return self.embed_dim if layer == 0 else self.hidden_dim * self.directions

    def param_count(self) -> int:
        """Closed-form trainable parameter count (dual-bias convention)."""
        n = self.embed_dim * self.input_dim + self.embed_dim
        for layer in range(self.layers):
            d_in = self.layer_input_dim(layer)
            per_dir = 4 * self.hidden_dim * (d_in + self.hidden_dim + 2)
            n += per_dir * self.directions
        n += self.output_dim * (self.hidden_dim * self.directions + 1)
        return n


_DIR_NAMES = ("fwd", "bwd")


@dataclass
class ModelWeights:
    config: ModelConfig
    tensors: dict = field(default_factory=dict)   # name -> ndarray

    @property
    def dtype(self):
        return self.tensors["head.W"].dtype

    def total_params(self) -> int:
        return sum(int(t.size) for t in self.tensors.values())

    def astype(self, dtype) -> "ModelWeights":
        return ModelWeights(self.config,
                            {k: np.ascontiguousarray(v, dtype=dtype)
                             for k, v in self.tensors.items()})

    def zeros_like(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}


def tensor_shapes(config: ModelConfig) -> dict:
    h = config.hidden_dim
    shapes = {
        "embed.W": (config.embed_dim, config.input_dim),
        "embed.b": (config.embed_dim,),
        "head.W": (config.output_dim, h * config.directions),
        "head.b": (config.output_dim,),
    }
    for layer in range(config.layers):
        d_in = config.layer_input_dim(layer)
        for d in range(config.directions):
            prefix = f"lstm{layer}.{_DIR_NAMES[d]}"
            shapes[f"{prefix}.W_ih"] = (4 * h, d_in)
            shapes[f"{prefix}.W_hh"] = (4 * h, h)
            shapes[f"{prefix}.b_ih"] = (4 * h,)
            shapes[f"{prefix}.b_hh"] = (4 * h,)
    return shapes


def init_weights(config: ModelConfig, seed: int = 0, dtype=np.float64) -> ModelWeights:
    """Uniform +-1/sqrt(fan_in) initialization, seeded and deterministic."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in tensor_shapes(config).items():
        if name.endswith(".b") or ".b_" in name:
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            bound = 1.0 / np.sqrt(shape[-1])
            tensors[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return ModelWeights(config, tensors)


def zero_weights(config: ModelConfig, dtype=np.float64) -> ModelWeights:
    return ModelWeights(config, {name: np.zeros(shape, dtype=dtype)
                                 for name, shape in tensor_shapes(config).items()})


def _check_window(weights: ModelWeights, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=weights.dtype)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != weights.config.input_dim:
        raise ShapeMismatch(f"expected (B, T, {weights.config.input_dim}) inputs, "
                            f"got {x.shape}")
    if x.shape[1] < 1:
        raise ShapeMismatch("window must contain at least one timestep")
    return x


def forward_batch(weights: ModelWeights, x: np.ndarray, want_cache: bool = False):
    """x (B, T, input) -> (B, T, output) 6D pose parameters per frame."""
    x = _check_window(weights, x)
    cfg = weights.config
    w = weights.tensors
    pre = x @ w["embed.W"].T + w["embed.b"]
    e = np.maximum(pre, 0.0)
    caches = []
    layer_in = e
    for layer in range(cfg.layers):
        outs = []
        layer_caches = []
        for d in range(cfg.directions):
            p = f"lstm{layer}.{_DIR_NAMES[d]}"
            res = lstm.scan_forward(layer_in, w[f"{p}.W_ih"], w[f"{p}.W_hh"],
                                    w[f"{p}.b_ih"], w[f"{p}.b_hh"],
                                    reverse=(d == 1), want_cache=want_cache)
            if want_cache:
                hs, c = res
                layer_caches.append(c)
            else:
                hs = res
            outs.append(hs)
        layer_in = np.concatenate(outs, axis=-1) if len(outs) > 1 else outs[0]
        caches.append(layer_caches)
    y = layer_in @ w["head.W"].T + w["head.b"]
    if want_cache:
        return y, (x, pre, e, caches, layer_in)
    return y


def forward(weights: ModelWeights, window: np.ndarray) -> np.ndarray:
    """Single window (T, input) -> (T, output)."""
    return forward_batch(weights, window)[0]


def backward_batch(weights: ModelWeights, cache, dY: np.ndarray) -> dict:
    """Gradients of a scalar loss w.r.t. every tensor, given dLoss/dY."""
    cfg = weights.config
    w = weights.tensors
    x, pre, e, caches, last = cache
    dY = np.asarray(dY, dtype=weights.dtype)
    grads = {name: None for name in w}
    B, T, _ = x.shape
    flatY = dY.reshape(-1, cfg.output_dim)
    grads["head.W"] = flatY.T @ last.reshape(-1, last.shape[-1])
    grads["head.b"] = flatY.sum(axis=0)
    d_layer = dY @ w["head.W"]
    h = cfg.hidden_dim
    for layer in range(cfg.layers - 1, -1, -1):
        dx_total = None
        for d in range(cfg.directions):
            p = f"lstm{layer}.{_DIR_NAMES[d]}"
            d_hs = d_layer[..., d * h:(d + 1) * h]
            dx, dW_ih, dW_hh, db_ih, db_hh = lstm.scan_backward(
                caches[layer][d], np.ascontiguousarray(d_hs))
            grads[f"{p}.W_ih"] = dW_ih
            grads[f"{p}.W_hh"] = dW_hh
            grads[f"{p}.b_ih"] = db_ih
            grads[f"{p}.b_hh"] = db_hh
            dx_total = dx if dx_total is None else dx_total + dx
        d_layer = dx_total
    de = d_layer * (pre > 0)
    flat = de.reshape(-1, cfg.embed_dim)
    grads["embed.W"] = flat.T @ x.reshape(-1, cfg.input_dim)
    grads["embed.b"] = flat.sum(axis=0)
    return grads


def last_step_forward(weights: ModelWeights, window: np.ndarray) -> np.ndarray:
    """The final row of forward(weights, window), skipping unneeded work.

    The backward direction of the top layer only ever sees the last input
    before emitting the last timestep, and the head is applied to one row.
    Produces the same values as the full pass (same kernels, same order).
    """
    cfg = weights.config
    if not cfg.bidirectional or cfg.layers < 1:
        y = forward(weights, window)
        return y[-1]
    w = weights.tensors
    x = _check_window(weights, window)[0]
    e = np.maximum(x @ w["embed.W"].T + w["embed.b"], 0.0)
    layer_in = e
    for layer in range(cfg.layers - 1):
        parts = []
        for d, rev in ((0, False), (1, True)):
            p = f"lstm{layer}.{_DIR_NAMES[d]}"
            proj = layer_in @ w[f"{p}.W_ih"].T + (w[f"{p}.b_ih"] + w[f"{p}.b_hh"])
            hs = lstm.scan_forward_single(proj[::-1] if rev else proj, w[f"{p}.W_hh"])
            parts.append(hs[::-1] if rev else hs)
        layer_in = np.concatenate(parts, axis=-1)
    p = f"lstm{cfg.layers - 1}.fwd"
    proj = layer_in @ w[f"{p}.W_ih"].T + (w[f"{p}.b_ih"] + w[f"{p}.b_hh"])
    h_fwd = lstm.scan_forward_single(proj, w[f"{p}.W_hh"])[-1]
    p = f"lstm{cfg.layers - 1}.bwd"
    h_bwd = lstm.scan_last_step(layer_in[-1], w[f"{p}.W_ih"],
                                w[f"{p}.b_ih"], w[f"{p}.b_hh"])
    top = np.concatenate([h_fwd, h_bwd])
    return w["head.W"] @ top + w["head.b"]
