"""Dense network primitives for the cell programs: plain-numpy MLPs and a
single graph-attention layer, plus exact flat<->structured parameter packing.

Everything here is a pure float64 function of (spec, params, inputs). There
is no training code: all parameters are set by the outer evolutionary search,
so forwards only need to be deterministic and cheap.

Parameter layout (fixed, relied on by checkpoints and tests):

* MLP: per consecutive layer pair, the weight matrix ``W`` with shape
  ``(n_out, n_in)`` in row-major order, then the bias vector ``(n_out,)``.
* GAT: per head, the value transform ``(head_dim, in_dim)`` row-major, then
  the query vector ``(head_dim,)`` applied to the receiving node, then the
  key vector ``(head_dim,)`` applied to the neighbour. No biases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

# Negative-side slope of the attention score nonlinearity.
ATTENTION_LEAKY_SLOPE = 0.2

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("linear", "tanh")


class ContractError(ValueError):
    """An operation was called with inputs that violate its contract."""


def _relu(x: Array) -> Array:
    return np.maximum(x, 0.0)


def _leaky_relu(x: Array, slope: float) -> Array:
    return np.where(x >= 0.0, x, slope * x)


@dataclass(frozen=True)
class MlpSpec:
    """Shape and activations of a fully connected feedforward network."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ContractError("MlpSpec needs at least input and output sizes")
        if any(n < 1 for n in self.layer_sizes):
            raise ContractError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ContractError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ContractError(f"unknown output activation {self.output_activation!r}")

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]


def mlp_param_count(spec: MlpSpec) -> int:
    """Total parameter count: (n_in + 1) * n_out summed over layer pairs."""
    sizes = spec.layer_sizes
    return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))


def mlp_unflatten(spec: MlpSpec, params: Array) -> list[tuple[Array, Array]]:
    """Split a flat vector into per-layer (W, b) pairs. Exact inverse of
    :func:`mlp_flatten`; raises on length mismatch."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != mlp_param_count(spec):
        raise ContractError(
            f"expected {mlp_param_count(spec)} params, got shape {params.shape}"
        )
    layers = []
    off = 0
    sizes = spec.layer_sizes
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = params[off : off + n_in * n_out].reshape(n_out, n_in)
        off += n_in * n_out
        b = params[off : off + n_out]
        off += n_out
        layers.append((w, b))
    return layers


def mlp_flatten(spec: MlpSpec, layers: list[tuple[Array, Array]]) -> Array:
    sizes = spec.layer_sizes
    if len(layers) != len(sizes) - 1:
        raise ContractError("layer count does not match spec")
    parts = []
    for (w, b), n_in, n_out in zip(layers, sizes[:-1], sizes[1:]):
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if w.shape != (n_out, n_in) or b.shape != (n_out,):
            raise ContractError(f"layer shapes {w.shape}/{b.shape} do not match spec")
        parts.append(w.reshape(-1))
        parts.append(b)
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts)


def mlp_forward_layers(
    spec: MlpSpec, layers: list[tuple[Array, Array]], x: Array
) -> Array:
    """Forward pass with pre-unflattened layers; accepts a single input
    vector or a batch with inputs along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.n_in:
        raise ContractError(f"input size {x.shape[-1]} != spec input {spec.n_in}")
    h = x
    last = len(layers) - 1
    # overflow to inf is tolerated here; callers reject non-finite outputs
    with np.errstate(over="ignore", invalid="ignore"):
        for i, (w, b) in enumerate(layers):
            h = h @ w.T + b
            if i < last:
                h = _relu(h) if spec.hidden_activation == "relu" else np.tanh(h)
            elif spec.output_activation == "tanh":
                h = np.tanh(h)
    return h


def mlp_forward(spec: MlpSpec, params: Array, x: Array) -> Array:
    return mlp_forward_layers(spec, mlp_unflatten(spec, params), x)


@dataclass(frozen=True)
class GatSpec:
    """Single-layer graph attention: additive scores with a leaky-relu, a
    softmax per in-neighbourhood, and value-weighted sums per head."""

    in_dim: int
    out_dim: int
    heads: int = 1

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1 or self.heads < 1:
            raise ContractError("GatSpec dimensions must be positive")
        if self.out_dim % self.heads != 0:
            raise ContractError(
                f"out_dim {self.out_dim} not divisible by heads {self.heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.out_dim // self.heads


def gat_param_count(spec: GatSpec) -> int:
    # per head: value transform + query vector + key vector
    return spec.heads * spec.head_dim * (spec.in_dim + 2)


def gat_unflatten(spec: GatSpec, params: Array) -> list[tuple[Array, Array, Array]]:
    """Per-head (value, query, key) arrays from the flat layout."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != gat_param_count(spec):
        raise ContractError(
            f"expected {gat_param_count(spec)} params, got shape {params.shape}"
        )
    heads = []
    off = 0
    d = spec.head_dim
    for _ in range(spec.heads):
        value = params[off : off + d * spec.in_dim].reshape(d, spec.in_dim)
        off += d * spec.in_dim
        query = params[off : off + d]
        off += d
        key = params[off : off + d]
        off += d
        heads.append((value, query, key))
    return heads


def gat_flatten(spec: GatSpec, heads: list[tuple[Array, Array, Array]]) -> Array:
    if len(heads) != spec.heads:
        raise ContractError("head count does not match spec")
    parts = []
    for value, query, key in heads:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (spec.head_dim, spec.in_dim):
            raise ContractError(f"value transform shape {value.shape} mismatch")
        parts.extend([value.reshape(-1), np.asarray(query, dtype=np.float64),
                      np.asarray(key, dtype=np.float64)])
    return np.concatenate(parts)


def _neighbor_index_arrays(in_neighbors: list[list[int]]):
    counts = np.array([len(lst) for lst in in_neighbors], dtype=np.intp)
    if np.any(counts == 0):
        raise ContractError("every node needs a nonempty in-neighbourhood")
    dst = np.repeat(np.arange(len(in_neighbors), dtype=np.intp), counts)
    src = np.concatenate([np.asarray(lst, dtype=np.intp) for lst in in_neighbors])
    offsets = np.zeros(len(in_neighbors), dtype=np.intp)
    np.cumsum(counts[:-1], out=offsets[1:])
    return src, dst, offsets


def gat_forward_heads(
    spec: GatSpec,
    heads: list[tuple[Array, Array, Array]],
    node_states: Array,
    in_neighbors: list[list[int]],
    return_attention: bool = False,
):
    """Attention pass with pre-unflattened head parameters.

    ``node_states`` is (n, in_dim); ``in_neighbors[i]`` lists the nodes whose
    states node i aggregates (the caller includes i itself). Returns the
    (n, out_dim) aggregate, plus per-node attention arrays of shape
    (heads, degree_i) when requested.
    """
    states = np.asarray(node_states, dtype=np.float64)
    if states.ndim != 2 or states.shape[1] != spec.in_dim:
        raise ContractError(f"node states shape {states.shape} != (n, {spec.in_dim})")
    n = states.shape[0]
    if len(in_neighbors) != n:
        raise ContractError("in_neighbors length must equal node count")
    src, dst, offsets = _neighbor_index_arrays(in_neighbors)

    out = np.empty((n, spec.out_dim))
    alphas = []
    for h, (value, query, key) in enumerate(heads):
        transformed = states @ value.T            # (n, head_dim)
        q_score = transformed @ query             # receiving node term
        k_score = transformed @ key               # neighbour term
        raw = q_score[dst] + k_score[src]
        scores = _leaky_relu(raw, ATTENTION_LEAKY_SLOPE)
        # softmax per contiguous destination segment
        seg_max = np.maximum.reduceat(scores, offsets)
        z = np.exp(scores - seg_max[dst])
        seg_sum = np.add.reduceat(z, offsets)
        alpha = z / seg_sum[dst]
        msgs = alpha[:, None] * transformed[src]
        out[:, h * spec.head_dim : (h + 1) * spec.head_dim] = np.add.reduceat(
            msgs, offsets, axis=0
        )
        if return_attention:
            alphas.append(alpha)
    if return_attention:
        per_node = []
        bounds = list(offsets) + [len(src)]
        for i in range(n):
            per_node.append(
                np.stack([a[bounds[i] : bounds[i + 1]] for a in alphas])
            )
        return out, per_node
    return out


def gat_forward(
    spec: GatSpec,
    params: Array,
    node_states: Array,
    in_neighbors: list[list[int]],
    return_attention: bool = False,
):
    return gat_forward_heads(
        spec, gat_unflatten(spec, params), node_states, in_neighbors,
        return_attention=return_attention,
    )


def glorot_mlp_params(spec: MlpSpec, rng: np.random.Generator,
                      scale: float = 1.0) -> Array:
    """Glorot-uniform weights with zero biases, flattened. Used to seed the
    search mean: at the all-zero genome the output of a stacked MLP is
    first-order insensitive to every weight matrix, which stalls the
    evolutionary gradient."""
    parts = []
    sizes = spec.layer_sizes
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        a = scale * np.sqrt(6.0 / (n_in + n_out))
        parts.append(rng.uniform(-a, a, size=n_in * n_out))
        parts.append(np.zeros(n_out))
    return np.concatenate(parts)


def glorot_gat_params(spec: GatSpec, rng: np.random.Generator,
                      scale: float = 1.0) -> Array:
    """Glorot-uniform value transforms plus small query/key vectors."""
    parts = []
    for _ in range(spec.heads):
        a = scale * np.sqrt(6.0 / (spec.in_dim + spec.head_dim))
        parts.append(rng.uniform(-a, a, size=spec.head_dim * spec.in_dim))
        b = scale * np.sqrt(3.0 / spec.head_dim)
        parts.append(rng.uniform(-b, b, size=spec.head_dim))  # query
        parts.append(rng.uniform(-b, b, size=spec.head_dim))  # key
    return np.concatenate(parts)
