"""Independent reference implementations used to cross-check the vectorised
code. Everything here is deliberately written with plain Python scalar loops
and no numpy arithmetic, so a shared bug with the implementation under test
is implausible."""

import math


def oracle_mlp_forward(layer_sizes, hidden_act, output_act, params, x):
    """Scalar-loop MLP forward. ``params`` follows the flat layout: per layer
    the (n_out, n_in) weight matrix row-major, then the bias."""
    params = list(params)
    h = list(x)
    off = 0
    n_layers = len(layer_sizes) - 1
    for li in range(n_layers):
        n_in, n_out = layer_sizes[li], layer_sizes[li + 1]
        out = []
        for o in range(n_out):
            acc = 0.0
            for i in range(n_in):
                acc += params[off + o * n_in + i] * h[i]
            out.append(acc)
        off += n_in * n_out
        for o in range(n_out):
            out[o] += params[off + o]
        off += n_out
        if li < n_layers - 1:
            if hidden_act == "relu":
                out = [v if v > 0 else 0.0 for v in out]
            else:
                out = [math.tanh(v) for v in out]
        elif output_act == "tanh":
            out = [math.tanh(v) for v in out]
        h = out
    assert off == len(params)
    return h


def _leaky(v, slope=0.2):
    return v if v >= 0 else slope * v


def oracle_gat_forward(in_dim, out_dim, heads, params, states, in_neighbors):
    """Scalar-loop graph attention. Flat layout per head: (head_dim, in_dim)
    value transform row-major, then query vector, then key vector. Returns
    (outputs, attention) where attention[node][head] lists coefficients in
    neighbour-list order."""
    params = list(params)
    head_dim = out_dim // heads
    n = len(states)
    outputs = [[0.0] * out_dim for _ in range(n)]
    attention = [[None] * heads for _ in range(n)]
    off = 0
    for h in range(heads):
        value = [params[off + r * in_dim : off + (r + 1) * in_dim]
                 for r in range(head_dim)]
        off += head_dim * in_dim
        query = params[off : off + head_dim]
        off += head_dim
        key = params[off : off + head_dim]
        off += head_dim

        transformed = []
        for s in states:
            transformed.append(
                [sum(value[r][c] * s[c] for c in range(in_dim))
                 for r in range(head_dim)]
            )
        for i in range(n):
            neigh = in_neighbors[i]
            q_i = sum(query[r] * transformed[i][r] for r in range(head_dim))
            scores = []
            for j in neigh:
                k_j = sum(key[r] * transformed[j][r] for r in range(head_dim))
                scores.append(_leaky(q_i + k_j))
            m = max(scores)
            exps = [math.exp(s - m) for s in scores]
            total = sum(exps)
            alphas = [e / total for e in exps]
            attention[i][h] = alphas
            for r in range(head_dim):
                outputs[i][h * head_dim + r] = sum(
                    a * transformed[j][r] for a, j in zip(alphas, neigh)
                )
    assert off == len(params)
    return outputs, attention


def oracle_diversity(states, k):
    """Brute-force nearest-neighbour diversity: exhaustive pairwise
    distances, full sorts."""
    n = len(states)
    assert n >= 2
    per_cell = []
    for i in range(n):
        dists = []
        for j in range(n):
            if j == i:
                continue
            d = math.sqrt(sum((a - b) ** 2 for a, b in zip(states[i], states[j])))
            dists.append(d)
        dists.sort()
        take = dists[: min(k, n - 1)]
        per_cell.append(sum(take) / len(take))
    return sum(per_cell) / n


def oracle_one_shot_weights(params, n):
    """Double loop over ordered neuron pairs through the scalar MLP."""
    rows = []
    for i in range(n):           # destination
        row = []
        for j in range(n):       # source
            x = [0.0] * (2 * n)
            x[j] = 1.0
            x[n + i] = 1.0
            row.append(oracle_mlp_forward([2 * n, 16, 16, 1], "relu", "linear",
                                          params, x)[0])
        rows.append(row)
    return rows
