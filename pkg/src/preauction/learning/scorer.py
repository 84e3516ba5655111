"""Permutation-equivariant set scorer with hand-written reverse mode.

Per-ad encoder MLP -> set aggregation (mean / max / min) -> per-ad head on
``[normalized raw features | global encoding]``. Everything is float64 numpy
so gradients can be checked against finite differences to tight tolerances.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FORMAT_TAG = "pas-scorer/1"
_MAGIC = b"PASMODEL"
AGGREGATIONS = ("mean", "max", "min")


def make_architecture(n_features: int, encoder_widths=(32, 32), head_widths=(32,),
                      aggregations=("mean", "max"), activation: str = "tanh",
                      output: str = "identity", score_mode: str = "logit",
                      include_bid: bool = True) -> dict:
    for agg in aggregations:
        if agg not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {agg!r}")
    if activation not in ("tanh", "relu"):
        raise ValueError(f"unknown activation {activation!r}")
    if output not in ("identity", "softplus"):
        raise ValueError(f"unknown output link {output!r}")
    if not aggregations:
        # pointwise model: no set context, so the encoder would be dead weight
        encoder_widths = ()
    elif not encoder_widths:
        raise ValueError("aggregating the set needs at least one encoder layer")
    return {
        "n_features": int(n_features),
        "encoder_widths": [int(w) for w in encoder_widths],
        "head_widths": [int(w) for w in head_widths],
        "aggregations": list(aggregations),
        "activation": activation,
        "output": output,
        "score_mode": score_mode,
        "include_bid": bool(include_bid),
        "input_shift": [0.0] * int(n_features),
        "input_scale": [1.0] * int(n_features),
        "target_scale": 1.0,
    }


def weight_layout(arch: dict) -> list:
    """(name, shape, offset) for every parameter block, in storage order."""
    layout = []
    offset = 0

    def add(name, shape):
        nonlocal offset
        layout.append((name, shape, offset))
        offset += int(np.prod(shape))

    width = arch["n_features"]
    for i, w in enumerate(arch["encoder_widths"]):
        add(f"enc{i}.W", (width, w))
        add(f"enc{i}.b", (w,))
        width = w
    width = arch["n_features"] + len(arch["aggregations"]) * (arch["encoder_widths"] or [0])[-1]
    for i, w in enumerate(list(arch["head_widths"]) + [1]):
        add(f"head{i}.W", (width, w))
        add(f"head{i}.b", (w,))
        width = w
    return layout


def n_weights(arch: dict) -> int:
    name, shape, offset = weight_layout(arch)[-1]
    return offset + int(np.prod(shape))


@dataclass
class ScorerParams:
    architecture: dict
    weights: np.ndarray
    version: str = FORMAT_TAG
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        expected = n_weights(self.architecture)
        if self.weights.shape != (expected,):
            raise ValueError(f"architecture needs {expected} weights, got {self.weights.shape}")

    def views(self, flat: Optional[np.ndarray] = None) -> dict:
        flat = self.weights if flat is None else flat
        return {
            name: flat[off: off + int(np.prod(shape))].reshape(shape)
            for name, shape, off in weight_layout(self.architecture)
        }

    def copy(self) -> "ScorerParams":
        return ScorerParams(json.loads(json.dumps(self.architecture)), self.weights.copy(),
                            self.version, dict(self.metadata))


def init_params(arch: dict, rng: np.random.Generator, scale: float = 1.0) -> ScorerParams:
    flat = np.zeros(n_weights(arch))
    params = ScorerParams(arch, flat)
    for name, block in params.views().items():
        if name.endswith(".W"):
            bound = scale / np.sqrt(block.shape[0])
            block[...] = rng.uniform(-bound, bound, size=block.shape)
    return params


def _act(z, kind):
    return np.tanh(z) if kind == "tanh" else np.maximum(z, 0.0)


def _act_grad(z, a, kind):
    return 1.0 - a * a if kind == "tanh" else (z > 0).astype(np.float64)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def forward(params: ScorerParams, features, return_cache: bool = False):
    """Per-ad outputs for an (N, d) matrix or a (B, N, d) batch."""
    arch = params.architecture
    x = np.asarray(features, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] != arch["n_features"]:
        raise ValueError(
            f"features must be (N, {arch['n_features']}) or (B, N, {arch['n_features']}), got {np.shape(features)}"
        )
    w = params.views()
    kind = arch["activation"]
    xn = (x - np.asarray(arch["input_shift"])) / np.asarray(arch["input_scale"])

    enc = []
    h = xn
    for i in range(len(arch["encoder_widths"])):
        z = h @ w[f"enc{i}.W"] + w[f"enc{i}.b"]
        a = _act(z, kind)
        enc.append((h, z, a))
        h = a

    pooled, argidx = [], {}
    for agg in arch["aggregations"]:
        if agg == "mean":
            pooled.append(h.mean(axis=1))
        elif agg == "max":
            argidx["max"] = h.argmax(axis=1)
            pooled.append(h.max(axis=1))
        else:
            argidx["min"] = h.argmin(axis=1)
            pooled.append(h.min(axis=1))
    if pooled:
        g = np.concatenate(pooled, axis=-1)
        hin = np.concatenate([xn, np.broadcast_to(g[:, None, :], xn.shape[:2] + g.shape[-1:])], axis=-1)
    else:
        hin = xn

    head = []
    h = hin
    n_head = len(arch["head_widths"]) + 1
    for i in range(n_head):
        z = h @ w[f"head{i}.W"] + w[f"head{i}.b"]
        a = z if i == n_head - 1 else _act(z, kind)
        head.append((h, z, a))
        h = a
    raw = h[..., 0]
    out = _softplus(raw) if arch["output"] == "softplus" else raw
    if squeeze:
        out = out[0]
    if not return_cache:
        return out
    cache = dict(enc=enc, head=head, argidx=argidx, raw=raw, squeeze=squeeze)
    return out, cache


def backward(params: ScorerParams, cache: dict, grad_out) -> np.ndarray:
    """Flat gradient of a scalar loss given d loss / d outputs."""
    arch = params.architecture
    kind = arch["activation"]
    w = params.views()
    grad = np.zeros_like(params.weights)
    gw = params.views(grad)

    d = np.asarray(grad_out, dtype=np.float64)
    if cache["squeeze"]:
        d = d[None]
    if arch["output"] == "softplus":
        d = d * _sigmoid(cache["raw"])
    d = d[..., None]

    head = cache["head"]
    n_head = len(head)
    for i in reversed(range(n_head)):
        h_in, z, a = head[i]
        if i != n_head - 1:
            d = d * _act_grad(z, a, kind)
        gw[f"head{i}.W"] += np.einsum("bni,bno->io", h_in, d)
        gw[f"head{i}.b"] += d.sum(axis=(0, 1))
        d = d @ w[f"head{i}.W"].T

    enc = cache["enc"]
    if not enc:
        return grad
    n_feat = arch["n_features"]
    width = arch["encoder_widths"][-1]
    d_g = d[..., n_feat:].sum(axis=1)
    e_out = enc[-1][2]
    n_items = e_out.shape[1]
    d_e = np.zeros_like(e_out)
    b_idx = np.arange(e_out.shape[0])[:, None]
    c_idx = np.arange(width)[None, :]
    for j, agg in enumerate(arch["aggregations"]):
        part = d_g[:, j * width:(j + 1) * width]
        if agg == "mean":
            d_e += part[:, None, :] / n_items
        else:
            d_e[b_idx, cache["argidx"][agg], c_idx] += part

    d = d_e
    for i in reversed(range(len(enc))):
        h_in, z, a = enc[i]
        d = d * _act_grad(z, a, kind)
        gw[f"enc{i}.W"] += np.einsum("bni,bno->io", h_in, d)
        gw[f"enc{i}.b"] += d.sum(axis=(0, 1))
        if i:
            d = d @ w[f"enc{i}.W"].T
    return grad


def save_params(params: ScorerParams, path) -> None:
    """Binary model file: magic, header length, JSON header, little-endian f8 weights."""
    header = json.dumps(
        {"format": params.version, "architecture": params.architecture,
         "n_weights": int(params.weights.size), "metadata": params.metadata},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(params.weights.astype("<f8").tobytes())


def load_params(path) -> ScorerParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _MAGIC:
        raise ValueError(f"{path}: not a scorer model file")
    (hlen,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12:12 + hlen].decode("utf-8"))
    if header.get("format") != FORMAT_TAG:
        raise ValueError(f"{path}: unsupported model format {header.get('format')!r}")
    weights = np.frombuffer(blob[12 + hlen:], dtype="<f8").astype(np.float64)
    if weights.size != header["n_weights"]:
        raise ValueError(f"{path}: truncated weights ({weights.size} of {header['n_weights']})")
    return ScorerParams(header["architecture"], weights, header["format"], header.get("metadata", {}))
