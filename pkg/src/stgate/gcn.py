"""Multi-layer graph convolution over per-time-step node features.

Each layer maps node features ``h`` to ``act(A_hat @ h @ W)`` where
``A_hat`` is the graph's self-looped symmetric normalization.  The same
weight stack is applied independently to every time slice, so the output
at step ``t`` depends only on the input at step ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError
from .graph import SymptomGraph
from .optim import ParamStore, Rng, xavier_init
from .tensor import Tensor, activation_fn, add, matmul


@dataclass
class GcnConfig:
    """Layer widths ``[d_in, d_1, ..., d_h]`` plus the shared activation."""

    layer_dims: list[int] = field(default_factory=lambda: [2, 32, 32])
    activation: str = "relu"
    bias: bool = False

    def __post_init__(self):
        if len(self.layer_dims) < 2:
            raise ContractError("layer_dims needs at least [d_in, d_out]")
        if any(d < 1 for d in self.layer_dims):
            raise ContractError(f"layer dims must be >= 1, got {self.layer_dims}")
        activation_fn(self.activation)  # validates the name

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def d_in(self) -> int:
        return self.layer_dims[0]

    @property
    def d_out(self) -> int:
        return self.layer_dims[-1]


def init_gcn_params(cfg: GcnConfig, rng: Rng, params: ParamStore, prefix: str = "gcn") -> None:
    for l in range(cfg.n_layers):
        shape = (cfg.layer_dims[l], cfg.layer_dims[l + 1])
        params.add(f"{prefix}.layer{l}.weight", xavier_init(rng, shape))
        if cfg.bias:
            params.add(f"{prefix}.layer{l}.bias", Tensor(np.zeros(shape[1])))


def gcn_layer(h: Tensor, graph: SymptomGraph, w: Tensor, activation: str = "relu",
              bias: Tensor | None = None) -> Tensor:
    """One graph convolution: ``act(A_hat @ h @ w)``.

    ``h`` is ``[..., N, d_l]``; leading axes (time, batch) ride along
    unchanged.  The graph must already be normalized.
    """
    if graph.normalized is None:
        raise ContractError("graph is not normalized; call normalize() first")
    if h.shape[-2] != graph.n_nodes:
        raise ShapeError(
            f"node axis {h.shape[-2]} does not match graph with {graph.n_nodes} nodes"
        )
    propagated = matmul(Tensor(graph.normalized.astype(h.dtype, copy=False)), h)
    mixed = matmul(propagated, w)
    if bias is not None:
        mixed = add(mixed, bias)
    return activation_fn(activation)(mixed)


def encode_structural(
    x_seq: Tensor,
    graph: SymptomGraph,
    cfg: GcnConfig,
    params: ParamStore,
    prefix: str = "gcn",
) -> Tensor:
    """Apply the full layer stack to every time slice of ``x_seq``.

    ``x_seq`` is ``[T, N, d_in]`` (or with extra leading batch axes);
    weights are shared across slices.
    """
    if x_seq.shape[-1] != cfg.d_in:
        raise ShapeError(f"input feature width {x_seq.shape[-1]} != configured d_in {cfg.d_in}")
    h = x_seq
    for l in range(cfg.n_layers):
        w = params[f"{prefix}.layer{l}.weight"]
        b = params[f"{prefix}.layer{l}.bias"] if cfg.bias else None
        h = gcn_layer(h, graph, w, cfg.activation, bias=b)
    return h
