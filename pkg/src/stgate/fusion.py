"""Gated fusion of the structural and temporal encodings, plus the readout head.

The gate is an elementwise convex mixture ``z = gamma * h_gcn +
(1 - gamma) * h_tform``.  In learned mode ``gamma`` is the sigmoid of a
linear map over the concatenated branches; in fixed mode it is a constant
scalar (the sweep knob).  The readout mean-pools nodes and maps each time
step to a scalar progression score; training minimizes the mean squared
error over time steps.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ContractError, ShapeError
from .gcn import GcnConfig, encode_structural, init_gcn_params
from .graph import SymptomGraph, graph_from_adjacency
from .optim import ParamStore, Rng, xavier_init
from .temporal import (
    PositionalTable,
    TemporalConfig,
    encode_temporal,
    init_temporal_params,
    positional_encoding,
)
from .tensor import Tensor, add, concat_lastdim, matmul, mul, reshape, sigmoid, sub, tmean


@dataclass
class GateConfig:
    """Gate mode: learned sigmoid mixture, or a fixed scalar for sweeps."""

    mode: str = "learned"
    fixed_gamma: float = 0.5

    def __post_init__(self):
        if self.mode not in ("learned", "fixed"):
            raise ContractError(f"gate mode must be 'learned' or 'fixed', got {self.mode!r}")
        if not (0.0 <= self.fixed_gamma <= 1.0):
            raise ContractError(f"fixed_gamma must lie in [0, 1], got {self.fixed_gamma}")


@dataclass
class ModelConfig:
    """Bundle of the three sub-configs describing one model."""

    gcn: GcnConfig = field(default_factory=GcnConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    gate: GateConfig = field(default_factory=GateConfig)

    def __post_init__(self):
        if self.gcn.d_out != self.temporal.d_model:
            raise ContractError(
                f"GCN output width {self.gcn.d_out} must equal d_model {self.temporal.d_model}"
            )

    @property
    def d_model(self) -> int:
        return self.temporal.d_model


@dataclass
class ModelOutput:
    """Per-step predictions plus the fused representation and gate trace."""

    y_hat: Tensor        # [T] (or [B, T] for batched input)
    gate_trace: Tensor   # [T, N, d] gamma values, diagnostic
    fused: Tensor        # [T, N, d]


def init_model_params(cfg: ModelConfig, rng: Rng) -> ParamStore:
    """Create and initialize every named parameter of the full model.

    The gate weights start at zero so training begins at an exact 0.5
    mixture; norm gains start at one, all biases at zero.
    """
    params = ParamStore()
    init_gcn_params(cfg.gcn, rng, params)
    init_temporal_params(cfg.temporal, rng, params)
    d = cfg.d_model
    if cfg.gate.mode == "learned":
        params.add("gate.weight", Tensor(np.zeros((2 * d, d))))
        params.add("gate.bias", Tensor(np.zeros(d)))
    params.add("readout.weight", xavier_init(rng, (d, 1)))
    params.add("readout.bias", Tensor(np.zeros(1)))
    return params


def fuse(h_gcn: Tensor, h_tform: Tensor, gate: GateConfig, params: ParamStore) -> tuple[Tensor, Tensor]:
    """Convex mixture of the two branches; returns ``(z, gamma)``.

    Fixed gamma 0 or 1 returns the corresponding branch tensor itself, so
    the endpoint reproduction is bit-exact.
    """
    if h_gcn.shape != h_tform.shape:
        raise ShapeError(f"branch shapes differ: {h_gcn.shape} vs {h_tform.shape}")
    if gate.mode == "fixed":
        g = gate.fixed_gamma
        gamma = Tensor(np.full(h_gcn.shape, g, dtype=h_gcn.dtype))
        if g == 0.0:
            return h_tform, gamma
        if g == 1.0:
            return h_gcn, gamma
        z = add(mul(h_gcn, g), mul(h_tform, 1.0 - g))
        return z, gamma
    joint = concat_lastdim(h_gcn, h_tform)
    gamma = sigmoid(add(matmul(joint, params["gate.weight"]), params["gate.bias"]))
    z = add(mul(gamma, h_gcn), mul(sub(1.0, gamma), h_tform))
    return z, gamma


def readout(z: Tensor, params: ParamStore) -> Tensor:
    """Mean-pool the node axis, then affine-map each step to a scalar score."""
    pooled = tmean(z, axis=-2)  # [..., T, d]
    scores = add(matmul(pooled, params["readout.weight"]), params["readout.bias"])
    return reshape(scores, scores.shape[:-1])


def forward_features(
    x: Tensor,
    graph: SymptomGraph,
    cfg: ModelConfig,
    params: ParamStore,
    pe: PositionalTable,
) -> ModelOutput:
    """Full pipeline on raw features ``[T, N, d_in]`` (leading batch axes allowed).

    Structural encoding feeds the temporal encoder, and the gate fuses the
    structural branch with its temporally contextualized counterpart.
    """
    h_gcn = encode_structural(x, graph, cfg.gcn, params)
    h_tform = encode_temporal(h_gcn, cfg.temporal, pe, params)
    fused, gamma = fuse(h_gcn, h_tform, cfg.gate, params)
    y_hat = readout(fused, params)
    return ModelOutput(y_hat=y_hat, gate_trace=gamma, fused=fused)


def forward(patient, graph: SymptomGraph, cfg: ModelConfig, params: ParamStore,
            pe: PositionalTable | None = None) -> ModelOutput:
    """Run the model on one patient's series (``features`` shaped [T, N, d_in])."""
    x = patient.features if not isinstance(patient, Tensor) else patient
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"patient features must be [T, N, d_in], got shape {x.shape}")
    if pe is None:
        pe = positional_encoding(x.shape[0], cfg.d_model)
    return forward_features(x, graph, cfg, params, pe)


def mse_loss(y_hat: Tensor, y: Tensor) -> Tensor:
    """Mean over time steps of the squared prediction error."""
    if y_hat.shape != y.shape:
        raise ShapeError(f"prediction/target lengths differ: {y_hat.shape} vs {y.shape}")
    if y.size == 0:
        raise ContractError("mse_loss needs at least one time step")
    err = sub(y_hat, y)
    return tmean(mul(err, err))


# -- checkpointing --------------------------------------------------------------


def save_checkpoint(path: str | Path, params: ParamStore, config: dict[str, Any],
                    graph: SymptomGraph | None = None,
                    extras: dict[str, Any] | None = None) -> None:
    """Write a self-describing JSON checkpoint.

    Raw parameter bytes are base64-encoded little-endian float64, so a
    round-trip reload is bit-exact.  The run configuration, the trained
    graph, and any extra scalars (target scaler, stage threshold) ride
    along for later evaluation.
    """
    payload: dict[str, Any] = {
        "format": "stgate-checkpoint-v1",
        "config": config,
        "params": {
            name: {
                "shape": list(t.shape),
                "dtype": "float64",
                "data": base64.b64encode(
                    np.ascontiguousarray(t.data, dtype="<f8").tobytes()
                ).decode("ascii"),
            }
            for name, t in params.items()
        },
    }
    if graph is not None:
        payload["graph"] = {
            "n_nodes": graph.n_nodes,
            "density": graph.density,
            "edges": [[i, j, w] for i, j, w in graph.edge_list()],
        }
    if extras:
        payload["extras"] = extras
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any], SymptomGraph | None, dict[str, Any]]:
    """Read a checkpoint; returns (param arrays, config echo, graph, extras)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "stgate-checkpoint-v1":
        raise ContractError(f"{path}: not a recognized checkpoint file")
    arrays: dict[str, np.ndarray] = {}
    for name, spec in payload["params"].items():
        raw = base64.b64decode(spec["data"])
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(spec["shape"]).copy()
    graph = None
    if "graph" in payload:
        g = payload["graph"]
        n = g["n_nodes"]
        adjacency = np.zeros((n, n))
        weights = np.zeros((n, n))
        for i, j, w in g["edges"]:
            adjacency[i][j] = adjacency[j][i] = 1.0
            weights[i][j] = weights[j][i] = w
        graph = replace(graph_from_adjacency(adjacency, weights), density=g["density"])
    return arrays, payload.get("config", {}), graph, payload.get("extras", {})
