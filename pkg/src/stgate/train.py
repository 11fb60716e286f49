"""End-to-end training: graph construction, minibatch Adam, split evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import Cohort, node_observation_matrix, train_target_stats
from .errors import ContractError, TrainingDivergedError
from .fusion import ModelConfig, forward_features, init_model_params, mse_loss
from .graph import SymptomGraph, correlation_matrix, normalize, threshold_by_density
from .metrics import MetricsReport, evaluate
from .optim import ParamStore, Rng, adam_step, backward
from .temporal import PositionalTable, positional_encoding
from .tensor import Tensor

_DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    standardize_targets: bool = True
    dtype: str = "float32"  # training precision; verification paths use float64

    def __post_init__(self):
        if self.dtype not in _DTYPES:
            raise ContractError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ContractError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainResult:
    params: ParamStore
    graph: SymptomGraph
    model_cfg: ModelConfig
    loss_curve: list[tuple[int, float, float]]  # (epoch, train_mse, val_mse)
    metrics: dict[str, MetricsReport]
    y_mean: float
    y_std: float
    stage_threshold: float
    train_mse_initial: float = float("nan")
    train_mse_final: float = float("nan")


def build_graph(cohort: Cohort, rho: float, corr: np.ndarray | None = None) -> SymptomGraph:
    """Correlation graph from the training split, thresholded to density ``rho``.

    Passing a precomputed ``corr`` lets a density sweep reuse one matrix
    across grid points.
    """
    if corr is None:
        corr = correlation_matrix(node_observation_matrix(cohort, "train"))
    return normalize(threshold_by_density(corr, rho))


def _stack_split(cohort: Cohort, split: str, dtype) -> tuple[np.ndarray, np.ndarray]:
    patients = cohort.split_patients(split)
    x = np.stack([p.features for p in patients]).astype(dtype)  # [B, T, N, d_in]
    y = np.stack([p.y for p in patients])                       # [B, T] raw scale
    return x, y


def _split_mse(x, y_std_units, graph, cfg, params, pe) -> float:
    out = forward_features(Tensor(x), graph, cfg, params, pe)
    return mse_loss(out.y_hat, Tensor(y_std_units)).item()


def train_model(
    cohort: Cohort,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    rho: float,
    seed: int,
    corr: np.ndarray | None = None,
) -> TrainResult:
    """Train on the cohort's training split and evaluate every split.

    Deterministic in ``seed``: parameter init uses one derived stream and
    epoch shuffling another, so identical inputs give identical results.
    The loss curve records the mean minibatch loss per epoch (full-pass at
    epoch 0) plus a full validation pass; the initial/final train MSE
    fields are both full passes, in standardized target units.
    """
    dtype = _DTYPES[train_cfg.dtype]
    graph = build_graph(cohort, rho, corr)
    init_rng = Rng(seed, spawn_key=(0,))
    shuffle_rng = Rng(seed, spawn_key=(1,))
    params = init_model_params(model_cfg, init_rng).astype(dtype)
    pe = positional_encoding(max(cohort.t_steps, 1), model_cfg.d_model)

    y_mean, y_std, threshold = train_target_stats(cohort)
    if not train_cfg.standardize_targets:
        y_mean, y_std = 0.0, 1.0

    stacks = {name: _stack_split(cohort, name, dtype) for name in ("train", "val", "test")}
    std_targets = {
        name: ((y - y_mean) / y_std).astype(dtype) for name, (_, y) in stacks.items()
    }
    x_train = stacks["train"][0]
    n_train = x_train.shape[0]

    def full_mse(split: str) -> float:
        return _split_mse(stacks[split][0], std_targets[split], graph, model_cfg, params, pe)

    initial_train = full_mse("train")
    loss_curve: list[tuple[int, float, float]] = [(0, initial_train, full_mse("val"))]
    batch = train_cfg.batch_size
    for epoch in range(1, train_cfg.epochs + 1):
        order = shuffle_rng.permutation(n_train)
        batch_losses = []
        for start in range(0, n_train, batch):
            idx = order[start : start + batch]
            out = forward_features(Tensor(x_train[idx]), graph, model_cfg, params, pe)
            loss = mse_loss(out.y_hat, Tensor(std_targets["train"][idx]))
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
            batch_losses.append(value)
            params.zero_grads()
            backward(loss, params)
            adam_step(params, train_cfg.lr, train_cfg.beta1, train_cfg.beta2, train_cfg.eps)
        loss_curve.append((epoch, float(np.mean(batch_losses)), full_mse("val")))
    final_train = full_mse("train")

    metrics = {}
    for name, (x, y_raw) in stacks.items():
        out = forward_features(Tensor(x), graph, model_cfg, params, pe)
        y_hat_raw = out.y_hat.data.astype(np.float64) * y_std + y_mean
        metrics[name] = evaluate(y_hat_raw.reshape(-1), y_raw.reshape(-1), threshold)

    return TrainResult(
        params=params,
        graph=graph,
        model_cfg=model_cfg,
        loss_curve=loss_curve,
        metrics=metrics,
        y_mean=y_mean,
        y_std=y_std,
        stage_threshold=threshold,
        train_mse_initial=initial_train,
        train_mse_final=final_train,
    )


def predict_split(
    cohort: Cohort,
    split: str,
    graph: SymptomGraph,
    model_cfg: ModelConfig,
    params: ParamStore,
    y_mean: float,
    y_std: float,
    pe: PositionalTable | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw-scale predictions and targets for one split, flattened over (patient, t)."""
    first = next(iter(params.items()))[1]
    x, y_raw = _stack_split(cohort, split, first.dtype)
    if pe is None:
        pe = positional_encoding(max(cohort.t_steps, 1), model_cfg.d_model)
    out = forward_features(Tensor(x), graph, model_cfg, params, pe)
    y_hat = out.y_hat.data.astype(np.float64) * y_std + y_mean
    return y_hat.reshape(-1), y_raw.reshape(-1)
