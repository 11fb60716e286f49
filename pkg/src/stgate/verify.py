"""Runtime invariant suite behind the ``verify`` command.

Each check exercises one documented invariant: gradient fidelity against
central differences, normalization identities, attention simplex and
equivariance properties, gate contracts, metric agreement with brute-force
oracles, cohort reproducibility and leak-freedom, and artifact
determinism.  Checks are independent; a failure names the module, the
invariant, and what was observed.

The brute-force metric oracles here are deliberately separate from the
production implementations in :mod:`stgate.metrics`.
"""

from __future__ import annotations

import itertools
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import cli
from .cohort import (
    SynthConfig,
    generate,
    node_observation_matrix,
    preprocess,
    train_target_stats,
)
from .config import RunConfig, from_flat, to_flat
from .errors import ShapeError
from .fusion import (
    GateConfig,
    ModelConfig,
    forward_features,
    fuse,
    init_model_params,
    mse_loss,
)
from .gcn import GcnConfig, encode_structural, init_gcn_params
from .graph import (
    SymptomGraph,
    correlation_matrix,
    graph_from_adjacency,
    normalize,
    spectral_radius,
    threshold_by_density,
)
from .metrics import auc, ipw_f1, rmse
from .optim import ParamStore, Rng, adam_step, backward, grad_check, xavier_init
from .temporal import (
    TemporalConfig,
    attention,
    encode_temporal,
    init_temporal_params,
    positional_encoding,
    zero_positional_table,
)
from .tensor import Tensor, concat_lastdim, matmul, sigmoid, softmax_rows


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _require(condition: bool, detail: str) -> None:
    if not condition:
        raise AssertionError(detail)


# -- independent brute-force oracles ------------------------------------------------


def auc_pairwise_oracle(scores: Sequence[float], labels: Sequence[int]) -> float:
    """O(n^2) concordance count: 1 per win, 0.5 per tie, over pos-neg pairs."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p, n in itertools.product(pos, neg):
        if p > n:
            total += 1.0
        elif p == n:
            total += 0.5
    return total / float(len(pos) * len(neg))


def ipw_f1_confusion_oracle(pred: Sequence[int], true: Sequence[int]) -> float:
    """Weighted confusion built sample by sample, then the F1 formula."""
    n = len(true)
    n_pos = sum(1 for t in true if t == 1)
    n_neg = n - n_pos
    tp = fp = fn = 0.0
    for p, t in zip(pred, true):
        weight = n / n_pos if t == 1 else n / n_neg
        if t == 1 and p == 1:
            tp += weight
        elif t == 0 and p == 1:
            fp += weight
        elif t == 1 and p == 0:
            fn += weight
    if tp == 0.0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def mlp_reference(x: np.ndarray, weights: list[np.ndarray], activation: str) -> np.ndarray:
    """Plain-numpy per-node MLP; the empty-graph reduction target."""
    act = {
        "relu": lambda v: np.maximum(v, 0.0),
        "tanh": np.tanh,
        "identity": lambda v: v,
    }[activation]
    h = x
    for w in weights:
        h = act(h @ w)
    return h


# -- numeric core -------------------------------------------------------------------


def check_core_gradient_fidelity_simple(seed: int) -> None:
    rng = Rng(seed, (100,))
    params = ParamStore()
    w1 = params.add("w1", xavier_init(rng, (5, 4)))
    w2 = params.add("w2", xavier_init(rng, (4, 3)))
    gain = params.add("gain", np.ones(3))
    bias = params.add("bias", np.zeros(3))
    x = Tensor(rng.normal(0.0, 1.0, (6, 5)))

    def f():
        from .tensor import layer_norm

        h = sigmoid(matmul(x, w1))
        h = matmul(h, w2)
        h = layer_norm(h, gain, bias, eps=1e-8)
        s = softmax_rows(h)
        return (s * s).mean()

    report = grad_check(f, params, step=1e-5, tol=1e-6)
    _require(report.passed, f"max rel err {report.max_rel_err:.2e} >= 1e-6")


def check_core_gradient_fidelity_deep(seed: int) -> None:
    report = _fused_model_grad_report(seed, gate_mode="learned", n_blocks=2)
    _require(report.max_rel_err < 1e-4 and not report.flagged,
             f"max rel err {report.max_rel_err:.2e} >= 1e-4")


def check_core_shape_algebra(seed: int) -> None:
    a = Tensor(np.zeros((2, 3)))
    b = Tensor(np.zeros((4, 2)))
    for fn in (lambda: matmul(a, b), lambda: concat_lastdim(a, b), lambda: a + Tensor(np.zeros((7, 7)))):
        try:
            fn()
        except ShapeError:
            continue
        raise AssertionError("shape mismatch did not raise ShapeError")


def check_core_determinism(seed: int) -> None:
    def run() -> list[np.ndarray]:
        rng = Rng(seed, (101,))
        params = ParamStore()
        w = params.add("w", xavier_init(rng, (4, 4)))
        x = Tensor(rng.normal(0.0, 1.0, (5, 4)))
        for _ in range(3):
            loss = (sigmoid(matmul(x, w)) ** 2.0).mean()
            params.zero_grads()
            backward(loss, params)
            adam_step(params)
        return [w.data.copy(), w.grad.copy()]

    first, second = run(), run()
    _require(all(np.array_equal(a, b) for a, b in zip(first, second)),
             "fixed seed did not reproduce bit-identical trajectories")


def check_core_softmax_sigmoid_ranges(seed: int) -> None:
    rng = Rng(seed, (102,))
    x = rng.normal(0.0, 20.0, (40, 9))
    rows = softmax_rows(Tensor(x)).data
    _require(np.abs(rows.sum(axis=-1) - 1.0).max() <= 1e-9, "softmax row sums drift past 1e-9")
    _require((rows >= 0.0).all(), "softmax produced a negative weight")
    # |x| < 36 keeps the true value representable strictly inside (0, 1)
    sig = sigmoid(Tensor(rng.uniform(-30.0, 30.0, 500))).data
    _require(((sig > 0.0) & (sig < 1.0)).all(), "sigmoid left the open interval (0, 1)")


# -- graph builder ------------------------------------------------------------------


def check_graph_threshold_monotone(seed: int) -> None:
    rng = Rng(seed, (103,))
    values = rng.uniform(0.0, 1.0, (7, 7))
    corr = np.abs((values + values.T) / 2.0)
    np.fill_diagonal(corr, 1.0)
    previous = None
    for rho in np.linspace(0.0, 1.0, 11):
        edges = set(map(tuple, np.argwhere(threshold_by_density(corr, float(rho)).adjacency)))
        if previous is not None:
            _require(previous <= edges, f"edge set shrank when density rose to {rho:.1f}")
        previous = edges


def check_graph_normalize_identities(seed: int) -> None:
    empty = normalize(SymptomGraph(n_nodes=5, adjacency=np.zeros((5, 5)), density=0.0))
    _require(np.array_equal(empty.normalized, np.eye(5)), "normalize(A=0) != I exactly")
    k2 = normalize(SymptomGraph(n_nodes=2, adjacency=np.array([[0.0, 1.0], [1.0, 0.0]]), density=1.0))
    _require(np.abs(k2.normalized - 0.5).max() <= 1e-12, "K2 normalization off hand value 0.5")
    path = np.zeros((3, 3))
    path[0, 1] = path[1, 0] = path[1, 2] = path[2, 1] = 1.0
    a_hat = normalize(SymptomGraph(n_nodes=3, adjacency=path, density=2 / 3)).normalized
    _require(abs(a_hat[0, 0] - 0.5) <= 1e-12, "path-3 [0,0] != 1/2")
    _require(abs(a_hat[0, 1] - 1.0 / np.sqrt(6.0)) <= 1e-12, "path-3 [0,1] != 1/sqrt(6)")
    _require(abs(a_hat[1, 1] - 1.0 / 3.0) <= 1e-12, "path-3 [1,1] != 1/3")


def check_graph_spectral_radius(seed: int) -> None:
    rng = Rng(seed, (104,))
    for trial in range(100):
        n = 2 + trial % 7
        upper = rng.uniform(0.0, 1.0, (n, n)) < 0.5
        adjacency = np.triu(upper, k=1).astype(float)
        adjacency = adjacency + adjacency.T
        graph = normalize(SymptomGraph(n_nodes=n, adjacency=adjacency, density=0.0))
        _require(np.array_equal(graph.normalized, graph.normalized.T), "normalized operator asymmetric")
        _require(spectral_radius(graph.normalized) <= 1.0 + 1e-9, "spectral radius above 1 + 1e-9")


def check_graph_relabel_equivariance(seed: int) -> None:
    rng = Rng(seed, (105,))
    n = 6
    upper = rng.uniform(0.0, 1.0, (n, n)) < 0.4
    adjacency = np.triu(upper, k=1).astype(float)
    adjacency = adjacency + adjacency.T
    graph = graph_from_adjacency(adjacency)
    perm = rng.permutation(n)
    permuted = graph_from_adjacency(adjacency[np.ix_(perm, perm)])
    _require(
        np.allclose(permuted.normalized, graph.normalized[np.ix_(perm, perm)], atol=1e-12),
        "normalization does not commute with node relabeling",
    )


# -- gcn encoder --------------------------------------------------------------------


def _small_gcn(seed: int, n: int = 5, d_in: int = 2, activation: str = "tanh"):
    rng = Rng(seed, (106,))
    cfg = GcnConfig(layer_dims=[d_in, 4, 4], activation=activation)
    params = ParamStore()
    init_gcn_params(cfg, rng, params)
    upper = rng.uniform(0.0, 1.0, (n, n)) < 0.5
    adjacency = np.triu(upper, k=1).astype(float)
    graph = graph_from_adjacency(adjacency + adjacency.T)
    return cfg, params, graph, rng


def check_gcn_time_slice_purity(seed: int) -> None:
    cfg, params, graph, rng = _small_gcn(seed)
    x = rng.normal(0.0, 1.0, (4, graph.n_nodes, cfg.d_in))
    base = encode_structural(Tensor(x), graph, cfg, params).data
    bumped = x.copy()
    bumped[2] += 1.0
    out = encode_structural(Tensor(bumped), graph, cfg, params).data
    _require(np.array_equal(out[0], base[0]) and np.array_equal(out[1], base[1])
             and np.array_equal(out[3], base[3]), "editing one slice changed another slice")
    dup = x.copy()
    dup[3] = x[1]
    out = encode_structural(Tensor(dup), graph, cfg, params).data
    _require(np.array_equal(out[3], out[1]), "duplicated input slice gave differing outputs")


def check_gcn_empty_graph_is_mlp(seed: int) -> None:
    cfg, params, _, rng = _small_gcn(seed, activation="tanh")
    n = 5
    empty = graph_from_adjacency(np.zeros((n, n)))
    x = rng.normal(0.0, 1.0, (3, n, cfg.d_in))
    out = encode_structural(Tensor(x), empty, cfg, params).data
    weights = [params[f"gcn.layer{l}.weight"].data for l in range(cfg.n_layers)]
    reference = mlp_reference(x, weights, "tanh")
    _require(np.allclose(out, reference, atol=0.0), "empty-graph encoder differs from the per-node MLP")


def check_gcn_relabel_equivariance(seed: int) -> None:
    cfg, params, graph, rng = _small_gcn(seed)
    x = rng.normal(0.0, 1.0, (3, graph.n_nodes, cfg.d_in))
    perm = rng.permutation(graph.n_nodes)
    base = encode_structural(Tensor(x), graph, cfg, params).data
    permuted_graph = graph_from_adjacency(graph.adjacency[np.ix_(perm, perm)])
    out = encode_structural(Tensor(x[:, perm, :]), permuted_graph, cfg, params).data
    _require(np.allclose(out, base[:, perm, :], atol=1e-10),
             "node relabeling does not permute the encoding")


# -- temporal encoder ---------------------------------------------------------------


def check_temporal_attention_simplex(seed: int) -> None:
    rng = Rng(seed, (107,))
    for _ in range(20):
        q = Tensor(rng.normal(0.0, 3.0, (6, 4)))
        k = Tensor(rng.normal(0.0, 3.0, (6, 4)))
        v = Tensor(rng.normal(0.0, 1.0, (6, 4)))
        _, weights = attention(q, k, v, return_weights=True)
        w = weights.data
        _require(np.abs(w.sum(axis=-1) - 1.0).max() <= 1e-9, "attention row sums drift past 1e-9")
        _require((w >= 0.0).all(), "negative attention weight")


def _small_temporal(seed: int, t: int = 5, n: int = 3, d: int = 4):
    rng = Rng(seed, (108,))
    cfg = TemporalConfig(d_model=d, n_heads=2, n_blocks=1)
    params = ParamStore()
    init_temporal_params(cfg, rng, params)
    x = rng.normal(0.0, 1.0, (t, n, d))
    return cfg, params, x, rng


def check_temporal_permutation_equivariance(seed: int) -> None:
    cfg, params, x, rng = _small_temporal(seed)
    t = x.shape[0]
    perm = rng.permutation(t)
    while np.array_equal(perm, np.arange(t)):
        perm = rng.permutation(t)
    zero_pe = zero_positional_table(t, cfg.d_model)
    base = encode_temporal(Tensor(x), cfg, zero_pe, params).data
    permuted = encode_temporal(Tensor(x[perm]), cfg, zero_pe, params).data
    _require(np.allclose(permuted, base[perm], atol=1e-9),
             "time permutation not equivariant with positions disabled")
    pe = positional_encoding(t, cfg.d_model)
    base = encode_temporal(Tensor(x), cfg, pe, params).data
    permuted = encode_temporal(Tensor(x[perm]), cfg, pe, params).data
    _require(np.abs(permuted - base[perm]).max() > 1e-6,
             "positional encoding failed to break permutation equivariance")


def check_temporal_node_independence(seed: int) -> None:
    cfg, params, x, _ = _small_temporal(seed)
    pe = positional_encoding(x.shape[0], cfg.d_model)
    base = encode_temporal(Tensor(x), cfg, pe, params).data
    bumped = x.copy()
    bumped[:, 1, :] += 2.0
    out = encode_temporal(Tensor(bumped), cfg, pe, params).data
    _require(np.array_equal(out[:, 0], base[:, 0]) and np.array_equal(out[:, 2], base[:, 2]),
             "perturbing one node changed another node's encoding")


def check_temporal_block_grad(seed: int) -> None:
    rng = Rng(seed, (109,))
    cfg = TemporalConfig(d_model=4, n_heads=2, n_blocks=1)
    params = ParamStore()
    init_temporal_params(cfg, rng, params)
    x = Tensor(rng.normal(0.0, 1.0, (3, 2, 4)))
    pe = positional_encoding(3, 4)
    target = Tensor(rng.normal(0.0, 1.0, (3, 2, 4)))

    def f():
        out = encode_temporal(x, cfg, pe, params)
        err = out - target
        return (err * err).mean()

    report = grad_check(f, params, step=1e-5, tol=1e-4)
    _require(report.passed, f"block grad max rel err {report.max_rel_err:.2e} >= 1e-4")


# -- fusion model -------------------------------------------------------------------


def check_fusion_gate_convexity(seed: int) -> None:
    rng = Rng(seed, (110,))
    d = 4
    params = ParamStore()
    params.add("gate.weight", rng.normal(0.0, 1.0, (2 * d, d)))
    params.add("gate.bias", rng.normal(0.0, 1.0, d))
    gate = GateConfig(mode="learned")
    for _ in range(100):
        a = Tensor(rng.normal(0.0, 2.0, (3, 2, d)))
        b = Tensor(rng.normal(0.0, 2.0, (3, 2, d)))
        z, gamma = fuse(a, b, gate, params)
        lo = np.minimum(a.data, b.data)
        hi = np.maximum(a.data, b.data)
        _require(((z.data >= lo - 1e-12) & (z.data <= hi + 1e-12)).all(),
                 "fused value escaped the elementwise interval")
        _require(((gamma.data > 0.0) & (gamma.data < 1.0)).all(), "gate left (0, 1)")


def check_fusion_endpoints(seed: int) -> None:
    rng = Rng(seed, (111,))
    a = Tensor(rng.normal(0.0, 1.0, (4, 3, 5)))
    b = Tensor(rng.normal(0.0, 1.0, (4, 3, 5)))
    params = ParamStore()
    z1, _ = fuse(a, b, GateConfig(mode="fixed", fixed_gamma=1.0), params)
    z0, _ = fuse(a, b, GateConfig(mode="fixed", fixed_gamma=0.0), params)
    _require(np.array_equal(z1.data, a.data), "gamma=1 is not bit-exactly the structural branch")
    _require(np.array_equal(z0.data, b.data), "gamma=0 is not bit-exactly the temporal branch")


def check_fusion_zero_init_gate(seed: int) -> None:
    rng = Rng(seed, (112,))
    d = 6
    params = ParamStore()
    params.add("gate.weight", np.zeros((2 * d, d)))
    params.add("gate.bias", np.zeros(d))
    a = Tensor(rng.normal(0.0, 1.0, (2, 3, d)))
    b = Tensor(rng.normal(0.0, 1.0, (2, 3, d)))
    _, gamma = fuse(a, b, GateConfig(mode="learned"), params)
    _require(np.all(gamma.data == 0.5), "zero-initialized gate is not exactly 0.5")


def check_fusion_loss_contract(seed: int) -> None:
    rng = Rng(seed, (113,))
    y = Tensor(rng.normal(0.0, 1.0, 8))
    _require(mse_loss(y, Tensor(y.data.copy())).item() == 0.0, "exact fit has nonzero loss")
    for _ in range(20):
        y_hat = Tensor(rng.normal(0.0, 1.0, 8))
        value = mse_loss(y_hat, y).item()
        _require(value >= 0.0, "negative mean squared error")
        if not np.array_equal(y_hat.data, y.data):
            _require(value > 0.0, "loss zero on an inexact fit")


def _fused_model_grad_report(seed: int, gate_mode: str, n_blocks: int = 1,
                             fixed_gamma: float = 0.5):
    rng = Rng(seed, (114,))
    model_cfg = ModelConfig(
        gcn=GcnConfig(layer_dims=[2, 4, 4], activation="tanh"),
        temporal=TemporalConfig(d_model=4, n_heads=2, n_blocks=n_blocks),
        gate=GateConfig(mode=gate_mode, fixed_gamma=fixed_gamma),
    )
    params = init_model_params(model_cfg, Rng(seed, (115,)))
    if gate_mode == "learned":
        # move the gate off its zero init so its gradients are generic
        params["gate.weight"].data = Rng(seed, (116,)).normal(0.0, 0.5, (8, 4))
    n = 4
    upper = Rng(seed, (117,)).uniform(0.0, 1.0, (n, n)) < 0.5
    graph = graph_from_adjacency(np.triu(upper, k=1).astype(float) + np.triu(upper, k=1).astype(float).T)
    x = Tensor(rng.normal(0.0, 1.0, (3, n, 2)))
    y = Tensor(rng.normal(0.0, 2.0, 3))
    pe = positional_encoding(3, 4)

    def f():
        out = forward_features(x, graph, model_cfg, params, pe)
        return mse_loss(out.y_hat, y)

    return grad_check(f, params, step=1e-5, tol=1e-4)


def check_fusion_end_to_end_grad(seed: int) -> None:
    for mode in ("learned", "fixed"):
        report = _fused_model_grad_report(seed, gate_mode=mode)
        _require(report.passed,
                 f"{mode}-gate grad max rel err {report.max_rel_err:.2e} >= 1e-4")


# -- metrics ------------------------------------------------------------------------


def check_metrics_auc_monotone_invariance(seed: int) -> None:
    rng = Rng(seed, (118,))
    for _ in range(30):
        n = 12
        scores = rng.normal(0.0, 1.0, n)
        labels = (rng.uniform(0.0, 1.0, n) < 0.5).astype(int)
        if labels.sum() in (0, n):
            continue
        base = auc(scores, labels)
        transformed = auc(np.exp(2.0 * scores) + 3.0, labels)
        _require(abs(base - transformed) <= 1e-12, "AUC changed under a strictly increasing transform")


def check_metrics_auc_complement(seed: int) -> None:
    rng = Rng(seed, (119,))
    for _ in range(30):
        n = 15
        scores = rng.normal(0.0, 1.0, n)  # continuous, ties have measure zero
        labels = (rng.uniform(0.0, 1.0, n) < 0.4).astype(int)
        if labels.sum() in (0, n):
            continue
        _require(abs(auc(scores, labels) + auc(-scores, labels) - 1.0) <= 1e-12,
                 "AUC(s) + AUC(-s) != 1 without ties")


def check_metrics_ipw_f1_duplication(seed: int) -> None:
    rng = Rng(seed, (120,))
    for k in (2, 3):
        true = (rng.uniform(0.0, 1.0, 10) < 0.3).astype(int)
        pred = (rng.uniform(0.0, 1.0, 10) < 0.5).astype(int)
        if true.sum() in (0, 10):
            continue
        base = ipw_f1(pred, true)
        dup = ipw_f1(list(pred) * k, list(true) * k)
        _require(abs(base - dup) <= 1e-12, f"IPW-F1 changed when dataset duplicated x{k}")


def check_metrics_rmse_properties(seed: int) -> None:
    rng = Rng(seed, (121,))
    a = rng.normal(0.0, 1.0, 9)
    b = rng.normal(0.0, 1.0, 9)
    _require(rmse(a, b) == rmse(b, a), "rmse asymmetric")
    _require(abs(rmse(3.0 * a, 3.0 * b) - 3.0 * rmse(a, b)) <= 1e-12,
             "rmse does not scale linearly under joint scaling")


def check_metrics_oracle_equivalence(seed: int) -> None:
    rng = Rng(seed, (122,))
    hand_auc = auc([0.9, 0.8, 0.7, 0.1], [1, 0, 1, 0])
    _require(hand_auc == 0.75, f"hand AUC case gave {hand_auc}")
    hand_f1 = ipw_f1([1, 0, 1, 0, 0, 0], [1, 1, 0, 0, 0, 0])
    _require(abs(hand_f1 - 100.0 * 4.0 / 7.0) <= 1e-12, f"hand IPW-F1 case gave {hand_f1}")
    for _ in range(200):
        n = int(rng.uniform(2, 51))
        scores = np.round(rng.normal(0.0, 1.0, n), 1)  # coarse grid forces ties
        labels = (rng.uniform(0.0, 1.0, n) < 0.5).astype(int)
        if labels.sum() in (0, n):
            continue
        _require(auc(scores, labels) == auc_pairwise_oracle(scores, labels),
                 "AUC differs from the pairwise oracle")
        pred = (rng.uniform(0.0, 1.0, n) < 0.5).astype(int)
        _require(abs(ipw_f1(pred, labels) - ipw_f1_confusion_oracle(pred, labels)) <= 1e-12,
                 "IPW-F1 differs from the weighted-confusion oracle")


# -- cohort io ----------------------------------------------------------------------


_TINY_SYNTH = dict(n_patients=24, t_steps=4, n_nodes=6, d_in=1, n_communities=2, seed=5)


def check_cohort_seed_reproducibility(seed: int) -> None:
    cfg = SynthConfig(**{**_TINY_SYNTH, "seed": seed})
    a, b = generate(cfg), generate(cfg)
    for pa, pb in zip(a.patients, b.patients):
        _require(pa.patient_id == pb.patient_id and np.array_equal(pa.features, pb.features)
                 and np.array_equal(pa.y, pb.y), "same seed produced differing cohorts")
    pa = preprocess(a, split_seed=seed)
    pb = preprocess(b, split_seed=seed)
    _require(pa.splits == pb.splits, "same seed produced differing splits")


def check_cohort_no_leakage(seed: int) -> None:
    cohort = preprocess(generate(SynthConfig(**_TINY_SYNTH)), split_seed=seed)
    raw = generate(SynthConfig(**_TINY_SYNTH))
    train_ids = set(cohort.splits["train"])
    raw_train = np.concatenate([p.features for p in raw.patients if p.patient_id in train_ids])
    _require(np.allclose(cohort.scaler_mean, raw_train.mean(axis=0), atol=1e-12),
             "scaler mean is not a train-only statistic")
    _require(np.allclose(cohort.scaler_std, raw_train.std(axis=0), atol=1e-12),
             "scaler std is not a train-only statistic")
    train_y = np.concatenate([p.y for p in raw.patients if p.patient_id in train_ids])
    _require(train_target_stats(cohort)[2] == float(np.median(train_y)),
             "stage threshold is not the train median")
    obs = node_observation_matrix(cohort, "train")
    expected_rows = sum(p.t_steps for p in cohort.split_patients("train"))
    _require(obs.shape[0] == expected_rows, "graph statistics include non-train rows")
    corr_train = correlation_matrix(obs)
    _require(np.array_equal(corr_train, correlation_matrix(obs)), "correlation not deterministic")


def check_cohort_postprocess_rectangular(seed: int) -> None:
    cohort = preprocess(generate(SynthConfig(**_TINY_SYNTH)), split_seed=seed)
    lengths = {p.t_steps for p in cohort.patients}
    _require(len(lengths) == 1, "non-uniform series length after preprocessing")
    for p in cohort.patients:
        _require(np.isfinite(p.features).all(), "missing values survived preprocessing")
    train_stack = np.concatenate([p.features for p in cohort.split_patients("train")])
    _require(np.abs(train_stack.mean(axis=0)).max() <= 1e-9, "train features not centered")
    _require(np.abs(train_stack.std(axis=0) - 1.0).max() <= 1e-6, "train features not unit variance")


# -- cli harness --------------------------------------------------------------------


def _tiny_run_config(seed: int, out_dir: str) -> RunConfig:
    flat = {
        "seed": seed,
        "out": out_dir,
        "synth.n_patients": 40,
        "synth.t_steps": 4,
        "synth.n_nodes": 6,
        "synth.d_in": 1,
        "synth.n_communities": 2,
        "model.hidden_dims": "8,8",
        "model.n_heads": 2,
        "model.n_blocks": 1,
        "train.epochs": 2,
        "train.batch_size": 8,
    }
    return from_flat(flat)


def check_cli_artifact_determinism(seed: int) -> None:
    artifacts = ("metrics.json", "loss_curve.csv", "checkpoint.json", "graph.edgelist")
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "run"
        cfg = _tiny_run_config(seed, str(out))
        _require(cli.cmd_train(cfg) == 0, "first train run failed")
        first = {name: (out / name).read_bytes() for name in artifacts}
        _require(cli.cmd_train(_tiny_run_config(seed, str(out))) == 0, "second train run failed")
        for name in artifacts:
            _require(first[name] == (out / name).read_bytes(),
                     f"{name} differs between identical runs")
            text = first[name].decode("utf-8")
            _require("seed" in text and "train.epochs" in text,
                     f"{name} does not embed the run configuration")


def check_cli_sweep_rows(seed: int) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        cfg = _tiny_run_config(seed, tmp)
        code = cli.cmd_sweep_gate(cfg, [1.0, 0.0, 0.5])
        _require(code == 0, f"sweep exit code {code}")
        lines = [l for l in (Path(tmp) / "sweep_gate.csv").read_text().splitlines()
                 if l and not l.startswith("#")]
        _require(lines[0] == "gamma,auc,rmse,ipw_f1", f"unexpected header {lines[0]!r}")
        values = [float(l.split(",")[0]) for l in lines[1:]]
        _require(values == sorted(values), "sweep rows not sorted by the swept variable")
        _require(len(values) == 3, f"expected one row per grid point, got {len(values)}")


CHECKS: list[tuple[str, Callable[[int], None]]] = [
    ("numeric-core/gradient-fidelity-simple", check_core_gradient_fidelity_simple),
    ("numeric-core/gradient-fidelity-deep", check_core_gradient_fidelity_deep),
    ("numeric-core/shape-algebra-total", check_core_shape_algebra),
    ("numeric-core/determinism", check_core_determinism),
    ("numeric-core/softmax-sigmoid-ranges", check_core_softmax_sigmoid_ranges),
    ("graph-builder/threshold-monotone", check_graph_threshold_monotone),
    ("graph-builder/normalize-identities", check_graph_normalize_identities),
    ("graph-builder/spectral-radius", check_graph_spectral_radius),
    ("graph-builder/relabel-equivariance", check_graph_relabel_equivariance),
    ("gcn-encoder/time-slice-purity", check_gcn_time_slice_purity),
    ("gcn-encoder/empty-graph-mlp", check_gcn_empty_graph_is_mlp),
    ("gcn-encoder/relabel-equivariance", check_gcn_relabel_equivariance),
    ("temporal-encoder/attention-simplex", check_temporal_attention_simplex),
    ("temporal-encoder/permutation-equivariance", check_temporal_permutation_equivariance),
    ("temporal-encoder/node-independence", check_temporal_node_independence),
    ("temporal-encoder/block-gradients", check_temporal_block_grad),
    ("fusion-model/gate-convexity", check_fusion_gate_convexity),
    ("fusion-model/endpoint-exactness", check_fusion_endpoints),
    ("fusion-model/zero-init-gate-half", check_fusion_zero_init_gate),
    ("fusion-model/loss-contract", check_fusion_loss_contract),
    ("fusion-model/end-to-end-gradients", check_fusion_end_to_end_grad),
    ("evalkit/auc-monotone-invariance", check_metrics_auc_monotone_invariance),
    ("evalkit/auc-complement", check_metrics_auc_complement),
    ("evalkit/ipw-f1-duplication", check_metrics_ipw_f1_duplication),
    ("evalkit/rmse-properties", check_metrics_rmse_properties),
    ("evalkit/oracle-equivalence", check_metrics_oracle_equivalence),
    ("cohort-io/seed-reproducibility", check_cohort_seed_reproducibility),
    ("cohort-io/no-leakage", check_cohort_no_leakage),
    ("cohort-io/postprocess-rectangular", check_cohort_postprocess_rectangular),
    ("cli-harness/artifact-determinism", check_cli_artifact_determinism),
    ("cli-harness/sweep-rows", check_cli_sweep_rows),
]


def run_all(seed: int = 7) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        try:
            fn(seed)
        except AssertionError as exc:
            results.append(CheckResult(name, False, str(exc)))
        except Exception as exc:  # noqa: BLE001 - a crash is a failed invariant
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
        else:
            results.append(CheckResult(name, True))
    return results
