"""Synthetic longitudinal cohorts and PPMI-style CSV ingestion.

The generator draws a latent severity trajectory per patient (monotone
drift plus noise), emits per-node indicator channels as loadings on that
severity plus a community-shared nuisance factor, and maps severity to a
continuous progression score.  Nodes in the same community share nuisance
noise, so denser graphs (which mix across communities) can cancel it; the
block structure is recorded as the ground-truth graph.

CSV schema (header required)::

    patient_id,visit,indicator_1,...,indicator_{N*d_in},y

``visit`` is a 0-based contiguous integer per patient; missing feature
cells are empty; UTF-8 with LF line endings.  Indicator columns are
node-major: column ``indicator_{n*d_in + k + 1}`` is channel ``k`` of
node ``n``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, DataError, ParseError
from .graph import SymptomGraph, graph_from_adjacency
from .optim import Rng


@dataclass
class SynthConfig:
    """Knobs of the synthetic cohort generator; all values are artifact defaults."""

    n_patients: int = 200
    t_steps: int = 8
    n_nodes: int = 12
    d_in: int = 2
    n_communities: int = 3
    drift_low: float = 0.02
    drift_high: float = 0.10
    step_noise: float = 0.01
    loading_low: float = 0.6
    loading_high: float = 1.4
    comm_scale: float = 0.6
    x_noise: float = 0.5
    y_scale: float = 80.0
    y_noise: float = 2.0
    seed: int = 7

    def __post_init__(self):
        if min(self.n_patients, self.t_steps, self.n_nodes, self.d_in, self.n_communities) < 1:
            raise ContractError("cohort sizes must be positive")
        if self.n_communities > self.n_nodes:
            raise ContractError(
                f"n_communities={self.n_communities} exceeds n_nodes={self.n_nodes}"
            )


@dataclass
class PatientSeries:
    """One patient's longitudinal record."""

    patient_id: str
    features: np.ndarray  # [T, N, d_in]
    y: np.ndarray         # [T]
    stage: np.ndarray     # [T] of {0, 1}

    @property
    def t_steps(self) -> int:
        return self.features.shape[0]


@dataclass
class Cohort:
    """Patient collection plus split bookkeeping and preprocessing state."""

    patients: list[PatientSeries]
    n_nodes: int
    d_in: int
    splits: dict[str, list[str]] = field(default_factory=dict)
    scaler_mean: np.ndarray | None = None  # [N, d_in], train-split statistics
    scaler_std: np.ndarray | None = None
    truth_graph: SymptomGraph | None = None
    notes: list[str] = field(default_factory=list)

    def patient_map(self) -> dict[str, PatientSeries]:
        return {p.patient_id: p for p in self.patients}

    def split_patients(self, name: str) -> list[PatientSeries]:
        by_id = self.patient_map()
        return [by_id[pid] for pid in self.splits[name]]

    @property
    def t_steps(self) -> int:
        return self.patients[0].t_steps if self.patients else 0


def community_of(node: int, n_nodes: int, n_communities: int) -> int:
    """Contiguous block assignment of nodes to communities."""
    return node * n_communities // n_nodes


def community_block_graph(n_nodes: int, n_communities: int) -> SymptomGraph:
    """Ground-truth graph: an edge between every same-community node pair."""
    comm = [community_of(n, n_nodes, n_communities) for n in range(n_nodes)]
    adjacency = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if comm[i] == comm[j]:
                adjacency[i, j] = adjacency[j, i] = 1.0
    return graph_from_adjacency(adjacency)


def generate(cfg: SynthConfig) -> Cohort:
    """Draw a complete synthetic cohort, fully determined by ``cfg.seed``.

    Draw order (one PCG64 stream): per-node loadings, then per patient the
    initial severity, drift, step noise, community factors, indicator
    noise, and score noise.
    """
    rng = Rng(cfg.seed)
    n, t, d, b = cfg.n_nodes, cfg.t_steps, cfg.d_in, cfg.n_communities
    loadings = rng.uniform(cfg.loading_low, cfg.loading_high, (n, d))
    comm = np.array([community_of(i, n, b) for i in range(n)])

    patients: list[PatientSeries] = []
    id_width = max(4, len(str(cfg.n_patients - 1)))
    for p in range(cfg.n_patients):
        s = np.empty(t)
        s[0] = rng.uniform(0.0, 1.0)
        drift = rng.uniform(cfg.drift_low, cfg.drift_high)
        steps = rng.normal(0.0, cfg.step_noise, t - 1) if t > 1 else np.empty(0)
        for step in range(1, t):
            s[step] = s[step - 1] + drift + steps[step - 1]
        factors = rng.normal(0.0, cfg.comm_scale, (t, b))
        noise = rng.normal(0.0, cfg.x_noise, (t, n, d))
        features = loadings[None, :, :] * s[:, None, None] + factors[:, comm][:, :, None] + noise
        y = cfg.y_scale * s + rng.normal(0.0, cfg.y_noise, t)
        patients.append(
            PatientSeries(
                patient_id=f"P{p:0{id_width}d}",
                features=features,
                y=y,
                stage=np.zeros(t, dtype=np.int64),
            )
        )

    all_y = np.concatenate([p.y for p in patients])
    median = float(np.median(all_y))
    for patient in patients:
        patient.stage = (patient.y > median).astype(np.int64)

    return Cohort(
        patients=patients,
        n_nodes=n,
        d_in=d,
        truth_graph=community_block_graph(n, b),
        notes=[f"synthetic cohort, stage threshold (cohort median) = {median!r}"],
    )


# -- CSV interface ----------------------------------------------------------------


def write_csv(cohort: Cohort, path: str | Path) -> None:
    """Write the cohort in the documented flat schema (LF endings, UTF-8)."""
    n, d = cohort.n_nodes, cohort.d_in
    header = ["patient_id", "visit"]
    header += [f"indicator_{i + 1}" for i in range(n * d)]
    header += ["y"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for patient in cohort.patients:
            for t in range(patient.t_steps):
                flat = patient.features[t].reshape(-1)
                cells = ["" if np.isnan(v) else repr(float(v)) for v in flat]
                writer.writerow([patient.patient_id, t, *cells, repr(float(patient.y[t]))])


def load_csv(path: str | Path, n_nodes: int | None = None) -> Cohort:
    """Read a schema CSV into a raw cohort.

    Without ``n_nodes`` every indicator column becomes its own node with a
    single channel.  Patients with non-contiguous visit indices are dropped
    (recorded in the cohort notes), as are patients whose series length
    differs from the most common length, so the cohort ends up rectangular.
    """
    path = Path(path)
    rows: dict[str, dict[int, tuple[list[float], float]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        n_indicator = len(header) - 3
        if (
            n_indicator < 1
            or header[0] != "patient_id"
            or header[1] != "visit"
            or header[-1] != "y"
        ):
            raise ParseError(f"{path}:1: header does not match the documented schema")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            pid = row[0]
            try:
                visit = int(row[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: visit {row[1]!r} is not an integer") from None
            try:
                values = [float(c) if c != "" else float("nan") for c in row[2:-1]]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric indicator cell") from None
            if row[-1] == "":
                raise ParseError(f"{path}:{lineno}: missing target value")
            try:
                target = float(row[-1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric target {row[-1]!r}") from None
            per_patient = rows.setdefault(pid, {})
            if visit in per_patient:
                raise DataError(f"{path}:{lineno}: duplicate (patient, visit) = ({pid}, {visit})")
            per_patient[visit] = (values, target)

    if not rows:
        raise DataError(f"{path}: no data rows")

    if n_nodes is None:
        n, d = n_indicator, 1
    else:
        if n_indicator % n_nodes != 0:
            raise DataError(
                f"{path}: {n_indicator} indicator columns do not split into {n_nodes} nodes"
            )
        n, d = n_nodes, n_indicator // n_nodes

    notes: list[str] = []
    kept: dict[str, dict[int, tuple[list[float], float]]] = {}
    gap_dropped = []
    for pid, visits in rows.items():
        if sorted(visits) != list(range(len(visits))):
            gap_dropped.append(pid)
        else:
            kept[pid] = visits
    if gap_dropped:
        notes.append(
            f"dropped {len(gap_dropped)} patient(s) with discontinuous visits: "
            + ", ".join(sorted(gap_dropped))
        )
    if not kept:
        raise DataError(f"{path}: every patient had discontinuous visits")

    lengths = [len(v) for v in kept.values()]
    modal_t = max(sorted(set(lengths)), key=lambda t: (lengths.count(t), t))
    length_dropped = sorted(pid for pid, v in kept.items() if len(v) != modal_t)
    if length_dropped:
        notes.append(
            f"dropped {len(length_dropped)} patient(s) with series length != {modal_t}: "
            + ", ".join(length_dropped)
        )

    patients = []
    for pid in sorted(kept):
        visits = kept[pid]
        if len(visits) != modal_t:
            continue
        features = np.empty((modal_t, n, d))
        y = np.empty(modal_t)
        for t in range(modal_t):
            values, target = visits[t]
            features[t] = np.asarray(values).reshape(n, d)
            y[t] = target
        patients.append(
            PatientSeries(
                patient_id=pid,
                features=features,
                y=y,
                stage=np.zeros(modal_t, dtype=np.int64),
            )
        )
    median = float(np.median(np.concatenate([p.y for p in patients])))
    for patient in patients:
        patient.stage = (patient.y > median).astype(np.int64)
    return Cohort(patients=patients, n_nodes=n, d_in=d, notes=notes)


# -- preprocessing ------------------------------------------------------------------


def preprocess(cohort: Cohort, split_seed: int) -> Cohort:
    """Impute, standardize, and split; returns a new cohort.

    Patient-level 70/15/15 split by seeded shuffle.  Imputation is
    forward-fill along time, then train-split feature means for anything
    still missing (leading gaps).  Standardization is a z-score with
    train-split statistics; zero-variance features clamp their std to 1
    and leave a warning note.
    """
    if not cohort.patients:
        raise DataError("cannot preprocess an empty cohort")
    lengths = {p.t_steps for p in cohort.patients}
    if len(lengths) != 1:
        raise DataError(f"cohort series lengths differ: {sorted(lengths)}")

    ids = [p.patient_id for p in cohort.patients]
    order = Rng(split_seed, spawn_key=(9,)).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train = int(len(ids) * 0.70)
    n_val = int(len(ids) * 0.15)
    splits = {
        "train": sorted(shuffled[:n_train]),
        "val": sorted(shuffled[n_train : n_train + n_val]),
        "test": sorted(shuffled[n_train + n_val :]),
    }
    if not splits["train"]:
        raise DataError("cohort too small to form a training split")

    filled = {p.patient_id: _forward_fill(p.features) for p in cohort.patients}
    train_stack = np.concatenate([filled[pid] for pid in splits["train"]], axis=0)
    with np.errstate(invalid="ignore"):
        train_mean = np.nanmean(train_stack, axis=0)  # [N, d_in]
    train_mean = np.where(np.isnan(train_mean), 0.0, train_mean)

    imputed: dict[str, np.ndarray] = {}
    for pid, feats in filled.items():
        feats = feats.copy()
        mask = np.isnan(feats)
        if mask.any():
            feats[mask] = np.broadcast_to(train_mean, feats.shape)[mask]
        imputed[pid] = feats

    train_stack = np.concatenate([imputed[pid] for pid in splits["train"]], axis=0)
    mean = train_stack.mean(axis=0)
    std = train_stack.std(axis=0)
    notes = list(cohort.notes)
    degenerate = std == 0.0
    if degenerate.any():
        flat = [f"node {i} channel {j}" for i, j in zip(*np.nonzero(degenerate))]
        notes.append("zero-variance features std-clamped to 1: " + "; ".join(flat))
    std = np.where(degenerate, 1.0, std)

    patients = [
        replace(p, features=(imputed[p.patient_id] - mean) / std)
        for p in cohort.patients
    ]
    return replace(
        cohort,
        patients=patients,
        splits=splits,
        scaler_mean=mean,
        scaler_std=std,
        notes=notes,
    )


def _forward_fill(features: np.ndarray) -> np.ndarray:
    """Propagate the last observed value forward along the time axis."""
    out = features.copy()
    for t in range(1, out.shape[0]):
        mask = np.isnan(out[t])
        out[t][mask] = out[t - 1][mask]
    return out


def node_observation_matrix(cohort: Cohort, split: str = "train") -> np.ndarray:
    """Per-node scalar summaries, one row per (patient, time) observation.

    Each node's channels are averaged into one scalar, which is the
    statistic the graph builder correlates.
    """
    if split not in cohort.splits:
        raise DataError(f"unknown or unassigned split {split!r}; run preprocess first")
    rows = [p.features.mean(axis=-1) for p in cohort.split_patients(split)]
    return np.concatenate(rows, axis=0)


def train_target_stats(cohort: Cohort) -> tuple[float, float, float]:
    """(mean, std, median) of the training-split targets; std clamped to 1 if zero."""
    ys = np.concatenate([p.y for p in cohort.split_patients("train")])
    std = float(ys.std())
    return float(ys.mean()), (std if std > 0.0 else 1.0), float(np.median(ys))
