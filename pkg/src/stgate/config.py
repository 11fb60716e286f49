"""Run configuration: flat dotted-key files, flag overrides, artifact echo.

A config file is plain text, one ``key = value`` pair per line with ``#``
comments.  The same flat representation is embedded verbatim into every
output artifact so a run can always be reproduced from any of its files.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .cohort import Cohort, SynthConfig, generate, load_csv
from .errors import ContractError, ParseError
from .fusion import GateConfig, ModelConfig
from .gcn import GcnConfig
from .temporal import TemporalConfig
from .train import TrainConfig


@dataclass
class RunConfig:
    """Everything one run needs; serializes to flat dotted keys."""

    seed: int = 7
    out_dir: str = "out"
    data_source: str = "synthetic"  # "synthetic" or a CSV path
    data_nodes: int | None = None   # node count when reading CSV (None: one per column)
    synth: SynthConfig = field(default_factory=SynthConfig)
    density: float = 0.6
    hidden_dims: list[int] = field(default_factory=lambda: [32, 32])
    activation: str = "relu"
    gcn_bias: bool = False
    n_heads: int = 4
    n_blocks: int = 2
    ffn_mult: int = 4
    causal: bool = False
    gate_mode: str = "learned"
    fixed_gamma: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)

    # -- derived objects ------------------------------------------------------

    def model_config(self, d_in: int) -> ModelConfig:
        return ModelConfig(
            gcn=GcnConfig(
                layer_dims=[d_in] + list(self.hidden_dims),
                activation=self.activation,
                bias=self.gcn_bias,
            ),
            temporal=TemporalConfig(
                d_model=self.hidden_dims[-1],
                n_heads=self.n_heads,
                n_blocks=self.n_blocks,
                ffn_mult=self.ffn_mult,
                causal=self.causal,
            ),
            gate=GateConfig(mode=self.gate_mode, fixed_gamma=self.fixed_gamma),
        )

    def load_cohort(self) -> Cohort:
        if self.data_source == "synthetic":
            return generate(self.synth)
        return load_csv(self.data_source, n_nodes=self.data_nodes)


_SYNTH_KEYS = [f.name for f in fields(SynthConfig)]
_TRAIN_KEYS = [f.name for f in fields(TrainConfig)]
_MODEL_KEYS = [
    "hidden_dims", "activation", "gcn_bias", "n_heads", "n_blocks",
    "ffn_mult", "causal", "gate_mode", "fixed_gamma",
]


def to_flat(cfg: RunConfig) -> dict[str, Any]:
    """Flatten to ordered dotted keys; values stay native (int/float/bool/str/list)."""
    flat: dict[str, Any] = {
        "seed": cfg.seed,
        "out": cfg.out_dir,
        "data.source": cfg.data_source,
    }
    if cfg.data_nodes is not None:
        flat["data.nodes"] = cfg.data_nodes
    for key in _SYNTH_KEYS:
        flat[f"synth.{key}"] = getattr(cfg.synth, key)
    flat["graph.density"] = cfg.density
    for key in _MODEL_KEYS:
        flat[f"model.{key}"] = getattr(cfg, key)
    for key in _TRAIN_KEYS:
        flat[f"train.{key}"] = getattr(cfg.train, key)
    return flat


def from_flat(flat: dict[str, str | Any]) -> RunConfig:
    """Build a RunConfig from flat keys; unknown keys raise, strings are coerced.

    ``synth.seed`` defaults to the run seed when not given explicitly.
    """
    cfg = RunConfig()
    synth_kwargs: dict[str, Any] = {}
    train_kwargs: dict[str, Any] = {}
    for key, raw in flat.items():
        if key == "seed":
            cfg.seed = _coerce(raw, int, key)
        elif key == "out":
            cfg.out_dir = str(raw)
        elif key == "data.source":
            cfg.data_source = str(raw)
        elif key == "data.nodes":
            cfg.data_nodes = _coerce(raw, int, key)
        elif key.startswith("synth."):
            name = key.split(".", 1)[1]
            if name not in _SYNTH_KEYS:
                raise ContractError(f"unknown config key {key!r}")
            kind = type(getattr(cfg.synth, name))
            synth_kwargs[name] = _coerce(raw, kind, key)
        elif key == "graph.density":
            cfg.density = _coerce(raw, float, key)
        elif key.startswith("model."):
            name = key.split(".", 1)[1]
            if name not in _MODEL_KEYS:
                raise ContractError(f"unknown config key {key!r}")
            if name == "hidden_dims":
                setattr(cfg, name, _coerce_int_list(raw, key))
            else:
                kind = type(getattr(cfg, name))
                setattr(cfg, name, _coerce(raw, kind, key))
        elif key.startswith("train."):
            name = key.split(".", 1)[1]
            if name not in _TRAIN_KEYS:
                raise ContractError(f"unknown config key {key!r}")
            kind = type(getattr(cfg.train, name))
            train_kwargs[name] = _coerce(raw, kind, key)
        else:
            raise ContractError(f"unknown config key {key!r}")
    if "seed" not in synth_kwargs:
        synth_kwargs["seed"] = cfg.seed
    cfg.synth = SynthConfig(**{**_defaults(SynthConfig), **synth_kwargs})
    cfg.train = TrainConfig(**{**_defaults(TrainConfig), **train_kwargs})
    return cfg


def _defaults(cls) -> dict[str, Any]:
    return {f.name: getattr(cls(), f.name) for f in fields(cls)}


def _coerce(raw, kind, key: str):
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if kind is bool:
            if text.lower() in ("true", "1", "yes", "on"):
                return True
            if text.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return str(raw)
    except ValueError:
        raise ContractError(f"config key {key!r}: cannot parse {raw!r} as {kind.__name__}") from None


def _coerce_int_list(raw, key: str) -> list[int]:
    if isinstance(raw, list):
        return [int(v) for v in raw]
    try:
        return [int(part) for part in str(raw).split(",") if part.strip() != ""]
    except ValueError:
        raise ContractError(f"config key {key!r}: cannot parse {raw!r} as an integer list") from None


def format_flat(flat: dict[str, Any]) -> list[str]:
    """Render flat entries as ``key = value`` lines (lists as comma strings)."""
    lines = []
    for key, value in flat.items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return lines


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment, blank lines skipped."""
    flat: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        flat[key.strip()] = value.strip()
    return flat
