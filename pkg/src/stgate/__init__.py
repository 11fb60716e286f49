"""Structure-aware temporal progression modeling.

Graph-convolutional structural encoding over a symptom-indicator graph,
per-node temporal self-attention, a learned convex gate fusing the two,
and a scalar progression readout trained with mean squared error, plus
the evaluation metrics and sweep experiments around them.
"""

from .cohort import Cohort, PatientSeries, SynthConfig, generate, load_csv, preprocess, write_csv
from .errors import (
    ContractError,
    DataError,
    OptimizerError,
    ParseError,
    ShapeError,
    StgateError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .fusion import (
    GateConfig,
    ModelConfig,
    ModelOutput,
    forward,
    forward_features,
    fuse,
    init_model_params,
    load_checkpoint,
    mse_loss,
    readout,
    save_checkpoint,
)
from .gcn import GcnConfig, encode_structural, gcn_layer
from .graph import (
    SymptomGraph,
    correlation_matrix,
    load_edgelist,
    normalize,
    save_edgelist,
    threshold_by_density,
)
from .metrics import MetricsReport, auc, evaluate, ipw_f1, rmse, stage_labels
from .optim import GradCheckReport, ParamStore, Rng, adam_step, backward, grad_check, xavier_init
from .temporal import (
    PositionalTable,
    TemporalConfig,
    attention,
    encode_temporal,
    positional_encoding,
    zero_positional_table,
)
from .tensor import Tensor, concat_lastdim, layer_norm, matmul, sigmoid, softmax_rows
from .train import TrainConfig, TrainResult, build_graph, train_model

__version__ = "0.1.0"
