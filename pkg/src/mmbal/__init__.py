"""Balanced multimodal learning by diagnosing representation purity and softly
re-initializing uni-modal encoders."""
__version__ = "0.1.0"

from .balance import (BalanceConfig, ModalityDiagnosis, apply_relearn, diagnose_modality,
                      purity_gap, schedule_should_fire, strength)
from .clustering import ClusterResult, KMeansConfig, kmeans, lloyd, purity
from .data import (DatasetSpec, ModalitySpec, MultimodalDataset, Split, generate, load_dataset,
                   load_features, save_dataset, write_features)
from .estimators import LinearProbe, LloydKMeans, MultimodalClassifier
from .exceptions import ConfigError, InputError, MMBalError, ParseError
from .nn import MLPSpec, interpolate_params, mlp_backward, mlp_forward, sgd_momentum_step, softmax_cross_entropy
from .trainer import (EpochRecord, ModelSpec, ProbeConfig, TrainConfig, evaluate, extract_features,
                      train_run, unimodal_probe)
