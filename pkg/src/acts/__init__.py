"""Converging-time robustness scores (ACTS) for dense feed-forward classifiers."""

from .attacks import AttackConfig, AttackTrace, bim, fgsm, make_config, pgd, run_attack
from .dataio import Dataset, load_dataset, load_model, save_dataset, save_model
from .estimators import ACTSScorer, AdversarialAttack, DenseNetClassifier
from .evaluation import (
    ActsConfig,
    EvalReport,
    SampleRecord,
    detect_flips,
    mean_acts,
    overlap_percent,
    run_experiment,
)
from .metric import (
    ActsResult,
    SpeedVector,
    acts_from_deltas,
    acts_score,
    multi_step_speeds,
    one_step_speeds,
)
from .network import (
    DenseLayer,
    Network,
    classify,
    forward,
    init_network,
    input_jacobian,
    loss_gradient,
    train_sgd,
)

__version__ = "0.1.0"
