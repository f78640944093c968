"""Seizure-type classification from scalp EEG.

EDF ingestion, FFT feature extraction (log spectra and cross-channel
correlation eigenfeatures), k-NN / SGD / gradient-boosted tree classifiers,
seizure-wise and patient-wise cross-validation, and hyperparameter search.
"""

from .classifiers import fit_model, predict_labels
from .evaluation import patient_wise_folds, run_cv, seizure_wise_folds, weighted_f1
from .featurize import FeatureSpec, WindowSpec, featurize_manifest
from .ingest import SEIZURE_TYPES, dataset_stats, load_manifest, parse_manifest, read_channels
from .synthgen import GenSpec, generate_corpus

__version__ = "0.1.0"

__all__ = [
    "SEIZURE_TYPES",
    "FeatureSpec",
    "GenSpec",
    "WindowSpec",
    "dataset_stats",
    "featurize_manifest",
    "fit_model",
    "generate_corpus",
    "load_manifest",
    "parse_manifest",
    "patient_wise_folds",
    "predict_labels",
    "read_channels",
    "run_cv",
    "seizure_wise_folds",
    "weighted_f1",
]
