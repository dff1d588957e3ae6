"""Certify, search, explain and mitigate k-discrimination in ReLU networks."""

__version__ = "0.1.0"

from .cluster import (DEFAULT_EPSILON, DiscriminationRecord, bucketize, count_k,
                      k_discrimination)
from .data import Dataset, load_csv, make_planted_network, planted_fixture
from .exceptions import (DegenerateKError, DivergenceError, InputError, KFairError,
                         NumericalError, SchemaError, UnsupportedNetworkError)
from .explain import DiscriminationExplainer, ExplainConfig, ExplanationPredicate, explain
from .milp import Certificate, certify
from .mitigate import GuardedModel, augment_dataset, evaluate_mitigation, fine_tune
from .model import DenseLayer, Network, NetworkClassifier, load_network, save_network
from .schema import FeatureSchema, FeatureSpec, SchemaEncoder, load_schema
from .search import KDiscriminationSearch, SearchConfig, run_search

__all__ = [
    "Certificate", "Dataset", "DEFAULT_EPSILON", "DegenerateKError", "DenseLayer",
    "DiscriminationExplainer", "DiscriminationRecord", "DivergenceError", "ExplainConfig",
    "ExplanationPredicate", "FeatureSchema", "FeatureSpec", "GuardedModel", "InputError",
    "KDiscriminationSearch", "KFairError", "Network", "NetworkClassifier", "NumericalError",
    "SchemaEncoder", "SchemaError", "SearchConfig", "UnsupportedNetworkError",
    "augment_dataset", "bucketize", "certify", "count_k", "evaluate_mitigation", "explain",
    "fine_tune", "k_discrimination", "load_csv", "load_network", "load_schema",
    "make_planted_network", "planted_fixture", "run_search", "save_network",
]
