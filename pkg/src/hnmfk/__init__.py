"""Hierarchical semi-supervised classification with NMFk model selection."""

from .classifier import (ClassifierParams, HierarchyNode, build_hierarchy, classical_classify,
                         classical_predict, classify, classify_hnmf2, cluster_uniformity,
                         w_cluster_assign)
from .evaluation import ClassificationReport, abstain_rates, make_report, weighted_prf
from .nmf import column_errors, nmf_mu, nnls, perturb, relative_error
from .nmfk import NmfkResult, cluster_silhouettes, custom_cluster, nmfk, select_k
from .preprocess import FeatureBlock, assemble, clip_outliers, minmax_scale, prepare
from .stats import wilcoxon_ranksum
from .synth import SyntheticSpec, synth_generate

__version__ = "0.1.0"
