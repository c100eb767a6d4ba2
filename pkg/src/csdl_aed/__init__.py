"""Clustering and separate sub-dictionary learning (C-SDL) of NMF
dictionaries for acoustic event detection, with baselines, a detection
pipeline and event-detection metrics."""

__version__ = "0.1.0"

from .dictionary import (  # noqa: F401
    DictStrategy, OverallDictionary, learn_baseline, learn_cndl, learn_csdl, learn_dl, learn_enmf,
    reconstruction_score, reduce_min_correlation,
)
from .nmf import NmfConfig, kl_divergence, nmf_factorize, nmf_semi_supervised, nmf_supervised  # noqa: F401
