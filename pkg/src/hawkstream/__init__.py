"""hawkstream: streaming text clustering with interacting Hawkes topics."""

from .hawkes import (
    EventHistory,
    IncrementalLoglik,
    InfluenceTensor,
    intensity,
    log_likelihood,
    simulate,
    spectral_radius,
)
from .language import ClusterWordCounts, DocumentCounts, doc_log_likelihood
from .priors import PriorConfig, allocation_prior, stat_source
from .smc import CandidateBank, Particle, SMCConfig, SMCEngine, sample_tensor
from .temporal import KernelBasis, horizon, kernel_integral, kernel_value

__all__ = [
    "CandidateBank",
    "ClusterWordCounts",
    "DocumentCounts",
    "EventHistory",
    "IncrementalLoglik",
    "InfluenceTensor",
    "KernelBasis",
    "Particle",
    "PriorConfig",
    "SMCConfig",
    "SMCEngine",
    "allocation_prior",
    "doc_log_likelihood",
    "horizon",
    "intensity",
    "kernel_integral",
    "kernel_value",
    "log_likelihood",
    "sample_tensor",
    "simulate",
    "spectral_radius",
    "stat_source",
]

__version__ = "0.1.0"
