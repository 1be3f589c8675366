"""Slow-wave detection and characterization for widefield fluorescence imaging."""

from .signal import (
    BaselineSpec,
    Event,
    Recording,
    SegmentConfig,
    compute_dff,
    exclude_events,
    extract_event,
    segment_events,
)
from .flow import FlowField, FlowSequence, HsConfig, horn_schunck
from .helmholtz import HelmholtzResult, SolverConfig, decompose
from .features import FeatureConfig, FeatureVector, build_feature_vector
from .vae import OptConfig, StreamSpec, VaeSpec
from .gmm import GmmConfig, GmmModel, PrototypeSet

__all__ = [
    "Recording", "Event", "BaselineSpec", "SegmentConfig",
    "compute_dff", "segment_events", "extract_event", "exclude_events",
    "FlowField", "FlowSequence", "HsConfig", "horn_schunck",
    "HelmholtzResult", "SolverConfig", "decompose",
    "FeatureVector", "FeatureConfig", "build_feature_vector",
    "VaeSpec", "StreamSpec", "OptConfig",
    "GmmConfig", "GmmModel", "PrototypeSet",
]

__version__ = "0.1.0"
