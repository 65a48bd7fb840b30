"""
Service layer __init__.py
Imports the service entry points for easy access
"""
from .eqm_model_service import EqmModelService
from .evaluation_service import EvaluationService
from .extraction_service import extract_segments, extract_trace_file
from .fusion_service import fit_linear_anchor_map, fuse_datasets
from .hevc_meta_service import parse_sps, probe_metadata, split_nal_units

__all__ = [
    "EqmModelService",
    "EvaluationService",
    "extract_segments",
    "extract_trace_file",
    "fit_linear_anchor_map",
    "fuse_datasets",
    "parse_sps",
    "probe_metadata",
    "split_nal_units",
]
