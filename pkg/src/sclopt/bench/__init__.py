"""Datasets, synthetic instances, run records and performance profiles."""

from ..linalg import extreme_eigs
from .libsvm import (LibsvmParseError, SparseDataset, from_dense, load_libsvm,
                     parse_libsvm, save_libsvm, serialize)
from .profile import ProfileResult, ProfileTable, performance_profile
from .records import RunRecord, read_records, write_records, write_trace_csv
from .runner import run_matrix, run_one, worker_count
from .synth import desk_logistic, desk_multinomial, parse_synthetic, synth_gp_instance

__all__ = [
    "LibsvmParseError", "SparseDataset", "from_dense", "load_libsvm", "parse_libsvm",
    "save_libsvm", "serialize", "ProfileResult", "ProfileTable", "performance_profile",
    "RunRecord", "read_records", "write_records", "write_trace_csv", "run_matrix",
    "run_one", "worker_count", "desk_logistic", "desk_multinomial", "parse_synthetic",
    "synth_gp_instance", "extreme_eigs",
]
