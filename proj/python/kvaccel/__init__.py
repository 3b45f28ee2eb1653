"""Python bindings for the kvaccel simulator."""

from ._core import (
    CHUNK_BYTES,
    Config,
    Store,
    pack_chunks,
    parse_chunks,
    run_workload,
    utilization_cdf,
)

__all__ = [
    "CHUNK_BYTES",
    "Config",
    "Store",
    "pack_chunks",
    "parse_chunks",
    "run_workload",
    "utilization_cdf",
]
