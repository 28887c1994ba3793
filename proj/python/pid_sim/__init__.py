"""Python bindings for the pid-sim proactive delivery simulator."""

from ._core import (
    DecodedFrame,
    Error,
    RunResult,
    campus_pages,
    decode_frame,
    encode_frame,
    normalize_mac,
    pages_per_course,
    pages_to_reams,
    pages_to_trees,
    parse_mac_from_url,
    put_frame_count,
    run_scenario,
    transfer_duration_ms,
    validate_scenario,
)

__version__ = "1.0.0"

__all__ = [
    "DecodedFrame",
    "Error",
    "RunResult",
    "campus_pages",
    "decode_frame",
    "encode_frame",
    "normalize_mac",
    "pages_per_course",
    "pages_to_reams",
    "pages_to_trees",
    "parse_mac_from_url",
    "put_frame_count",
    "run_scenario",
    "transfer_duration_ms",
    "validate_scenario",
]
