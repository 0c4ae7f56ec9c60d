"""O-RAN AAL semantics and inline/lookaside offload simulator."""

import json as _json

from aalsim._core import (  # noqa: F401
    PACKET_HEADER_SIZE,
    FronthaulPacket,
    PacketHeader,
    ReorderEngine,
    __version__,
    check_flow_conformance,
    crc16_xmodem,
    crc_attach,
    crc_check,
    demodulate,
    dl_pipeline,
    fec_decode,
    fec_encode,
    list_profiles,
    modulate,
    packet_count_for,
    parse_packet,
    scramble,
    serialize_packet,
    trace_diff,
    transfer_time_us,
    ul_pipeline,
    validate_config_json,
)
from aalsim import _core as _c


def run_scenario(config, seed=0):
    """Runs one scenario; returns (report dict, trace text)."""
    if isinstance(config, dict):
        config = _json.dumps(config)
    report_json, trace = _c.run_scenario_json(config, seed)
    return _json.loads(report_json), trace


def compare_modes(config, seed=0):
    """Runs the same workload inline and lookaside; returns the report dict."""
    if isinstance(config, dict):
        config = _json.dumps(config)
    return _json.loads(_c.compare_modes_json(config, seed))


def fold_trace(trace_text):
    """Rebuilds the metrics report from a serialized trace."""
    return _json.loads(_c.fold_trace_json(trace_text))


def validate_config(config):
    if isinstance(config, dict):
        config = _json.dumps(config)
    return validate_config_json(config)
