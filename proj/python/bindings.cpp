/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 the aalsim authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>

#include "aalsim/config.hpp"
#include "aalsim/errors.hpp"
#include "aalsim/fronthaul.hpp"
#include "aalsim/memory.hpp"
#include "aalsim/phy.hpp"
#include "aalsim/report.hpp"
#include "aalsim/sim.hpp"

namespace py = pybind11;
using namespace aalsim;

namespace {

using Cplx = std::complex<double>;

std::vector<Cplx> to_complex(const std::vector<phy::IqSample>& iq) {
    std::vector<Cplx> out;
    out.reserve(iq.size());
    for (const auto& s : iq) out.emplace_back(s.i, s.q);
    return out;
}

std::vector<phy::IqSample> from_complex(const std::vector<Cplx>& iq) {
    std::vector<phy::IqSample> out;
    out.reserve(iq.size());
    for (const auto& s : iq) out.push_back({s.real(), s.imag()});
    return out;
}

Bytes to_bytes(const py::bytes& b) {
    std::string_view view = b;
    return Bytes(view.begin(), view.end());
}

py::bytes from_bytes(const Bytes& b) {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

phy::Modulation parse_modulation(const std::string& name) {
    if (name == "qpsk") return phy::Modulation::Qpsk;
    if (name == "qam16") return phy::Modulation::Qam16;
    fail(Errc::invalid_argument, "modulation must be qpsk or qam16");
}

phy::PipelineConfig make_pipeline(const std::string& modulation, int max_decode_iters,
                                  std::uint8_t scrambler_seed) {
    phy::PipelineConfig cfg;
    cfg.code = phy::CodeSpec::hamming74(max_decode_iters);
    cfg.modulation = parse_modulation(modulation);
    cfg.scrambler.seed = scrambler_seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "O-RAN AAL semantics and inline/lookaside offload simulator";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            if (e.code() == Errc::config_invalid || e.code() == Errc::invalid_argument)
                PyErr_SetString(PyExc_ValueError, e.what());
            else
                PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    // ---- memory / link model ----
    m.def(
        "transfer_time_us",
        [](std::uint64_t bytes, double latency_us, double bandwidth_bytes_per_us) {
            return transfer_time_us(bytes, LinkModel{latency_us, bandwidth_bytes_per_us});
        },
        py::arg("bytes"), py::arg("latency_us") = 2.0, py::arg("bandwidth_bytes_per_us") = 100.0);

    // ---- high-PHY kernels ----
    m.def("crc16_xmodem", [](const Bits& bits) { return phy::crc16_xmodem(bits); });
    m.def("crc_attach", [](const Bits& bits) { return phy::crc_attach(bits); });
    m.def("crc_check", [](const Bits& bits) {
        phy::CrcCheckResult r = phy::crc_check(bits);
        return py::make_tuple(r.payload, r.ok);
    });
    m.def(
        "fec_encode",
        [](const Bits& msg, int max_decode_iters) {
            return phy::fec_encode(msg, phy::CodeSpec::hamming74(max_decode_iters));
        },
        py::arg("msg"), py::arg("max_decode_iters") = 8);
    m.def(
        "fec_decode",
        [](const Bits& received, int max_decode_iters) {
            phy::DecodeResult r =
                phy::fec_decode(received, phy::CodeSpec::hamming74(max_decode_iters));
            return py::make_tuple(r.msg, r.converged);
        },
        py::arg("received"), py::arg("max_decode_iters") = 8);
    m.def(
        "scramble",
        [](const Bits& bits, std::uint8_t seed, std::uint8_t taps) {
            return phy::scramble(bits, phy::ScramblerSpec{taps, seed});
        },
        py::arg("bits"), py::arg("seed") = 0x5A, py::arg("taps") = 0x41);
    m.def(
        "modulate",
        [](const Bits& bits, const std::string& scheme) {
            return to_complex(phy::modulate(bits, parse_modulation(scheme)));
        },
        py::arg("bits"), py::arg("scheme") = "qpsk");
    m.def(
        "demodulate",
        [](const std::vector<Cplx>& iq, const std::string& scheme) {
            return phy::demodulate(from_complex(iq), parse_modulation(scheme));
        },
        py::arg("iq"), py::arg("scheme") = "qpsk");
    m.def(
        "dl_pipeline",
        [](const py::bytes& tb, const std::string& modulation, int max_decode_iters,
           std::uint8_t scrambler_seed) {
            return to_complex(phy::dl_pipeline(
                to_bytes(tb), make_pipeline(modulation, max_decode_iters, scrambler_seed)));
        },
        py::arg("tb"), py::arg("modulation") = "qpsk", py::arg("max_decode_iters") = 8,
        py::arg("scrambler_seed") = 0x5A);
    m.def(
        "ul_pipeline",
        [](const std::vector<Cplx>& iq, const std::string& modulation, int max_decode_iters,
           std::uint8_t scrambler_seed) {
            phy::UlResult r = phy::ul_pipeline(
                from_complex(iq), make_pipeline(modulation, max_decode_iters, scrambler_seed));
            return py::make_tuple(from_bytes(r.tb), r.crc_ok);
        },
        py::arg("iq"), py::arg("modulation") = "qpsk", py::arg("max_decode_iters") = 8,
        py::arg("scrambler_seed") = 0x5A);

    // ---- fronthaul packets ----
    py::class_<PacketHeader>(m, "PacketHeader")
        .def(py::init<>())
        .def_readwrite("version", &PacketHeader::version)
        .def_readwrite("plane", &PacketHeader::plane)
        .def_readwrite("flow_id", &PacketHeader::flow_id)
        .def_readwrite("slot_id", &PacketHeader::slot_id)
        .def_readwrite("symbol_id", &PacketHeader::symbol_id)
        .def_readwrite("section_id", &PacketHeader::section_id)
        .def_readwrite("seq_num", &PacketHeader::seq_num)
        .def_readwrite("payload_len", &PacketHeader::payload_len)
        .def_readwrite("reserved", &PacketHeader::reserved);

    py::class_<FronthaulPacket>(m, "FronthaulPacket")
        .def(py::init<>())
        .def_readwrite("header", &FronthaulPacket::header)
        .def_property(
            "payload", [](const FronthaulPacket& p) { return from_bytes(p.payload); },
            [](FronthaulPacket& p, const py::bytes& b) {
                p.payload = to_bytes(b);
                p.header.payload_len = static_cast<std::uint16_t>(p.payload.size());
            });

    m.def("serialize_packet", [](const FronthaulPacket& p) { return from_bytes(serialize_packet(p)); });
    m.def("parse_packet", [](const py::bytes& wire) { return parse_packet(to_bytes(wire)); });
    m.def("packet_count_for", &packet_count_for, py::arg("payload_bytes"), py::arg("mtu"));

    py::class_<ReorderEngine>(m, "ReorderEngine")
        .def(py::init([](const std::string& strategy, std::uint16_t slot_id,
                         std::uint32_t expected_packets, std::size_t segment_size,
                         std::size_t total_bytes, double per_packet_us, double per_byte_us) {
                 ReorderStrategy s = strategy == "sequential" ? ReorderStrategy::Sequential
                                                              : ReorderStrategy::Streaming;
                 return ReorderEngine(s, slot_id, expected_packets, segment_size, total_bytes,
                                      PlacementCost{per_packet_us, per_byte_us});
             }),
             py::arg("strategy"), py::arg("slot_id"), py::arg("expected_packets"),
             py::arg("segment_size"), py::arg("total_bytes"), py::arg("per_packet_us") = 1.0,
             py::arg("per_byte_us") = 0.0)
        .def("submit",
             [](ReorderEngine& e, const FronthaulPacket& p, double arrival_time_us) {
                 switch (e.submit(p, arrival_time_us)) {
                     case PlacementAction::Placed: return "placed";
                     case PlacementAction::Buffered: return "buffered";
                     case PlacementAction::Duplicate: return "duplicate";
                 }
                 return "?";
             })
        .def("finalize", [](const ReorderEngine& e) {
            AssemblyResult r = e.finalize();
            py::dict out;
            out["complete"] = r.complete;
            out["payload"] = from_bytes(r.payload);
            out["missing"] = r.missing;
            out["ready_time_us"] = r.ready_time_us;
            return out;
        });

    // ---- simulator / reports ----
    m.def("run_scenario_json", [](const std::string& config_json, std::uint64_t seed) {
        ScenarioConfig cfg = load_config_json(config_json);
        RunResult r = run_scenario(cfg, seed);
        return py::make_tuple(report_to_json(r.report), r.trace_text);
    });
    m.def("compare_modes_json", [](const std::string& config_json, std::uint64_t seed) {
        ScenarioConfig cfg = load_config_json(config_json);
        CompareOutcome out = compare_modes(cfg, seed);
        return compare_to_json(out);
    });
    m.def("validate_config_json", [](const std::string& config_json) {
        load_config_json(config_json);
        return true;
    });
    m.def("fold_trace_json",
          [](const std::string& trace_text) { return report_to_json(fold_trace(trace_text)); });
    m.def("check_flow_conformance", [](const std::string& trace_text) {
        FlowCheck fc = check_flow_conformance(trace_text);
        return py::make_tuple(fc.ok, fc.detail);
    });
    m.def("trace_diff", [](const std::string& a, const std::string& b) {
        TraceDiff d = diff_traces(a, b);
        py::dict out;
        out["identical"] = d.identical;
        out["line"] = d.line;
        out["left"] = d.left;
        out["right"] = d.right;
        return out;
    });
    m.def("list_profiles", [] {
        py::list out;
        out.append(py::make_tuple("fec_lookaside", "lookaside"));
        out.append(py::make_tuple("high_phy_inline", "inline"));
        return out;
    });

    m.attr("PACKET_HEADER_SIZE") = kPacketHeaderSize;
    m.attr("__version__") = "1.0.0";
}
