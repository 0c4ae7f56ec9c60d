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

#include "aalsim/config.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aalsim/errors.hpp"

namespace aalsim {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& why) {
    fail(Errc::config_invalid, path + ": " + why);
}

void require_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) bad(path, "must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) bad(path.empty() ? key : path + "." + key, "unknown key");
    }
}

double get_number(const json& obj, const std::string& path, const std::string& key,
                  std::optional<double> fallback = std::nullopt) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        bad(path + key, "required field is missing");
    }
    const json& v = obj.at(key);
    if (!v.is_number()) bad(path + key, "must be a number");
    return v.get<double>();
}

std::uint64_t get_uint(const json& obj, const std::string& path, const std::string& key,
                       std::optional<std::uint64_t> fallback = std::nullopt) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        bad(path + key, "required field is missing");
    }
    const json& v = obj.at(key);
    if (!v.is_number_unsigned()) bad(path + key, "must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& path, const std::string& key,
                       std::optional<std::string> fallback = std::nullopt) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        bad(path + key, "required field is missing");
    }
    const json& v = obj.at(key);
    if (!v.is_string()) bad(path + key, "must be a string");
    return v.get<std::string>();
}

std::vector<ChannelConfig::SlotSeqs> parse_slotseqs(const json& arr, const std::string& path) {
    std::vector<ChannelConfig::SlotSeqs> out;
    if (!arr.is_array()) bad(path, "must be an array");
    std::size_t i = 0;
    for (const json& item : arr) {
        std::string p = path + "[" + std::to_string(i++) + "]";
        require_keys(item, p, {"slot", "seqs"});
        ChannelConfig::SlotSeqs ss;
        ss.slot = static_cast<std::uint32_t>(get_uint(item, p + ".", "slot"));
        if (!item.contains("seqs") || !item.at("seqs").is_array()) bad(p + ".seqs", "must be an array");
        for (const json& q : item.at("seqs")) {
            if (!q.is_number_unsigned()) bad(p + ".seqs", "entries must be nonnegative integers");
            ss.seqs.push_back(q.get<std::uint32_t>());
        }
        out.push_back(std::move(ss));
    }
    return out;
}

std::vector<double> parse_stage_times(const json& obj, const std::string& path,
                                      const std::string& key, double fallback) {
    if (!obj.contains(key)) return std::vector<double>(kNumStages, fallback);
    const json& v = obj.at(key);
    if (v.is_number()) return std::vector<double>(kNumStages, v.get<double>());
    if (!v.is_array() || v.size() != kNumStages)
        bad(path + key, "must be a number or an array of " + std::to_string(kNumStages));
    std::vector<double> out;
    for (const json& t : v) {
        if (!t.is_number()) bad(path + key, "entries must be numbers");
        out.push_back(t.get<double>());
    }
    return out;
}

}  // namespace

ScenarioConfig load_config_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(Errc::config_invalid, std::string("document: ") + e.what());
    }

    require_keys(doc, "", {"schema_version", "direction", "num_slots", "tb_size_bytes",
                           "slot_duration_us", "scs_khz", "mtu", "link", "channel", "pipeline",
                           "offload", "reorder_strategy", "stage_times_us", "placement_cost",
                           "devices"});

    if (get_uint(doc, "", "schema_version") != static_cast<std::uint64_t>(kConfigSchemaVersion))
        bad("schema_version", "unsupported version (expected " +
                                  std::to_string(kConfigSchemaVersion) + ")");

    ScenarioConfig cfg = default_scenario();

    std::string dir = get_string(doc, "", "direction");
    if (dir == "uplink")
        cfg.direction = Direction::Uplink;
    else if (dir == "downlink")
        cfg.direction = Direction::Downlink;
    else if (dir == "compare_modes")
        cfg.direction = Direction::CompareModes;
    else
        bad("direction", "must be uplink, downlink, or compare_modes");

    cfg.num_slots = static_cast<std::uint32_t>(get_uint(doc, "", "num_slots"));
    cfg.tb_size_bytes = static_cast<std::size_t>(get_uint(doc, "", "tb_size_bytes"));

    // Slot timing: explicit microseconds, or derived from the subcarrier
    // spacing (slot = 1000 us / (scs_khz / 15)).
    bool has_duration = doc.contains("slot_duration_us");
    bool has_scs = doc.contains("scs_khz");
    if (has_duration == has_scs)
        bad("slot_duration_us", "exactly one of slot_duration_us or scs_khz is required");
    if (has_duration) {
        cfg.slot_duration_us = get_number(doc, "", "slot_duration_us");
    } else {
        double scs = get_number(doc, "", "scs_khz");
        if (scs <= 0.0 || std::fmod(scs, 15.0) != 0.0)
            bad("scs_khz", "must be a positive multiple of 15");
        cfg.slot_duration_us = 1000.0 / (scs / 15.0);
    }

    cfg.mtu = static_cast<std::uint16_t>(get_uint(doc, "", "mtu", 1516));

    if (doc.contains("link")) {
        const json& link = doc.at("link");
        require_keys(link, "link", {"latency_us", "bandwidth_bytes_per_us"});
        cfg.link.latency_us = get_number(link, "link.", "latency_us", 2.0);
        cfg.link.bandwidth_bytes_per_us = get_number(link, "link.", "bandwidth_bytes_per_us", 100.0);
    }

    if (doc.contains("channel")) {
        const json& ch = doc.at("channel");
        require_keys(ch, "channel", {"permutation", "max_delay_us", "drops", "duplicates"});
        std::string perm = get_string(ch, "channel.", "permutation", "identity");
        if (perm == "identity")
            cfg.channel.permutation = ChannelConfig::Permutation::Identity;
        else if (perm == "reverse")
            cfg.channel.permutation = ChannelConfig::Permutation::Reverse;
        else if (perm == "seeded")
            cfg.channel.permutation = ChannelConfig::Permutation::Seeded;
        else
            bad("channel.permutation", "must be identity, reverse, or seeded");
        cfg.channel.max_delay_us = get_number(ch, "channel.", "max_delay_us", 0.0);
        if (ch.contains("drops")) cfg.channel.drops = parse_slotseqs(ch.at("drops"), "channel.drops");
        if (ch.contains("duplicates"))
            cfg.channel.duplicates = parse_slotseqs(ch.at("duplicates"), "channel.duplicates");
    }

    if (doc.contains("pipeline")) {
        const json& p = doc.at("pipeline");
        require_keys(p, "pipeline", {"code", "scrambler", "modulation"});
        if (p.contains("code")) {
            const json& code = p.at("code");
            require_keys(code, "pipeline.code", {"kind", "path", "max_decode_iters"});
            std::string kind = get_string(code, "pipeline.code.", "kind", "hamming74");
            int iters = static_cast<int>(get_uint(code, "pipeline.code.", "max_decode_iters", 8));
            if (kind == "hamming74") {
                cfg.pipeline.code = phy::CodeSpec::hamming74(iters);
            } else if (kind == "matrix_file") {
                std::string path = get_string(code, "pipeline.code.", "path");
                try {
                    cfg.pipeline.code = phy::CodeSpec::from_matrix_file(path, iters);
                } catch (const Error& e) {
                    bad("pipeline.code.path", e.what());
                }
            } else {
                bad("pipeline.code.kind", "must be hamming74 or matrix_file");
            }
        }
        if (p.contains("scrambler")) {
            const json& s = p.at("scrambler");
            require_keys(s, "pipeline.scrambler", {"taps", "seed"});
            cfg.pipeline.scrambler.lfsr_taps =
                static_cast<std::uint8_t>(get_uint(s, "pipeline.scrambler.", "taps", 0x41));
            cfg.pipeline.scrambler.seed =
                static_cast<std::uint8_t>(get_uint(s, "pipeline.scrambler.", "seed", 0x5A));
        }
        std::string mod = get_string(p, "pipeline.", "modulation", "qpsk");
        if (mod == "qpsk")
            cfg.pipeline.modulation = phy::Modulation::Qpsk;
        else if (mod == "qam16")
            cfg.pipeline.modulation = phy::Modulation::Qam16;
        else
            bad("pipeline.modulation", "must be qpsk or qam16");
    }

    if (doc.contains("offload")) {
        const json& o = doc.at("offload");
        require_keys(o, "offload", {"mode", "accelerated_stages"});
        std::string mode = get_string(o, "offload.", "mode", "inline");
        if (mode == "inline")
            cfg.offload_mode = OffloadMode::Inline;
        else if (mode == "lookaside")
            cfg.offload_mode = OffloadMode::Lookaside;
        else
            bad("offload.mode", "must be inline or lookaside");
        if (o.contains("accelerated_stages")) {
            if (!o.at("accelerated_stages").is_array())
                bad("offload.accelerated_stages", "must be an array");
            cfg.accelerated_stages.clear();
            for (const json& s : o.at("accelerated_stages")) {
                if (!s.is_number_unsigned())
                    bad("offload.accelerated_stages", "entries must be nonnegative integers");
                cfg.accelerated_stages.push_back(s.get<std::uint32_t>());
            }
        }
    }

    std::string strategy = get_string(doc, "", "reorder_strategy", "streaming");
    if (strategy == "streaming")
        cfg.reorder_strategy = ReorderStrategy::Streaming;
    else if (strategy == "sequential")
        cfg.reorder_strategy = ReorderStrategy::Sequential;
    else
        bad("reorder_strategy", "must be streaming or sequential");

    if (doc.contains("stage_times_us")) {
        const json& st = doc.at("stage_times_us");
        require_keys(st, "stage_times_us", {"host", "device"});
        cfg.stage_times.host = parse_stage_times(st, "stage_times_us.", "host", 10.0);
        cfg.stage_times.device = parse_stage_times(st, "stage_times_us.", "device", 2.0);
    }

    if (doc.contains("placement_cost")) {
        const json& pc = doc.at("placement_cost");
        require_keys(pc, "placement_cost", {"per_packet_us", "per_byte_us"});
        cfg.placement.per_packet_us = get_number(pc, "placement_cost.", "per_packet_us", 1.0);
        cfg.placement.per_byte_us = get_number(pc, "placement_cost.", "per_byte_us", 0.0);
    }

    if (doc.contains("devices")) {
        if (!doc.at("devices").is_array()) bad("devices", "must be an array");
        cfg.devices.clear();
        std::size_t i = 0;
        for (const json& d : doc.at("devices")) {
            std::string p = "devices[" + std::to_string(i++) + "]";
            require_keys(d, p, {"device_id", "vendor_tag", "partition", "num_lpus", "profiles",
                                "firmware"});
            HwaDescriptor desc;
            desc.device_id = static_cast<int>(get_uint(d, p + ".", "device_id"));
            desc.vendor_tag = get_string(d, p + ".", "vendor_tag", "mock-hwa");
            std::string part = get_string(d, p + ".", "partition", "soft");
            if (part == "hard")
                desc.partition_kind = PartitionKind::Hard;
            else if (part == "soft")
                desc.partition_kind = PartitionKind::Soft;
            else
                bad(p + ".partition", "must be hard or soft");
            desc.num_lpus = static_cast<int>(get_uint(d, p + ".", "num_lpus", 1));
            if (d.contains("profiles")) {
                if (!d.at("profiles").is_array()) bad(p + ".profiles", "must be an array");
                for (const json& pr : d.at("profiles")) {
                    if (!pr.is_string()) bad(p + ".profiles", "entries must be strings");
                    std::string name = pr.get<std::string>();
                    if (name == "fec_lookaside")
                        desc.supported_profiles.insert(Profile::FecLookaside);
                    else if (name == "high_phy_inline")
                        desc.supported_profiles.insert(Profile::HighPhyInline);
                    else
                        bad(p + ".profiles", "unknown profile " + name);
                }
            } else {
                desc.supported_profiles = {Profile::FecLookaside, Profile::HighPhyInline};
            }
            try {
                desc.firmware_version = FirmwareVersion::parse(get_string(d, p + ".", "firmware", "1.0.0"));
            } catch (const Error& e) {
                bad(p + ".firmware", e.what());
            }
            cfg.devices.push_back(std::move(desc));
        }
    }

    cfg.validate();
    return cfg;
}

ScenarioConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_error, "cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config_json(ss.str());
}

}  // namespace aalsim
