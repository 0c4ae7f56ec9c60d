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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aalsim/fronthaul.hpp"
#include "aalsim/memory.hpp"
#include "aalsim/mgmt.hpp"
#include "aalsim/phy.hpp"

namespace aalsim {

enum class Direction { Uplink, Downlink, CompareModes };
enum class OffloadMode { Inline, Lookaside };

const char* direction_name(Direction d);
const char* offload_mode_name(OffloadMode m);

// The processing chain the scenarios run. Downlink is stages 0..3, uplink is
// the inverse stages 4..7; compare_modes runs the full loopback 0..7.
inline constexpr std::size_t kNumStages = 8;
inline constexpr std::size_t kStagesPerDirection = 4;

const char* stage_name(std::size_t stage);

struct ChannelConfig {
    enum class Permutation { Identity, Reverse, Seeded };

    Permutation permutation = Permutation::Identity;
    double max_delay_us = 0.0;

    struct SlotSeqs {
        std::uint32_t slot = 0;
        std::vector<std::uint32_t> seqs;
    };
    std::vector<SlotSeqs> drops;
    std::vector<SlotSeqs> duplicates;
};

struct StageTimes {
    std::vector<double> host;    // kNumStages entries, microseconds
    std::vector<double> device;  // kNumStages entries, microseconds

    static StageTimes uniform(double host_us, double device_us);
};

struct ScenarioConfig {
    Direction direction = Direction::Uplink;
    double slot_duration_us = 500.0;
    std::uint32_t num_slots = 1;
    std::size_t tb_size_bytes = 256;
    std::uint16_t mtu = 1516;
    LinkModel link{2.0, 100.0};
    ChannelConfig channel;
    phy::PipelineConfig pipeline;
    OffloadMode offload_mode = OffloadMode::Inline;
    std::vector<std::uint32_t> accelerated_stages;  // direction-relative 0..3, compare 0..7
    ReorderStrategy reorder_strategy = ReorderStrategy::Streaming;
    StageTimes stage_times = StageTimes::uniform(10.0, 2.0);
    PlacementCost placement;
    std::vector<HwaDescriptor> devices;

    /// ConfigInvalid with a field-path diagnostic on the first violation.
    void validate() const;

    /// U-plane packets one slot's payload splits into.
    std::size_t uplane_packets_per_slot() const;
};

ScenarioConfig default_scenario();

struct SlotMetrics {
    std::uint32_t slot = 0;
    std::uint64_t host_device_transfers = 0;
    std::uint64_t host_device_bytes = 0;
    std::uint64_t dl_transfers = 0;
    std::uint64_t ul_transfers = 0;
    double slot_latency_us = 0.0;
    bool deadline_missed = false;
    bool failed = false;

    bool operator==(const SlotMetrics&) const = default;
};

struct MetricsReport {
    int schema_version = 1;
    std::string direction;
    std::string mode;
    std::string reorder_strategy;
    std::uint32_t num_slots = 0;
    std::uint64_t seed = 0;
    double slot_duration_us = 0.0;
    std::vector<SlotMetrics> slots;

    struct Aggregate {
        std::uint64_t host_device_transfers = 0;
        std::uint64_t host_device_bytes = 0;
        double max_slot_latency_us = 0.0;
        double mean_slot_latency_us = 0.0;
        std::uint32_t deadline_misses = 0;
        std::uint32_t slots_failed = 0;
        std::uint64_t functional_hash = 0;

        bool operator==(const Aggregate&) const = default;
    } aggregate;

    bool operator==(const MetricsReport&) const = default;
};

struct RunResult {
    MetricsReport report;
    std::string trace_text;
};

/// Deterministic: identical (cfg, seed) produce byte-identical traces and
/// reports.
RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

struct CompareOutcome {
    RunResult inline_run;
    RunResult lookaside_run;
    bool outputs_match = false;
    double transfer_ratio = 0.0;  // lookaside transfers / max(1, inline transfers)
};

/// Runs the same slot workload in both offload modes. Functional outputs are
/// identical; only data placement and movement differ.
CompareOutcome compare_modes(const ScenarioConfig& cfg, std::uint64_t seed);

/// Rebuilds a MetricsReport purely from a serialized trace: transfers are
/// counted from copy events, latencies from slot timestamps, failures from
/// failure events. Independent of the counters the simulator maintains.
MetricsReport fold_trace(const std::string& trace_text);

struct FlowCheck {
    bool ok = true;
    std::string detail;
};

/// Verifies every fault-free slot's milestones appear exactly once and in the
/// canonical order (six steps uplink, five downlink).
FlowCheck check_flow_conformance(const std::string& trace_text);

std::uint64_t fnv1a64(std::span<const std::uint8_t> data, std::uint64_t h = 1469598103934665603ull);

}  // namespace aalsim
