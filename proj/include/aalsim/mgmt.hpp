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
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aalsim/trace.hpp"

namespace aalsim {

enum class PartitionKind { Hard, Soft };
enum class Profile { FecLookaside, HighPhyInline };

const char* partition_name(PartitionKind k);
const char* profile_name(Profile p);

struct FirmwareVersion {
    int major = 0;
    int minor = 0;
    int patch = 0;

    bool operator==(const FirmwareVersion&) const = default;
    std::string to_string() const;
    static FirmwareVersion parse(const std::string& s);
};

struct HwaDescriptor {
    int device_id = 0;
    std::string vendor_tag;
    PartitionKind partition_kind = PartitionKind::Soft;
    int num_lpus = 1;
    std::set<Profile> supported_profiles;
    FirmwareVersion firmware_version;

    bool operator==(const HwaDescriptor&) const = default;
};

enum class DeviceState { Discovered, Initialized, Running, Stopped, Faulted };

const char* device_state_name(DeviceState s);

enum class LifecycleOp { Init, Start, Stop, Reset, Upgrade };

struct PerfCounters {
    std::uint64_t jobs_completed = 0;
    std::uint64_t jobs_failed = 0;
    std::uint64_t bytes_in = 0;
    std::uint64_t bytes_out = 0;
    std::uint64_t queue_occupancy_high_watermark = 0;

    bool operator==(const PerfCounters&) const = default;
};

struct MgmtErrorEvent {
    std::uint64_t trace_seq = 0;
    int device_id = 0;
    std::string kind;  // "fault" or "job_failure"
    std::string detail;
};

using ErrorSink = std::function<void(const MgmtErrorEvent&)>;

/// Per-LPU configuration. Unknown keys are rejected atomically.
using LpuConfig = std::map<std::string, std::int64_t>;

/// Registry of mock HWA devices and the management operations over them:
/// discovery, lifecycle, per-LPU configuration, performance counters, and
/// error-event fan-out. Counter snapshots are exactly reproducible by folding
/// the trace events the registry emits.
class DeviceRegistry {
  public:
    explicit DeviceRegistry(EventTrace& trace) : trace_(trace) {}

    int register_device(const HwaDescriptor& desc);
    std::vector<HwaDescriptor> discover() const;

    DeviceState state(int device_id) const;
    DeviceState lifecycle(int device_id, LifecycleOp op,
                          std::optional<FirmwareVersion> version = std::nullopt);
    void inject_fault(int device_id, const std::string& detail);

    LpuConfig configure_lpu(int device_id, int lpu_index, const LpuConfig& config);
    LpuConfig lpu_config(int device_id, int lpu_index) const;

    PerfCounters perf_counters(int device_id) const;
    void reset_counters(int device_id);

    std::uint64_t subscribe_errors(int device_id, ErrorSink sink);
    void unsubscribe_errors(int device_id, std::uint64_t subscription);

    // Hooks for the offload engine. The registry tracks device-wide pending
    // jobs so the occupancy watermark spans every instance and queue.
    void note_job_enqueued(int device_id);
    void note_job_done(int device_id, bool ok, std::uint64_t bytes_in, std::uint64_t bytes_out,
                       const std::string& fail_detail = "");

    static const std::set<std::string>& known_config_keys();

  private:
    struct Device {
        HwaDescriptor desc;
        DeviceState state = DeviceState::Discovered;
        PerfCounters counters;
        std::uint64_t pending_jobs = 0;
        std::vector<LpuConfig> lpu_configs;
        std::map<std::uint64_t, ErrorSink> sinks;
    };

    Device& dev(int device_id);
    const Device& dev(int device_id) const;
    void dispatch_error_locked(Device& d, const std::string& kind, const std::string& detail,
                               std::vector<std::pair<ErrorSink, MgmtErrorEvent>>& out);

    mutable std::mutex mu_;
    EventTrace& trace_;
    std::map<int, Device> devices_;
    std::uint64_t next_subscription_ = 1;
};

}  // namespace aalsim
