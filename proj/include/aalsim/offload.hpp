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
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aalsim/mgmt.hpp"
#include "aalsim/phy.hpp"
#include "aalsim/trace.hpp"

namespace aalsim {

using QueueId = std::uint32_t;
using JobId = std::uint64_t;

struct FecJob {
    enum class Op { Encode, Decode };
    Op op = Op::Encode;
    phy::CodeSpec code;
    Bits bits;
};

struct HighPhyJob {
    enum class Dir { Downlink, Uplink };
    Dir dir = Dir::Downlink;
    phy::PipelineConfig cfg;
    Bytes tb;                        // Downlink input
    std::vector<phy::IqSample> iq;   // Uplink input
};

using JobPayload = std::variant<FecJob, HighPhyJob>;

Profile payload_profile(const JobPayload& payload);
std::uint64_t payload_bytes(const JobPayload& payload);

struct FecJobOutput {
    Bits bits;
    bool converged = true;
};

struct HighPhyJobOutput {
    std::vector<phy::IqSample> iq;  // Downlink output
    Bytes tb;                       // Uplink output
    bool crc_ok = true;
};

using JobOutput = std::variant<std::monostate, FecJobOutput, HighPhyJobOutput>;

std::uint64_t output_bytes(const JobOutput& output);

struct Completion {
    JobId job = 0;
    QueueId queue = 0;
    bool success = false;
    std::string failure_reason;
    JobOutput output;
    double submit_time_us = 0.0;
    double complete_time_us = 0.0;
};

using CompletionCallback = std::function<void(const Completion&)>;

class ProfileInstance;

/// App-visible handle to a partition of a device's resources. Behavior is
/// identical whether the device is hard- or soft-partitioned.
class AalLpu {
  public:
    AalLpu(DeviceRegistry& registry, int device_id, int lpu_index, int capacity_units,
           EventTrace& trace);

    ProfileInstance& create_profile_instance(Profile profile);

    int device_id() const { return device_id_; }
    int lpu_index() const { return lpu_index_; }
    int capacity_units() const { return capacity_units_; }
    PartitionKind partition_kind() const;

  private:
    DeviceRegistry& registry_;
    EventTrace& trace_;
    int device_id_;
    int lpu_index_;
    int capacity_units_;
    std::vector<std::unique_ptr<ProfileInstance>> instances_;
    std::uint32_t next_instance_ = 1;
};

/// An executable of one profile: prioritized bounded queues in front of a
/// one-job-at-a-time engine. Completions are delivered exactly once, through
/// the registered interrupt callback when there is one and through
/// poll_completions otherwise.
class ProfileInstance {
  public:
    ProfileInstance(DeviceRegistry& registry, EventTrace& trace, int device_id,
                    std::uint32_t instance_id, Profile profile);

    Profile profile() const { return profile_; }
    std::uint32_t id() const { return instance_id_; }

    /// Lower priority value = served first.
    QueueId create_queue(int priority, std::size_t depth);

    JobId enqueue_job(QueueId queue, JobPayload payload);

    struct SelectedJob {
        JobId job = 0;
        QueueId queue = 0;
        JobPayload payload;
    };

    /// Head of the nonempty queue with the numerically lowest priority,
    /// ties broken by lowest QueueId. Nothing while a job is in flight.
    std::optional<SelectedJob> scheduler_step();

    /// Deterministic kernel for a payload; what the mock HWA runs.
    static JobOutput execute(const JobPayload& payload);

    void complete_job(JobId job, bool success, JobOutput output,
                      const std::string& failure_reason = "");

    std::vector<Completion> poll_completions(std::size_t max_n);

    std::uint64_t register_interrupt(CompletionCallback callback);
    void unregister_interrupt(std::uint64_t registration);

    /// Drives select -> execute -> complete until every queue is empty.
    std::size_t run_until_idle();

    std::size_t pending_jobs() const;

  private:
    struct QueueState {
        int priority = 0;
        std::size_t depth = 0;
        std::deque<JobId> pending;
    };

    struct JobState {
        JobId id = 0;
        QueueId queue = 0;
        JobPayload payload;
        double submit_time_us = 0.0;
    };

    DeviceRegistry& registry_;
    EventTrace& trace_;
    int device_id_;
    std::uint32_t instance_id_;
    Profile profile_;

    mutable std::mutex mu_;
    std::map<QueueId, QueueState> queues_;
    std::map<JobId, JobState> jobs_;
    std::optional<JobId> in_flight_;
    std::deque<Completion> completed_;
    CompletionCallback interrupt_;
    std::uint64_t interrupt_id_ = 0;
    QueueId next_queue_ = 1;
    JobId next_job_ = 1;
};

}  // namespace aalsim
