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

#include <atomic>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aalsim/bits.hpp"
#include "aalsim/trace.hpp"

namespace aalsim {

struct MemoryDomain {
    enum class Kind { Host, Device };

    Kind kind = Kind::Host;
    int device_id = -1;  // meaningful only for Device

    static MemoryDomain host() { return {Kind::Host, -1}; }
    static MemoryDomain device(int id) { return {Kind::Device, id}; }

    bool is_host() const { return kind == Kind::Host; }
    bool is_device() const { return kind == Kind::Device; }

    bool operator==(const MemoryDomain&) const = default;

    std::string to_string() const {
        return is_host() ? "host" : "device" + std::to_string(device_id);
    }
};

enum class Ownership { AppOwned, HwaOwned, Freed };
enum class PoolState { Active, Terminated };

const char* ownership_name(Ownership o);

/// Affine cost of moving bytes over the host<->device link.
struct LinkModel {
    double latency_us = 0.0;
    double bandwidth_bytes_per_us = 1.0;
};

double transfer_time_us(std::uint64_t bytes, const LinkModel& link);

/// Tallies of data movement. host_device_* count only copies whose endpoints
/// straddle the host/device boundary; everything else is a local copy.
struct TransferCounters {
    std::atomic<std::uint64_t> host_device_transfers{0};
    std::atomic<std::uint64_t> host_device_bytes{0};
    std::atomic<std::uint64_t> local_copies{0};

    struct Snapshot {
        std::uint64_t host_device_transfers = 0;
        std::uint64_t host_device_bytes = 0;
        std::uint64_t local_copies = 0;
        bool operator==(const Snapshot&) const = default;
    };

    Snapshot snapshot() const {
        return {host_device_transfers.load(), host_device_bytes.load(), local_copies.load()};
    }

    void reset() {
        host_device_transfers = 0;
        host_device_bytes = 0;
        local_copies = 0;
    }
};

using PoolId = std::uint32_t;
using BufferId = std::uint64_t;

struct BufferInfo {
    BufferId id = 0;
    PoolId pool = 0;
    MemoryDomain domain;
    std::size_t capacity = 0;
    std::size_t length = 0;
    Ownership ownership = Ownership::AppOwned;
};

struct PoolInfo {
    PoolId id = 0;
    MemoryDomain domain;
    std::size_t buffer_size = 0;
    std::size_t count = 0;
    std::size_t free_count = 0;
    PoolState state = PoolState::Active;
};

/// Owns every pool and buffer slot in a run. Contents are real byte arrays so
/// end-to-end payload checks are possible. All mutations are serialized under
/// one lock, which makes every pool's accounting linearizable.
class MemorySystem {
  public:
    explicit MemorySystem(EventTrace* trace = nullptr) : trace_(trace) {}

    MemorySystem(const MemorySystem&) = delete;
    MemorySystem& operator=(const MemorySystem&) = delete;

    PoolId create_pool(MemoryDomain domain, std::size_t buffer_size, std::size_t count);
    void terminate_pool(PoolId pool);

    BufferId alloc(PoolId pool);
    void free_buffer(BufferId buf);

    /// Allocates a buffer in dst_pool holding an exact copy of src's content
    /// and counts the movement against the counters.
    BufferId copy_across(BufferId src, PoolId dst_pool, TransferCounters& counters);

    /// Copies src content into an existing buffer, all-or-nothing.
    void copy_into(BufferId src, BufferId dst, TransferCounters& counters);

    void write(BufferId buf, std::span<const std::uint8_t> data);
    Bytes read(BufferId buf) const;

    BufferInfo info(BufferId buf) const;
    PoolInfo pool_info(PoolId pool) const;
    std::vector<PoolInfo> pools() const;

    // Ownership hand-off between app and HWA. Freed is terminal.
    void set_hwa_owned(BufferId buf);
    void set_app_owned(BufferId buf);
    /// HWA-side release of an HwaOwned buffer (ownership-transferred sends).
    void hwa_release(BufferId buf);

    /// Number of non-Freed buffers; equals sum over pools of count-free_count.
    std::uint64_t live_buffers() const;

    /// Counting rule applied to a copy between the given domains.
    static void count_copy(const MemoryDomain& src, const MemoryDomain& dst, std::size_t bytes,
                           TransferCounters& counters);

  private:
    struct Slot {
        BufferId id = 0;
        PoolId pool = 0;
        std::size_t length = 0;
        Ownership ownership = Ownership::AppOwned;
        Bytes data;
    };

    struct Pool {
        PoolInfo info;
        std::size_t hwa_owned = 0;
    };

    Slot& slot(BufferId buf);
    const Slot& slot(BufferId buf) const;
    Pool& pool_ref(PoolId pool);
    void trace_buf(const char* kind, const Slot& s, TraceFields extra = {});

    mutable std::mutex mu_;
    EventTrace* trace_ = nullptr;
    std::unordered_map<PoolId, Pool> pools_;
    std::unordered_map<BufferId, Slot> buffers_;
    PoolId next_pool_ = 1;
    BufferId next_buffer_ = 1;
};

}  // namespace aalsim
