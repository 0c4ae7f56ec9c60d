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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "aalsim/bits.hpp"
#include "aalsim/memory.hpp"
#include "aalsim/rng.hpp"

namespace aalsim {

// ----------------------------------------------------------- packet codec ---
//
// 16-byte header, multi-byte fields big-endian:
//   version(1) plane(1) flow_id(2) slot_id(2) symbol_id(1) section_id(1)
//   seq_num(4) payload_len(2) reserved(2)
// followed by payload_len payload bytes.

inline constexpr std::size_t kPacketHeaderSize = 16;
inline constexpr std::uint8_t kPacketVersion = 1;
inline constexpr std::uint8_t kPlaneControl = 0;
inline constexpr std::uint8_t kPlaneUser = 1;

struct PacketHeader {
    std::uint8_t version = kPacketVersion;
    std::uint8_t plane = kPlaneUser;
    std::uint16_t flow_id = 0;
    std::uint16_t slot_id = 0;
    std::uint8_t symbol_id = 0;
    std::uint8_t section_id = 0;
    std::uint32_t seq_num = 0;
    std::uint16_t payload_len = 0;
    std::uint16_t reserved = 0;

    bool operator==(const PacketHeader&) const = default;
};

struct FronthaulPacket {
    PacketHeader header;
    Bytes payload;

    bool operator==(const FronthaulPacket&) const = default;
};

Bytes serialize_header(const PacketHeader& h);
Bytes serialize_packet(const FronthaulPacket& p);
FronthaulPacket parse_packet(std::span<const std::uint8_t> bytes);

// ------------------------------------------------- scatter-gather egress ---

/// A contiguous byte range inside a buffer.
struct MemRegion {
    MemoryDomain domain;
    BufferId buffer = 0;
    std::size_t offset = 0;
    std::size_t length = 0;
};

/// One egress packet assembled from two memory areas: the header written by
/// the CPU into host memory and the payload left in place in device memory.
struct ScatterGatherDescriptor {
    MemRegion header_region;
    MemRegion payload_region;
    PacketHeader header;
};

/// Splits a device-resident payload into mtu-sized packets. Headers are
/// allocated from header_pool and written there; payload regions point into
/// the source buffer without copying. seq_nums run from 0; segments are
/// equal-size (mtu-16) with a ragged tail.
std::vector<ScatterGatherDescriptor> packetize_slot(MemorySystem& mem, BufferId payload,
                                                    std::uint16_t mtu, PoolId header_pool,
                                                    std::uint16_t flow_id, std::uint16_t slot_id);

/// NIC-side gather: header bytes ++ payload bytes, ready for the wire.
Bytes gather_packet(const MemorySystem& mem, const ScatterGatherDescriptor& d);

/// Number of packets a payload of the given size splits into.
std::size_t packet_count_for(std::size_t payload_bytes, std::uint16_t mtu);

// --------------------------------------------------------------- reorder ---

enum class ReorderStrategy { Streaming, Sequential };

const char* reorder_strategy_name(ReorderStrategy s);

/// Time a single placement (copy of one packet payload to its slot offset)
/// takes on the placement engine.
struct PlacementCost {
    double per_packet_us = 1.0;
    double per_byte_us = 0.0;

    double cost_us(std::size_t bytes) const {
        return per_packet_us + per_byte_us * static_cast<double>(bytes);
    }
};

enum class PlacementAction { Placed, Buffered, Duplicate };

struct PlacementRecord {
    std::uint32_t seq = 0;
    std::size_t offset = 0;
    double start_us = 0.0;
    double finish_us = 0.0;
};

struct AssemblyResult {
    bool complete = false;
    Bytes payload;                     // valid when complete
    std::vector<std::uint32_t> missing;  // valid when !complete
    double ready_time_us = 0.0;        // when the contiguous payload is built
    std::vector<PlacementRecord> placements;
};

/// Rebuilds one slot's contiguous payload from out-of-order packets.
/// Destination offset is a pure function of seq_num (seq * segment_size), so
/// Streaming can place each packet the moment it arrives while later packets
/// are still in flight; Sequential holds everything and runs one placement
/// pass after the last arrival. Both produce identical bytes; they differ
/// only in when the payload is ready.
class ReorderEngine {
  public:
    ReorderEngine(ReorderStrategy strategy, std::uint16_t slot_id, std::uint32_t expected_packets,
                  std::size_t segment_size, std::size_t total_bytes, PlacementCost cost);

    /// First submission wins; a repeated seq is rejected unchanged.
    PlacementAction submit(const FronthaulPacket& packet, double arrival_time_us);

    /// Record of the placement the most recent Placed submit triggered
    /// (Streaming only).
    const PlacementRecord* last_placement() const;

    AssemblyResult finalize() const;

    std::uint32_t received() const { return static_cast<std::uint32_t>(have_.size()); }
    std::uint32_t expected() const { return expected_; }

  private:
    std::size_t expected_len(std::uint32_t seq) const;

    ReorderStrategy strategy_;
    std::uint16_t slot_id_;
    std::uint32_t expected_;
    std::size_t segment_size_;
    std::size_t total_bytes_;
    PlacementCost cost_;
    Bytes assembly_;
    std::set<std::uint32_t> have_;
    double last_arrival_us_ = 0.0;
    double engine_free_us_ = 0.0;
    std::vector<PlacementRecord> placements_;
    std::vector<std::pair<double, FronthaulPacket>> held_;  // Sequential only
};

// --------------------------------------------------------------- channel ---

/// What the fronthaul does to a slot's packets: delivery order, losses, and
/// per-packet delay. Applying the same spec always yields the same schedule.
struct ChannelSpec {
    std::vector<std::uint32_t> permutation;  // delivery order as indices; empty = identity
    std::set<std::uint32_t> drop_seqs;
    std::vector<double> delay_us;  // indexed by seq; missing entries = 0
};

struct Delivery {
    double time_us = 0.0;
    FronthaulPacket packet;
};

/// Deliveries in wire order (permutation order, drops removed), each stamped
/// with its delay.
std::vector<Delivery> apply_channel(const std::vector<FronthaulPacket>& packets,
                                    const ChannelSpec& spec);

ChannelSpec random_channel(std::uint32_t num_packets, std::uint64_t seed, double max_delay_us,
                           std::uint32_t num_drops);

}  // namespace aalsim
