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

#include "aalsim/fronthaul.hpp"

#include <algorithm>

#include "aalsim/errors.hpp"

namespace aalsim {

namespace {

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
    return (static_cast<std::uint32_t>(b[off]) << 24) |
           (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

}  // namespace

Bytes serialize_header(const PacketHeader& h) {
    Bytes out;
    out.reserve(kPacketHeaderSize);
    out.push_back(h.version);
    out.push_back(h.plane);
    put_u16(out, h.flow_id);
    put_u16(out, h.slot_id);
    out.push_back(h.symbol_id);
    out.push_back(h.section_id);
    put_u32(out, h.seq_num);
    put_u16(out, h.payload_len);
    put_u16(out, h.reserved);
    return out;
}

Bytes serialize_packet(const FronthaulPacket& p) {
    if (p.header.payload_len != p.payload.size())
        fail(Errc::length_mismatch, "header declares " + std::to_string(p.header.payload_len) +
                                        " payload bytes, packet carries " +
                                        std::to_string(p.payload.size()));
    Bytes out = serialize_header(p.header);
    out.insert(out.end(), p.payload.begin(), p.payload.end());
    return out;
}

FronthaulPacket parse_packet(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kPacketHeaderSize)
        fail(Errc::truncated, "packet has " + std::to_string(bytes.size()) +
                                  " bytes, header needs " + std::to_string(kPacketHeaderSize));
    FronthaulPacket p;
    p.header.version = bytes[0];
    if (p.header.version != kPacketVersion)
        fail(Errc::bad_version, "unknown packet version " + std::to_string(p.header.version));
    p.header.plane = bytes[1];
    p.header.flow_id = get_u16(bytes, 2);
    p.header.slot_id = get_u16(bytes, 4);
    p.header.symbol_id = bytes[6];
    p.header.section_id = bytes[7];
    p.header.seq_num = get_u32(bytes, 8);
    p.header.payload_len = get_u16(bytes, 12);
    p.header.reserved = get_u16(bytes, 14);
    if (bytes.size() - kPacketHeaderSize != p.header.payload_len)
        fail(Errc::length_mismatch, "declared payload_len " + std::to_string(p.header.payload_len) +
                                        ", actual " +
                                        std::to_string(bytes.size() - kPacketHeaderSize));
    p.payload.assign(bytes.begin() + kPacketHeaderSize, bytes.end());
    return p;
}

std::size_t packet_count_for(std::size_t payload_bytes, std::uint16_t mtu) {
    if (mtu <= kPacketHeaderSize)
        fail(Errc::mtu_too_small, "mtu " + std::to_string(mtu) + " leaves no payload room");
    std::size_t seg = mtu - kPacketHeaderSize;
    return (payload_bytes + seg - 1) / seg;
}

std::vector<ScatterGatherDescriptor> packetize_slot(MemorySystem& mem, BufferId payload,
                                                    std::uint16_t mtu, PoolId header_pool,
                                                    std::uint16_t flow_id, std::uint16_t slot_id) {
    if (mtu <= kPacketHeaderSize)
        fail(Errc::mtu_too_small, "mtu " + std::to_string(mtu) + " leaves no payload room");
    BufferInfo src = mem.info(payload);
    if (src.length == 0) fail(Errc::invalid_argument, "payload buffer is empty");
    const std::size_t seg = mtu - kPacketHeaderSize;
    const std::size_t n = packet_count_for(src.length, mtu);
    const MemoryDomain header_domain = mem.pool_info(header_pool).domain;

    std::vector<ScatterGatherDescriptor> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t off = i * seg;
        std::size_t len = std::min(seg, src.length - off);

        ScatterGatherDescriptor d;
        d.header.plane = kPlaneUser;
        d.header.flow_id = flow_id;
        d.header.slot_id = slot_id;
        d.header.seq_num = static_cast<std::uint32_t>(i);
        d.header.payload_len = static_cast<std::uint16_t>(len);

        BufferId hbuf = mem.alloc(header_pool);
        Bytes hdr = serialize_header(d.header);
        mem.write(hbuf, hdr);

        d.header_region = {header_domain, hbuf, 0, kPacketHeaderSize};
        d.payload_region = {src.domain, payload, off, len};
        out.push_back(std::move(d));
    }
    return out;
}

Bytes gather_packet(const MemorySystem& mem, const ScatterGatherDescriptor& d) {
    Bytes hdr = mem.read(d.header_region.buffer);
    Bytes pay = mem.read(d.payload_region.buffer);
    if (d.header_region.offset + d.header_region.length > hdr.size() ||
        d.payload_region.offset + d.payload_region.length > pay.size())
        fail(Errc::length_mismatch, "scatter-gather region exceeds buffer length");
    Bytes out(hdr.begin() + static_cast<std::ptrdiff_t>(d.header_region.offset),
              hdr.begin() + static_cast<std::ptrdiff_t>(d.header_region.offset +
                                                        d.header_region.length));
    out.insert(out.end(),
               pay.begin() + static_cast<std::ptrdiff_t>(d.payload_region.offset),
               pay.begin() + static_cast<std::ptrdiff_t>(d.payload_region.offset +
                                                         d.payload_region.length));
    return out;
}

// --------------------------------------------------------------- reorder ---

const char* reorder_strategy_name(ReorderStrategy s) {
    return s == ReorderStrategy::Streaming ? "streaming" : "sequential";
}

ReorderEngine::ReorderEngine(ReorderStrategy strategy, std::uint16_t slot_id,
                             std::uint32_t expected_packets, std::size_t segment_size,
                             std::size_t total_bytes, PlacementCost cost)
    : strategy_(strategy),
      slot_id_(slot_id),
      expected_(expected_packets),
      segment_size_(segment_size),
      total_bytes_(total_bytes),
      cost_(cost),
      assembly_(total_bytes, 0) {
    if (expected_packets == 0 || segment_size == 0)
        fail(Errc::invalid_argument, "reorder engine needs expected_packets and segment_size >= 1");
    std::size_t expect_n = (total_bytes + segment_size - 1) / segment_size;
    if (expect_n != expected_packets)
        fail(Errc::invalid_argument, "expected_packets does not match total_bytes/segment_size");
}

std::size_t ReorderEngine::expected_len(std::uint32_t seq) const {
    if (seq + 1 == expected_) return total_bytes_ - segment_size_ * (expected_ - 1);
    return segment_size_;
}

PlacementAction ReorderEngine::submit(const FronthaulPacket& packet, double arrival_time_us) {
    if (packet.header.slot_id != slot_id_)
        fail(Errc::unknown_slot, "packet slot " + std::to_string(packet.header.slot_id) +
                                     " does not match open slot " + std::to_string(slot_id_));
    std::uint32_t seq = packet.header.seq_num;
    if (seq >= expected_)
        fail(Errc::unknown_slot, "seq " + std::to_string(seq) + " outside expected range 0.." +
                                     std::to_string(expected_ - 1));
    if (packet.payload.size() != expected_len(seq))
        fail(Errc::length_mismatch, "seq " + std::to_string(seq) + " payload is " +
                                        std::to_string(packet.payload.size()) + " bytes, expected " +
                                        std::to_string(expected_len(seq)));
    if (arrival_time_us < last_arrival_us_)
        fail(Errc::invalid_argument, "submissions must be in arrival-time order");
    if (have_.contains(seq)) return PlacementAction::Duplicate;
    have_.insert(seq);
    last_arrival_us_ = std::max(last_arrival_us_, arrival_time_us);

    if (strategy_ == ReorderStrategy::Sequential) {
        held_.emplace_back(arrival_time_us, packet);
        return PlacementAction::Buffered;
    }

    // Streaming: the placement engine copies this packet to seq*segment_size
    // as soon as it is free, overlapping with later arrivals.
    std::size_t off = static_cast<std::size_t>(seq) * segment_size_;
    std::copy(packet.payload.begin(), packet.payload.end(),
              assembly_.begin() + static_cast<std::ptrdiff_t>(off));
    double start = std::max(arrival_time_us, engine_free_us_);
    double finish = start + cost_.cost_us(packet.payload.size());
    engine_free_us_ = finish;
    placements_.push_back({seq, off, start, finish});
    return PlacementAction::Placed;
}

const PlacementRecord* ReorderEngine::last_placement() const {
    return placements_.empty() ? nullptr : &placements_.back();
}

AssemblyResult ReorderEngine::finalize() const {
    AssemblyResult r;
    if (have_.size() != expected_) {
        for (std::uint32_t s = 0; s < expected_; ++s)
            if (!have_.contains(s)) r.missing.push_back(s);
        return r;
    }
    r.complete = true;

    if (strategy_ == ReorderStrategy::Streaming) {
        r.payload = assembly_;
        r.ready_time_us = engine_free_us_;
        r.placements = placements_;
        return r;
    }

    // Sequential: one placement pass over everything, starting only after the
    // last packet has arrived.
    r.payload.assign(total_bytes_, 0);
    double t = last_arrival_us_;
    for (const auto& [arrival, pkt] : held_) {
        (void)arrival;
        std::size_t off = static_cast<std::size_t>(pkt.header.seq_num) * segment_size_;
        std::copy(pkt.payload.begin(), pkt.payload.end(),
                  r.payload.begin() + static_cast<std::ptrdiff_t>(off));
        double finish = t + cost_.cost_us(pkt.payload.size());
        r.placements.push_back({pkt.header.seq_num, off, t, finish});
        t = finish;
    }
    r.ready_time_us = t;
    return r;
}

// --------------------------------------------------------------- channel ---

std::vector<Delivery> apply_channel(const std::vector<FronthaulPacket>& packets,
                                    const ChannelSpec& spec) {
    std::vector<std::uint32_t> order;
    if (spec.permutation.empty()) {
        order.resize(packets.size());
        for (std::uint32_t i = 0; i < packets.size(); ++i) order[i] = i;
    } else {
        if (spec.permutation.size() != packets.size())
            fail(Errc::invalid_argument, "permutation length does not match packet count");
        order = spec.permutation;
        std::vector<bool> seen(packets.size(), false);
        for (std::uint32_t idx : order) {
            if (idx >= packets.size() || seen[idx])
                fail(Errc::invalid_argument, "permutation is not a bijection");
            seen[idx] = true;
        }
    }

    std::vector<Delivery> out;
    out.reserve(packets.size());
    for (std::uint32_t idx : order) {
        const FronthaulPacket& p = packets[idx];
        if (spec.drop_seqs.contains(p.header.seq_num)) continue;
        double delay = p.header.seq_num < spec.delay_us.size() ? spec.delay_us[p.header.seq_num] : 0.0;
        out.push_back({delay, p});
    }
    return out;
}

ChannelSpec random_channel(std::uint32_t num_packets, std::uint64_t seed, double max_delay_us,
                           std::uint32_t num_drops) {
    DetRng rng(seed);
    ChannelSpec spec;
    spec.permutation.resize(num_packets);
    for (std::uint32_t i = 0; i < num_packets; ++i) spec.permutation[i] = i;
    rng.shuffle(spec.permutation);
    spec.delay_us.resize(num_packets);
    for (auto& d : spec.delay_us) d = max_delay_us > 0.0 ? rng.uniform01() * max_delay_us : 0.0;
    while (spec.drop_seqs.size() < std::min(num_drops, num_packets))
        spec.drop_seqs.insert(static_cast<std::uint32_t>(rng.bounded(num_packets)));
    return spec;
}

}  // namespace aalsim
