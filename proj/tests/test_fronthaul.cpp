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

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "aalsim/errors.hpp"
#include "aalsim/fronthaul.hpp"
#include "aalsim/rng.hpp"

using namespace aalsim;

namespace {

FronthaulPacket make_packet(std::uint16_t slot, std::uint32_t seq, Bytes payload) {
    FronthaulPacket p;
    p.header.plane = kPlaneUser;
    p.header.flow_id = 1;
    p.header.slot_id = slot;
    p.header.seq_num = seq;
    p.header.payload_len = static_cast<std::uint16_t>(payload.size());
    p.payload = std::move(payload);
    return p;
}

std::vector<FronthaulPacket> segment_payload(const Bytes& payload, std::size_t seg,
                                             std::uint16_t slot) {
    std::vector<FronthaulPacket> out;
    for (std::size_t off = 0, seq = 0; off < payload.size(); off += seg, ++seq) {
        std::size_t len = std::min(seg, payload.size() - off);
        out.push_back(make_packet(slot, static_cast<std::uint32_t>(seq),
                                  Bytes(payload.begin() + static_cast<std::ptrdiff_t>(off),
                                        payload.begin() + static_cast<std::ptrdiff_t>(off + len))));
    }
    return out;
}

Bytes run_engine(ReorderStrategy strategy, const std::vector<FronthaulPacket>& order,
                 std::size_t seg, std::size_t total, std::uint32_t expected, std::uint16_t slot,
                 double* ready = nullptr, PlacementCost cost = {1.0, 0.0},
                 const std::vector<double>* times = nullptr) {
    ReorderEngine engine(strategy, slot, expected, seg, total, cost);
    for (std::size_t i = 0; i < order.size(); ++i)
        engine.submit(order[i], times ? (*times)[i] : static_cast<double>(i));
    AssemblyResult r = engine.finalize();
    REQUIRE(r.complete);
    if (ready) *ready = r.ready_time_us;
    return r.payload;
}

}  // namespace

TEST_CASE("packet serialization matches the frozen byte layout") {
    FronthaulPacket p;
    p.header.version = 1;
    p.header.plane = 1;
    p.header.flow_id = 0x0001;
    p.header.slot_id = 0x0002;
    p.header.symbol_id = 3;
    p.header.section_id = 4;
    p.header.seq_num = 0x00000005;
    p.header.payload_len = 0x0002;
    p.header.reserved = 0;
    p.payload = {0xAB, 0xCD};
    Bytes expected = {0x01, 0x01, 0x00, 0x01, 0x00, 0x02, 0x03, 0x04, 0x00,
                      0x00, 0x00, 0x05, 0x00, 0x02, 0x00, 0x00, 0xAB, 0xCD};
    CHECK(serialize_packet(p) == expected);
    CHECK(parse_packet(expected) == p);
}

TEST_CASE("packet codec round-trips and rejects malformed input") {
    DetRng rng(21);
    for (int i = 0; i < 10000; ++i) {
        FronthaulPacket p;
        p.header.plane = static_cast<std::uint8_t>(rng.bounded(2));
        p.header.flow_id = static_cast<std::uint16_t>(rng.bounded(1 << 16));
        p.header.slot_id = static_cast<std::uint16_t>(rng.bounded(1 << 16));
        p.header.symbol_id = static_cast<std::uint8_t>(rng.bounded(256));
        p.header.section_id = static_cast<std::uint8_t>(rng.bounded(256));
        p.header.seq_num = rng.next_u32();
        p.payload = rng.bytes(rng.bounded(64));
        p.header.payload_len = static_cast<std::uint16_t>(p.payload.size());
        CHECK(parse_packet(serialize_packet(p)) == p);
    }

    CHECK_THROWS_AS(parse_packet(Bytes(15, 0)), Error);

    // Declared length must equal the actual remainder.
    FronthaulPacket p = make_packet(0, 0, {1, 2, 3});
    Bytes wire = serialize_packet(p);
    wire.push_back(0xFF);
    CHECK_THROWS_AS(parse_packet(wire), Error);
    wire.pop_back();
    wire.pop_back();
    CHECK_THROWS_AS(parse_packet(wire), Error);

    Bytes bad_version = serialize_packet(p);
    bad_version[0] = 9;
    CHECK_THROWS_AS(parse_packet(bad_version), Error);

    FronthaulPacket lying = p;
    lying.header.payload_len = 7;
    CHECK_THROWS_AS(serialize_packet(lying), Error);
}

TEST_CASE("packetize splits a device payload into host headers and device ranges") {
    EventTrace trace;
    MemorySystem mem(&trace);
    PoolId dev = mem.create_pool(MemoryDomain::device(0), 8192, 4);
    PoolId headers = mem.create_pool(MemoryDomain::host(), kPacketHeaderSize, 16);

    DetRng rng(22);
    Bytes payload = rng.bytes(4000);
    BufferId buf = mem.alloc(dev);
    mem.write(buf, payload);

    std::vector<ScatterGatherDescriptor> descs = packetize_slot(mem, buf, 1516, headers, 7, 3);
    REQUIRE(descs.size() == 3);
    CHECK(descs[0].payload_region.length == 1500);
    CHECK(descs[1].payload_region.length == 1500);
    CHECK(descs[2].payload_region.length == 1000);

    Bytes reassembled;
    for (std::size_t i = 0; i < descs.size(); ++i) {
        CHECK(descs[i].header.seq_num == i);
        CHECK(descs[i].header_region.domain.is_host());
        CHECK(descs[i].payload_region.domain.is_device());
        CHECK(descs[i].payload_region.buffer == buf);
        Bytes wire = gather_packet(mem, descs[i]);
        FronthaulPacket p = parse_packet(wire);
        CHECK(p.header.flow_id == 7);
        CHECK(p.header.slot_id == 3);
        reassembled.insert(reassembled.end(), p.payload.begin(), p.payload.end());
    }
    CHECK(reassembled == payload);

    // Exactly one segment when the payload fits a single packet.
    BufferId small = mem.alloc(dev);
    mem.write(small, rng.bytes(1500));
    CHECK(packetize_slot(mem, small, 1516, headers, 7, 4).size() == 1);

    CHECK_THROWS_AS(packetize_slot(mem, buf, 16, headers, 7, 5), Error);
    CHECK(packet_count_for(1, 1516) == 1);
}

TEST_CASE("reorder strategies assemble identical bytes under any permutation") {
    DetRng rng(23);
    // Exhaustive over every permutation of up to 5 packets.
    for (std::uint32_t n = 1; n <= 5; ++n) {
        std::size_t seg = 16;
        Bytes payload = rng.bytes(seg * (n - 1) + 7);  // ragged tail
        std::vector<FronthaulPacket> packets = segment_payload(payload, seg, 2);
        REQUIRE(packets.size() == n);
        std::vector<std::uint32_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        do {
            std::vector<FronthaulPacket> order;
            for (std::uint32_t idx : perm) order.push_back(packets[idx]);
            Bytes a = run_engine(ReorderStrategy::Streaming, order, seg, payload.size(), n, 2);
            Bytes b = run_engine(ReorderStrategy::Sequential, order, seg, payload.size(), n, 2);
            CHECK(a == payload);
            CHECK(b == payload);
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
}

TEST_CASE("duplicates are rejected with first-wins placement") {
    std::size_t seg = 8;
    Bytes payload{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
    std::vector<FronthaulPacket> packets = segment_payload(payload, seg, 9);
    ReorderEngine engine(ReorderStrategy::Streaming, 9, 2, seg, payload.size(), {1.0, 0.0});

    CHECK(engine.submit(packets[0], 0.0) == PlacementAction::Placed);
    FronthaulPacket forged = packets[0];
    forged.payload = Bytes(seg, 0xEE);
    CHECK(engine.submit(forged, 1.0) == PlacementAction::Duplicate);
    CHECK(engine.submit(packets[1], 2.0) == PlacementAction::Placed);

    AssemblyResult r = engine.finalize();
    REQUIRE(r.complete);
    CHECK(r.payload == payload);  // the forged duplicate changed nothing
}

TEST_CASE("finalize reports the missing sequence numbers") {
    std::size_t seg = 4;
    Bytes payload(12, 0x55);
    std::vector<FronthaulPacket> packets = segment_payload(payload, seg, 1);
    ReorderEngine engine(ReorderStrategy::Sequential, 1, 3, seg, payload.size(), {1.0, 0.0});
    engine.submit(packets[0], 0.0);
    engine.submit(packets[2], 1.0);
    AssemblyResult r = engine.finalize();
    CHECK_FALSE(r.complete);
    CHECK(r.missing == std::vector<std::uint32_t>{1});
}

TEST_CASE("reorder engine rejects foreign and malformed packets") {
    ReorderEngine engine(ReorderStrategy::Streaming, 4, 2, 8, 16, {1.0, 0.0});
    CHECK_THROWS_AS(engine.submit(make_packet(5, 0, Bytes(8, 0)), 0.0), Error);  // wrong slot
    CHECK_THROWS_AS(engine.submit(make_packet(4, 9, Bytes(8, 0)), 0.0), Error);  // seq range
    CHECK_THROWS_AS(engine.submit(make_packet(4, 0, Bytes(5, 0)), 0.0), Error);  // bad length
}

TEST_CASE("streaming is never slower than sequential and wins under spread arrivals") {
    DetRng rng(24);
    for (int trial = 0; trial < 300; ++trial) {
        std::uint32_t n = 2 + static_cast<std::uint32_t>(rng.bounded(12));
        std::size_t seg = 32;
        Bytes payload = rng.bytes(seg * n);
        std::vector<FronthaulPacket> packets = segment_payload(payload, seg, 3);
        PlacementCost cost{0.1 + rng.uniform01() * 3.0, rng.uniform01() * 0.01};

        std::vector<double> times(n);
        bool spread = rng.chance(0.7);
        double t = 0.0;
        for (auto& x : times) {
            if (spread) t += rng.uniform01() * 5.0;
            x = t;
        }
        std::vector<FronthaulPacket> order = packets;
        rng.shuffle(order);

        double ready_s = 0.0;
        double ready_q = 0.0;
        Bytes a = run_engine(ReorderStrategy::Streaming, order, seg, payload.size(), n, 3,
                             &ready_s, cost, &times);
        Bytes b = run_engine(ReorderStrategy::Sequential, order, seg, payload.size(), n, 3,
                             &ready_q, cost, &times);
        CHECK(a == b);
        CHECK(ready_s <= ready_q);
        bool multiple_event_times = times.front() != times.back();
        if (multiple_event_times) CHECK(ready_s < ready_q);
    }
}

TEST_CASE("channel schedules are pure functions of their spec") {
    DetRng rng(25);
    std::vector<FronthaulPacket> packets;
    for (std::uint32_t i = 0; i < 5; ++i) packets.push_back(make_packet(0, i, rng.bytes(4)));

    ChannelSpec identity;
    std::vector<Delivery> plain = apply_channel(packets, identity);
    REQUIRE(plain.size() == 5);
    for (std::uint32_t i = 0; i < 5; ++i) {
        CHECK(plain[i].packet.header.seq_num == i);
        CHECK(plain[i].time_us == 0.0);
    }

    ChannelSpec reversed;
    reversed.permutation = {4, 3, 2, 1, 0};
    std::vector<Delivery> rev = apply_channel(packets, reversed);
    for (std::uint32_t i = 0; i < 5; ++i) CHECK(rev[i].packet.header.seq_num == 4 - i);

    ChannelSpec random_a = random_channel(5, 99, 10.0, 1);
    ChannelSpec random_b = random_channel(5, 99, 10.0, 1);
    CHECK(random_a.permutation == random_b.permutation);
    CHECK(random_a.delay_us == random_b.delay_us);
    CHECK(random_a.drop_seqs == random_b.drop_seqs);
    std::vector<Delivery> da = apply_channel(packets, random_a);
    std::vector<Delivery> db = apply_channel(packets, random_b);
    REQUIRE(da.size() == db.size());
    for (std::size_t i = 0; i < da.size(); ++i) {
        CHECK(da[i].time_us == db[i].time_us);
        CHECK(da[i].packet == db[i].packet);
    }
    CHECK(da.size() == 4);  // one drop

    ChannelSpec bad;
    bad.permutation = {0, 0, 1, 2, 3};
    CHECK_THROWS_AS(apply_channel(packets, bad), Error);
}

TEST_CASE("the parser only ever accepts or throws on arbitrary bytes") {
    DetRng rng(26);
    int accepted = 0;
    for (int i = 0; i < 5000; ++i) {
        Bytes blob = rng.bytes(rng.bounded(64));
        if (rng.chance(0.3) && blob.size() > 0) blob[0] = kPacketVersion;  // more live headers
        if (rng.chance(0.2) && blob.size() >= kPacketHeaderSize) {
            // Patch a consistent header so the accept path gets exercised.
            blob[0] = kPacketVersion;
            std::size_t len = blob.size() - kPacketHeaderSize;
            blob[12] = static_cast<std::uint8_t>(len >> 8);
            blob[13] = static_cast<std::uint8_t>(len & 0xFF);
        }
        try {
            FronthaulPacket p = parse_packet(blob);
            CHECK(serialize_packet(p) == blob);  // accepted input round-trips
            ++accepted;
        } catch (const Error& e) {
            bool typed = e.code() == Errc::truncated || e.code() == Errc::bad_version ||
                         e.code() == Errc::length_mismatch;
            CHECK_MESSAGE(typed, std::string(e.what()));
        }
    }
    CHECK(accepted > 0);  // the corpus reaches the accept path too
}

TEST_CASE("golden packet file parses and re-serializes bit-exactly") {
    const char* dir = std::getenv("AALSIM_TEST_DATA");
    REQUIRE_MESSAGE(dir != nullptr, "AALSIM_TEST_DATA must point at tests/data");
    std::ifstream in(std::string(dir) + "/golden_packets.bin", std::ios::binary);
    REQUIRE(in.good());
    Bytes blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(!blob.empty());

    std::size_t off = 0;
    std::size_t count = 0;
    Bytes rewritten;
    while (off < blob.size()) {
        REQUIRE(off + kPacketHeaderSize <= blob.size());
        std::uint16_t len = static_cast<std::uint16_t>((blob[off + 12] << 8) | blob[off + 13]);
        std::size_t total = kPacketHeaderSize + len;
        REQUIRE(off + total <= blob.size());
        FronthaulPacket p =
            parse_packet(std::span<const std::uint8_t>(blob.data() + off, total));
        Bytes again = serialize_packet(p);
        rewritten.insert(rewritten.end(), again.begin(), again.end());
        off += total;
        ++count;
    }
    CHECK(count >= 4);
    CHECK(rewritten == blob);
}
