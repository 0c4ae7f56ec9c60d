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

#include "aalsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>

#include "aalsim/errors.hpp"
#include "aalsim/offload.hpp"
#include "aalsim/rng.hpp"
#include "aalsim/transport.hpp"

namespace aalsim {

const char* direction_name(Direction d) {
    switch (d) {
        case Direction::Uplink: return "uplink";
        case Direction::Downlink: return "downlink";
        case Direction::CompareModes: return "compare_modes";
    }
    return "?";
}

const char* offload_mode_name(OffloadMode m) {
    return m == OffloadMode::Inline ? "inline" : "lookaside";
}

const char* stage_name(std::size_t stage) {
    static const char* names[kNumStages] = {"crc_attach", "fec_encode", "scramble",  "modulate",
                                            "demodulate", "descramble", "fec_decode", "crc_check"};
    return stage < kNumStages ? names[stage] : "?";
}

StageTimes StageTimes::uniform(double host_us, double device_us) {
    StageTimes t;
    t.host.assign(kNumStages, host_us);
    t.device.assign(kNumStages, device_us);
    return t;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> data, std::uint64_t h) {
    for (std::uint8_t b : data) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

ScenarioConfig default_scenario() {
    ScenarioConfig cfg;
    HwaDescriptor dev;
    dev.device_id = 0;
    dev.vendor_tag = "mock-hwa";
    dev.partition_kind = PartitionKind::Soft;
    dev.num_lpus = 1;
    dev.supported_profiles = {Profile::FecLookaside, Profile::HighPhyInline};
    dev.firmware_version = {1, 0, 0};
    cfg.devices.push_back(dev);
    return cfg;
}

std::size_t ScenarioConfig::uplane_packets_per_slot() const {
    std::size_t iq_bytes = phy::dl_output_symbols(tb_size_bytes, pipeline) * phy::kIqSampleBytes;
    return packet_count_for(iq_bytes, mtu);
}

void ScenarioConfig::validate() const {
    if (slot_duration_us <= 0.0) fail(Errc::config_invalid, "slot_duration_us: must be > 0");
    if (num_slots < 1) fail(Errc::config_invalid, "num_slots: must be >= 1");
    if (tb_size_bytes < 1) fail(Errc::config_invalid, "tb_size_bytes: must be >= 1");
    if (mtu <= kPacketHeaderSize)
        fail(Errc::config_invalid, "mtu: must exceed the 16-byte packet header");
    if (link.latency_us < 0.0) fail(Errc::config_invalid, "link.latency_us: must be >= 0");
    if (link.bandwidth_bytes_per_us <= 0.0)
        fail(Errc::config_invalid, "link.bandwidth_bytes_per_us: must be > 0");
    if (pipeline.scrambler.seed == 0)
        fail(Errc::config_invalid, "pipeline.scrambler.seed: must be nonzero");
    if (channel.max_delay_us < 0.0) fail(Errc::config_invalid, "channel.max_delay_us: must be >= 0");
    if (stage_times.host.size() != kNumStages || stage_times.device.size() != kNumStages)
        fail(Errc::config_invalid, "stage_times_us: needs one entry per pipeline stage");
    for (double t : stage_times.host)
        if (t < 0.0) fail(Errc::config_invalid, "stage_times_us.host: must be >= 0");
    for (double t : stage_times.device)
        if (t < 0.0) fail(Errc::config_invalid, "stage_times_us.device: must be >= 0");
    if (placement.per_packet_us < 0.0 || placement.per_byte_us < 0.0)
        fail(Errc::config_invalid, "placement_cost: must be >= 0");
    if (devices.empty()) fail(Errc::config_invalid, "devices: at least one device required");

    std::size_t stage_range =
        direction == Direction::CompareModes ? kNumStages : kStagesPerDirection;
    if (offload_mode == OffloadMode::Lookaside && direction != Direction::CompareModes &&
        accelerated_stages.empty())
        fail(Errc::config_invalid,
             "offload.accelerated_stages: lookaside needs at least one accelerated stage");
    for (std::uint32_t s : accelerated_stages) {
        if (s >= stage_range)
            fail(Errc::config_invalid, "offload.accelerated_stages: stage " + std::to_string(s) +
                                           " outside range 0.." + std::to_string(stage_range - 1));
    }

    std::size_t symbols = 0;
    try {
        symbols = phy::dl_output_symbols(tb_size_bytes, pipeline);
    } catch (const Error& e) {
        fail(Errc::config_invalid, std::string("tb_size_bytes: ") + e.what());
    }
    std::size_t pps = packet_count_for(symbols * phy::kIqSampleBytes, mtu);
    auto check_slotseqs = [&](const std::vector<ChannelConfig::SlotSeqs>& v, const char* which) {
        for (const auto& ss : v) {
            if (ss.slot >= num_slots)
                fail(Errc::config_invalid, std::string("channel.") + which + ": slot " +
                                               std::to_string(ss.slot) + " outside run");
            for (std::uint32_t q : ss.seqs)
                if (q >= pps)
                    fail(Errc::config_invalid, std::string("channel.") + which + ": seq " +
                                                   std::to_string(q) + " outside slot's " +
                                                   std::to_string(pps) + " packets");
        }
    };
    check_slotseqs(channel.drops, "drops");
    check_slotseqs(channel.duplicates, "duplicates");

    for (const auto& d : devices) {
        if (d.num_lpus < 1) fail(Errc::config_invalid, "devices: num_lpus must be >= 1");
        if (d.supported_profiles.empty())
            fail(Errc::config_invalid, "devices: supported_profiles must be nonempty");
    }
}

namespace {

// ------------------------------------------------------------ stage values ---

struct StageValue {
    enum class Kind { Tb, Bits, Iq };
    Kind kind = Kind::Tb;
    Bytes tb;
    Bits bits;
    std::vector<phy::IqSample> iq;
    bool crc_ok = true;
};

Bytes stage_value_bytes(const StageValue& v) {
    switch (v.kind) {
        case StageValue::Kind::Tb: return v.tb;
        case StageValue::Kind::Bits: {
            Bytes out;
            out.reserve(4 + (v.bits.size() + 7) / 8);
            std::uint32_t n = static_cast<std::uint32_t>(v.bits.size());
            out.push_back(static_cast<std::uint8_t>(n >> 24));
            out.push_back(static_cast<std::uint8_t>(n >> 16));
            out.push_back(static_cast<std::uint8_t>(n >> 8));
            out.push_back(static_cast<std::uint8_t>(n));
            std::uint8_t acc = 0;
            for (std::size_t i = 0; i < v.bits.size(); ++i) {
                acc = static_cast<std::uint8_t>((acc << 1) | (v.bits[i] & 1u));
                if (i % 8 == 7) {
                    out.push_back(acc);
                    acc = 0;
                }
            }
            if (v.bits.size() % 8 != 0)
                out.push_back(static_cast<std::uint8_t>(acc << (8 - v.bits.size() % 8)));
            return out;
        }
        case StageValue::Kind::Iq: return phy::iq_to_bytes(v.iq);
    }
    return {};
}

Bits encode_stream(const Bits& bits, const phy::CodeSpec& code) {
    if (bits.size() % static_cast<std::size_t>(code.k) != 0)
        fail(Errc::length_not_divisible, "bit stream does not segment into k-bit messages");
    Bits out;
    out.reserve(bits.size() / static_cast<std::size_t>(code.k) * static_cast<std::size_t>(code.n));
    Bits seg(static_cast<std::size_t>(code.k));
    for (std::size_t off = 0; off < bits.size(); off += static_cast<std::size_t>(code.k)) {
        std::copy_n(bits.begin() + static_cast<std::ptrdiff_t>(off), code.k, seg.begin());
        Bits cw = phy::fec_encode(seg, code);
        out.insert(out.end(), cw.begin(), cw.end());
    }
    return out;
}

Bits decode_stream(const Bits& bits, const phy::CodeSpec& code) {
    if (bits.size() % static_cast<std::size_t>(code.n) != 0)
        fail(Errc::length_not_divisible, "bit stream does not segment into n-bit codewords");
    Bits out;
    out.reserve(bits.size() / static_cast<std::size_t>(code.n) * static_cast<std::size_t>(code.k));
    Bits seg(static_cast<std::size_t>(code.n));
    for (std::size_t off = 0; off < bits.size(); off += static_cast<std::size_t>(code.n)) {
        std::copy_n(bits.begin() + static_cast<std::ptrdiff_t>(off), code.n, seg.begin());
        phy::DecodeResult d = phy::fec_decode(seg, code);
        out.insert(out.end(), d.msg.begin(), d.msg.end());
    }
    return out;
}

StageValue run_stage(std::size_t stage, const StageValue& in, const phy::PipelineConfig& cfg) {
    StageValue out;
    switch (stage) {
        case 0:
            out.kind = StageValue::Kind::Bits;
            out.bits = phy::crc_attach(bytes_to_bits(in.tb));
            return out;
        case 1:
            out.kind = StageValue::Kind::Bits;
            out.bits = encode_stream(in.bits, cfg.code);
            return out;
        case 2:
        case 5:
            out.kind = StageValue::Kind::Bits;
            out.bits = phy::scramble(in.bits, cfg.scrambler);
            return out;
        case 3:
            out.kind = StageValue::Kind::Iq;
            out.iq = phy::modulate(in.bits, cfg.modulation);
            return out;
        case 4:
            out.kind = StageValue::Kind::Bits;
            out.bits = phy::demodulate(in.iq, cfg.modulation);
            return out;
        case 6:
            out.kind = StageValue::Kind::Bits;
            out.bits = decode_stream(in.bits, cfg.code);
            return out;
        case 7: {
            phy::CrcCheckResult r = phy::crc_check(in.bits);
            out.kind = StageValue::Kind::Tb;
            out.crc_ok = r.ok;
            out.tb = bits_to_bytes(r.payload);
            return out;
        }
        default: fail(Errc::invalid_argument, "no such pipeline stage");
    }
}

// --------------------------------------------------------------- simulator ---

constexpr std::uint32_t kQueueDlIn = 1;
constexpr std::uint32_t kQueueUlOut = 2;

class Simulator {
  public:
    Simulator(const ScenarioConfig& cfg, std::uint64_t seed)
        : cfg_(cfg),
          seed_(seed),
          mem_(&trace_),
          transport_(mem_, trace_, counters_),
          registry_(trace_) {}

    RunResult run();

    const std::vector<Bytes>& slot_outputs() const { return slot_outputs_; }

  private:
    struct SlotState {
        SlotMetrics metrics;
        bool done = false;
        bool step3_seen = false;
        std::unique_ptr<ReorderEngine> engine;
        std::size_t deliveries_remaining = 0;
        bool assembly_finalized = false;
        Bytes tb_ref;
        Bytes iq_ref;
        std::vector<BufferId> ingress;
        std::optional<ProfileInstance::SelectedJob> running_job;
    };

    void at(double t, int slot, const char* half, std::function<void()> fn);
    void run_events();

    double slot_start(std::uint32_t slot) const {
        return static_cast<double>(slot) * cfg_.slot_duration_us;
    }

    std::uint64_t slot_seed(std::uint32_t slot) const {
        return seed_ ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(slot) + 1));
    }

    void setup();
    void schedule_uplink(std::uint32_t slot);
    void schedule_downlink(std::uint32_t slot);
    void schedule_compare(std::uint32_t slot);

    ChannelSpec slot_channel(std::uint32_t slot, std::size_t packets) const;
    std::vector<std::uint32_t> slot_seqs(const std::vector<ChannelConfig::SlotSeqs>& v,
                                         std::uint32_t slot) const;

    void deliver_uplane(std::uint32_t slot, const FronthaulPacket& pkt);
    void finish_assembly(std::uint32_t slot);
    void start_ul_processing(std::uint32_t slot, const Bytes& payload, double ready);
    void egress_downlink(std::uint32_t slot, const Bytes& iq_bytes, double t);
    void deliver_ul_output(std::uint32_t slot, const Bytes& tb_out, double t);

    void slot_failure(std::uint32_t slot, const std::string& reason, const std::string& detail);
    void slot_done(std::uint32_t slot, double end_time);
    void note_output(std::uint32_t slot, const Bytes& iq_bytes, const Bytes& tb);
    void emit_cplane(std::uint32_t slot, const char* milestone);

    // High-PHY jobs through the offload engine: enqueue at t, complete at
    // t + proc, then hand the output to done(output, t + proc).
    void run_high_phy_job(std::uint32_t slot, const char* half, HighPhyJob job, double t,
                          double proc, std::function<void(HighPhyJobOutput, double)> done);

    // Stage-by-stage chain execution with per-stage placement: accelerated
    // stages hop host->device->host through the scratch pools.
    struct ChainPos {
        StageValue value;
        std::size_t stage = 0;
        std::size_t last = 0;
        double t = 0.0;
        std::uint32_t slot = 0;
        std::function<void(StageValue, double)> done;
    };
    void run_chain(std::uint32_t slot, std::size_t first, std::size_t last, StageValue v0,
                   double t0, std::function<void(StageValue, double)> done);
    void chain_step(std::shared_ptr<ChainPos> pos);
    bool stage_accelerated(std::size_t stage) const;
    const char* stage_half(std::size_t stage) const {
        return stage < kStagesPerDirection ? "dl" : "ul";
    }

    ScenarioConfig cfg_;
    std::uint64_t seed_;
    EventTrace trace_;
    MemorySystem mem_;
    TransferCounters counters_;
    Transport transport_;
    DeviceRegistry registry_;

    std::unique_ptr<AalLpu> lpu_;
    ProfileInstance* high_phy_ = nullptr;
    ProfileInstance* fec_ = nullptr;
    QueueId high_phy_queue_ = 0;
    QueueId fec_queue_ = 0;
    double device_free_us_ = 0.0;

    PoolId uplane_pool_ = 0;
    PoolId payload_pool_ = 0;
    PoolId header_pool_ = 0;
    PoolId cplane_pool_ = 0;
    PoolId l2_pool_ = 0;
    PoolId host_scratch_ = 0;
    PoolId device_scratch_ = 0;

    struct Event {
        int slot = -1;
        const char* half = "-";
        std::function<void()> fn;
    };
    // Keyed by (time, insertion order): deterministic execution order with
    // insertion-order tie-break.
    std::map<std::pair<double, std::uint64_t>, Event> events_;
    std::uint64_t next_order_ = 0;

    std::vector<SlotState> slots_;
    std::vector<Bytes> slot_outputs_;
};

void Simulator::at(double t, int slot, const char* half, std::function<void()> fn) {
    events_.emplace(std::make_pair(t, next_order_++), Event{slot, half, std::move(fn)});
}

void Simulator::run_events() {
    while (!events_.empty()) {
        auto it = events_.begin();
        double t = it->first.first;
        Event e = std::move(it->second);
        events_.erase(it);
        trace_.set_time(t);
        trace_.set_context("slot", e.slot < 0 ? "-" : std::to_string(e.slot));
        trace_.set_context("half", e.half);
        TransferCounters::Snapshot before = counters_.snapshot();
        e.fn();
        TransferCounters::Snapshot after = counters_.snapshot();
        if (e.slot >= 0) {
            SlotMetrics& m = slots_[static_cast<std::size_t>(e.slot)].metrics;
            std::uint64_t dt = after.host_device_transfers - before.host_device_transfers;
            std::uint64_t db = after.host_device_bytes - before.host_device_bytes;
            m.host_device_transfers += dt;
            m.host_device_bytes += db;
            if (std::string_view(e.half) == "dl") m.dl_transfers += dt;
            if (std::string_view(e.half) == "ul") m.ul_transfers += dt;
        }
    }
}

ChannelSpec Simulator::slot_channel(std::uint32_t slot, std::size_t packets) const {
    ChannelSpec spec;
    DetRng rng(slot_seed(slot) ^ 0xC0FFEEull);
    switch (cfg_.channel.permutation) {
        case ChannelConfig::Permutation::Identity: break;
        case ChannelConfig::Permutation::Reverse:
            spec.permutation.resize(packets);
            for (std::size_t i = 0; i < packets; ++i)
                spec.permutation[i] = static_cast<std::uint32_t>(packets - 1 - i);
            break;
        case ChannelConfig::Permutation::Seeded:
            spec.permutation.resize(packets);
            for (std::size_t i = 0; i < packets; ++i)
                spec.permutation[i] = static_cast<std::uint32_t>(i);
            rng.shuffle(spec.permutation);
            break;
    }
    if (cfg_.channel.max_delay_us > 0.0) {
        spec.delay_us.resize(packets);
        for (auto& d : spec.delay_us) d = rng.uniform01() * cfg_.channel.max_delay_us;
    }
    for (std::uint32_t s : slot_seqs(cfg_.channel.drops, slot)) spec.drop_seqs.insert(s);
    return spec;
}

std::vector<std::uint32_t> Simulator::slot_seqs(const std::vector<ChannelConfig::SlotSeqs>& v,
                                                std::uint32_t slot) const {
    std::vector<std::uint32_t> out;
    for (const auto& ss : v)
        if (ss.slot == slot) out.insert(out.end(), ss.seqs.begin(), ss.seqs.end());
    return out;
}

bool Simulator::stage_accelerated(std::size_t stage) const {
    // accelerated_stages are direction-relative for uplink/downlink runs and
    // absolute over the eight-stage loopback for compare runs.
    std::size_t rel = stage;
    if (cfg_.direction == Direction::Uplink) rel = stage - kStagesPerDirection;
    return std::find(cfg_.accelerated_stages.begin(), cfg_.accelerated_stages.end(),
                     static_cast<std::uint32_t>(rel)) != cfg_.accelerated_stages.end();
}

void Simulator::setup() {
    for (const auto& d : cfg_.devices) registry_.register_device(d);
    int dev_id = cfg_.devices.front().device_id;
    registry_.lifecycle(dev_id, LifecycleOp::Init);
    registry_.lifecycle(dev_id, LifecycleOp::Start);
    lpu_ = std::make_unique<AalLpu>(registry_, dev_id, 0, 1, trace_);

    const auto& profiles = cfg_.devices.front().supported_profiles;
    std::size_t queue_depth = std::max<std::size_t>(4, cfg_.num_slots);
    if (profiles.contains(Profile::HighPhyInline)) {
        high_phy_ = &lpu_->create_profile_instance(Profile::HighPhyInline);
        high_phy_queue_ = high_phy_->create_queue(0, queue_depth);
    }
    if (profiles.contains(Profile::FecLookaside)) {
        fec_ = &lpu_->create_profile_instance(Profile::FecLookaside);
        fec_queue_ = fec_->create_queue(0, queue_depth);
    }

    bool device_side = cfg_.offload_mode == OffloadMode::Inline;
    MemoryDomain data_domain = device_side ? MemoryDomain::device(dev_id) : MemoryDomain::host();

    std::size_t iq_bytes =
        phy::dl_output_symbols(cfg_.tb_size_bytes, cfg_.pipeline) * phy::kIqSampleBytes;
    std::size_t pps = packet_count_for(iq_bytes, cfg_.mtu);
    std::size_t dups = 0;
    for (const auto& ss : cfg_.channel.duplicates) dups = std::max(dups, ss.seqs.size());

    std::size_t seg = static_cast<std::size_t>(cfg_.mtu) - kPacketHeaderSize;
    uplane_pool_ = mem_.create_pool(data_domain, seg, (pps + dups + 4) * 2);
    payload_pool_ = mem_.create_pool(data_domain, iq_bytes, 4);
    header_pool_ = mem_.create_pool(MemoryDomain::host(), kPacketHeaderSize, (pps + 4) * 2);
    cplane_pool_ = mem_.create_pool(MemoryDomain::host(), 64, 8);
    l2_pool_ = mem_.create_pool(MemoryDomain::host(), cfg_.tb_size_bytes + 64, 8);

    std::size_t scratch = std::max<std::size_t>(iq_bytes + 64, cfg_.tb_size_bytes * 16 + 64);
    host_scratch_ = mem_.create_pool(MemoryDomain::host(), scratch, 16);
    device_scratch_ = mem_.create_pool(MemoryDomain::device(dev_id), scratch, 16);

    PoolId dl_ingest = mem_.create_pool(MemoryDomain::device(dev_id), cfg_.tb_size_bytes + 64, 8);
    PoolId ul_outbox = mem_.create_pool(MemoryDomain::device(dev_id), cfg_.tb_size_bytes + 64, 8);
    transport_.add_queue(kQueueDlIn, std::max<std::size_t>(4, cfg_.num_slots), dl_ingest);
    transport_.add_queue(kQueueUlOut, std::max<std::size_t>(4, cfg_.num_slots), ul_outbox);

    slots_.resize(cfg_.num_slots);
    slot_outputs_.assign(cfg_.num_slots, {});
    for (std::uint32_t s = 0; s < cfg_.num_slots; ++s) slots_[s].metrics.slot = s;
}

RunResult Simulator::run() {
    cfg_.validate();

    TraceFields begin_fields = {
        {"schema", "1"},
        {"direction", direction_name(cfg_.direction)},
        {"mode", offload_mode_name(cfg_.offload_mode)},
        {"strategy", reorder_strategy_name(cfg_.reorder_strategy)},
        {"num_slots", std::to_string(cfg_.num_slots)},
        {"slot_duration_us", fmt_double(cfg_.slot_duration_us)},
        {"tb_size_bytes", std::to_string(cfg_.tb_size_bytes)},
        {"mtu", std::to_string(cfg_.mtu)},
        {"seed", std::to_string(seed_)},
    };
    std::string stages;
    for (std::uint32_t s : cfg_.accelerated_stages)
        stages += (stages.empty() ? "" : ",") + std::to_string(s);
    begin_fields.emplace_back("accelerated", stages.empty() ? "-" : stages);
    trace_.append("sim", "run.begin", begin_fields);
    setup();

    for (std::uint32_t s = 0; s < cfg_.num_slots; ++s) {
        switch (cfg_.direction) {
            case Direction::Uplink: schedule_uplink(s); break;
            case Direction::Downlink: schedule_downlink(s); break;
            case Direction::CompareModes: schedule_compare(s); break;
        }
    }
    run_events();

    MetricsReport report;
    report.direction = direction_name(cfg_.direction);
    report.mode = offload_mode_name(cfg_.offload_mode);
    report.reorder_strategy = reorder_strategy_name(cfg_.reorder_strategy);
    report.num_slots = cfg_.num_slots;
    report.seed = seed_;
    report.slot_duration_us = cfg_.slot_duration_us;
    std::uint64_t hash = 1469598103934665603ull;
    double latency_sum = 0.0;
    double final_time = 0.0;
    for (std::uint32_t s = 0; s < cfg_.num_slots; ++s) {
        const SlotMetrics& m = slots_[s].metrics;
        report.slots.push_back(m);
        report.aggregate.host_device_transfers += m.host_device_transfers;
        report.aggregate.host_device_bytes += m.host_device_bytes;
        report.aggregate.max_slot_latency_us =
            std::max(report.aggregate.max_slot_latency_us, m.slot_latency_us);
        latency_sum += m.slot_latency_us;
        report.aggregate.deadline_misses += m.deadline_missed ? 1 : 0;
        report.aggregate.slots_failed += m.failed ? 1 : 0;
        hash = fnv1a64(slot_outputs_[s], hash);
        final_time = std::max(final_time, slot_start(s) + m.slot_latency_us);
    }
    report.aggregate.mean_slot_latency_us = latency_sum / static_cast<double>(cfg_.num_slots);
    report.aggregate.functional_hash = hash;

    trace_.set_time(final_time);
    trace_.set_context("slot", "-");
    trace_.set_context("half", "-");
    trace_.append("sim", "run.end", {{"functional_hash", std::to_string(hash)}});

    RunResult out;
    out.report = std::move(report);
    out.trace_text = serialize_trace(trace_.snapshot());
    return out;
}

void Simulator::note_output(std::uint32_t slot, const Bytes& iq_bytes, const Bytes& tb) {
    Bytes& o = slot_outputs_[slot];
    o.insert(o.end(), iq_bytes.begin(), iq_bytes.end());
    o.insert(o.end(), tb.begin(), tb.end());
}

void Simulator::emit_cplane(std::uint32_t slot, const char* milestone) {
    FronthaulPacket cp;
    cp.header.plane = kPlaneControl;
    cp.header.flow_id = 1;
    cp.header.slot_id = static_cast<std::uint16_t>(slot);
    cp.header.section_id = 1;
    cp.header.payload_len = 4;
    cp.payload = {0xC0, 0x01, static_cast<std::uint8_t>(slot >> 8),
                  static_cast<std::uint8_t>(slot)};
    Bytes wire = serialize_packet(cp);
    BufferId buf = mem_.alloc(cplane_pool_);
    mem_.write(buf, wire);
    trace_.append("nic", "cplane.tx", {{"bytes", std::to_string(wire.size())}});
    mem_.free_buffer(buf);
    trace_.append("l1c", milestone);
}

void Simulator::slot_failure(std::uint32_t slot, const std::string& reason,
                             const std::string& detail) {
    trace_.append("sim", "slot.failure",
                  {{"reason", reason}, {"detail", detail.empty() ? "-" : detail}});
    slots_[slot].metrics.failed = true;
    slot_done(slot, trace_.time());
}

void Simulator::slot_done(std::uint32_t slot, double end_time) {
    SlotState& st = slots_[slot];
    if (st.done) return;
    st.done = true;
    for (BufferId b : st.ingress) {
        if (mem_.info(b).ownership == Ownership::AppOwned) mem_.free_buffer(b);
    }
    st.ingress.clear();
    double t0 = slot_start(slot);
    st.metrics.slot_latency_us = end_time - t0;
    st.metrics.deadline_missed = end_time > t0 + cfg_.slot_duration_us;
    trace_.append("sim", "slot.done",
                  {{"latency_us", fmt_double(st.metrics.slot_latency_us)},
                   {"deadline_missed", st.metrics.deadline_missed ? "1" : "0"},
                   {"failed", st.metrics.failed ? "1" : "0"}});
}

void Simulator::run_high_phy_job(std::uint32_t slot, const char* half, HighPhyJob job, double t,
                                 double proc, std::function<void(HighPhyJobOutput, double)> done) {
    double start = std::max(t, device_free_us_);
    device_free_us_ = start + proc;
    auto shared_job = std::make_shared<HighPhyJob>(std::move(job));
    at(start, static_cast<int>(slot), half, [this, slot, shared_job] {
        JobId id = high_phy_->enqueue_job(high_phy_queue_, *shared_job);
        auto sel = high_phy_->scheduler_step();
        if (!sel || sel->job != id)
            fail(Errc::invalid_argument, "high-PHY engine selected an unexpected job");
        slots_[slot].running_job = std::move(sel);
    });
    double end = start + proc;
    at(end, static_cast<int>(slot), half, [this, slot, end, done = std::move(done)] {
        SlotState& st = slots_[slot];
        JobOutput out = ProfileInstance::execute(st.running_job->payload);
        auto hp = std::get<HighPhyJobOutput>(std::move(out));
        bool ok = hp.crc_ok;
        high_phy_->complete_job(st.running_job->job, ok, hp, ok ? "" : "crc_failure");
        // The simulator is the engine's single consumer and drains by poll.
        auto delivered = high_phy_->poll_completions(1);
        if (delivered.size() != 1 || delivered[0].job != st.running_job->job)
            fail(Errc::invalid_argument, "high-PHY completion was not delivered exactly once");
        st.running_job.reset();
        done(std::move(hp), end);
    });
}

// ------------------------------------------------------------------ uplink ---

void Simulator::schedule_uplink(std::uint32_t slot) {
    double T = slot_start(slot);

    at(T, static_cast<int>(slot), "ul", [this, slot, T] {
        SlotState& st = slots_[slot];
        trace_.append("sim", "slot.begin");
        trace_.append("l2", "ul.config_request");  // step 1
        emit_cplane(slot, "ul.cplane_sent");       // step 2

        // RU-side stimulus: the slot's over-the-air signal.
        DetRng rng(slot_seed(slot));
        st.tb_ref = rng.bytes(cfg_.tb_size_bytes);
        st.iq_ref = phy::iq_to_bytes(phy::dl_pipeline(st.tb_ref, cfg_.pipeline));

        std::size_t seg = static_cast<std::size_t>(cfg_.mtu) - kPacketHeaderSize;
        std::size_t pps = packet_count_for(st.iq_ref.size(), cfg_.mtu);
        std::vector<FronthaulPacket> packets(pps);
        for (std::size_t i = 0; i < pps; ++i) {
            std::size_t off = i * seg;
            std::size_t len = std::min(seg, st.iq_ref.size() - off);
            packets[i].header.plane = kPlaneUser;
            packets[i].header.flow_id = 1;
            packets[i].header.slot_id = static_cast<std::uint16_t>(slot);
            packets[i].header.seq_num = static_cast<std::uint32_t>(i);
            packets[i].header.payload_len = static_cast<std::uint16_t>(len);
            packets[i].payload.assign(st.iq_ref.begin() + static_cast<std::ptrdiff_t>(off),
                                      st.iq_ref.begin() + static_cast<std::ptrdiff_t>(off + len));
        }

        st.engine = std::make_unique<ReorderEngine>(
            cfg_.reorder_strategy, static_cast<std::uint16_t>(slot),
            static_cast<std::uint32_t>(pps), seg, st.iq_ref.size(), cfg_.placement);

        ChannelSpec spec = slot_channel(slot, pps);
        std::vector<Delivery> deliveries = apply_channel(packets, spec);
        for (std::uint32_t dup : slot_seqs(cfg_.channel.duplicates, slot)) {
            for (const Delivery& d : deliveries) {
                if (d.packet.header.seq_num == dup) {
                    deliveries.push_back(d);  // second copy: same time, later order
                    break;
                }
            }
        }
        st.deliveries_remaining = deliveries.size();

        for (const Delivery& d : deliveries) {
            FronthaulPacket pkt = d.packet;
            at(T + d.time_us, static_cast<int>(slot), "ul",
               [this, slot, pkt] { deliver_uplane(slot, pkt); });
        }

        // Drops are invisible to the DU, so missing packets only become a
        // failure at the slot boundary.
        at(T + cfg_.slot_duration_us, static_cast<int>(slot), "ul", [this, slot] {
            SlotState& s2 = slots_[slot];
            if (!s2.done && !s2.assembly_finalized) finish_assembly(slot);
        });
    });
}

void Simulator::deliver_uplane(std::uint32_t slot, const FronthaulPacket& pkt) {
    SlotState& st = slots_[slot];
    if (st.done) return;
    trace_.append("nic", "uplane.rx",
                  {{"seq", std::to_string(pkt.header.seq_num)},
                   {"bytes", std::to_string(pkt.payload.size())}});
    if (!st.step3_seen) {
        st.step3_seen = true;
        trace_.append("nic", "ul.uplane_ingress");  // step 3
    }
    // Wire packets round-trip through the codec on reception; ingress DMA
    // lands in the U-plane pool without touching the host<->device counters.
    FronthaulPacket parsed = parse_packet(serialize_packet(pkt));
    BufferId buf = mem_.alloc(uplane_pool_);
    mem_.write(buf, parsed.payload);
    st.ingress.push_back(buf);

    PlacementAction action = st.engine->submit(parsed, trace_.time());
    if (action == PlacementAction::Duplicate)
        trace_.append("hwa", "reorder.duplicate", {{"seq", std::to_string(parsed.header.seq_num)}});
    if (action == PlacementAction::Placed) {
        // Streaming placements overlap with later arrivals; record each one
        // when the placement engine finishes it.
        PlacementRecord p = *st.engine->last_placement();
        at(p.finish_us, static_cast<int>(slot), "ul", [this, p] {
            trace_.append("hwa", "reorder.place",
                          {{"seq", std::to_string(p.seq)},
                           {"offset", std::to_string(p.offset)},
                           {"strategy", reorder_strategy_name(cfg_.reorder_strategy)}});
        });
    }
    if (st.deliveries_remaining > 0) --st.deliveries_remaining;
    if (st.deliveries_remaining == 0 && st.engine->received() == st.engine->expected())
        finish_assembly(slot);
}

void Simulator::finish_assembly(std::uint32_t slot) {
    SlotState& st = slots_[slot];
    if (st.assembly_finalized || st.done) return;
    st.assembly_finalized = true;
    AssemblyResult r = st.engine->finalize();
    if (!r.complete) {
        std::string missing;
        for (std::uint32_t m : r.missing)
            missing += (missing.empty() ? "" : ",") + std::to_string(m);
        slot_failure(slot, "missing_packets", missing);
        return;
    }
    if (cfg_.reorder_strategy == ReorderStrategy::Sequential) {
        // The single placement pass happens now; streaming placements were
        // already recorded as the packets arrived.
        for (const PlacementRecord& p : r.placements) {
            at(p.finish_us, static_cast<int>(slot), "ul", [this, p] {
                trace_.append("hwa", "reorder.place",
                              {{"seq", std::to_string(p.seq)},
                               {"offset", std::to_string(p.offset)},
                               {"strategy", reorder_strategy_name(cfg_.reorder_strategy)}});
            });
        }
    }
    double ready = r.ready_time_us;
    Bytes payload = std::move(r.payload);
    at(ready, static_cast<int>(slot), "ul", [this, slot, payload, ready] {
        trace_.append("hwa", "ul.reorder_done");  // step 4
        start_ul_processing(slot, payload, ready);
    });
}

void Simulator::start_ul_processing(std::uint32_t slot, const Bytes& payload, double ready) {
    SlotState& st = slots_[slot];
    if (payload != st.iq_ref) {
        slot_failure(slot, "assembly_mismatch", "");
        return;
    }

    if (cfg_.offload_mode == OffloadMode::Inline) {
        trace_.append("hwa", "ul.pipeline_start");  // step 5
        double proc = 0.0;
        for (std::size_t s = kStagesPerDirection; s < kNumStages; ++s)
            proc += cfg_.stage_times.device[s];
        HighPhyJob job;
        job.dir = HighPhyJob::Dir::Uplink;
        job.cfg = cfg_.pipeline;
        job.iq = phy::iq_from_bytes(payload);
        run_high_phy_job(slot, "ul", std::move(job), ready, proc,
                         [this, slot](HighPhyJobOutput out, double t_end) {
                             SlotState& s2 = slots_[slot];
                             trace_.append("hwa", "pipeline.done", {{"chain", "ul"}});
                             if (!out.crc_ok || out.tb != s2.tb_ref) {
                                 slot_failure(slot, "crc_failure", "");
                                 return;
                             }
                             note_output(slot, s2.iq_ref, out.tb);
                             deliver_ul_output(slot, out.tb, t_end);
                         });
        return;
    }

    // Lookaside: the uplink chain runs on the host, hopping to the device for
    // the accelerated stages only.
    trace_.append("hwa", "ul.pipeline_start");  // step 5
    StageValue v;
    v.kind = StageValue::Kind::Iq;
    v.iq = phy::iq_from_bytes(payload);
    run_chain(slot, kStagesPerDirection, kNumStages - 1, std::move(v), ready,
              [this, slot](StageValue out, double t_end) {
                  at(t_end, static_cast<int>(slot), "ul", [this, slot, out, t_end] {
                      SlotState& s2 = slots_[slot];
                      trace_.append("hwa", "pipeline.done", {{"chain", "ul"}});
                      if (!out.crc_ok || out.tb != s2.tb_ref) {
                          slot_failure(slot, "crc_failure", "");
                          return;
                      }
                      note_output(slot, s2.iq_ref, out.tb);
                      // Output is already host-resident; handing it to L2 is
                      // host-local.
                      trace_.append("l2", "ul.output_delivered");  // step 6
                      slot_done(slot, t_end);
                  });
              });
}

void Simulator::deliver_ul_output(std::uint32_t slot, const Bytes& tb_out, double t) {
    // Step 6: the device output buffer reaches L2 through the transport
    // abstraction, which is the one counted device->host hop of the flow.
    transport_.hwa_push_payload(kQueueUlOut, tb_out);
    BufferId dst = mem_.alloc(l2_pool_);
    ReceiveRequest rr;
    rr.queue = kQueueUlOut;
    rr.destination = RxDestination::AppAllocated;
    rr.buffers = {dst};
    rr.mode = IoMode::Sync;
    TransportResult res = transport_.receive_buffers(rr);
    const auto& st = std::get<CompletionStatus>(res);
    if (!st.success || mem_.read(dst) != tb_out)
        fail(Errc::invalid_argument, "uplink output delivery failed");
    mem_.free_buffer(dst);

    double arrive = t + transfer_time_us(tb_out.size(), cfg_.link);
    at(arrive, static_cast<int>(slot), "ul", [this, slot, arrive] {
        trace_.append("l2", "ul.output_delivered");  // step 6
        slot_done(slot, arrive);
    });
}

// ---------------------------------------------------------------- downlink ---

void Simulator::schedule_downlink(std::uint32_t slot) {
    double T = slot_start(slot);

    at(T, static_cast<int>(slot), "dl", [this, slot, T] {
        SlotState& st = slots_[slot];
        trace_.append("sim", "slot.begin");
        trace_.append("l2", "dl.config_request");  // step 1
        DetRng rng(slot_seed(slot));
        st.tb_ref = rng.bytes(cfg_.tb_size_bytes);

        if (cfg_.offload_mode == OffloadMode::Inline) {
            // Step 2: the TB crosses to the device through the transport
            // abstraction (the flow's single host->device transfer).
            BufferId src = mem_.alloc(l2_pool_);
            mem_.write(src, st.tb_ref);
            SendRequest sr;
            sr.queue = kQueueDlIn;
            sr.buffers = {src};
            sr.ownership = SendOwnership::TransferToHwa;
            sr.mode = IoMode::Sync;
            TransportResult res = transport_.send_buffers(sr);
            if (!std::get<CompletionStatus>(res).success)
                fail(Errc::invalid_argument, "downlink TB transfer failed");

            double t1 = T + transfer_time_us(st.tb_ref.size(), cfg_.link);
            double proc = 0.0;
            for (std::size_t s = 0; s < kStagesPerDirection; ++s)
                proc += cfg_.stage_times.device[s];

            at(t1, static_cast<int>(slot), "dl", [this, slot, t1, proc] {
                SlotState& s2 = slots_[slot];
                trace_.append("hwa", "dl.tb_transferred");  // step 2 milestone
                // One TB per slot; overlapping slots pop their own in order.
                std::optional<BufferId> ingest = transport_.hwa_pop_ingest(kQueueDlIn);
                if (!ingest) fail(Errc::invalid_argument, "TB missing from device ingest");
                Bytes tb_dev = mem_.read(*ingest);
                mem_.hwa_release(*ingest);
                if (tb_dev != s2.tb_ref) fail(Errc::invalid_argument, "TB corrupted in transfer");

                emit_cplane(slot, "dl.cplane_sent");  // step 3, CPU control path

                HighPhyJob job;
                job.dir = HighPhyJob::Dir::Downlink;
                job.cfg = cfg_.pipeline;
                job.tb = tb_dev;
                run_high_phy_job(slot, "dl", std::move(job), t1, proc,
                                 [this, slot](HighPhyJobOutput out, double t_end) {
                                     trace_.append("hwa", "pipeline.done", {{"chain", "dl"}});
                                     egress_downlink(slot, phy::iq_to_bytes(out.iq), t_end);
                                 });
            });
            return;
        }

        // Lookaside: the TB never leaves the host up front; accelerated
        // stages hop through the scratch pools instead.
        emit_cplane(slot, "dl.cplane_sent");
        StageValue v;
        v.kind = StageValue::Kind::Tb;
        v.tb = st.tb_ref;
        run_chain(slot, 0, kStagesPerDirection - 1, std::move(v), T,
                  [this, slot](StageValue out, double t_end) {
                      at(t_end, static_cast<int>(slot), "dl", [this, slot, out, t_end] {
                          trace_.append("hwa", "pipeline.done", {{"chain", "dl"}});
                          egress_downlink(slot, phy::iq_to_bytes(out.iq), t_end);
                      });
                  });
    });
}

void Simulator::egress_downlink(std::uint32_t slot, const Bytes& iq_bytes, double t) {
    at(t, static_cast<int>(slot), "dl", [this, slot, iq_bytes, t] {
        SlotState& st = slots_[slot];
        // Step 4: IQ samples land in the packet-payload pool.
        BufferId payload = mem_.alloc(payload_pool_);
        mem_.write(payload, iq_bytes);
        trace_.append("hwa", "dl.iq_stored", {{"bytes", std::to_string(iq_bytes.size())}});

        // Step 5: scatter-gather packets, CPU headers plus in-place payload.
        std::vector<ScatterGatherDescriptor> descs = packetize_slot(
            mem_, payload, cfg_.mtu, header_pool_, 1, static_cast<std::uint16_t>(slot));
        Bytes ru_assembled;
        bool ru_ok = true;
        std::uint32_t expect_seq = 0;
        for (const auto& d : descs) {
            Bytes wire = gather_packet(mem_, d);
            trace_.append("nic", "pkt.tx",
                          {{"seq", std::to_string(d.header.seq_num)},
                           {"bytes", std::to_string(wire.size())}});
            FronthaulPacket at_ru = parse_packet(wire);
            ru_ok = ru_ok && at_ru.header.seq_num == expect_seq++;
            ru_assembled.insert(ru_assembled.end(), at_ru.payload.begin(), at_ru.payload.end());
        }
        trace_.append("nic", "dl.packets_emitted", {{"packets", std::to_string(descs.size())}});
        for (const auto& d : descs) mem_.free_buffer(d.header_region.buffer);
        mem_.free_buffer(payload);

        // RU-side validation: the emitted stream must demodulate back to the
        // transport block that entered the pipeline.
        phy::UlResult ru = phy::ul_pipeline(phy::iq_from_bytes(ru_assembled), cfg_.pipeline);
        if (!ru_ok || ru_assembled != iq_bytes || !ru.crc_ok || ru.tb != st.tb_ref) {
            slot_failure(slot, "ru_validation", "");
            return;
        }
        note_output(slot, iq_bytes, ru.tb);
        slot_done(slot, t);
    });
}

// ------------------------------------------------------------ compare modes ---

void Simulator::schedule_compare(std::uint32_t slot) {
    double T = slot_start(slot);

    at(T, static_cast<int>(slot), "dl", [this, slot, T] {
        SlotState& st = slots_[slot];
        trace_.append("sim", "slot.begin");
        trace_.append("l2", "cmp.config_request");
        DetRng rng(slot_seed(slot));
        st.tb_ref = rng.bytes(cfg_.tb_size_bytes);

        if (cfg_.offload_mode == OffloadMode::Inline) {
            // Boundary transfer in, full loopback on device, boundary out.
            BufferId src = mem_.alloc(l2_pool_);
            mem_.write(src, st.tb_ref);
            SendRequest sr;
            sr.queue = kQueueDlIn;
            sr.buffers = {src};
            sr.ownership = SendOwnership::TransferToHwa;
            sr.mode = IoMode::Sync;
            TransportResult res = transport_.send_buffers(sr);
            if (!std::get<CompletionStatus>(res).success)
                fail(Errc::invalid_argument, "compare TB transfer failed");

            double t1 = T + transfer_time_us(st.tb_ref.size(), cfg_.link);
            double dl_proc = 0.0;
            double ul_proc = 0.0;
            for (std::size_t s = 0; s < kStagesPerDirection; ++s)
                dl_proc += cfg_.stage_times.device[s];
            for (std::size_t s = kStagesPerDirection; s < kNumStages; ++s)
                ul_proc += cfg_.stage_times.device[s];

            at(t1, static_cast<int>(slot), "dl", [this, slot, t1, dl_proc, ul_proc] {
                trace_.append("hwa", "cmp.tb_transferred");
                std::optional<BufferId> ingest = transport_.hwa_pop_ingest(kQueueDlIn);
                if (!ingest) fail(Errc::invalid_argument, "TB missing from device ingest");
                Bytes tb_dev = mem_.read(*ingest);
                mem_.hwa_release(*ingest);

                HighPhyJob dl_job;
                dl_job.dir = HighPhyJob::Dir::Downlink;
                dl_job.cfg = cfg_.pipeline;
                dl_job.tb = tb_dev;
                run_high_phy_job(
                    slot, "dl", std::move(dl_job), t1, dl_proc,
                    [this, slot, ul_proc](HighPhyJobOutput dl_out, double t2) {
                        SlotState& s3 = slots_[slot];
                        Bytes iq_bytes = phy::iq_to_bytes(dl_out.iq);
                        s3.iq_ref = iq_bytes;
                        HighPhyJob ul_job;
                        ul_job.dir = HighPhyJob::Dir::Uplink;
                        ul_job.cfg = cfg_.pipeline;
                        ul_job.iq = dl_out.iq;
                        run_high_phy_job(
                            slot, "ul", std::move(ul_job), t2, ul_proc,
                            [this, slot, iq_bytes](HighPhyJobOutput ul_out, double t3) {
                                SlotState& s4 = slots_[slot];
                                if (!ul_out.crc_ok || ul_out.tb != s4.tb_ref) {
                                    slot_failure(slot, "crc_failure", "");
                                    return;
                                }
                                note_output(slot, iq_bytes, ul_out.tb);
                                deliver_ul_output(slot, ul_out.tb, t3);
                            });
                    });
            });
            return;
        }

        // Lookaside arm: every stage host-resident except the accelerated set.
        StageValue v;
        v.kind = StageValue::Kind::Tb;
        v.tb = st.tb_ref;
        run_chain(slot, 0, kNumStages - 1, std::move(v), T,
                  [this, slot](StageValue out, double t_end) {
                      at(t_end, static_cast<int>(slot), "ul", [this, slot, out, t_end] {
                          SlotState& s2 = slots_[slot];
                          if (!out.crc_ok || out.tb != s2.tb_ref) {
                              slot_failure(slot, "crc_failure", "");
                              return;
                          }
                          note_output(slot, s2.iq_ref, out.tb);
                          trace_.append("l2", "cmp.output_delivered");
                          slot_done(slot, t_end);
                      });
                  });
    });
}

// -------------------------------------------------------------- chain runner ---

void Simulator::run_chain(std::uint32_t slot, std::size_t first, std::size_t last, StageValue v0,
                          double t0, std::function<void(StageValue, double)> done) {
    auto pos = std::make_shared<ChainPos>();
    pos->value = std::move(v0);
    pos->stage = first;
    pos->last = last;
    pos->t = t0;
    pos->slot = slot;
    pos->done = std::move(done);
    chain_step(pos);
}

void Simulator::chain_step(std::shared_ptr<ChainPos> pos) {
    // Each call schedules exactly one event at pos->t; the stage runs inside
    // that event so values and byte sizes are read at execution time.
    if (pos->stage > pos->last) {
        pos->done(std::move(pos->value), pos->t);
        return;
    }
    const std::size_t stage = pos->stage;
    const std::uint32_t slot = pos->slot;
    const char* half = stage_half(stage);

    if (!stage_accelerated(stage)) {
        at(pos->t, static_cast<int>(slot), half, [this, pos, stage] {
            trace_.append("l1c", "stage.exec",
                          {{"stage", stage_name(stage)}, {"placement", "host"}});
            pos->value = run_stage(stage, pos->value, cfg_.pipeline);
            if (pos->value.kind == StageValue::Kind::Iq && stage == 3)
                slots_[pos->slot].iq_ref = phy::iq_to_bytes(pos->value.iq);
            pos->t += cfg_.stage_times.host[stage];
            pos->stage += 1;
            chain_step(pos);
        });
        return;
    }

    // Accelerated stage: input copy to the device, kernel, output copy back.
    at(pos->t, static_cast<int>(slot), half, [this, pos, stage, slot, half] {
        Bytes in_bytes = stage_value_bytes(pos->value);
        double t_in = transfer_time_us(in_bytes.size(), cfg_.link);
        double dt = cfg_.stage_times.device[stage];

        BufferId h_src = mem_.alloc(host_scratch_);
        mem_.write(h_src, in_bytes);
        BufferId d_in = mem_.copy_across(h_src, device_scratch_, counters_);
        mem_.free_buffer(h_src);
        mem_.free_buffer(d_in);
        trace_.append("hwa", "stage.exec",
                      {{"stage", stage_name(stage)}, {"placement", "device"}});

        bool is_fec = stage == 1 || stage == 6;
        if (is_fec && fec_) {
            // FEC offloaded through its lookaside profile instance.
            FecJob job;
            job.op = stage == 1 ? FecJob::Op::Encode : FecJob::Op::Decode;
            job.code = cfg_.pipeline.code;
            job.bits = pos->value.bits;
            JobId id = fec_->enqueue_job(fec_queue_, std::move(job));
            auto sel = fec_->scheduler_step();
            if (!sel || sel->job != id)
                fail(Errc::invalid_argument, "FEC engine selected an unexpected job");
            JobOutput out = ProfileInstance::execute(sel->payload);
            auto fec_out = std::get<FecJobOutput>(std::move(out));
            fec_->complete_job(sel->job, true, fec_out);
            auto delivered = fec_->poll_completions(1);
            if (delivered.size() != 1 || delivered[0].job != sel->job)
                fail(Errc::invalid_argument, "FEC completion was not delivered exactly once");
            StageValue v;
            v.kind = StageValue::Kind::Bits;
            v.bits = std::move(fec_out.bits);
            pos->value = std::move(v);
        } else {
            pos->value = run_stage(stage, pos->value, cfg_.pipeline);
        }
        if (pos->value.kind == StageValue::Kind::Iq && stage == 3)
            slots_[pos->slot].iq_ref = phy::iq_to_bytes(pos->value.iq);

        // The result copies back once the device has finished computing.
        at(pos->t + t_in + dt, static_cast<int>(slot), half, [this, pos] {
            Bytes out_bytes = stage_value_bytes(pos->value);
            BufferId d_out = mem_.alloc(device_scratch_);
            mem_.write(d_out, out_bytes);
            BufferId h_out = mem_.copy_across(d_out, host_scratch_, counters_);
            mem_.free_buffer(d_out);
            mem_.free_buffer(h_out);
            pos->t = trace_.time() + transfer_time_us(out_bytes.size(), cfg_.link);
            pos->stage += 1;
            chain_step(pos);
        });
    });
}

}  // namespace

// ----------------------------------------------------------- public helpers ---

RunResult run_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
    Simulator sim(cfg, seed);
    return sim.run();
}

CompareOutcome compare_modes(const ScenarioConfig& cfg, std::uint64_t seed) {
    if (cfg.direction != Direction::CompareModes)
        fail(Errc::config_invalid, "direction: compare_modes required for mode comparison");
    ScenarioConfig inline_cfg = cfg;
    inline_cfg.offload_mode = OffloadMode::Inline;
    ScenarioConfig lookaside_cfg = cfg;
    lookaside_cfg.offload_mode = OffloadMode::Lookaside;

    Simulator inline_sim(inline_cfg, seed);
    CompareOutcome out;
    out.inline_run = inline_sim.run();
    Simulator lookaside_sim(lookaside_cfg, seed);
    out.lookaside_run = lookaside_sim.run();

    out.outputs_match = inline_sim.slot_outputs() == lookaside_sim.slot_outputs();
    std::uint64_t inline_t = out.inline_run.report.aggregate.host_device_transfers;
    std::uint64_t lookaside_t = out.lookaside_run.report.aggregate.host_device_transfers;
    out.transfer_ratio =
        static_cast<double>(lookaside_t) / static_cast<double>(std::max<std::uint64_t>(1, inline_t));
    return out;
}

MetricsReport fold_trace(const std::string& trace_text) {
    std::vector<TraceEvent> events = parse_trace(trace_text);
    if (events.empty() || events.front().kind != "run.begin")
        fail(Errc::io_error, "trace does not start with run.begin");
    const TraceEvent& begin = events.front();

    MetricsReport r;
    r.direction = *begin.field("direction");
    r.mode = *begin.field("mode");
    r.reorder_strategy = *begin.field("strategy");
    r.num_slots = static_cast<std::uint32_t>(begin.field_u64("num_slots"));
    r.seed = begin.field_u64("seed");
    r.slot_duration_us = begin.field_double("slot_duration_us");
    r.slots.resize(r.num_slots);
    for (std::uint32_t s = 0; s < r.num_slots; ++s) r.slots[s].slot = s;

    auto slot_of = [](const TraceEvent& e) -> int {
        const std::string* v = e.field("slot");
        if (!v || *v == "-") return -1;
        return static_cast<int>(std::strtol(v->c_str(), nullptr, 10));
    };

    std::vector<double> done_time(r.num_slots, 0.0);
    for (const TraceEvent& e : events) {
        int s = slot_of(e);
        if (e.kind == "mem.copy" && s >= 0) {
            SlotMetrics& m = r.slots[static_cast<std::size_t>(s)];
            if (e.field_u64("hd") == 1) {
                m.host_device_transfers += 1;
                m.host_device_bytes += e.field_u64("bytes");
                const std::string* half = e.field("half");
                if (half && *half == "dl") m.dl_transfers += 1;
                if (half && *half == "ul") m.ul_transfers += 1;
            }
        } else if (e.kind == "slot.failure" && s >= 0) {
            r.slots[static_cast<std::size_t>(s)].failed = true;
        } else if (e.kind == "slot.done" && s >= 0) {
            done_time[static_cast<std::size_t>(s)] = e.time_us;
        } else if (e.kind == "run.end") {
            r.aggregate.functional_hash = e.field_u64("functional_hash");
        }
    }

    double latency_sum = 0.0;
    for (std::uint32_t s = 0; s < r.num_slots; ++s) {
        SlotMetrics& m = r.slots[s];
        double t0 = static_cast<double>(s) * r.slot_duration_us;
        m.slot_latency_us = done_time[s] - t0;
        m.deadline_missed = done_time[s] > t0 + r.slot_duration_us;
        r.aggregate.host_device_transfers += m.host_device_transfers;
        r.aggregate.host_device_bytes += m.host_device_bytes;
        r.aggregate.max_slot_latency_us =
            std::max(r.aggregate.max_slot_latency_us, m.slot_latency_us);
        latency_sum += m.slot_latency_us;
        r.aggregate.deadline_misses += m.deadline_missed ? 1 : 0;
        r.aggregate.slots_failed += m.failed ? 1 : 0;
    }
    r.aggregate.mean_slot_latency_us = latency_sum / static_cast<double>(r.num_slots);
    return r;
}

FlowCheck check_flow_conformance(const std::string& trace_text) {
    std::vector<TraceEvent> events = parse_trace(trace_text);
    if (events.empty() || events.front().kind != "run.begin")
        return {false, "trace does not start with run.begin"};
    std::string direction = *events.front().field("direction");
    std::uint32_t num_slots = static_cast<std::uint32_t>(events.front().field_u64("num_slots"));

    std::vector<std::string> expected;
    if (direction == "uplink") {
        expected = {"ul.config_request", "ul.cplane_sent",    "ul.uplane_ingress",
                    "ul.reorder_done",   "ul.pipeline_start", "ul.output_delivered"};
    } else if (direction == "downlink") {
        expected = {"dl.config_request", "dl.tb_transferred", "dl.cplane_sent", "dl.iq_stored",
                    "dl.packets_emitted"};
    } else {
        return {true, "compare_modes trace has no milestone contract"};
    }
    // Lookaside downlink never stages the TB to the device.
    if (direction == "downlink" && *events.front().field("mode") == "lookaside")
        expected = {"dl.config_request", "dl.cplane_sent", "dl.iq_stored", "dl.packets_emitted"};

    std::vector<std::vector<std::string>> milestones(num_slots);
    std::vector<bool> failed(num_slots, false);
    for (const TraceEvent& e : events) {
        const std::string* sv = e.field("slot");
        if (!sv || *sv == "-") continue;
        std::size_t s = static_cast<std::size_t>(std::strtoul(sv->c_str(), nullptr, 10));
        if (s >= num_slots) continue;
        if (e.kind == "slot.failure") failed[s] = true;
        if (std::find(expected.begin(), expected.end(), e.kind) != expected.end())
            milestones[s].push_back(e.kind);
    }

    for (std::uint32_t s = 0; s < num_slots; ++s) {
        if (failed[s]) {
            // A failed slot must stop cleanly partway through the flow.
            if (milestones[s].size() >= expected.size())
                return {false, "slot " + std::to_string(s) + " failed but ran every step"};
            for (std::size_t i = 0; i < milestones[s].size(); ++i)
                if (milestones[s][i] != expected[i])
                    return {false, "slot " + std::to_string(s) + " milestone " + std::to_string(i) +
                                       " is " + milestones[s][i] + ", expected " + expected[i]};
            continue;
        }
        if (milestones[s] != expected) {
            std::string got;
            for (const auto& m : milestones[s]) got += (got.empty() ? "" : " ") + m;
            return {false, "slot " + std::to_string(s) + " milestones [" + got +
                               "] do not match the canonical order"};
        }
    }
    return {true, ""};
}

}  // namespace aalsim
